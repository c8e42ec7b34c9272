//! Plain-text CSV dialect shared by the CLI and downstream plotting.
//!
//! Every file starts with `# pathvol v1 <kind> key=value ...`, optionally
//! followed by further `#` comment lines, then comma-separated rows.
//! Continuous paths are `x,value` rows. Càdlàg paths are `x,left,right`
//! rows; the tail is a final `from,left_limit,inf` row for `+inf` and
//! `from,NA,NA` for unresolved levels (its left limit is kept in the
//! header as `tail_left`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::paths::{CadlagPath, ContinuousPath, Tail, TailKind};

pub const MAGIC: &str = "pathvol";
pub const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Header {
    pub kind: String,
    pub meta: Vec<(String, String)>,
}

impl Header {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            meta: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn render(&self) -> String {
        let mut line = format!("# {MAGIC} {VERSION} {}", self.kind);
        for (k, v) in &self.meta {
            let _ = write!(line, " {k}={v}");
        }
        line
    }

    fn parse(line: &str) -> Result<Self> {
        let bad = |message: &str| Error::Parse {
            line: 1,
            message: message.to_string(),
        };
        let body = line.strip_prefix('#').ok_or_else(|| bad("missing header"))?;
        let mut words = body.split_whitespace();
        if words.next() != Some(MAGIC) || words.next() != Some(VERSION) {
            return Err(bad("expected `# pathvol v1 <kind>`"));
        }
        let kind = words.next().ok_or_else(|| bad("missing kind"))?.to_string();
        let mut meta = Vec::new();
        for w in words {
            let (k, v) = w
                .split_once('=')
                .ok_or_else(|| bad(&format!("metadata `{w}` is not key=value")))?;
            meta.push((k.to_string(), v.to_string()));
        }
        Ok(Self { kind, meta })
    }
}

/// A parsed file: header plus raw rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Header,
    /// `(line number, fields)` for every data row.
    pub rows: Vec<(usize, Vec<String>)>,
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let header = Header::parse(first)?;
    let rows = lines
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split(',').map(|f| f.trim().to_string()).collect()))
        .collect();
    Ok(Table { header, rows })
}

pub fn read_table(path: &Path) -> Result<Table> {
    parse_table(&fs::read_to_string(path)?)
}

fn timestamp_line() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated_unix={secs}")
}

fn preamble(header: &Header, timestamp: bool) -> String {
    let mut out = header.render();
    out.push('\n');
    if timestamp {
        out.push_str(&timestamp_line());
        out.push('\n');
    }
    out
}

/// Rows of equal-length numeric columns; `columns` names go into the header.
pub fn render_columns(header: &Header, columns: &[&str], data: &[&[f64]], timestamp: bool) -> String {
    let header = header.clone().with("columns", columns.join(","));
    let mut out = preamble(&header, timestamp);
    let n = data.first().map_or(0, |c| c.len());
    for i in 0..n {
        for (j, col) in data.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", col[i]);
        }
        out.push('\n');
    }
    out
}

pub fn render_continuous(header: &Header, p: &ContinuousPath, timestamp: bool) -> String {
    let mut out = preamble(header, timestamp);
    for (x, v) in p.nodes() {
        let _ = writeln!(out, "{x},{v}");
    }
    out
}

pub fn render_cadlag(header: &Header, p: &CadlagPath, timestamp: bool) -> String {
    let mut header = header.clone();
    if let Some(t) = p.tail() {
        if t.kind == TailKind::Unresolved {
            header = header.with("tail_left", t.left_limit);
        }
    }
    let mut out = preamble(&header, timestamp);
    for ((x, l), r) in p
        .breakpoints()
        .iter()
        .zip(p.left_values())
        .zip(p.right_values())
    {
        let _ = writeln!(out, "{x},{l},{r}");
    }
    match p.tail() {
        Some(t) if t.kind == TailKind::Infinite => {
            let _ = writeln!(out, "{},{},inf", t.from, t.left_limit);
        }
        Some(t) => {
            let _ = writeln!(out, "{},NA,NA", t.from);
        }
        None => {}
    }
    out
}

fn number(line: usize, field: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("`{field}` is not a number"),
    })
}

pub fn continuous_from_table(table: &Table) -> Result<ContinuousPath> {
    let mut grid = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: *line,
                message: "expected `x,value`".into(),
            });
        }
        grid.push(number(*line, &fields[0])?);
        values.push(number(*line, &fields[1])?);
    }
    ContinuousPath::new(grid, values)
}

pub fn cadlag_from_table(table: &Table) -> Result<CadlagPath> {
    let mut breakpoints = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut tail = None;
    for (line, fields) in &table.rows {
        if tail.is_some() {
            return Err(Error::Parse {
                line: *line,
                message: "row after the tail row".into(),
            });
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: *line,
                message: "expected `x,left,right`".into(),
            });
        }
        let x = number(*line, &fields[0])?;
        if fields[1] == "NA" && fields[2] == "NA" {
            let left_limit = match table.header.get("tail_left") {
                Some(v) => number(1, v)?,
                None => right.last().copied().unwrap_or(0.0),
            };
            tail = Some(Tail {
                from: x,
                left_limit,
                kind: TailKind::Unresolved,
            });
            continue;
        }
        let l = number(*line, &fields[1])?;
        let r = number(*line, &fields[2])?;
        if r == f64::INFINITY {
            tail = Some(Tail {
                from: x,
                left_limit: l,
                kind: TailKind::Infinite,
            });
            continue;
        }
        breakpoints.push(x);
        left.push(l);
        right.push(r);
    }
    CadlagPath::new(breakpoints, left, right, tail)
}

pub fn read_continuous(path: &Path) -> Result<ContinuousPath> {
    continuous_from_table(&read_table(path)?)
}

pub fn read_cadlag(path: &Path) -> Result<CadlagPath> {
    cadlag_from_table(&read_table(path)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// `key=value` lines.
pub fn render_report(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn parse_report(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or(Error::Parse {
                    line: i + 1,
                    message: format!("`{l}` is not key=value"),
                })
        })
        .collect()
}
