#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csvio;
pub mod error;
pub mod functionals;
pub mod ig;
pub mod ivp;
pub mod ks;
pub mod noise;
pub mod paths;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use paths::{CadlagPath, ContinuousPath, ExitTime, Tail, TailKind};
