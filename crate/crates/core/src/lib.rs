#![allow(clippy::needless_range_loop)]

pub mod descent;
pub mod error;
pub mod format;
pub mod gridworld;
pub mod marl;
pub mod min_norm;
pub mod oracle;
pub mod problems;
pub mod vector;

pub use error::{Error, Result};
