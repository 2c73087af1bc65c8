//! Dynamic cooperative games whose stage game depends on the previous
//! allocation, with checks for the fair, stable and credible cores.

pub mod bundled;
pub mod credible_core;
pub mod dynamics;
pub mod error;
pub mod fair_core;
pub mod game_core;
pub mod market;
pub mod reproduce;
pub mod spec_io;
pub mod stable_core;

pub use error::{Error, Result};
