pub mod config;
pub mod datasets;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod models;
pub mod numerics;
pub mod plot;
pub mod rng;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
