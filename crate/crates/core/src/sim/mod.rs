//! Scenario engine: coupled integration of plant, observer and controller,
//! named presets, trace diagnostics and sweep experiments.

mod config;
mod diagnostics;
mod engine;
mod experiments;
pub mod presets;
mod trace;

pub use config::*;
pub use diagnostics::*;
pub use engine::*;
pub use experiments::*;
pub use trace::*;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("state became non-finite at t = {t}")]
    Diverged { t: f64 },
    #[error("analysis window is empty or longer than the trace")]
    EmptyWindow,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}
