//! Flexible-joint robot simulation with model-free motor friction observers.
//!
//! Modules build bottom-up: [`friction`] and [`plant`] describe the physics,
//! [`control`] and [`observer`] the compensation, [`sim`] couples them and
//! [`verify`] bundles the analytic self-checks.

pub mod control;
pub mod friction;
pub mod observer;
pub mod ode;
pub mod plant;
pub mod sim;
pub mod verify;
