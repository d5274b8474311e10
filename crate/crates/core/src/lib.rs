pub mod bessel;
pub mod circuit_model;
pub mod constants;
pub mod error;
pub mod fidelity;
pub mod injection;
pub mod ode;
pub mod presets;
pub mod roots;
pub mod scalar;
pub mod sigproc;
pub mod steady_state;
pub mod time_domain;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Junction = circuit_model::JunctionParams<f64>;
pub type Resonator = steady_state::ResonatorParams<f64>;
pub type Operating = steady_state::OperatingPoint<f64>;
pub type PhaseNoise = fidelity::PhaseNoiseModel<f64>;
