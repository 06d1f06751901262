//! Simulation and tuning toolkit for an induction motor drive under indirect
//! field-oriented control.
//!
//! The drive chain is a Mamdani fuzzy speed controller ([`fuzzy`]) feeding an
//! indirect vector controller ([`foc`]), whose three-phase current references
//! are tracked by a three-level hysteresis controller ([`hysteresis`]) driving
//! an ideal neutral-point-clamped inverter ([`inverter`]) into a dq induction
//! machine model ([`machine`]). [`sim`] wires the loop together and [`pso`]
//! tunes the nine fuzzy controller parameters against an IAE + ITAE fitness.

pub mod error;
pub mod foc;
pub mod fuzzy;
pub mod hysteresis;
pub mod inverter;
pub mod machine;
pub mod pso;
pub mod sim;

pub use error::{Error, Result};
