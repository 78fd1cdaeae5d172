//! Mean-field simulation of a Bose-Einstein condensate wave packet
//! tunneling through a rectangular barrier whose interaction strength is
//! confined to the barrier, and time-of-flight measurement of the
//! tunneling time.

pub mod config;
pub mod error;
pub mod grid;
pub mod model;
pub mod observables;
pub mod propagator;
pub mod reference;
pub mod timing;
pub mod units;

pub use config::{SimConfig, Tolerances};
pub use error::{Error, Result};
pub use grid::Grid;
pub use model::{
    gaussian_packet, profile_eval, NonlinearitySpec, PacketSpec, PotentialSpec, Shape, WaveFunction,
};
pub use observables::Spectrum;
pub use propagator::{free_reference, propagate, split_step, SnapshotLog, StepPlan, Stepper};
pub use reference::reference_integrator;
pub use timing::{measure, measure_observed, tunneling_time, Measurement, TunnelingResult};
pub use units::{to_physical, PhysicalScale};
