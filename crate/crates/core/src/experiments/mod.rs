//! Simulation harness, noise sweeps and file formats.

pub mod io;
pub mod simulate;
pub mod sweep;

pub use io::{fmt17, io_roundtrip, sweep_csv, to_json, ObjectKind};
pub use simulate::{
    optimal_cglmp_gamma, optimal_cglmp_state, simulate_correlation, MeasurementSource, NoiseKind, Shots, SimulationRecord,
    SimulationSpec, Simulator, StateSource,
};
pub use sweep::{linear_grid, perturbation_sweep, positivity_threshold, reference_coherent_info, sweep_with, SweepRow, SWEEP_HEADER};
