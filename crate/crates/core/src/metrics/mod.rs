//! Task-space comparison of nonlinear modes: Fréchet distances and spectral
//! coherence of backbone-point trajectories, integrated over arc length and
//! energy.

mod coherence;
mod compare;
mod frechet;

pub use coherence::{min_msc_coherence, Coherence, WelchOptions};
pub use compare::{
    coherence_signals, compare, energy_frequency_table, energy_integrated, modal_coherence, modal_frechet,
    modal_integral_coherence, modal_integral_frechet, shared_energy_grid, strobe, trapezoid_from, Component,
    ComparisonReport, EnergyFrequency, EnergyRow, MetricOptions, ModeBranch, Orbit, StrobeFrame, TaskCurve,
    ENERGY_MATCH_TOLERANCE,
};
pub use frechet::discrete_frechet;
