//! Radial spectral simulator and verification suite for the 3D defocusing
//! energy-critical nonlinear Schrödinger equation with repulsive harmonic
//! potential, `i u_t = -(1/2) Lap u - (1/2)|x|^2 u + |u|^4 u`.
//!
//! The state is the reduced radial field `w(r) = r u(r)` on a truncated
//! half-line with Dirichlet ends, where the radial Laplacian is an exact
//! second derivative and sine-spectral methods apply without constant loss.

pub mod analysis;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod field;
pub mod grid;
pub mod linear;
pub mod rundir;
pub mod scattering;
pub mod spectral;

pub use analysis::{
    classify, detect_bubble, mass_persistence, remove_bubble, remove_bubble_at,
    verify_concentration, BubbleRemoval, BubbleReport, Classification, Detection, C_DET_DEFAULT,
    C_ETA12_DEFAULT,
};
pub use config::{RunConfig, DT_SAFETY};
pub use diagnostics::{
    decay_horizon, decay_margin, energy_identity_residual, ledger, ledger_series, local_mass,
    morawetz, morawetz_interval_sum, partition_intervals, spacetime_norm, EnergyLedger,
    IntervalPartition, MorawetzReport,
};
pub use error::{Error, Result};
pub use evolve::{convergence_order, evolve, evolve_from, evolve_signed, step, SnapshotStream};
pub use field::{Profile, RadialField};
pub use grid::RadialGrid;
pub use linear::{
    dispersive_ratio, embedding_ratio, galilean_apply, heisenberg_residual, linear_flow,
    mehler_apply, mehler_apply_l1, Galilean, GalileanMethod, PropagatorPlan, T_MIN_KERNEL,
};
pub use rundir::{
    ledger_csv, read_ledger, read_manifest, read_snapshot, read_stream, snapshot_paths,
    verify_integrity, write_run_dir, LedgerRow, Manifest, LEDGER_HEADER,
};
pub use scattering::{
    cauchy_trace, extract_uminus, extract_uplus, first_duhamel_correction, pullback,
    scattering_config, small_data_experiment, trace_times, wave_operator_round_trip, CauchyTrace,
    ScatteringState, SmallDataReport, SmallDataRow,
};
pub use spectral::{bernstein_ratio, smooth_cutoff, Dst, MultiplierBank};
