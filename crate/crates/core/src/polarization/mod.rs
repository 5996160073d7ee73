//! Two-qubit polarization states, analyzer settings, single-qubit channels
//! and entanglement measures.

mod channel;
mod io;
mod setting;
mod state;

pub use channel::{PolarizationChannel, Qubit};
pub use io::{format_density_matrix, parse_density_matrix, DENSITY_HEADER};
pub use setting::{AnalyzerSetting, Basis};
pub use state::{
    apply_channel, coincidence_probability, fidelity_to_pure, log_negativity, negativity, partial_transpose,
    visibility_of_state, Bell, TwoQubitState,
};

/// (|HH> + e^{iφ}|VV>)/√2, with Φ− adding π to the phase.
pub fn bell_state(which: Bell, phase: f64) -> TwoQubitState {
    TwoQubitState::bell(which, phase)
}
