//! Location-aided energy balancing for relay stations in hexagonal
//! cellular networks.
//!
//! * [`hexgeom`] builds the cell lattice and finds the candidate relays for
//!   a session.
//! * [`predictor`] is the per-relay two-parameter energy trend filter.
//! * [`netmodel`] holds relays, users and sessions and the handover protocol
//!   with its three selection strategies.
//! * [`simengine`] runs time-slotted trials and the strategy sweep.
//! * [`cli`] is the command-line front end.

pub mod cli;
pub mod hexgeom;
pub mod netmodel;
pub mod predictor;
pub mod simengine;

pub use hexgeom::{CellId, EdgeId, HexGrid, Point, RelayId};
pub use netmodel::{Choice, Strategy};
pub use predictor::PredictorState;
pub use simengine::{run_experiment, run_sweep, run_trial, MetricsRecord, SimConfig, SweepPlan, SweepTable};
