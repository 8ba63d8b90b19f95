//! Performance bounds and optimal rate control for time-varying links.
//!
//! The crate models a sender that picks one rate per round of length `T`
//! against a link whose capacity changes between rounds. It provides:
//!
//! * capacity traces and Mahimahi ingestion ([`trace_io`]),
//! * ratio distributions and their load-conditional expectations
//!   ([`distributions`]),
//! * MIF / PMIF / SMF link models ([`link_models`]),
//! * lower-bound curves on (queuing delay, underutilization) ([`frontier`]),
//! * rate rules ([`control_laws`]) and their optimal constants
//!   ([`mdp_solver`]),
//! * a round-by-round simulator ([`sim_engine`]).

pub mod control_laws;
pub mod distributions;
pub mod error;
pub mod frontier;
pub mod link_models;
pub mod mdp_solver;
pub mod rng;
pub mod sim_engine;
pub mod trace_io;

pub use control_laws::{next_rate, raw_rate, rho_of, rho_pred, LawConfig, Observation};
pub use distributions::{Atoms, DistSummary, RatioDist};
pub use error::{Error, Result};
pub use frontier::{
    feasibility_max_c, lost_point, lost_throughput_frontier, mif_frontier, mif_point,
    pmif_frontier, point_dominated, smf_frontier, CurveKind, EdgeClamp, FrontierCurve,
    FrontierPoint, StateDetail,
};
pub use link_models::{
    fit_mif, fit_smf, gen_mif, gen_predictions, gen_smf, MifModel, PmifModel, PredictionSeries,
    SmfModel, SmfState,
};
pub use mdp_solver::{approx_c_smf, solve_mif, solve_pmif, MdpConfig, MdpSolution, SmfConstant};
pub use rng::SplitMix64;
pub use sim_engine::{
    check_queue_bound, monte_carlo, run, sweep, LinkModel, McResult, McSettings, PerfCurve,
    RunOptions, SimRecord, SimRun, SimSummary,
};
pub use trace_io::{CapacityTrace, DeliverySchedule, Origin};
