//! Chain recurrence, Conley decompositions and complete Lyapunov functions
//! for dynamical systems sampled on finite metric spaces.
//!
//! The pipeline runs bottom up: a [`space::MetricSample`] carries the
//! metric, a [`systems::System`] is sampled into a [`systems::SampledMap`],
//! an [`errfn::ErrorFunction`] fixes per-point jump tolerances, and
//! [`chains`], [`conley`] and [`lyapunov`] compute on the resulting chain
//! graph. [`config`] and [`cli`] drive the same steps from a TOML file.

pub mod space;
pub mod systems;
pub mod errfn;
pub mod chains;
pub mod conley;
pub mod lyapunov;
pub mod config;
pub mod cli;
pub mod error;

pub use chains::{chain_recurrent_limit, ChainGraph, ChainLadder};
pub use conley::{attracting_set, conley_decomposition, is_trapping, repelling_set, TrapKind, TrapVerdict};
pub use errfn::{make_error, ErrorFunction, ErrorSpec};
pub use error::{Error, Result};
pub use lyapunov::{flow_lyapunov, global_lyapunov, region_lyapunov, verify_global, ScalarField};
pub use space::{GridSpec, MetricKind, MetricSample, PointSet};
pub use systems::{Builtin, SampledMap, System};
