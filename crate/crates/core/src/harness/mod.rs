//! Instance generation, experiment configuration, batch runs and the trace
//! file format.

mod experiment;
mod generate;
mod trace;

pub use experiment::{
    regret_points, run_experiment, AlgorithmSpec, ExperimentBundle, ExperimentConfig, FamilyRow,
    InstanceSpec, Manifest, ManifestEntry, RegretFit, SeedFailure, TransformSpec, EXPERIMENT_SCHEMA_VERSION,
};
pub use generate::{generate_gridworld, generate_random_mdp, RandomMdpSpec, DEFAULT_MIX_EPS, GRID_ACTIONS};
pub use trace::{sha256_hex, verify_trace, AnyTrace, TraceKind, TRACE_SCHEMA_VERSION};
