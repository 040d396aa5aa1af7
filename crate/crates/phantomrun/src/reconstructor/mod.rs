//! Containerized replay: baseline checkout, build-spec extraction from CI
//! configuration, container-plan emission, rebuild execution, and
//! reconstruction-failure classification.

mod build_spec;
mod causes;
mod checkout;
mod execute;
mod plan;

pub use build_spec::{
    extract_build_spec, list_jobs, matrix_instances, ActionAdapter, ExtractError, JobRef,
};
pub use causes::classify_reconstruction_failure;
pub use checkout::{checkout_baseline, read_ci_config_files, CheckoutError, SourceTree};
pub use execute::{ContainerRuntime, ExecuteError, ReplayResult};
pub use plan::{emit_container_plan, ContainerPlan};
