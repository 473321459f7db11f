//! Experiment harness: configuration, ensemble voting, checkpoint
//! persistence, report emission, and the end-to-end pipeline.

pub mod checkpoint;
pub mod config;
pub mod ensemble;
pub mod pipeline;
pub mod report;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointContents, CheckpointMeta, EncoderDescriptor,
    ExpansionDescriptor, MemberMatrices,
};
pub use config::{DatasetSource, EncoderSource, ExperimentConfig};
pub use ensemble::{ensemble_predict, predict_from_probabilities, softmax, EnsembleMember};
pub use pipeline::{
    execute_experiment, joint_comparison, prepare, restore_members, run_experiment,
    ExperimentOutcome, OracleCheck, Prepared, ORACLE_TOLERANCE,
};
pub use report::{emit_report, RunReport, RunResult, RunTiming, TimingReport, ValidationScore};
