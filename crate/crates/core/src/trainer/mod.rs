//! Pipeline orchestration, training on the combined objective, and
//! evaluation.

mod config;
mod data;
mod eval;
mod hypothesis;
mod pipeline;
mod train;

pub use config::{Mode, TrainConfig};
pub use data::{prepare, read_dataset, Prepared, QaInstance};
pub use eval::{evaluate, evaluate_prepared, summarize, EvalRecord, QuestionOutcome};
pub use hypothesis::make_hypothesis;
pub use pipeline::{run_all_choices, run_pipeline, ChoiceRun, PipelineState};
pub use train::{
    log_to_jsonl, prepare_for_mode, reader_encoder, sample_chains, step_negatives, train, MetricsRecord, Model,
    TrainOutput,
};
