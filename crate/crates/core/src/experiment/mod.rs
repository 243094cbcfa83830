//! Configuration, orchestration and reporting of attack sweeps.

mod config;
mod report;
mod run;

pub use config::{AttackSettings, ExperimentConfig, ShadowSettings, TrainingMode};
pub use report::{
    read_results, results_to_string, summarize, write_results, write_summary, GroupKey, GroupValue,
    ResultRow, SummaryRow, RESULT_HEADER,
};
pub use run::{
    attach_advantages, attack_model_config, carve_data, fl_config, model_spec, query_accuracy,
    run_experiment, train_attack_for_mode, train_shadow_ensemble, train_target, DataCarve,
};
