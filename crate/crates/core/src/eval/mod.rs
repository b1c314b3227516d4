//! Metrics against the rendered ground truth, configuration, and the batch
//! experiment runner behind the command-line tools.

mod config;
mod experiment;
mod metrics;

pub use config::{ConfigOverrides, CONFIG_KEYS};
pub use experiment::{
    read_metrics, run_experiment, run_experiment_with, sample_pairs, summarize, swap_record,
    write_pair_images, write_summary, PairRecord, RunConfig, Summary, VariantSummary, METRICS_FILE,
    SUMMARY_FILE,
};
pub use metrics::{attribute_probe, mask_iou, mse, region_mse, ProbeScore};
