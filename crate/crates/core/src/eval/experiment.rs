use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{attribute_probe, mask_iou, region_mse, ProbeScore};
use crate::diffusion::{make_schedule, EmpiricalDenoiser, NoisePredictor, NoiseSchedule};
use crate::error::{Error, Result};
use crate::hid::{run_headswap, SwapConfig, SwapResult};
use crate::imaging::{minmax_normalize, overlay_heatmap, write_field, write_image, write_mask};
use crate::iomask::{IOMaskConfig, MaskVariant};
use crate::synthgen::{
    enumerate_dataset, ground_truth_edit_mask, oracle_swap, render_avatar, AttributeSpec, NUM_SPECS,
};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// One swap evaluated against the rendered ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub pair_id: String,
    pub body_attrs: AttributeSpec,
    pub head_attrs: AttributeSpec,
    pub variant: MaskVariant,
    /// Mask against the ground-truth edit region.
    pub iou: f64,
    /// Output against the oracle over the oracle's head and hair.
    pub mse_head: f64,
    /// Output against the body image outside the mask.
    pub mse_outside: f64,
    pub attr_probe: ProbeScore,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub swap: SwapConfig,
    pub seed: u64,
    pub pairs: usize,
    pub out_dir: PathBuf,
    pub variants: Vec<MaskVariant>,
    /// Write wall-clock times into `runtime_ms`. Off by default so that
    /// repeated runs produce identical files.
    pub record_timing: bool,
    pub write_images: bool,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            swap: SwapConfig::default(),
            seed: 0,
            pairs: 50,
            out_dir: out_dir.into(),
            variants: MaskVariant::ALL.to_vec(),
            record_timing: false,
            write_images: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::invalid("pairs", "need at least one pair"));
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("variants", "need at least one mask variant"));
        }
        self.swap.validate()
    }
}

/// Draws `n` (body, head) pairs with `body != head` from a seeded ChaCha8 stream.
pub fn sample_pairs(seed: u64, n: usize) -> Vec<(AttributeSpec, AttributeSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let b = rng.gen_range(0..NUM_SPECS);
        let h = rng.gen_range(0..NUM_SPECS);
        if b != h {
            out.push((
                AttributeSpec::from_index(b).expect("in range"),
                AttributeSpec::from_index(h).expect("in range"),
            ));
        }
    }
    out
}

/// Scores a finished swap.
pub fn swap_record(
    pair_id: &str,
    body: AttributeSpec,
    head: AttributeSpec,
    variant: MaskVariant,
    result: &SwapResult,
    runtime_ms: f64,
) -> Result<PairRecord> {
    let body_image = render_avatar(body).image;
    let oracle = oracle_swap(body, head);
    Ok(PairRecord {
        pair_id: pair_id.to_string(),
        body_attrs: body,
        head_attrs: head,
        variant,
        iou: mask_iou(&result.mask, &ground_truth_edit_mask(body, head))?,
        mse_head: region_mse(&result.output, &oracle.image, &oracle.head_and_hair())?,
        mse_outside: region_mse(&result.output, &body_image, &result.mask.complement())?,
        attr_probe: attribute_probe(&result.output, body, head),
        runtime_ms,
    })
}

/// Writes the inputs, ground truth, and per-variant outputs of one pair.
pub fn write_pair_images(
    dir: &Path,
    body: AttributeSpec,
    head: AttributeSpec,
    outputs: &[(MaskVariant, &SwapResult)],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let body_image = render_avatar(body).image;
    write_image(&body_image, dir.join("body.ppm"))?;
    write_image(&render_avatar(head).image, dir.join("head.ppm"))?;
    write_image(&oracle_swap(body, head).image, dir.join("oracle.ppm"))?;
    for (variant, r) in outputs {
        let norm = minmax_normalize(&r.io_map);
        write_image(&r.output, dir.join(format!("{variant}_output.ppm")))?;
        write_mask(&r.mask, dir.join(format!("{variant}_mask.pgm")))?;
        write_field(&norm, dir.join(format!("{variant}_iomap.pgm")))?;
        write_image(
            &overlay_heatmap(&body_image, &norm)?,
            dir.join(format!("{variant}_overlay.ppm")),
        )?;
    }
    Ok(())
}

struct PairOutcome {
    body: AttributeSpec,
    head: AttributeSpec,
    pair_id: String,
    results: Vec<(MaskVariant, SwapResult, PairRecord)>,
}

fn run_pair<P: NoisePredictor + ?Sized>(
    idx: usize,
    body: AttributeSpec,
    head: AttributeSpec,
    cfg: &RunConfig,
    sched: &NoiseSchedule,
    pred: &P,
) -> Result<PairOutcome> {
    let pair_id = format!("p{idx:03}");
    let mut results = Vec::with_capacity(cfg.variants.len());
    for &variant in &cfg.variants {
        let swap = SwapConfig {
            mask: IOMaskConfig {
                variant,
                ..cfg.swap.mask
            },
            ..cfg.swap
        };
        let start = Instant::now();
        let result = run_headswap(body, head, &swap, sched, pred)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let runtime_ms = if cfg.record_timing { elapsed } else { 0.0 };
        let record = swap_record(&pair_id, body, head, variant, &result, runtime_ms)?;
        results.push((variant, result, record));
    }
    Ok(PairOutcome {
        body,
        head,
        pair_id,
        results,
    })
}

/// Runs the full batch with a freshly built dataset, predictor and schedule.
pub fn run_experiment(cfg: &RunConfig) -> Result<(Vec<PairRecord>, Summary)> {
    let sched = make_schedule(cfg.swap.steps)?;
    let pred = EmpiricalDenoiser::from_renders(&enumerate_dataset())?;
    run_experiment_with(cfg, &sched, &pred)
}

/// Runs every sampled pair under every requested variant. Pairs execute in
/// parallel; records are written by one sink in pair order.
pub fn run_experiment_with<P: NoisePredictor + ?Sized>(
    cfg: &RunConfig,
    sched: &NoiseSchedule,
    pred: &P,
) -> Result<(Vec<PairRecord>, Summary)> {
    cfg.validate()?;
    let pairs = sample_pairs(cfg.seed, cfg.pairs);
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    let outcomes: Vec<PairOutcome> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, &(body, head))| run_pair(i, body, head, cfg, sched, pred))
        .collect::<Result<_>>()?;

    let metrics_path = cfg.out_dir.join(METRICS_FILE);
    let file = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut sink = BufWriter::new(file);
    let mut records = Vec::new();
    for outcome in &outcomes {
        for (_, _, record) in &outcome.results {
            let line = serde_json::to_string(record).expect("record serializes");
            writeln!(sink, "{line}").map_err(|e| Error::io(&metrics_path, e))?;
            records.push(record.clone());
        }
        if cfg.write_images {
            let views: Vec<_> = outcome.results.iter().map(|(v, r, _)| (*v, r)).collect();
            let dir = cfg.out_dir.join("pairs").join(&outcome.pair_id);
            write_pair_images(&dir, outcome.body, outcome.head, &views)?;
        }
    }
    sink.flush().map_err(|e| Error::io(&metrics_path, e))?;

    let summary = summarize(&records);
    write_summary(&summary, &cfg.out_dir.join(SUMMARY_FILE))?;
    Ok((records, summary))
}

/// Reads `metrics.jsonl`, rejecting lines whose field set differs from [`PairRecord`].
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<PairRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Metrics {
            path: path.to_path_buf(),
            reason: format!("line {}: {e}", i + 1),
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: MaskVariant,
    pub count: usize,
    pub iou: f64,
    pub mse_head: f64,
    pub mse_outside: f64,
    /// Mean matched fraction of the attribute probe.
    pub attr_probe: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub variants: Vec<VariantSummary>,
}

/// Per-variant arithmetic means, in the order variants first appear.
pub fn summarize(records: &[PairRecord]) -> Summary {
    let mut order: Vec<MaskVariant> = Vec::new();
    for r in records {
        if !order.contains(&r.variant) {
            order.push(r.variant);
        }
    }
    let variants = order
        .into_iter()
        .map(|variant| {
            let rs: Vec<&PairRecord> = records.iter().filter(|r| r.variant == variant).collect();
            let n = rs.len() as f64;
            let mean = |f: &dyn Fn(&PairRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            VariantSummary {
                variant,
                count: rs.len(),
                iou: mean(&|r| r.iou),
                mse_head: mean(&|r| r.mse_head),
                mse_outside: mean(&|r| r.mse_outside),
                attr_probe: mean(&|r| r.attr_probe.fraction()),
                runtime_ms: mean(&|r| r.runtime_ms),
            }
        })
        .collect();
    Summary {
        records: records.len(),
        variants,
    }
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} records", self.records)?;
        writeln!(
            f,
            "{:<8} {:>5} {:>8} {:>10} {:>11} {:>10} {:>11}",
            "variant", "n", "iou", "mse_head", "mse_outside", "attr_probe", "runtime_ms"
        )?;
        for v in &self.variants {
            writeln!(
                f,
                "{:<8} {:>5} {:>8.4} {:>10.5} {:>11.5} {:>10.4} {:>11.2}",
                v.variant.as_str(),
                v.count,
                v.iou,
                v.mse_head,
                v.mse_outside,
                v.attr_probe,
                v.runtime_ms
            )?;
        }
        Ok(())
    }
}
