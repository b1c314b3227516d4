use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hid_core::eval::{
    read_metrics, run_experiment, summarize, swap_record, write_summary, ConfigOverrides,
    RunConfig, METRICS_FILE, SUMMARY_FILE,
};
use hid_core::imaging::{minmax_normalize, overlay_heatmap, write_field, write_image, write_mask};
use hid_core::synthgen::{enumerate_dataset, oracle_swap, render_avatar};
use hid_core::{
    make_schedule, run_headswap, swap_mask, AttributeSpec, EmpiricalDenoiser, Error, MaskVariant,
    MaskWarning, Projection, SwapConfig,
};

#[derive(Parser)]
#[command(
    name = "hid",
    version,
    about = "Head swapping by inversion-orthogonal masking on synthetic avatars"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the full avatar dataset and write dataset.tsv.
    Gen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Swap one head onto one body.
    Swap {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        opts: SwapOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute only the IO map and mask for a pair.
    Mask {
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        opts: SwapOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run all three mask variants on seeded random pairs.
    Ablate {
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[command(flatten)]
        opts: SwapOpts,
        /// Skip per-pair image files.
        #[arg(long)]
        no_images: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute summary.json from DIR/metrics.jsonl.
    Eval {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PairArgs {
    /// Body attributes `skin,style,hair,clothing,tilt`.
    #[arg(long, value_parser = parse_spec, allow_hyphen_values = true)]
    body: AttributeSpec,
    /// Head attributes `skin,style,hair,clothing,tilt`.
    #[arg(long, value_parser = parse_spec, allow_hyphen_values = true)]
    head: AttributeSpec,
}

#[derive(Args)]
struct SwapOpts {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "steps", visible_alias = "T")]
    steps: Option<usize>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    edit_fraction: Option<f64>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<MaskVariant>,
    #[arg(long)]
    seed: Option<u64>,
    /// Project per pixel instead of over the whole grid.
    #[arg(long)]
    per_pixel_projection: bool,
    /// Store wall-clock time in runtime_ms (otherwise 0).
    #[arg(long)]
    record_timing: bool,
}

fn parse_spec(s: &str) -> Result<AttributeSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<MaskVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::Config { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl SwapOpts {
    fn resolve(&self) -> Result<(SwapConfig, ConfigOverrides), Failure> {
        let file = match &self.config {
            Some(p) => ConfigOverrides::load(p)?,
            None => ConfigOverrides::default(),
        };
        let flags = ConfigOverrides {
            steps: self.steps,
            w: self.w,
            tau: self.tau,
            sigma: self.sigma,
            edit_fraction: self.edit_fraction,
            variant: self.variant,
            seed: self.seed,
        };
        let merged = file.merge(flags);
        let mut cfg = merged.apply(SwapConfig::default())?;
        if self.per_pixel_projection {
            cfg.mask.projection = Projection::PerPixel;
        }
        Ok((cfg, merged))
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn gen(out: &Path) -> Result<(), Failure> {
    create_dir(out)?;
    let mut index = String::new();
    for (i, r) in enumerate_dataset().iter().enumerate() {
        let name = format!("avatar_{i:03}.ppm");
        write_image(&r.image, out.join(&name))?;
        let v = r.attrs.values();
        writeln!(
            index,
            "{name}\t{}\t{}\t{}\t{}\t{}",
            v[0], v[1], v[2], v[3], v[4]
        )
        .expect("string write");
    }
    let path = out.join("dataset.tsv");
    fs::write(&path, index).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    println!("wrote 324 avatars to {}", out.display());
    Ok(())
}

fn report_warning(w: Option<MaskWarning>) {
    match w {
        Some(MaskWarning::Empty) => {
            eprintln!("warning: mask is empty; output equals the body image")
        }
        Some(MaskWarning::DegenerateReference) => {
            eprintln!("warning: body-conditioned prediction is zero; IO map taken as zero")
        }
        None => {}
    }
}

fn swap(pair: &PairArgs, opts: &SwapOpts, out: &Path) -> Result<(), Failure> {
    let (cfg, _) = opts.resolve()?;
    let sched = make_schedule(cfg.steps)?;
    let pred = EmpiricalDenoiser::from_renders(&enumerate_dataset())?;
    let start = std::time::Instant::now();
    let r = run_headswap(pair.body, pair.head, &cfg, &sched, &pred)?;
    let ms = if opts.record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    report_warning(r.warning);

    create_dir(out)?;
    let body_image = render_avatar(pair.body).image;
    let norm = minmax_normalize(&r.io_map);
    write_image(&body_image, out.join("body.ppm"))?;
    write_image(&render_avatar(pair.head).image, out.join("head.ppm"))?;
    write_image(
        &oracle_swap(pair.body, pair.head).image,
        out.join("oracle.ppm"),
    )?;
    write_image(&r.output, out.join("output.ppm"))?;
    write_mask(&r.mask, out.join("mask.pgm"))?;
    write_field(&norm, out.join("iomap.pgm"))?;
    write_image(
        &overlay_heatmap(&body_image, &norm)?,
        out.join("overlay.ppm"),
    )?;

    let record = swap_record("p000", pair.body, pair.head, cfg.mask.variant, &r, ms)?;
    let line = serde_json::to_string(&record).expect("record serializes");
    let path = out.join(METRICS_FILE);
    fs::write(&path, format!("{line}\n"))
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    println!(
        "iou {:.4}  mse_head {:.5}  mse_outside {:.5}  probe {}/{}",
        record.iou,
        record.mse_head,
        record.mse_outside,
        record.attr_probe.matched,
        record.attr_probe.total
    );
    Ok(())
}

fn mask(pair: &PairArgs, opts: &SwapOpts, out: &Path) -> Result<(), Failure> {
    let (cfg, _) = opts.resolve()?;
    let sched = make_schedule(cfg.steps)?;
    let pred = EmpiricalDenoiser::from_renders(&enumerate_dataset())?;
    let m = swap_mask(pair.body, pair.head, &cfg, &sched, &pred)?;
    report_warning(m.warning);
    create_dir(out)?;
    let norm = minmax_normalize(&m.io_map);
    write_field(&norm, out.join("iomap.pgm"))?;
    write_mask(&m.mask, out.join("mask.pgm"))?;
    write_image(
        &overlay_heatmap(&render_avatar(pair.body).image, &norm)?,
        out.join("overlay.ppm"),
    )?;
    println!("mask covers {} of {} pixels", m.mask.count(), 32 * 32);
    Ok(())
}

fn ablate(pairs: usize, opts: &SwapOpts, no_images: bool, out: &Path) -> Result<(), Failure> {
    let (swap, merged) = opts.resolve()?;
    let cfg = RunConfig {
        swap,
        seed: merged.seed.unwrap_or(0),
        pairs,
        out_dir: out.to_path_buf(),
        variants: MaskVariant::ALL.to_vec(),
        record_timing: opts.record_timing,
        write_images: !no_images,
    };
    let (_, summary) = run_experiment(&cfg)?;
    print!("{summary}");
    Ok(())
}

fn eval(out: &Path) -> Result<(), Failure> {
    let records = read_metrics(out.join(METRICS_FILE))?;
    let summary = summarize(&records);
    write_summary(&summary, &out.join(SUMMARY_FILE))?;
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gen { out } => gen(out),
        Command::Swap { pair, opts, out } => swap(pair, opts, out),
        Command::Mask { pair, opts, out } => mask(pair, opts, out),
        Command::Ablate {
            pairs,
            opts,
            no_images,
            out,
        } => ablate(*pairs, opts, *no_images, out),
        Command::Eval { out } => eval(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
