//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hid_core::diffusion::{ddim_invert_step, ddim_sample_step, sample_trajectory};
use hid_core::eval::{
    attribute_probe, mask_iou, mse, run_experiment_with, sample_pairs, RunConfig,
};
use hid_core::synthgen::{
    enumerate_dataset, ground_truth_edit_mask, oracle_swap, render_avatar, NUM_SPECS,
};
use hid_core::{
    cfg_combine, invert_trajectory, make_schedule, orthogonal_component, run_headswap,
    AttributeSpec, Condition, EmpiricalDenoiser, GuidanceConfig, HairStyle, MaskVariant,
    NoiseSchedule, PixelGrid, SwapConfig,
};

const H: usize = 32;
const W: usize = 32;
const C: usize = 3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_grid(rng: &mut ChaCha8Rng) -> PixelGrid {
    let data = (0..H * W * C).map(|_| rng.gen_range(-3.0..3.0)).collect();
    PixelGrid::from_vec(H, W, C, data).unwrap()
}

fn config_with_w(w: f64) -> SwapConfig {
    let guidance = GuidanceConfig::new(w).unwrap();
    let mut cfg = SwapConfig {
        guidance,
        ..SwapConfig::default()
    };
    cfg.mask.guidance = guidance;
    cfg
}

fn cfg_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = 0;
    for _ in 0..100 {
        let (u, c) = (random_grid(&mut rng), random_grid(&mut rng));
        let out = cfg_combine(&u, &c, GuidanceConfig::unit()).unwrap();
        let same = out
            .data()
            .iter()
            .zip(c.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        bad += usize::from(!same);
    }
    outcome(bad == 0, format!("{bad}/100 pairs differ from c"))
}

fn orthogonality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (eh, eb) = (random_grid(&mut rng), random_grid(&mut rng));
        let o = orthogonal_component(&eh, &eb).unwrap();
        let cos = o.dot(&eb).unwrap().abs() / (o.norm() * eb.norm());
        worst = worst.max(cos);
    }
    outcome(
        worst < 1e-10,
        format!("max normalized inner product {worst:.2e} (< 1e-10)"),
    )
}

fn step_inverse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sched = make_schedule(50).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (z, eps) = (random_grid(&mut rng), random_grid(&mut rng));
        let t = rng.gen_range(0..sched.steps());
        let up = ddim_invert_step(&z, &eps, t, &sched).unwrap();
        let back = ddim_sample_step(&up, &eps, t + 1, &sched).unwrap();
        let err = back
            .data()
            .iter()
            .zip(z.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
    }
    outcome(
        worst <= 1e-10,
        format!("max abs error {worst:.2e} over 1000 triples (<= 1e-10)"),
    )
}

fn round_trip() -> Outcome {
    let all = enumerate_dataset();
    let ten: Vec<_> = (0..10).map(|i| all[i * all.len() / 10].clone()).collect();
    let pred = EmpiricalDenoiser::from_renders(&ten).unwrap();
    let null = Condition::null();
    let mut errs = Vec::new();
    for steps in [50, 100, 200] {
        let sched = make_schedule(steps).unwrap();
        let mut worst: f64 = 0.0;
        for r in &ten {
            let traj = invert_trajectory(&r.image, &null, &sched, &pred).unwrap();
            let x = sample_trajectory(&traj, &null, GuidanceConfig::unit(), &sched, &pred).unwrap();
            let diff = x.zip_map(&r.image, |a, b| a - b).unwrap();
            worst = worst.max(diff.norm() / r.image.norm());
        }
        errs.push(worst);
    }
    let slack = 1e-12;
    let at_100 = errs[1] < 0.02;
    let monotone = errs.windows(2).all(|p| p[1] <= p[0] + slack);
    outcome(
        at_100 && monotone,
        format!(
            "worst rel L2 T=50 {:.2e}, T=100 {:.2e} (< 2%), T=200 {:.2e}; non-increasing within {slack:.0e}: {monotone}",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn identity_swap(sched: &NoiseSchedule, pred: &EmpiricalDenoiser) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = config_with_w(1.0);
    let mut bad = Vec::new();
    for _ in 0..10 {
        let a = AttributeSpec::from_index(rng.gen_range(0..NUM_SPECS)).unwrap();
        let r = run_headswap(a, a, &cfg, sched, pred).unwrap();
        let body = render_avatar(a).image;
        let exact = r
            .output
            .data()
            .iter()
            .zip(body.data())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        if !(r.mask.is_empty() && exact) {
            bad.push(format!("{a}: mask {} px, exact {exact}", r.mask.count()));
        }
    }
    outcome(
        bad.is_empty(),
        format!("{}/10 specs not identical {:?}", bad.len(), bad),
    )
}

fn outside_mask(sched: &NoiseSchedule, pred: &EmpiricalDenoiser) -> Outcome {
    let cfg = SwapConfig::default();
    let mut worst: f64 = 0.0;
    let mut leaks = 0;
    for (b, h) in sample_pairs(6, 25) {
        let r = run_headswap(b, h, &cfg, sched, pred).unwrap();
        let body = render_avatar(b).image;
        for row in 0..H {
            for col in 0..W {
                let d = r
                    .output
                    .pixel(row, col)
                    .iter()
                    .zip(body.pixel(row, col))
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if !r.mask.get(row, col) {
                    worst = worst.max(d);
                    leaks += usize::from(d != 0.0);
                }
            }
        }
    }
    outcome(
        worst == 0.0 && leaks == 0,
        format!("max |I_o - I_b| outside mask {worst:e}, changed pixels outside mask {leaks}"),
    )
}

struct PairRun {
    body: AttributeSpec,
    head: AttributeSpec,
    naive_iou: f64,
    full_iou: f64,
    mse_out: f64,
    mse_body: f64,
    probe_ok: bool,
    hair_coverage: Option<f64>,
}

fn probe_ok(image: &PixelGrid, body: AttributeSpec, head: AttributeSpec) -> bool {
    let s = attribute_probe(image, body, head);
    3 * s.matched >= 2 * s.total
}

fn seeded_runs(sched: &NoiseSchedule, pred: &EmpiricalDenoiser) -> Vec<PairRun> {
    let mut full = SwapConfig::default();
    full.mask.variant = MaskVariant::Full;
    let mut naive = full;
    naive.mask.variant = MaskVariant::Naive;
    sample_pairs(0, 50)
        .into_iter()
        .map(|(body, head)| {
            let gt = ground_truth_edit_mask(body, head);
            let n = run_headswap(body, head, &naive, sched, pred).unwrap();
            let f = run_headswap(body, head, &full, sched, pred).unwrap();
            let b = render_avatar(body);
            let oracle = oracle_swap(body, head).image;
            let hair = b.hair_mask.count();
            let hair_coverage = (hair > 0)
                .then(|| b.hair_mask.intersection(&f.mask).unwrap().count() as f64 / hair as f64);
            PairRun {
                body,
                head,
                naive_iou: mask_iou(&n.mask, &gt).unwrap(),
                full_iou: mask_iou(&f.mask, &gt).unwrap(),
                mse_out: mse(&f.output, &oracle).unwrap(),
                mse_body: mse(&b.image, &oracle).unwrap(),
                probe_ok: probe_ok(&f.output, body, head),
                hair_coverage,
            }
        })
        .collect()
}

fn ablation(runs: &[PairRun]) -> Outcome {
    let n = runs.len() as f64;
    let naive = runs.iter().map(|r| r.naive_iou).sum::<f64>() / n;
    let full = runs.iter().map(|r| r.full_iou).sum::<f64>() / n;
    let wins = runs.iter().filter(|r| r.full_iou > r.naive_iou).count();
    outcome(
        full >= naive && wins as f64 >= 0.6 * n,
        format!(
            "mean IoU full {full:.4} vs naive {naive:.4}; full wins {wins}/{} (>= 60%)",
            runs.len()
        ),
    )
}

fn efficacy(runs: &[PairRun], sched: &NoiseSchedule, pred: &EmpiricalDenoiser) -> Outcome {
    let n = runs.len() as f64;
    let better = runs.iter().filter(|r| r.mse_out < r.mse_body).count();
    let mut probe = Vec::new();
    for w in [1.0, 3.0, 7.5] {
        let ok = if w == 3.0 {
            runs.iter().filter(|r| r.probe_ok).count()
        } else {
            let cfg = config_with_w(w);
            runs.iter()
                .filter(|r| {
                    let out = run_headswap(r.body, r.head, &cfg, sched, pred)
                        .unwrap()
                        .output;
                    probe_ok(&out, r.body, r.head)
                })
                .count()
        };
        probe.push((w, ok));
    }
    let probe_pass = probe.iter().any(|&(_, ok)| ok as f64 >= 0.7 * n);
    let sweep: Vec<String> = probe.iter().map(|(w, ok)| format!("w={w}: {ok}")).collect();
    outcome(
        better as f64 >= 0.8 * n && probe_pass,
        format!(
            "MSE improved on {better}/{} (>= 80%); probe >= 2/3 on {} of {} (>= 70% for some w)",
            runs.len(),
            sweep.join(", "),
            runs.len()
        ),
    )
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(sched: &NoiseSchedule, pred: &EmpiricalDenoiser) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let mut cfg = RunConfig::new(d);
        cfg.pairs = 5;
        cfg.seed = 7;
        run_experiment_with(&cfg, sched, pred).unwrap();
    }
    let (fa, fb) = (files_under(&dirs[0]), files_under(&dirs[1]));
    if fa != fb {
        return outcome(false, "runs wrote different file sets");
    }
    let differing: Vec<_> = fa
        .iter()
        .filter(|f| fs::read(dirs[0].join(f)).unwrap() != fs::read(dirs[1].join(f)).unwrap())
        .collect();
    outcome(
        differing.is_empty(),
        format!(
            "{} files compared, {} differ {:?}",
            fa.len(),
            differing.len(),
            differing
        ),
    )
}

fn hair_removal(runs: &[PairRun]) -> Outcome {
    let cov: Vec<(String, f64)> = runs
        .iter()
        .filter(|r| r.body.hair_style == HairStyle::Long && r.head.hair_style == HairStyle::Bald)
        .map(|r| (format!("{}", r.body), r.hair_coverage.unwrap()))
        .collect();
    let worst = cov.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let shown: Vec<String> = cov.iter().map(|(b, c)| format!("{b}: {c:.2}")).collect();
    outcome(
        cov.iter().all(|c| c.1 >= 0.5),
        format!(
            "{} long->bald pairs, min coverage {worst:.2} (>= 0.5) [{}]",
            cov.len(),
            shown.join(", ")
        ),
    )
}

fn report(id: u32, name: &str, budget: Duration, start: Instant, o: Outcome, failed: &mut bool) {
    let elapsed = start.elapsed();
    let pass = o.pass && elapsed <= budget;
    *failed |= !pass;
    println!(
        "criterion {id:>2} {name}: {} ({}; {:.2}s, budget {}s)",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
}

fn main() -> ExitCode {
    let mut failed = false;
    let secs = Duration::from_secs;

    let t = Instant::now();
    report(1, "cfg identity", secs(1), t, cfg_identity(), &mut failed);
    let t = Instant::now();
    report(2, "orthogonality", secs(1), t, orthogonality(), &mut failed);
    let t = Instant::now();
    report(3, "step inverse", secs(1), t, step_inverse(), &mut failed);
    let t = Instant::now();
    report(4, "round trip", secs(30), t, round_trip(), &mut failed);

    let pred = EmpiricalDenoiser::from_renders(&enumerate_dataset()).unwrap();
    let sched = make_schedule(SwapConfig::default().steps).unwrap();

    let t = Instant::now();
    report(
        5,
        "identity swap",
        secs(10),
        t,
        identity_swap(&sched, &pred),
        &mut failed,
    );
    let t = Instant::now();
    report(
        6,
        "outside-mask exactness",
        secs(60),
        t,
        outside_mask(&sched, &pred),
        &mut failed,
    );

    let t = Instant::now();
    let runs = seeded_runs(&sched, &pred);
    let o = ablation(&runs);
    let shared = t.elapsed();
    report(7, "ablation", secs(300), t, o, &mut failed);
    let t = Instant::now();
    report(
        8,
        "efficacy",
        secs(300),
        t,
        efficacy(&runs, &sched, &pred),
        &mut failed,
    );
    let t = Instant::now();
    report(
        9,
        "determinism",
        secs(60),
        t,
        determinism(&sched, &pred),
        &mut failed,
    );
    let t = Instant::now() - shared;
    report(
        10,
        "long-hair removal",
        secs(300),
        t,
        hair_removal(&runs),
        &mut failed,
    );

    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
