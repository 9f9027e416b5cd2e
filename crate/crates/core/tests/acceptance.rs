//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs every criterion by default. Pass criterion numbers to run a subset:
//! `cargo test --release --test acceptance -- 5 6 7`.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use lbn_mobo::dataset::Dataset;
use lbn_mobo::metrics::{hypervolume_2d_exact, hypervolume_mc, reference_front, HypervolumeSpec};
use lbn_mobo::moea::{dominates, fast_nondominated_sort};
use lbn_mobo::optimizer::snapshot::{iter_dir, METRICS_FILE};
use lbn_mobo::optimizer::{extract_pareto, run, Mode, RunConfig, RunState};
use lbn_mobo::problems::{ProblemSpec, ZdtVariant};
use lbn_mobo::seed::SeedTree;
use lbn_mobo::space::{DesignSpace, Direction};
use lbn_mobo::surrogate::{
    train_ensemble, Activation, EnsembleSurrogate, Mlp, MlpSpec, SurrogateConfig, TrainConfig, DEFAULT_ACTIVATIONS,
};
use rand::Rng;

const SEEDS: [u64; 3] = [0, 1, 2];
const REFERENCE: [f64; 2] = [11.0, 11.0];
const BATCH: usize = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn zdt_config(variant: u8, dim: usize, iterations: usize, seed: u64, mode: Mode, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::new(ProblemSpec::Zdt { variant, dim }, BATCH, iterations, out);
    cfg.mode = mode;
    cfg.master_seed = seed;
    cfg.train_final_surrogate = false;
    cfg
}

fn timed_run(cfg: &RunConfig) -> RunState {
    let t = Instant::now();
    let state = run(cfg).unwrap_or_else(|e| panic!("run in {} failed: {e}", cfg.output_dir.display()));
    eprintln!(
        "  [{} {} n={} seed {}] {} iterations in {:.0}s",
        cfg.problem.name(),
        cfg.mode,
        state.dataset.dim(),
        cfg.master_seed,
        state.iteration,
        t.elapsed().as_secs_f64()
    );
    state
}

/// Exact hypervolume of the Pareto set of all rows evaluated up to iteration `k`.
fn hv_at(ds: &Dataset, k: usize) -> f64 {
    let mut upto = Dataset::new(ds.dim(), ds.directions().to_vec()).unwrap();
    for ((x, y), &it) in ds.designs().iter().zip(ds.performances()).zip(ds.iterations()) {
        if it <= k {
            upto.append(std::slice::from_ref(x), std::slice::from_ref(y), it).unwrap();
        }
    }
    hypervolume_2d_exact(&extract_pareto(&upto).performances, &REFERENCE)
}

fn reference_hv(variant: ZdtVariant) -> f64 {
    hypervolume_2d_exact(&reference_front(variant, 10_000).unwrap(), &REFERENCE)
}

fn relative(states: &[RunState], variant: ZdtVariant, k: usize) -> Vec<f64> {
    let r = reference_hv(variant);
    states.iter().map(|s| hv_at(&s.dataset, k) / r).collect()
}

fn candidate_spread(ds: &Dataset, k: usize) -> f64 {
    let ys: Vec<&Vec<f64>> = ds
        .performances()
        .iter()
        .zip(ds.iterations())
        .filter(|(_, &it)| it == k)
        .map(|(y, _)| y)
        .collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..ys.len() {
        for j in i + 1..ys.len() {
            total += ys[i].iter().zip(ys[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            pairs += 1;
        }
    }
    total / pairs.max(1) as f64
}

struct Runs {
    root: tempfile::TempDir,
    zdt3_30d: Option<Vec<RunState>>,
}

impl Runs {
    fn dir(&self, name: &str) -> std::path::PathBuf {
        self.root.path().join(name)
    }

    fn zdt3_30d(&mut self) -> &[RunState] {
        if self.zdt3_30d.is_none() {
            let states = SEEDS
                .iter()
                .map(|&s| timed_run(&zdt_config(3, 30, 5, s, Mode::LbnMobo, &self.dir(&format!("zdt3-30-s{s}")))))
                .collect();
            self.zdt3_30d = Some(states);
        }
        self.zdt3_30d.as_deref().unwrap()
    }
}

fn criterion_1(runs: &mut Runs) -> Outcome {
    let states: Vec<RunState> = SEEDS
        .iter()
        .map(|&s| timed_run(&zdt_config(3, 6, 3, s, Mode::LbnMobo, &runs.dir(&format!("zdt3-6-s{s}")))))
        .collect();
    let r1 = relative(&states, ZdtVariant::Zdt3, 1);
    let r3 = relative(&states, ZdtVariant::Zdt3, 3);
    let (m1, m3) = (mean(&r1), mean(&r3));
    Outcome::new(
        m1 >= 0.97 && m3 >= 0.99,
        format!("ZDT3 n=6, 3-seed mean relative HV: iter 1 {} (>= 97%), iter 3 {} (>= 99%)", pct(m1), pct(m3)),
    )
}

fn criterion_2(runs: &mut Runs) -> Outcome {
    let states = runs.zdt3_30d();
    let r3 = relative(states, ZdtVariant::Zdt3, 3);
    let r5 = relative(states, ZdtVariant::Zdt3, 5);
    let (m3, m5) = (mean(&r3), mean(&r5));
    let per_seed: Vec<String> = r5.iter().map(|&v| pct(v)).collect();
    Outcome::new(
        m3 >= 0.95 && m5 >= 0.98,
        format!(
            "ZDT3 n=30, 3-seed mean relative HV: iter 3 {} (>= 95%), iter 5 {} (>= 98%); iter 5 per seed [{}]",
            pct(m3),
            pct(m5),
            per_seed.join(", ")
        ),
    )
}

fn criterion_3(runs: &mut Runs) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (variant, v) in [(1u8, ZdtVariant::Zdt1), (2, ZdtVariant::Zdt2)] {
        let states: Vec<RunState> = SEEDS
            .iter()
            .map(|&s| timed_run(&zdt_config(variant, 30, 2, s, Mode::LbnMobo, &runs.dir(&format!("zdt{variant}-30-s{s}")))))
            .collect();
        let m = mean(&relative(&states, v, 2));
        pass &= m >= 0.97;
        parts.push(format!("ZDT{variant} {}", pct(m)));
    }
    Outcome::new(pass, format!("n=30, 3-seed mean relative HV at iter 2 (>= 97%): {}", parts.join(", ")))
}

fn criterion_4(runs: &mut Runs) -> Outcome {
    let ablated: Vec<RunState> = SEEDS
        .iter()
        .map(|&s| timed_run(&zdt_config(3, 30, 3, s, Mode::AblateUncertainty, &runs.dir(&format!("zdt3-30-ablate-s{s}")))))
        .collect();
    let full = runs.zdt3_30d();
    let mut hv_wins = 0;
    let mut spread_wins = 0;
    let mut rows = Vec::new();
    for (f, a) in full.iter().zip(&ablated) {
        let (hf, ha) = (hv_at(&f.dataset, 3), hv_at(&a.dataset, 3));
        let (sf, sa) = (candidate_spread(&f.dataset, 3), candidate_spread(&a.dataset, 3));
        hv_wins += usize::from(ha <= hf);
        spread_wins += usize::from(sf > sa);
        rows.push(format!("hv {hf:.3}/{ha:.3} spread {sf:.3}/{sa:.3}"));
    }
    Outcome::new(
        hv_wins >= 2 && spread_wins >= 2,
        format!(
            "ZDT3 n=30 iter 3, full/ablated: ablated HV <= full on {hv_wins}/3, full spread larger on {spread_wins}/3 [{}]",
            rows.join("; ")
        ),
    )
}

fn brute_force_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dominates(&points[j], &points[i]).unwrap()))
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn sorted(mut fronts: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for f in &mut fronts {
        f.sort_unstable();
    }
    fronts
}

fn finite_difference_error(activation: Activation, rng: &mut impl Rng) -> f64 {
    let spec = MlpSpec::new(4, 2, vec![7, 5, 6], activation).unwrap();
    let mut mlp = Mlp::new(spec, &mut SeedTree::new(11).rng("fd", 0)).unwrap();
    // Zero initial biases put dead units exactly on the kink at 0, where the
    // one-sided slopes differ and central differences are meaningless.
    let jittered: Vec<f64> = mlp.parameters().iter().map(|p| p + rng.gen_range(-0.1..0.1)).collect();
    mlp.set_parameters(&jittered).unwrap();
    let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let t: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let analytic = mlp.backward(&x, &t).unwrap().flatten();
    let params = mlp.parameters();
    let h = 1e-4;
    let mut numeric = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] = params[i] + h;
        mlp.set_parameters(&p).unwrap();
        let up = mlp.loss(&x, &t).unwrap();
        p[i] = params[i] - h;
        mlp.set_parameters(&p).unwrap();
        let down = mlp.loss(&x, &t).unwrap();
        numeric.push((up - down) / (2.0 * h));
    }
    mlp.set_parameters(&params).unwrap();
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|n| n * n).sum::<f64>().sqrt());
    diff / scale.max(f64::MIN_POSITIVE)
}

fn variance_oracle_error() -> f64 {
    let space = DesignSpace::unit(3).unwrap();
    let mut rng = SeedTree::new(21).rng("variance", 0);
    let xs: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] + 10.0 * x[1], (x[2] * 4.0).sin() * 1e3]).collect();
    let mut ds = Dataset::new(3, vec![Direction::Minimize; 2]).unwrap();
    ds.append(&xs, &ys, 0).unwrap();
    let cfg = SurrogateConfig {
        hidden_widths: vec![12, 8],
        train: TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        },
        ..SurrogateConfig::default()
    };
    let (s, _): (EnsembleSurrogate, _) =
        train_ensemble(&ds, &space, &cfg.roster(3, 2).unwrap(), &cfg.train, SeedTree::new(5)).unwrap();
    let probe: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| rng.gen_range(-0.5..1.5)).collect()).collect();
    let members = s.member_outputs(&probe);
    let var = s.predict_epistemic_variance(&probe);
    let k = members.len() as f64;
    let mut worst: f64 = 0.0;
    for (r, row) in var.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let m = members.iter().map(|o| o[r][j]).sum::<f64>() / k;
            let oracle = members.iter().map(|o| (o[r][j] - m).powi(2)).sum::<f64>() / k;
            worst = worst.max((v - oracle).abs());
        }
    }
    worst
}

fn criterion_5(_: &mut Runs) -> Outcome {
    let mut rng = SeedTree::new(2024).rng("oracles", 0);

    let mut sort_ok = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..40);
        let m = rng.gen_range(2..5);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| f64::from(rng.gen_range(0..6u8))).collect())
            .collect();
        sort_ok += usize::from(sorted(fast_nondominated_sort(&pts)) == brute_force_fronts(&pts));
    }

    let mut hv_ok = 0;
    for i in 0..50 {
        let n = rng.gen_range(1..25);
        let front: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let reference = [1.1, 1.1];
        let exact = hypervolume_2d_exact(&front, &reference);
        let mut spec = HypervolumeSpec::new(reference.to_vec());
        spec.mc_samples = 200_000;
        spec.ideal_point = Some(vec![0.0, 0.0]);
        let est = hypervolume_mc(&front, &spec, i);
        hv_ok += usize::from((est.estimate - exact).abs() <= 3.0 * est.std_error);
    }

    let var_err = variance_oracle_error();

    let mut worst_fd: f64 = 0.0;
    let mut fd_names = Vec::new();
    for a in Activation::ALL {
        let e = finite_difference_error(a, &mut rng);
        worst_fd = worst_fd.max(e);
        fd_names.push(format!("{a:?} {e:.1e}"));
    }

    Outcome::new(
        sort_ok == 500 && hv_ok >= 49 && var_err <= 1e-10 && worst_fd <= 1e-4,
        format!(
            "sort {sort_ok}/500, MC within 3 SE {hv_ok}/50, variance max err {var_err:.1e}, gradients [{}]",
            fd_names.join(", ")
        ),
    )
}

fn determinism_config(out: &Path, threads: usize) -> RunConfig {
    let mut cfg = RunConfig::new(ProblemSpec::Zdt { variant: 3, dim: 6 }, 100, 2, out);
    cfg.master_seed = 17;
    cfg.threads = Some(threads);
    cfg.surrogate.train.epochs = 10;
    cfg
}

fn criterion_6(runs: &mut Runs) -> Outcome {
    let a = timed_run(&determinism_config(&runs.dir("det-1a"), 1));
    let b = timed_run(&determinism_config(&runs.dir("det-1b"), 1));
    let identical = (0..=a.iteration).all(|k| {
        let read = |d: &str| std::fs::read(iter_dir(&runs.dir(d), k).join(METRICS_FILE)).unwrap();
        read("det-1a") == read("det-1b")
    });
    let p = timed_run(&determinism_config(&runs.dir("det-4a"), 4));
    let q = timed_run(&determinism_config(&runs.dir("det-4b"), 4));
    let same_hv = p.final_hypervolume().to_bits() == q.final_hypervolume().to_bits();
    let cross = a.final_hypervolume().to_bits() == p.final_hypervolume().to_bits();
    Outcome::new(
        identical && same_hv && a.history == b.history,
        format!(
            "metrics.json byte-identical (1 thread): {identical}; final HV bit-identical (4 threads): {same_hv}; 1 vs 4 threads agree: {cross}"
        ),
    )
}

fn criterion_7(_: &mut Runs) -> Outcome {
    let cfg = SurrogateConfig::default();
    let roster: Vec<String> = cfg
        .roster(30, 2)
        .unwrap()
        .iter()
        .map(|s| format!("{:?}", s.activation))
        .collect();
    let expected = [
        "Tanh", "Tanh", "Relu", "Relu", "Celu", "Celu", "LeakyRelu", "LeakyRelu", "Elu", "Hardswish",
    ];
    let widths_ok = cfg.roster(30, 2).unwrap().iter().all(|s| s.hidden_widths == [100, 50, 100]);
    let from_run = RunConfig::new(ProblemSpec::Zdt { variant: 3, dim: 6 }, BATCH, 1, "unused").surrogate;
    let pass = cfg.members == 10
        && roster == expected
        && DEFAULT_ACTIVATIONS.len() == 10
        && widths_ok
        && cfg.train.epochs == 60
        && cfg.train.minibatch == 10
        && from_run == cfg;
    Outcome::new(
        pass,
        format!(
            "K={} roster [{}], widths {:?}, {} epochs, minibatch {}",
            cfg.members,
            roster.join(", "),
            cfg.hidden_widths,
            cfg.train.epochs,
            cfg.train.minibatch
        ),
    )
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, fn(&mut Runs) -> Outcome); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    let mut runs = Runs {
        root: tempfile::tempdir().unwrap(),
        zdt3_30d: None,
    };
    let mut failed = 0;
    for (n, f) in &criteria {
        if !selected.is_empty() && !selected.contains(n) {
            continue;
        }
        let t = Instant::now();
        let o = f(&mut runs);
        failed += usize::from(!o.pass);
        println!(
            "criterion {n}: {}  {}  ({:.0}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
