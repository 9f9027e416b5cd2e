//! Runs LBN-MOBO on a ZDT problem and prints the relative hypervolume per
//! iteration.
//!
//! `cargo run --release --example zdt_run -- <variant> <dim> <iters> <seed> [ablate]`

use lbn_mobo::metrics::{hypervolume_2d_exact, reference_front};
use lbn_mobo::optimizer::{run_with, Mode, RunConfig, RunOptions};
use lbn_mobo::problems::{ProblemSpec, ZdtVariant};

fn main() -> lbn_mobo::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: u64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let (variant, dim, iters, seed) = (arg(1, 3) as u8, arg(2, 6) as usize, arg(3, 3) as usize, arg(4, 0));
    let ablate = args.get(5).is_some_and(|s| s == "ablate");
    let out = std::env::temp_dir().join(format!("zdt_run_{variant}_{dim}_{seed}_{ablate}_{}", std::process::id()));
    let mut cfg = RunConfig::new(ProblemSpec::Zdt { variant, dim }, 1000, iters, &out);
    cfg.master_seed = seed;
    cfg.train_final_surrogate = false;
    if let Some(g) = std::env::var("GENS").ok().and_then(|s| s.parse().ok()) {
        cfg.acquisition.nsga.generations = g;
    }
    if ablate {
        cfg.mode = Mode::AblateUncertainty;
    }
    let state = run_with(&cfg, &RunOptions { progress: true, ..Default::default() })?;
    let reference = reference_front(ZdtVariant::from_number(variant)?, 10_000)?;
    let best = hypervolume_2d_exact(&reference, &[11.0, 11.0]);
    for m in &state.history {
        println!("iter {} relative hv {:.5}", m.iteration, m.hv_estimate / best);
    }
    if std::env::var_os("KEEP_RUN").is_none() {
        std::fs::remove_dir_all(&out)?;
    } else {
        println!("kept {}", out.display());
    }
    Ok(())
}
