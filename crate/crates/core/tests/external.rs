use std::path::PathBuf;

use lbn_mobo::optimizer::{run, Mode, RunConfig};
use lbn_mobo::problems::{external_nfp, ProblemSpec};
use lbn_mobo::space::{DesignSpace, Direction};
use lbn_mobo::Error;

fn script() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/nfp_sum.py")
}

fn command(mode: &str) -> String {
    format!("python3 '{}' --mode {mode}", script().display())
}

fn space() -> DesignSpace {
    DesignSpace::new(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]).unwrap()
}

#[test]
fn round_trips_values_through_the_script() {
    let tmp = tempfile::tempdir().unwrap();
    let p = external_nfp(&command("ok"), tmp.path(), space(), vec![Direction::Minimize; 2]).unwrap();
    let xs = vec![vec![0.25, 0.5, 0.125], vec![1.0, 0.0, 0.0], vec![0.1, 0.2, 0.3]];
    let ys = p.evaluate_batch(&xs).unwrap();
    assert_eq!(ys.len(), 3);
    for (x, y) in xs.iter().zip(&ys) {
        assert_eq!(y[0], x[0]);
        assert!((y[1] - (1.0 - x[0] + x[1] + x[2])).abs() < 1e-15);
    }
    assert!(tmp.path().join("nfp_in_0.csv").is_file());
    assert!(tmp.path().join("nfp_out_0.csv").is_file());
    p.evaluate_batch(&xs[..1]).unwrap();
    assert!(tmp.path().join("nfp_in_1.csv").is_file());
}

#[test]
fn wrong_row_count_is_an_evaluation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let p = external_nfp(&command("short"), tmp.path(), space(), vec![Direction::Minimize; 2]).unwrap();
    match p.evaluate_batch(&[vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]]) {
        Err(Error::Evaluation { message, .. }) => assert!(message.contains("1 rows for 2"), "{message}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn nan_output_names_the_row() {
    let tmp = tempfile::tempdir().unwrap();
    let p = external_nfp(&command("nan"), tmp.path(), space(), vec![Direction::Minimize; 2]).unwrap();
    let xs: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 / 4.0, 0.0, 0.0]).collect();
    match p.evaluate_batch(&xs) {
        Err(Error::Evaluation { message, .. }) => assert!(message.contains("row 2"), "{message}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn non_zero_exit_carries_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let p = external_nfp(&command("fail"), tmp.path(), space(), vec![Direction::Minimize; 2]).unwrap();
    match p.evaluate_batch(&[vec![0.1, 0.2, 0.3]]) {
        Err(Error::Evaluation { stderr, .. }) => assert!(stderr.unwrap().contains("solver diverged")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn out_of_bounds_designs_are_rejected_before_the_call() {
    let tmp = tempfile::tempdir().unwrap();
    let p = external_nfp(&command("ok"), tmp.path(), space(), vec![Direction::Minimize; 2]).unwrap();
    assert!(matches!(p.evaluate_batch(&[vec![1.5, 0.0, 0.0]]), Err(Error::Argument(_))));
    assert!(!tmp.path().join("nfp_in_0.csv").exists());
}

#[test]
fn random_baseline_drives_an_external_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = ProblemSpec::External {
        name: "toy".into(),
        command: command("ok"),
        workdir: tmp.path().join("work"),
        lower: vec![0.0; 3],
        upper: vec![1.0; 3],
        directions: vec![Direction::Minimize, Direction::Maximize],
    };
    let mut cfg = RunConfig::new(spec, 8, 2, tmp.path().join("run"));
    cfg.mode = Mode::RandomBaseline;
    cfg.metrics.reference_point = Some(vec![2.0, 0.0]);
    let state = run(&cfg).unwrap();
    assert_eq!(state.dataset.len(), 24);
    assert!(state.history.iter().all(|m| m.hv_estimate > 0.0));
}
