use clap::Parser;

use rough_ht::expcli::suite::{
    beta_constancy_instance, exceptional_instance, four_term_instance, key_cz_instance,
    menshov_instance, sparse_max_instance,
};
use rough_ht::expcli::{run, Cli, Family};
use rough_ht::lattice::{Interval, IntervalFamily, LatticeFunction};
use rough_ht::measures::default_bump;
use rough_ht::operators::TransformConfig;
use rough_ht::Error;

fn call(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut full = vec!["rough-ht"];
    full.extend_from_slice(args);
    let code = run(full, &mut out).unwrap();
    (code, String::from_utf8(out).unwrap())
}

fn call_err(args: &[&str]) -> Error {
    let mut out = Vec::new();
    let mut full = vec!["rough-ht"];
    full.extend_from_slice(args);
    run(full, &mut out).unwrap_err()
}

#[test]
fn transform_of_delta_is_the_odd_measure_sum() {
    let (code, text) = call(&[
        "transform",
        "--M",
        "16",
        "--theta",
        "0.5",
        "--family",
        "delta",
    ]);
    assert_eq!(code, 0);
    let f = rough_ht::lattice::io::from_text(&text).unwrap();
    assert!(f.sum().abs() < 1e-12);
    assert_eq!(
        f.support_hull().unwrap().start(),
        -f.support_hull().unwrap().end() + 1
    );
    let (_, max) = call(&["transform", "--max", "--M", "16", "--theta", "0.5"]);
    assert!(rough_ht::lattice::io::from_text(&max)
        .unwrap()
        .is_nonnegative());
}

#[test]
fn czd_reads_an_input_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.txt");
    std::fs::write(&input, "# spike\n0 8\n").unwrap();
    let path = input.to_str().unwrap();
    let (code, text) = call(&["czd", "--input", path, "--lambda", "1,3"]);
    assert_eq!(code, 0);
    assert!(text.contains("# lambda 1: 1 cubes\n2 0 2\n"));
    assert!(text.contains("# lambda 3: 1 cubes\n1 0 4\n"));
    assert!(matches!(
        call_err(&["czd", "--input", path]),
        Error::InvalidParameter { .. }
    ));
}

#[test]
fn weak11_and_kernel_probe_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _) = call(&[
        "weak11", "--M", "256,1024", "--family", "delta", "--lambda", "0.01,0.1", "--out", out,
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("weak11.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("M,theta,alpha,lambda,ratio,runtime_ms"));
    assert_eq!(lines.count(), 4);

    let (code, _) = call(&[
        "kernel-probe",
        "--log2-min",
        "4",
        "--log2-max",
        "5",
        "--out",
        out,
    ]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("kernel_probe.csv")).unwrap();
    assert!(csv.starts_with("N1,N2,J_center,J_len,C_hat,delta_hat,cell_runtime_ms"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "seed = 5\ntheta = 0.7\nfamily = cz-stress\n").unwrap();
    let c = conf.to_str().unwrap();
    let cli = Cli::try_parse_from(["rough-ht", "sweep", "--config", c, "--seed", "9"]).unwrap();
    let cfg = cli.global.resolve().unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.theta, 0.7);
    assert_eq!(cfg.families, vec![Family::CzStress]);
    assert_eq!(cfg.alpha, 1.001);
}

#[test]
fn bad_settings_are_rejected() {
    assert!(matches!(
        call_err(&["sweep", "--alpha", "1.01"]),
        Error::InvalidParameter { .. }
    ));
    assert!(matches!(
        call_err(&["sweep", "--family", "gauss"]),
        Error::UnknownFamily(_)
    ));
    assert!(matches!(
        call_err(&["sweep", "--M", "1000"]),
        Error::InvalidParameter { .. }
    ));
    let (code, text) = call(&["no-such-command"]);
    assert_eq!(code, 2);
    assert!(text.contains("unrecognized subcommand"));
}

#[test]
fn lemma_suite_reports_and_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, text) = call(&["lemma-suite", "--instances", "20", "--out", out]);
    assert_eq!(code, 0, "{text}");
    assert!(text.lines().nth(1).unwrap().starts_with("PASS key-cz"));
    let csv = std::fs::read_to_string(dir.path().join("lemma_suite.csv")).unwrap();
    assert!(csv.starts_with("lemma,asserted,instances,checked,violations,detail"));
    let again = tempfile::tempdir().unwrap();
    call(&[
        "lemma-suite",
        "--instances",
        "20",
        "--out",
        again.path().to_str().unwrap(),
    ]);
    assert_eq!(
        csv,
        std::fs::read_to_string(again.path().join("lemma_suite.csv")).unwrap()
    );
}

#[test]
fn zero_inputs_pass_vacuously() {
    let zero = LatticeFunction::zero();
    let t = key_cz_instance(&zero, 1.0).unwrap();
    assert_eq!((t.checked, t.violations), (0, 0));
    let t = four_term_instance(
        &zero,
        1.0,
        2.0,
        &TransformConfig::new(256, 0.5, 1.001, default_bump()).unwrap(),
    )
    .unwrap();
    assert_eq!(t.violations, 0);
    let cfg = TransformConfig::new(256, 0.5, 1.001, default_bump()).unwrap();
    let goods = vec![zero.clone(); cfg.scales().len()];
    let betas = vec![0.0; cfg.scales().len()];
    let t = sparse_max_instance(&goods, &betas, 1.0, &cfg).unwrap();
    assert_eq!((t.checked, t.violations), (0, 0));
    assert_eq!(menshov_instance(&[0.0; 9]).violations, 0);
    let windows = IntervalFamily::grid(3, Interval::new(0, 64).unwrap());
    let t = beta_constancy_instance(&goods, &windows);
    assert_eq!(t.violations, 0);
    let rows = vec![vec![0.0; cfg.scales().len()]; windows.len()];
    let t = exceptional_instance(&[(1, rows.clone())], &[(0, rows)], 1.0, 0.05, &windows);
    assert_eq!(t.violations, 0);
}
