//! End-to-end tests of the `blockstep` binary: every subcommand, the exit
//! codes (0 success, 2 usage, 3 numerical precondition), and the documented
//! output artifacts. Trace CSVs are re-read through the library's own parser
//! so the artifacts stay consumable by the rest of the toolkit.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use blockstep_core::altproj::rate_table;
use blockstep_core::model::{BlockProblem, Method};
use blockstep_core::numkernels::{DenseMatrix, DenseVector};
use blockstep_core::solvers::{asymptotic_rate_with, SolverTrace};
use blockstep_core::spectrum::closed_form_spectrum;
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_blockstep");

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    cmd.env_remove("BLOCKSTEP_SEED");
    for (key, value) in env {
        cmd.env(key, value);
    }
    cmd.output().expect("the binary launches")
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("terminated by exit, not signal")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "command failed with {:?}: {}",
        out.status.code(),
        stderr_text(out)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn field(value: &Value, path: &[&str]) -> f64 {
    let mut cursor = value;
    for key in path {
        cursor = &cursor[key];
    }
    cursor.as_f64().unwrap_or_else(|| panic!("{path:?} is not a number in {value}"))
}

fn load_instance(path: &Path) -> (BlockProblem<f64>, Option<u64>) {
    let text = fs::read_to_string(path).expect("instance file exists");
    BlockProblem::from_json(&text).expect("instance file parses")
}

/// A five-row instance with orthonormal blocks whose coupling has rank one
/// and top eigenvalue 0.75: the first block is a coordinate plane, the
/// second shares one direction at the planted angle and adds a fresh axis.
fn rank_deficient_instance() -> BlockProblem<f64> {
    let c = 0.75f64.sqrt();
    let s = 0.5;
    let mut a1 = DenseMatrix::zeros(5, 2);
    a1[(0, 0)] = 1.0;
    a1[(1, 1)] = 1.0;
    let mut a2 = DenseMatrix::zeros(5, 2);
    a2[(0, 0)] = c;
    a2[(2, 0)] = s;
    a2[(3, 1)] = 1.0;
    let y = DenseVector::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    BlockProblem::new(a1, a2, y).expect("planted instance validates")
}

/// A coupled instance whose first block is not orthonormal, so every
/// closed-form surface must refuse it while the general solvers accept it.
fn non_bwo_instance() -> BlockProblem<f64> {
    let mut a1 = DenseMatrix::zeros(5, 1);
    a1[(0, 0)] = 1.0;
    a1[(1, 0)] = 1.0;
    let mut a2 = DenseMatrix::zeros(5, 1);
    a2[(0, 0)] = 1.0;
    let y = DenseVector::new(vec![1.0, 1.0, 1.0, 1.0, 1.0]);
    BlockProblem::new(a1, a2, y).expect("shape and rank are fine without orthonormality")
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[test]
fn gen_writes_a_validating_instance_at_the_reference_scale() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("inst.json");
    let out = run(&[
        "gen", "--m", "1000", "--n1", "300", "--n2", "500", "--cond", "1e5", "--noise", "0.01",
        "--seed", "1", "--out", path.to_str().unwrap(),
    ]);
    let summary = stdout_json(&out);
    assert_eq!(summary["m"].as_u64(), Some(1000));
    assert_eq!(summary["seed"].as_u64(), Some(1));

    let (problem, seed) = load_instance(&path);
    assert_eq!(seed, Some(1));
    let outcome = problem.validate();
    assert!(outcome.assumes_bwo && outcome.c_nonzero && outcome.full_column_rank);
    assert!(
        (outcome.kappa - 1e5).abs() <= 1e-6 * 1e5,
        "kappa = {} misses the target",
        outcome.kappa
    );
    // the reported top eigenvalue is the loaded instance's cached one
    let lambda1 = problem.lambdas_cc().as_slice()[0];
    assert!((field(&summary, &["lambda1"]) - lambda1).abs() <= 1e-12);
    // serializing the loaded instance reproduces the artifact byte for byte
    let round_trip = problem.to_json(Some(1));
    assert_eq!(fs::read_to_string(&path).unwrap(), round_trip);
}

#[test]
fn gen_rejects_impossible_shapes_with_the_numerical_exit_code() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    let out = run(&["gen", "--m", "2", "--n1", "2", "--n2", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3);
    assert!(stderr_text(&out).contains("bad shape"));
    assert!(!path.exists(), "no artifact on failure");
}

#[test]
fn gen_gates_its_sources_and_writes_the_two_column_pair() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("tc.json");
    let out = run(&["gen", "--two-column", "0.6", "--out", path.to_str().unwrap()]);
    let summary = stdout_json(&out);
    assert!((field(&summary, &["lambda1"]) - 0.36).abs() <= 1e-12);
    let (problem, _) = load_instance(&path);
    assert_eq!((problem.n1(), problem.n2(), problem.r()), (1, 1, 1));
    assert!((problem.lambdas_cc().as_slice()[0] - 0.36).abs() <= 1e-12);

    // both sources at once, and no source at all, are usage errors
    let both = run(&[
        "gen", "--two-column", "0.6", "--m", "9", "--n1", "2", "--n2", "3", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&both), 2);
    let neither = run(&["gen", "--out", path.to_str().unwrap()]);
    assert_eq!(exit_code(&neither), 2);
    // an incomplete shape is a usage error too
    let partial = run(&["gen", "--m", "9", "--out", path.to_str().unwrap()]);
    assert_eq!(exit_code(&partial), 2);
}

#[test]
fn seed_precedence_follows_flag_env_default() {
    let dir = TempDir::new().unwrap();
    let path = |name: &str| dir.path().join(name);
    let gen = |name: &str, extra: &[&str], env: &[(&str, &str)]| {
        let target = path(name);
        let mut args = vec!["gen", "--two-column", "0.6", "--out"];
        args.push(target.to_str().unwrap());
        args.extend_from_slice(extra);
        let out = run_env(&args, env);
        assert!(out.status.success(), "{}", stderr_text(&out));
        fs::read(&target).unwrap()
    };

    // same environment seed twice: identical artifacts
    let env9a = gen("e9a.json", &[], &[("BLOCKSTEP_SEED", "9")]);
    let env9b = gen("e9b.json", &[], &[("BLOCKSTEP_SEED", "9")]);
    assert_eq!(env9a, env9b);
    // the flag wins over the environment
    let flag5_env9 = gen("f5e9.json", &["--seed", "5"], &[("BLOCKSTEP_SEED", "9")]);
    let flag5 = gen("f5.json", &["--seed", "5"], &[]);
    assert_eq!(flag5_env9, flag5);
    assert_ne!(env9a, flag5);
    // no flag, no environment: the default seed is 1
    let default = gen("d.json", &[], &[]);
    let flag1 = gen("f1.json", &["--seed", "1"], &[]);
    assert_eq!(default, flag1);
    // a malformed environment seed is a usage error
    let bad = run_env(
        &["gen", "--two-column", "0.6", "--out", path("bad.json").to_str().unwrap()],
        &[("BLOCKSTEP_SEED", "abc")],
    );
    assert_eq!(exit_code(&bad), 2);
}

// ---------------------------------------------------------------------------
// stepsizes
// ---------------------------------------------------------------------------

#[test]
fn stepsize_plans_match_the_closed_forms_on_a_rank_deficient_instance() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("rankdef.json");
    let problem = rank_deficient_instance();
    fs::write(&path, problem.to_json(None)).unwrap();
    let instance = path.to_str().unwrap();

    let bgd = stdout_json(&run(&["stepsizes", "--instance", instance, "--method", "bgd"]));
    assert_eq!(bgd["method"].as_str(), Some("bgd"));
    assert!((field(&bgd, &["params", "gamma1"]) - 4.0 / 3.0).abs() <= 1e-12);
    assert!((field(&bgd, &["params", "gamma2"]) - 4.0 / 3.0).abs() <= 1e-12);
    assert!((field(&bgd, &["predicted_rho"]) - 1.0 / 3.0).abs() <= 1e-12);

    let hb = stdout_json(&run(&["stepsizes", "--instance", instance, "--method", "hb"]));
    assert!((field(&hb, &["predicted_rho"]) - 1.0 / 3.0f64.sqrt()).abs() <= 1e-12);
    let rho_hb = field(&hb, &["predicted_rho"]);
    assert!((field(&hb, &["params", "beta"]) - rho_hb * rho_hb).abs() <= 1e-15);

    // the planned radius is the spectral radius at the planned stepsizes
    let report = closed_form_spectrum(
        problem.lambdas_cc().as_slice(),
        problem.r(),
        problem.n1(),
        problem.n2(),
        field(&bgd, &["params", "gamma1"]),
        field(&bgd, &["params", "gamma2"]),
    )
    .unwrap();
    assert!((field(&bgd, &["predicted_rho"]) - report.rho).abs() <= 1e-10);

    let gd = stdout_json(&run(&["stepsizes", "--instance", instance, "--method", "gd"]));
    assert!((field(&gd, &["params", "gamma"]) - 1.0).abs() <= 1e-12);
    assert!((field(&gd, &["predicted_rho"]) - 0.75f64.sqrt()).abs() <= 1e-12);

    let unknown = run(&["stepsizes", "--instance", instance, "--method", "zz"]);
    assert_eq!(exit_code(&unknown), 2);
    let projection_only = run(&["stepsizes", "--instance", instance, "--method", "gapxx"]);
    assert_eq!(exit_code(&projection_only), 2);
}

// ---------------------------------------------------------------------------
// spectra
// ---------------------------------------------------------------------------

#[test]
fn spectra_mirror_the_library_reports() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("rankdef.json");
    let problem = rank_deficient_instance();
    fs::write(&path, problem.to_json(None)).unwrap();
    let instance = path.to_str().unwrap();

    // byte-for-byte the library's own serialization, stepsizes passed through
    let out = run(&["spectra", "--instance", instance, "--gamma1", "0.5", "--gamma2", "0.5"]);
    assert!(out.status.success(), "{}", stderr_text(&out));
    let expected = closed_form_spectrum(
        problem.lambdas_cc().as_slice(),
        problem.r(),
        problem.n1(),
        problem.n2(),
        0.5,
        0.5,
    )
    .unwrap()
    .to_json();
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim_end(), expected);

    // unit first stepsize lands on the exact-minimization branch
    let report = stdout_json(&run(&[
        "spectra", "--two-column", "0.5", "--gamma1", "1", "--gamma2", "1",
    ]));
    assert_eq!(report["case"].as_str(), Some("Gamma1One"));
    assert!((field(&report, &["rho"]) - 0.25).abs() <= 1e-12);
    let mult: u64 = report["eigs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["mult"].as_u64().unwrap())
        .sum();
    assert_eq!(mult, 2);
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[test]
fn solve_reproduces_the_planned_rates() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("inst.json");
    stdout_json(&run(&[
        "gen", "--m", "200", "--n1", "40", "--n2", "60", "--cond", "1e3", "--seed", "11",
        "--out", inst.to_str().unwrap(),
    ]));
    let instance = inst.to_str().unwrap();

    // block gradient descent at its tuned stepsizes
    let trace_path = dir.path().join("bgd.csv");
    let summary = stdout_json(&run(&[
        "solve", "--instance", instance, "--method", "bgd", "--optimal", "--iters", "2000",
        "--out", trace_path.to_str().unwrap(),
    ]));
    let predicted = field(&summary, &["predicted_rho"]);
    let trace = SolverTrace::<f64>::from_csv(&fs::read_to_string(&trace_path).unwrap()).unwrap();
    assert_eq!(trace.method, Method::Bgd);
    assert_eq!(trace.errors.len(), 2001);
    assert_eq!(trace.seed, Some(11), "the trace remembers the instance seed");
    let fit = asymptotic_rate_with(&trace, 0.9).unwrap();
    assert!(
        (fit.rho_hat - predicted).abs() <= 5e-2 * predicted,
        "bgd tail rate {} vs planned {predicted}",
        fit.rho_hat
    );

    // heavy ball at its tuned parameters
    let hb_path = dir.path().join("hb.csv");
    let hb_summary = stdout_json(&run(&[
        "solve", "--instance", instance, "--method", "hb", "--optimal", "--iters", "2000",
        "--out", hb_path.to_str().unwrap(),
    ]));
    let hb_predicted = field(&hb_summary, &["predicted_rho"]);
    let hb_trace = SolverTrace::<f64>::from_csv(&fs::read_to_string(&hb_path).unwrap()).unwrap();
    let hb_fit = asymptotic_rate_with(&hb_trace, 0.85).unwrap();
    assert!(
        (hb_fit.rho_hat - hb_predicted).abs() <= 5e-2 * hb_predicted,
        "hb tail rate {} vs planned {hb_predicted}",
        hb_fit.rho_hat
    );
    // the block optimum beats the heavy-ball optimum on the same instance
    assert!(predicted < hb_predicted);
}

#[test]
fn solve_collapses_the_two_column_pair_in_two_sweeps() {
    let dir = TempDir::new().unwrap();
    let trace_path = dir.path().join("tc.csv");
    // exact second-block minimization paired with the inverse-gap stepsize
    let summary = stdout_json(&run(&[
        "solve", "--two-column", "0.6", "--method", "bgd", "--gamma1", "1.0", "--gamma2",
        "1.5625", "--iters", "4", "--out", trace_path.to_str().unwrap(),
    ]));
    assert!(field(&summary, &["predicted_rho"]) <= 1e-12);
    let trace = SolverTrace::<f64>::from_csv(&fs::read_to_string(&trace_path).unwrap()).unwrap();
    assert!(
        trace.errors[2] <= 1e-10 * trace.errors[0],
        "two sweeps should annihilate the error, got {:e} from {:e}",
        trace.errors[2],
        trace.errors[0]
    );
}

#[test]
fn solve_gates_stepsizes_and_flag_combinations() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("t.csv");
    let out = out_path.to_str().unwrap();

    let zero = run(&["solve", "--two-column", "0.6", "--method", "gd", "--gamma", "0", "--out", out]);
    assert_eq!(exit_code(&zero), 3);
    assert!(stderr_text(&zero).contains("bad stepsize"));

    let none = run(&["solve", "--two-column", "0.6", "--method", "bgd", "--out", out]);
    assert_eq!(exit_code(&none), 2);
    let mixed = run(&[
        "solve", "--two-column", "0.6", "--method", "bgd", "--optimal", "--gamma1", "1.0",
        "--out", out,
    ]);
    assert_eq!(exit_code(&mixed), 2);
    let bem_extra = run(&[
        "solve", "--two-column", "0.6", "--method", "bem", "--gamma1", "1.0", "--out", out,
    ]);
    assert_eq!(exit_code(&bem_extra), 2);
    let negative_beta = run(&[
        "solve", "--two-column", "0.6", "--method", "hb", "--alpha", "1.0", "--beta=-0.1",
        "--out", out,
    ]);
    assert_eq!(exit_code(&negative_beta), 3);
    let unreadable = run(&["solve", "--instance", "/no/such/file.json", "--method", "bem", "--out", out]);
    assert_eq!(exit_code(&unreadable), 2);
}

#[test]
fn non_bwo_instances_are_rejected_where_the_closed_forms_apply() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("skew.json");
    fs::write(&path, non_bwo_instance().to_json(None)).unwrap();
    let instance = path.to_str().unwrap();

    for args in [
        vec!["stepsizes", "--instance", instance, "--method", "bgd"],
        vec!["spectra", "--instance", instance, "--gamma1", "1", "--gamma2", "1"],
    ] {
        let out = run(&args);
        assert_eq!(exit_code(&out), 3, "{args:?}");
        assert!(stderr_text(&out).contains("orthonormal"));
    }
    let tuned = run(&[
        "solve", "--instance", instance, "--method", "bgd", "--optimal", "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&tuned), 3);

    // explicit stepsizes still run through the general sweep path
    let trace_path = dir.path().join("general.csv");
    let summary = stdout_json(&run(&[
        "solve", "--instance", instance, "--method", "bgd", "--gamma1", "0.5", "--gamma2",
        "0.5", "--iters", "50", "--out", trace_path.to_str().unwrap(),
    ]));
    assert!(summary["predicted_rho"].is_null(), "no closed form without orthonormal blocks");
    let trace = SolverTrace::<f64>::from_csv(&fs::read_to_string(&trace_path).unwrap()).unwrap();
    assert!(trace.errors.iter().all(|e| e.is_finite()));
    assert!(trace.errors[50] < trace.errors[0]);
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[test]
fn sweep_orders_rows_and_squares_the_heavy_ball_rate() {
    let dir = TempDir::new().unwrap();
    let csv_path = dir.path().join("sweep.csv");
    let summary = stdout_json(&run(&[
        "sweep", "--cond", "1e3,10,1e5", "--iters", "1200", "--seed", "3", "--out",
        csv_path.to_str().unwrap(),
    ]));
    assert_eq!(summary["rows"].as_u64(), Some(3));

    let text = fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("kappa,rho_gd,rho_hb,rho_bgd,measured_gd,measured_hb,measured_bgd")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    // rows come out ordered by condition number regardless of input order
    let kappas: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(kappas, vec![10.0, 1e3, 1e5]);
    for row in &rows {
        let [_, rho_gd, rho_hb, rho_bgd, m_gd, m_hb, m_bgd] = row[..] else {
            panic!("row has the wrong width: {row:?}")
        };
        // the equal-stepsize block plan squares the heavy-ball rate exactly
        assert!(
            (rho_bgd - rho_hb * rho_hb).abs() <= 1e-12,
            "rho_bgd {rho_bgd} vs rho_hb² {}",
            rho_hb * rho_hb
        );
        for (measured, planned) in [(m_gd, rho_gd), (m_hb, rho_hb), (m_bgd, rho_bgd)] {
            assert!(
                (measured - planned).abs() <= 5e-2 * planned,
                "measured {measured} vs planned {planned}"
            );
        }
        assert!(rho_bgd < rho_hb && rho_hb < rho_gd);
    }

    // a serial pool reproduces the default run byte for byte
    let serial_path = dir.path().join("serial.csv");
    stdout_json(&run(&[
        "sweep", "--cond", "1e3,10,1e5", "--iters", "1200", "--seed", "3", "--jobs", "1",
        "--out", serial_path.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&csv_path).unwrap(), fs::read(&serial_path).unwrap());

    let empty = run(&["sweep", "--out", dir.path().join("e.csv").to_str().unwrap()]);
    assert_eq!(exit_code(&empty), 2);
}

// ---------------------------------------------------------------------------
// gap
// ---------------------------------------------------------------------------

#[test]
fn gap_matches_the_tuned_projection_rates() {
    let dir = TempDir::new().unwrap();
    let trace_path = dir.path().join("gapxx.csv");
    let summary = stdout_json(&run(&[
        "gap", "--angles", "[0.5236,1.0472]", "--method", "gapxx", "--iters", "400", "--out",
        trace_path.to_str().unwrap(),
    ]));
    let measured = field(&summary, &["measured_rate"]);
    assert!(
        (measured - 0.26795).abs() <= 5e-2 * 0.26795,
        "measured {measured} vs tuned 0.26795"
    );

    // the rate-table CSV carries the closed forms exactly
    let table_path = dir.path().join("gapxx.table.csv");
    let table_text = fs::read_to_string(&table_path).unwrap();
    let expected = rate_table(0.5236, 1.0472);
    let mut lines = table_text.lines();
    assert_eq!(lines.next(), Some("method,rate"));
    for ((method, rate), line) in expected.rows().into_iter().zip(lines) {
        let (tag, value) = line.split_once(',').unwrap();
        assert_eq!(tag, method.tag());
        assert_eq!(value.parse::<f64>().unwrap(), rate, "{tag} row drifted");
    }

    // the trace is a GAP run at the resolved pair and parses back
    let trace = SolverTrace::<f64>::from_csv(&fs::read_to_string(&trace_path).unwrap()).unwrap();
    assert_eq!(trace.method, Method::Gap);
    assert_eq!(trace.gamma1, Some(field(&summary, &["params", "gamma1"])));
    assert_eq!(trace.errors.len(), 401);
}

#[test]
fn gap_right_angle_snap_makes_gapxx_coincide_with_gap() {
    let dir = TempDir::new().unwrap();
    let run_method = |method: &str, name: &str| {
        stdout_json(&run(&[
            "gap", "--angles", "[0.5236,1.5708]", "--method", method, "--out",
            dir.path().join(name).to_str().unwrap(),
        ]))
    };
    let xx = run_method("gapxx", "a.csv");
    let plain = run_method("gap", "b.csv");
    // 1.5708 snaps onto π/2, where the two tuned pairs coincide exactly
    assert_eq!(field(&xx, &["theta_r"]), FRAC_PI_2);
    assert_eq!(
        field(&xx, &["measured_rate"]).to_bits(),
        field(&plain, &["measured_rate"]).to_bits(),
        "identical operators must measure identically"
    );
    assert_eq!(field(&xx, &["tuned_rate"]), field(&plain, &["tuned_rate"]));
    assert_eq!(
        field(&xx, &["params", "gamma1"]).to_bits(),
        field(&plain, &["params", "gamma1"]).to_bits()
    );
}

#[test]
fn gap_accepts_degrees_and_random_pairs() {
    let dir = TempDir::new().unwrap();
    let degrees = stdout_json(&run(&[
        "gap", "--angles", "[30,60]", "--degrees", "--method", "gapxx", "--out",
        dir.path().join("deg.csv").to_str().unwrap(),
    ]));
    assert!((field(&degrees, &["theta1"]) - FRAC_PI_6).abs() <= 1e-12);
    let measured = field(&degrees, &["measured_rate"]);
    let tuned = field(&degrees, &["tuned_rate"]);
    assert!((measured - tuned).abs() <= 5e-2 * tuned);

    // a random pair reports its measured angles and still matches the table
    let random = stdout_json(&run(&[
        "gap", "--n1", "2", "--n2", "2", "--m", "8", "--method", "ap", "--seed", "7",
        "--iters", "300", "--out", dir.path().join("rand.csv").to_str().unwrap(),
    ]));
    let theta1 = field(&random, &["theta1"]);
    assert!(theta1 > 0.0 && field(&random, &["theta_r"]) <= FRAC_PI_2);
    let ap_measured = field(&random, &["measured_rate"]);
    let ap_tuned = field(&random, &["tuned_rate"]);
    assert!(
        (ap_measured - ap_tuned).abs() <= 5e-2 * ap_tuned,
        "alternating projections contract at cos²θ1: {ap_measured} vs {ap_tuned}"
    );
}

#[test]
fn gap_gates_usage_and_angle_ranges() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("g.csv");
    let out = out_path.to_str().unwrap();

    let forced = run(&["gap", "--angles", "[0.5]", "--method", "gapxx", "--gamma", "0.5", "--out", out]);
    assert_eq!(exit_code(&forced), 2);
    let shapeless = run(&["gap", "--method", "ap", "--out", out]);
    assert_eq!(exit_code(&shapeless), 2);
    let solver_method = run(&["gap", "--angles", "[0.5]", "--method", "bgd", "--out", out]);
    assert_eq!(exit_code(&solver_method), 2);
    let malformed = run(&["gap", "--angles", "0.5;0.7", "--method", "ap", "--out", out]);
    assert_eq!(exit_code(&malformed), 2);

    // an angle beyond π/2 violates the planted construction's range
    let wide = run(&["gap", "--angles", "[2.0]", "--method", "ap", "--out", out]);
    assert_eq!(exit_code(&wide), 3);
    assert!(stderr_text(&wide).contains("out of range"));
    // an over-relaxed outer stepsize violates the operator gate
    let hot = run(&["gap", "--angles", "[0.5]", "--method", "rap", "--gamma", "1.5", "--out", out]);
    assert_eq!(exit_code(&hot), 3);
    assert!(stderr_text(&hot).contains("bad stepsize"));
}

// ---------------------------------------------------------------------------
// surface
// ---------------------------------------------------------------------------

#[test]
fn help_lists_every_subcommand() {
    let out = run(&["--help"]);
    assert_eq!(exit_code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    for name in ["gen", "stepsizes", "spectra", "solve", "sweep", "gap"] {
        assert!(text.contains(name), "help misses {name}");
    }
}
