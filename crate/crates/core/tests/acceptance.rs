//! End-to-end acceptance checks. Each test prints one PASS/FAIL line so the
//! suite output doubles as a checklist.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use hdwilks::linmodel::{f_matrix_eigenvalues, wilks_lambda, Dataset, DesignDims};
use hdwilks::oracle::{
    contour_mean, contour_variance, mc_clt_check, quad_lsd_integral, ContourSpec, LsdIntegrand,
    McCltOutcome,
};
use hdwilks::rmt::{corrections, AspectRatios};
use hdwilks::simulate::{run_power_study, PowerTable, SimConfig};
use hdwilks::testkit::{classical_manova_lrt, manova_clrt, manova_embed, TestMethod};

fn report(criterion: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("ACCEPTANCE {criterion}: PASS");
    } else {
        println!("ACCEPTANCE {criterion}: FAIL");
        panic!("{criterion}: {}", failures.join("; "));
    }
}

fn check(failures: &mut Vec<String>, ok: bool, msg: String) {
    if !ok {
        failures.push(msg);
    }
}

fn panel_a_table() -> &'static PowerTable {
    static TABLE: OnceLock<PowerTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let cfg = SimConfig {
            dims: DesignDims::new(10, 100, 50, 30).unwrap(),
            rho: 0.0,
            c0_grid: vec![0.0, 0.10],
            reps: 1000,
            seed: 7,
            tests: TestMethod::ALL.to_vec(),
            alpha: 0.05,
        };
        run_power_study(&cfg).unwrap()
    })
}

#[test]
fn acceptance_1_null_sizes_moderate_panel() {
    let table = panel_a_table();
    let mut failures = Vec::new();
    let expected = [
        (TestMethod::Clrt, 0.056),
        (TestMethod::Bbc, 0.101),
        (TestMethod::St1, 0.070),
        (TestMethod::St2, 0.086),
    ];
    for (m, want) in expected {
        match table.rate(0.0, m) {
            Some(got) => check(
                &mut failures,
                (got - want).abs() <= 0.03,
                format!("{} size {got:.3}, expected {want:.3} +- 0.03", m.name()),
            ),
            None => failures.push(format!("{} size missing", m.name())),
        }
    }
    match table.rate(0.0, TestMethod::Lrt) {
        Some(got) => check(
            &mut failures,
            got >= 0.99,
            format!("uncorrected LRT size {got:.3}, expected >= 0.99"),
        ),
        None => failures.push("LRT size missing".into()),
    }
    report("1 null sizes at (p,n,q,q1)=(10,100,50,30)", &failures);
}

#[test]
fn acceptance_2_power_moderate_panel() {
    let table = panel_a_table();
    let mut failures = Vec::new();
    for (m, want) in [(TestMethod::Clrt, 0.986), (TestMethod::St2, 1.0)] {
        match table.rate(0.10, m) {
            Some(got) => check(
                &mut failures,
                (got - want).abs() <= 0.03,
                format!("{} power {got:.3}, expected {want:.3} +- 0.03", m.name()),
            ),
            None => failures.push(format!("{} power missing", m.name())),
        }
    }
    report("2 power at c0=0.10, (10,100,50,30)", &failures);
}

#[test]
fn acceptance_3_correlated_noise_panel() {
    let cfg = SimConfig {
        dims: DesignDims::new(30, 200, 80, 60).unwrap(),
        rho: 0.9,
        c0_grid: vec![0.0, 0.020],
        reps: 1000,
        seed: 11,
        tests: vec![TestMethod::Clrt, TestMethod::St1, TestMethod::St2],
        alpha: 0.05,
    };
    let table = run_power_study(&cfg).unwrap();
    let mut failures = Vec::new();
    // ST sizes drift upward under strong coordinate correlation; the
    // corrected LRT holds its level.
    for (m, want) in [
        (TestMethod::Clrt, 0.054),
        (TestMethod::St1, 0.089),
        (TestMethod::St2, 0.105),
    ] {
        match table.rate(0.0, m) {
            Some(got) => check(
                &mut failures,
                (got - want).abs() <= 0.03,
                format!("{} size {got:.3}, expected {want:.3} +- 0.03", m.name()),
            ),
            None => failures.push(format!("{} size missing", m.name())),
        }
    }
    match table.rate(0.020, TestMethod::Clrt) {
        Some(got) => check(
            &mut failures,
            (got - 0.987).abs() <= 0.03,
            format!("clrt power {got:.3}, expected 0.987 +- 0.03"),
        ),
        None => failures.push("clrt power missing".into()),
    }
    report("3 sizes/power at (30,200,80,60), rho=0.9", &failures);
}

#[test]
fn acceptance_4_closed_forms_match_oracles_on_grid() {
    let t0 = Instant::now();
    let mean_spec = ContourSpec::mean_default();
    let var_spec = ContourSpec::variance_default();
    let mut failures = Vec::new();
    for i in 1..=9 {
        for j in 1..=9 {
            let y = AspectRatios::new(i as f64 / 10.0, j as f64 / 10.0).unwrap();
            let c = corrections(y);
            let moment = quad_lsd_integral(LsdIntegrand::LogMoment, y).unwrap();
            let m = contour_mean(y, &mean_spec).unwrap();
            let v = contour_variance(y, &var_spec).unwrap();
            check(
                &mut failures,
                (moment - c.lsd_moment).abs() <= 1e-6,
                format!("moment mismatch {:.2e} at ({i},{j})", (moment - c.lsd_moment).abs()),
            );
            check(
                &mut failures,
                (m - c.mean_m).abs() <= 1e-5,
                format!("mean mismatch {:.2e} at ({i},{j})", (m - c.mean_m).abs()),
            );
            check(
                &mut failures,
                (v - c.var_v).abs() <= 1e-5,
                format!("variance mismatch {:.2e} at ({i},{j})", (v - c.var_v).abs()),
            );
        }
    }
    let elapsed = t0.elapsed();
    check(
        &mut failures,
        elapsed.as_secs_f64() < 60.0,
        format!("grid sweep took {elapsed:?}, budget 60 s"),
    );
    report("4 oracle agreement on (y1,y2) grid", &failures);
}

#[test]
fn acceptance_5_gaussian_limit_of_centered_statistic() {
    let out = mc_clt_check(100, 200, 400, 2000, 20260824).unwrap();
    let s = match out {
        McCltOutcome::Summary(s) => s,
        McCltOutcome::InsufficientReps => unreachable!(),
    };
    let mut failures = Vec::new();
    check(
        &mut failures,
        s.mean_err_in_se < 3.0,
        format!("mean off by {:.2} standard errors", s.mean_err_in_se),
    );
    check(
        &mut failures,
        s.var_ratio >= 0.85 && s.var_ratio <= 1.15,
        format!("variance ratio {:.3} outside [0.85, 1.15]", s.var_ratio),
    );
    check(
        &mut failures,
        s.ks_distance < 0.05,
        format!("KS distance {:.3} >= 0.05", s.ks_distance),
    );
    report("5 normal limit at (p,q1,n2)=(100,200,400)", &failures);
}

#[test]
fn acceptance_6_chi_square_reference_drift() {
    let mut failures = Vec::new();

    let high_dim = SimConfig {
        dims: DesignDims::new(20, 100, 60, 50).unwrap(),
        rho: 0.0,
        c0_grid: vec![0.0],
        reps: 1000,
        seed: 13,
        tests: vec![TestMethod::Lrt],
        alpha: 0.05,
    };
    let size_high = run_power_study(&high_dim)
        .unwrap()
        .rate(0.0, TestMethod::Lrt)
        .unwrap();
    check(
        &mut failures,
        (0.99..=1.0).contains(&size_high),
        format!("high-dimensional LRT size {size_high:.3}, expected in [0.99, 1]"),
    );

    let classical = SimConfig {
        dims: DesignDims::new(2, 500, 2, 2).unwrap(),
        rho: 0.0,
        c0_grid: vec![0.0],
        reps: 1000,
        seed: 13,
        tests: vec![TestMethod::Lrt],
        alpha: 0.05,
    };
    let size_classical = run_power_study(&classical)
        .unwrap()
        .rate(0.0, TestMethod::Lrt)
        .unwrap();
    check(
        &mut failures,
        (0.03..=0.07).contains(&size_classical),
        format!("classical-regime LRT size {size_classical:.3}, expected in [0.03, 0.07]"),
    );

    report("6 chi-square drift vs classical regime", &failures);
}

#[test]
fn acceptance_7_structural_identities() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    // Determinant route vs eigenvalue route for the log Wilks statistic.
    for inst in 0..100 {
        let p = rng.random_range(2..8);
        let q1 = rng.random_range(1..5);
        let q = q1 + rng.random_range(0..4);
        let n = p + q + rng.random_range(5..40);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = DMatrix::from_fn(n, q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = match Dataset::new(x, z, q1) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let b1_star = DMatrix::zeros(p, q1);
        let lam = wilks_lambda(&data, &b1_star).unwrap();
        let eigs = f_matrix_eigenvalues(&data, &b1_star).unwrap();
        let ratio = q1 as f64 / data.dims().n2() as f64;
        let via_eigs: f64 = -eigs.iter().map(|&l| (1.0 + ratio * l).ln()).sum::<f64>();
        let denom = lam.log_lambda.abs().max(1.0);
        check(
            &mut failures,
            (lam.log_lambda - via_eigs).abs() / denom <= 1e-8,
            format!(
                "instance {inst}: det vs eigen log-lambda differ by {:.2e}",
                (lam.log_lambda - via_eigs).abs() / denom
            ),
        );
    }

    // MANOVA as an embedded regression reproduces the direct statistic.
    for inst in 0..20 {
        // The corrected statistic needs p below both groups - 1 and the
        // residual degrees of freedom.
        let p = rng.random_range(2..5);
        let groups = p + 2 + rng.random_range(0..3);
        let samples: Vec<DMatrix<f64>> = (0..groups)
            .map(|_| {
                let ni = p + rng.random_range(3..10);
                DMatrix::from_fn(ni, p, |_, _| rng.sample::<f64, _>(StandardNormal))
            })
            .collect();
        let direct = manova_clrt(&samples).unwrap();
        let (data, b1_star) = manova_embed(&samples).unwrap();
        let direct_log = classical_manova_lrt(&samples).unwrap().statistic
            / -(samples.iter().map(|s| s.nrows()).sum::<usize>() as f64);
        let embedded = wilks_lambda(&data, &b1_star).unwrap();
        check(
            &mut failures,
            (direct_log - embedded.log_lambda).abs() <= 1e-9,
            format!(
                "instance {inst}: embedded vs direct log-lambda differ by {:.2e}",
                (direct_log - embedded.log_lambda).abs()
            ),
        );
        // The corrected statistic agrees as well.
        let embedded_stat = hdwilks::testkit::clrt(&data, &b1_star).unwrap().statistic;
        check(
            &mut failures,
            (direct.statistic - embedded_stat).abs() <= 1e-8,
            format!("instance {inst}: corrected statistics differ"),
        );
    }

    // Replication streams do not depend on the thread count.
    let cfg = SimConfig {
        dims: DesignDims::new(6, 60, 20, 10).unwrap(),
        rho: 0.5,
        c0_grid: vec![0.0, 0.2],
        reps: 60,
        seed: 101,
        tests: TestMethod::ALL.to_vec(),
        alpha: 0.05,
    };
    let csv_by_threads: Vec<String> = [1usize, 2, 4]
        .iter()
        .map(|&t| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap();
            pool.install(|| run_power_study(&cfg).unwrap().to_csv())
        })
        .collect();
    check(
        &mut failures,
        csv_by_threads.iter().all(|c| *c == csv_by_threads[0]),
        "tables differ across thread counts".into(),
    );

    report("7 structural identities", &failures);
}
