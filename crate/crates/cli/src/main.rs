//! `hdwilks`: corrected likelihood-ratio tests for high-dimensional
//! multivariate regression, plus the simulation and verification harness.
//!
//! Exit codes: 0 success, 1 statistical/domain error, 2 I/O or parse error.

mod csvio;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use hdwilks::linmodel::Dataset;
use hdwilks::oracle::{
    contour_mean, contour_variance, mc_clt_check, quad_lsd_integral, ContourSpec, LsdIntegrand,
    McCltOutcome,
};
use hdwilks::rmt::{corrections, fisher_lsd_density, lsd_support, solve_cd, AspectRatios};
use hdwilks::simulate::{emit_figure_data, run_power_study, SimConfig};
use hdwilks::testkit::{
    classical_manova_lrt, manova_clrt, test_battery, Reference, SigmaInfo, TestMethod, TestReport,
};
use hdwilks::{Error, Result};

/// Default seed for commands that draw randomness.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "hdwilks", version, about = "High-dimensional corrected likelihood-ratio tests")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Clrt,
    Lrt,
    Bbc,
    St1,
    St2,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ManovaMethod {
    /// Corrected statistic with the normal reference.
    Clrt,
    /// Classical statistic with the chi-square reference.
    Lrt,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    /// y1, y2 in {0.1, ..., 0.9}.
    Coarse,
    /// y1, y2 in {0.05, ..., 0.95}.
    Fine,
}

#[derive(Subcommand)]
enum Cmd {
    /// Test a coefficient block of a fitted regression.
    Test {
        /// Response CSV, n rows by p columns.
        x: PathBuf,
        /// Regressor CSV, n rows by q columns.
        z: PathBuf,
        /// Number of leading regressor columns under test.
        #[arg(long)]
        q1: usize,
        /// CSV with the hypothesized p x q1 coefficient block; omitted means zero.
        #[arg(long)]
        b1star: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = MethodArg::All)]
        method: MethodArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Also write the reports as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Treat the first CSV line as a header even if it parses as numbers.
        #[arg(long)]
        header: bool,
    },
    /// Test equality of several group mean vectors.
    Manova {
        /// One CSV per group, rows are observations.
        #[arg(required = true, num_args = 2..)]
        groups: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = ManovaMethod::Clrt)]
        method: ManovaMethod,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        header: bool,
    },
    /// Run a size/power study from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; falls back to HDW_THREADS, then all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate the limiting spectral density and the correction constants.
    Lsd {
        #[arg(long)]
        y1: f64,
        #[arg(long)]
        y2: f64,
        /// Print the density at this point.
        #[arg(long, conflicts_with = "moments")]
        at: Option<f64>,
        /// Print support, (c, d) pair and the correction constants.
        #[arg(long)]
        moments: bool,
    },
    /// Check every closed form against the independent numerical oracles.
    Verify {
        #[arg(long, value_enum, default_value_t = GridArg::Coarse)]
        grid: GridArg,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(if e.is_statistical() { 1 } else { 2 });
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Test {
            x,
            z,
            q1,
            b1star,
            method,
            alpha,
            json,
            header,
        } => cmd_test(&x, &z, q1, b1star.as_deref(), method, alpha, json.as_deref(), header),
        Cmd::Manova {
            groups,
            method,
            alpha,
            json,
            header,
        } => cmd_manova(&groups, method, alpha, json.as_deref(), header),
        Cmd::Simulate {
            config,
            out,
            threads,
        } => cmd_simulate(&config, &out, threads),
        Cmd::Lsd { y1, y2, at, moments } => cmd_lsd(y1, y2, at, moments),
        Cmd::Verify { grid, seed } => cmd_verify(grid, seed),
    }
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

fn reference_label(r: &Reference) -> (String, Option<u64>) {
    match r {
        Reference::StandardNormal => ("N(0,1)".into(), None),
        Reference::ChiSquared { df } => (format!("chi2({df})"), Some(*df)),
    }
}

fn report_json(r: &TestReport, alpha: f64) -> serde_json::Value {
    let (_, df) = reference_label(&r.reference);
    serde_json::json!({
        "method": r.method,
        "statistic": r.statistic,
        "reference": match r.reference {
            Reference::StandardNormal => "standard_normal",
            Reference::ChiSquared { .. } => "chi_squared",
        },
        "df": df,
        "p_value": r.p_value,
        "alpha": alpha,
        "reject": r.reject_at(alpha),
        "dims": { "p": r.dims.p, "n": r.dims.n, "q": r.dims.q, "q1": r.dims.q1 },
        "ratios": r.ratios.map(|y| serde_json::json!({ "y1": y.y1(), "y2": y.y2() })),
        "corrections": r.corrections.map(|c| serde_json::json!({
            "m": c.mean_m, "v": c.var_v, "Ff": c.lsd_moment,
        })),
    })
}

fn print_report_table(reports: &[(TestMethod, Result<TestReport>)], alpha: f64) {
    println!(
        "{:<6} {:>14} {:>10} {:>12} {:>8}",
        "method", "statistic", "reference", "p-value", "reject"
    );
    for (m, r) in reports {
        match r {
            Ok(rep) => {
                let (label, _) = reference_label(&rep.reference);
                println!(
                    "{:<6} {:>14.6} {:>10} {:>12.6} {:>8}",
                    rep.method,
                    rep.statistic,
                    label,
                    rep.p_value,
                    if rep.reject_at(alpha) { "yes" } else { "no" }
                );
            }
            Err(e) => println!("{:<6} unavailable: {e}", m.name()),
        }
    }
}

fn write_json(path: &Path, reports: &[(TestMethod, Result<TestReport>)], alpha: f64) -> Result<()> {
    let entries: Vec<serde_json::Value> = reports
        .iter()
        .map(|(m, r)| match r {
            Ok(rep) => report_json(rep, alpha),
            Err(e) => serde_json::json!({ "method": m.name(), "error": e.to_string() }),
        })
        .collect();
    let text = serde_json::to_string_pretty(&entries).expect("reports serialize");
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_test(
    x_path: &Path,
    z_path: &Path,
    q1: usize,
    b1star: Option<&Path>,
    method: MethodArg,
    alpha: f64,
    json: Option<&Path>,
    header: bool,
) -> Result<()> {
    check_alpha(alpha)?;
    let x = csvio::read_matrix(x_path, header)?;
    let z = csvio::read_matrix(z_path, header)?;
    let data = Dataset::new(x, z, q1)?;
    let dims = data.dims();
    let b1_star = match b1star {
        Some(path) => {
            let m = csvio::read_matrix(path, header)?;
            if m.nrows() != dims.p || m.ncols() != dims.q1 {
                return Err(Error::Domain(format!(
                    "b1star must be {} x {}, got {} x {}",
                    dims.p,
                    dims.q1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            m
        }
        None => DMatrix::zeros(dims.p, dims.q1),
    };
    let methods: Vec<TestMethod> = match method {
        MethodArg::All => TestMethod::ALL.to_vec(),
        MethodArg::Clrt => vec![TestMethod::Clrt],
        MethodArg::Lrt => vec![TestMethod::Lrt],
        MethodArg::Bbc => vec![TestMethod::Bbc],
        MethodArg::St1 => vec![TestMethod::St1],
        MethodArg::St2 => vec![TestMethod::St2],
    };
    let mut reports = test_battery(&data, &b1_star, &methods, SigmaInfo::PlugIn);
    // A single requested method propagates its failure to the exit code.
    if reports.len() == 1 && reports[0].1.is_err() {
        return Err(reports.remove(0).1.unwrap_err());
    }
    println!(
        "n = {}, p = {}, q = {}, q1 = {}, alpha = {}",
        dims.n, dims.p, dims.q, dims.q1, alpha
    );
    print_report_table(&reports, alpha);
    if let Some(path) = json {
        write_json(path, &reports, alpha)?;
    }
    Ok(())
}

fn cmd_manova(
    groups: &[PathBuf],
    method: ManovaMethod,
    alpha: f64,
    json: Option<&Path>,
    header: bool,
) -> Result<()> {
    check_alpha(alpha)?;
    let samples: Vec<DMatrix<f64>> = groups
        .iter()
        .map(|p| csvio::read_matrix(p, header))
        .collect::<Result<_>>()?;
    let (tag, report) = match method {
        ManovaMethod::Clrt => (TestMethod::Clrt, manova_clrt(&samples)?),
        ManovaMethod::Lrt => (TestMethod::Lrt, classical_manova_lrt(&samples)?),
    };
    println!("groups = {}, alpha = {alpha}", samples.len());
    let reports = vec![(tag, Ok(report))];
    print_report_table(&reports, alpha);
    if let Some(path) = json {
        write_json(path, &reports, alpha)?;
    }
    Ok(())
}

fn cmd_simulate(config: &Path, out: &Path, threads: Option<usize>) -> Result<()> {
    let cfg = SimConfig::from_file(config)?;
    let threads = threads.or_else(|| {
        std::env::var("HDW_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        // Ignore the error when a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    eprintln!(
        "study: p={} n={} q={} q1={} rho={} reps={} c0 points={} tests={}",
        cfg.dims.p,
        cfg.dims.n,
        cfg.dims.q,
        cfg.dims.q1,
        cfg.rho,
        cfg.reps,
        cfg.c0_grid.len(),
        cfg.tests.len()
    );
    let t0 = Instant::now();
    let table = run_power_study(&cfg)?;
    eprintln!("done in {:.1?}", t0.elapsed());
    emit_figure_data(&table, out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn cmd_lsd(y1: f64, y2: f64, at: Option<f64>, moments: bool) -> Result<()> {
    let y = AspectRatios::new(y1, y2)?;
    if let Some(x) = at {
        println!("{}", fisher_lsd_density(x, y));
        return Ok(());
    }
    let _ = moments; // default action
    let sup = lsd_support(y);
    let cd = solve_cd(1.0, y.y2() / y.y1(), y)?;
    let c = corrections(y);
    println!("h  = {}", y.h());
    println!("a  = {}", sup.a);
    println!("b  = {}", sup.b);
    println!("c  = {}", cd.c);
    println!("d  = {}", cd.d);
    println!("m  = {}", c.mean_m);
    println!("v  = {}", c.var_v);
    println!("Ff = {}", c.lsd_moment);
    Ok(())
}

fn cmd_verify(grid: GridArg, seed: u64) -> Result<()> {
    let (lo, hi, step) = match grid {
        GridArg::Coarse => (1, 9, 1),
        GridArg::Fine => (1, 19, 1),
    };
    let scale = match grid {
        GridArg::Coarse => 10.0,
        GridArg::Fine => 20.0,
    };
    let mean_spec = ContourSpec::mean_default();
    let var_spec = ContourSpec::variance_default();
    let mut worst_mass = 0.0f64;
    let mut worst_moment = 0.0f64;
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    let t0 = Instant::now();
    for i in (lo..=hi).step_by(step) {
        for j in (lo..=hi).step_by(step) {
            let y = AspectRatios::new(i as f64 / scale, j as f64 / scale)?;
            let c = corrections(y);
            worst_mass = worst_mass
                .max((quad_lsd_integral(LsdIntegrand::One, y)? - 1.0).abs());
            worst_moment = worst_moment
                .max((quad_lsd_integral(LsdIntegrand::LogMoment, y)? - c.lsd_moment).abs());
            worst_mean = worst_mean.max((contour_mean(y, &mean_spec)? - c.mean_m).abs());
            worst_var = worst_var.max((contour_variance(y, &var_spec)? - c.var_v).abs());
        }
        eprintln!("grid row y1 = {} done ({:.1?})", i as f64 / scale, t0.elapsed());
    }

    let mut all_ok = true;
    let mut line = |name: &str, residual: f64, tol: f64| {
        let ok = residual <= tol;
        all_ok &= ok;
        println!(
            "{:<28} max residual {:>10.3e}  tolerance {:>8.1e}  {}",
            name,
            residual,
            tol,
            if ok { "PASS" } else { "FAIL" }
        );
    };
    line("density mass", worst_mass, 1e-8);
    line("log moment vs quadrature", worst_moment, 1e-6);
    line("mean vs contour", worst_mean, 1e-5);
    line("variance vs contour", worst_var, 1e-5);

    let clt = match mc_clt_check(100, 200, 400, 2000, seed)? {
        McCltOutcome::Summary(s) => s,
        McCltOutcome::InsufficientReps => unreachable!("reps fixed at 2000"),
    };
    line("sampled mean (std errors)", clt.mean_err_in_se, 3.0);
    line("sampled variance ratio - 1", (clt.var_ratio - 1.0).abs(), 0.15);
    line("sampled KS distance", clt.ks_distance, 0.05);

    if all_ok {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Error::Convergence("verification checks failed".into()))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}
