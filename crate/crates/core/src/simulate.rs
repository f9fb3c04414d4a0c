//! Monte Carlo engine for size/power studies of the test battery.
//!
//! Replications are generated from counter-style RNG streams keyed by
//! `(master seed, replication index, stream role)`, so results are
//! bit-identical regardless of how the work is scheduled across threads.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linmodel::{Dataset, DesignDims};
use crate::testkit::{test_battery, SigmaInfo, TestMethod};

/// Full description of one simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dims: DesignDims,
    /// AR-style correlation of the noise coordinates, `C_ij = rho^|i-j|`.
    pub rho: f64,
    /// Non-centrality scale factors; must start at 0 and ascend.
    pub c0_grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub tests: Vec<TestMethod>,
    pub alpha: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::Domain("reps must be at least 1".into()));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::Domain(format!("rho = {} must lie in [0, 1)", self.rho)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if self.c0_grid.is_empty() || self.c0_grid[0] != 0.0 {
            return Err(Error::Domain("c0_grid must start at 0".into()));
        }
        if self.c0_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("c0_grid must be strictly ascending".into()));
        }
        Ok(())
    }

    /// Parse a key-value configuration file. Lines are `key = value`;
    /// blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = None;
        let mut n = None;
        let mut q = None;
        let mut q1 = None;
        let mut rho = None;
        let mut c0_grid: Option<Vec<f64>> = None;
        let mut reps = None;
        let mut seed = None;
        let mut tests: Option<Vec<TestMethod>> = None;
        let mut alpha = None;
        let mut unknown = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}: '{value}'", lineno + 1));
            match key {
                "p" => p = Some(value.parse::<usize>().map_err(|_| bad("p"))?),
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad("n"))?),
                "q" => q = Some(value.parse::<usize>().map_err(|_| bad("q"))?),
                "q1" => q1 = Some(value.parse::<usize>().map_err(|_| bad("q1"))?),
                "rho" => rho = Some(value.parse::<f64>().map_err(|_| bad("rho"))?),
                "reps" => reps = Some(value.parse::<usize>().map_err(|_| bad("reps"))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
                "alpha" => alpha = Some(value.parse::<f64>().map_err(|_| bad("alpha"))?),
                "c0_grid" => {
                    let grid: std::result::Result<Vec<f64>, _> = value
                        .split(',')
                        .map(|t| t.trim().parse::<f64>())
                        .collect();
                    c0_grid = Some(grid.map_err(|_| bad("c0_grid"))?);
                }
                "tests" => {
                    let list: Result<Vec<TestMethod>> = value
                        .split(',')
                        .map(|t| t.trim())
                        .filter(|t| !t.is_empty())
                        .map(TestMethod::parse)
                        .collect();
                    tests = Some(list?);
                }
                other => unknown.push(other.to_string()),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::Parse(format!("unknown keys: {}", unknown.join(", "))));
        }
        let missing = |what: &str| Error::Parse(format!("missing required key '{what}'"));
        let cfg = SimConfig {
            dims: DesignDims::new(
                p.ok_or_else(|| missing("p"))?,
                n.ok_or_else(|| missing("n"))?,
                q.ok_or_else(|| missing("q"))?,
                q1.ok_or_else(|| missing("q1"))?,
            )?,
            rho: rho.ok_or_else(|| missing("rho"))?,
            c0_grid: c0_grid.ok_or_else(|| missing("c0_grid"))?,
            reps: reps.ok_or_else(|| missing("reps"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            tests: tests.ok_or_else(|| missing("tests"))?,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// One table entry: a rejection frequency, or the error that disabled the
/// column for this configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Rate(f64),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub c0: f64,
    /// Aligned with the `tests` list of the configuration.
    pub cells: Vec<Cell>,
}

/// Size/power matrix produced by [`run_power_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTable {
    pub config: SimConfig,
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    /// Rejection rate for a given `(c0, test)` pair, if present and clean.
    pub fn rate(&self, c0: f64, method: TestMethod) -> Option<f64> {
        let col = self.config.tests.iter().position(|&m| m == method)?;
        let row = self.rows.iter().find(|r| r.c0 == c0)?;
        match row.cells[col] {
            Cell::Rate(r) => Some(r),
            Cell::Failed(_) => None,
        }
    }

    /// Serialize to CSV: a `#`-prefixed metadata block echoing the
    /// configuration, then one row per `c0` value. The `c0 = 0` row is
    /// labeled `size`, the others `power`.
    pub fn to_csv(&self) -> String {
        let cfg = &self.config;
        let mut out = String::new();
        out.push_str(&format!("# p = {}\n", cfg.dims.p));
        out.push_str(&format!("# n = {}\n", cfg.dims.n));
        out.push_str(&format!("# q = {}\n", cfg.dims.q));
        out.push_str(&format!("# q1 = {}\n", cfg.dims.q1));
        out.push_str(&format!("# rho = {}\n", cfg.rho));
        let grid: Vec<String> = cfg.c0_grid.iter().map(|c| c.to_string()).collect();
        out.push_str(&format!("# c0_grid = {}\n", grid.join(", ")));
        out.push_str(&format!("# reps = {}\n", cfg.reps));
        out.push_str(&format!("# seed = {}\n", cfg.seed));
        let tests: Vec<&str> = cfg.tests.iter().map(|t| t.name()).collect();
        out.push_str(&format!("# tests = {}\n", tests.join(", ")));
        out.push_str(&format!("# alpha = {}\n", cfg.alpha));
        let mut header = String::from("c0,kind");
        for t in &cfg.tests {
            header.push(',');
            header.push_str(t.name());
        }
        out.push_str(&header);
        out.push('\n');
        if cfg.tests.is_empty() {
            return out;
        }
        for row in &self.rows {
            let kind = if row.c0 == 0.0 { "size" } else { "power" };
            out.push_str(&format!("{},{kind}", row.c0));
            for cell in &row.cells {
                out.push(',');
                match cell {
                    Cell::Rate(r) => out.push_str(&r.to_string()),
                    Cell::Failed(msg) => {
                        out.push_str("ERR:");
                        out.push_str(&msg.replace([',', '\n'], ";"));
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parse the CSV format produced by [`PowerTable::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let meta: String = text
            .lines()
            .filter(|l| l.starts_with('#'))
            .map(|l| format!("{}\n", l.trim_start_matches('#').trim()))
            .collect();
        let config = SimConfig::parse(&meta)?;
        let mut rows = Vec::new();
        let mut data_lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = data_lines
            .next()
            .ok_or_else(|| Error::Parse("missing header row".into()))?;
        let expected = 2 + config.tests.len();
        if header.split(',').count() != expected {
            return Err(Error::Parse("header does not match the tests list".into()));
        }
        for line in data_lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected {
                return Err(Error::Parse(format!("bad row '{line}'")));
            }
            let c0 = fields[0]
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad c0 '{}'", fields[0])))?;
            let cells = fields[2..]
                .iter()
                .map(|f| {
                    if let Some(msg) = f.strip_prefix("ERR:") {
                        Ok(Cell::Failed(msg.to_string()))
                    } else {
                        f.parse::<f64>()
                            .map(Cell::Rate)
                            .map_err(|_| Error::Parse(format!("bad rate '{f}'")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(PowerRow { c0, cells });
        }
        Ok(PowerTable { config, rows })
    }
}

/// Noise covariance `C_ij = rho^|i-j|`; identity at `rho = 0`.
pub fn gen_noise_cov(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Domain(format!("rho = {rho} must lie in [0, 1)")));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| {
        rho.powi((i as i64 - j as i64).unsigned_abs() as i32)
    }))
}

/// Stream roles for the per-replication RNGs.
#[derive(Debug, Clone, Copy)]
pub enum StreamRole {
    Coefficients = 0,
    Regressors = 1,
    Noise = 2,
}

/// Counter-style stream keyed by `(master seed, replication, role)`; no
/// state is shared between replications or roles.
pub fn replication_stream(seed: u64, rep: u64, role: StreamRole) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&rep.to_le_bytes());
    key[16] = role as u8;
    ChaCha8Rng::from_seed(key)
}

fn draw_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, dist: &Normal<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| dist.sample(rng))
}

/// Generate the dataset of one replication: coefficient deviation entries
/// from N(1, 1), regressor entries from N(1, 0.5) (variance 0.5), noise from
/// N_p(0, C), responses `x_i = c0 (B1 - B1*) z_{i,1} + eps_i`. The tested
/// matrix is `B1* = 0`, so `c0 = 0` is an exact null.
pub fn gen_replication(cfg: &SimConfig, c0: f64, rep: u64) -> Result<(Dataset, DMatrix<f64>)> {
    let dims = cfg.dims;
    let coeff_dist = Normal::new(1.0, 1.0).expect("valid");
    let z_dist = Normal::new(1.0, 0.5f64.sqrt()).expect("valid");
    let std_normal = Normal::new(0.0, 1.0).expect("valid");

    let mut rng_b = replication_stream(cfg.seed, rep, StreamRole::Coefficients);
    let deviation = draw_matrix(&mut rng_b, dims.p, dims.q1, &coeff_dist);

    let mut rng_z = replication_stream(cfg.seed, rep, StreamRole::Regressors);
    let z = draw_matrix(&mut rng_z, dims.n, dims.q, &z_dist);

    let mut rng_e = replication_stream(cfg.seed, rep, StreamRole::Noise);
    let u = draw_matrix(&mut rng_e, dims.n, dims.p, &std_normal);
    let cov = gen_noise_cov(dims.p, cfg.rho)?;
    let chol = Cholesky::new(cov).expect("AR covariance is positive definite for rho in [0,1)");
    let noise = u * chol.l().transpose();

    let z1 = z.columns(0, dims.q1).into_owned();
    let x = if c0 == 0.0 {
        noise
    } else {
        z1 * deviation.transpose() * c0 + noise
    };
    let b1_star = DMatrix::zeros(dims.p, dims.q1);
    Ok((Dataset::new(x, z, dims.q1)?, b1_star))
}

/// Run the full study: for each `c0` and each configured test, the fraction
/// of replications rejecting at `alpha`. Deterministic for a fixed seed
/// independent of the worker count; a failing test marks its column instead
/// of aborting the table.
pub fn run_power_study(cfg: &SimConfig) -> Result<PowerTable> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.c0_grid.len());
    if cfg.tests.is_empty() {
        return Ok(PowerTable {
            config: cfg.clone(),
            rows,
        });
    }
    for &c0 in &cfg.c0_grid {
        // Ordered collect keeps the reduction independent of scheduling.
        let outcomes: Vec<Vec<std::result::Result<bool, String>>> = (0..cfg.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let generated = gen_replication(cfg, c0, rep);
                match generated {
                    Ok((data, b1_star)) => {
                        // Trace functionals of the noise covariance are
                        // estimated from the data, as a practitioner would.
                        test_battery(&data, &b1_star, &cfg.tests, SigmaInfo::PlugIn)
                            .into_iter()
                            .map(|(_, r)| match r {
                                Ok(report) => Ok(report.reject_at(cfg.alpha)),
                                Err(e) => Err(e.to_string()),
                            })
                            .collect()
                    }
                    Err(e) => vec![Err(e.to_string()); cfg.tests.len()],
                }
            })
            .collect();
        let cells = (0..cfg.tests.len())
            .map(|col| {
                if let Some(err) = outcomes.iter().find_map(|o| o[col].as_ref().err()) {
                    Cell::Failed(err.clone())
                } else {
                    let hits = outcomes
                        .iter()
                        .filter(|o| matches!(o[col], Ok(true)))
                        .count();
                    Cell::Rate(hits as f64 / cfg.reps as f64)
                }
            })
            .collect();
        rows.push(PowerRow { c0, cells });
    }
    Ok(PowerTable {
        config: cfg.clone(),
        rows,
    })
}

/// Write the c0-vs-rejection series of a table to a plot-ready CSV file.
pub fn emit_figure_data(table: &PowerTable, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(table.to_csv().as_bytes()).map_err(io_err)?;
    Ok(())
}
