//! The test procedures: corrected LRT, classical chi-square LRT, Bartlett-Box
//! correction, the two least-squares statistics and the MANOVA multiple-sample
//! test. Every procedure returns a uniform [`TestReport`].

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linmodel::{
    block_a112, fit_alternative, logdet_spd_or_neg_inf, wilks_lambda, Dataset, DesignDims,
    WilksLambda,
};
use crate::rmt::{corrections, AspectRatios, RmtCorrection};

/// Test families implemented by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestMethod {
    /// Classical LRT, `-n log Lambda` against chi-square(p q1).
    Lrt,
    /// RMT-corrected LRT against the standard normal.
    Clrt,
    /// Bartlett-Box corrected LRT against chi-square(p q1).
    Bbc,
    /// Least-squares statistic `M_{n,1}` (plain coefficient deviation).
    St1,
    /// Least-squares statistic `M_{n,2}` (information-weighted deviation).
    St2,
}

impl TestMethod {
    pub const ALL: [TestMethod; 5] = [
        TestMethod::Lrt,
        TestMethod::Clrt,
        TestMethod::Bbc,
        TestMethod::St1,
        TestMethod::St2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestMethod::Lrt => "LRT",
            TestMethod::Clrt => "CLRT",
            TestMethod::Bbc => "BBC",
            TestMethod::St1 => "ST1",
            TestMethod::St2 => "ST2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LRT" => Ok(TestMethod::Lrt),
            "CLRT" => Ok(TestMethod::Clrt),
            "BBC" => Ok(TestMethod::Bbc),
            "ST1" => Ok(TestMethod::St1),
            "ST2" => Ok(TestMethod::St2),
            other => Err(Error::Parse(format!("unknown test method '{other}'"))),
        }
    }
}

impl std::fmt::Display for TestMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Null reference distribution of a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Reference {
    /// Standard normal, upper-tail rejection.
    StandardNormal,
    /// Chi-square with `df` degrees of freedom, upper-tail rejection.
    ChiSquared { df: u64 },
}

/// Uniform result record for every test family.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub method: &'static str,
    pub statistic: f64,
    pub reference: Reference,
    pub p_value: f64,
    pub dims: DesignDims,
    pub ratios: Option<AspectRatios>,
    pub corrections: Option<RmtCorrection>,
    /// Bartlett-Box scaling factor, when applicable.
    pub bbc_scale: Option<f64>,
}

impl TestReport {
    pub fn reject_at(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn normal_upper_tail(x: f64) -> f64 {
    Normal::standard().sf(x)
}

fn chi_square_upper_tail(x: f64, df: u64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).expect("df >= 1").sf(x)
}

fn normal_report(
    method: TestMethod,
    statistic: f64,
    dims: DesignDims,
    ratios: Option<AspectRatios>,
    corr: Option<RmtCorrection>,
) -> TestReport {
    TestReport {
        method: method.name(),
        statistic,
        reference: Reference::StandardNormal,
        p_value: normal_upper_tail(statistic),
        dims,
        ratios,
        corrections: corr,
        bbc_scale: None,
    }
}

fn clrt_from_wilks(w: &WilksLambda) -> Result<TestReport> {
    let ratios = w.dims.ratios()?;
    let corr = corrections(ratios);
    let stat =
        (-w.log_lambda - w.dims.p as f64 * corr.lsd_moment - corr.mean_m) / corr.var_v.sqrt();
    Ok(normal_report(TestMethod::Clrt, stat, w.dims, Some(ratios), Some(corr)))
}

fn lrt_from_wilks(w: &WilksLambda) -> TestReport {
    let stat = -(w.dims.n as f64) * w.log_lambda;
    let df = (w.dims.p * w.dims.q1) as u64;
    TestReport {
        method: TestMethod::Lrt.name(),
        statistic: stat,
        reference: Reference::ChiSquared { df },
        p_value: chi_square_upper_tail(stat, df),
        dims: w.dims,
        ratios: None,
        corrections: None,
        bbc_scale: None,
    }
}

/// Bartlett-Box scaling `k = n - q - (p - q1 + 1)/2`.
pub fn bbc_scale(dims: DesignDims) -> f64 {
    dims.n2() as f64 - 0.5 * (dims.p as f64 - dims.q1 as f64 + 1.0)
}

fn bbc_from_wilks(w: &WilksLambda) -> TestReport {
    let k = bbc_scale(w.dims);
    let stat = -k * w.log_lambda;
    let df = (w.dims.p * w.dims.q1) as u64;
    TestReport {
        method: TestMethod::Bbc.name(),
        statistic: stat,
        reference: Reference::ChiSquared { df },
        p_value: chi_square_upper_tail(stat, df),
        dims: w.dims,
        ratios: None,
        corrections: None,
        bbc_scale: Some(k),
    }
}

/// RMT-corrected likelihood ratio test (upper-tail normal).
pub fn clrt(data: &Dataset, b1_star: &DMatrix<f64>) -> Result<TestReport> {
    // Check the ratio domain before doing any linear algebra.
    data.dims().ratios()?;
    let w = wilks_lambda(data, b1_star)?;
    clrt_from_wilks(&w)
}

/// Classical LRT: `-n log Lambda` against chi-square(p q1).
pub fn classical_lrt(data: &Dataset, b1_star: &DMatrix<f64>) -> Result<TestReport> {
    let w = wilks_lambda(data, b1_star)?;
    Ok(lrt_from_wilks(&w))
}

/// Bartlett-Box corrected LRT: `-k log Lambda` against chi-square(p q1).
pub fn bbc(data: &Dataset, b1_star: &DMatrix<f64>) -> Result<TestReport> {
    let w = wilks_lambda(data, b1_star)?;
    Ok(bbc_from_wilks(&w))
}

/// Which of the two least-squares statistics to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StKind {
    /// `M_{n,1} = tr(D D')`.
    One,
    /// `M_{n,2} = tr(D A_{11:2} D')`.
    Two,
}

impl StKind {
    fn index(&self) -> u8 {
        match self {
            StKind::One => 1,
            StKind::Two => 2,
        }
    }
}

/// Source of the covariance moments `tr Sigma` and `tr Sigma^2` used to
/// center and scale the least-squares statistics.
#[derive(Debug, Clone, Copy)]
pub enum SigmaInfo<'a> {
    /// The true noise covariance is known (simulation setting).
    Known(&'a DMatrix<f64>),
    /// Estimate both moments from the residual covariance.
    PlugIn,
}

/// Decomposition of a least-squares statistic into its value, null mean and
/// null variance, plus the kurtosis and design terms entering the variance.
#[derive(Debug, Clone, Copy)]
pub struct StParts {
    pub m: f64,
    pub em: f64,
    pub sigma2: f64,
    pub beta_x: f64,
    pub beta_z: f64,
    pub k: u8,
}

fn sigma_moments(data: &Dataset, sigma: SigmaInfo<'_>) -> Result<(f64, f64)> {
    match sigma {
        SigmaInfo::Known(s) => {
            let tr = s.trace();
            let tr2 = s.component_mul(&s.transpose()).sum();
            Ok((tr, tr2))
        }
        SigmaInfo::PlugIn => {
            let dims = data.dims();
            let fit = fit_alternative(data)?;
            let n2 = dims.n2() as f64;
            // Unbiased covariance S = n/(n-q) * Sigma_hat.
            let s = &fit.sigma_hat * (dims.n as f64 / n2);
            let tr_s = s.trace();
            let tr_s2 = s.component_mul(&s.transpose()).sum();
            let tr_sigma = tr_s;
            let tr_sigma2 =
                (tr_s2 - tr_s * tr_s / n2) * n2 * n2 / ((n2 - 1.0) * (n2 + 2.0));
            if !(tr_sigma2 > 0.0) {
                return Err(Error::Estimation(format!(
                    "plug-in tr(Sigma^2) estimate is non-positive ({tr_sigma2:.3e})"
                )));
            }
            Ok((tr_sigma, tr_sigma2))
        }
    }
}

/// Whitened design rows `w_i = z_{i,1} - A_12 A_22^{-1} z_{i,2}`, one per row.
fn residual_design(data: &Dataset) -> Result<DMatrix<f64>> {
    let dims = data.dims();
    let z1 = data.z1();
    if dims.q2() == 0 {
        return Ok(z1);
    }
    let z2 = data.z2();
    let a22 = z2.transpose() * &z2;
    let a21 = z2.transpose() * &z1;
    let chol = Cholesky::new(a22)
        .ok_or_else(|| Error::NotPositiveDefinite("A_22 block of Z'Z".into()))?;
    Ok(&z1 - &z2 * chol.solve(&a21))
}

/// Symmetric inverse square root via eigendecomposition.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite(
            "matrix has non-positive eigenvalues".into(),
        ));
    }
    let d = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| 1.0 / l.sqrt()),
    );
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}

/// Definitional design vectors `Z_i^{(k)} = A_{11:2}^{-(3-k)/2} w_i`, one per
/// row. Slower than the internal route used by [`st_statistic`]; intended for
/// verification.
pub fn st_design_vectors(data: &Dataset, k: StKind) -> Result<DMatrix<f64>> {
    let w = residual_design(data)?;
    let a112 = block_a112(data.z(), data.dims().q1)?;
    match k {
        StKind::One => {
            let chol = Cholesky::new(a112)
                .ok_or_else(|| Error::NotPositiveDefinite("A_{11:2}".into()))?;
            // rows w_i -> A^{-1} w_i, i.e. W A^{-1} row-wise (A symmetric).
            Ok(chol.solve(&w.transpose()).transpose())
        }
        StKind::Two => Ok(&w * sym_inv_sqrt(&a112)?),
    }
}

/// Value, null mean and null variance of the chosen least-squares statistic.
pub fn st_statistic(
    data: &Dataset,
    b1_star: &DMatrix<f64>,
    k: StKind,
    sigma: SigmaInfo<'_>,
) -> Result<StParts> {
    let dims = data.dims();
    let fit = fit_alternative(data)?;
    let d = fit.b_hat.columns(0, dims.q1).into_owned() - b1_star;
    let a112 = block_a112(data.z(), dims.q1)?;
    let (tr_sigma, tr_sigma2) = sigma_moments(data, sigma)?;
    let w = residual_design(data)?;
    let chol = Cholesky::new(a112.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("A_{11:2}".into()))?;
    let a112_inv = chol.inverse();
    // v_i = A_{11:2}^{-1} w_i, row-wise.
    let v = &w * &a112_inv;

    // Gaussian noise: the excess-kurtosis term vanishes identically, but the
    // design constants beta_z are still reported.
    let beta_x = 0.0;
    let (m, em, base_var, beta_z) = match k {
        StKind::One => {
            let m = d.iter().map(|x| x * x).sum::<f64>();
            let em = tr_sigma * a112_inv.trace();
            let tr_inv2 = a112_inv.component_mul(&a112_inv.transpose()).sum();
            let beta_z = v
                .row_iter()
                .map(|r| {
                    let s: f64 = r.iter().map(|x| x * x).sum();
                    s * s
                })
                .sum::<f64>();
            (m, em, 2.0 * tr_sigma2 * tr_inv2, beta_z)
        }
        StKind::Two => {
            let m = (&d * &a112 * d.transpose()).trace();
            let em = dims.q1 as f64 * tr_sigma;
            let beta_z = w
                .row_iter()
                .zip(v.row_iter())
                .map(|(wi, vi)| {
                    let s: f64 = wi.iter().zip(vi.iter()).map(|(a, b)| a * b).sum();
                    s * s
                })
                .sum::<f64>();
            (m, em, 2.0 * dims.q1 as f64 * tr_sigma2, beta_z)
        }
    };
    let sigma2 = base_var + beta_x * beta_z;
    if !(sigma2 > 0.0) {
        return Err(Error::Estimation(format!(
            "null variance of M_{{n,{}}} is non-positive ({sigma2:.3e})",
            k.index()
        )));
    }
    Ok(StParts {
        m,
        em,
        sigma2,
        beta_x,
        beta_z,
        k: k.index(),
    })
}

/// Standardized least-squares test `(M - EM)/sigma` against the standard
/// normal, upper tail.
pub fn st_test(
    data: &Dataset,
    b1_star: &DMatrix<f64>,
    k: StKind,
    sigma: SigmaInfo<'_>,
) -> Result<TestReport> {
    let parts = st_statistic(data, b1_star, k, sigma)?;
    let stat = (parts.m - parts.em) / parts.sigma2.sqrt();
    let method = match k {
        StKind::One => TestMethod::St1,
        StKind::Two => TestMethod::St2,
    };
    Ok(normal_report(method, stat, data.dims(), None, None))
}

/// Run several test families on the same dataset, sharing the Wilks
/// computation, with per-method error isolation.
pub fn test_battery(
    data: &Dataset,
    b1_star: &DMatrix<f64>,
    methods: &[TestMethod],
    sigma: SigmaInfo<'_>,
) -> Vec<(TestMethod, Result<TestReport>)> {
    let needs_wilks = methods
        .iter()
        .any(|m| matches!(m, TestMethod::Lrt | TestMethod::Clrt | TestMethod::Bbc));
    let wilks = if needs_wilks {
        Some(wilks_lambda(data, b1_star))
    } else {
        None
    };
    methods
        .iter()
        .map(|&m| {
            let report = match m {
                TestMethod::Lrt => match wilks.as_ref().unwrap() {
                    Ok(w) => Ok(lrt_from_wilks(w)),
                    Err(e) => Err(clone_err(e)),
                },
                TestMethod::Bbc => match wilks.as_ref().unwrap() {
                    Ok(w) => Ok(bbc_from_wilks(w)),
                    Err(e) => Err(clone_err(e)),
                },
                TestMethod::Clrt => match wilks.as_ref().unwrap() {
                    Ok(w) => clrt_from_wilks(w),
                    Err(e) => Err(clone_err(e)),
                },
                TestMethod::St1 => st_test(data, b1_star, StKind::One, sigma),
                TestMethod::St2 => st_test(data, b1_star, StKind::Two, sigma),
            };
            (m, report)
        })
        .collect()
}

fn clone_err(e: &Error) -> Error {
    // Error carries io::Error and cannot derive Clone; message-level copy is
    // enough for per-column isolation.
    match e {
        Error::Domain(s) => Error::Domain(s.clone()),
        Error::SingularDesign(s) => Error::SingularDesign(s.clone()),
        Error::NotPositiveDefinite(s) => Error::NotPositiveDefinite(s.clone()),
        Error::RatioDomain(s) => Error::RatioDomain(s.clone()),
        Error::Estimation(s) => Error::Estimation(s.clone()),
        Error::Convergence(s) => Error::Convergence(s.clone()),
        Error::Parse(s) => Error::Parse(s.clone()),
        Error::Io { path, source } => Error::Io {
            path: path.clone(),
            source: std::io::Error::new(source.kind(), source.to_string()),
        },
    }
}

// ---------------------------------------------------------------------------
// MANOVA multiple-sample test
// ---------------------------------------------------------------------------

fn manova_dims(samples: &[DMatrix<f64>]) -> Result<DesignDims> {
    let q = samples.len();
    if q < 2 {
        return Err(Error::Domain("MANOVA needs at least two groups".into()));
    }
    let p = samples[0].ncols();
    for (i, s) in samples.iter().enumerate() {
        if s.ncols() != p {
            return Err(Error::Domain(format!(
                "group {i} has {} columns, expected {p}",
                s.ncols()
            )));
        }
        if s.nrows() == 0 {
            return Err(Error::Domain(format!("group {i} is empty")));
        }
    }
    let n: usize = samples.iter().map(|s| s.nrows()).sum();
    DesignDims::new(p, n, q, q - 1)
}

/// Wilks `log Lambda` for the equality-of-means hypothesis, from group-mean
/// and grand-mean centered scatter matrices.
pub fn manova_log_lambda(samples: &[DMatrix<f64>]) -> Result<(f64, DesignDims)> {
    let dims = manova_dims(samples)?;
    let (p, n) = (dims.p, dims.n);
    let mut grand = DVector::zeros(p);
    for s in samples {
        for row in s.row_iter() {
            grand += row.transpose();
        }
    }
    grand /= n as f64;
    let mut within = DMatrix::zeros(p, p);
    let mut total = DMatrix::zeros(p, p);
    for s in samples {
        let ni = s.nrows();
        let mut mean = DVector::zeros(p);
        for row in s.row_iter() {
            mean += row.transpose();
        }
        mean /= ni as f64;
        for row in s.row_iter() {
            let rw = row.transpose() - &mean;
            within += &rw * rw.transpose();
            let rt = row.transpose() - &grand;
            total += &rt * rt.transpose();
        }
    }
    within /= n as f64;
    total /= n as f64;
    let ld_within = logdet_spd_or_neg_inf(&within);
    let ld_total = logdet_spd_or_neg_inf(&total);
    if !ld_within.is_finite() || !ld_total.is_finite() {
        return Err(Error::NotPositiveDefinite(
            "a MANOVA scatter matrix is numerically singular".into(),
        ));
    }
    Ok((ld_within - ld_total, dims))
}

/// Corrected MANOVA test with ratios `y1 = p/(q-1)`, `y2 = p/(n-q)`.
pub fn manova_clrt(samples: &[DMatrix<f64>]) -> Result<TestReport> {
    let dims = manova_dims(samples)?;
    dims.ratios()?;
    let (log_lambda, dims) = manova_log_lambda(samples)?;
    let w = WilksLambda { log_lambda, dims };
    clrt_from_wilks(&w)
}

/// Classical MANOVA LRT: `-n log Lambda` against chi-square(p (q-1)).
pub fn classical_manova_lrt(samples: &[DMatrix<f64>]) -> Result<TestReport> {
    let (log_lambda, dims) = manova_log_lambda(samples)?;
    let stat = -(dims.n as f64) * log_lambda;
    let df = (dims.p * dims.q1) as u64;
    Ok(TestReport {
        method: "LRT",
        statistic: stat,
        reference: Reference::ChiSquared { df },
        p_value: chi_square_upper_tail(stat, df),
        dims,
        ratios: None,
        corrections: None,
        bbc_scale: None,
    })
}

/// Embed the multiple-sample problem as a regression dataset: the `q`-vector
/// of regressors for an observation of group `i` is `e_i + e_q` for `i < q`
/// and `e_q` for the last group, and the tested block is the first `q - 1`
/// coordinates with `B_1* = 0`.
pub fn manova_embed(samples: &[DMatrix<f64>]) -> Result<(Dataset, DMatrix<f64>)> {
    let dims = manova_dims(samples)?;
    let (p, n, q) = (dims.p, dims.n, dims.q);
    let mut x = DMatrix::zeros(n, p);
    let mut z = DMatrix::zeros(n, q);
    let mut row = 0;
    for (i, s) in samples.iter().enumerate() {
        for r in s.row_iter() {
            x.row_mut(row).copy_from(&r);
            if i < q - 1 {
                z[(row, i)] = 1.0;
            }
            z[(row, q - 1)] = 1.0;
            row += 1;
        }
    }
    let b1_star = DMatrix::zeros(p, q - 1);
    Ok((Dataset::new(x, z, q - 1)?, b1_star))
}
