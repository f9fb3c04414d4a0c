//! Independent brute-force verifiers for the closed forms in [`crate::rmt`]:
//! adaptive quadrature of the LSD density, contour-integral evaluation of the
//! mean and variance functionals, and a Monte Carlo check of the corrected
//! statistic's central limit behavior.
//!
//! None of the routines here call the closed form they are meant to validate.

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rmt::{corrections, lsd_support, AspectRatios};
use crate::simulate::{replication_stream, StreamRole};

// ---------------------------------------------------------------------------
// Adaptive quadrature
// ---------------------------------------------------------------------------

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err_acc: &mut f64,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        *err_acc += delta.abs() / 15.0;
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Convergence(format!(
            "adaptive quadrature did not converge; local error estimate {:.3e}",
            delta.abs() / 15.0
        )));
    }
    let l = adaptive_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, err_acc)?;
    let r = adaptive_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, err_acc)?;
    Ok(l + r)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` with absolute tolerance
/// `tol`. Returns the value and an accumulated error estimate.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(a, b, fa, fm, fb);
    let mut err = 0.0;
    let v = adaptive_step(&f, a, b, fa, fm, fb, whole, tol, 48, &mut err)?;
    Ok((v, err))
}

/// Integrands supported against the Fisher LSD density.
#[derive(Debug, Clone, Copy)]
pub enum LsdIntegrand {
    /// Constant 1: total mass, exactly 1 for a correct density.
    One,
    /// `log(1 + (y2/y1) x)`, the function entering the corrected LRT.
    LogMoment,
}

/// `\int g(x) l(x) dx` over the LSD support via the substitution
/// `x = a + (b-a) sin^2(theta)`, which removes both square-root endpoint
/// singularities; the transformed integrand is smooth on `[0, pi/2]`.
pub fn quad_lsd_integral(g: LsdIntegrand, y: AspectRatios) -> Result<f64> {
    let sup = lsd_support(y);
    let (a, b) = (sup.a, sup.b);
    let (y1, y2) = (y.y1(), y.y2());
    let width = b - a;
    let scale = (1.0 - y2) * width * width / (4.0 * std::f64::consts::PI);
    let integrand = move |theta: f64| {
        let s2 = (2.0 * theta).sin().powi(2);
        let x = a + width * theta.sin().powi(2);
        let f = match g {
            LsdIntegrand::One => 1.0,
            LsdIntegrand::LogMoment => (1.0 + y2 / y1 * x).ln(),
        };
        f * scale * s2 / (x * (y1 + y2 * x))
    };
    let (value, err) = adaptive_simpson(integrand, 0.0, std::f64::consts::FRAC_PI_2, 1e-10)?;
    if err > 1e-8 {
        return Err(Error::Convergence(format!(
            "LSD quadrature error estimate {err:.3e} exceeds 1e-8"
        )));
    }
    Ok(value)
}

// ---------------------------------------------------------------------------
// Contour integrals
// ---------------------------------------------------------------------------

/// Radius schedule and resolution for the contour quadratures. The limit as
/// the radius approaches 1 from above is reached by Richardson extrapolation
/// over `richardson_levels` radii `1 + (r0 - 1)/shrink^k`.
#[derive(Debug, Clone)]
pub struct ContourSpec {
    /// Largest (outermost) radius, > 1.
    pub r: f64,
    /// Minimum number of trapezoidal nodes on the unit circle.
    pub n_nodes: usize,
    pub richardson_levels: usize,
    /// Per-level divisor applied to `r - 1`.
    pub shrink: f64,
}

impl ContourSpec {
    /// Schedule for the single contour of the mean functional:
    /// radii 1+1e-2 down to 1+1e-5.
    pub fn mean_default() -> Self {
        Self {
            r: 1.01,
            n_nodes: 4096,
            richardson_levels: 4,
            shrink: 10.0,
        }
    }

    /// Schedule for the double contour of the variance functional. The
    /// quadratic node cost rules out radii as small as the mean schedule's,
    /// so more levels with a gentler shrink are used instead.
    pub fn variance_default() -> Self {
        Self {
            r: 1.04,
            n_nodes: 1024,
            richardson_levels: 5,
            shrink: 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r > 1.0) {
            return Err(Error::Domain(format!("contour radius r = {} must exceed 1", self.r)));
        }
        if self.n_nodes < 256 {
            return Err(Error::Domain("n_nodes must be at least 256".into()));
        }
        if self.richardson_levels < 2 {
            return Err(Error::Domain("need at least 2 Richardson levels".into()));
        }
        if !(self.shrink > 1.0) {
            return Err(Error::Domain("shrink must exceed 1".into()));
        }
        Ok(())
    }

    fn radii(&self) -> Vec<f64> {
        (0..self.richardson_levels)
            .map(|k| 1.0 + (self.r - 1.0) / self.shrink.powi(k as i32))
            .collect()
    }
}

/// Polynomial (Neville) extrapolation of `(h_i, v_i)` samples to `h = 0`,
/// returning the value and the magnitude of the last correction.
fn neville_to_zero(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len();
    let mut tab: Vec<f64> = points.iter().map(|&(_, v)| v).collect();
    let h: Vec<f64> = points.iter().map(|&(x, _)| x).collect();
    let mut prev = tab[n - 1];
    for level in 1..n {
        for i in 0..n - level {
            tab[i] = (h[i + level] * tab[i] - h[i] * tab[i + 1]) / (h[i + level] - h[i]);
        }
        prev = tab[0];
    }
    let correction = (tab[0] - prev).abs();
    (tab[0], correction)
}

/// `z(theta) = (1 + h^2 + 2 h cos(theta)) / (1 - y2)^2`, the image of the
/// unit circle under the spectral change of variable; real on the contour.
fn z_of_theta(theta: f64, y: AspectRatios) -> f64 {
    let h = y.h();
    (1.0 + h * h + 2.0 * h * theta.cos()) / (1.0 - y.y2()).powi(2)
}

fn f_log(x: f64, y: AspectRatios) -> f64 {
    (1.0 + y.y2() / y.y1() * x).ln()
}

fn mean_nodes_for(r: f64, min_nodes: usize) -> usize {
    // Trapezoid error decays like exp(-n log r); the nearest pole sits at
    // radius 1/r inside the contour.
    ((35.0 / (r - 1.0)).ceil() as usize).max(min_nodes)
}

fn variance_nodes_for(r: f64, min_nodes: usize) -> usize {
    // The kernel's Fourier coefficients grow linearly before the r^{-k}
    // decay kicks in, so aliasing needs n r^{-n} small, not just r^{-n}.
    ((30.0 / (r - 1.0)).ceil() as usize).max(min_nodes).min(60_000)
}

fn contour_mean_at_radius(y: AspectRatios, r: f64, n: usize) -> Result<f64> {
    let h = y.h();
    let y2 = y.y2();
    let dtheta = 2.0 * std::f64::consts::PI / n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let theta = dtheta * j as f64;
        let zeta = Complex64::from_polar(1.0, theta);
        let kernel = (zeta - 1.0 / r).inv() + (zeta + 1.0 / r).inv()
            - Complex64::new(2.0, 0.0) / (zeta + y2 / h);
        sum += f_log(z_of_theta(theta, y), y) * kernel * zeta;
    }
    // (1/4 pi i) * sum * i * dtheta = sum * dtheta / (4 pi).
    let value = sum * dtheta / (4.0 * std::f64::consts::PI);
    if value.im.abs() > 1e-9 {
        return Err(Error::Convergence(format!(
            "contour mean has spurious imaginary part {:.3e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Numerical evaluation of the mean functional as a single contour integral
/// over the unit circle, extrapolated in the radius. Independent of the
/// closed-form route in [`crate::rmt::mean_correction`].
pub fn contour_mean(y: AspectRatios, spec: &ContourSpec) -> Result<f64> {
    spec.validate()?;
    let mut points = Vec::new();
    for r in spec.radii() {
        let n = mean_nodes_for(r, spec.n_nodes);
        points.push((r - 1.0, contour_mean_at_radius(y, r, n)?));
    }
    let (value, correction) = neville_to_zero(&points);
    if correction > 1e-5 {
        return Err(Error::Convergence(format!(
            "radius extrapolation unstable: last correction {correction:.3e}"
        )));
    }
    Ok(value)
}

fn contour_variance_at_radius(y: AspectRatios, r: f64, n: usize) -> f64 {
    let dtheta = 2.0 * std::f64::consts::PI / n as f64;
    let f: Vec<f64> = (0..n)
        .map(|j| f_log(z_of_theta(dtheta * j as f64, y), y))
        .collect();
    // The double-contour kernel depends only on the angle difference:
    // with zeta_k = exp(i theta_k) the integrand reduces to
    // f(theta_1) f(theta_2) g(theta_1 - theta_2), g(d) = e^{id}/(e^{id}-r)^2,
    // so the double trapezoid sum is a circular autocorrelation of f.
    let g_re: Vec<f64> = (0..n)
        .map(|d| {
            let w = Complex64::from_polar(1.0, dtheta * d as f64);
            let den = w - r;
            (w / (den * den)).re
        })
        .collect();
    let mut total = 0.0;
    for d in 0..n {
        let mut c = 0.0;
        // autocorrelation sum_j f[j] f[(j+d) mod n] over two contiguous runs
        let split = n - d;
        for j in 0..split {
            c += f[j] * f[j + d];
        }
        for j in split..n {
            c += f[j] * f[j + d - n];
        }
        total += c * g_re[d];
    }
    total * dtheta * dtheta / (2.0 * std::f64::consts::PI * std::f64::consts::PI)
}

/// Numerical evaluation of the variance functional as a double contour
/// integral, extrapolated in the radius. Independent of
/// [`crate::rmt::variance_correction`].
pub fn contour_variance(y: AspectRatios, spec: &ContourSpec) -> Result<f64> {
    spec.validate()?;
    let mut points = Vec::new();
    for r in spec.radii() {
        let n = variance_nodes_for(r, spec.n_nodes);
        points.push((r - 1.0, contour_variance_at_radius(y, r, n)));
    }
    let (value, correction) = neville_to_zero(&points);
    if correction > 1e-5 {
        return Err(Error::Convergence(format!(
            "radius extrapolation unstable: last correction {correction:.3e}"
        )));
    }
    Ok(value)
}

// ---------------------------------------------------------------------------
// Monte Carlo CLT check
// ---------------------------------------------------------------------------

/// Agreement measures of the sampled centered statistic with its predicted
/// Gaussian limit.
#[derive(Debug, Clone, Copy)]
pub struct McCltSummary {
    /// `|empirical mean - m(f)|` in units of the standard error of the mean.
    pub mean_err_in_se: f64,
    /// Empirical variance over the predicted variance.
    pub var_ratio: f64,
    /// Kolmogorov-Smirnov distance of the standardized sample to N(0, 1).
    pub ks_distance: f64,
    pub reps: usize,
}

/// Outcome of [`mc_clt_check`]; a single replication cannot estimate a
/// variance, so it gets an explicit marker instead of a degenerate summary.
#[derive(Debug, Clone, Copy)]
pub enum McCltOutcome {
    Summary(McCltSummary),
    InsufficientReps,
}

/// Sample centered log-Wilks statistics from Gaussian Wishart pairs and
/// compare their distribution with the predicted Gaussian limit.
///
/// Each replication draws two independent Gaussian data matrices, forms the
/// two sample covariance matrices and the eigenvalues of their quotient, and
/// evaluates `G = sum log(1 + (q1/n2) lambda_i) - p F_{y1,y2}(f)`.
pub fn mc_clt_check(
    p: usize,
    q1: usize,
    n2: usize,
    reps: usize,
    seed: u64,
) -> Result<McCltOutcome> {
    if p >= q1 || p >= n2 {
        return Err(Error::RatioDomain(format!(
            "need p < q1 and p < n2, got p = {p}, q1 = {q1}, n2 = {n2}"
        )));
    }
    if reps < 2 {
        return Ok(McCltOutcome::InsufficientReps);
    }
    let y = AspectRatios::new(p as f64 / q1 as f64, p as f64 / n2 as f64)?;
    let corr = corrections(y);
    let ratio = q1 as f64 / n2 as f64;
    let center = p as f64 * corr.lsd_moment;

    let samples: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let g = sample_centered_statistic(p, q1, n2, ratio, center, seed, rep);
            g.expect("Gaussian Wishart pair is almost surely nonsingular")
        })
        .collect();

    let mean = samples.iter().sum::<f64>() / reps as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let se = (corr.var_v / reps as f64).sqrt();
    let sd = corr.var_v.sqrt();

    let mut standardized: Vec<f64> = samples.iter().map(|s| (s - corr.mean_m) / sd).collect();
    standardized.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let normal = Normal::standard();
    let n = standardized.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, x) in standardized.iter().enumerate() {
        let cdf = normal.cdf(*x);
        ks = ks
            .max((cdf - i as f64 / n).abs())
            .max((cdf - (i as f64 + 1.0) / n).abs());
    }

    Ok(McCltOutcome::Summary(McCltSummary {
        mean_err_in_se: (mean - corr.mean_m).abs() / se,
        var_ratio: var / corr.var_v,
        ks_distance: ks,
        reps,
    }))
}

fn sample_centered_statistic(
    p: usize,
    q1: usize,
    n2: usize,
    ratio: f64,
    center: f64,
    seed: u64,
    rep: u64,
) -> Option<f64> {
    use nalgebra::{Cholesky, DMatrix};
    use rand_distr::{Distribution, StandardNormal};

    let mut rng1 = replication_stream(seed, rep, StreamRole::Coefficients);
    let g1 = DMatrix::from_fn(p, q1, |_, _| -> f64 { StandardNormal.sample(&mut rng1) });
    let s1 = &g1 * g1.transpose() / q1 as f64;

    let mut rng2 = replication_stream(seed, rep, StreamRole::Noise);
    let g2 = DMatrix::from_fn(p, n2, |_, _| -> f64 { StandardNormal.sample(&mut rng2) });
    let s2 = &g2 * g2.transpose() / n2 as f64;

    let chol = Cholesky::new(s2)?;
    let l: DMatrix<f64> = chol.l();
    let tmp: DMatrix<f64> = l.solve_lower_triangular(&s1)?;
    let mut sym: DMatrix<f64> = l.solve_lower_triangular(&tmp.transpose())?;
    let symt = sym.transpose();
    sym += symt;
    sym *= 0.5;
    let eigs = sym.symmetric_eigenvalues();
    let log_sum: f64 = eigs.iter().map(|&l| (1.0 + ratio * l).ln()).sum();
    Some(log_sum - center)
}
