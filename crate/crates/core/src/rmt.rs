//! Closed-form random-matrix-theory quantities for the limiting spectral
//! distribution (LSD) of a Fisher matrix and for the Gaussian corrections
//! applied to the log-Wilks statistic.
//!
//! All functions here are pure and cheap; the heavy numerical cross-checks
//! live in [`crate::oracle`].

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper admissible value for `y2`. The LSD density carries a `(1-y2)^2`
/// factor in its support edges, so the formulas degenerate as `y2 -> 1`.
pub const Y2_MAX: f64 = 0.95;

/// The pair of dimension ratios `(y1, y2)` driving every asymptotic quantity:
/// `y1 = p/q1` (dimension over tested-block width) and `y2 = p/(n-q)`
/// (dimension over residual degrees of freedom).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AspectRatios {
    y1: f64,
    y2: f64,
}

impl AspectRatios {
    pub fn new(y1: f64, y2: f64) -> Result<Self> {
        if !y1.is_finite() || y1 <= 0.0 || y1 >= 1.0 {
            return Err(Error::Domain(format!("y1 = {y1} must lie strictly in (0, 1)")));
        }
        if !y2.is_finite() || y2 <= 0.0 || y2 >= 1.0 {
            return Err(Error::Domain(format!("y2 = {y2} must lie strictly in (0, 1)")));
        }
        if y2 > Y2_MAX {
            return Err(Error::Domain(format!(
                "y2 = {y2} exceeds the supported maximum {Y2_MAX}; the LSD support \
                 edges degenerate as y2 approaches 1"
            )));
        }
        Ok(Self { y1, y2 })
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    /// `h = sqrt(y1 + y2 - y1*y2)`, always in (0, 1) for valid ratios.
    pub fn h(&self) -> f64 {
        (self.y1 + self.y2 - self.y1 * self.y2).sqrt()
    }
}

/// Support `[a, b]` of the Fisher-matrix LSD together with its edge parameter.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LsdSupport {
    pub h: f64,
    pub a: f64,
    pub b: f64,
}

/// Solution `(c, d)` with `c > d > 0` of the pair of equations
/// `c^2 + d^2 = alpha + beta (1+h^2)/(1-y2)^2`, `c d = beta h/(1-y2)^2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CdPair {
    pub c: f64,
    pub d: f64,
}

/// The three scalars entering the corrected LRT statistic: the centering
/// moment `F_{y1,y2}(f)`, the mean shift `m(f)` and the variance `v(f)`,
/// all for `f(x) = log(1 + (y2/y1) x)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RmtCorrection {
    pub mean_m: f64,
    pub var_v: f64,
    pub lsd_moment: f64,
}

/// Support edges of the Fisher LSD: `a = ((1-h)/(1-y2))^2`, `b = ((1+h)/(1-y2))^2`.
pub fn lsd_support(y: AspectRatios) -> LsdSupport {
    let h = y.h();
    let s = 1.0 - y.y2();
    LsdSupport {
        h,
        a: ((1.0 - h) / s).powi(2),
        b: ((1.0 + h) / s).powi(2),
    }
}

/// Density of the Fisher-matrix LSD at `x`:
/// `(1-y2) sqrt((b-x)(x-a)) / (2 pi x (y1 + y2 x))` on `[a, b]`, zero outside.
pub fn fisher_lsd_density(x: f64, y: AspectRatios) -> f64 {
    let sup = lsd_support(y);
    if x <= sup.a || x >= sup.b {
        return 0.0;
    }
    let num = (1.0 - y.y2()) * ((sup.b - x) * (x - sup.a)).sqrt();
    num / (2.0 * std::f64::consts::PI * x * (y.y1() + y.y2() * x))
}

/// Solve for the `(c, d)` pair of `f(x) = log(alpha + beta x)` in closed form:
/// `c, d = [sqrt(alpha + beta b) +- sqrt(alpha + beta a)] / 2`.
pub fn solve_cd(alpha: f64, beta: f64, y: AspectRatios) -> Result<CdPair> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta = {beta} must be positive")));
    }
    let sup = lsd_support(y);
    let hi = (alpha + beta * sup.b).sqrt();
    let lo = (alpha + beta * sup.a).sqrt();
    Ok(CdPair {
        c: 0.5 * (hi + lo),
        d: 0.5 * (hi - lo),
    })
}

fn cd_for(y: AspectRatios) -> CdPair {
    // alpha = 1, beta = y2/y1 matches f(x) = log(1 + (y2/y1) x); both are
    // positive for valid ratios so the unwrap cannot fire.
    solve_cd(1.0, y.y2() / y.y1(), y).expect("valid ratios give positive (alpha, beta)")
}

/// Mean correction `m(f) = log((c^2-d^2) h^2 / (c h - y2 d)^2) / 2`.
pub fn mean_correction(y: AspectRatios) -> f64 {
    let CdPair { c, d } = cd_for(y);
    let h = y.h();
    let denom = c * h - y.y2() * d;
    assert!(denom > 0.0, "c*h - y2*d must be positive for valid ratios");
    0.5 * (((c - d) * (c + d) * h * h) / (denom * denom)).ln()
}

/// Variance correction `v(f) = 2 log(c^2 / (c^2 - d^2))`, strictly positive.
pub fn variance_correction(y: AspectRatios) -> f64 {
    let CdPair { c, d } = cd_for(y);
    2.0 * ((c * c) / ((c - d) * (c + d))).ln()
}

/// Closed form of the LSD moment `F_{y1,y2}(f) = \int log(1 + (y2/y1) x) dF(x)`.
pub fn lsd_log_moment(y: AspectRatios) -> f64 {
    let CdPair { c, d } = cd_for(y);
    let (y1, y2) = (y.y1(), y.y2());
    let h = y.h();
    (y2 - 1.0) / y2 * c.ln()
        + (y1 - 1.0) / y1 * (c - d * h).ln()
        + (y1 + y2) / (y1 * y2) * ((c * h - d * y2) / h).ln()
}

/// All three correction terms for a given ratio pair.
pub fn corrections(y: AspectRatios) -> RmtCorrection {
    RmtCorrection {
        mean_m: mean_correction(y),
        var_v: variance_correction(y),
        lsd_moment: lsd_log_moment(y),
    }
}
