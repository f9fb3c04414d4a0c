//! Multivariate-regression estimation and the Wilks determinant ratio.
//!
//! The model is `x_i = B z_i + e_i` with `p`-dimensional responses, `q`
//! regressors and Gaussian noise. The tested hypothesis fixes the first
//! `q1` coefficient columns: `H0: B_1 = B_1*`.

use nalgebra::{Cholesky, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rmt::AspectRatios;

/// Relative singular-value threshold below which a design is declared singular.
pub const RANK_TOL: f64 = 1e-10;

/// Problem dimensions `(p, n, q, q1)` and the ratios derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DesignDims {
    pub p: usize,
    pub n: usize,
    pub q: usize,
    pub q1: usize,
}

impl DesignDims {
    pub fn new(p: usize, n: usize, q: usize, q1: usize) -> Result<Self> {
        if p < 1 {
            return Err(Error::Domain("p must be at least 1".into()));
        }
        if q1 < 1 || q1 > q {
            return Err(Error::Domain(format!("q1 = {q1} must satisfy 1 <= q1 <= q = {q}")));
        }
        if n < p + q {
            return Err(Error::Domain(format!("n = {n} must be at least p + q = {}", p + q)));
        }
        Ok(Self { p, n, q, q1 })
    }

    pub fn q2(&self) -> usize {
        self.q - self.q1
    }

    /// Residual degrees of freedom `n - q`.
    pub fn n2(&self) -> usize {
        self.n - self.q
    }

    /// Finite-sample ratios `(p/q1, p/(n-q))` with the asymptotic-regime
    /// preconditions checked; errors name the violated constraint.
    pub fn ratios(&self) -> Result<AspectRatios> {
        let y1 = self.p as f64 / self.q1 as f64;
        let y2 = self.p as f64 / self.n2() as f64;
        if y1 >= 1.0 {
            return Err(Error::RatioDomain(format!(
                "y1 = p/q1 = {}/{} = {y1:.4} must be strictly below 1",
                self.p, self.q1
            )));
        }
        if y2 >= 1.0 {
            return Err(Error::RatioDomain(format!(
                "y2 = p/(n-q) = {}/{} = {y2:.4} must be strictly below 1",
                self.p,
                self.n2()
            )));
        }
        AspectRatios::new(y1, y2)
    }
}

/// Responses `X` (n x p), regressors `Z` (n x q) and the declared column
/// split `q = q1 + q2`. Construction checks shape consistency and that `Z`
/// has full numerical column rank.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    dims: DesignDims,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, z: DMatrix<f64>, q1: usize) -> Result<Self> {
        if x.nrows() != z.nrows() {
            return Err(Error::Domain(format!(
                "X has {} rows but Z has {}",
                x.nrows(),
                z.nrows()
            )));
        }
        let dims = DesignDims::new(x.ncols(), x.nrows(), z.ncols(), q1)?;
        let sv = z.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        if !(max > 0.0) || min < RANK_TOL * max {
            return Err(Error::SingularDesign(format!(
                "Z is numerically rank-deficient (sigma_min/sigma_max = {:.3e})",
                if max > 0.0 { min / max } else { 0.0 }
            )));
        }
        Ok(Self { x, z, dims })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn dims(&self) -> DesignDims {
        self.dims
    }

    /// First `q1` columns of `Z` (the tested block).
    pub fn z1(&self) -> DMatrix<f64> {
        self.z.columns(0, self.dims.q1).into_owned()
    }

    /// Remaining `q2` columns of `Z`.
    pub fn z2(&self) -> DMatrix<f64> {
        self.z.columns(self.dims.q1, self.dims.q2()).into_owned()
    }
}

/// Maximum-likelihood fit: coefficients, covariance MLE and its log-determinant
/// (`-inf` when the covariance estimate is singular).
#[derive(Debug, Clone)]
pub struct FitResult {
    pub b_hat: DMatrix<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub logdet_sigma_hat: f64,
}

/// `log Lambda_n = logdet(Sigma_hat) - logdet(Sigma_hat_0) <= 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WilksLambda {
    pub log_lambda: f64,
    pub dims: DesignDims,
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let mt = m.transpose();
    *m += mt;
    *m *= 0.5;
}

/// Log-determinant of a symmetric positive definite matrix via Cholesky,
/// accumulated in the log domain. Returns `-inf` when the factorization fails
/// (singular PSD input).
pub fn logdet_spd_or_neg_inf(m: &DMatrix<f64>) -> f64 {
    match Cholesky::new(m.clone()) {
        Some(chol) => 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

fn mle_from_residuals(b_hat: DMatrix<f64>, residuals: &DMatrix<f64>, n: usize) -> FitResult {
    let mut sigma_hat = residuals.transpose() * residuals / n as f64;
    symmetrize(&mut sigma_hat);
    let logdet = logdet_spd_or_neg_inf(&sigma_hat);
    FitResult {
        b_hat,
        sigma_hat,
        logdet_sigma_hat: logdet,
    }
}

/// MLE under the alternative: `B_hat = (X'Z)(Z'Z)^{-1}` via Cholesky solve,
/// `Sigma_hat = residual cross-product / n`.
pub fn fit_alternative(data: &Dataset) -> Result<FitResult> {
    let z = data.z();
    let a = z.transpose() * z;
    let chol = Cholesky::new(a)
        .ok_or_else(|| Error::SingularDesign("Z'Z is not positive definite".into()))?;
    // B_hat' = (Z'Z)^{-1} Z'X, so B_hat = X'Z (Z'Z)^{-1} without explicit inverse.
    let bt = chol.solve(&(z.transpose() * data.x()));
    let residuals = data.x() - z * &bt;
    Ok(mle_from_residuals(bt.transpose(), &residuals, data.dims().n))
}

/// MLE under the null `B_1 = B_1*`: regresses `y_i = x_i - B_1* z_{i,1}` on the
/// second regressor block only. The returned coefficient matrix has `B_1*`
/// in the first `q1` columns and the fitted `B_20` in the rest.
pub fn fit_null(data: &Dataset, b1_star: &DMatrix<f64>) -> Result<FitResult> {
    let dims = data.dims();
    check_b1_shape(dims, b1_star)?;
    let y = data.x() - data.z1() * b1_star.transpose();
    let n = dims.n;
    if dims.q2() == 0 {
        // No second block: Sigma_hat_0 = Y'Y / n directly.
        return Ok(mle_from_residuals(b1_star.clone(), &y, n));
    }
    let z2 = data.z2();
    let a22 = z2.transpose() * &z2;
    let chol = Cholesky::new(a22)
        .ok_or_else(|| Error::SingularDesign("Z2'Z2 is not positive definite".into()))?;
    let b20t = chol.solve(&(z2.transpose() * &y));
    let residuals = &y - &z2 * &b20t;
    let mut b_hat = DMatrix::zeros(dims.p, dims.q);
    b_hat.columns_mut(0, dims.q1).copy_from(b1_star);
    b_hat.columns_mut(dims.q1, dims.q2()).copy_from(&b20t.transpose());
    Ok(mle_from_residuals(b_hat, &residuals, n))
}

/// Schur complement `A_{11:2} = A_11 - A_12 A_22^{-1} A_21` of the regressor
/// cross-product `A = Z'Z`, the effective information for the tested block.
pub fn block_a112(z: &DMatrix<f64>, q1: usize) -> Result<DMatrix<f64>> {
    let q = z.ncols();
    if q1 < 1 || q1 > q {
        return Err(Error::Domain(format!("q1 = {q1} must satisfy 1 <= q1 <= q = {q}")));
    }
    let a = z.transpose() * z;
    let a11 = a.view((0, 0), (q1, q1)).into_owned();
    if q1 == q {
        return Ok(a11);
    }
    let q2 = q - q1;
    let a12 = a.view((0, q1), (q1, q2)).into_owned();
    let a22 = a.view((q1, q1), (q2, q2)).into_owned();
    let chol = Cholesky::new(a22)
        .ok_or_else(|| Error::NotPositiveDefinite("A_22 block of Z'Z".into()))?;
    let mut out = &a11 - &a12 * chol.solve(&a12.transpose());
    symmetrize(&mut out);
    Ok(out)
}

fn check_b1_shape(dims: DesignDims, b1_star: &DMatrix<f64>) -> Result<()> {
    if b1_star.nrows() != dims.p || b1_star.ncols() != dims.q1 {
        return Err(Error::Domain(format!(
            "B1* must be {}x{}, got {}x{}",
            dims.p,
            dims.q1,
            b1_star.nrows(),
            b1_star.ncols()
        )));
    }
    Ok(())
}

/// Wilks `log Lambda_n` through the two determinant factorizations.
pub fn wilks_lambda(data: &Dataset, b1_star: &DMatrix<f64>) -> Result<WilksLambda> {
    let dims = data.dims();
    check_b1_shape(dims, b1_star)?;
    if dims.n2() < dims.p {
        return Err(Error::Domain(format!(
            "Sigma_hat is singular when n - q = {} < p = {}",
            dims.n2(),
            dims.p
        )));
    }
    let alt = fit_alternative(data)?;
    if !alt.logdet_sigma_hat.is_finite() {
        return Err(Error::NotPositiveDefinite(
            "Sigma_hat under the alternative is numerically singular".into(),
        ));
    }
    let null = fit_null(data, b1_star)?;
    if !null.logdet_sigma_hat.is_finite() {
        return Err(Error::NotPositiveDefinite(
            "Sigma_hat under the null is numerically singular".into(),
        ));
    }
    Ok(WilksLambda {
        log_lambda: alt.logdet_sigma_hat - null.logdet_sigma_hat,
        dims,
    })
}

/// Normalized coefficient deviation `F = (n-q)/q1 (n Sigma_hat)^{-1}
/// (B_hat_1 - B_1*) A_{11:2} (B_hat_1 - B_1*)'`.
pub fn f_matrix(data: &Dataset, b1_star: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dims = data.dims();
    check_b1_shape(dims, b1_star)?;
    if dims.n2() < dims.p {
        return Err(Error::Domain(format!(
            "Sigma_hat is singular when n - q = {} < p = {}",
            dims.n2(),
            dims.p
        )));
    }
    let alt = fit_alternative(data)?;
    let d = alt.b_hat.columns(0, dims.q1).into_owned() - b1_star;
    let a112 = block_a112(data.z(), dims.q1)?;
    let w = &d * a112 * d.transpose();
    let n_sigma = alt.sigma_hat * dims.n as f64;
    let chol = Cholesky::new(n_sigma).ok_or_else(|| {
        Error::NotPositiveDefinite("n * Sigma_hat in the F-matrix construction".into())
    })?;
    Ok(chol.solve(&w) * (dims.n2() as f64 / dims.q1 as f64))
}

/// Eigenvalues of the F-matrix, computed through the symmetric congruence
/// `L^{-1} W L^{-T}` with `L L' = n Sigma_hat`; all real and nonnegative.
pub fn f_matrix_eigenvalues(data: &Dataset, b1_star: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dims = data.dims();
    check_b1_shape(dims, b1_star)?;
    let alt = fit_alternative(data)?;
    let d = alt.b_hat.columns(0, dims.q1).into_owned() - b1_star;
    let a112 = block_a112(data.z(), dims.q1)?;
    let mut w = &d * a112 * d.transpose();
    symmetrize(&mut w);
    let n_sigma = alt.sigma_hat * dims.n as f64;
    let chol = Cholesky::new(n_sigma).ok_or_else(|| {
        Error::NotPositiveDefinite("n * Sigma_hat in the F-matrix construction".into())
    })?;
    let l = chol.l();
    // L^{-1} W L^{-T}: two triangular solves.
    let tmp = l.solve_lower_triangular(&w).expect("L is nonsingular");
    let sym = l
        .solve_lower_triangular(&tmp.transpose())
        .expect("L is nonsingular");
    let mut sym = sym;
    symmetrize(&mut sym);
    let scale = dims.n2() as f64 / dims.q1 as f64;
    let eig = sym.symmetric_eigenvalues();
    Ok(eig.iter().map(|&l| scale * l).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_dataset(seed: u64, p: usize, n: usize, q: usize, q1: usize) -> (Dataset, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = randn(&mut rng, n, q);
        let x = randn(&mut rng, n, p);
        let b1_star = DMatrix::zeros(p, q1);
        (Dataset::new(x, z, q1).unwrap(), b1_star)
    }

    #[test]
    fn exact_interpolation_recovers_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (p, n, q) = (3, 40, 4);
        let z = randn(&mut rng, n, q);
        let b = randn(&mut rng, p, q);
        let x = &z * b.transpose();
        let data = Dataset::new(x, z, 2).unwrap();
        let fit = fit_alternative(&data).unwrap();
        assert_relative_eq!(fit.b_hat, b, epsilon = 1e-9);
        assert!(fit.sigma_hat.amax() < 1e-18);
        // Roundoff can leave the residual matrix barely positive definite,
        // so the log-determinant is either -inf or an enormous negative value.
        assert!(fit.logdet_sigma_hat < -100.0);
    }

    #[test]
    fn intercept_only_fit_is_column_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (p, n) = (4, 30);
        let x = randn(&mut rng, n, p);
        let z = DMatrix::from_element(n, 1, 1.0);
        let data = Dataset::new(x.clone(), z, 1).unwrap();
        let fit = fit_alternative(&data).unwrap();
        for j in 0..p {
            let mean = x.column(j).mean();
            assert_relative_eq!(fit.b_hat[(j, 0)], mean, epsilon = 1e-12);
        }
        // Sigma_hat is the centered cross-product over n.
        let means = fit.b_hat.column(0);
        let centered = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
        let expected = centered.transpose() * centered / n as f64;
        assert_relative_eq!(fit.sigma_hat, expected, epsilon = 1e-12);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let (data, _) = random_dataset(3, 4, 50, 3, 2);
        let fit = fit_alternative(&data).unwrap();
        let residuals = data.x() - data.z() * fit.b_hat.transpose();
        let cross = data.z().transpose() * residuals;
        assert!(cross.amax() < 1e-10);
    }

    #[test]
    fn null_fit_with_true_coefficients_and_zero_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (p, n, q, q1) = (3, 30, 3, 2);
        let z = randn(&mut rng, n, q);
        let b = randn(&mut rng, p, q);
        let x = &z * b.transpose();
        let b1 = b.columns(0, q1).into_owned();
        let data = Dataset::new(x, z, q1).unwrap();
        let fit = fit_null(&data, &b1).unwrap();
        assert!(fit.sigma_hat.amax() < 1e-18);
    }

    #[test]
    fn null_fit_degenerate_q2_zero() {
        let (data, b1) = random_dataset(5, 3, 40, 2, 2);
        let fit = fit_null(&data, &b1).unwrap();
        let y = data.x().clone();
        let expected = y.transpose() * &y / 40.0;
        assert_relative_eq!(fit.sigma_hat, expected, epsilon = 1e-12);
    }

    #[test]
    fn null_logdet_dominates_alternative() {
        for seed in 0..1000 {
            let (data, b1) = random_dataset(seed, 3, 25, 4, 2);
            let alt = fit_alternative(&data).unwrap();
            let null = fit_null(&data, &b1).unwrap();
            assert!(null.logdet_sigma_hat >= alt.logdet_sigma_hat - 1e-10);
        }
    }

    #[test]
    fn a112_orthogonal_blocks_reduce_to_a11() {
        // Build Z with exactly orthogonal blocks via disjoint supports.
        let n = 20;
        let mut z = DMatrix::zeros(n, 4);
        for i in 0..10 {
            z[(i, 0)] = (i + 1) as f64;
            z[(i, 1)] = (i as f64).sin() + 2.0;
        }
        for i in 10..20 {
            z[(i, 2)] = (i + 1) as f64;
            z[(i, 3)] = (i as f64).cos() + 2.0;
        }
        let a = z.transpose() * &z;
        let a11 = a.view((0, 0), (2, 2)).into_owned();
        let s = block_a112(&z, 2).unwrap();
        assert_relative_eq!(s, a11, epsilon = 1e-10);
    }

    #[test]
    fn a112_full_split_is_gram_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = randn(&mut rng, 15, 3);
        let s = block_a112(&z, 3).unwrap();
        assert_relative_eq!(s, z.transpose() * &z, epsilon = 1e-12);
    }

    #[test]
    fn a112_dominated_by_a11() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = randn(&mut rng, 30, 5);
        let q1 = 2;
        let s = block_a112(&z, q1).unwrap();
        let a = z.transpose() * &z;
        let a11 = a.view((0, 0), (q1, q1)).into_owned();
        let s_eigs = s.clone().symmetric_eigenvalues();
        assert!(s_eigs.iter().all(|&l| l > 0.0));
        // Schur complement is dominated by A_11: A_11 - S is PSD.
        let diff_eigs = (a11 - s).symmetric_eigenvalues();
        assert!(diff_eigs.iter().all(|&l| l > -1e-10));
    }

    #[test]
    fn wilks_zero_when_b1_star_matches_fit() {
        let (data, _) = random_dataset(8, 4, 60, 5, 3);
        let fit = fit_alternative(&data).unwrap();
        let b1_hat = fit.b_hat.columns(0, 3).into_owned();
        let w = wilks_lambda(&data, &b1_hat).unwrap();
        assert_abs_diff_eq!(w.log_lambda, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn wilks_is_nonpositive() {
        for seed in 100..200 {
            let (data, b1) = random_dataset(seed, 3, 30, 4, 2);
            let w = wilks_lambda(&data, &b1).unwrap();
            assert!(w.log_lambda <= 1e-12);
        }
    }

    #[test]
    fn univariate_case_matches_classical_f_statistic() {
        // p = 1: Lambda^{-1} = 1 + q1/(n-q) * F with the textbook F
        // computed from residual sums of squares.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, q, q1) = (50, 3, 2);
        let z = randn(&mut rng, n, q);
        let x = randn(&mut rng, n, 1);
        let data = Dataset::new(x.clone(), z.clone(), q1).unwrap();
        let b1 = DMatrix::zeros(1, q1);
        let w = wilks_lambda(&data, &b1).unwrap();

        let rss = |design: &DMatrix<f64>| -> f64 {
            let a = design.transpose() * design;
            let bt = Cholesky::new(a).unwrap().solve(&(design.transpose() * &x));
            let r = &x - design * bt;
            (r.transpose() * r)[(0, 0)]
        };
        let rss1 = rss(&z);
        let rss0 = rss(&z.columns(q1, q - q1).into_owned());
        let f_scalar = ((rss0 - rss1) / q1 as f64) / (rss1 / (n - q) as f64);
        let lambda = w.log_lambda.exp();
        let expected = 1.0 / (1.0 + q1 as f64 / (n - q) as f64 * f_scalar);
        assert_relative_eq!(lambda, expected, max_relative = 1e-10);
    }

    #[test]
    fn determinant_route_matches_eigenvalue_route() {
        for seed in 0..100 {
            let (data, b1) = random_dataset(seed + 300, 4, 40, 5, 3);
            let w = wilks_lambda(&data, &b1).unwrap();
            let dims = data.dims();
            let ratio = dims.q1 as f64 / dims.n2() as f64;
            let eig_route: f64 = f_matrix_eigenvalues(&data, &b1)
                .unwrap()
                .iter()
                .map(|&l| (1.0 + ratio * l).ln())
                .sum();
            assert_relative_eq!(-w.log_lambda, eig_route, max_relative = 1e-8, epsilon = 1e-10);
        }
    }

    #[test]
    fn wilks_invariant_under_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (p, n, q, q1) = (3, 40, 4, 2);
        let z = randn(&mut rng, n, q);
        let x = randn(&mut rng, n, p);
        let b1 = randn(&mut rng, p, q1);
        let c = 3.7;
        let d1 = Dataset::new(x.clone(), z.clone(), q1).unwrap();
        let d2 = Dataset::new(x * c, z, q1).unwrap();
        let w1 = wilks_lambda(&d1, &b1).unwrap();
        let w2 = wilks_lambda(&d2, &(b1 * c)).unwrap();
        assert_abs_diff_eq!(w1.log_lambda, w2.log_lambda, epsilon = 1e-9);
    }

    #[test]
    fn f_matrix_zero_when_b1_star_is_fit() {
        let (data, _) = random_dataset(11, 3, 40, 4, 2);
        let fit = fit_alternative(&data).unwrap();
        let b1_hat = fit.b_hat.columns(0, 2).into_owned();
        let f = f_matrix(&data, &b1_hat).unwrap();
        assert!(f.amax() < 1e-9);
    }

    #[test]
    fn f_matrix_trace_nonnegative() {
        for seed in 0..50 {
            let (data, b1) = random_dataset(seed + 500, 3, 30, 4, 2);
            let f = f_matrix(&data, &b1).unwrap();
            assert!(f.trace() >= 0.0);
            let eigs = f_matrix_eigenvalues(&data, &b1).unwrap();
            assert!(eigs.iter().all(|&l| l > -1e-10));
        }
    }

    #[test]
    fn rank_deficient_design_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 30;
        let mut z = randn(&mut rng, n, 3);
        let dup = z.column(0).into_owned();
        z.set_column(2, &dup);
        let x = randn(&mut rng, n, 2);
        match Dataset::new(x, z, 1) {
            Err(Error::SingularDesign(_)) => {}
            other => panic!("expected singular-design error, got {other:?}"),
        }
    }

    #[test]
    fn too_small_sample_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z = randn(&mut rng, 10, 4);
        let x = randn(&mut rng, 10, 8);
        assert!(Dataset::new(x, z, 2).is_err());
    }
}
