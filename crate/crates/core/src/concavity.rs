//! Margin matrices for the key concavity inequality of the sum-of-Hessian
//! operator.
//!
//! For decreasing `lambda` with `lambda_n >= -delta lambda_1` the matrix `M`
//! satisfies, for every complex direction `xi`,
//!
//! ```text
//! xi^* M xi = - sum_{p != q} F_pq xi_p conj(xi_q) / F
//!             + 2 |sum_i F_i xi_i|^2 / F^2
//!             + sum_{i > 1} F_i |xi_i|^2 / ((1 + delta) lambda_1 F)
//!             - (1 - gamma) F_1 |xi_1|^2 / (lambda_1 F)
//! ```
//!
//! All coefficients are real, so `M` is real symmetric and its smallest
//! eigenvalue is the minimum of the form over complex unit vectors. A
//! nonnegative minimum certifies the inequality at `lambda` for every
//! direction at once.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::bigfloat::{frobenius_log2, jacobi_big, sigma_exact, BigFloat};
use crate::cones::in_gamma_k;
use crate::operator::HessianSumSpec;
use crate::symfun::{grad_sigma, hess_sigma, sigma, sigma_excluding};
use crate::{Error, Result, C64};

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityParams {
    gamma: f64,
    delta: f64,
    spec: HessianSumSpec,
}

impl ConcavityParams {
    pub fn new(gamma: f64, delta: f64, spec: HessianSumSpec) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter("gamma must lie in (0, 1)"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter("delta must lie in (0, 1)"));
        }
        if spec.k() >= spec.n() {
            return Err(Error::InvalidParameter("the inequality needs k < n"));
        }
        Ok(Self { gamma, delta, spec })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn spec(&self) -> &HessianSumSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }

    /// Margins scale like `t^-2` under `lambda -> t lambda` only when there
    /// are no lower-order terms (the roots `y` do not scale).
    pub fn homogeneous(&self) -> bool {
        self.spec.m() == 0
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.gamma, delta, self.spec.clone())
    }
}

fn check_ordering(lambda: &[f64], delta: f64) -> Result<f64> {
    if !lambda.windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    if !(lambda[0] > 0.0) {
        return Err(Error::NonPositiveLeading(lambda[0]));
    }
    let psh = lambda[lambda.len() - 1] + delta * lambda[0];
    if psh < 0.0 {
        return Err(Error::DynamicPshViolated(psh));
    }
    Ok(psh)
}

/// Operator value, gradient and off-diagonal Hessian at one point.
struct Derivatives<'a> {
    value: f64,
    grad: &'a [f64],
    hess: &'a DMatrix<f64>,
}

fn assemble(d: &Derivatives<'_>, lambda1: f64, gamma: f64, delta: f64) -> DMatrix<f64> {
    let n = d.grad.len();
    let f = d.value;
    let mut m = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let mut v = 2.0 * (d.grad[p] / f) * (d.grad[q] / f);
            if p != q {
                v -= d.hess[(p, q)] / f;
            }
            m[(p, q)] = v;
        }
    }
    for i in 1..n {
        m[(i, i)] += d.grad[i] / ((1.0 + delta) * lambda1 * f);
    }
    m[(0, 0)] -= (1.0 - gamma) * d.grad[0] / (lambda1 * f);
    m
}

/// Margin matrix of the pure `sigma_k` inequality.
pub fn margin_matrix_sigma(lambda: &[f64], k: usize, gamma: f64, delta: f64) -> Result<DMatrix<f64>> {
    check_ordering(lambda, delta)?;
    in_gamma_k(lambda, k)?.into_result(k)?;
    let value = sigma(lambda, k as isize);
    let grad = grad_sigma(lambda, k);
    let hess = hess_sigma(lambda, k);
    Ok(assemble(&Derivatives { value, grad: &grad, hess: &hess }, lambda[0], gamma, delta))
}

/// Margin matrix of the sum-of-Hessian inequality, with `F`, `F_i`, `F_pq`
/// taken from the lifted vector `(lambda, y)`.
pub fn margin_matrix_f(lambda: &[f64], params: &ConcavityParams) -> Result<DMatrix<f64>> {
    let spec = &params.spec;
    if lambda.len() != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), got: lambda.len() });
    }
    check_ordering(lambda, params.delta)?;
    let lifted = spec.lift(lambda);
    in_gamma_k(&lifted.combined, spec.k())?.into_result(spec.k())?;
    let value = spec.lifted_value(lambda)?;
    let grad = spec.grad(lambda)?;
    let hess = spec.hess(lambda)?;
    Ok(assemble(&Derivatives { value, grad: &grad, hess: &hess }, lambda[0], params.gamma, params.delta))
}

/// The margin form evaluated term by term from sigma quantities of the lifted
/// vector, without assembling a matrix.
pub fn margin_form_direct(lambda: &[f64], params: &ConcavityParams, xi: &[C64]) -> Result<f64> {
    let spec = &params.spec;
    check_ordering(lambda, params.delta)?;
    let lifted = spec.lift(lambda).combined;
    let k = spec.k() as isize;
    let n = spec.n();
    let f = sigma(&lifted, k);
    let fi: Vec<f64> = (0..n).map(|i| sigma_excluding(&lifted, k - 1, &[i])).collect();
    let mut cross = C64::new(0.0, 0.0);
    for p in 0..n {
        for q in 0..n {
            if p != q {
                cross += xi[p] * xi[q].conj() * sigma_excluding(&lifted, k - 2, &[p, q]);
            }
        }
    }
    let lin: C64 = (0..n).map(|i| xi[i] * fi[i]).sum();
    let l1 = lambda[0];
    let mut third = 0.0;
    for i in 1..n {
        third += fi[i] * xi[i].norm_sqr() / ((1.0 + params.delta) * l1 * f);
    }
    let rhs = (1.0 - params.gamma) * fi[0] * xi[0].norm_sqr() / (l1 * f);
    Ok(-cross.re / f + 2.0 * lin.norm_sqr() / (f * f) + third - rhs)
}

/// `N = S M` with `S = lambda_1 (1 + delta) F^2 > 0`, evaluated exactly.
///
/// Every entry of `N` is a polynomial in the lifted spectrum, `gamma` and
/// `delta`, so it is computed without rounding from the `f64` inputs. Far
/// out on the level set, `M` is a rank-one term of size `lambda_1^{2k-2}`
/// plus parts whose smallest eigenvalue is of size `lambda_1^{-2}`; no
/// fixed-precision evaluation of `M` resolves that.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMargin {
    pub n: usize,
    /// Row-major entries of `N`.
    pub entries: Vec<BigFloat>,
    /// `S`.
    pub scale: BigFloat,
    /// `F(lambda)`.
    pub level: BigFloat,
}

fn exact(x: f64) -> BigFloat {
    BigFloat::from_f64(x).expect("finite input")
}

fn without(x: &[BigFloat], skip: &[usize]) -> Vec<BigFloat> {
    x.iter().enumerate().filter(|(i, _)| !skip.contains(i)).map(|(_, v)| v.clone()).collect()
}

pub fn exact_margin_matrix(lambda: &[f64], params: &ConcavityParams) -> Result<ExactMargin> {
    let spec = &params.spec;
    if lambda.len() != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), got: lambda.len() });
    }
    check_ordering(lambda, params.delta)?;
    let lifted = spec.lift(lambda).combined;
    in_gamma_k(&lifted, spec.k())?.into_result(spec.k())?;
    let n = spec.n();
    let k = spec.k();
    let x: Vec<BigFloat> = lifted.iter().map(|&v| exact(v)).collect();
    let f = sigma_exact(&x, k);
    let fi: Vec<BigFloat> = (0..n).map(|i| sigma_exact(&without(&x, &[i]), k - 1)).collect();
    let one = BigFloat::from_i64(1);
    let l1 = exact(lambda[0]);
    let od = one.add(&exact(params.delta));
    let og = one.sub(&exact(params.gamma));
    let l1od = l1.mul(&od);
    let two = BigFloat::from_i64(2);
    let mut entries = vec![BigFloat::zero(); n * n];
    for p in 0..n {
        for q in p..n {
            let v = if p == q {
                let base = l1od.mul(&two).mul(&fi[p]).mul(&fi[p]);
                if p == 0 {
                    base.sub(&og.mul(&od).mul(&f).mul(&fi[0]))
                } else {
                    base.add(&f.mul(&fi[p]))
                }
            } else {
                let fpq = if k >= 2 { sigma_exact(&without(&x, &[p, q]), k - 2) } else { BigFloat::zero() };
                l1od.mul(&two.mul(&fi[p]).mul(&fi[q]).sub(&f.mul(&fpq)))
            };
            entries[q * n + p] = v.clone();
            entries[p * n + q] = v;
        }
    }
    let scale = l1od.mul(&f).mul(&f);
    Ok(ExactMargin { n, entries, scale, level: f })
}

impl ExactMargin {
    /// `v^T N v` without rounding.
    pub fn quadratic(&self, v: &[BigFloat]) -> BigFloat {
        let n = self.n;
        let mut acc = BigFloat::zero();
        for p in 0..n {
            let mut row = BigFloat::zero();
            for q in 0..n {
                row = row.add(&self.entries[p * n + q].mul(&v[q]));
            }
            acc = acc.add(&row.mul(&v[p]));
        }
        acc
    }

    /// `xi^* M xi`. With `xi = a + i b`, `xi^* N xi = a^T N a + b^T N b`;
    /// only the final division by `S` rounds.
    pub fn form(&self, xi: &[C64]) -> f64 {
        let re: Vec<BigFloat> = xi.iter().map(|z| exact(z.re)).collect();
        let im: Vec<BigFloat> = xi.iter().map(|z| exact(z.im)).collect();
        let num = self.quadratic(&re).add(&self.quadratic(&im));
        num.div(&self.scale, 64).map(|v| v.to_f64()).unwrap_or(f64::NAN)
    }
}

/// Mantissa bits of the first eigen-solve; doubled until certified.
const START_PRECISION: u32 = 160;
const MAX_PRECISION: u32 = 10_240;

/// One certified point of the inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub lambda: Vec<f64>,
    /// Smallest eigenvalue of the margin matrix.
    pub min_margin: f64,
    /// Unit eigenvector for `min_margin` (real, since the matrix is real),
    /// rounded to `f64`.
    pub minimizer: Vec<f64>,
    /// The same eigenvector at the working precision. Re-evaluating the
    /// form far out on the level set needs this one: rounding to `f64`
    /// alone moves the Rayleigh quotient by about `1e-32 |M|`.
    pub minimizer_hp: Vec<BigFloat>,
    /// `F(lambda)` (`sigma_k(lambda)` when `m = 0`).
    pub level: f64,
    pub lambda1: f64,
    /// `lambda_n + delta lambda_1`.
    pub psh_margin: f64,
    pub in_cone: bool,
    pub homogeneous: bool,
    /// `min_margin / |M|_F`: scale-free, same sign.
    pub relative_margin: f64,
    /// The eigen-solve error bound is below `|min_margin|`, so the sign is
    /// exact.
    pub certified: bool,
    pub precision_bits: u32,
}

impl MarginReport {
    pub fn minimizer_complex(&self) -> Vec<C64> {
        self.minimizer.iter().map(|&v| C64::new(v, 0.0)).collect()
    }
}

/// Smallest eigenvalue and eigenvector of the margin matrix, from the exact
/// matrix `N` by Jacobi sweeps at increasing precision until the rounding
/// bound falls below the eigenvalue.
pub fn min_margin(lambda: &[f64], params: &ConcavityParams) -> Result<MarginReport> {
    let x = exact_margin_matrix(lambda, params)?;
    let n = x.n;
    let mut prec = START_PRECISION;
    let eig = loop {
        let eig = jacobi_big(&x.entries, n, prec);
        let certified = libm::fabs(eig.values[0].to_f64()) > eig.error_bound;
        if certified || prec >= MAX_PRECISION {
            break (eig, certified);
        }
        prec *= 2;
    };
    let (eig, certified) = eig;
    let min_n = &eig.values[0];
    let min = min_n.div(&x.scale, 64).map(|v| v.to_f64()).unwrap_or(f64::NAN);
    let relative = match frobenius_log2(&x.entries) {
        Some(l) => min_n.ldexp(-(l.floor() as i64)).to_f64() / libm::exp2(l - l.floor()),
        None => 0.0,
    };
    let hp = eig.vectors[0].clone();
    Ok(MarginReport {
        lambda: lambda.to_vec(),
        min_margin: min,
        minimizer: hp.iter().map(|v| v.to_f64()).collect(),
        minimizer_hp: hp,
        level: x.level.to_f64(),
        lambda1: lambda[0],
        psh_margin: lambda[n - 1] + params.delta * lambda[0],
        in_cone: true,
        homogeneous: params.homogeneous(),
        relative_margin: relative,
        certified,
        precision_bits: prec,
    })
}

/// Re-evaluates the margin form at `xi` through the exactly assembled matrix.
pub fn evaluate_form(lambda: &[f64], params: &ConcavityParams, xi: &[C64]) -> Result<f64> {
    Ok(exact_margin_matrix(lambda, params)?.form(xi))
}

/// Real quadratic form `v^T M v` at a real direction.
pub fn evaluate_form_real(lambda: &[f64], params: &ConcavityParams, v: &[f64]) -> Result<f64> {
    let xi: Vec<C64> = v.iter().map(|&a| C64::new(a, 0.0)).collect();
    evaluate_form(lambda, params, &xi)
}

/// `v^T M v` at a high-precision direction (for [`MarginReport::minimizer_hp`]).
pub fn evaluate_form_hp(lambda: &[f64], params: &ConcavityParams, v: &[BigFloat]) -> Result<f64> {
    let x = exact_margin_matrix(lambda, params)?;
    Ok(x.quadratic(v).div(&x.scale, 64).map(|q| q.to_f64()).unwrap_or(f64::NAN))
}

/// Value of the first two terms at `xi` (the part that is independent of
/// `lambda_1`, `gamma` and `delta`).
pub fn leading_terms_form(lambda: &[f64], spec: &HessianSumSpec, xi: &[f64]) -> Result<f64> {
    let f = spec.lifted_value(lambda)?;
    let grad = spec.grad(lambda)?;
    let hess = spec.hess(lambda)?;
    let n = lambda.len();
    let mut cross = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                cross += hess[(p, q)] * xi[p] * xi[q];
            }
        }
    }
    let lin: f64 = grad.iter().zip(xi).map(|(g, x)| g * x).sum();
    Ok(-cross / f + 2.0 * lin * lin / (f * f))
}

/// `lambda / lambda_1`.
pub fn normalize(lambda: &[f64]) -> Result<Vec<f64>> {
    if !(lambda[0] > 0.0) {
        return Err(Error::NonPositiveLeading(lambda[0]));
    }
    Ok(lambda.iter().map(|v| v / lambda[0]).collect())
}

/// Whether `s_{k;1} < -sigma_k / (16 k)` at the normalized spectrum.
pub fn sit2_predicate(normalized: &[f64], k: usize) -> Result<bool> {
    check_normalized(normalized, k)?;
    let sk = sigma(normalized, k as isize);
    Ok(sigma_excluding(normalized, k as isize, &[0]) < -sk / (16.0 * k as f64))
}

fn check_normalized(x: &[f64], k: usize) -> Result<()> {
    if !x.windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    if (x[0] - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition("normalized spectrum must have leading entry 1"));
    }
    if k >= x.len() {
        return Err(Error::DegreeOutOfRange { k, n: x.len() });
    }
    in_gamma_k(x, k)?.into_result(k).map(|_| ())
}

/// Ratios tracked under the case `s_{k;1} < -sigma_k/(16k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaimsReport {
    pub sit2: bool,
    /// `lambda_k / |lambda_n|`; `None` when `|lambda_n| <= 1e-300` (unbounded).
    pub r1: Option<f64>,
    /// `-sigma_{k+1} / (lambda_1 ... lambda_{k-1} lambda_k^2)`.
    pub r2: f64,
    /// `s_{k-1;1} / (lambda_2 ... lambda_{k-1} lambda_k^2)`.
    pub r3: f64,
    /// Number of entries `>= sqrt(delta)` (the index `l` with
    /// `lambda_l >= sqrt(delta) > lambda_{l+1}`).
    pub ell: usize,
}

pub fn claims_report(normalized: &[f64], k: usize, delta: f64) -> Result<ClaimsReport> {
    check_normalized(normalized, k)?;
    let x = normalized;
    let n = x.len();
    let ki = k as isize;
    let sk = sigma(x, ki);
    let sit2 = sigma_excluding(x, ki, &[0]) < -sk / (16.0 * k as f64);
    let xn = x[n - 1].abs();
    let r1 = if xn <= 1e-300 { None } else { Some(x[k - 1] / xn) };
    let xk2 = x[k - 1] * x[k - 1];
    let head: f64 = x[..k - 1].iter().product();
    let r2 = -sigma(x, ki + 1) / (head * xk2);
    let mid: f64 = x[1..k - 1].iter().product();
    let r3 = sigma_excluding(x, ki - 1, &[0]) / (mid * xk2);
    let root = libm::sqrt(delta);
    let ell = x.iter().take_while(|&&v| v >= root).count();
    Ok(ClaimsReport { sit2, r1, r2, r3, ell })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params(n: usize, k: usize, b: Vec<f64>) -> ConcavityParams {
        ConcavityParams::new(0.5, 1e-3, HessianSumSpec::new(n, k, b).unwrap()).unwrap()
    }

    #[test]
    fn parameter_validation() {
        let s = HessianSumSpec::sigma_k(3, 2).unwrap();
        assert!(ConcavityParams::new(0.0, 1e-3, s.clone()).is_err());
        assert!(ConcavityParams::new(0.5, 1.0, s.clone()).is_err());
        assert!(ConcavityParams::new(0.5, 1e-3, HessianSumSpec::sigma_k(3, 3).unwrap()).is_err());
        assert!(ConcavityParams::new(0.5, 1e-3, s).is_ok());
    }

    #[test]
    fn first_diagonal_entry() {
        let l = [10.0, 2.0, 1.0, -0.001];
        let k = 2;
        let m = margin_matrix_sigma(&l, k, 0.3, 1e-3).unwrap();
        let sk = sigma(&l, 2);
        let f1 = sigma_excluding(&l, 1, &[0]);
        let want = 2.0 * f1 * f1 / (sk * sk) - 0.7 * f1 / (l[0] * sk);
        assert!((m[(0, 0)] - want).abs() <= 1e-14 * want.abs());
    }

    #[test]
    fn homogeneous_of_degree_minus_two() {
        let l = [50.0, 3.0, 1.0, -0.01];
        let m1 = margin_matrix_sigma(&l, 3, 0.5, 1e-3).unwrap();
        let l2: Vec<f64> = l.iter().map(|v| v * 10.0).collect();
        let m2 = margin_matrix_sigma(&l2, 3, 0.5, 1e-3).unwrap();
        for (a, b) in m1.iter().zip(m2.iter()) {
            assert!((a * 0.01 - b).abs() <= 1e-10 * b.abs());
        }
    }

    #[test]
    fn deep_regime_is_positive() {
        let p = params(3, 2, vec![]);
        let r = min_margin(&[1e3, 1.0, -0.1], &p).unwrap();
        assert!(r.min_margin >= 0.0, "{}", r.min_margin);
        assert!(r.relative_margin >= 0.0 && r.certified);
        assert!(r.homogeneous);
    }

    #[test]
    fn f_reduces_to_sigma_without_lift() {
        let p = params(4, 3, vec![]);
        let l = [20.0, 4.0, 1.0, -0.01];
        let a = margin_matrix_f(&l, &p).unwrap();
        let b = margin_matrix_sigma(&l, 3, 0.5, 1e-3).unwrap();
        assert!((a - &b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn lifted_matrix_matches_direct_lift_path() {
        let p = params(3, 2, vec![1.0]);
        let l = [1e3, 1.0, 0.0];
        let m = margin_matrix_f(&l, &p).unwrap();
        assert!(!p.homogeneous());
        // independent path: sigma quantities of (lambda, 1) via elementary_all
        let lifted = [1e3, 1.0, 0.0, 1.0];
        let f = crate::symfun::elementary_all(&lifted, 2).get(2);
        assert_eq!(f, 1e3 + 1e3 + 1.0);
        let grad: Vec<f64> = (0..3)
            .map(|i| {
                let red: Vec<f64> = lifted.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                crate::symfun::elementary_all(&red, 1).get(1)
            })
            .collect();
        for p_ in 0..3 {
            for q_ in 0..3 {
                let mut want = 2.0 * grad[p_] * grad[q_] / (f * f);
                if p_ != q_ {
                    want -= 1.0 / f;
                }
                if p_ == q_ && p_ > 0 {
                    want += grad[p_] / ((1.0 + 1e-3) * 1e3 * f);
                }
                if p_ == 0 && q_ == 0 {
                    want -= 0.5 * grad[0] / (1e3 * f);
                }
                assert!((m[(p_, q_)] - want).abs() <= 1e-13 * want.abs().max(1e-30), "{p_}{q_}");
            }
        }
    }

    #[test]
    fn direct_form_matches_matrix() {
        let p = params(4, 2, vec![]);
        let l = [30.0, 2.0, 0.5, -0.02];
        let xi = [C64::new(0.3, -0.1), C64::new(1.0, 0.2), C64::new(-0.4, 0.9), C64::new(0.05, 0.0)];
        let a = evaluate_form(&l, &p, &xi).unwrap();
        let b = margin_form_direct(&l, &p, &xi).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
    }

    #[test]
    fn preconditions() {
        let p = params(3, 2, vec![]);
        assert!(matches!(min_margin(&[1.0, 2.0, 0.0], &p), Err(Error::NotSorted)));
        assert!(matches!(min_margin(&[10.0, 1.0, -1.0], &p), Err(Error::DynamicPshViolated(_))));
        assert!(matches!(min_margin(&[1.0, 0.0, -0.0005], &p), Err(Error::NotInCone { .. })));
    }

    #[test]
    fn minimizer_reproduces_margin() {
        let p = params(5, 3, vec![]);
        let l = [1e4, 3.0, 1.0, 0.5, -0.1];
        let r = min_margin(&l, &p).unwrap();
        let back = evaluate_form(&l, &p, &r.minimizer_complex()).unwrap();
        assert!((back - r.min_margin).abs() <= 1e-9 * r.min_margin.abs());
    }

    #[test]
    fn cancelling_tail_is_resolved() {
        // sigma_3 = 1 with lambda_3 ~ -lambda_4; the margin matrix has entries
        // near 1e21 and smallest eigenvalue 6.605192557e-12 (80-digit
        // reference evaluation)
        let p = params(4, 3, vec![]);
        let l = [455252.59461447847, 312137.11756300234, 0.0011462406613306872, -0.0011462406471981672];
        let r = min_margin(&l, &p).unwrap();
        assert!(r.certified);
        assert!((r.min_margin - 6.605192557e-12).abs() <= 1e-9 * 6.605192557e-12, "{}", r.min_margin);
        assert!((r.level - 1.0).abs() < 1e-6);
        let back = evaluate_form_hp(&l, &p, &r.minimizer_hp).unwrap();
        assert!((back - r.min_margin).abs() <= 1e-9 * r.min_margin, "{back}");
        // the double-precision matrix cannot see it
        let m = margin_matrix_f(&l, &p).unwrap();
        assert!(m.norm() > 1e20);
    }

    #[test]
    fn claims_on_positive_vector() {
        let c = claims_report(&[1.0, 1.0, 1.0, 1.0], 2, 1e-3).unwrap();
        assert!(!c.sit2);
        assert!(!sit2_predicate(&[1.0, 1.0, 1.0], 2).unwrap());
        assert_eq!(c.ell, 4);
        assert!(claims_report(&[2.0, 1.0, 1.0], 2, 1e-3).is_err());
    }
}
