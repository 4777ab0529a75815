//! The sum-of-Hessian operator `F(lambda) = sigma_k(lambda) + sum_s b_s sigma_{k-s}(lambda)`.
//!
//! When `P(t) = t^m + sum_s (-1)^s b_s t^{m-s}` has real roots `y`, the
//! operator equals `sigma_k` of the lifted vector `(lambda, y)` in dimension
//! `n + m`, and every derivative is read off the lifted vector.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::cones::in_gamma_k;
use crate::linalg::{hermitian_defect, jacobi_eigen, monic_roots, HERMITIAN_TOL};
use crate::symfun::{elementary_all, sigma, sigma_excluding};
use crate::{Error, Result, C64};

/// A root is accepted as real when its imaginary part is at most
/// `REALNESS_TOL * (1 + |root|)`.
pub const REALNESS_TOL: f64 = 1e-9;
/// Allowed relative mismatch between `sigma_s(y)` and `b_s`.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-9;

/// Real roots of `P`, sorted in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct RealRoots {
    pub roots: Vec<f64>,
    /// Largest imaginary part the companion eigensolver produced.
    pub max_imag: f64,
    /// True when the companion eigenvalues alone did not pass the realness
    /// test and the Hankel power-sum test had to certify real-rootedness
    /// (clustered roots).
    pub borderline: bool,
}

/// Newton power sums `p_0..p_{2m-2}` of the roots of `P` from its
/// elementary symmetric values `b`.
fn power_sums(b: &[f64], count: usize) -> Vec<f64> {
    let m = b.len();
    let e = |i: usize| if i == 0 { 1.0 } else if i <= m { b[i - 1] } else { 0.0 };
    let mut p = alloc::vec![0.0; count];
    p[0] = m as f64;
    for j in 1..count {
        let mut acc = 0.0;
        let mut sign = 1.0;
        for i in 1..j {
            acc += sign * e(i) * p[j - i];
            sign = -sign;
        }
        acc += sign * j as f64 * e(j);
        p[j] = acc;
    }
    p
}

/// Real-rootedness through the Hankel matrix of power sums, which is
/// positive semidefinite exactly when all roots are real.
fn hankel_real_rooted(b: &[f64]) -> bool {
    let m = b.len();
    let p = power_sums(b, 2 * m - 1);
    let h = DMatrix::from_fn(m, m, |i, j| p[i + j]);
    let eig = jacobi_eigen(&h);
    let top = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    eig.values[0] >= -1e-9 * top.max(1.0)
}

/// Roots of `P(t) = t^m + sum_s (-1)^s b_s t^{m-s}`.
pub fn roots_of_p(b: &[f64]) -> Result<RealRoots> {
    let m = b.len();
    if m == 0 {
        return Err(Error::InvalidParameter("roots_of_p needs at least one coefficient"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("coefficients must be finite"));
    }
    let coeffs: Vec<f64> = b
        .iter()
        .enumerate()
        .map(|(i, &bs)| if i % 2 == 0 { -bs } else { bs })
        .collect();
    let raw = monic_roots(&coeffs);
    let max_imag = raw.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let plainly_real = raw.iter().all(|z| z.im.abs() <= REALNESS_TOL * (1.0 + crate::linalg::cabs(*z)));
    let borderline = !plainly_real;
    if borderline && !hankel_real_rooted(b) {
        return Err(Error::NotRealRooted(max_imag));
    }
    let mut roots: Vec<f64> = raw.iter().map(|z| z.re).collect();
    roots.sort_by(|a, c| c.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let table = elementary_all(&roots, m);
    let mut worst = 0.0f64;
    for (s, &bs) in b.iter().enumerate() {
        let got = table.get(s as isize + 1);
        worst = worst.max((got - bs).abs() / (1.0 + bs.abs()));
    }
    if worst > ROOT_RESIDUAL_TOL {
        return Err(Error::RootResidual(worst));
    }
    Ok(RealRoots { roots, max_imag, borderline })
}

/// Validated operator data `(n, k, b)` together with the real roots `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianSumSpec {
    n: usize,
    k: usize,
    b: Vec<f64>,
    y: Vec<f64>,
    borderline_roots: bool,
}

/// `lambda` followed by the roots `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSpectrum {
    pub n: usize,
    pub combined: Vec<f64>,
}

impl LiftedSpectrum {
    pub fn lambda(&self) -> &[f64] {
        &self.combined[..self.n]
    }

    pub fn y(&self) -> &[f64] {
        &self.combined[self.n..]
    }
}

impl HessianSumSpec {
    /// Pure `sigma_k` in dimension `n`.
    pub fn sigma_k(n: usize, k: usize) -> Result<Self> {
        Self::new(n, k, Vec::new())
    }

    pub fn new(n: usize, k: usize, b: Vec<f64>) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::DegreeOutOfRange { k, n });
        }
        if b.len() >= k {
            return Err(Error::InvalidParameter("need m < k lower-order terms"));
        }
        let (y, borderline_roots) = if b.is_empty() {
            (Vec::new(), false)
        } else {
            let r = roots_of_p(&b)?;
            (r.roots, r.borderline)
        };
        Ok(Self { n, k, b, y, borderline_roots })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn borderline_roots(&self) -> bool {
        self.borderline_roots
    }

    fn check_len(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: lambda.len() });
        }
        Ok(())
    }

    pub fn lift(&self, lambda: &[f64]) -> LiftedSpectrum {
        let mut combined = Vec::with_capacity(lambda.len() + self.y.len());
        combined.extend_from_slice(lambda);
        combined.extend_from_slice(&self.y);
        LiftedSpectrum { n: lambda.len(), combined }
    }

    /// `sigma_k(lambda) + sum_s b_s sigma_{k-s}(lambda)` evaluated directly.
    pub fn value(&self, lambda: &[f64]) -> Result<f64> {
        self.check_len(lambda)?;
        let t = elementary_all(lambda, self.k);
        let k = self.k as isize;
        let mut v = t.get(k);
        for (s, bs) in self.b.iter().enumerate() {
            v += bs * t.get(k - s as isize - 1);
        }
        Ok(v)
    }

    /// `sigma_k^{(n+m)}(lambda, y)`.
    pub fn lifted_value(&self, lambda: &[f64]) -> Result<f64> {
        self.check_len(lambda)?;
        if self.y.is_empty() {
            return Ok(sigma(lambda, self.k as isize));
        }
        Ok(sigma(&self.lift(lambda).combined, self.k as isize))
    }

    /// Relative gap between [`Self::value`] and [`Self::lifted_value`].
    pub fn lift_discrepancy(&self, lambda: &[f64]) -> Result<f64> {
        let a = self.value(lambda)?;
        let b = self.lifted_value(lambda)?;
        Ok((a - b).abs() / (1.0 + b.abs()))
    }

    /// `F_i = s_{k-1;i}` of the lifted vector, `i < n`.
    pub fn grad(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check_len(lambda)?;
        let lifted = self.lift(lambda);
        let k = self.k as isize;
        Ok((0..self.n).map(|i| sigma_excluding(&lifted.combined, k - 1, &[i])).collect())
    }

    /// `F_ij = s_{k-2;ij}` of the lifted vector off the diagonal, zero on it.
    pub fn hess(&self, lambda: &[f64]) -> Result<DMatrix<f64>> {
        self.check_len(lambda)?;
        let lifted = self.lift(lambda);
        let k = self.k as isize;
        let mut h = DMatrix::zeros(self.n, self.n);
        for p in 0..self.n {
            for q in (p + 1)..self.n {
                let v = sigma_excluding(&lifted.combined, k - 2, &[p, q]);
                h[(p, q)] = v;
                h[(q, p)] = v;
            }
        }
        Ok(h)
    }

    /// `(lambda, y)` lies in `Gamma_k^{n+m}`.
    pub fn lifted_member(&self, lambda: &[f64]) -> Result<bool> {
        self.check_len(lambda)?;
        Ok(in_gamma_k(&self.lift(lambda).combined, self.k)?.member)
    }

    pub fn admissibility(&self, lambda: &[f64]) -> Result<Admissibility> {
        let lifted_member = self.lifted_member(lambda)?;
        let condition1 = lifted_member && self.y.iter().all(|&v| v >= 0.0);
        let lower = if self.k >= 2 { in_gamma_k(lambda, self.k - 1)?.member } else { true };
        let condition2 = lower && self.b.iter().all(|&v| v >= 0.0);
        let f = self.value(lambda)?;
        let implication_holds = !(condition2 && f > 0.0) || lifted_member;
        Ok(Admissibility { condition1, condition2, lifted_member, value: f, implication_holds })
    }

    /// Second derivative of `g -> F(lambda(g))` at `g = diag(lambda)` in the
    /// Hermitian direction `eta`:
    /// `sum_ij F_ij eta_ii eta_jj + sum_{p != q} R_pq |eta_pq|^2`
    /// with the divided difference `R_pq = (F_p - F_q)/(lambda_p - lambda_q)`
    /// taken in its closed form `-s_{k-2;pq}` of the lifted vector.
    pub fn contraction_second_derivative(&self, lambda: &[f64], eta: &DMatrix<C64>) -> Result<f64> {
        self.check_len(lambda)?;
        if eta.nrows() != self.n || eta.ncols() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: eta.nrows() });
        }
        let defect = hermitian_defect(eta);
        if defect > HERMITIAN_TOL {
            return Err(Error::NonHermitianInput(defect));
        }
        let h = self.hess(lambda)?;
        let mut total = 0.0;
        for p in 0..self.n {
            for q in 0..self.n {
                if p == q {
                    continue;
                }
                total += h[(p, q)] * eta[(p, p)].re * eta[(q, q)].re;
                total -= h[(p, q)] * eta[(p, q)].norm_sqr();
            }
        }
        Ok(total)
    }

    /// The divided difference `(F_p - F_q)/(lambda_p - lambda_q)` in closed form.
    pub fn divided_difference(&self, lambda: &[f64], p: usize, q: usize) -> Result<f64> {
        self.check_len(lambda)?;
        let lifted = self.lift(lambda);
        Ok(-sigma_excluding(&lifted.combined, self.k as isize - 2, &[p, q]))
    }
}

/// Which admissibility conditions hold at one `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    /// `(lambda, y)` in the lifted cone and every root nonnegative.
    pub condition1: bool,
    /// `lambda` in `Gamma_{k-1}` and every coefficient nonnegative.
    pub condition2: bool,
    pub lifted_member: bool,
    pub value: f64,
    /// `condition2 && F > 0` implies lifted membership.
    pub implication_holds: bool,
}
