//! Newton quotients `q_k = sigma_k / sigma_{k-1}` and their exclusion
//! variants, with closed-form Hessians and the concavity inequalities built
//! on them.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::cones::in_gamma_k;
use crate::linalg::{hermitian_form_real, jacobi_eigen};
use crate::symfun::{sigma_excluding, Residual};
use crate::{Error, Result, C64};

/// Denominators at or below this magnitude are treated as zero.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

fn union(excluded: &[usize], extra: &[usize]) -> Vec<usize> {
    let mut v = excluded.to_vec();
    v.extend_from_slice(extra);
    v
}

/// `q_{k;I} = s_{k;I} / s_{k-1;I}`.
pub fn q_excluding(x: &[f64], k: usize, excluded: &[usize]) -> Result<f64> {
    let den = sigma_excluding(x, k as isize - 1, excluded);
    if den.abs() <= DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(sigma_excluding(x, k as isize, excluded) / den)
}

pub fn q(x: &[f64], k: usize) -> Result<f64> {
    q_excluding(x, k, &[])
}

/// Hessian matrix of `x -> q_{k;I}(x)`. Rows and columns of excluded
/// indices vanish.
///
/// With `A = s_{k;I}` and `B = s_{k-1;I}`:
/// `q_ij = A_ij/B - (A_i B_j + A_j B_i)/B^2 - A B_ij/B^2 + 2 A B_i B_j/B^3`.
pub fn quotient_hessian(x: &[f64], k: usize, excluded: &[usize]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let k = k as isize;
    let a = sigma_excluding(x, k, excluded);
    let b = sigma_excluding(x, k - 1, excluded);
    if b.abs() <= DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator(b));
    }
    let active: Vec<bool> = (0..n).map(|i| !excluded.contains(&i)).collect();
    let ai: Vec<f64> = (0..n)
        .map(|i| if active[i] { sigma_excluding(x, k - 1, &union(excluded, &[i])) } else { 0.0 })
        .collect();
    let bi: Vec<f64> = (0..n)
        .map(|i| if active[i] { sigma_excluding(x, k - 2, &union(excluded, &[i])) } else { 0.0 })
        .collect();
    let mut h = DMatrix::zeros(n, n);
    let b2 = b * b;
    let b3 = b2 * b;
    for i in 0..n {
        if !active[i] {
            continue;
        }
        for j in i..n {
            if !active[j] {
                continue;
            }
            let (aij, bij) = if i == j {
                (0.0, 0.0)
            } else {
                let ex = union(excluded, &[i, j]);
                (sigma_excluding(x, k - 2, &ex), sigma_excluding(x, k - 3, &ex))
            };
            let v = aij / b - (ai[i] * bi[j] + ai[j] * bi[i]) / b2 - a * bij / b2
                + 2.0 * a * bi[i] * bi[j] / b3;
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// Gradient of `q_{k;I}`: `(A_i B - A B_i) / B^2`.
pub fn quotient_gradient(x: &[f64], k: usize, excluded: &[usize]) -> Result<Vec<f64>> {
    let n = x.len();
    let k = k as isize;
    let a = sigma_excluding(x, k, excluded);
    let b = sigma_excluding(x, k - 1, excluded);
    if b.abs() <= DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator(b));
    }
    Ok((0..n)
        .map(|i| {
            if excluded.contains(&i) {
                return 0.0;
            }
            let ex = union(excluded, &[i]);
            (sigma_excluding(x, k - 1, &ex) * b - a * sigma_excluding(x, k - 2, &ex)) / (b * b)
        })
        .collect())
}

fn require_cone(x: &[f64], k: usize) -> Result<()> {
    in_gamma_k(x, k)?.into_result(k).map(|_| ())
}

fn check_direction(x: &[f64], xi: &[C64]) -> Result<()> {
    if xi.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: xi.len() });
    }
    Ok(())
}

/// `sum_ij (d^2 q_k / dx_i dx_j) xi_i conj(xi_j)` for `x` in `Gamma_k`.
pub fn hess_form_q(x: &[f64], k: usize, xi: &[C64]) -> Result<f64> {
    check_direction(x, xi)?;
    require_cone(x, k)?;
    hess_form_q_excluding(x, k, &[], xi)
}

/// Same form for `q_{k;I}`, without a cone check (the denominator must
/// still be nonzero).
pub fn hess_form_q_excluding(x: &[f64], k: usize, excluded: &[usize], xi: &[C64]) -> Result<f64> {
    check_direction(x, xi)?;
    let h = quotient_hessian(x, k, excluded)?;
    Ok(hermitian_form_real(&h, xi))
}

/// Largest eigenvalue of the Hessian of `q_k` and the magnitude scale it
/// should be compared against (largest absolute entry).
pub fn quotient_max_eigenvalue(x: &[f64], k: usize) -> Result<(f64, f64)> {
    require_cone(x, k)?;
    let h = quotient_hessian(x, k, &[])?;
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eig = jacobi_eigen(&h);
    Ok((eig.values[eig.values.len() - 1], scale))
}

/// Defect of `-d d q_2 = sum_i |xi_i - (x_i/s_1) s_1(xi)|^2 / s_1`, relative
/// to `|xi|^2 / s_1` plus the size of both sides.
pub fn lemma23_equality_residual(x: &[f64], xi: &[C64]) -> Result<Residual> {
    check_direction(x, xi)?;
    let s1: f64 = x.iter().sum();
    if !(s1 > 0.0) {
        return Err(Error::Precondition("s_1(x) must be positive"));
    }
    let lhs = -hess_form_q_excluding(x, 2, &[], xi)?;
    let s1xi: C64 = xi.iter().sum();
    let rhs: f64 = x
        .iter()
        .zip(xi)
        .map(|(&xv, &z)| (z - s1xi * (xv / s1)).norm_sqr())
        .sum::<f64>()
        / s1;
    let size: f64 = xi.iter().map(|z| z.norm_sqr()).sum::<f64>() / s1;
    Ok(Residual::new(lhs, rhs, size + lhs.abs() + rhs.abs()))
}

/// Both sides of the recursion inequality and their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionMargin {
    /// `d d q_{k+1}`.
    pub lhs: f64,
    /// `sum_i x_i^2 d d q_{k;i} / ((k+1) (q_{k;i} + x_i)^2)`.
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    /// Sum of magnitudes of all terms.
    pub scale: f64,
}

/// The recursion `d d q_{k+1} <= sum_i x_i^2 d d q_{k;i} / ((k+1)(q_{k;i}+x_i)^2)`,
/// checked on `x` in `Gamma_{k+1}`.
pub fn lemma23_recursion_margin(x: &[f64], k: usize, xi: &[C64]) -> Result<RecursionMargin> {
    check_direction(x, xi)?;
    let n = x.len();
    if k == 0 || k + 1 > n {
        return Err(Error::DegreeOutOfRange { k, n });
    }
    require_cone(x, k + 1)?;
    let lhs = hess_form_q_excluding(x, k + 1, &[], xi)?;
    let mut rhs = 0.0;
    let mut scale = lhs.abs();
    for i in 0..n {
        // q_{k;i} + x_i = s_k / s_{k-1;i}
        let denom = sigma_excluding(x, k as isize, &[]) / sigma_excluding(x, k as isize - 1, &[i]);
        let form = hess_form_q_excluding(x, k, &[i], xi)?;
        let term = x[i] * x[i] * form / ((k as f64 + 1.0) * denom * denom);
        rhs += term;
        scale += term.abs();
    }
    Ok(RecursionMargin { lhs, rhs, margin: rhs - lhs, scale })
}

/// Component of `v` orthogonal (Hermitian inner product) to the real vector `x`.
fn orthogonal_part(v: &[C64], x: &[f64]) -> Vec<C64> {
    let xx: f64 = x.iter().map(|a| a * a).sum();
    if xx == 0.0 {
        return v.to_vec();
    }
    let c: C64 = v.iter().zip(x).map(|(z, &a)| z * a).sum::<C64>() / xx;
    v.iter().zip(x).map(|(z, &a)| z - c * a).collect()
}

/// `(lhs, rhs_unit)` where `lhs = -s_{k-1} d d q_k` and
/// `rhs_unit = sum_{j<k-1} prod_{i != j, i < k-1} x_i * |[xi]^perp_{S_j}|^2`
/// with `S_j = {0..k-2} \ {j}` the zeroed slots.
pub fn chain_bound_terms(x: &[f64], k: usize, xi: &[C64]) -> Result<(f64, f64)> {
    check_direction(x, xi)?;
    if k < 3 {
        return Err(Error::InvalidParameter("the chained bound needs k >= 3"));
    }
    if !x.windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    require_cone(x, k)?;
    let skm1 = sigma_excluding(x, k as isize - 1, &[]);
    let lhs = -skm1 * hess_form_q_excluding(x, k, &[], xi)?;
    let mut rhs = 0.0;
    for j in 0..(k - 1) {
        let prod: f64 = (0..(k - 1)).filter(|&i| i != j).map(|i| x[i]).product();
        let zeroed: Vec<usize> = (0..(k - 1)).filter(|&i| i != j).collect();
        let xs: Vec<f64> = (0..x.len()).map(|i| if zeroed.contains(&i) { 0.0 } else { x[i] }).collect();
        let vs: Vec<C64> =
            (0..x.len()).map(|i| if zeroed.contains(&i) { C64::new(0.0, 0.0) } else { xi[i] }).collect();
        let perp = orthogonal_part(&vs, &xs);
        rhs += prod * perp.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok((lhs, rhs))
}

pub fn chain_bound_margin(x: &[f64], k: usize, xi: &[C64], c: f64) -> Result<f64> {
    let (lhs, rhs) = chain_bound_terms(x, k, xi)?;
    Ok(lhs - c * rhs)
}

/// Sets the first entry of `zeta` to zero and projects the tail
/// `zeta_k..zeta_n` (0-based `k-1..n`) onto the Hermitian orthogonal
/// complement of `x_k..x_n`. A zero tail of `x` leaves `zeta` unprojected.
pub fn project_tail(x: &[f64], k: usize, zeta: &[C64]) -> Vec<C64> {
    let mut out = zeta.to_vec();
    out[0] = C64::new(0.0, 0.0);
    let t = k - 1;
    let tail = orthogonal_part(&out[t..], &x[t..]);
    out[t..].copy_from_slice(&tail);
    out
}

/// `(lhs, rhs_unit, projected zeta)` for the bound on directions with
/// `zeta_1 = 0` and tail orthogonal to the tail of `x`:
/// `lhs = -s_{k-1} d d q_k`,
/// `rhs_unit = x_1..x_{k-1} x_k^2 sum_{j=2}^{k-1} |zeta_j|^2/x_j^3 + x_1..x_{k-2} sum_{p>=k} |zeta_p|^2`.
pub fn lemma24_terms(x: &[f64], k: usize, zeta_raw: &[C64]) -> Result<(f64, f64, Vec<C64>)> {
    check_direction(x, zeta_raw)?;
    if k < 2 {
        return Err(Error::InvalidParameter("the bound needs k >= 2"));
    }
    if !x.windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    require_cone(x, k)?;
    let zeta = project_tail(x, k, zeta_raw);
    let skm1 = sigma_excluding(x, k as isize - 1, &[]);
    let lhs = -skm1 * hess_form_q_excluding(x, k, &[], &zeta)?;
    let head: f64 = x[..k - 1].iter().product::<f64>() * x[k - 1] * x[k - 1];
    let mut middle = 0.0;
    for j in 1..(k - 1) {
        middle += zeta[j].norm_sqr() / (x[j] * x[j] * x[j]);
    }
    let short: f64 = x[..k - 2].iter().product();
    let tail: f64 = zeta[k - 1..].iter().map(|z| z.norm_sqr()).sum();
    Ok((lhs, head * middle + short * tail, zeta))
}

pub fn lemma24_margin(x: &[f64], k: usize, zeta_raw: &[C64], c: f64) -> Result<f64> {
    let (lhs, rhs, _) = lemma24_terms(x, k, zeta_raw)?;
    Ok(lhs - c * rhs)
}

/// Real unit basis vector `e_i` as a complex direction.
pub fn unit_direction(n: usize, i: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[i] = C64::new(1.0, 0.0);
    v
}
