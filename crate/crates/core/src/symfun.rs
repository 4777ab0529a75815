//! Elementary symmetric polynomials `sigma_k`, their exclusion variants
//! `s_{k;I}` (entries in `I` set to zero) and derivative tensors.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// A finite eigenvalue vector, optionally known to be sorted in
/// decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    sorted_desc: bool,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooShort(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let sorted_desc = values.windows(2).all(|w| w[0] >= w[1]);
        Ok(Self { values, sorted_desc })
    }

    /// Like [`Spectrum::new`] but rejects input that is not already
    /// non-increasing.
    pub fn sorted(values: Vec<f64>) -> Result<Self> {
        let s = Self::new(values)?;
        if !s.sorted_desc {
            return Err(Error::NotSorted);
        }
        Ok(s)
    }

    pub fn is_sorted_desc(&self) -> bool {
        self.sorted_desc
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Multiplies every entry by `t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * t).collect())
    }
}

impl Deref for Spectrum {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// `sigma_0, ..., sigma_K` of one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTable {
    sigmas: Vec<f64>,
}

impl SymTable {
    /// Highest degree stored.
    pub fn max_degree(&self) -> usize {
        self.sigmas.len() - 1
    }

    /// `sigma_j`; zero for negative `j` or `j` above the stored range
    /// (the stored range always covers every `j <= n` that was asked for).
    pub fn get(&self, j: isize) -> f64 {
        if j < 0 {
            return 0.0;
        }
        self.sigmas.get(j as usize).copied().unwrap_or(0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sigmas
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    // Veltkamp split; inputs here are far below the overflow threshold.
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

#[inline]
pub(crate) fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

/// Runs the product recurrence `e_j <- e_j + x_i e_{j-1}` over the entries
/// of `x` whose index is not in `excluded`. Each `e_j` is carried as an
/// unevaluated sum `hi + lo`.
fn recurrence(x: &[f64], excluded: &[usize], max_degree: usize) -> Vec<f64> {
    let mut hi = vec![0.0; max_degree + 1];
    let mut lo = vec![0.0; max_degree + 1];
    hi[0] = 1.0;
    let mut seen = 0usize;
    for (i, &xi) in x.iter().enumerate() {
        if excluded.contains(&i) {
            continue;
        }
        seen += 1;
        let top = seen.min(max_degree);
        for j in (1..=top).rev() {
            let (p, perr) = two_prod(xi, hi[j - 1]);
            let (s, serr) = two_sum(hi[j], p);
            hi[j] = s;
            lo[j] += serr + perr + xi * lo[j - 1];
        }
    }
    hi.iter().zip(&lo).map(|(h, l)| h + l).collect()
}

/// All `sigma_j(x)` for `0 <= j <= max_degree`. Degrees above `n` come out
/// as exact zeros.
pub fn elementary_all(x: &[f64], max_degree: usize) -> SymTable {
    SymTable { sigmas: recurrence(x, &[], max_degree) }
}

/// `sigma_k(x)`, zero for `k < 0` or `k > n`.
pub fn sigma(x: &[f64], k: isize) -> f64 {
    sigma_excluding(x, k, &[])
}

/// `sigma_k` of `x` with the entries at `excluded` removed (equivalently
/// set to zero). Duplicate or out-of-range indices are ignored.
pub fn sigma_excluding(x: &[f64], k: isize, excluded: &[usize]) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as usize;
    let remaining = (0..x.len()).filter(|i| !excluded.contains(i)).count();
    if k > remaining {
        return 0.0;
    }
    recurrence(x, excluded, k)[k]
}

/// Gradient of `sigma_k`: component `i` is `s_{k-1;i}`.
pub fn grad_sigma(x: &[f64], k: usize) -> Vec<f64> {
    (0..x.len())
        .map(|i| sigma_excluding(x, k as isize - 1, &[i]))
        .collect()
}

/// Hessian of `sigma_k`: off-diagonal `(p, q)` is `s_{k-2;pq}`, the
/// diagonal vanishes because `sigma_k` is affine in each variable.
pub fn hess_sigma(x: &[f64], k: usize) -> DMatrix<f64> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in (p + 1)..n {
            let v = sigma_excluding(x, k as isize - 2, &[p, q]);
            h[(p, q)] = v;
            h[(q, p)] = v;
        }
    }
    h
}

/// Decreasing rearrangement. `perm[i]` is the input index that landed in
/// output slot `i`; ties keep their original order.
pub fn rearrange_desc(x: &Spectrum) -> (Spectrum, Vec<usize>) {
    let mut perm: Vec<usize> = (0..x.len()).collect();
    // entries are finite, so the comparison is total
    perm.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap_or(core::cmp::Ordering::Equal));
    let values = perm.iter().map(|&i| x[i]).collect();
    (Spectrum { values, sorted_desc: true }, perm)
}

/// Absolute and scale-relative size of an identity's defect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub abs: f64,
    pub rel: f64,
}

impl Residual {
    /// `scale` is the sum of magnitudes of the terms that entered the
    /// identity; the relative residual is `abs / max(scale, tiny)`.
    pub fn new(lhs: f64, rhs: f64, scale: f64) -> Self {
        let abs = libm::fabs(lhs - rhs);
        Self { abs, rel: abs / scale.max(f64::MIN_POSITIVE) }
    }
}

/// Defects of the classical identities for one `(x, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// `s_k - s_{k;i} - x_i s_{k-1;i}` for every `i`.
    pub splitting: Vec<Residual>,
    /// `sum_i s_{k;i} - (n-k) s_k`.
    pub exclusion_sum: Residual,
    /// `sum_i s_{k-1;i} x_i - k s_k`.
    pub euler: Residual,
    /// `sum_i s_{k-1;i} x_i^2 - (s_1 s_k - (k+1) s_{k+1})`.
    pub square_weighted: Residual,
}

impl IdentityReport {
    pub fn max_rel(&self) -> f64 {
        self.splitting
            .iter()
            .chain([&self.exclusion_sum, &self.euler, &self.square_weighted])
            .map(|r| r.rel)
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.splitting
            .iter()
            .chain([&self.exclusion_sum, &self.euler, &self.square_weighted])
            .map(|r| r.abs)
            .fold(0.0, f64::max)
    }
}

pub fn check_identities(x: &[f64], k: usize) -> Result<IdentityReport> {
    let n = x.len();
    if k == 0 || k > n {
        return Err(Error::DegreeOutOfRange { k, n });
    }
    let ki = k as isize;
    let table = elementary_all(x, k + 1);
    let sk = table.get(ki);
    let excl_k: Vec<f64> = (0..n).map(|i| sigma_excluding(x, ki, &[i])).collect();
    let excl_km1: Vec<f64> = (0..n).map(|i| sigma_excluding(x, ki - 1, &[i])).collect();

    let splitting = (0..n)
        .map(|i| {
            let t = x[i] * excl_km1[i];
            Residual::new(sk, excl_k[i] + t, libm::fabs(sk) + libm::fabs(excl_k[i]) + libm::fabs(t))
        })
        .collect();

    let nk = (n - k) as f64;
    let sum_excl: f64 = excl_k.iter().sum();
    let scale_excl: f64 = excl_k.iter().map(|v| libm::fabs(*v)).sum::<f64>() + nk * libm::fabs(sk);
    let exclusion_sum = Residual::new(sum_excl, nk * sk, scale_excl);

    let terms: Vec<f64> = (0..n).map(|i| excl_km1[i] * x[i]).collect();
    let scale_euler = terms.iter().map(|v| libm::fabs(*v)).sum::<f64>() + k as f64 * libm::fabs(sk);
    let euler = Residual::new(terms.iter().sum(), k as f64 * sk, scale_euler);

    let sq: Vec<f64> = (0..n).map(|i| excl_km1[i] * x[i] * x[i]).collect();
    let s1 = table.get(1);
    let sk1 = table.get(ki + 1);
    let rhs = s1 * sk - (k as f64 + 1.0) * sk1;
    let scale_sq = sq.iter().map(|v| libm::fabs(*v)).sum::<f64>()
        + libm::fabs(s1 * sk)
        + (k as f64 + 1.0) * libm::fabs(sk1);
    let square_weighted = Residual::new(sq.iter().sum(), rhs, scale_sq);

    Ok(IdentityReport { splitting, exclusion_sum, euler, square_weighted })
}
