//! Binary floating point with an arbitrary-size mantissa, and a cyclic
//! Jacobi eigensolver on top of it.
//!
//! A value is `m * 2^e`. Sums, differences and products are exact; rounding
//! happens only in [`BigFloat::round`], [`BigFloat::div`] and
//! [`BigFloat::sqrt`], each to a requested number of mantissa bits. Every
//! finite `f64` converts exactly, so polynomial expressions in `f64` inputs
//! can be evaluated without any error.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_bigint::{BigInt, Sign};
use num_traits::float::FloatCore;
use num_traits::{Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BigFloat {
    m: BigInt,
    e: i64,
}

impl BigFloat {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Exact conversion. Non-finite inputs are not representable.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        let (mant, exp, sign) = FloatCore::integer_decode(x);
        let m = BigInt::from(mant);
        Some(Self { m: if sign < 0 { -m } else { m }, e: exp as i64 })
    }

    pub fn from_i64(v: i64) -> Self {
        Self { m: BigInt::from(v), e: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn signum(&self) -> i32 {
        match self.m.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        Self { m: self.m.abs(), e: self.e }
    }

    pub fn neg(&self) -> Self {
        Self { m: -&self.m, e: self.e }
    }

    /// `floor(log2 |x|)`, or `None` for zero.
    pub fn exponent(&self) -> Option<i64> {
        (!self.is_zero()).then(|| self.e + self.m.bits() as i64 - 1)
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        match self.e.cmp(&other.e) {
            Ordering::Equal => Self { m: &self.m + &other.m, e: self.e },
            Ordering::Less => Self { m: &self.m + (&other.m << (other.e - self.e) as usize), e: self.e },
            Ordering::Greater => Self { m: (&self.m << (self.e - other.e) as usize) + &other.m, e: other.e },
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { m: &self.m * &other.m, e: self.e + other.e }
    }

    /// Multiplication by `2^k`.
    pub fn ldexp(&self, k: i64) -> Self {
        Self { m: self.m.clone(), e: self.e + k }
    }

    /// Rounds to at most `prec` mantissa bits (to nearest, ties away from zero).
    pub fn round(&self, prec: u32) -> Self {
        let bits = self.m.bits();
        if bits <= prec as u64 {
            return self.clone();
        }
        let shift = (bits - prec as u64) as usize;
        let mag = self.m.magnitude();
        let rounded = (mag + (num_bigint::BigUint::from(1u8) << (shift - 1))) >> shift;
        let m = BigInt::from_biguint(if self.m.is_negative() { Sign::Minus } else { Sign::Plus }, rounded);
        Self { m, e: self.e + shift as i64 }
    }

    /// Rounded sum that skips the huge shift when one operand is far below
    /// the rounding unit of the other.
    pub fn add_r(&self, other: &Self, prec: u32) -> Self {
        match (self.exponent(), other.exponent()) {
            (Some(a), Some(b)) if a > b + prec as i64 + 2 => self.round(prec),
            (Some(a), Some(b)) if b > a + prec as i64 + 2 => other.round(prec),
            _ => self.add(other).round(prec),
        }
    }

    pub fn sub_r(&self, other: &Self, prec: u32) -> Self {
        self.add_r(&other.neg(), prec)
    }

    pub fn mul_r(&self, other: &Self, prec: u32) -> Self {
        self.mul(other).round(prec)
    }

    /// `self / other` to `prec` bits; `None` when `other` is zero.
    pub fn div(&self, other: &Self, prec: u32) -> Option<Self> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let s = (prec as i64 + other.m.bits() as i64 - self.m.bits() as i64 + 2).max(0);
        let q = (&self.m << s as usize) / &other.m;
        Some(Self { m: q, e: self.e - other.e - s }.round(prec))
    }

    /// Square root to `prec` bits; `None` for negative input.
    pub fn sqrt(&self, prec: u32) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let mut s = (2 * prec as i64 - self.m.bits() as i64 + 2).max(0);
        if (self.e - s).rem_euclid(2) != 0 {
            s += 1;
        }
        let r = (&self.m << s as usize).sqrt();
        Some(Self { m: r, e: (self.e - s) / 2 }.round(prec))
    }

    pub fn is_negative(&self) -> bool {
        self.m.is_negative()
    }

    pub fn cmp_value(&self, other: &Self) -> Ordering {
        self.sub(other).signum().cmp(&0)
    }

    /// Nearest `f64` (up to one extra rounding); overflows to infinity.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.m.bits();
        let shift = bits.saturating_sub(64) as usize;
        let top = (self.m.magnitude() >> shift).to_u64().unwrap_or(u64::MAX) as f64;
        let v = libm::ldexp(top, (self.e + shift as i64).clamp(i32::MIN as i64, i32::MAX as i64) as i32);
        if self.is_negative() {
            -v
        } else {
            v
        }
    }
}

/// Exact elementary symmetric polynomial `sigma_k(x)`.
pub fn sigma_exact(x: &[BigFloat], k: usize) -> BigFloat {
    if k > x.len() {
        return BigFloat::zero();
    }
    let mut e = vec![BigFloat::zero(); k + 1];
    e[0] = BigFloat::from_i64(1);
    for v in x {
        for j in (1..=k).rev() {
            let t = e[j - 1].mul(v);
            e[j] = e[j].add(&t);
        }
    }
    e.swap_remove(k)
}

/// Eigen-decomposition of a symmetric matrix in `BigFloat` arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct BigEigen {
    pub n: usize,
    /// Eigenvalues in increasing order.
    pub values: Vec<BigFloat>,
    /// Unit eigenvectors, `vectors[j]` belongs to `values[j]`.
    pub vectors: Vec<Vec<BigFloat>>,
    /// Bound on the distance of every computed eigenvalue to an exact one.
    pub error_bound: f64,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 60;

/// `log2` of the Frobenius norm, `None` for the zero matrix.
pub fn frobenius_log2(a: &[BigFloat]) -> Option<f64> {
    let top = a.iter().filter_map(|v| v.exponent()).max()?;
    let sum: f64 = a.iter().map(|v| libm::pow(v.ldexp(-top).to_f64(), 2.0)).sum();
    Some(top as f64 + 0.5 * libm::log2(sum))
}

/// Cyclic Jacobi on the row-major symmetric `n x n` matrix `a` with every
/// operation rounded to `prec` bits.
pub fn jacobi_big(a: &[BigFloat], n: usize, prec: u32) -> BigEigen {
    let mut a: Vec<BigFloat> = a.iter().map(|v| v.round(prec)).collect();
    let mut v: Vec<BigFloat> = (0..n * n).map(|i| if i / n == i % n { BigFloat::from_i64(1) } else { BigFloat::zero() }).collect();
    let norm_log2 = frobenius_log2(&a);
    let one = BigFloat::from_i64(1);
    let mut sweeps = 0;
    let mut off_log2 = f64::NEG_INFINITY;
    if let Some(nl) = norm_log2 {
        let stop = nl - prec as f64 + 2.0;
        for sweep in 0..MAX_SWEEPS {
            sweeps = sweep;
            let off: Vec<BigFloat> = (0..n).flat_map(|p| ((p + 1)..n).map(move |q| (p, q))).map(|(p, q)| a[p * n + q].clone()).collect();
            off_log2 = frobenius_log2(&off).unwrap_or(f64::NEG_INFINITY);
            if off_log2 <= stop {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q].clone();
                    if apq.is_zero() || apq.exponent().unwrap() as f64 <= stop - 8.0 {
                        continue;
                    }
                    let theta = a[q * n + q].sub_r(&a[p * n + p], prec).div(&apq.ldexp(1), prec).unwrap();
                    let root = theta.mul_r(&theta, prec).add_r(&one, prec).sqrt(prec).unwrap();
                    let mut t = one.div(&theta.abs().add_r(&root, prec), prec).unwrap();
                    if theta.is_negative() {
                        t = t.neg();
                    }
                    let c = one.div(&t.mul_r(&t, prec).add_r(&one, prec).sqrt(prec).unwrap(), prec).unwrap();
                    let s = t.mul_r(&c, prec);
                    let tapq = t.mul_r(&apq, prec);
                    a[p * n + p] = a[p * n + p].sub_r(&tapq, prec);
                    a[q * n + q] = a[q * n + q].add_r(&tapq, prec);
                    a[p * n + q] = BigFloat::zero();
                    a[q * n + p] = BigFloat::zero();
                    for r in 0..n {
                        if r != p && r != q {
                            let arp = a[r * n + p].clone();
                            let arq = a[r * n + q].clone();
                            let np = c.mul_r(&arp, prec).sub_r(&s.mul_r(&arq, prec), prec);
                            let nq = s.mul_r(&arp, prec).add_r(&c.mul_r(&arq, prec), prec);
                            a[r * n + p] = np.clone();
                            a[p * n + r] = np;
                            a[r * n + q] = nq.clone();
                            a[q * n + r] = nq;
                        }
                        let vrp = v[r * n + p].clone();
                        let vrq = v[r * n + q].clone();
                        v[r * n + p] = c.mul_r(&vrp, prec).sub_r(&s.mul_r(&vrq, prec), prec);
                        v[r * n + q] = s.mul_r(&vrp, prec).add_r(&c.mul_r(&vrq, prec), prec);
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].cmp_value(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i].clone()).collect();
    let vectors = order.iter().map(|&j| (0..n).map(|r| v[r * n + j].clone()).collect()).collect();
    // rounding of the input, per-rotation backward error and the leftover
    // off-diagonal part
    let error_bound = match norm_log2 {
        Some(nl) => {
            let rot = (sweeps.max(1) * n * n) as f64 * 16.0 + 4.0;
            libm::exp2(nl - prec as f64) * rot + libm::exp2(off_log2.max(f64::MIN))
        }
        None => 0.0,
    };
    BigEigen { n, values, vectors, error_bound, sweeps }
}
