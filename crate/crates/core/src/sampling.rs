//! Random points in and near Garding cones.
//!
//! Samplers take any `rand::Rng`; reproducible parallel sweeps derive one
//! generator per sample from [`sample_seed`].

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cones::in_gamma_k;

/// Per-sample seed `hash(seed, index)` (SplitMix64 finalizer over both words).
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(seed.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

fn sort_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
}

/// Uniform point of the box `[lo, hi]^n`, sorted decreasingly.
pub fn sample_box<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    sort_desc(&mut v);
    v
}

/// Positive-orthant point plus a Gaussian perturbation whose width is drawn
/// log-uniformly from `[0.01, 10]`. `None` when the result is outside
/// `Gamma_k` (rejected).
pub fn sample_gaussian_cone<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Option<Vec<f64>> {
    let width = libm::pow(10.0, rng.random_range(-2.0..1.0));
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            let base: f64 = rng.random_range(0.0..1.0);
            let z: f64 = StandardNormal.sample(rng);
            base + width * z
        })
        .collect();
    sort_desc(&mut v);
    match in_gamma_k(&v, k) {
        Ok(m) if m.member => Some(v),
        _ => None,
    }
}

/// Draws from [`sample_gaussian_cone`] until accepted; returns the sample
/// and how many draws it took.
pub fn sample_gaussian_cone_until<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> (Vec<f64>, u32) {
    let mut tries = 0;
    loop {
        tries += 1;
        if let Some(v) = sample_gaussian_cone(rng, n, k) {
            return (v, tries);
        }
    }
}

/// Shifts a cone point `x` along `-(1, ..., 1)` to relative distance `eta`
/// from the boundary of `Gamma_k` (`eta > 0` inside, `eta < 0` outside).
pub fn near_boundary(x: &[f64], k: usize, eta: f64) -> Vec<f64> {
    let shifted = |t: f64| -> Vec<f64> { x.iter().map(|v| v - t).collect() };
    let inside = |t: f64| in_gamma_k(&shifted(t), k).map(|m| m.member).unwrap_or(false);
    // sigma_1 decreases by n per unit shift, so the exit point is bounded.
    let mut lo = 0.0;
    let mut hi = x.iter().sum::<f64>().abs() / x.len() as f64 + 1.0;
    while inside(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    shifted(lo * (1.0 - eta))
}

/// Settings for spectra with a prescribed operator level and a large
/// leading eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSampler {
    pub n: usize,
    pub delta: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Target value of the operator, e.g. `sigma_k(lambda) = 1`.
    pub level: f64,
    /// Tail shape magnitudes are `10^-U(0, decades)`.
    pub decades: f64,
    /// Probability that a tail entry is negative.
    pub negative_fraction: f64,
    /// Probability of [`LevelMode::LastSolve`] per draw.
    pub solve_fraction: f64,
}

impl LevelSampler {
    pub fn new(n: usize, delta: f64, lambda_min: f64, lambda_max: f64) -> Self {
        Self {
            n,
            delta,
            lambda_min,
            lambda_max,
            level: 1.0,
            decades: 6.0,
            negative_fraction: 0.35,
            solve_fraction: 0.5,
        }
    }
}

/// How a level sample was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelMode {
    /// `lambda = L (1, s w)` with the tail scale `s` found by scan and
    /// bisection. Tails end up small against `L`.
    TailScale,
    /// `lambda_1 = L`, the middle entries `L w` and the last entry solved
    /// from the level equation. Reaches tails comparable to `L`, where
    /// large terms cancel.
    LastSolve,
}

impl LevelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LevelMode::TailScale => "tail-scale",
            LevelMode::LastSolve => "last-solve",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSample {
    /// Sorted decreasingly.
    pub lambda: Vec<f64>,
    pub mode: LevelMode,
    /// `lambda[i]` was entry `permutation[i]` before re-sorting; `None`
    /// when the construction was already ordered.
    pub permutation: Option<Vec<usize>>,
}

/// The operator a level sample is drawn for.
pub struct LevelTarget<'a> {
    pub value: &'a dyn Fn(&[f64]) -> f64,
    /// Partial derivative in the last entry. The value must be affine in
    /// each single entry, as every `sum_s b_s sigma_{k-s}` is.
    pub last_slope: &'a dyn Fn(&[f64]) -> f64,
    pub admissible: &'a dyn Fn(&[f64]) -> bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    /// The operator never reaches the target level along the sampled ray,
    /// or the solved entry cannot resolve it.
    NoLevelCrossing,
    /// The level point lies outside the admissible cone.
    Inadmissible,
    /// After re-sorting, the leading entry left `[lambda_min, lambda_max]`.
    OutOfRange,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::NoLevelCrossing => "no-level-crossing",
            Rejection::Inadmissible => "inadmissible",
            Rejection::OutOfRange => "out-of-range",
        }
    }
}

fn tail_shape<R: Rng + ?Sized>(rng: &mut R, cfg: &LevelSampler, len: usize, negative_cap: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| {
            let mag = libm::pow(10.0, -rng.random_range(0.0..=cfg.decades));
            if rng.random_bool(cfg.negative_fraction) {
                -mag * negative_cap
            } else {
                mag
            }
        })
        .collect();
    sort_desc(&mut w);
    w
}

/// One spectrum on the level set `value = level` with leading entry
/// log-uniform in `[lambda_min, lambda_max]`, built by [`LevelMode::TailScale`]
/// or, with probability `solve_fraction`, [`LevelMode::LastSolve`].
pub fn sample_level<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &LevelSampler,
    target: &LevelTarget<'_>,
) -> Result<LevelSample, Rejection> {
    let big = libm::exp(rng.random_range(libm::log(cfg.lambda_min)..=libm::log(cfg.lambda_max)));
    if cfg.solve_fraction > 0.0 && rng.random_bool(cfg.solve_fraction.min(1.0)) {
        last_solve(rng, cfg, target, big)
    } else {
        tail_scale(rng, cfg, target, big)
    }
}

/// Smallest positive `s` where `value(L (1, s w))` hits the level (scan
/// plus bisection), capped so that `lambda_2 <= L` and `lambda_n >= -delta L`.
fn tail_scale<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &LevelSampler,
    target: &LevelTarget<'_>,
    big: f64,
) -> Result<LevelSample, Rejection> {
    let w = tail_shape(rng, cfg, cfg.n - 1, 1.0);
    let mut s_max = f64::INFINITY;
    if w[0] > 0.0 {
        s_max = s_max.min(1.0 / w[0]);
    }
    let w_min = w[w.len() - 1];
    if w_min < 0.0 {
        s_max = s_max.min(cfg.delta / -w_min);
    }
    if !s_max.is_finite() {
        return Err(Rejection::NoLevelCrossing);
    }
    s_max *= 1.0 - 1e-12;
    let point = |s: f64| -> Vec<f64> {
        let mut v = Vec::with_capacity(cfg.n);
        v.push(big);
        v.extend(w.iter().map(|wi| big * s * wi));
        v
    };
    let f = |s: f64| (target.value)(&point(s)) - cfg.level;
    const GRID: usize = 240;
    const SPAN: f64 = 30.0;
    let s_at = |i: usize| s_max * libm::pow(10.0, -SPAN + SPAN * i as f64 / GRID as f64);
    let mut prev_s = 0.0;
    let mut prev_f = f(0.0);
    for i in 0..=GRID {
        let s = s_at(i);
        let fs = f(s);
        if (prev_f < 0.0) != (fs < 0.0) {
            let (mut lo, mut hi) = (prev_s, s);
            let lo_neg = prev_f < 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if (f(mid) < 0.0) == lo_neg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s_best = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
            let v = point(s_best);
            return if (target.admissible)(&v) {
                Ok(LevelSample { lambda: v, mode: LevelMode::TailScale, permutation: None })
            } else {
                Err(Rejection::Inadmissible)
            };
        }
        prev_s = s;
        prev_f = fs;
    }
    Err(Rejection::NoLevelCrossing)
}

/// `lambda = (L, L w_2, ..., L w_{n-1}, x)` with `x` solved from the level
/// equation and polished by two Newton steps on the accurately evaluated
/// value. Negative middle entries stay above `-delta L`.
fn last_solve<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &LevelSampler,
    target: &LevelTarget<'_>,
    big: f64,
) -> Result<LevelSample, Rejection> {
    let n = cfg.n;
    let w = tail_shape(rng, cfg, n - 2, cfg.delta);
    let mut v = Vec::with_capacity(n);
    v.push(big);
    v.extend(w.iter().map(|wi| big * wi));
    v.push(0.0);
    let slope = (target.last_slope)(&v);
    if !(slope.is_finite() && slope != 0.0) {
        return Err(Rejection::NoLevelCrossing);
    }
    for _ in 0..3 {
        let miss = cfg.level - (target.value)(&v);
        v[n - 1] += miss / slope;
    }
    let miss = cfg.level - (target.value)(&v);
    if !(v[n - 1].is_finite() && miss.abs() <= 1e-8 * cfg.level.abs().max(1.0)) {
        return Err(Rejection::NoLevelCrossing);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap_or(core::cmp::Ordering::Equal));
    let lambda: Vec<f64> = order.iter().map(|&i| v[i]).collect();
    let moved = order.iter().enumerate().any(|(i, &j)| i != j);
    if !(lambda[0] >= cfg.lambda_min && lambda[0] <= cfg.lambda_max) {
        return Err(Rejection::OutOfRange);
    }
    if !(target.admissible)(&lambda) {
        return Err(Rejection::Inadmissible);
    }
    Ok(LevelSample { lambda, mode: LevelMode::LastSolve, permutation: moved.then_some(order) })
}
