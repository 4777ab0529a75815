//! Parallel sample sweeps. Sample `i` draws from its own generator seeded with
//! `sample_seed(seed, i)`, and results are collected in index order, so every
//! sweep is reproducible regardless of scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use sigmak_core::concavity::{claims_report, min_margin, normalize, ConcavityParams};
use sigmak_core::cones::{
    alt_characterization_check, cone_properties, gamma_index, in_gamma_k, lemma22_ratio, property8_preconditions,
};
use sigmak_core::operator::HessianSumSpec;
use sigmak_core::quotients::{
    chain_bound_terms, lemma23_equality_residual, lemma23_recursion_margin, lemma24_terms, q, quotient_hessian,
    quotient_max_eigenvalue,
};
use sigmak_core::sampling::{
    near_boundary, sample_box, sample_gaussian_cone, sample_level, sample_seed, LevelSample, LevelSampler, LevelTarget, Rejection,
};
use sigmak_core::symfun::{check_identities, sigma};
use sigmak_core::C64;

use crate::io::{fmt_real, fmt_reals, Table};

pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sample_seed(seed, index))
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// `"2 0 1"`-style listing of original positions; empty when unchanged.
fn permutation_text(p: Option<&[usize]>) -> String {
    p.map(|p| p.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")).unwrap_or_default()
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

/// Runs `draw` on consecutive indices until `target` of them return
/// `Some`, or `max_draws` indices have been used. Returns the accepted
/// `(index, value)` pairs in index order and the number of draws.
fn collect_accepted<T: Send>(
    target: usize,
    max_draws: usize,
    draw: impl Fn(u64) -> Option<T> + Sync,
) -> (Vec<(u64, T)>, usize) {
    let mut out = Vec::with_capacity(target);
    let mut next = 0usize;
    while out.len() < target && next < max_draws {
        let block = ((target - out.len()) * 2).max(64).min(max_draws - next);
        let results: Vec<Option<T>> = (next..next + block).into_par_iter().map(|i| draw(i as u64)).collect();
        for (off, r) in results.into_iter().enumerate() {
            if out.len() == target {
                break;
            }
            if let Some(v) = r {
                out.push(((next + off) as u64, v));
            }
            if out.len() == target {
                next += off + 1;
                return (out, next);
            }
        }
        next += block;
    }
    (out, next)
}

fn gaussian_direction<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            C64::new(a, b)
        })
        .collect()
}

// ---------------------------------------------------------------- identities

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityConfig {
    pub n: usize,
    pub ks: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitySummary {
    pub rows: usize,
    pub violations: usize,
    pub worst_rel: f64,
    pub worst_abs: f64,
    pub worst_sample: Option<u64>,
}

/// Residuals of the splitting, exclusion-sum, Euler and square-weighted
/// identities at uniform samples of `[lo, hi]^n`.
pub fn identity_sweep(cfg: &IdentityConfig) -> (Table, IdentitySummary) {
    let mut header: Vec<String> = vec!["sample".into(), "k".into()];
    header.extend(names("x", cfg.n));
    header.extend(["splitting", "exclusion_sum", "euler", "square_weighted", "max_rel", "max_abs", "violation"].map(String::from));
    let mut table = Table::new(header);
    let rows: Vec<Vec<(usize, Vec<f64>, f64, f64, [f64; 4])>> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(cfg.seed, i);
            let x: Vec<f64> = (0..cfg.n).map(|_| rng.random_range(cfg.lo..cfg.hi)).collect();
            cfg.ks
                .iter()
                .map(|&k| {
                    let r = check_identities(&x, k).expect("k validated by caller");
                    let split = r.splitting.iter().map(|s| s.rel).fold(0.0, f64::max);
                    (k, x.clone(), r.max_rel(), r.max_abs(), [split, r.exclusion_sum.rel, r.euler.rel, r.square_weighted.rel])
                })
                .collect()
        })
        .collect();
    let mut summary = IdentitySummary { rows: 0, violations: 0, worst_rel: 0.0, worst_abs: 0.0, worst_sample: None };
    for (i, per_k) in rows.into_iter().enumerate() {
        for (k, x, rel, abs, parts) in per_k {
            let bad = !(rel <= cfg.tol);
            let mut row = vec![i.to_string(), k.to_string()];
            row.extend(fmt_reals(&x));
            row.extend(fmt_reals(&parts));
            row.extend([fmt_real(rel), fmt_real(abs), flag(bad)]);
            table.push(row);
            summary.rows += 1;
            summary.violations += bad as usize;
            if rel > summary.worst_rel || summary.worst_sample.is_none() {
                summary.worst_rel = summary.worst_rel.max(rel);
                summary.worst_sample = Some(i as u64);
            }
            summary.worst_abs = summary.worst_abs.max(abs);
        }
    }
    (table, summary)
}

// ---------------------------------------------------------------- cones

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ConeSampler {
    /// Uniform in `[lo, hi]^n`, filtered to the cone.
    Box { lo: f64, hi: f64 },
    /// Positive orthant plus Gaussian perturbation, filtered to the cone.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeConfig {
    pub n: usize,
    pub k: usize,
    pub samples: usize,
    pub seed: u64,
    pub sampler: ConeSampler,
    pub a1: f64,
    pub a2: f64,
    pub tol: f64,
    /// Relative distance of the boundary-near probes used for the
    /// alternative-characterization comparison.
    pub boundary_eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeSummary {
    pub draws: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub alt_comparisons: usize,
    pub disagreements: usize,
    pub violations: usize,
    pub worst_leading_term: f64,
    pub worst_removal: f64,
    pub worst_gradient_order: f64,
    pub worst_lower_product: f64,
    /// Largest `sigma_k / (x_1 ... x_k)` seen: estimate of the constant in
    /// the upper product bound.
    pub c_upper_product: f64,
    /// Largest `x_k / (sigma_k^{1/k} + |x_n|)` seen.
    pub c_lemma22: f64,
    /// Samples with `sigma_k <= A1` and `sigma_{k+1} >= -A2`.
    pub constrained: usize,
    /// Largest `-min_i x_i` over constrained samples.
    pub k_lower_bound: Option<f64>,
}

struct ConeDraw {
    x: Vec<f64>,
    member: bool,
    alt_agree: [bool; 3],
}

/// Cone membership, the alternative characterization, the eigenvalue
/// inequalities and the constants of the two quantitative bounds.
pub fn cone_sweep(cfg: &ConeConfig) -> (Table, ConeSummary) {
    let (n, k) = (cfg.n, cfg.k);
    let max_draws = cfg.samples.saturating_mul(1000).max(1000);
    let agree = |x: &[f64]| alt_characterization_check(x, k).unwrap() == in_gamma_k(x, k).unwrap().member;
    // Every draw is compared, members or not; accepted ones also at two
    // points straddling the boundary.
    let (accepted, draws) = collect_accepted(cfg.samples, max_draws, |i| {
        let mut rng = rng_for(cfg.seed, i);
        let x = match cfg.sampler {
            ConeSampler::Box { lo, hi } => sample_box(&mut rng, n, lo, hi),
            ConeSampler::Gaussian => match sample_gaussian_cone(&mut rng, n, k) {
                Some(v) => v,
                None => return None,
            },
        };
        let member = in_gamma_k(&x, k).unwrap().member;
        if !member {
            return None;
        }
        let inner = near_boundary(&x, k, cfg.boundary_eta);
        let outer = near_boundary(&x, k, -cfg.boundary_eta);
        Some(ConeDraw { alt_agree: [agree(&x), agree(&inner), agree(&outer)], x, member })
    });
    // Rejected box draws are also compared (they are cheap to regenerate).
    let rejected_disagreements: usize = if let ConeSampler::Box { lo, hi } = cfg.sampler {
        (0..draws as u64)
            .into_par_iter()
            .filter(|i| {
                let mut rng = rng_for(cfg.seed, *i);
                let x = sample_box(&mut rng, n, lo, hi);
                !in_gamma_k(&x, k).unwrap().member && !agree(&x)
            })
            .count()
    } else {
        0
    };

    let mut header: Vec<String> = vec!["sample".into()];
    header.extend(names("x", n));
    header.extend(
        [
            "gamma_index",
            "alt_agrees",
            "leading_term",
            "removal",
            "gradient_order",
            "lower_product",
            "upper_product_ratio",
            "lemma22_ratio",
            "k_lower_bound",
            "violation",
        ]
        .map(String::from),
    );
    let mut table = Table::new(header);
    let mut s = ConeSummary {
        draws,
        accepted: accepted.len(),
        acceptance_rate: accepted.len() as f64 / draws.max(1) as f64,
        alt_comparisons: 3 * accepted.len() + if matches!(cfg.sampler, ConeSampler::Box { .. }) { draws - accepted.len() } else { 0 },
        disagreements: rejected_disagreements,
        violations: 0,
        worst_leading_term: f64::INFINITY,
        worst_removal: f64::INFINITY,
        worst_gradient_order: f64::INFINITY,
        worst_lower_product: f64::INFINITY,
        c_upper_product: 0.0,
        c_lemma22: 0.0,
        constrained: 0,
        k_lower_bound: None,
    };
    let rows: Vec<_> = accepted
        .par_iter()
        .map(|(i, d)| {
            let props = cone_properties(&d.x, k).expect("accepted samples are sorted members");
            let sk = sigma(&d.x, k as isize);
            let skm1 = sigma(&d.x, k as isize - 1);
            let gmax = sigmak_core::symfun::grad_sigma(&d.x, k).iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let rel = [
                props.leading_term_margin / sk.abs().max(f64::MIN_POSITIVE),
                props.removal_margin,
                props.gradient_order_margin / gmax.max(f64::MIN_POSITIVE),
                props.lower_product_margin / skm1.abs().max(f64::MIN_POSITIVE),
            ];
            let l22 = lemma22_ratio(&d.x, k).unwrap();
            let k8 = property8_preconditions(&d.x, k, cfg.a1, cfg.a2).ok();
            (*i, d, props.upper_product_ratio, rel, l22, k8)
        })
        .collect();
    for (i, d, upper, rel, l22, k8) in rows {
        let agree_all = d.alt_agree.iter().all(|&a| a);
        s.disagreements += d.alt_agree.iter().filter(|&&a| !a).count();
        let bad = !agree_all || rel.iter().any(|&r| !(r >= -cfg.tol)) || !(rel[1] > 0.0) || !d.member;
        s.violations += bad as usize;
        s.worst_leading_term = s.worst_leading_term.min(rel[0]);
        s.worst_removal = s.worst_removal.min(rel[1]);
        s.worst_gradient_order = s.worst_gradient_order.min(rel[2]);
        s.worst_lower_product = s.worst_lower_product.min(rel[3]);
        // the upper product ratio is only meaningful with x_1..x_k > 0
        if d.x[k - 1] > 0.0 {
            s.c_upper_product = s.c_upper_product.max(upper);
        }
        s.c_lemma22 = s.c_lemma22.max(l22);
        if let Some(v) = k8 {
            s.constrained += 1;
            s.k_lower_bound = Some(s.k_lower_bound.map_or(v, |m: f64| m.max(v)));
        }
        let mut row = vec![i.to_string()];
        row.extend(fmt_reals(&d.x));
        row.push(gamma_index(&d.x).to_string());
        row.push(flag(agree_all));
        row.extend(fmt_reals(&rel));
        row.push(fmt_real(upper));
        row.push(fmt_real(l22));
        row.push(opt_real(k8));
        row.push(flag(bad));
        table.push(row);
    }
    s.violations += rejected_disagreements;
    (table, s)
}

// ---------------------------------------------------------------- lift

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// Fixed coefficients; random real-rooted ones when `None`.
    pub b: Option<Vec<f64>>,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftSummary {
    pub samples: usize,
    pub violations: usize,
    pub worst_rel: f64,
    pub lifted_members: usize,
    pub min_gradient_rel: f64,
    pub implication_failures: usize,
    pub borderline_roots: usize,
    pub spec_errors: usize,
}

/// Direct value against the lift, admissibility and ellipticity.
pub fn lift_sweep(cfg: &LiftConfig) -> (Table, LiftSummary) {
    let (n, k, m) = (cfg.n, cfg.k, cfg.m);
    let mut header: Vec<String> = vec!["sample".into()];
    header.extend(names("lambda", n));
    header.extend(names("b", m));
    header.extend(names("y", m));
    header.extend(
        ["value", "lifted", "rel_residual", "condition1", "condition2", "lifted_member", "implication", "min_gradient_rel", "borderline", "violation"]
            .map(String::from),
    );
    let mut table = Table::new(header);
    let results: Vec<Option<(Vec<f64>, HessianSumSpec, f64, f64, f64, sigmak_core::operator::Admissibility, Option<f64>)>> =
        (0..cfg.samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_for(cfg.seed, i);
                let b = match &cfg.b {
                    Some(b) => b.clone(),
                    None => {
                        let roots: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
                        (1..=m).map(|s| sigma(&roots, s as isize)).collect()
                    }
                };
                let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..5.0)).collect();
                let spec = HessianSumSpec::new(n, k, b.clone()).ok()?;
                let value = spec.value(&lambda).ok()?;
                let lifted = spec.lifted_value(&lambda).ok()?;
                let abs: Vec<f64> = lambda.iter().map(|v| v.abs()).collect();
                let scale = sigma(&abs, k as isize)
                    + b.iter().enumerate().map(|(s, bs)| bs.abs() * sigma(&abs, (k - s - 1) as isize)).sum::<f64>();
                let rel = (value - lifted).abs() / scale.max(f64::MIN_POSITIVE);
                let adm = spec.admissibility(&lambda).ok()?;
                let grad_rel = if adm.lifted_member {
                    let g = spec.grad(&lambda).ok()?;
                    let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    Some(g.iter().fold(f64::INFINITY, |a, v| a.min(*v)) / gmax.max(f64::MIN_POSITIVE))
                } else {
                    None
                };
                Some((lambda, spec, value, lifted, rel, adm, grad_rel))
            })
            .collect();
    let mut s = LiftSummary {
        samples: cfg.samples,
        violations: 0,
        worst_rel: 0.0,
        lifted_members: 0,
        min_gradient_rel: f64::INFINITY,
        implication_failures: 0,
        borderline_roots: 0,
        spec_errors: 0,
    };
    for (i, r) in results.into_iter().enumerate() {
        let Some((lambda, spec, value, lifted, rel, adm, grad_rel)) = r else {
            s.spec_errors += 1;
            continue;
        };
        let elliptic = grad_rel.is_none_or(|g| g > 0.0 || g >= -1e-12);
        let bad = !(rel <= cfg.tol) || !elliptic || !adm.implication_holds;
        s.violations += bad as usize;
        s.worst_rel = s.worst_rel.max(rel);
        s.lifted_members += adm.lifted_member as usize;
        if let Some(g) = grad_rel {
            s.min_gradient_rel = s.min_gradient_rel.min(g);
        }
        s.implication_failures += !adm.implication_holds as usize;
        s.borderline_roots += spec.borderline_roots() as usize;
        let mut row = vec![i.to_string()];
        row.extend(fmt_reals(&lambda));
        row.extend(fmt_reals(spec.b()));
        row.extend(fmt_reals(spec.y()));
        row.extend([fmt_real(value), fmt_real(lifted), fmt_real(rel)]);
        row.extend([flag(adm.condition1), flag(adm.condition2), flag(adm.lifted_member), flag(adm.implication_holds)]);
        row.push(opt_real(grad_rel));
        row.push(flag(spec.borderline_roots()));
        row.push(flag(bad));
        table.push(row);
    }
    (table, s)
}

// ---------------------------------------------------------------- quotients

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientConfig {
    pub n: usize,
    pub k: usize,
    pub samples: usize,
    /// Samples (the first ones) that also get the finite-difference check.
    pub fd_samples: usize,
    pub seed: u64,
    pub equality_tol: f64,
    pub fd_tol: f64,
    pub margin_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientSummary {
    pub samples: usize,
    pub draws: usize,
    pub violations: usize,
    pub worst_equality: f64,
    pub worst_fd: f64,
    /// Largest `max_eig / scale` of the Hessian of `q_k`.
    pub worst_concavity: f64,
    /// Smallest `margin / scale` of the recursion (k >= 2).
    pub worst_recursion: Option<f64>,
    /// Smallest `lhs / rhs_unit` of the chained bound (k >= 3): the largest
    /// constant that holds on the sweep.
    pub c_chain: Option<f64>,
    /// Same for the projected bound (k >= 2).
    pub c_projected: Option<f64>,
}

/// Richardson-extrapolated finite-difference Hessian of `f` at `x`.
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let at = |i: usize, j: usize, si: f64, sj: f64| {
        let mut y = x.to_vec();
        y[i] += si;
        y[j] += sj;
        f(&y)
    };
    let second = |i: usize, j: usize, h: f64| {
        if i == j {
            (at(i, i, h, 0.0) - 2.0 * f(x) + at(i, i, -h, 0.0)) / (h * h)
        } else {
            (at(i, j, h, h) - at(i, j, h, -h) - at(i, j, -h, h) + at(i, j, -h, -h)) / (4.0 * h * h)
        }
    };
    (0..n).map(|i| (0..n).map(|j| (4.0 * second(i, j, h / 2.0) - second(i, j, h)) / 3.0).collect()).collect()
}

/// [`fd_hessian`] over steps `h0 / 2^j`, keeping the estimate where two
/// consecutive steps agree best relative to `scale`. Near a cone boundary
/// the usable step is far below any fixed fraction of `|x|`.
pub fn fd_hessian_adaptive(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h0: f64, steps: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut prev = fd_hessian(f, x, h0);
    let mut best = prev.clone();
    let mut best_gap = f64::INFINITY;
    let mut h = h0;
    for _ in 0..steps {
        h *= 0.5;
        let next = fd_hessian(f, x, h);
        let gap = prev.iter().flatten().zip(next.iter().flatten()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        // NaN gaps (a probe left the cone) never win
        if gap < best_gap {
            best_gap = gap;
            best = next.clone();
        }
        prev = next;
    }
    best
}

fn positive_ratio(lhs: f64, rhs: f64) -> Option<f64> {
    (rhs > 0.0).then(|| lhs / rhs)
}

/// The Newton quotient identities and bounds on Gaussian cone samples with
/// Gaussian complex directions.
pub fn quotient_sweep(cfg: &QuotientConfig) -> (Table, QuotientSummary) {
    let (n, k) = (cfg.n, cfg.k);
    let (accepted, draws) = collect_accepted(cfg.samples, cfg.samples.saturating_mul(1000).max(1000), |i| {
        let mut rng = rng_for(cfg.seed, i);
        let x = sample_gaussian_cone(&mut rng, n, k)?;
        let xi = gaussian_direction(&mut rng, n);
        Some((x, xi))
    });
    let rows: Vec<_> = accepted
        .par_iter()
        .enumerate()
        .map(|(pos, (i, (x, xi)))| {
            let eq = lemma23_equality_residual(x, xi).expect("cone samples have s_1 > 0").rel;
            let fd = (pos < cfg.fd_samples).then(|| {
                let h0 = 1e-1 * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let f = |y: &[f64]| q(y, k).unwrap_or(f64::NAN);
                let ana = quotient_hessian(x, k, &[]).unwrap();
                // q_k is 1-homogeneous, so |q| / |x|^2 is its natural curvature
                // scale; it also keeps the exactly-zero Hessian of q_1 honest
                let xx: f64 = x.iter().map(|v| v * v).sum();
                let scale = ana.iter().fold(q(x, k).unwrap().abs() / xx, |m, v| m.max(v.abs()));
                let num = fd_hessian_adaptive(&f, x, h0, 16, scale);
                let mut err = 0.0f64;
                for a in 0..n {
                    for b in 0..n {
                        err = err.max((num[a][b] - ana[(a, b)]).abs());
                    }
                }
                err / scale
            });
            let (max_eig, eig_scale) = quotient_max_eigenvalue(x, k).unwrap();
            let concavity = if eig_scale > 0.0 { max_eig / eig_scale } else { max_eig };
            let recursion = (k >= 2).then(|| {
                let r = lemma23_recursion_margin(x, k - 1, xi).unwrap();
                r.margin / r.scale.max(f64::MIN_POSITIVE)
            });
            let chain = if k >= 3 {
                let (lhs, rhs) = chain_bound_terms(x, k, xi).unwrap();
                positive_ratio(lhs, rhs)
            } else {
                None
            };
            let projected = if k >= 2 {
                let (lhs, rhs, _) = lemma24_terms(x, k, xi).unwrap();
                positive_ratio(lhs, rhs)
            } else {
                None
            };
            (*i, x, eq, fd, concavity, recursion, chain, projected)
        })
        .collect();
    let mut header: Vec<String> = vec!["sample".into()];
    header.extend(names("x", n));
    header.extend(
        ["equality_rel", "hessian_fd_rel", "concavity", "recursion", "chain_ratio", "projected_ratio", "violation"].map(String::from),
    );
    let mut table = Table::new(header);
    let mut s = QuotientSummary {
        samples: accepted.len(),
        draws,
        violations: 0,
        worst_equality: 0.0,
        worst_fd: 0.0,
        worst_concavity: f64::NEG_INFINITY,
        worst_recursion: None,
        c_chain: None,
        c_projected: None,
    };
    for (i, x, eq, fd, conc, rec, chain, proj) in rows {
        let bad = !(eq <= cfg.equality_tol)
            || fd.is_some_and(|e| !(e <= cfg.fd_tol))
            || !(conc <= cfg.margin_tol)
            || rec.is_some_and(|r| !(r >= -cfg.margin_tol));
        s.violations += bad as usize;
        s.worst_equality = s.worst_equality.max(eq);
        if let Some(e) = fd {
            s.worst_fd = s.worst_fd.max(e);
        }
        s.worst_concavity = s.worst_concavity.max(conc);
        let min_opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(p), Some(q)) => Some(p.min(q)),
            (p, q) => p.or(q),
        };
        s.worst_recursion = min_opt(s.worst_recursion, rec);
        s.c_chain = min_opt(s.c_chain, chain);
        s.c_projected = min_opt(s.c_projected, proj);
        let mut row = vec![i.to_string()];
        row.extend(fmt_reals(x));
        row.extend([fmt_real(eq), opt_real(fd), fmt_real(conc), opt_real(rec), opt_real(chain), opt_real(proj), flag(bad)]);
        table.push(row);
    }
    (table, s)
}

// ---------------------------------------------------------------- concavity

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityConfig {
    pub n: usize,
    pub k: usize,
    pub b: Vec<f64>,
    pub gamma: f64,
    pub delta: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub level: f64,
    pub samples: usize,
    pub seed: u64,
    /// Give up after `samples * max_draw_factor` draws.
    pub max_draw_factor: usize,
    /// Share of draws that solve the last entry instead of scaling the tail.
    pub solve_fraction: f64,
}

impl ConcavityConfig {
    pub fn params(&self) -> Result<ConcavityParams, sigmak_core::Error> {
        ConcavityParams::new(self.gamma, self.delta, HessianSumSpec::new(self.n, self.k, self.b.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub sample: u64,
    pub lambda: Vec<f64>,
    pub min_margin: f64,
    pub normalized_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavitySummary {
    pub accepted: usize,
    pub draws: usize,
    pub rejected: BTreeMap<String, usize>,
    pub violations: usize,
    pub homogeneous: bool,
    /// Smallest raw margin (scales like `lambda_1^-2`).
    pub global_min: Option<f64>,
    /// Smallest `lambda_1^2 * margin`.
    pub global_min_normalized: Option<f64>,
    pub witness: Option<Witness>,
    /// First few negative-margin samples.
    pub negative_witnesses: Vec<Witness>,
    pub sit2_samples: usize,
    /// Samples whose margin sign the eigen-solve could not certify.
    pub uncertified: usize,
}

fn level_draw(cfg: &ConcavityConfig, spec: &HessianSumSpec, index: u64) -> Result<LevelSample, Rejection> {
    let sampler = LevelSampler {
        level: cfg.level,
        solve_fraction: cfg.solve_fraction,
        ..LevelSampler::new(cfg.n, cfg.delta, cfg.lambda_min, cfg.lambda_max)
    };
    let n = cfg.n;
    let value = |v: &[f64]| spec.lifted_value(v).unwrap_or(f64::NAN);
    let slope = |v: &[f64]| spec.grad(v).map(|g| g[n - 1]).unwrap_or(f64::NAN);
    let admissible = |v: &[f64]| spec.lifted_member(v).unwrap_or(false) && v[n - 1] >= -cfg.delta * v[0];
    let target = LevelTarget { value: &value, last_slope: &slope, admissible: &admissible };
    let mut rng = rng_for(cfg.seed, index);
    sample_level(&mut rng, &sampler, &target)
}

/// Accepted level-set samples in index order, with rejection counts.
pub fn level_samples(
    cfg: &ConcavityConfig,
    spec: &HessianSumSpec,
) -> (Vec<(u64, LevelSample)>, usize, BTreeMap<String, usize>) {
    let max_draws = cfg.samples.saturating_mul(cfg.max_draw_factor.max(1));
    let (accepted, draws) = collect_accepted(cfg.samples, max_draws, |i| level_draw(cfg, spec, i).ok());
    let rejected: Vec<Rejection> =
        (0..draws as u64).into_par_iter().filter_map(|i| level_draw(cfg, spec, i).err()).collect();
    let mut counts = BTreeMap::new();
    for r in rejected {
        *counts.entry(r.as_str().to_string()).or_insert(0) += 1;
    }
    (accepted, draws, counts)
}

/// Minimum margin of the key concavity inequality over level-set samples.
pub fn concavity_sweep(cfg: &ConcavityConfig) -> Result<(Table, ConcavitySummary), sigmak_core::Error> {
    let params = cfg.params()?;
    let (accepted, draws, rejected) = level_samples(cfg, params.spec());
    let n = cfg.n;
    let reports: Vec<_> = accepted
        .par_iter()
        .map(|(i, ls)| {
            let r = min_margin(&ls.lambda, &params);
            let claims = normalize(&ls.lambda).ok().and_then(|t| claims_report(&t, cfg.k, cfg.delta).ok());
            (*i, ls, r, claims)
        })
        .collect();
    let mut header: Vec<String> = vec!["sample".into()];
    header.extend(names("lambda", n));
    header.extend(
        ["min_margin", "normalized_margin", "relative_margin", "certified", "precision_bits", "level", "psh_margin", "homogeneous"]
            .map(String::from),
    );
    header.extend(names("xi", n));
    header.extend(["ell", "sit2", "mode", "permutation", "negative"].map(String::from));
    let mut table = Table::new(header);
    let mut s = ConcavitySummary {
        accepted: accepted.len(),
        draws,
        rejected,
        violations: 0,
        homogeneous: params.homogeneous(),
        global_min: None,
        global_min_normalized: None,
        witness: None,
        negative_witnesses: Vec::new(),
        sit2_samples: 0,
        uncertified: 0,
    };
    for (i, ls, r, claims) in reports {
        let r = r?;
        let normalized = r.min_margin * r.lambda1 * r.lambda1;
        let negative = r.min_margin < 0.0;
        s.violations += negative as usize;
        s.uncertified += !r.certified as usize;
        let w = Witness { sample: i, lambda: r.lambda.clone(), min_margin: r.min_margin, normalized_margin: normalized };
        if negative && s.negative_witnesses.len() < 10 {
            s.negative_witnesses.push(w.clone());
        }
        if s.global_min_normalized.is_none_or(|m| normalized < m) {
            s.global_min_normalized = Some(normalized);
            s.witness = Some(w);
        }
        s.global_min = Some(s.global_min.map_or(r.min_margin, |m| m.min(r.min_margin)));
        let sit2 = claims.is_some_and(|c| c.sit2);
        s.sit2_samples += sit2 as usize;
        let mut row = vec![i.to_string()];
        row.extend(fmt_reals(&r.lambda));
        row.extend([
            fmt_real(r.min_margin),
            fmt_real(normalized),
            fmt_real(r.relative_margin),
            flag(r.certified),
            r.precision_bits.to_string(),
            fmt_real(r.level),
            fmt_real(r.psh_margin),
            flag(r.homogeneous),
        ]);
        row.extend(fmt_reals(&r.minimizer));
        row.push(claims.map(|c| c.ell.to_string()).unwrap_or_default());
        row.push(flag(sit2));
        row.push(ls.mode.as_str().to_string());
        row.push(permutation_text(ls.permutation.as_deref()));
        row.push(flag(negative));
        table.push(row);
    }
    Ok((table, s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdConfig {
    pub n: usize,
    pub k: usize,
    pub b: Vec<f64>,
    pub gamma: f64,
    pub deltas: Vec<f64>,
    pub lambda_mins: Vec<f64>,
    /// Each cell samples `lambda_1` in `[lambda_min, lambda_min * span]`.
    pub span: f64,
    pub samples: usize,
    pub seed: u64,
    pub solve_fraction: f64,
}

/// Worst margin on a `(delta, lambda_min)` grid. Output only.
pub fn threshold_scan(cfg: &ThresholdConfig) -> Result<Table, sigmak_core::Error> {
    let mut table = Table::new(["delta", "lambda_min", "lambda_max", "accepted", "negatives", "worst_margin", "worst_normalized"]);
    for &delta in &cfg.deltas {
        for &lmin in &cfg.lambda_mins {
            let c = ConcavityConfig {
                n: cfg.n,
                k: cfg.k,
                b: cfg.b.clone(),
                gamma: cfg.gamma,
                delta,
                lambda_min: lmin,
                lambda_max: lmin * cfg.span,
                level: 1.0,
                samples: cfg.samples,
                seed: cfg.seed,
                max_draw_factor: 20,
                solve_fraction: cfg.solve_fraction,
            };
            let (_, s) = concavity_sweep(&c)?;
            table.push(vec![
                fmt_real(delta),
                fmt_real(lmin),
                fmt_real(lmin * cfg.span),
                s.accepted.to_string(),
                s.violations.to_string(),
                opt_real(s.global_min),
                opt_real(s.global_min_normalized),
            ]);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub min: f64,
    pub max: f64,
}

impl Envelope {
    fn add(e: &mut Option<Envelope>, v: f64) {
        match e {
            Some(x) => {
                x.min = x.min.min(v);
                x.max = x.max.max(v);
            }
            None => *e = Some(Envelope { min: v, max: v }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimsSummary {
    pub accepted: usize,
    pub sit2_samples: usize,
    pub unbounded_r1: usize,
    pub violations: usize,
    pub r1: Option<Envelope>,
    pub r2: Option<Envelope>,
    pub r3: Option<Envelope>,
}

/// Ratios of the case `s_{k;1} < -sigma_k / (16k)` over level-set samples.
pub fn claims_sweep(cfg: &ConcavityConfig) -> Result<(Table, ClaimsSummary), sigmak_core::Error> {
    let params = cfg.params()?;
    let (accepted, _, _) = level_samples(cfg, params.spec());
    let mut header: Vec<String> = vec!["sample".into()];
    header.extend(names("lambda_tilde", cfg.n));
    header.extend(["sit2", "r1", "r2", "r3", "ell", "violation"].map(String::from));
    let mut table = Table::new(header);
    let mut s = ClaimsSummary { accepted: accepted.len(), sit2_samples: 0, unbounded_r1: 0, violations: 0, r1: None, r2: None, r3: None };
    for (i, ls) in accepted {
        let t = normalize(&ls.lambda)?;
        let c = claims_report(&t, cfg.k, cfg.delta)?;
        let mut bad = false;
        if c.sit2 {
            s.sit2_samples += 1;
            match c.r1 {
                Some(r) => Envelope::add(&mut s.r1, r),
                None => s.unbounded_r1 += 1,
            }
            Envelope::add(&mut s.r2, c.r2);
            Envelope::add(&mut s.r3, c.r3);
            let ok = |v: f64| v.is_finite() && v > 0.0;
            bad = !c.r1.is_some_and(ok) || !ok(c.r2) || !ok(c.r3);
        }
        s.violations += bad as usize;
        let mut row = vec![i.to_string()];
        row.extend(fmt_reals(&t));
        row.extend([flag(c.sit2), opt_real(c.r1), fmt_real(c.r2), fmt_real(c.r3), c.ell.to_string(), flag(bad)]);
        table.push(row);
    }
    Ok((table, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepted_collection_is_ordered_and_bounded() {
        let (v, draws) = collect_accepted(5, 100, |i| (i % 3 == 0).then_some(i));
        assert_eq!(v.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 3, 6, 9, 12]);
        assert_eq!(draws, 13);
        let (v, draws) = collect_accepted(5, 7, |i| (i % 3 == 0).then_some(i));
        assert_eq!(v.len(), 3);
        assert_eq!(draws, 7);
    }

    #[test]
    fn fd_hessian_of_quadratic() {
        let f = |x: &[f64]| x[0] * x[0] * 3.0 + x[0] * x[1] - x[1] * x[1];
        let h = fd_hessian(&f, &[0.3, -0.2], 1e-3);
        assert!((h[0][0] - 6.0).abs() < 1e-6);
        assert!((h[0][1] - 1.0).abs() < 1e-6);
        assert!((h[1][1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn empty_threshold_grid() {
        let cfg = ThresholdConfig {
            n: 3,
            k: 2,
            b: vec![],
            gamma: 0.5,
            deltas: vec![],
            lambda_mins: vec![1e3],
            span: 10.0,
            samples: 10,
            seed: 1,
            solve_fraction: 0.5,
        };
        let t = threshold_scan(&cfg).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.header.len(), 7);
    }
}
