use nalgebra::DMatrix;
use proptest::prelude::*;
use sigmak_core::cones::{alt_characterization_check, in_gamma_k};
use sigmak_core::linalg::eig_desc;
use sigmak_core::operator::HessianSumSpec;
use sigmak_core::quotients::{q, quotient_hessian};
use sigmak_core::symfun::{check_identities, grad_sigma, hess_sigma, sigma};
use sigmak_core::C64;

fn brute_sigma(x: &[f64], k: usize) -> f64 {
    let n = x.len();
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| x[i]).product::<f64>())
        .sum()
}

fn vector(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    (3usize..=7).prop_flat_map(move |n| prop::collection::vec(lo..hi, n))
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Point of `Gamma_k`: a positive vector plus a bounded negative shift.
fn cone_point() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (3usize..=6)
        .prop_flat_map(|n| (prop::collection::vec(0.05f64..5.0, n), 1..=n, 0.0f64..1.0))
        .prop_filter_map("outside cone", |(v, k, shift)| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let x: Vec<f64> = v.iter().map(|a| a - shift * mean).collect();
            let x = sorted_desc(x);
            in_gamma_k(&x, k).unwrap().member.then_some((x, k))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sigma_matches_subset_sum(x in vector(-3.0, 3.0)) {
        for k in 0..=x.len() {
            let a = sigma(&x, k as isize);
            let b = brute_sigma(&x, k);
            let scale = brute_sigma(&x.iter().map(|v| v.abs()).collect::<Vec<_>>(), k);
            prop_assert!((a - b).abs() <= 1e-13 * scale.max(1.0));
        }
        prop_assert_eq!(sigma(&x, -1), 0.0);
        prop_assert_eq!(sigma(&x, x.len() as isize + 1), 0.0);
    }

    #[test]
    fn identities_hold(x in vector(-1.0, 10.0)) {
        for k in 1..=x.len() {
            let r = check_identities(&x, k).unwrap();
            prop_assert!(r.max_rel() <= 1e-10, "k={} {:?}", k, r);
        }
    }

    #[test]
    fn permutation_invariance(x in vector(-2.0, 5.0), rot in 0usize..7) {
        let mut y = x.clone();
        y.rotate_left(rot % x.len());
        y.reverse();
        for k in 1..=x.len() {
            let a = sigma(&x, k as isize);
            let b = sigma(&y, k as isize);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences(x in vector(-2.0, 3.0)) {
        let n = x.len();
        let h = 1e-4;
        for k in 1..=n {
            let g = grad_sigma(&x, k);
            let hs = hess_sigma(&x, k);
            for i in 0..n {
                let shift = |t: f64| { let mut y = x.clone(); y[i] += t; sigma(&y, k as isize) };
                // Richardson-extrapolated central difference
                let d1 = (shift(h) - shift(-h)) / (2.0 * h);
                let d2 = (shift(h / 2.0) - shift(-h / 2.0)) / h;
                let fd = (4.0 * d2 - d1) / 3.0;
                prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()));
                for j in 0..n {
                    if i == j { continue; }
                    let both = |s: f64, t: f64| { let mut y = x.clone(); y[i] += s; y[j] += t; sigma(&y, k as isize) };
                    let fd = (both(h, h) - both(h, -h) - both(-h, h) + both(-h, -h)) / (4.0 * h * h);
                    prop_assert!((fd - hs[(i, j)]).abs() <= 1e-5 * (1.0 + hs[(i, j)].abs()));
                }
                prop_assert_eq!(hs[(i, i)], 0.0);
            }
        }
    }

    #[test]
    fn alt_characterization_agrees(x in vector(-2.0, 5.0)) {
        for k in 1..=x.len() {
            prop_assert_eq!(alt_characterization_check(&x, k).unwrap(), in_gamma_k(&x, k).unwrap().member);
        }
    }

    #[test]
    fn lift_is_consistent(lambda in prop::collection::vec(-1.0f64..5.0, 5), roots in prop::collection::vec(-2.0f64..2.0, 1..=3)) {
        // b from prescribed real roots: prod (t - y_i) = t^m + sum (-1)^s b_s t^{m-s}
        let m = roots.len();
        let b: Vec<f64> = (1..=m).map(|s| sigma(&roots, s as isize)).collect();
        let k = m + 1 + (lambda.len() - m - 1) / 2;
        let spec = HessianSumSpec::new(lambda.len(), k, b.clone()).unwrap();
        let direct = spec.value(&lambda).unwrap();
        let lifted = spec.lifted_value(&lambda).unwrap();
        let scale: f64 = 1.0 + (0..=m).map(|s| b.get(s.wrapping_sub(1)).map_or(1.0, |v| v.abs()) * sigma(&lambda.iter().map(|v| v.abs()).collect::<Vec<_>>(), (k - s) as isize)).sum::<f64>();
        prop_assert!((direct - lifted).abs() <= 1e-10 * scale, "{} {}", direct, lifted);
    }

    #[test]
    fn divided_difference_identity(lambda in prop::collection::vec(-1.0f64..5.0, 4..=6), k_off in 0usize..3) {
        let n = lambda.len();
        let k = (2 + k_off).min(n);
        let spec = HessianSumSpec::sigma_k(n, k).unwrap();
        let g = spec.grad(&lambda).unwrap();
        for p in 0..n {
            for q in 0..n {
                if p == q || (lambda[p] - lambda[q]).abs() < 1e-3 { continue; }
                let dd = (g[p] - g[q]) / (lambda[p] - lambda[q]);
                let closed = spec.divided_difference(&lambda, p, q).unwrap();
                let tol = 1e-12 * (1.0 + g[p].abs() + g[q].abs()) / (lambda[p] - lambda[q]).abs();
                prop_assert!((dd - closed).abs() <= tol.max(1e-12));
            }
        }
    }

    #[test]
    fn lifted_gradient_is_positive((x, k) in cone_point()) {
        let spec = HessianSumSpec::sigma_k(x.len(), k).unwrap();
        for g in spec.grad(&x).unwrap() {
            prop_assert!(g > 0.0 || k == 1 && g == 1.0);
        }
    }

    #[test]
    fn quotient_hessian_matches_finite_differences((x, k) in cone_point()) {
        let n = x.len();
        let h = 1e-4;
        let hq = quotient_hessian(&x, k, &[]).unwrap();
        let scale = hq.iter().fold(0.0f64, |m, v| m.max(v.abs())) + q(&x, k).unwrap().abs() / (x.iter().map(|v| v * v).sum::<f64>());
        let f = |y: &[f64]| q(y, k).unwrap_or(f64::NAN);
        for i in 0..n {
            for j in 0..n {
                let at = |s: f64, t: f64| { let mut y = x.clone(); y[i] += s; y[j] += t; f(&y) };
                let fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
                if !fd.is_finite() { return Ok(()); }
                prop_assert!((fd - hq[(i, j)]).abs() <= 1e-4 * scale, "{} {} {}", i, j, fd - hq[(i, j)]);
            }
        }
    }

    #[test]
    fn contraction_matches_matrix_function(
        base in prop::collection::vec(0.5f64..1.5, 4),
        eta_re in prop::collection::vec(-1.0f64..1.0, 16),
        eta_im in prop::collection::vec(-1.0f64..1.0, 16),
        k in 1usize..=4,
    ) {
        // well separated spectrum
        let lambda: Vec<f64> = base.iter().enumerate().map(|(i, v)| v + 2.0 * (3 - i) as f64).collect();
        let n = 4;
        let spec = HessianSumSpec::sigma_k(n, k).unwrap();
        let eta = DMatrix::from_fn(n, n, |i, j| {
            let z = C64::new(eta_re[i * n + j], eta_im[i * n + j]);
            let w = C64::new(eta_re[j * n + i], eta_im[j * n + i]).conj();
            let s = (z + w) * 0.5;
            if i == j { C64::new(s.re, 0.0) } else { s }
        });
        let closed = spec.contraction_second_derivative(&lambda, &eta).unwrap();
        let g0 = DMatrix::from_fn(n, n, |i, j| if i == j { C64::new(lambda[i], 0.0) } else { C64::new(0.0, 0.0) });
        let f = |t: f64| {
            let (ev, _) = eig_desc(&(&g0 + &eta * C64::new(t, 0.0))).unwrap();
            sigma(&ev, k as isize)
        };
        let second = |t: f64| (f(t) + f(-t) - 2.0 * f(0.0)) / (t * t);
        // gaps are >= 1, so Richardson at t = 1e-2 has truncation error ~1e-8
        let fd = (4.0 * second(1e-2) - second(2e-2)) / 3.0;
        // k = 1 is linear: the exact answer 0 only admits a rounding floor
        let floor = 1e-10 * sigma(&lambda, k as isize);
        prop_assert!((fd - closed).abs() <= 1e-5 * closed.abs() + floor, "fd {} closed {}", fd, closed);
    }

    #[test]
    fn contraction_is_permutation_invariant(
        lambda in prop::collection::vec(-0.5f64..4.0, 4),
        diag in prop::collection::vec(-1.0f64..1.0, 4),
        off in prop::collection::vec(-1.0f64..1.0, 6),
        k in 1usize..=4,
    ) {
        let n = 4;
        let spec = HessianSumSpec::sigma_k(n, k).unwrap();
        let mut eta = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        let mut idx = 0;
        for i in 0..n {
            eta[(i, i)] = C64::new(diag[i], 0.0);
            for j in (i + 1)..n {
                eta[(i, j)] = C64::new(off[idx], 0.5 * off[5 - idx]);
                eta[(j, i)] = eta[(i, j)].conj();
                idx += 1;
            }
        }
        let perm = [2usize, 0, 3, 1];
        let lp: Vec<f64> = perm.iter().map(|&i| lambda[i]).collect();
        let ep = DMatrix::from_fn(n, n, |i, j| eta[(perm[i], perm[j])]);
        let a = spec.contraction_second_derivative(&lambda, &eta).unwrap();
        let b = spec.contraction_second_derivative(&lp, &ep).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}
