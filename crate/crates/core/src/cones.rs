//! Garding cones `Gamma_k^n = { sigma_1 > 0, ..., sigma_k > 0 }` and the
//! quantitative eigenvalue bounds that hold inside them.
//!
//! Membership is strict `> 0` with no slack; callers that care about the
//! boundary look at the reported margins.

use alloc::vec::Vec;

use crate::symfun::{elementary_all, sigma_excluding, SymTable};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConeMembership {
    pub member: bool,
    /// `(sigma_1, ..., sigma_k)`.
    pub margins: Vec<f64>,
    /// First degree `j` with `sigma_j <= 0`, if any.
    pub first_failure: Option<usize>,
}

impl ConeMembership {
    pub fn into_result(self, k: usize) -> Result<Self> {
        match self.first_failure {
            None => Ok(self),
            Some(j) => Err(Error::NotInCone { k, failed: j, value: self.margins[j - 1] }),
        }
    }
}

fn check_degree(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::DegreeOutOfRange { k, n });
    }
    Ok(())
}

pub fn in_gamma_k(x: &[f64], k: usize) -> Result<ConeMembership> {
    check_degree(x.len(), k)?;
    let t = elementary_all(x, k);
    let margins: Vec<f64> = t.as_slice()[1..].to_vec();
    let first_failure = margins.iter().position(|&s| !(s > 0.0)).map(|i| i + 1);
    Ok(ConeMembership { member: first_failure.is_none(), margins, first_failure })
}

/// Largest `k` with `x` in `Gamma_k`, 0 when `sigma_1 <= 0`.
pub fn gamma_index(x: &[f64]) -> usize {
    let t = elementary_all(x, x.len());
    t.as_slice()[1..].iter().take_while(|&&s| s > 0.0).count()
}

/// Full cone report: the index together with every `sigma_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeReport {
    pub k_index: usize,
    pub sigmas: SymTable,
}

pub fn cone_report(x: &[f64]) -> ConeReport {
    ConeReport { k_index: gamma_index(x), sigmas: elementary_all(x, x.len()) }
}

/// Membership through derivatives: every `partial^S sigma_k` over index sets
/// `|S| <= k` must be positive. Each such derivative is
/// `sigma_{k-|S|}` with the entries of `S` removed, so this enumerates
/// subsets of size `< k` (size `k` gives the constant 1).
pub fn alt_characterization_check(x: &[f64], k: usize) -> Result<bool> {
    let n = x.len();
    check_degree(n, k)?;
    if n > 30 {
        return Err(Error::InvalidParameter("subset enumeration limited to n <= 30"));
    }
    let mut subset = Vec::with_capacity(k);
    for size in 0..k {
        let mut ok = true;
        for_each_subset(n, size, &mut subset, &mut |s| {
            if ok && !(sigma_excluding(x, (k - size) as isize, s) > 0.0) {
                ok = false;
            }
        });
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

fn for_each_subset(n: usize, size: usize, buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, left: usize, buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if left == 0 {
            f(buf);
            return;
        }
        for i in start..=(n - left) {
            buf.push(i);
            rec(i + 1, n, left - 1, buf, f);
            buf.pop();
        }
    }
    buf.clear();
    rec(0, n, size, buf, f);
}

fn require_sorted_positive(x: &[f64]) -> Result<()> {
    if !x.windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    if !(x[0] > 0.0) {
        return Err(Error::NonPositiveLeading(x[0]));
    }
    Ok(())
}

/// `x_n + delta x_1` for decreasing `x`; the dynamic plurisubharmonic
/// condition holds iff this is positive.
pub fn dynamic_psh_margin(x: &[f64], delta: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::TooShort(0));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive"));
    }
    require_sorted_positive(x)?;
    Ok(x[x.len() - 1] + delta * x[0])
}

/// `C (sigma_k^{1/k} + |x_n|) - x_k` for decreasing `x` in `Gamma_k`.
pub fn lemma22_bound(x: &[f64], k: usize, c: f64) -> Result<f64> {
    if !x.windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    let m = in_gamma_k(x, k)?.into_result(k)?;
    let sk = m.margins[k - 1];
    Ok(c * (libm::pow(sk, 1.0 / k as f64) + x[x.len() - 1].abs()) - x[k - 1])
}

/// `x_k / (sigma_k^{1/k} + |x_n|)`: the smallest `C` for which
/// [`lemma22_bound`] is nonnegative at `x`.
pub fn lemma22_ratio(x: &[f64], k: usize) -> Result<f64> {
    if !x.windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    let m = in_gamma_k(x, k)?.into_result(k)?;
    let sk = m.margins[k - 1];
    Ok(x[k - 1] / (libm::pow(sk, 1.0 / k as f64) + x[x.len() - 1].abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Property8Input {
    pub a1: f64,
    pub a2: f64,
    pub k_const: f64,
}

/// Checks `min_i x_i + K >= 0` for `x` in `Gamma_k` with `sigma_k <= A1`
/// and `sigma_{k+1} >= -A2`.
pub fn property8_check(x: &[f64], k: usize, input: Property8Input) -> Result<bool> {
    if input.a1 < 0.0 || input.a2 < 0.0 {
        return Err(Error::InvalidParameter("A1 and A2 must be nonnegative"));
    }
    property8_preconditions(x, k, input.a1, input.a2)?;
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min + input.k_const >= 0.0)
}

/// Verifies the hypotheses of the lower-bound property and returns
/// `-min_i x_i`, the smallest admissible `K` at `x`.
pub fn property8_preconditions(x: &[f64], k: usize, a1: f64, a2: f64) -> Result<f64> {
    let m = in_gamma_k(x, k)?.into_result(k)?;
    if m.margins[k - 1] > a1 {
        return Err(Error::Precondition("sigma_k exceeds A1"));
    }
    if crate::symfun::sigma(x, k as isize + 1) < -a2 {
        return Err(Error::Precondition("sigma_{k+1} is below -A2"));
    }
    Ok(-x.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Residuals of the inequalities that hold at a decreasing `x` in
/// `Gamma_k`. Each `*_margin` is nonnegative when the inequality holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePropertyReport {
    /// `x_1 s_{k-1;1} - (k/n) sigma_k`.
    pub leading_term_margin: f64,
    /// `min` over `i` and `1 <= j <= k-1` of `sigma_j(x|i) / sigma_j(|x| |i)`;
    /// positive iff every `x|i` lies in `Gamma_{k-1}` (infinite for `k = 1`).
    pub removal_margin: f64,
    /// `min_{i<j}` of `s_{k-1;j} - s_{k-1;i}` (gradient ordering for decreasing `x`).
    pub gradient_order_margin: f64,
    /// `sigma_{k-1} - x_1 ... x_{k-1}`.
    pub lower_product_margin: f64,
    /// `sigma_k / (x_1 ... x_k)`; bounded above by a constant depending on `(n, k)`.
    pub upper_product_ratio: f64,
}

impl ConePropertyReport {
    /// Worst of the margins that must be nonnegative, each divided by the
    /// natural scale of its terms.
    pub fn worst_relative(&self, x: &[f64], k: usize) -> f64 {
        let sk = crate::symfun::sigma(x, k as isize);
        let skm1 = crate::symfun::sigma(x, k as isize - 1);
        let gmax = crate::symfun::grad_sigma(x, k).iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let a = self.leading_term_margin / sk.abs().max(f64::MIN_POSITIVE);
        let b = self.gradient_order_margin / gmax.max(f64::MIN_POSITIVE);
        let c = self.lower_product_margin / skm1.abs().max(f64::MIN_POSITIVE);
        a.min(b).min(c).min(self.removal_margin)
    }
}

pub fn cone_properties(x: &[f64], k: usize) -> Result<ConePropertyReport> {
    let n = x.len();
    if !x.windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    let m = in_gamma_k(x, k)?.into_result(k)?;
    let sk = m.margins[k - 1];
    let ki = k as isize;
    let grad: Vec<f64> = (0..n).map(|i| sigma_excluding(x, ki - 1, &[i])).collect();
    let leading_term_margin = x[0] * grad[0] - (k as f64 / n as f64) * sk;

    let mut removal_margin = f64::INFINITY;
    if k >= 2 {
        let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        for i in 0..n {
            for j in 1..k {
                let scale = sigma_excluding(&abs, j as isize, &[i]).max(f64::MIN_POSITIVE);
                removal_margin = removal_margin.min(sigma_excluding(x, j as isize, &[i]) / scale);
            }
        }
    }

    let mut gradient_order_margin = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            gradient_order_margin = gradient_order_margin.min(grad[j] - grad[i]);
        }
    }

    let skm1 = if k >= 2 { m.margins[k - 2] } else { 1.0 };
    let lower: f64 = x[..k - 1].iter().product();
    let upper: f64 = x[..k].iter().product();
    Ok(ConePropertyReport {
        leading_term_margin,
        removal_margin,
        gradient_order_margin,
        lower_product_margin: skm1 - lower,
        upper_product_ratio: sk / upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        assert!(in_gamma_k(&[1.0, 1.0, 1.0], 3).unwrap().member);
        let m = in_gamma_k(&[3.0, 1.0, -1.0], 2).unwrap();
        assert!(!m.member);
        assert_eq!(m.margins, alloc::vec![3.0, -1.0]);
        assert_eq!(m.first_failure, Some(2));
        let m = in_gamma_k(&[2.0, 1.0, -0.5], 2).unwrap();
        assert!(m.member);
        assert_eq!(m.margins, alloc::vec![2.5, 0.5]);
        assert!(in_gamma_k(&[1.0, 1.0], 3).is_err());
    }

    #[test]
    fn boundary_is_excluded() {
        assert!(!in_gamma_k(&[1.0, -1.0, 0.0], 1).unwrap().member);
        assert!(!in_gamma_k(&[1.0, 0.0, 0.0], 2).unwrap().member);
    }

    #[test]
    fn index_examples() {
        assert_eq!(gamma_index(&[1.0, 1.0, 1.0]), 3);
        assert_eq!(gamma_index(&[2.0, 1.0, -0.5]), 2);
        assert_eq!(gamma_index(&[-1.0, -1.0]), 0);
        let r = cone_report(&[2.0, 1.0, -0.5]);
        assert_eq!(r.k_index, 2);
        assert_eq!(r.sigmas.get(3), -1.0);
    }

    #[test]
    fn alt_examples() {
        assert!(alt_characterization_check(&[1.0, 1.0, 1.0], 2).unwrap());
        assert!(!alt_characterization_check(&[3.0, 1.0, -1.0], 2).unwrap());
        assert!(alt_characterization_check(&[2.0, 1.0, -0.5], 2).unwrap());
        assert!(!alt_characterization_check(&[2.0, 1.0, -0.5], 3).unwrap());
    }

    #[test]
    fn psh_examples() {
        assert!((dynamic_psh_margin(&[10.0, 1.0, -0.05], 0.01).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(dynamic_psh_margin(&[1.0, 0.0, 0.0], 0.3).unwrap(), 0.3);
        assert!((dynamic_psh_margin(&[10.0, 1.0, -0.2], 0.01).unwrap() + 0.1).abs() < 1e-15);
        assert!(matches!(dynamic_psh_margin(&[0.0, -1.0], 0.1), Err(Error::NonPositiveLeading(_))));
        assert!(matches!(dynamic_psh_margin(&[1.0, 2.0], 0.1), Err(Error::NotSorted)));
    }

    #[test]
    fn lemma22_examples() {
        let v = lemma22_bound(&[1.0, 1.0, 1.0], 2, 2.0).unwrap();
        assert!((v - (2.0 * (3f64.sqrt() + 1.0) - 1.0)).abs() < 1e-14);
        // x_k <= 0 cannot happen inside Gamma_k for k >= 1 with sorted x,
        // but x_k small: margin is positive for any positive C
        assert!(lemma22_bound(&[5.0, 1e-9, -1e-10], 2, 1e-3).unwrap() > 0.0);
        assert!(lemma22_bound(&[3.0, 1.0, -1.0], 2, 1.0).is_err());
    }

    #[test]
    fn property8_examples() {
        let inp = Property8Input { a1: 3.0, a2: 0.0, k_const: 1.0 };
        assert!(property8_check(&[1.0, 1.0, 1.0], 2, inp).unwrap());
        let inp = Property8Input { a1: 1.0, a2: 1.0, k_const: 1.0 };
        assert!(property8_check(&[2.0, 1.0, -0.5], 2, inp).unwrap());
        let inp = Property8Input { a1: 0.1, a2: 1.0, k_const: 1.0 };
        assert!(matches!(property8_check(&[2.0, 1.0, -0.5], 2, inp), Err(Error::Precondition(_))));
    }

    #[test]
    fn properties_at_a_point() {
        let r = cone_properties(&[3.0, 2.0, 1.0, -0.5], 3).unwrap();
        assert!(r.leading_term_margin >= 0.0);
        assert!(r.removal_margin > 0.0);
        assert!(r.gradient_order_margin >= 0.0);
        assert!(r.lower_product_margin >= 0.0);
        assert!(r.upper_product_ratio > 0.0);
    }
}
