//! Small dense eigenproblems.
//!
//! Margin matrices built from spectra with `lambda_1` around `1e6` have
//! condition numbers near `1e24`, so the real symmetric solver here is a
//! cyclic Jacobi iteration with the relative off-diagonal test
//! `|a_pq| <= eps * sqrt(|a_pp a_qq|)`. For positive definite input that
//! test keeps every eigenvalue accurate relative to its own size, which is
//! what a sign certificate needs. Hermitian frames and polynomial roots go
//! through nalgebra.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::symfun::two_prod;
use crate::{Error, Result, C64};

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector of `values[j]`.
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

impl SymEigen {
    pub fn min(&self) -> (f64, DVector<f64>) {
        (self.values[0], self.vectors.column(0).into_owned())
    }
}

const MAX_SWEEPS: usize = 80;

/// Cyclic Jacobi eigensolver. Only the upper triangle of `m` is read.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "jacobi_eigen needs a square matrix");
    let mut a = m.clone();
    for p in 0..n {
        for q in (p + 1)..n {
            a[(q, p)] = a[(p, q)];
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if libm::fabs(apq) <= f64::EPSILON * libm::sqrt(libm::fabs(app * aqq)) {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if libm::fabs(theta) > 1e150 {
                    0.5 / theta
                } else {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                let tau = s / (1.0 + c);
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        let np = arp - s * (arq + tau * arp);
                        let nq = arq + s * (arp - tau * arq);
                        a[(r, p)] = np;
                        a[(p, r)] = np;
                        a[(r, q)] = nq;
                        a[(q, r)] = nq;
                    }
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp - s * (vrq + tau * vrp);
                    v[(r, q)] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    SymEigen { values, vectors, sweeps }
}

/// Double-double accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn add_prod(&mut self, a: f64, b: f64) {
        let (p, perr) = two_prod(a, b);
        let s = self.hi + p;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (p - bb);
        self.hi = s;
        self.lo += err + perr;
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `v^T M v` with double-double accumulation, so cancellation between
/// large entries does not swamp a small result.
pub fn quad_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = Dd::default();
    for p in 0..n {
        for q in 0..n {
            let (pv, perr) = two_prod(v[p], v[q]);
            acc.add_prod(m[(p, q)], pv);
            acc.add_prod(m[(p, q)], perr);
        }
    }
    acc.value()
}

/// `xi^* M xi` for real symmetric `M`; real by construction.
pub fn hermitian_form_real(m: &DMatrix<f64>, xi: &[C64]) -> f64 {
    let re: Vec<f64> = xi.iter().map(|z| z.re).collect();
    let im: Vec<f64> = xi.iter().map(|z| z.im).collect();
    quad_form(m, &re) + quad_form(m, &im)
}

/// Frobenius norm of `g - g^*` relative to `|g|`.
pub fn hermitian_defect(g: &DMatrix<C64>) -> f64 {
    let n = g.nrows();
    let mut d = 0.0;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            d += (g[(i, j)] - g[(j, i)].conj()).norm_sqr();
            s += g[(i, j)].norm_sqr();
        }
    }
    libm::sqrt(d) / libm::sqrt(s).max(f64::MIN_POSITIVE)
}

/// Default Hermitian tolerance on the relative defect.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues of a Hermitian matrix in decreasing order with a unitary
/// frame `U` (columns are eigenvectors) so that `g = U diag(lambda) U^*`.
pub fn eig_desc(g: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = g.nrows();
    if n != g.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: g.ncols() });
    }
    let defect = hermitian_defect(g);
    if defect > HERMITIAN_TOL {
        return Err(Error::NonHermitianInput(defect));
    }
    let eig = nalgebra::SymmetricEigen::new(g.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut frame = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        frame.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, frame))
}

/// Modulus of a complex number.
pub fn cabs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

/// Closed-form eigen decomposition of the Hermitian 2x2 matrix
/// `[[a, b], [conj(b), d]]`. Returns eigenvalues in decreasing order and
/// the frame columns.
pub fn eig2_hermitian(a: f64, d: f64, b: C64) -> ([f64; 2], [[C64; 2]; 2]) {
    let half_diff = 0.5 * (a - d);
    let mean = 0.5 * (a + d);
    let bn = cabs(b);
    let r = libm::hypot(half_diff, bn);
    let l1 = mean + r;
    let l2 = mean - r;
    if bn == 0.0 {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        return if a >= d {
            ([a, d], [[one, zero], [zero, one]])
        } else {
            ([d, a], [[zero, one], [one, zero]])
        };
    }
    // First eigenvector (b, l1 - a) or equivalently (l1 - d, conj b); pick
    // the better conditioned representation.
    let (x, y) = if half_diff >= 0.0 {
        (C64::new(l1 - d, 0.0), b.conj())
    } else {
        (b, C64::new(l1 - a, 0.0))
    };
    let nrm = libm::sqrt(x.norm_sqr() + y.norm_sqr());
    let u1 = [x / nrm, y / nrm];
    // orthogonal complement
    let u2 = [-u1[1].conj(), u1[0].conj()];
    ([l1, l2], [u1, u2])
}

/// Roots of the monic polynomial `t^m + c_1 t^{m-1} + ... + c_m`
/// (`coeffs = [c_1, ..., c_m]`) as eigenvalues of its companion matrix.
pub fn monic_roots(coeffs: &[f64]) -> Vec<C64> {
    let m = coeffs.len();
    if m == 0 {
        return Vec::new();
    }
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        comp[(0, j)] = -coeffs[j];
    }
    for i in 1..m {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}
