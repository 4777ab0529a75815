//! Periodic fields on the flat complex 2-torus `[0, 2pi)^4` with real
//! coordinates `(x1, y1, x2, y2)`, `z_j = x_j + i y_j`, and second-order
//! finite-difference complex Hessians.

use rayon::prelude::*;
use sigmak_core::C64;

pub const AXES: usize = 4;

/// Points per reduction chunk. Partial sums are formed per chunk and then
/// added in chunk order, so reductions do not depend on the thread count.
const CHUNK: usize = 4096;

/// Deterministic sum of a slice.
pub fn det_sum(v: &[f64]) -> f64 {
    let partial: Vec<f64> = v.par_chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    partial.iter().sum()
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.par_chunks(CHUNK).map(|c| c.iter().fold(0.0f64, |m, x| m.max(x.abs()))).reduce(|| 0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> =
        a.par_chunks(CHUNK).zip(b.par_chunks(CHUNK)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).collect();
    partial.iter().sum()
}

/// Grid geometry: `N` points per axis, spacing `h = 2 pi / N`, row-major
/// layout with `y2` fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, GridError> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(GridError::BadSize(n));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n.pow(4)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n as f64
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((AXES - 1 - axis) as u32)
    }

    pub fn coords(&self, idx: usize) -> [usize; AXES] {
        let n = self.n;
        [idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n]
    }

    pub fn index(&self, c: [usize; AXES]) -> usize {
        ((c[0] * self.n + c[1]) * self.n + c[2]) * self.n + c[3]
    }

    /// Real coordinates of a grid index.
    pub fn point(&self, idx: usize) -> [f64; AXES] {
        let h = self.h();
        self.coords(idx).map(|c| c as f64 * h)
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn([f64; AXES]) -> f64 + Sync) -> GridField {
        let data = (0..self.len()).into_par_iter().map(|i| f(self.point(i))).collect();
        GridField { grid: *self, data }
    }

    /// Index offsets `(+1, -1)` along every axis at `c`, with wraparound.
    fn neighbours(&self, c: [usize; AXES]) -> [(isize, isize); AXES] {
        let n = self.n;
        let mut out = [(0, 0); AXES];
        for a in 0..AXES {
            let s = self.stride(a) as isize;
            let plus = if c[a] + 1 == n { -(n as isize - 1) * s } else { s };
            let minus = if c[a] == 0 { (n as isize - 1) * s } else { -s };
            out[a] = (plus, minus);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid size must be even and at least 8, got {0}")]
    BadSize(usize),
    #[error("field has {got} values, grid needs {expected}")]
    Length { expected: usize, got: usize },
}

/// Real values on the periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != grid.len() {
            return Err(GridError::Length { expected: grid.len(), got: data.len() });
        }
        Ok(Self { grid, data })
    }

    pub fn mean(&self) -> f64 {
        det_sum(&self.data) / self.data.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.data)
    }

    /// Subtracts the mean in place.
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        self.data.par_iter_mut().for_each(|v| *v -= m);
    }
}

/// Pointwise Hermitian 2x2 matrices `[[a, b], [conj b, d]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianField {
    pub grid: Grid,
    pub a: Vec<f64>,
    pub d: Vec<f64>,
    pub b: Vec<C64>,
}

impl HermitianField {
    pub fn constant(grid: Grid, a: f64, d: f64, b: C64) -> Self {
        let len = grid.len();
        Self { grid, a: vec![a; len], d: vec![d; len], b: vec![b; len] }
    }

    pub fn at(&self, i: usize) -> (f64, f64, C64) {
        (self.a[i], self.d[i], self.b[i])
    }
}

/// Second differences at one point: `(h11, h22, h12)` of the complex Hessian.
#[inline]
fn hessian_at(v: &[f64], grid: &Grid, idx: usize, inv_h2: f64) -> (f64, f64, C64) {
    let nb = grid.neighbours(grid.coords(idx));
    let at = |off: isize| v[(idx as isize + off) as usize];
    let centre = v[idx];
    let pure = |a: usize| (at(nb[a].0) - 2.0 * centre + at(nb[a].1)) * inv_h2;
    let mixed = |a: usize, b: usize| {
        let (ap, am) = nb[a];
        let (bp, bm) = nb[b];
        (at(ap + bp) - at(ap + bm) - at(am + bp) + at(am + bm)) * 0.25 * inv_h2
    };
    let h11 = 0.25 * (pure(0) + pure(1));
    let h22 = 0.25 * (pure(2) + pure(3));
    let h12 = C64::new(0.25 * (mixed(0, 2) + mixed(1, 3)), 0.25 * (mixed(0, 3) - mixed(1, 2)));
    (h11, h22, h12)
}

/// `u_{j kbar} = (1/4)[(d_xj d_xk + d_yj d_yk) u + i (d_xj d_yk - d_yj d_xk) u]`
/// with 3-point pure and 4-point mixed centred differences. Hermitian by
/// construction: only the upper entry is stored.
pub fn complex_hessian(u: &GridField) -> HermitianField {
    let grid = u.grid;
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let vals: Vec<(f64, f64, C64)> =
        (0..grid.len()).into_par_iter().map(|i| hessian_at(&u.data, &grid, i, inv_h2)).collect();
    let mut a = Vec::with_capacity(vals.len());
    let mut d = Vec::with_capacity(vals.len());
    let mut b = Vec::with_capacity(vals.len());
    for (p, q, r) in vals {
        a.push(p);
        d.push(q);
        b.push(r);
    }
    HermitianField { grid, a, d, b }
}

/// Applies `v -> sum` of a pointwise contraction of the complex Hessian of `v`
/// into `out`, without materialising the Hessian field.
pub fn contract_hessian(
    v: &[f64],
    grid: &Grid,
    out: &mut [f64],
    f: impl Fn(usize, f64, f64, C64) -> f64 + Sync,
) {
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        let (h11, h22, h12) = hessian_at(v, grid, i, inv_h2);
        *o = f(i, h11, h22, h12);
    });
}

/// Centred first differences: `|Du|^2 = sum_j |u_{z_j}|^2` with
/// `u_{z_j} = (u_xj - i u_yj) / 2`.
pub fn gradient_norm_sq(u: &GridField) -> Vec<f64> {
    let grid = u.grid;
    let inv_2h = 1.0 / (2.0 * grid.h());
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let nb = grid.neighbours(grid.coords(i));
            let at = |off: isize| u.data[(i as isize + off) as usize];
            (0..AXES)
                .map(|a| {
                    let d = (at(nb[a].0) - at(nb[a].1)) * inv_2h;
                    0.25 * d * d
                })
                .sum()
        })
        .collect()
}
