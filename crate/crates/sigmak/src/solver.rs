//! Damped Newton solver for `F(lambda(chi + ddbar u)) = psi e^c` on the flat
//! complex 2-torus, with a mean-zero constraint on `u`.

use rayon::prelude::*;
use serde::Serialize;
use sigmak_core::linalg::eig2_hermitian;
use sigmak_core::operator::HessianSumSpec;
use sigmak_core::symfun::elementary_all;
use sigmak_core::C64;

use crate::torus::{complex_hessian, contract_hessian, det_sum, dot, sup_norm, Grid, GridField, HermitianField};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("chi is not uniformly positive: smallest eigenvalue {min_eig} at point {index} is below epsilon {epsilon}")]
    ChiNotUniformlyPositive { index: usize, min_eig: f64, epsilon: f64 },
    #[error("grid point {index} at {coords:?} left the admissible cone")]
    InadmissiblePoint { index: usize, coords: [usize; 4] },
    #[error("operator must act on complex dimension 2, got n = {0}")]
    Dimension(usize),
    #[error("psi must be strictly positive (minimum {0})")]
    NonPositivePsi(f64),
    #[error("no admissible residual-reducing step after {halvings} halvings at iteration {iteration}; witness point {witness}")]
    ConeGuardExhausted { iteration: usize, halvings: usize, witness: usize, trace: Vec<TraceRow> },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64, trace: Vec<TraceRow> },
    #[error("linear solve stagnated at iteration {iteration} (relative residual {relative:e})")]
    LinearSolveStagnation { iteration: usize, relative: f64, trace: Vec<TraceRow> },
    #[error("manufactured amplitude {0} makes g leave the cone")]
    AmplitudeTooLarge(f64),
}

impl SolveError {
    pub fn trace(&self) -> Option<&[TraceRow]> {
        match self {
            SolveError::ConeGuardExhausted { trace, .. }
            | SolveError::MaxIterations { trace, .. }
            | SolveError::LinearSolveStagnation { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// Pointwise evaluation of the lifted operator for `n = 2`:
/// `F(lambda) = sum_j sigma_j(lambda) sigma_{k-j}(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOperator {
    spec: HessianSumSpec,
    /// `sigma_s(y)` for `s = 0..=k`.
    ey: Vec<f64>,
}

impl PointOperator {
    pub fn new(spec: HessianSumSpec) -> Result<Self, SolveError> {
        if spec.n() != 2 {
            return Err(SolveError::Dimension(spec.n()));
        }
        let ey = elementary_all(spec.y(), spec.k()).as_slice().to_vec();
        Ok(Self { spec, ey })
    }

    pub fn spec(&self) -> &HessianSumSpec {
        &self.spec
    }

    fn ey(&self, s: isize) -> f64 {
        if s < 0 || s as usize >= self.ey.len() {
            0.0
        } else {
            self.ey[s as usize]
        }
    }

    /// `sigma_i` of the lifted vector `(l1, l2, y)`.
    fn lifted_sigma(&self, i: isize, l1: f64, l2: f64) -> f64 {
        self.ey(i) + (l1 + l2) * self.ey(i - 1) + l1 * l2 * self.ey(i - 2)
    }

    pub fn value(&self, l: [f64; 2]) -> f64 {
        self.lifted_sigma(self.spec.k() as isize, l[0], l[1])
    }

    /// `(F_1, F_2)`.
    pub fn grad(&self, l: [f64; 2]) -> [f64; 2] {
        let k = self.spec.k() as isize;
        [self.ey(k - 1) + l[1] * self.ey(k - 2), self.ey(k - 1) + l[0] * self.ey(k - 2)]
    }

    /// Lifted cone membership of `(l1, l2, y)`.
    pub fn admissible(&self, l: [f64; 2]) -> bool {
        (1..=self.spec.k() as isize).all(|i| self.lifted_sigma(i, l[0], l[1]) > 0.0)
    }

    /// `F(lambda(g))` and the linearization `B = U diag(F_i) U^*` at one
    /// Hermitian `g`: `DF(g)[eta] = B11 eta11 + B22 eta22 + 2 Re(conj(B12) eta12)`.
    pub fn at(&self, a: f64, d: f64, b: C64) -> PointData {
        let (l, u) = eig2_hermitian(a, d, b);
        let f = self.value(l);
        let g = self.grad(l);
        let (u1, u2) = (u[0], u[1]);
        let b11 = g[0] * u1[0].norm_sqr() + g[1] * u2[0].norm_sqr();
        let b22 = g[0] * u1[1].norm_sqr() + g[1] * u2[1].norm_sqr();
        let b12 = u1[0] * u1[1].conj() * g[0] + u2[0] * u2[1].conj() * g[1];
        PointData { lambda: l, value: f, b11, b22, b12, admissible: self.admissible(l) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointData {
    pub lambda: [f64; 2],
    pub value: f64,
    pub b11: f64,
    pub b22: f64,
    pub b12: C64,
    pub admissible: bool,
}

/// The reference form `chi`.
#[derive(Debug, Clone, PartialEq)]
pub enum Chi {
    Constant { a: f64, d: f64, b: C64 },
    Field(HermitianField),
}

impl Chi {
    pub fn identity() -> Self {
        Chi::Constant { a: 1.0, d: 1.0, b: C64::new(0.0, 0.0) }
    }

    pub fn at(&self, i: usize) -> (f64, f64, C64) {
        match self {
            Chi::Constant { a, d, b } => (*a, *d, *b),
            Chi::Field(f) => f.at(i),
        }
    }

    /// Checks `chi >= epsilon I` at every point of `grid`.
    pub fn check(&self, grid: &Grid, epsilon: f64) -> Result<(), SolveError> {
        let points = match self {
            Chi::Constant { .. } => 1,
            Chi::Field(_) => grid.len(),
        };
        for i in 0..points {
            let (a, d, b) = self.at(i);
            let (l, _) = eig2_hermitian(a, d, b);
            if l[1] < epsilon {
                return Err(SolveError::ChiNotUniformlyPositive { index: i, min_eig: l[1], epsilon });
            }
        }
        Ok(())
    }
}

/// `g = chi + ddbar u`, after checking `chi >= epsilon I`.
pub fn assemble_g(u: &GridField, chi: &Chi, epsilon: f64) -> Result<HermitianField, SolveError> {
    chi.check(&u.grid, epsilon)?;
    let mut h = complex_hessian(u);
    h.a.par_iter_mut().zip(h.d.par_iter_mut()).zip(h.b.par_iter_mut()).enumerate().for_each(|(i, ((a, d), b))| {
        let (ca, cd, cb) = chi.at(i);
        *a += ca;
        *d += cd;
        *b += cb;
    });
    Ok(h)
}

/// Pointwise operator data over the grid.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub points: Vec<PointData>,
}

impl Linearization {
    pub fn new(op: &PointOperator, g: &HermitianField) -> Self {
        let points = (0..g.grid.len()).into_par_iter().map(|i| op.at(g.a[i], g.d[i], g.b[i])).collect();
        Self { points }
    }

    pub fn first_inadmissible(&self) -> Option<usize> {
        self.points.iter().position(|p| !p.admissible)
    }

    pub fn lambda_max(&self) -> f64 {
        self.points.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.lambda[0]))
    }

    /// `min (lambda_2 + delta lambda_1)` over the grid.
    pub fn psh_margin(&self, delta: f64) -> f64 {
        self.points.iter().fold(f64::INFINITY, |m, p| m.min(p.lambda[1] + delta * p.lambda[0]))
    }

    /// `min lambda_2 / lambda_1` over the grid.
    pub fn psh_ratio(&self) -> f64 {
        self.points.iter().fold(f64::INFINITY, |m, p| m.min(p.lambda[1] / p.lambda[0]))
    }

    /// `L v = DF(g)[ddbar v]` into `out`.
    pub fn apply(&self, grid: &Grid, v: &[f64], out: &mut [f64]) {
        contract_hessian(v, grid, out, |i, h11, h22, h12| {
            let p = &self.points[i];
            p.b11 * h11 + p.b22 * h22 + 2.0 * (p.b12.conj() * h12).re
        });
    }

    /// Diagonal of `L`: the only stencil entries on the centre are the pure
    /// second differences, `-(B11 + B22) / h^2`.
    pub fn diagonal(&self, grid: &Grid) -> Vec<f64> {
        let inv_h2 = 1.0 / (grid.h() * grid.h());
        self.points.par_iter().map(|p| -(p.b11 + p.b22) * inv_h2).collect()
    }
}

/// `F(lambda(g)) - psi e^c` pointwise.
pub fn residual(op: &PointOperator, u: &GridField, c: f64, chi: &Chi, psi: &GridField) -> Result<GridField, SolveError> {
    let g = assemble_g(u, chi, 0.0)?;
    let lin = Linearization::new(op, &g);
    if let Some(i) = lin.first_inadmissible() {
        return Err(SolveError::InadmissiblePoint { index: i, coords: u.grid.coords(i) });
    }
    Ok(residual_from(&lin, psi, c))
}

fn residual_from(lin: &Linearization, psi: &GridField, c: f64) -> GridField {
    let ec = c.exp();
    let data = lin.points.par_iter().zip(&psi.data).map(|(p, s)| p.value - s * ec).collect();
    GridField { grid: psi.grid, data }
}

/// `L v` for the state `(u, chi)`.
pub fn linearized_apply(op: &PointOperator, u: &GridField, chi: &Chi, v: &GridField) -> Result<GridField, SolveError> {
    let g = assemble_g(u, chi, 0.0)?;
    let lin = Linearization::new(op, &g);
    let mut out = vec![0.0; v.data.len()];
    lin.apply(&u.grid, &v.data, &mut out);
    Ok(GridField { grid: u.grid, data: out })
}

/// Outcome of one Krylov solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovSettings {
    pub tol: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for KrylovSettings {
    fn default() -> Self {
        Self { tol: 1e-8, restart: 40, max_iterations: 4000 }
    }
}

/// Restarted GMRES with right preconditioning by `precond` (a pointwise
/// multiplier). `apply` writes `A x` into its second argument. Stops when
/// `|b - A x| <= tol |b|`, when the budget is spent, or when a whole cycle
/// fails to reduce the residual by 1e-3 relative (stagnation).
pub fn gmres(
    apply: &dyn Fn(&[f64], &mut [f64]),
    precond: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    settings: KrylovSettings,
) -> KrylovStats {
    let len = rhs.len();
    let m = settings.restart;
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovStats { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut work = vec![0.0; len];
    let mut total = 0;
    let mut rel;
    loop {
        apply(x, &mut work);
        let mut r: Vec<f64> = rhs.par_iter().zip(&work).map(|(b, ax)| b - ax).collect();
        let beta = dot(&r, &r).sqrt();
        rel = beta / bnorm;
        if rel <= settings.tol {
            return KrylovStats { iterations: total, relative_residual: rel, converged: true };
        }
        if total >= settings.max_iterations {
            return KrylovStats { iterations: total, relative_residual: rel, converged: false };
        }
        r.par_iter_mut().for_each(|v| *v /= beta);
        let mut basis: Vec<Vec<f64>> = vec![r];
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        let cycle_start = rel;
        for j in 0..m {
            let z: Vec<f64> = basis[j].par_iter().zip(precond).map(|(v, p)| v * p).collect();
            let mut w = vec![0.0; len];
            apply(&z, &mut w);
            // modified Gram-Schmidt
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                hess[i][j] = hij;
                w.par_iter_mut().zip(v).for_each(|(a, b)| *a -= hij * b);
            }
            let hnext = dot(&w, &w).sqrt();
            hess[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let denom = hess[j][j].hypot(hess[j + 1][j]);
            cs[j] = hess[j][j] / denom;
            sn[j] = hess[j + 1][j] / denom;
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= settings.tol || hnext == 0.0 || total >= settings.max_iterations {
                break;
            }
            w.par_iter_mut().for_each(|a| *a /= hnext);
            basis.push(w);
        }
        // back substitution
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for l in (i + 1)..used {
                s -= hess[i][l] * y[l];
            }
            y[i] = s / hess[i][i];
        }
        let mut update = vec![0.0; len];
        for (l, yl) in y.iter().enumerate() {
            update.par_iter_mut().zip(&basis[l]).for_each(|(u, v)| *u += yl * v);
        }
        x.par_iter_mut().zip(&update).zip(precond).for_each(|((xv, u), p)| *xv += u * p);
        if rel > cycle_start * (1.0 - 1e-3) && rel > settings.tol {
            apply(x, &mut work);
            let true_rel = rhs.iter().zip(&work).map(|(b, ax)| (b - ax) * (b - ax)).sum::<f64>().sqrt() / bnorm;
            return KrylovStats { iterations: total, relative_residual: true_rel, converged: false };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// `delta` for the recorded dynamic plurisubharmonic margin.
    pub delta: f64,
    pub epsilon: f64,
    pub krylov: KrylovSettings,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-9, max_iterations: 50, max_halvings: 30, delta: 0.01, epsilon: 1.0, krylov: KrylovSettings::default() }
    }
}

/// One accepted Newton iterate (iteration 0 is the initial state).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual_sup: f64,
    pub step: f64,
    pub c: f64,
    pub lambda_max: f64,
    pub psh_margin: f64,
    pub linear_iterations: usize,
    pub mean_u: f64,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub u: GridField,
    pub c: f64,
    pub residual_norm: f64,
    pub cone_ok: bool,
    /// `min lambda_2 / lambda_1` over the grid.
    pub psh_ratio: f64,
    pub psh_margin: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub state: SolverState,
    pub trace: Vec<TraceRow>,
}

/// Combined residual norm `max(|R|_sup, |mean u|)`.
fn combined_norm(r: &GridField, mean_u: f64) -> f64 {
    sup_norm(&r.data).max(mean_u.abs())
}

struct Evaluated {
    lin: Linearization,
    res: GridField,
    norm: f64,
    mean_u: f64,
}

fn evaluate(op: &PointOperator, u: &GridField, c: f64, chi: &Chi, psi: &GridField) -> Result<Evaluated, usize> {
    let g = assemble_g(u, chi, f64::NEG_INFINITY).expect("chi positivity already checked");
    let lin = Linearization::new(op, &g);
    if let Some(i) = lin.first_inadmissible() {
        return Err(i);
    }
    let res = residual_from(&lin, psi, c);
    let mean_u = u.mean();
    let norm = combined_norm(&res, mean_u);
    Ok(Evaluated { lin, res, norm, mean_u })
}

/// Damped Newton on `(u, c)` for the bordered system
/// `[L, -psi e^c; mean, 0] [du; dc] = -[R; mean u]`.
pub fn newton_solve(
    op: &PointOperator,
    chi: &Chi,
    psi: &GridField,
    u0: GridField,
    c0: f64,
    cfg: &SolverConfig,
) -> Result<Solution, SolveError> {
    chi.check(&psi.grid, cfg.epsilon)?;
    let psi_min = psi.data.iter().copied().fold(f64::INFINITY, f64::min);
    if !(psi_min > 0.0) {
        return Err(SolveError::NonPositivePsi(psi_min));
    }
    let grid = psi.grid;
    let len = grid.len();
    let mut u = u0;
    let mut c = c0;
    let mut ev = evaluate(op, &u, c, chi, psi)
        .map_err(|i| SolveError::InadmissiblePoint { index: i, coords: grid.coords(i) })?;
    let mut trace = vec![TraceRow {
        iteration: 0,
        residual_sup: ev.norm,
        step: 0.0,
        c,
        lambda_max: ev.lin.lambda_max(),
        psh_margin: ev.lin.psh_margin(cfg.delta),
        linear_iterations: 0,
        mean_u: ev.mean_u,
    }];
    let mut iteration = 0;
    while ev.norm > cfg.tol {
        if iteration >= cfg.max_iterations {
            return Err(SolveError::MaxIterations { iterations: iteration, residual: ev.norm, trace });
        }
        iteration += 1;
        let ec = c.exp();
        let psi_ec: Vec<f64> = psi.data.par_iter().map(|s| s * ec).collect();
        let lin = &ev.lin;
        let apply = |x: &[f64], out: &mut [f64]| {
            let (xu, xc) = x.split_at(len);
            let (ou, oc) = out.split_at_mut(len);
            lin.apply(&grid, xu, ou);
            let dc = xc[0];
            ou.par_iter_mut().zip(&psi_ec).for_each(|(o, p)| *o -= p * dc);
            oc[0] = det_sum(xu) / len as f64;
        };
        let mut precond: Vec<f64> = lin.diagonal(&grid).iter().map(|d| 1.0 / d).collect();
        precond.push(1.0);
        let mut rhs: Vec<f64> = ev.res.data.iter().map(|r| -r).collect();
        rhs.push(-ev.mean_u);
        let mut x = vec![0.0; len + 1];
        let stats = gmres(&apply, &precond, &rhs, &mut x, cfg.krylov);
        // A partially converged direction is still usable if it reduces the
        // residual; only an unusable one is reported as stagnation.
        if !stats.converged && stats.relative_residual > 0.5 {
            return Err(SolveError::LinearSolveStagnation { iteration, relative: stats.relative_residual, trace });
        }
        let (du, dc) = x.split_at(len);
        let dc = dc[0];
        let mut step = 1.0;
        let mut halvings = 0;
        let mut witness = 0;
        loop {
            let data: Vec<f64> = u.data.par_iter().zip(du).map(|(a, b)| a + step * b).collect();
            // L kills constants, so projecting out the mean keeps the
            // constraint exact without changing the residual.
            let mut trial = GridField { grid, data };
            trial.remove_mean();
            let tc = c + step * dc;
            match evaluate(op, &trial, tc, chi, psi) {
                Ok(next) if next.norm < ev.norm => {
                    u = trial;
                    c = tc;
                    ev = next;
                    break;
                }
                Ok(_) => {}
                Err(i) => witness = i,
            }
            if halvings >= cfg.max_halvings {
                return Err(SolveError::ConeGuardExhausted { iteration, halvings, witness, trace });
            }
            halvings += 1;
            step *= 0.5;
        }
        trace.push(TraceRow {
            iteration,
            residual_sup: ev.norm,
            step,
            c,
            lambda_max: ev.lin.lambda_max(),
            psh_margin: ev.lin.psh_margin(cfg.delta),
            linear_iterations: stats.iterations,
            mean_u: ev.mean_u,
        });
    }
    let state = SolverState {
        residual_norm: ev.norm,
        cone_ok: ev.lin.first_inadmissible().is_none(),
        psh_ratio: ev.lin.psh_ratio(),
        psh_margin: ev.lin.psh_margin(cfg.delta),
        lambda_max: ev.lin.lambda_max(),
        u,
        c,
    };
    Ok(Solution { state, trace })
}
