//! Manufactured solutions and a posteriori diagnostics for torus states.

use rayon::prelude::*;
use serde::Serialize;
use sigmak_core::C64;

use sigmak_core::operator::HessianSumSpec;

use crate::io::{ChiMode, ProblemFile, PsiMode};
use crate::solver::{assemble_g, Chi, KrylovSettings, Linearization, PointOperator, SolveError, SolverConfig};
use crate::torus::{gradient_norm_sq, Grid, GridField};

/// `u* = A (cos x1 + cos y1 + cos x2 + cos y2)` (mean zero) and
/// `psi* = F(lambda(chi + ddbar u*))` with the exact second derivatives of `u*`.
pub fn manufactured_problem(
    grid: Grid,
    amplitude: f64,
    op: &PointOperator,
    chi: &Chi,
) -> Result<(GridField, GridField), SolveError> {
    let mut u = grid.sample(|p| amplitude * p.iter().map(|t| t.cos()).sum::<f64>());
    u.remove_mean();
    let values: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let p = grid.point(i);
            let (ca, cd, cb) = chi.at(i);
            // u_{1 1bar} = (u_x1x1 + u_y1y1)/4, u_{1 2bar} = 0
            let a = ca - 0.25 * amplitude * (p[0].cos() + p[1].cos());
            let d = cd - 0.25 * amplitude * (p[2].cos() + p[3].cos());
            let pt = op.at(a, d, cb);
            pt.admissible.then_some(pt.value)
        })
        .collect();
    let data = values.into_iter().collect::<Option<Vec<f64>>>().ok_or(SolveError::AmplitudeTooLarge(amplitude))?;
    Ok((u, GridField { grid, data }))
}

/// `sup |u - v|` after removing both means.
pub fn sup_error(u: &GridField, v: &GridField) -> f64 {
    let (mu, mv) = (u.mean(), v.mean());
    u.data.iter().zip(&v.data).fold(0.0f64, |m, (a, b)| m.max(((a - mu) - (b - mv)).abs()))
}

/// Values of the auxiliary functions `phi(t) = e^{N t}` and
/// `psi(s) = e^{K(-s + |u|_{C1} + 1)}` and their sign conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignConditions {
    /// `min phi'` over the grid (must be positive).
    pub phi1_min: f64,
    /// `max psi'` over the grid (must be negative).
    pub psi1_max: f64,
    /// `min psi''` over the grid (must be positive).
    pub psi2_min: f64,
    /// `min` of `log(psi) - N t - log 2`; positive iff
    /// `phi'' - 2 psi'' (phi'/psi')^2 = N^2 e^{Nt} (1 - 2 e^{Nt}/psi) > 0`.
    pub combined_log_min: f64,
    pub all_hold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub lambda_max: f64,
    pub psh_margin: f64,
    pub delta: f64,
    pub c1_norm: f64,
    pub g_max: f64,
    pub g_max_index: usize,
    pub g_max_coords: [usize; 4],
    pub n_test: f64,
    pub k_test: f64,
    pub signs: SignConditions,
    pub cone_ok: bool,
}

/// Evaluates `G = log lambda_max + e^{N |Du|^2} + e^{K(-u + |u|_{C1} + 1)}`
/// over the grid and checks the sign conditions of the two auxiliary
/// functions at the computed values.
pub fn diagnose(
    op: &PointOperator,
    chi: &Chi,
    u: &GridField,
    n_test: f64,
    k_test: f64,
    delta: f64,
) -> Result<Diagnostics, SolveError> {
    let grid = u.grid;
    let g = assemble_g(u, chi, f64::NEG_INFINITY)?;
    let lin = Linearization::new(op, &g);
    let du2 = gradient_norm_sq(u);
    let c1_norm = u.data.iter().zip(&du2).fold(0.0f64, |m, (v, d)| m.max(v.abs() + d.sqrt()));
    let field: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let lmax = lin.points[i].lambda[0];
            lmax.ln() + (n_test * du2[i]).exp() + (k_test * (-u.data[i] + c1_norm + 1.0)).exp()
        })
        .collect();
    let (g_max_index, g_max) =
        field.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });

    let mut signs = SignConditions {
        phi1_min: f64::INFINITY,
        psi1_max: f64::NEG_INFINITY,
        psi2_min: f64::INFINITY,
        combined_log_min: f64::INFINITY,
        all_hold: false,
    };
    for i in 0..grid.len() {
        let t = du2[i];
        let log_psi = k_test * (-u.data[i] + c1_norm + 1.0);
        let psi = log_psi.exp();
        signs.phi1_min = signs.phi1_min.min(n_test * (n_test * t).exp());
        signs.psi1_max = signs.psi1_max.max(-k_test * psi);
        signs.psi2_min = signs.psi2_min.min(k_test * k_test * psi);
        signs.combined_log_min = signs.combined_log_min.min(log_psi - n_test * t - std::f64::consts::LN_2);
    }
    signs.all_hold = signs.phi1_min > 0.0 && signs.psi1_max < 0.0 && signs.psi2_min > 0.0 && signs.combined_log_min > 0.0;

    Ok(Diagnostics {
        lambda_max: lin.lambda_max(),
        psh_margin: lin.psh_margin(delta),
        delta,
        c1_norm,
        g_max,
        g_max_index,
        g_max_coords: grid.coords(g_max_index),
        n_test,
        k_test,
        signs,
        cone_ok: lin.first_inadmissible().is_none(),
    })
}

/// Constant `chi = s I`.
pub fn scaled_identity(s: f64) -> Chi {
    Chi::Constant { a: s, d: s, b: C64::new(0.0, 0.0) }
}

/// Everything `newton_solve` needs, built from a problem file.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Grid,
    pub op: PointOperator,
    pub chi: Chi,
    pub psi: GridField,
    /// The manufactured solution, when there is one.
    pub exact: Option<GridField>,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Grid(#[from] crate::torus::GridError),
    #[error("operator: {0}")]
    Operator(#[from] sigmak_core::Error),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

pub fn setup(p: &ProblemFile) -> Result<Setup, SetupError> {
    let grid = Grid::new(p.n)?;
    let op = PointOperator::new(HessianSumSpec::new(2, p.k, p.b.clone())?)?;
    let chi = match p.chi {
        ChiMode::Identity => Chi::identity(),
        ChiMode::Scaled => scaled_identity(p.chi_scale),
    };
    chi.check(&grid, p.epsilon)?;
    let (psi, exact) = match p.psi {
        PsiMode::Manufactured => {
            let (u, psi) = manufactured_problem(grid, p.amplitude, &op, &chi)?;
            (psi, Some(u))
        }
        PsiMode::Constant => (GridField::constant(grid, p.value), None),
        PsiMode::Cosine => (grid.sample(|x| p.value * (p.amplitude * x[0].cos()).exp()), None),
    };
    let solver = SolverConfig {
        tol: p.tol,
        max_iterations: p.max_iterations,
        max_halvings: p.max_halvings,
        delta: p.delta,
        epsilon: p.epsilon,
        krylov: KrylovSettings { tol: p.linear_tol, restart: p.restart, ..KrylovSettings::default() },
    };
    Ok(Setup { grid, op, chi, psi, exact, solver })
}
