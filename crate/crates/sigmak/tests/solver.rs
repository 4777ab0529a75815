use sigmak::problem::{manufactured_problem, sup_error};
use sigmak::solver::{linearized_apply, newton_solve, residual, Chi, PointOperator, SolveError, SolverConfig};
use sigmak::torus::{complex_hessian, Grid, GridField};
use sigmak_core::linalg::cabs;
use sigmak_core::operator::HessianSumSpec;
use sigmak_core::C64;

fn op(k: usize, b: Vec<f64>) -> PointOperator {
    PointOperator::new(HessianSumSpec::new(2, k, b).unwrap()).unwrap()
}

/// `u = cos x1 cos y2 + sin(x2 + y1)` and its exact complex Hessian.
fn smooth(p: [f64; 4]) -> f64 {
    p[0].cos() * p[3].cos() + (p[2] + p[1]).sin()
}

fn smooth_hessian(p: [f64; 4]) -> (f64, f64, C64) {
    let c = p[0].cos() * p[3].cos();
    let s = (p[2] + p[1]).sin();
    (-(c + s) / 4.0, -(c + s) / 4.0, C64::new(0.0, (p[0].sin() * p[3].sin() + s) / 4.0))
}

fn stencil_error(n: usize) -> f64 {
    let g = Grid::new(n).unwrap();
    let h = complex_hessian(&g.sample(smooth));
    (0..g.len())
        .map(|i| {
            let (a, d, b) = smooth_hessian(g.point(i));
            (h.a[i] - a).abs().max((h.d[i] - d).abs()).max(cabs(h.b[i] - b))
        })
        .fold(0.0, f64::max)
}

#[test]
fn stencil_is_second_order() {
    let (e8, e16) = (stencil_error(8), stencil_error(16));
    let ratio = e8 / e16;
    assert!((3.4..=4.6).contains(&ratio), "{e8} {e16} {ratio}");
}

#[test]
fn linearization_error_is_quadratic() {
    let g = Grid::new(8).unwrap();
    let o = op(2, vec![1.0]);
    let chi = Chi::identity();
    let mut u = g.sample(|p| 0.2 * (p[0].cos() + (p[2] + p[3]).sin()));
    u.remove_mean();
    let v = g.sample(|p| (p[1] - p[3]).cos() + 0.5 * p[0].sin());
    let psi = GridField::constant(g, 1.0);
    let r0 = residual(&o, &u, 0.0, &chi, &psi).unwrap();
    let lv = linearized_apply(&o, &u, &chi, &v).unwrap();
    let defect = |t: f64| {
        let ut = GridField { grid: g, data: u.data.iter().zip(&v.data).map(|(a, b)| a + t * b).collect() };
        let rt = residual(&o, &ut, 0.0, &chi, &psi).unwrap();
        (0..g.len()).map(|i| (rt.data[i] - r0.data[i] - t * lv.data[i]).abs()).fold(0.0, f64::max)
    };
    let (d1, d2) = (defect(1e-2), defect(5e-3));
    assert!(d1 > 0.0);
    let ratio = d1 / d2;
    assert!((3.9..=4.1).contains(&ratio), "{d1} {d2} {ratio}");
}

#[test]
fn linearization_kills_constants() {
    let g = Grid::new(8).unwrap();
    let u = g.sample(|p| 0.1 * p[0].cos());
    let lv = linearized_apply(&op(2, vec![1.0]), &u, &Chi::identity(), &GridField::constant(g, 2.5)).unwrap();
    assert!(lv.data.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn laplace_case_is_one_newton_step() {
    // k = 1, m = 0: F is the trace, so the equation is linear in u
    let g = Grid::new(16).unwrap();
    let o = op(1, vec![]);
    let chi = Chi::identity();
    let (exact, psi) = manufactured_problem(g, 0.3, &o, &chi).unwrap();
    let sol = newton_solve(&o, &chi, &psi, GridField::zeros(g), 0.0, &SolverConfig::default()).unwrap();
    assert!(sol.trace.len() <= 3, "{:?}", sol.trace);
    assert_eq!(sol.trace[1].step, 1.0);
    assert!(sol.state.residual_norm <= 1e-9);
    assert!(sol.state.c.abs() < 1e-10);
    // discretization error of the 3-point Laplacian for cos: A h^2 / 12 per axis
    let h = g.h();
    assert!(sup_error(&sol.state.u, &exact) <= 0.3 * h * h, "{}", sup_error(&sol.state.u, &exact));
}

#[test]
fn solution_has_zero_mean() {
    let g = Grid::new(8).unwrap();
    let o = op(2, vec![1.0]);
    let chi = Chi::identity();
    let psi = g.sample(|p| 3.0 * (0.5 * p[0].cos() + 0.2 * p[3].sin()).exp());
    let sol = newton_solve(&o, &chi, &psi, GridField::zeros(g), 0.0, &SolverConfig::default()).unwrap();
    assert!(sol.state.u.mean().abs() <= 1e-12);
    assert!(sol.trace.iter().all(|r| r.mean_u.abs() <= 1e-12));
    assert!(sol.state.cone_ok);
}

fn near_boundary_start(g: Grid) -> GridField {
    // chi + ddbar u0 has smallest eigenvalue 1 - 3.9/4 = 0.025
    let mut u0 = g.sample(|p| 3.9 * (p[0].cos() + p[2].cos()));
    u0.remove_mean();
    u0
}

#[test]
fn cone_guard_exhaustion_is_reported() {
    let g = Grid::new(8).unwrap();
    let o = op(2, vec![]);
    let psi = GridField::constant(g, 1.0);
    let cfg = SolverConfig { max_halvings: 0, ..SolverConfig::default() };
    let err = newton_solve(&o, &Chi::identity(), &psi, near_boundary_start(g), 0.0, &cfg).unwrap_err();
    match &err {
        SolveError::ConeGuardExhausted { iteration, halvings, witness, trace } => {
            assert_eq!((*iteration, *halvings), (1, 0));
            assert!(*witness < g.len());
            assert_eq!(trace.len(), 1);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.trace().is_some());
}

#[test]
fn halving_recovers_from_near_boundary_start() {
    let g = Grid::new(8).unwrap();
    let o = op(2, vec![]);
    let psi = GridField::constant(g, 1.0);
    let sol = newton_solve(&o, &Chi::identity(), &psi, near_boundary_start(g), 0.0, &SolverConfig::default()).unwrap();
    assert!(sol.trace.iter().skip(1).any(|r| r.step < 1.0));
    assert!(sol.state.residual_norm <= 1e-9 && sol.state.cone_ok);
}

#[test]
fn uniformly_positive_chi_is_required() {
    let g = Grid::new(8).unwrap();
    let chi = Chi::Constant { a: 0.5, d: 2.0, b: C64::new(0.0, 0.0) };
    let psi = GridField::constant(g, 1.0);
    let err = newton_solve(&op(2, vec![1.0]), &chi, &psi, GridField::zeros(g), 0.0, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, SolveError::ChiNotUniformlyPositive { .. }));
}
