//! Command-line front end. Every subcommand writes a CSV and a JSON summary
//! and returns 0 (clean), 1 (assertion violations) or 2 (bad configuration
//! or unwritable output).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sigmak_core::concavity::{min_margin, ConcavityParams};
use sigmak_core::operator::HessianSumSpec;

use crate::io::{emit_csv, emit_json, fmt_real, fmt_reals, parse_list, read_dump, trace_table, write_dump, ProblemFile, Table};
use crate::problem::{diagnose, setup, sup_error};
use crate::solver::newton_solve;
use crate::sweep::{
    claims_sweep, concavity_sweep, cone_sweep, identity_sweep, lift_sweep, quotient_sweep, threshold_scan, ConcavityConfig,
    ConeConfig, ConeSampler, IdentityConfig, LiftConfig, QuotientConfig, ThresholdConfig,
};
use crate::torus::GridField;

#[derive(Parser, Debug)]
#[command(name = "sigmak", version, about = "Checks and solvers for sum-of-Hessian operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Residuals of the elementary symmetric function identities.
    Identities(IdentitiesArgs),
    /// Cone membership, the alternative characterization and the eigenvalue inequalities.
    ConeCheck(ConeArgs),
    /// Lift identity and admissibility conditions for random coefficients.
    LiftCheck(LiftArgs),
    /// Newton quotient identities, Hessian oracle and concavity.
    QuotientCheck(QuotientArgs),
    /// Minimum margin of the key concavity inequality over level-set samples.
    ConcavitySweep(ConcavityArgs),
    /// Minimum margin at one spectrum.
    ConcavityMin(ConcavityMinArgs),
    /// Worst margin over a (delta, lambda_min) grid. Reports only, never fails.
    ThresholdScan(ThresholdArgs),
    /// Ratios of the negative-first-exclusion case over level-set samples.
    ClaimsReport(ConcavityArgs),
    /// Damped Newton solve on the torus from a problem file.
    Solve(SolveArgs),
    /// Maximum-principle test function and sign conditions for a torus state.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// CSV output path [default: <subcommand>.csv]
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// JSON summary path [default: <subcommand>.json]
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

/// Comma-separated reals, e.g. `1,0.5`. An empty string is the empty list.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct Reals(Vec<f64>);

fn reals(s: &str) -> Result<Reals, String> {
    parse_list(s).map(Reals)
}

fn range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(format!("need 0 < LO <= HI, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Args, Debug, Clone)]
struct IdentitiesArgs {
    /// Spectrum length.
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Degree; all of 1..=n when omitted.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Entries are uniform in [lo, hi].
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    hi: f64,
    /// Largest accepted relative residual.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug, Clone)]
struct ConeArgs {
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Accepted cone samples.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// `gaussian` (orthant plus noise) or `box` (uniform in [lo, hi]^n).
    #[arg(long, default_value = "gaussian", value_parser = ["gaussian", "box"])]
    sampler: String,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    lo: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    hi: f64,
    /// Bound on sigma_k for the lower-bound property.
    #[arg(long, default_value_t = 1.0)]
    a1: f64,
    /// Bound on -sigma_{k+1} for the lower-bound property.
    #[arg(long, default_value_t = 1.0)]
    a2: f64,
    /// Smallest accepted relative margin is -tol.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Relative distance of the boundary probes.
    #[arg(long, default_value_t = 1e-6)]
    boundary_eta: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug, Clone)]
struct LiftArgs {
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Number of coefficients b_1..b_m.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Fixed coefficients (comma-separated); random real-rooted ones when omitted.
    #[arg(long, value_parser = reals)]
    b: Option<Reals>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug, Clone)]
struct QuotientArgs {
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// How many of the samples also get the finite-difference Hessian check.
    #[arg(long, default_value_t = 1000)]
    fd_samples: usize,
    #[arg(long, default_value_t = 1e-10)]
    equality_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    fd_tol: f64,
    /// Tolerance on the recursion margin and the largest Hessian eigenvalue, relative to scale.
    #[arg(long, default_value_t = 1e-10)]
    margin_tol: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug, Clone)]
struct OperatorArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Lower-order coefficients b_1..b_m (comma-separated, empty for sigma_k).
    #[arg(long, value_parser = reals, default_value = "")]
    b: Reals,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
}

#[derive(Args, Debug, Clone)]
struct ConcavityArgs {
    #[command(flatten)]
    op: OperatorArgs,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Range of the largest eigenvalue, LO:HI.
    #[arg(long, value_parser = range, default_value = "1e3:1e6")]
    lambda1: (f64, f64),
    /// Level of F on which samples are drawn.
    #[arg(long, default_value_t = 1.0)]
    level: f64,
    /// Accepted samples.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Give up after samples * this many draws.
    #[arg(long, default_value_t = 20)]
    max_draw_factor: usize,
    /// Share of draws that solve for the last entry instead of scaling the tail.
    #[arg(long, default_value_t = 0.5)]
    solve_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

impl ConcavityArgs {
    fn config(&self) -> ConcavityConfig {
        ConcavityConfig {
            n: self.op.n,
            k: self.op.k,
            b: self.op.b.0.clone(),
            gamma: self.op.gamma,
            delta: self.delta,
            lambda_min: self.lambda1.0,
            lambda_max: self.lambda1.1,
            level: self.level,
            samples: self.samples,
            seed: self.seed,
            max_draw_factor: self.max_draw_factor,
            solve_fraction: self.solve_fraction,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ConcavityMinArgs {
    #[command(flatten)]
    op: OperatorArgs,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// The spectrum, sorted decreasingly (comma-separated).
    #[arg(long, value_parser = reals, allow_hyphen_values = true)]
    lambda: Reals,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug, Clone)]
struct ThresholdArgs {
    #[command(flatten)]
    op: OperatorArgs,
    #[arg(long, value_parser = reals, default_value = "1e-3,1e-2,0.1,0.5")]
    deltas: Reals,
    #[arg(long, value_parser = reals, default_value = "1,10,100,1000")]
    lambda_mins: Reals,
    /// Each cell samples lambda_1 in [lambda_min, lambda_min * span].
    #[arg(long, default_value_t = 10.0)]
    span: f64,
    /// Accepted samples per cell.
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 0.5)]
    solve_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args, Debug, Clone)]
struct SolveArgs {
    /// Problem file ([grid], [operator], [chi], [psi], [solver] sections).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// HCL1 dump of the final u.
    #[arg(long, value_name = "PATH")]
    dump: Option<PathBuf>,
    /// Trace CSV path [default: solve.csv]
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// JSON summary path [default: solve.json]
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct DiagnoseArgs {
    /// Problem file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// HCL1 dump holding u; the problem is solved first when omitted.
    #[arg(long, value_name = "PATH")]
    state: Option<PathBuf>,
    /// JSON summary path [default: diagnose.json]
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
}

type Outcome = Result<usize, Failure>;

#[derive(Serialize)]
struct Report<'a, C: Serialize, S: Serialize> {
    subcommand: &'a str,
    command_line: &'a [String],
    seed: Option<u64>,
    config: &'a C,
    samples: usize,
    violations: usize,
    summary: &'a S,
    outputs: BTreeMap<&'static str, String>,
    wall_time_s: f64,
}

struct Ctx {
    name: &'static str,
    argv: Vec<String>,
    start: Instant,
}

impl Ctx {
    fn path(&self, given: &Option<PathBuf>, ext: &str) -> Result<PathBuf, Failure> {
        let p = given.clone().unwrap_or_else(|| PathBuf::from(format!("{}.{ext}", self.name)));
        writable(&p)?;
        Ok(p)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish<C: Serialize, S: Serialize>(
        &self,
        seed: Option<u64>,
        config: &C,
        samples: usize,
        violations: usize,
        summary: &S,
        outputs: BTreeMap<&'static str, String>,
        json: &Path,
    ) -> Outcome {
        let report = Report {
            subcommand: self.name,
            command_line: &self.argv,
            seed,
            config,
            samples,
            violations,
            summary,
            outputs,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        emit_json(&report, json).map_err(|e| Failure::Io(e.to_string()))?;
        println!("{}: {samples} records, {violations} violations, {:.2} s", self.name, report.wall_time_s);
        Ok(violations)
    }

    fn sweep<C: Serialize, S: Serialize>(
        &self,
        out: &Output,
        seed: u64,
        config: &C,
        table: &Table,
        violations: usize,
        summary: &S,
    ) -> Outcome {
        let csv = self.path(&out.csv, "csv")?;
        let json = self.path(&out.json, "json")?;
        emit_csv(table, &csv).map_err(|e| Failure::Io(e.to_string()))?;
        let outputs = BTreeMap::from([("csv", csv.display().to_string())]);
        self.finish(Some(seed), config, table.len(), violations, summary, outputs, &json)
    }
}

/// Fails early when `path` cannot be created.
fn writable(path: &Path) -> Result<(), Failure> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !dir.is_dir() {
        return Err(Failure::Io(format!("cannot write {}: directory {} does not exist", path.display(), dir.display())));
    }
    if path.is_dir() {
        return Err(Failure::Io(format!("cannot write {}: it is a directory", path.display())));
    }
    Ok(())
}

fn check_nk(n: usize, k: usize) -> Result<(), Failure> {
    if n == 0 || k == 0 || k > n {
        return Err(Failure::Config(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    Ok(())
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn identities(ctx: &Ctx, a: &IdentitiesArgs) -> Outcome {
    if a.n == 0 {
        return Err(Failure::Config("need n >= 1".into()));
    }
    let ks = match a.k {
        Some(k) => {
            check_nk(a.n, k)?;
            vec![k]
        }
        None => (1..=a.n).collect(),
    };
    if !(a.lo < a.hi) {
        return Err(Failure::Config(format!("need lo < hi, got {} and {}", a.lo, a.hi)));
    }
    let cfg = IdentityConfig { n: a.n, ks, samples: a.samples, seed: a.seed, lo: a.lo, hi: a.hi, tol: a.tol };
    let (t, s) = identity_sweep(&cfg);
    ctx.sweep(&a.out, a.seed, &cfg, &t, s.violations, &s)
}

fn cone_check(ctx: &Ctx, a: &ConeArgs) -> Outcome {
    check_nk(a.n, a.k)?;
    let sampler = match a.sampler.as_str() {
        "box" if a.lo < a.hi => ConeSampler::Box { lo: a.lo, hi: a.hi },
        "box" => return Err(Failure::Config(format!("need lo < hi, got {} and {}", a.lo, a.hi))),
        _ => ConeSampler::Gaussian,
    };
    if !(a.boundary_eta > 0.0 && a.boundary_eta < 1.0) {
        return Err(Failure::Config("boundary-eta must be in (0, 1)".into()));
    }
    let cfg = ConeConfig {
        n: a.n,
        k: a.k,
        samples: a.samples,
        seed: a.seed,
        sampler,
        a1: a.a1,
        a2: a.a2,
        tol: a.tol,
        boundary_eta: a.boundary_eta,
    };
    let (t, s) = cone_sweep(&cfg);
    ctx.sweep(&a.out, a.seed, &cfg, &t, s.violations, &s)
}

fn lift_check(ctx: &Ctx, a: &LiftArgs) -> Outcome {
    check_nk(a.n, a.k)?;
    if a.m >= a.k {
        return Err(Failure::Config(format!("need m < k, got m = {}, k = {}", a.m, a.k)));
    }
    if let Some(b) = &a.b {
        if b.0.len() != a.m {
            return Err(Failure::Config(format!("--b has {} coefficients but m = {}", b.0.len(), a.m)));
        }
        HessianSumSpec::new(a.n, a.k, b.0.clone()).map_err(config_err)?;
    }
    let cfg = LiftConfig { n: a.n, k: a.k, m: a.m, b: a.b.clone().map(|b| b.0), samples: a.samples, seed: a.seed, tol: a.tol };
    let (t, s) = lift_sweep(&cfg);
    ctx.sweep(&a.out, a.seed, &cfg, &t, s.violations, &s)
}

fn quotient_check(ctx: &Ctx, a: &QuotientArgs) -> Outcome {
    check_nk(a.n, a.k)?;
    if a.n < 2 {
        return Err(Failure::Config("need n >= 2".into()));
    }
    let cfg = QuotientConfig {
        n: a.n,
        k: a.k,
        samples: a.samples,
        fd_samples: a.fd_samples,
        seed: a.seed,
        equality_tol: a.equality_tol,
        fd_tol: a.fd_tol,
        margin_tol: a.margin_tol,
    };
    let (t, s) = quotient_sweep(&cfg);
    ctx.sweep(&a.out, a.seed, &cfg, &t, s.violations, &s)
}

fn concavity_config(a: &ConcavityArgs) -> Result<ConcavityConfig, Failure> {
    let cfg = a.config();
    cfg.params().map_err(config_err)?;
    if !(cfg.level > 0.0) {
        return Err(Failure::Config("level must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.solve_fraction) {
        return Err(Failure::Config("solve-fraction must be in [0, 1]".into()));
    }
    Ok(cfg)
}

fn concavity(ctx: &Ctx, a: &ConcavityArgs) -> Outcome {
    let cfg = concavity_config(a)?;
    let (t, s) = concavity_sweep(&cfg).map_err(config_err)?;
    ctx.sweep(&a.out, a.seed, &cfg, &t, s.violations, &s)
}

fn claims(ctx: &Ctx, a: &ConcavityArgs) -> Outcome {
    let cfg = concavity_config(a)?;
    let (t, s) = claims_sweep(&cfg).map_err(config_err)?;
    ctx.sweep(&a.out, a.seed, &cfg, &t, s.violations, &s)
}

#[derive(Serialize)]
struct MinConfig<'a> {
    n: usize,
    k: usize,
    b: &'a [f64],
    gamma: f64,
    delta: f64,
    lambda: &'a [f64],
}

#[derive(Serialize)]
struct MinSummary {
    min_margin: f64,
    normalized_margin: f64,
    relative_margin: f64,
    certified: bool,
    precision_bits: u32,
    level: f64,
    psh_margin: f64,
    in_cone: bool,
    homogeneous: bool,
    minimizer: Vec<f64>,
}

fn concavity_min(ctx: &Ctx, a: &ConcavityMinArgs) -> Outcome {
    let n = a.lambda.0.len();
    let spec = HessianSumSpec::new(n, a.op.k, a.op.b.0.clone()).map_err(config_err)?;
    let params = ConcavityParams::new(a.op.gamma, a.delta, spec).map_err(config_err)?;
    let r = min_margin(&a.lambda.0, &params).map_err(config_err)?;
    let cfg = MinConfig { n, k: a.op.k, b: &a.op.b.0, gamma: a.op.gamma, delta: a.delta, lambda: &a.lambda.0 };
    let s = MinSummary {
        min_margin: r.min_margin,
        normalized_margin: r.min_margin * r.lambda1 * r.lambda1,
        relative_margin: r.relative_margin,
        certified: r.certified,
        precision_bits: r.precision_bits,
        level: r.level,
        psh_margin: r.psh_margin,
        in_cone: r.in_cone,
        homogeneous: r.homogeneous,
        minimizer: r.minimizer.clone(),
    };
    let negative = r.min_margin < 0.0;
    let mut header: Vec<String> = (1..=n).map(|i| format!("lambda{i}")).collect();
    header.extend(["min_margin", "normalized_margin", "relative_margin", "certified", "precision_bits", "level", "psh_margin"].map(String::from));
    header.extend((1..=n).map(|i| format!("xi{i}")));
    header.push("negative".into());
    let mut t = Table::new(header);
    let mut row = fmt_reals(&r.lambda);
    row.extend([
        fmt_real(s.min_margin),
        fmt_real(s.normalized_margin),
        fmt_real(s.relative_margin),
        (s.certified as u8).to_string(),
        s.precision_bits.to_string(),
        fmt_real(s.level),
        fmt_real(s.psh_margin),
    ]);
    row.extend(fmt_reals(&r.minimizer));
    row.push((negative as u8).to_string());
    t.push(row);
    println!("min_margin {:e} (normalized {:e}, certified {})", s.min_margin, s.normalized_margin, s.certified);
    let csv = ctx.path(&a.out.csv, "csv")?;
    let json = ctx.path(&a.out.json, "json")?;
    emit_csv(&t, &csv).map_err(|e| Failure::Io(e.to_string()))?;
    ctx.finish(None, &cfg, 1, negative as usize, &s, BTreeMap::from([("csv", csv.display().to_string())]), &json)
}

#[derive(Serialize)]
struct ScanSummary {
    cells: usize,
    negative_cells: usize,
}

fn threshold(ctx: &Ctx, a: &ThresholdArgs) -> Outcome {
    let cfg = ThresholdConfig {
        n: a.op.n,
        k: a.op.k,
        b: a.op.b.0.clone(),
        gamma: a.op.gamma,
        deltas: a.deltas.0.clone(),
        lambda_mins: a.lambda_mins.0.clone(),
        span: a.span,
        samples: a.samples,
        seed: a.seed,
        solve_fraction: a.solve_fraction,
    };
    if !(a.span >= 1.0) || a.lambda_mins.0.iter().any(|&l| !(l > 0.0)) {
        return Err(Failure::Config("need span >= 1 and positive lambda-mins".into()));
    }
    for &d in &cfg.deltas {
        ConcavityParams::new(cfg.gamma, d, HessianSumSpec::new(cfg.n, cfg.k, cfg.b.clone()).map_err(config_err)?)
            .map_err(config_err)?;
    }
    let t = threshold_scan(&cfg).map_err(config_err)?;
    let col = t.column("negatives").expect("scan table has a negatives column");
    let s = ScanSummary { cells: t.len(), negative_cells: t.rows.iter().filter(|r| r[col] != "0").count() };
    // The scan maps where the inequality fails; failures there are data.
    ctx.sweep(&a.out, a.seed, &cfg, &t, 0, &s)
}

#[derive(Serialize)]
struct SolveSummary {
    converged: bool,
    error: Option<String>,
    iterations: usize,
    residual: Option<f64>,
    c: Option<f64>,
    lambda_max: Option<f64>,
    psh_margin: Option<f64>,
    min_psh_margin: Option<f64>,
    psh_ratio: Option<f64>,
    sup_error: Option<f64>,
}

fn load_problem(path: &Path) -> Result<ProblemFile, Failure> {
    ProblemFile::load(path).map_err(Failure::Config)
}

fn solve(ctx: &Ctx, a: &SolveArgs) -> Outcome {
    let p = load_problem(&a.config)?;
    let csv = ctx.path(&a.csv, "csv")?;
    let json = ctx.path(&a.json, "json")?;
    if let Some(d) = &a.dump {
        writable(d)?;
    }
    let st = setup(&p).map_err(config_err)?;
    let result = newton_solve(&st.op, &st.chi, &st.psi, GridField::zeros(st.grid), 0.0, &st.solver);
    let (trace, s, u) = match &result {
        Ok(sol) => {
            let s = SolveSummary {
                converged: true,
                error: None,
                iterations: sol.trace.len() - 1,
                residual: Some(sol.state.residual_norm),
                c: Some(sol.state.c),
                lambda_max: Some(sol.state.lambda_max),
                psh_margin: Some(sol.state.psh_margin),
                min_psh_margin: None,
                psh_ratio: Some(sol.state.psh_ratio),
                sup_error: st.exact.as_ref().map(|e| sup_error(&sol.state.u, e)),
            };
            (sol.trace.as_slice(), s, Some(&sol.state.u))
        }
        Err(e) => match e.trace() {
            Some(trace) => {
                let s = SolveSummary {
                    converged: false,
                    error: Some(e.to_string()),
                    iterations: trace.len().saturating_sub(1),
                    residual: trace.last().map(|r| r.residual_sup),
                    c: None,
                    lambda_max: None,
                    psh_margin: None,
                    min_psh_margin: None,
                    psh_ratio: None,
                    sup_error: None,
                };
                (trace, s, None)
            }
            None => return Err(config_err(e)),
        },
    };
    let mut s = s;
    s.min_psh_margin = trace.iter().map(|r| r.psh_margin).reduce(f64::min);
    let table = trace_table(trace);
    emit_csv(&table, &csv).map_err(|e| Failure::Io(e.to_string()))?;
    let mut outputs = BTreeMap::from([("csv", csv.display().to_string())]);
    if let (Some(d), Some(u)) = (&a.dump, u) {
        write_dump(d, p.n, &[&u.data]).map_err(|e| Failure::Io(e.to_string()))?;
        outputs.insert("dump", d.display().to_string());
    }
    let bad_margins = trace.iter().filter(|r| !(r.psh_margin > 0.0)).count();
    let violations = bad_margins + (!s.converged) as usize;
    ctx.finish(Some(p.seed), &p, trace.len(), violations, &s, outputs, &json)
}

fn diagnose_cmd(ctx: &Ctx, a: &DiagnoseArgs) -> Outcome {
    let p = load_problem(&a.config)?;
    let json = ctx.path(&a.json, "json")?;
    let st = setup(&p).map_err(config_err)?;
    let u = match &a.state {
        Some(path) => {
            let (n, mut fields) = read_dump(path).map_err(config_err)?;
            if n != p.n || fields.is_empty() {
                return Err(Failure::Config(format!(
                    "{}: dump has grid {n} and {} fields, problem needs grid {} and at least one field",
                    path.display(),
                    fields.len(),
                    p.n
                )));
            }
            GridField::from_vec(st.grid, fields.swap_remove(0)).map_err(config_err)?
        }
        None => newton_solve(&st.op, &st.chi, &st.psi, GridField::zeros(st.grid), 0.0, &st.solver).map_err(config_err)?.state.u,
    };
    let d = diagnose(&st.op, &st.chi, &u, p.n_test, p.k_test, p.delta).map_err(config_err)?;
    let violations = (!d.cone_ok) as usize + (!d.signs.all_hold) as usize;
    let outputs = a.state.iter().map(|s| ("state", s.display().to_string())).collect();
    ctx.finish(Some(p.seed), &p, 1, violations, &d, outputs, &json)
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first} (see --help)");
            return 2;
        }
    };
    let name = match &cli.command {
        Command::Identities(_) => "identities",
        Command::ConeCheck(_) => "cone-check",
        Command::LiftCheck(_) => "lift-check",
        Command::QuotientCheck(_) => "quotient-check",
        Command::ConcavitySweep(_) => "concavity-sweep",
        Command::ConcavityMin(_) => "concavity-min",
        Command::ThresholdScan(_) => "threshold-scan",
        Command::ClaimsReport(_) => "claims-report",
        Command::Solve(_) => "solve",
        Command::Diagnose(_) => "diagnose",
    };
    let ctx = Ctx { name, argv: argv.iter().skip(1).cloned().collect(), start: Instant::now() };
    let outcome = match &cli.command {
        Command::Identities(a) => identities(&ctx, a),
        Command::ConeCheck(a) => cone_check(&ctx, a),
        Command::LiftCheck(a) => lift_check(&ctx, a),
        Command::QuotientCheck(a) => quotient_check(&ctx, a),
        Command::ConcavitySweep(a) => concavity(&ctx, a),
        Command::ConcavityMin(a) => concavity_min(&ctx, a),
        Command::ThresholdScan(a) => threshold(&ctx, a),
        Command::ClaimsReport(a) => claims(&ctx, a),
        Command::Solve(a) => solve(&ctx, a),
        Command::Diagnose(a) => diagnose_cmd(&ctx, a),
    };
    match outcome {
        Ok(0) => 0,
        Ok(_) => 1,
        Err(Failure::Config(m)) => {
            eprintln!("{name}: {m}");
            2
        }
        Err(Failure::Io(m)) => {
            eprintln!("{name}: {m}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(range("1e3:1e6").unwrap(), (1e3, 1e6));
        assert!(range("5").is_err());
        assert!(range("2:1").is_err());
        assert!(range("-1:1").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["sigmak", "identities", "--bogus"]), 2);
        assert_eq!(run(["sigmak", "no-such-command"]), 2);
        assert_eq!(run(["sigmak", "cone-check", "--n", "3", "--k", "4"]), 2);
    }
}
