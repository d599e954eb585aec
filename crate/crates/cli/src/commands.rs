//! One function per subcommand. Each emits its tables through the context
//! and reports whether its checks passed.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use bivex::asymptotics::{self, default_c_delta, riemann_sum_check, AsymptoticResult, CellSet, RiemannCheck};
use bivex::fields::{write_dump, DomainPair, FieldSampler, GridSpec};
use bivex::model::{self, check_assumptions, BivariateMaternModel, LocalExpansion};
use bivex::montecarlo::{mc_excursion_multi, rate_fit};
use bivex::pickands::{constant_from_sets, estimate_h_joint, estimate_h_sets};

use crate::config::{CellSetConfig, ConfigError, Format, RunConfig};
use crate::output::{format_f64, Cell, Sink, Table};

/// Largest accepted `|reconstruct / value - 1|` for theorem rows.
pub const RECONSTRUCTION_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] bivex::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    /// Names of the failing checks or metrics.
    Fail(Vec<String>),
}

impl Status {
    fn from_failures(f: Vec<String>) -> Self {
        if f.is_empty() {
            Status::Pass
        } else {
            Status::Fail(f)
        }
    }
}

pub type CmdResult = Result<Status, CommandError>;

pub struct Context {
    pub config: RunConfig,
    pub hash: String,
    pub sink: Sink,
    pub format: Format,
}

impl Context {
    pub fn new(config: RunConfig, sink: Sink) -> Self {
        let hash = config.hash();
        let format = config.output.format;
        Self { config, hash, sink, format }
    }

    fn emit(&self, t: &Table) -> Result<(), CommandError> {
        Ok(self.sink.emit(t, self.format, &self.hash, self.config.estimation.seed)?)
    }

    fn model(&self) -> Result<BivariateMaternModel, CommandError> {
        Ok(self.config.model()?)
    }
}

pub fn validate(ctx: &Context) -> CmdResult {
    let m = ctx.model()?;
    let report = check_assumptions(&m);
    let mut t = Table::new("validate", &["item", "passed", "witness", "detail"]);
    for c in &report.checks {
        t.push(vec![c.item.to_string().into(), c.passed.into(), c.witness.into(), c.detail.clone().into()]);
    }
    ctx.emit(&t)?;
    match report.validity_bound {
        Some(b) => eprintln!("validity bound {} vs rho^2 {}", format_f64(b), format_f64(report.rho_squared)),
        None => eprintln!("validity bound unavailable; rho^2 {}", format_f64(report.rho_squared)),
    }
    Ok(Status::from_failures(report.failures().map(|c| c.item.to_string()).collect()))
}

pub fn matern_eval(ctx: &Context) -> CmdResult {
    let m = ctx.model()?;
    let mut t = Table::new("matern-eval", &["h", "c11", "c22", "c12", "r12"]);
    for &h in &ctx.config.matern.lags {
        t.push(vec![h.into(), m.cov11(h).into(), m.cov22(h).into(), m.cov12(h).into(), model::cross_corr(&m, h).into()]);
    }
    ctx.emit(&t)?;
    Ok(Status::Pass)
}

pub fn expansion(ctx: &Context) -> CmdResult {
    let m = ctx.model()?;
    let e = model::local_expansion(&m)?;
    let bound = model::validity_bound(m.nu1, m.nu2, m.nu12, m.a1, m.a2, m.a12, m.dim_n).ok();
    let mut t = Table::new(
        "expansion",
        &["alpha1", "alpha2", "c1", "c2", "rho", "r2_zero", "dim_n", "validity_bound", "c_delta_lower", "c_delta_default"],
    );
    t.push(vec![
        e.alpha1.into(),
        e.alpha2.into(),
        e.c1.into(),
        e.c2.into(),
        e.rho.into(),
        e.r2_zero.into(),
        e.dim_n.into(),
        bound.into(),
        asymptotics::c_delta_lower_bound(&e).into(),
        default_c_delta(&e).into(),
    ]);
    ctx.emit(&t)?;
    Ok(Status::Pass)
}

fn grid(ctx: &Context, d: &DomainPair) -> Result<GridSpec, CommandError> {
    Ok(GridSpec::new(d, ctx.config.grid.points_per_axis)?)
}

pub fn simulate(ctx: &Context) -> CmdResult {
    let c = &ctx.config;
    let m = ctx.model()?;
    let d = c.domain_pair()?;
    let g = grid(ctx, &d)?;
    let sampler = FieldSampler::new(&m, &g)?;
    let seed = c.estimation.seed;
    let mut t = Table::new("simulate", &["replicate", "max1", "max2", "mean1", "mean2"]);
    let mut rows = Vec::new();
    let max = |x: &[f64]| x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    for r in 0..c.simulate.count {
        let s = sampler.sample(seed, r);
        t.push(vec![r.into(), max(&s.x1).into(), max(&s.x2).into(), mean(&s.x1).into(), mean(&s.x2).into()]);
        if c.simulate.dump.is_some() {
            rows.push([s.x1, s.x2].concat());
        }
    }
    if let Some(name) = &c.simulate.dump {
        let path = ctx.sink.path_for(Path::new(name));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        write_dump(BufWriter::new(File::create(&path)?), g.total(), &rows)?;
        eprintln!("wrote {} ({} replicates x {} nodes)", path.display(), rows.len(), g.total());
    }
    ctx.emit(&t)?;
    Ok(Status::Pass)
}

fn interval(a: f64, b: f64) -> String {
    format!("{}:{}", format_f64(a), format_f64(b))
}

pub fn pickands(ctx: &Context) -> CmdResult {
    let c = &ctx.config;
    let e = &c.estimation;
    let alpha = c.alpha();
    let mut t = Table::new(
        "pickands",
        &["kind", "alpha", "T", "eta", "reps", "value", "std_error", "h_over_t", "non_monotone", "s_set", "t_set", "identity_residual"],
    );
    let sets = if e.t_list.is_empty() { Vec::new() } else { estimate_h_sets(alpha, &e.t_list, e.eta, e.reps, e.seed)? };
    let constant = if sets.len() >= 3 && sets[0].horizon_t > 0.0 { Some(constant_from_sets(&sets)?) } else { None };
    let non_monotone: Cell = constant.as_ref().map_or(Cell::Empty, |k| k.non_monotone.into());
    for s in &sets {
        let per_t = if s.horizon_t > 0.0 { Some(s.value / s.horizon_t) } else { None };
        let set = interval(0.0, s.horizon_t);
        t.push(vec![
            "set".into(),
            alpha.into(),
            s.horizon_t.into(),
            e.eta.into(),
            e.reps.into(),
            s.value.into(),
            s.std_error.into(),
            per_t.into(),
            non_monotone.clone(),
            set.clone().into(),
            set.into(),
            Cell::Empty,
        ]);
    }
    if let Some(k) = &constant {
        for w in &k.warnings {
            eprintln!("warning: {w}");
        }
        let est = &k.estimate;
        t.push(vec![
            "constant".into(),
            alpha.into(),
            est.horizon_t.into(),
            e.eta.into(),
            e.reps.into(),
            est.value.into(),
            est.std_error.into(),
            est.value.into(),
            k.non_monotone.into(),
            interval(0.0, est.horizon_t).into(),
            interval(0.0, est.horizon_t).into(),
            Cell::Empty,
        ]);
    }
    if let Some(j) = &e.joint {
        let r = estimate_h_joint(alpha, j.s, j.t, e.eta, e.reps, e.seed)?;
        t.push(vec![
            "joint".into(),
            alpha.into(),
            r.estimate.horizon_t.into(),
            e.eta.into(),
            e.reps.into(),
            r.estimate.value.into(),
            r.estimate.std_error.into(),
            Cell::Empty,
            Cell::Empty,
            interval(j.s.0, j.s.1).into(),
            interval(j.t.0, j.t.1).into(),
            r.max_identity_residual.into(),
        ]);
    }
    ctx.emit(&t)?;
    Ok(Status::Pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    Overlap,
    Split,
}

impl Theorem {
    pub fn for_domain(d: &DomainPair) -> Self {
        if d.overlaps() {
            Theorem::Overlap
        } else {
            Theorem::Split
        }
    }

    fn command(self) -> &'static str {
        match self {
            Theorem::Overlap => "theorem1",
            Theorem::Split => "theorem2",
        }
    }
}

/// Evaluates the theorem matching the domain geometry at one threshold.
fn theorem_value(
    which: Theorem,
    e: &LocalExpansion,
    d: &DomainPair,
    h: (f64, f64),
    u: f64,
) -> bivex::Result<AsymptoticResult> {
    match which {
        Theorem::Overlap => asymptotics::theorem1_value(e, d.mes_n(), h.0, h.1, u),
        Theorem::Split => asymptotics::theorem2_value(e, d.split_m, d.mes_m(), h.0, h.1, u),
    }
}

fn pickands_pair(c: &RunConfig, e: &LocalExpansion) -> bivex::Result<(f64, f64)> {
    Ok((
        asymptotics::resolve_pickands(e.alpha1, e.dim_n, c.estimation.h1)?,
        asymptotics::resolve_pickands(e.alpha2, e.dim_n, c.estimation.h2)?,
    ))
}

pub fn theorem(ctx: &Context, which: Theorem) -> CmdResult {
    let c = &ctx.config;
    let m = ctx.model()?;
    let d = c.domain_pair()?;
    let routed = Theorem::for_domain(&d);
    if routed != which {
        return Ok(Status::Fail(vec![format!(
            "domain has split_m = {} and N = {}: it belongs to {}, not {}",
            d.split_m,
            d.dim_n,
            routed.command(),
            which.command()
        )]));
    }
    let e = model::local_expansion(&m)?;
    let h = pickands_pair(c, &e)?;
    let mut t = Table::new(which.command(), &["u", "value", "log_value", "exp_rate", "u_power", "constant", "ratio"]);
    let mut failures = Vec::new();
    for &u in &c.thresholds.u {
        let r = theorem_value(which, &e, &d, h, u)?;
        let ratio = r.reconstruct() / r.value;
        if r.value > 0.0 && ((ratio - 1.0).abs() > RECONSTRUCTION_TOL || ratio.is_nan()) {
            failures.push(format!("reconstruction at u = {u}: ratio {ratio}"));
        }
        t.push(vec![u.into(), r.value.into(), r.log_value.into(), r.exp_rate.into(), r.u_power.into(), r.constant.into(), ratio.into()]);
    }
    ctx.emit(&t)?;
    Ok(Status::from_failures(failures))
}

fn riemann_checks(c: &RunConfig, m: &BivariateMaternModel, d: &DomainPair, set: CellSet) -> bivex::Result<Vec<RiemannCheck>> {
    let e = model::local_expansion(m)?;
    let cd = c.estimation.c_delta.unwrap_or_else(|| default_c_delta(&e));
    c.thresholds
        .riemann_u
        .iter()
        .map(|&u| riemann_sum_check(&e, d, |h| model::cross_corr(m, h), c.estimation.t_scale, cd, u, set))
        .collect()
}

fn cell_set(c: &RunConfig) -> CellSet {
    match c.estimation.cell_set {
        CellSetConfig::Touching => CellSet::Touching,
        CellSetConfig::Inside => CellSet::Inside,
    }
}

fn set_name(s: CellSet) -> &'static str {
    match s {
        CellSet::Touching => "touching",
        CellSet::Inside => "inside",
    }
}

pub fn riemann_check(ctx: &Context) -> CmdResult {
    let c = &ctx.config;
    let m = ctx.model()?;
    let d = c.domain_pair()?;
    let set = cell_set(c);
    let mut t = Table::new("riemann-check", &["u", "set", "h_sum", "limit", "ratio", "pairs", "delta", "d1", "d2", "c_delta"]);
    for r in riemann_checks(c, &m, &d, set)? {
        t.push(vec![
            r.u.into(),
            set_name(set).into(),
            r.h_sum.into(),
            r.limit_value.into(),
            r.ratio.into(),
            r.pairs.into(),
            r.delta.into(),
            r.d1.into(),
            r.d2.into(),
            r.c_delta.into(),
        ]);
    }
    ctx.emit(&t)?;
    Ok(Status::Pass)
}

pub fn mc_excursion(ctx: &Context) -> CmdResult {
    let c = &ctx.config;
    let m = ctx.model()?;
    let d = c.domain_pair()?;
    let g = grid(ctx, &d)?;
    let est = mc_excursion_multi(&m, &g, &c.thresholds.u, c.estimation.reps, c.estimation.seed)?;
    let mut t = Table::new("mc-excursion", &["u", "p_hat", "ci_low", "ci_high", "hits", "reps"]);
    for x in &est {
        for w in &x.warnings {
            eprintln!("warning: u = {}: {w}", x.u);
        }
        t.push(vec![x.u.into(), x.p_hat.into(), x.ci_low.into(), x.ci_high.into(), x.hits.into(), x.replicates.into()]);
    }
    ctx.emit(&t)?;
    Ok(Status::Pass)
}

pub fn verify(ctx: &Context) -> CmdResult {
    let c = &ctx.config;
    let m = ctx.model()?;
    let d = c.domain_pair()?;
    let g = grid(ctx, &d)?;
    let e = model::local_expansion(&m)?;
    let h = pickands_pair(c, &e)?;
    let which = Theorem::for_domain(&d);
    let mut failures = Vec::new();
    let mut summary = Table::new("verify_summary", &["metric", "value", "target", "tolerance", "passed"]);

    let est = mc_excursion_multi(&m, &g, &c.thresholds.u, c.estimation.reps, c.estimation.seed)?;
    let mut t = Table::new("verify", &["u", "p_hat", "ci_low", "ci_high", "hits", "reps", "theorem", "ratio"]);
    for x in &est {
        let th = theorem_value(which, &e, &d, h, x.u)?.value;
        t.push(vec![
            x.u.into(),
            x.p_hat.into(),
            x.ci_low.into(),
            x.ci_high.into(),
            x.hits.into(),
            x.replicates.into(),
            th.into(),
            (x.p_hat / th).into(),
        ]);
        for w in &x.warnings {
            failures.push(format!("hits at u = {}: {w}", x.u));
        }
    }
    ctx.emit(&t)?;

    let theory = |u: f64| theorem_value(which, &e, &d, h, u).map_or(f64::NAN, |r| r.value);
    let target = -1.0 / (1.0 + m.rho);
    match rate_fit(&est, Some(&theory)) {
        Ok(fit) => {
            let rel = (fit.slope - target).abs() / target.abs();
            let ok = rel <= c.verify.rate_tolerance;
            if !ok {
                failures.push(format!("rate: slope {} vs {} (relative error {})", format_f64(fit.slope), format_f64(target), format_f64(rel)));
            }
            for w in &fit.warnings {
                failures.push(format!("rate fit: {w}"));
            }
            summary.push(vec!["rate".into(), fit.slope.into(), target.into(), c.verify.rate_tolerance.into(), ok.into()]);
        }
        Err(err) => {
            failures.push(format!("rate: {err}"));
            summary.push(vec!["rate".into(), Cell::Empty, target.into(), c.verify.rate_tolerance.into(), false.into()]);
        }
    }

    let set = cell_set(c);
    let mut rt = Table::new("verify_riemann", &["u", "h_sum", "limit", "ratio"]);
    match riemann_checks(c, &m, &d, set) {
        Ok(checks) => {
            for r in checks {
                let ok = (r.ratio - 1.0).abs() <= c.verify.riemann_band;
                if !ok {
                    failures.push(format!("riemann ratio at u = {}: {}", r.u, format_f64(r.ratio)));
                }
                rt.push(vec![r.u.into(), r.h_sum.into(), r.limit_value.into(), r.ratio.into()]);
                summary.push(vec![format!("riemann u={}", format_f64(r.u)).into(), r.ratio.into(), 1.0.into(), c.verify.riemann_band.into(), ok.into()]);
            }
        }
        Err(err) => failures.push(format!("riemann: {err}")),
    }
    ctx.emit(&rt)?;
    ctx.emit(&summary)?;
    Ok(Status::from_failures(failures))
}
