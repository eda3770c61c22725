//! The work behind each subcommand. Every command returns a [`RunReport`];
//! the binary only parses flags, prints and picks the exit code.

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use qgraph_core::coupling::Frame;
use qgraph_core::discrete::{self, EigenDecomposition};
use qgraph_core::graph::MetricGraph;
use qgraph_core::measure::{self, MeasureCheckConfig, MeasureError};
use qgraph_core::ode::{self, GapList, SpectrumError};
use qgraph_core::oracle::{self, ComparisonReport, OracleError, OracleOptions, Tolerance};
use qgraph_core::spectrum::SpectralResult;
use qgraph_core::weyl::{ReductionContext, ReductionError};

use crate::document::{self, DocumentError};
use crate::report::{num, RunReport, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("{0}")]
    Usage(String),
    #[error("hypothesis not met: {0}")]
    Precondition(ReductionError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failures, 4 for unmet hypotheses.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Document(_) | CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Precondition(_) => 4,
        }
    }
}

impl From<ReductionError> for CliError {
    fn from(e: ReductionError) -> Self {
        match e {
            ReductionError::BadInterval(..) => CliError::Usage(e.to_string()),
            e if e.is_precondition() => CliError::Precondition(e),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BadInterval(..) => CliError::Usage(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SpectrumError> for CliError {
    fn from(e: SpectrumError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::BadConfig(_) => CliError::Usage(e.to_string()),
            e => CliError::Numerical(e.to_string()),
        }
    }
}

/// How the interval of a command is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntervalChoice {
    Gap { k: usize, z_min: Option<f64> },
    Explicit(f64, f64),
}

impl Default for IntervalChoice {
    fn default() -> Self {
        IntervalChoice::Gap { k: 0, z_min: None }
    }
}

/// Common frame of all vertex couplings, Dirichlet when they disagree.
pub fn graph_frame(g: &MetricGraph) -> Frame {
    let mut frames = g.vertices().iter().map(|v| v.coupling.frame());
    let first = frames.next().unwrap_or(Frame::Dirichlet);
    if frames.all(|f| f == first) {
        first
    } else {
        Frame::Dirichlet
    }
}

/// The first `count` reference eigenvalues matching the couplings of `g`.
pub fn gap_list(g: &MetricGraph, count: usize) -> Result<GapList, CliError> {
    Ok(match graph_frame(g) {
        Frame::Dirichlet => ode::dirichlet_spectrum(g.potential(), g.length(), count)?,
        Frame::Neumann => ode::neumann_spectrum(g.potential(), g.length(), count)?,
    })
}

pub fn resolve_interval(g: &MetricGraph, choice: IntervalChoice) -> Result<(f64, f64), CliError> {
    match choice {
        IntervalChoice::Explicit(a, b) => {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(CliError::Usage(format!(
                    "interval ({a}, {b}) is empty or not finite"
                )));
            }
            Ok((a, b))
        }
        IntervalChoice::Gap { k, z_min } => {
            let mut list = gap_list(g, k + 1)?;
            if let Some(z) = z_min {
                if z >= list.eigenvalues[0] {
                    return Err(CliError::Usage(format!(
                        "z_min {z} must lie below the first reference eigenvalue"
                    )));
                }
                list = list.with_z_min(z);
            }
            list.gap(k)
                .ok_or_else(|| CliError::Numerical(format!("gap {k} not available")))
        }
    }
}

fn eigen_table(name: &str, e: &EigenDecomposition) -> Table {
    let mut t = Table::new(name, &["value", "multiplicity"]);
    for g in &e.groups {
        t.push(vec![num(g.value), g.multiplicity.to_string()]);
    }
    t
}

fn interval_param(report: &mut RunReport, choice: IntervalChoice, interval: (f64, f64)) {
    if let IntervalChoice::Gap { k, z_min } = choice {
        report.param("gap", k);
        if let Some(z) = z_min {
            report.param("z_min", num(z));
        }
    }
    report.param(
        "interval",
        format!("{} {}", num(interval.0), num(interval.1)),
    );
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Reference eigenvalues and the gaps between them.
pub fn cmd_dirichlet(path: &Path, count: usize, neumann: bool) -> Result<RunReport, CliError> {
    let (g, bytes) = document::load_graph(path)?;
    let start = Instant::now();
    let mut report = RunReport::new(if neumann { "neumann" } else { "dirichlet" }, &bytes);
    report.param("count", count);
    let mut nu = Table::new("reference eigenvalues", &["k", "nu"]);
    let mut gaps = Table::new("gaps", &["k", "left", "right"]);
    if count > 0 {
        let list = if neumann {
            ode::neumann_spectrum(g.potential(), g.length(), count)?
        } else {
            ode::dirichlet_spectrum(g.potential(), g.length(), count)?
        };
        for (k, v) in list.eigenvalues.iter().enumerate() {
            nu.push(vec![(k + 1).to_string(), num(*v)]);
        }
        for (k, (a, b)) in list.gaps().into_iter().enumerate() {
            gaps.push(vec![k.to_string(), num(a), num(b)]);
        }
    }
    report.tables.push(nu);
    report.tables.push(gaps);
    report.timings.insert("total".into(), elapsed_ms(start));
    Ok(report)
}

/// Eigenvalues of the discrete operators attached to the graph.
pub fn cmd_discrete(path: &Path) -> Result<RunReport, CliError> {
    let (g, bytes) = document::load_graph(path)?;
    let start = Instant::now();
    let mut report = RunReport::new("discrete", &bytes);
    let numerical = |e: discrete::DiscreteError| CliError::Numerical(e.to_string());
    let plain = discrete::symmetrize(&g, &discrete::adjacency_operator(&g)).hermitian_part();
    report.tables.push(eigen_table(
        "adjacency",
        &discrete::hermitian_eigs(&plain).map_err(numerical)?,
    ));
    if g.has_magnetic_phases() {
        report.tables.push(eigen_table(
            "magnetic adjacency",
            &discrete::adjacency_spectrum(&g).map_err(numerical)?,
        ));
    }
    let delta_type = discrete::theta_map(&g).is_ok();
    if !delta_type {
        let bp = discrete::block_projector(&g).map_err(numerical)?;
        let dp = discrete::projected_shift(&g, &bp);
        if dp.is_empty {
            report
                .warnings
                .push("ran P is trivial; no projected shift".into());
        } else {
            report.tables.push(eigen_table(
                "projected shift",
                &discrete::hermitian_eigs(&dp.matrix).map_err(numerical)?,
            ));
        }
    }
    report.timings.insert("total".into(), elapsed_ms(start));
    Ok(report)
}

/// Spectrum in an interval by the reduction.
pub fn reduce(
    g: &MetricGraph,
    interval: (f64, f64),
) -> Result<(ReductionContext, SpectralResult), CliError> {
    let ctx = ReductionContext::new(g, interval)?;
    let result = ctx.reduce_spectrum()?;
    Ok((ctx, result))
}

fn boundary_table(result: &SpectralResult) -> Table {
    let mut t = Table::new("boundary", &["lambda", "multiplicity", "endpoint"]);
    for b in &result.boundary {
        t.push(vec![
            num(b.lambda),
            b.multiplicity.to_string(),
            num(b.endpoint),
        ]);
    }
    t
}

fn describe_context(report: &mut RunReport, ctx: &ReductionContext) {
    report.param("family", ctx.family().name());
    report.param("alpha", num(ctx.alpha()));
    match ctx.k() {
        Some(k) => {
            report.param("K", format!("{} {}", num(k.lo), num(k.hi)));
            report.param("min_abs_eta_derivative", num(k.min_abs_derivative));
        }
        None => report.param("K", "empty"),
    }
}

pub fn cmd_reduce(path: &Path, choice: IntervalChoice) -> Result<RunReport, CliError> {
    let (g, bytes) = document::load_graph(path)?;
    let start = Instant::now();
    let mut report = RunReport::new("reduce", &bytes);
    let interval = resolve_interval(&g, choice)?;
    interval_param(&mut report, choice, interval);
    let (ctx, result) = reduce(&g, interval)?;
    describe_context(&mut report, &ctx);
    report.tables.push(Table::spectral("spectrum", &result));
    if !result.boundary.is_empty() {
        report.tables.push(boundary_table(&result));
    }
    report.warnings.extend(result.warnings.iter().cloned());
    report.timings.insert("total".into(), elapsed_ms(start));
    Ok(report)
}

pub fn cmd_oracle(path: &Path, interval: (f64, f64)) -> Result<RunReport, CliError> {
    let (g, bytes) = document::load_graph(path)?;
    let start = Instant::now();
    let mut report = RunReport::new("oracle", &bytes);
    let interval = resolve_interval(&g, IntervalChoice::Explicit(interval.0, interval.1))?;
    interval_param(
        &mut report,
        IntervalChoice::Explicit(interval.0, interval.1),
        interval,
    );
    let result = oracle::oracle_spectrum(&g, interval, &OracleOptions::default())?;
    report.tables.push(Table::spectral("spectrum", &result));
    report.warnings.extend(result.warnings.iter().cloned());
    report.timings.insert("total".into(), elapsed_ms(start));
    Ok(report)
}

/// Reduced and secular spectra of one interval and their comparison, both
/// restricted to the collar window of the interval.
#[derive(Debug, Clone)]
pub struct Verification {
    pub interval: (f64, f64),
    pub window: (f64, f64),
    pub reduced: SpectralResult,
    pub oracle: SpectralResult,
    pub comparison: ComparisonReport,
}

pub fn verify(
    g: &MetricGraph,
    interval: (f64, f64),
    tol: Tolerance,
) -> Result<Verification, CliError> {
    let (_, reduced) = reduce(g, interval)?;
    let oracle_full = oracle::oracle_spectrum(g, interval, &OracleOptions::default())?;
    let window = oracle::collar_window(interval);
    let reduced = reduced.restricted(window.0, window.1);
    let oracle = oracle_full.restricted(window.0, window.1);
    let comparison = oracle::compare(&reduced, &oracle, tol);
    Ok(Verification {
        interval,
        window,
        reduced,
        oracle,
        comparison,
    })
}

pub fn cmd_verify(
    path: &Path,
    choice: IntervalChoice,
    tol: Tolerance,
) -> Result<RunReport, CliError> {
    let (g, bytes) = document::load_graph(path)?;
    let start = Instant::now();
    let mut report = RunReport::new("verify", &bytes);
    let interval = resolve_interval(&g, choice)?;
    interval_param(&mut report, choice, interval);
    report.param(
        "tolerance",
        format!("{} + {} |z|", num(tol.abs), num(tol.rel)),
    );
    let v = verify(&g, interval, tol)?;
    report.param("window", format!("{} {}", num(v.window.0), num(v.window.1)));
    report.tables.push(Table::spectral("reduced", &v.reduced));
    report.tables.push(Table::spectral("oracle", &v.oracle));
    let mut cmp = Table::new(
        "comparison",
        &[
            "z_reduced",
            "z_oracle",
            "deviation",
            "multiplicity_reduced",
            "multiplicity_oracle",
        ],
    );
    for p in &v.comparison.pairs {
        cmp.push(vec![
            num(p.reduced.z),
            num(p.oracle.z),
            num(p.deviation),
            p.reduced.multiplicity.to_string(),
            p.oracle.multiplicity.to_string(),
        ]);
    }
    for e in &v.comparison.unmatched_reduced {
        cmp.push(vec![
            num(e.z),
            String::new(),
            String::new(),
            e.multiplicity.to_string(),
            String::new(),
        ]);
    }
    for e in &v.comparison.unmatched_oracle {
        cmp.push(vec![
            String::new(),
            num(e.z),
            String::new(),
            String::new(),
            e.multiplicity.to_string(),
        ]);
    }
    report.tables.push(cmp);
    let c = &v.comparison;
    report.check(
        "spectra agree",
        c.passed,
        format!(
            "max deviation {:.3e}, {} multiplicity mismatches, {} unmatched",
            c.max_deviation,
            c.multiplicity_mismatches,
            c.unmatched_reduced.len() + c.unmatched_oracle.len()
        ),
    );
    report
        .warnings
        .extend(v.reduced.warnings.iter().chain(&v.oracle.warnings).cloned());
    report.timings.insert("total".into(), elapsed_ms(start));
    Ok(report)
}

/// The reference gap that contains `[a, b]`.
pub fn gap_containing(g: &MetricGraph, interval: (f64, f64)) -> Result<(f64, f64), CliError> {
    let (a, b) = interval;
    let mut count = 4;
    loop {
        let list = gap_list(g, count)?;
        for gap in list.gaps() {
            if gap.0 < a && b < gap.1 {
                return Ok(gap);
            }
        }
        if *list.eigenvalues.last().unwrap() > b {
            return Err(CliError::Usage(format!(
                "[{a}, {b}] is not inside a single gap"
            )));
        }
        count *= 2;
    }
}

pub fn cmd_measure(
    path: &Path,
    interval: (f64, f64),
    eps: Option<Vec<f64>>,
    gap: Option<IntervalChoice>,
) -> Result<RunReport, CliError> {
    let (g, bytes) = document::load_graph(path)?;
    let start = Instant::now();
    let mut report = RunReport::new("measure", &bytes);
    let j = match gap {
        Some(choice) => resolve_interval(&g, choice)?,
        None => gap_containing(&g, interval)?,
    };
    report.param("gap_interval", format!("{} {}", num(j.0), num(j.1)));
    report.param(
        "interval",
        format!("{} {}", num(interval.0), num(interval.1)),
    );
    let ctx = ReductionContext::new(&g, j)?;
    describe_context(&mut report, &ctx);
    let mut cfg = MeasureCheckConfig::new(interval);
    if let Some(e) = eps {
        cfg = cfg.with_eps(e);
    }
    report.param(
        "eps",
        cfg.eps
            .iter()
            .map(|e| num(*e))
            .collect::<Vec<_>>()
            .join(" "),
    );
    report.param("collar", num(cfg.collar));
    let m = measure::verify_measure(&ctx, &cfg)?;
    let mut t = Table::new("discrepancy", &["eps", "discrepancy", "relative", "panels"]);
    let scale = if m.rhs_norm > 0.0 { m.rhs_norm } else { 1.0 };
    for r in &m.rungs {
        t.push(vec![
            num(r.eps),
            num(r.discrepancy),
            num(r.discrepancy / scale),
            r.panels.to_string(),
        ]);
    }
    report.tables.push(t);
    let mut atoms = Table::new("atoms", &["lambda", "z", "multiplicity", "weight"]);
    for a in measure::atoms(&ctx)? {
        if a.z > interval.0 && a.z < interval.1 {
            atoms.push(vec![
                num(a.lambda),
                num(a.z),
                a.multiplicity.to_string(),
                num(a.weight),
            ]);
        }
    }
    report.tables.push(atoms);
    report.check(
        "monotone",
        m.monotone,
        "discrepancy does not grow along the eps ladder after the first rung",
    );
    report.check(
        "extrapolated",
        m.converged,
        format!(
            "Richardson discrepancy {:.3e} against 1e-3 * |rhs| = {:.3e}",
            m.extrapolated,
            1e-3 * m.rhs_norm
        ),
    );
    report.check(
        "positive",
        m.positive,
        format!("smallest eigenvalue of rhs {:.3e}", m.rhs_min_eigenvalue),
    );
    report.timings.insert("total".into(), elapsed_ms(start));
    Ok(report)
}
