//! Numerical checks of the spectral measure of `N(z) = -(Q^* M(z) Q - alpha)^{-1}`.
//!
//! The left side recovers the measure of an interval by Stieltjes inversion at
//! a ladder of `eps`; the right side assembles it from the eigenpairs of `T`
//! and the reduction scalars. Both are `r x r` matrices in the basis of `ran P`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::{self, CMatrix, LinalgError, C64, ONE};
use crate::math::PI;
use crate::ode::{self, OdeError};
use crate::weyl::{PreimageError, ReductionContext, WeylError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("bad measure configuration: {0}")]
    BadConfig(String),
    #[error("quadrature did not settle at eps = {eps} with {panels} panels")]
    Quadrature { eps: f64, panels: usize },
    #[error("eigenvalue {lambda} of T sits on eta of the gap end {endpoint}")]
    Boundary { lambda: f64, endpoint: f64 },
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureCheckConfig {
    pub interval: (f64, f64),
    /// Strictly decreasing.
    pub eps: Vec<f64>,
    /// Integration runs over `[a + collar, b - collar]`.
    pub collar: f64,
    pub initial_panels: usize,
    pub max_panels: usize,
    /// Panel doubling stops when successive results differ by less than this.
    pub quadrature_tol: f64,
}

/// `1e-2, 5e-3, ...` halving down to `1e-4`, which closes the ladder.
pub fn default_eps_ladder() -> Vec<f64> {
    let mut eps = Vec::new();
    let mut e = 1e-2;
    while e > 1e-4 * 1.000_001 {
        eps.push(e);
        e *= 0.5;
    }
    eps.push(1e-4);
    eps
}

impl MeasureCheckConfig {
    pub fn new(interval: (f64, f64)) -> Self {
        Self {
            interval,
            eps: default_eps_ladder(),
            collar: 1e-4 * (interval.1 - interval.0).abs(),
            initial_panels: 16,
            max_panels: 1 << 18,
            quadrature_tol: 1e-10,
        }
    }

    pub fn with_eps(mut self, eps: Vec<f64>) -> Self {
        self.eps = eps;
        self
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        let (a, b) = self.interval;
        if !(a.is_finite() && b.is_finite())
            || !(self.collar >= 0.0)
            || a + self.collar >= b - self.collar
        {
            return Err(MeasureError::BadConfig(format!(
                "collared interval [{} + {}, {} - {}] is empty",
                a, self.collar, b, self.collar
            )));
        }
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(MeasureError::BadConfig(String::from(
                "eps values must be positive",
            )));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(MeasureError::BadConfig(String::from(
                "eps values must be strictly decreasing",
            )));
        }
        if self.initial_panels == 0 || self.max_panels < self.initial_panels {
            return Err(MeasureError::BadConfig(String::from(
                "panel counts out of order",
            )));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, `n >= 2`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut t = crate::math::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const GL_NODES: usize = 32;

struct Composite {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Composite {
    fn new() -> Self {
        let (x, w) = gauss_legendre(GL_NODES);
        Self { x, w }
    }

    fn apply<E>(
        &self,
        lo: f64,
        hi: f64,
        panels: usize,
        dim: usize,
        f: &mut impl FnMut(f64) -> Result<Vec<f64>, E>,
    ) -> Result<Vec<f64>, E> {
        let h = (hi - lo) / panels as f64;
        let mut acc = alloc::vec![0.0; dim];
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for (xi, wi) in self.x.iter().zip(&self.w) {
                let v = f(mid + 0.5 * h * xi)?;
                for (a, vi) in acc.iter_mut().zip(&v) {
                    *a += 0.5 * h * wi * vi;
                }
            }
        }
        Ok(acc)
    }

    /// Doubles the panel count until two results agree to `tol`.
    /// Returns the value and the final panel count.
    #[allow(clippy::too_many_arguments)]
    fn adaptive(
        &self,
        lo: f64,
        hi: f64,
        start: usize,
        max_panels: usize,
        tol: f64,
        eps: f64,
        dim: usize,
        f: &mut impl FnMut(f64) -> Result<Vec<f64>, MeasureError>,
    ) -> Result<(Vec<f64>, usize), MeasureError> {
        // a panel wider than a few eps can step over the peak entirely
        let resolve = crate::math::ceil((hi - lo) / (4.0 * eps)) as usize;
        let mut panels = start.max(1);
        while panels < resolve {
            panels *= 2;
        }
        let mut prev = self.apply(lo, hi, panels, dim, f)?;
        while panels * 2 <= max_panels {
            panels *= 2;
            let next = self.apply(lo, hi, panels, dim, f)?;
            let diff = next
                .iter()
                .zip(&prev)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prev = next;
            if diff < tol {
                return Ok((prev, panels));
            }
        }
        Err(MeasureError::Quadrature { eps, panels })
    }
}

/// `N(z) = -(Q^* M(z) Q - alpha)^{-1}` from the full Weyl matrix.
pub fn n_matrix(ctx: &ReductionContext, z: C64) -> Result<CMatrix, MeasureError> {
    let m = ctx.projected_weyl(z)?;
    let shift = CMatrix::identity(m.rows()).scale(C64::new(ctx.scalar_condition().alpha, 0.0));
    Ok((m - shift).inverse()?.scale(-ONE))
}

/// `N(z) = n(z) (T - eta(z))^{-1}` from the reduction scalars.
pub fn n_matrix_reduced(ctx: &ReductionContext, z: C64) -> Result<CMatrix, MeasureError> {
    let s = ctx.scalars(z, false)?;
    let t = ctx.operator();
    let shifted = t - &CMatrix::identity(t.rows()).scale(s.eta);
    Ok(shifted.inverse()?.scale(s.n))
}

fn flatten(m: &CMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.rows() * m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

fn unflatten(r: usize, v: &[f64]) -> CMatrix {
    CMatrix::from_fn(r, r, |i, j| {
        C64::new(v[2 * (i * r + j)], v[2 * (i * r + j) + 1])
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LhsRung {
    pub eps: f64,
    pub matrix: CMatrix,
    pub panels: usize,
}

/// `(1/pi) int Im N(x + i eps) dx` over the collared interval, one matrix per
/// rung. `Im` is the Hermitian imaginary part `(N - N^*)/2i`.
pub fn stieltjes_lhs(
    ctx: &ReductionContext,
    cfg: &MeasureCheckConfig,
) -> Result<Vec<LhsRung>, MeasureError> {
    cfg.validate()?;
    let r = ctx.projector().rank();
    let (lo, hi) = (cfg.interval.0 + cfg.collar, cfg.interval.1 - cfg.collar);
    let quad = Composite::new();
    let mut panels = cfg.initial_panels;
    let mut rungs = Vec::with_capacity(cfg.eps.len());
    for &eps in &cfg.eps {
        let mut f = |x: f64| -> Result<Vec<f64>, MeasureError> {
            let n = n_matrix(ctx, C64::new(x, eps))?;
            Ok(flatten(
                &n.anti_hermitian_part().scale(C64::new(1.0 / PI, 0.0)),
            ))
        };
        let (v, used) = quad.adaptive(
            lo,
            hi,
            panels,
            cfg.max_panels,
            cfg.quadrature_tol,
            eps,
            2 * r * r,
            &mut f,
        )?;
        panels = used / 2;
        let m = unflatten(r, &v);
        rungs.push(LhsRung {
            eps,
            matrix: m.hermitian_part(),
            panels: used,
        });
    }
    Ok(rungs)
}

/// One point of the spectral assembly: an eigenvalue of `T`, its preimage
/// and the weight `n / eta'` there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomWeight {
    pub lambda: f64,
    pub z: f64,
    pub multiplicity: usize,
    pub weight: f64,
}

/// Atoms of the measure in the whole gap.
pub fn atoms(ctx: &ReductionContext) -> Result<Vec<AtomWeight>, MeasureError> {
    let mut out = Vec::new();
    for group in &ctx.eigen().groups {
        let z = match ctx.preimage(group.value) {
            Ok(z) => z,
            Err(PreimageError::Boundary { lambda, endpoint }) => {
                return Err(MeasureError::Boundary { lambda, endpoint });
            }
            Err(PreimageError::OutOfRange(_)) | Err(PreimageError::EmptyK) => continue,
            Err(PreimageError::Ode(e)) => return Err(e.into()),
        };
        let s = ctx.scalars(C64::new(z, 0.0), true)?;
        let deta = s.deta.map(|d| d.re).unwrap_or(f64::NAN);
        out.push(AtomWeight {
            lambda: group.value,
            z,
            multiplicity: group.multiplicity,
            weight: s.n.re / deta,
        });
    }
    Ok(out)
}

/// Measure of `(a, b)` assembled from the eigenpairs of `T`:
/// the sum of `n(z_k) / eta'(z_k)` times the eigenprojector over `z_k` in `(a, b)`.
pub fn stieltjes_rhs(
    ctx: &ReductionContext,
    interval: (f64, f64),
) -> Result<CMatrix, MeasureError> {
    let r = ctx.projector().rank();
    let mut out = CMatrix::zeros(r, r);
    let atoms = atoms(ctx)?;
    for (group, atom) in ctx
        .eigen()
        .groups
        .iter()
        .filter_map(|g| atoms.iter().find(|a| a.lambda == g.value).map(|a| (g, a)))
    {
        if atom.z > interval.0 && atom.z < interval.1 {
            out = out
                + ctx
                    .eigen()
                    .group_projector(group)
                    .scale(C64::new(atom.weight, 0.0));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RungReport {
    pub eps: f64,
    pub discrepancy: f64,
    pub hermitian_defect: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub interval: (f64, f64),
    pub rungs: Vec<RungReport>,
    pub rhs: CMatrix,
    pub rhs_norm: f64,
    pub rhs_min_eigenvalue: f64,
    /// Discrepancy after Richardson extrapolation over the last two rungs.
    pub extrapolated: f64,
    pub monotone: bool,
    pub positive: bool,
    pub converged: bool,
}

impl MeasureReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.positive && self.converged
    }
}

/// Linear extrapolation of `L(eps)` to `eps = 0` through two rungs.
pub fn richardson(e1: f64, l1: &CMatrix, e2: f64, l2: &CMatrix) -> CMatrix {
    let d = e1 - e2;
    (l2.scale(C64::new(e1 / d, 0.0))) - l1.scale(C64::new(e2 / d, 0.0))
}

/// Runs both sides and compares them.
pub fn verify_measure(
    ctx: &ReductionContext,
    cfg: &MeasureCheckConfig,
) -> Result<MeasureReport, MeasureError> {
    let lhs = stieltjes_lhs(ctx, cfg)?;
    let rhs = stieltjes_rhs(ctx, cfg.interval)?;
    let rhs_norm = rhs.frobenius_norm();
    let rungs: Vec<RungReport> = lhs
        .iter()
        .map(|l| RungReport {
            eps: l.eps,
            discrepancy: (&l.matrix - &rhs).frobenius_norm(),
            hermitian_defect: l.matrix.hermitian_defect(),
            panels: l.panels,
        })
        .collect();
    let monotone = rungs
        .windows(2)
        .skip(1)
        .all(|w| w[1].discrepancy <= w[0].discrepancy)
        || rungs.len() < 3
            && rungs
                .windows(2)
                .all(|w| w[1].discrepancy <= w[0].discrepancy);
    let extrapolated = match lhs.len() {
        0 => f64::INFINITY,
        1 => rungs[0].discrepancy,
        k => {
            let (p, q) = (&lhs[k - 2], &lhs[k - 1]);
            (&richardson(p.eps, &p.matrix, q.eps, &q.matrix) - &rhs).frobenius_norm()
        }
    };
    let rhs_min_eigenvalue = if rhs.rows() == 0 {
        0.0
    } else {
        linalg::jacobi_hermitian(&rhs)?.0[0]
    };
    let scale = rhs_norm.max(f64::MIN_POSITIVE);
    Ok(MeasureReport {
        interval: cfg.interval,
        rungs,
        rhs_norm,
        rhs_min_eigenvalue,
        extrapolated,
        monotone,
        positive: rhs_min_eigenvalue >= -1e-10 * rhs_norm,
        converged: if rhs_norm == 0.0 {
            extrapolated <= 1e-3
        } else {
            extrapolated <= 1e-3 * scale
        },
        rhs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitCase {
    Inside,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub lambda: f64,
    pub interval: (f64, f64),
    /// `(eps, k_I(lambda, eps))`.
    pub values: Vec<(f64, f64)>,
    pub case: LimitCase,
    pub limit: f64,
    /// `|k_I - limit|` at the smallest eps.
    pub deviation: f64,
}

// points of [a, b] where eta = lambda, with the weight n / eta' and whether
// the point is an end of [a, b]
fn level_points(
    ctx: &ReductionContext,
    (a, b): (f64, f64),
    lambda: f64,
) -> Result<Vec<(f64, f64, bool)>, MeasureError> {
    let tol = 1e-9 * (1.0 + lambda.abs());
    let weight = |z: f64| -> Result<f64, MeasureError> {
        let s = ctx.scalars(C64::new(z, 0.0), true)?;
        Ok(s.n.re / s.deta.map(|d| d.re).unwrap_or(f64::NAN))
    };
    let f = |z: f64| -> Result<f64, OdeError> { Ok(ctx.eta(z, false)?.0 - lambda) };
    let mut out = Vec::new();
    let fa = f(a)?;
    let fb = f(b)?;
    if fa.abs() <= tol {
        out.push((a, weight(a)?, true));
    }
    if fb.abs() <= tol {
        out.push((b, weight(b)?, true));
    }
    let n = 1024;
    let mut prev = (a, fa);
    for i in 1..=n {
        let z = a + (b - a) * i as f64 / n as f64;
        let fz = if i == n { fb } else { f(z)? };
        let inner = |v: f64| v.abs() > tol;
        if inner(prev.1) && inner(fz) && (prev.1 < 0.0) != (fz < 0.0) {
            let root = ode::refine_root(f, prev.0, z, prev.1, fz)?;
            out.push((root, weight(root)?, false));
        }
        prev = (z, fz);
    }
    Ok(out)
}

/// `k_I(lambda, eps) = (1/pi) int_I Im[n(x + i eps) / (lambda - eta(x + i eps))] dx`
/// along a ladder, with the limit it should approach.
pub fn k_i_check(
    ctx: &ReductionContext,
    interval: (f64, f64),
    lambda: f64,
    eps: &[f64],
) -> Result<KernelReport, MeasureError> {
    let (a, b) = interval;
    if !(a < b) {
        return Err(MeasureError::BadConfig(format!(
            "interval [{}, {}] is empty",
            a, b
        )));
    }
    let quad = Composite::new();
    let mut panels = 16;
    let mut values = Vec::with_capacity(eps.len());
    for &e in eps {
        let mut f = |x: f64| -> Result<Vec<f64>, MeasureError> {
            let s = ctx.scalars(C64::new(x, e), false)?;
            let v = s.n / (C64::new(lambda, 0.0) - s.eta);
            Ok(alloc::vec![v.im / PI])
        };
        let (v, used) = quad.adaptive(a, b, panels, 1 << 20, 1e-10, e, 1, &mut f)?;
        panels = used / 2;
        values.push((e, v[0]));
    }
    let points = level_points(ctx, interval, lambda)?;
    let case = if points.iter().any(|p| !p.2) {
        LimitCase::Inside
    } else if points.is_empty() {
        LimitCase::Outside
    } else {
        LimitCase::Boundary
    };
    let limit = points
        .iter()
        .map(|&(_, w, end)| if end { 0.5 * w } else { w })
        .fold(0.0, |s, w| s + w);
    let deviation = values
        .last()
        .map(|v| (v.1 - limit).abs())
        .unwrap_or(f64::NAN);
    Ok(KernelReport {
        lambda,
        interval,
        values,
        case,
        limit,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{CouplingSpec, Strength};
    use crate::graph::{EdgeDesc, GraphDescription, MetricGraph, VertexDesc};
    use crate::potential::Potential;
    use alloc::string::ToString;

    fn kirchhoff_graph(vs: &[&str], es: &[(&str, &str, &str)]) -> MetricGraph {
        MetricGraph::build(&GraphDescription {
            length: 1.0,
            potential: Potential::Zero,
            vertices: vs
                .iter()
                .map(|v| VertexDesc {
                    id: v.to_string(),
                    coupling: CouplingSpec::Delta {
                        alpha: Strength::Fixed(0.0),
                    },
                })
                .collect(),
            edges: es
                .iter()
                .map(|(e, t, h)| EdgeDesc {
                    id: e.to_string(),
                    tail: t.to_string(),
                    head: h.to_string(),
                    beta: 0.0,
                })
                .collect(),
        })
        .unwrap()
    }

    fn triangle() -> MetricGraph {
        kirchhoff_graph(
            &["a", "b", "c"],
            &[("ab", "a", "b"), ("bc", "b", "c"), ("ca", "c", "a")],
        )
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(32);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(40)).sum();
        assert!((m - 2.0 / 41.0).abs() < 1e-14);
        let (x5, _) = gauss_legendre(5);
        assert!(x5[2].abs() < 1e-15);
    }

    #[test]
    fn ladder_ends_at_1e_4() {
        let l = default_eps_ladder();
        assert_eq!(l[0], 1e-2);
        assert_eq!(*l.last().unwrap(), 1e-4);
        assert!(l.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn weyl_and_reduced_forms_of_n_agree() {
        let g = triangle();
        let ctx = ReductionContext::new(&g, (-2.0, 9.8)).unwrap();
        for z in [C64::new(0.3, 0.2), C64::new(4.1, 1e-3), C64::new(-1.0, 0.5)] {
            let a = n_matrix(&ctx, z).unwrap();
            let b = n_matrix_reduced(&ctx, z).unwrap();
            assert!((&a - &b).max_abs() < 1e-10 * (1.0 + a.max_abs()));
        }
    }

    #[test]
    fn single_edge_atom_weight_is_two() {
        let g = kirchhoff_graph(&["u", "v"], &[("e", "u", "v")]);
        let ctx = ReductionContext::new(&g, (-2.0, 9.8)).unwrap();
        let rhs = stieltjes_rhs(&ctx, (-0.5, 0.5)).unwrap();
        let (vals, _) = linalg::jacobi_hermitian(&rhs).unwrap();
        assert!(vals[0].abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn rhs_is_additive_and_empty_off_atoms() {
        let g = triangle();
        let ctx = ReductionContext::new(&g, (-2.0, 9.8)).unwrap();
        assert!(stieltjes_rhs(&ctx, (1.0, 3.0)).unwrap().max_abs() == 0.0);
        let whole = stieltjes_rhs(&ctx, (-1.0, 5.0)).unwrap();
        let parts =
            stieltjes_rhs(&ctx, (-1.0, 2.0)).unwrap() + stieltjes_rhs(&ctx, (2.0, 5.0)).unwrap();
        assert_eq!(whole, parts);
    }

    #[test]
    fn kernel_limit_interior() {
        let g = triangle();
        let ctx = ReductionContext::new(&g, (-2.0, 9.8)).unwrap();
        let rep = k_i_check(&ctx, (3.0, 5.0), -0.5, &[1e-3, 1e-4]).unwrap();
        assert_eq!(rep.case, LimitCase::Inside);
        assert!((rep.limit - 2.0).abs() < 1e-8);
        assert!(rep.deviation < 5e-3, "{:?}", rep);
    }

    #[test]
    fn rejects_bad_ladder() {
        let cfg = MeasureCheckConfig::new((4.0, 4.8)).with_eps(alloc::vec![1e-3, 1e-2]);
        assert!(matches!(cfg.validate(), Err(MeasureError::BadConfig(_))));
    }
}
