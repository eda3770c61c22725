//! Weyl matrices of the edge and of the whole graph, the scalar reduction
//! function `eta`, the interval `K` and the reduced spectrum.
//!
//! Inside a gap `J` of the reference problem the eigenvalue condition for the
//! graph reads `(Q^* M(z) Q - alpha) x = 0` on `ran P`. Whenever this matrix
//! has the form `(eta(z) - T) / n(z)` the spectrum in `J` is the preimage
//! under `eta` of the spectrum of the discrete operator `T`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::coupling::{self, Frame, ScalarCondition, ScalarConditionError};
use crate::discrete::{self, BlockProjector, DiscreteError, EigenDecomposition};
use crate::graph::{End, MetricGraph};
use crate::linalg::{CMatrix, C64, I, ONE};
use crate::ode::{self, OdeError, ReferenceProblem, TransferMatrix};
use crate::potential::Potential;
use crate::spectrum::{BoundaryCase, Method, SpectralEntry, SpectralResult};

/// Pivot below which the edge Weyl matrix is considered singular.
pub const PIVOT_TOL: f64 = 1e-13;
/// Distance to `eta` at a gap end below which an eigenvalue is a boundary case.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TripleKind {
    DirichletBased,
    NeumannBased,
}

impl TripleKind {
    pub fn from_frame(frame: Frame) -> Self {
        match frame {
            Frame::Dirichlet => TripleKind::DirichletBased,
            Frame::Neumann => TripleKind::NeumannBased,
        }
    }

    pub fn reference(&self) -> ReferenceProblem {
        match self {
            TripleKind::DirichletBased => ReferenceProblem::Dirichlet,
            TripleKind::NeumannBased => ReferenceProblem::Neumann,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum WeylError {
    #[error("z = {z} is too close to the reference spectrum (pivot {pivot:e})")]
    NearReference { z: C64, pivot: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// 2x2 Weyl matrix of a single edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeWeylMatrix {
    pub ii: C64,
    pub it: C64,
    pub ti: C64,
    pub tt: C64,
    pub kind: TripleKind,
}

impl EdgeWeylMatrix {
    pub fn entry(&self, row: End, col: End) -> C64 {
        match (row, col) {
            (End::Initial, End::Initial) => self.ii,
            (End::Initial, End::Terminal) => self.it,
            (End::Terminal, End::Initial) => self.ti,
            (End::Terminal, End::Terminal) => self.tt,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.ii - self.tt).norm() <= tol * (1.0 + self.ii.norm())
            && (self.it - self.ti).norm() <= tol * (1.0 + self.it.norm())
    }

    /// Smallest eigenvalue of `(m - m^*) / 2i`.
    pub fn min_imaginary_eigenvalue(&self) -> f64 {
        let a = self.ii.im;
        let d = self.tt.im;
        let b = (self.it - self.ti.conj()) / (I * 2.0);
        let tr = 0.5 * (a + d);
        let disc = crate::math::sqrt(0.25 * (a - d) * (a - d) + b.norm_sqr());
        tr - disc
    }
}

/// Edge Weyl matrix computed from an already integrated transfer matrix.
pub fn edge_weyl_from(
    kind: TripleKind,
    t: &TransferMatrix,
    z: C64,
) -> Result<EdgeWeylMatrix, WeylError> {
    let (pivot, scale) = match kind {
        TripleKind::DirichletBased => (t.s, t.c.norm().max(t.sp.norm()).max(1.0)),
        TripleKind::NeumannBased => (t.cp, t.c.norm().max(t.sp.norm()).max(1.0)),
    };
    if pivot.norm() < PIVOT_TOL * scale {
        return Err(WeylError::NearReference {
            z,
            pivot: pivot.norm(),
        });
    }
    let inv = ONE / pivot;
    Ok(match kind {
        TripleKind::DirichletBased => EdgeWeylMatrix {
            ii: -t.c * inv,
            it: inv,
            ti: inv,
            tt: -t.sp * inv,
            kind,
        },
        TripleKind::NeumannBased => EdgeWeylMatrix {
            ii: t.sp * inv,
            it: inv,
            ti: inv,
            tt: t.c * inv,
            kind,
        },
    })
}

/// z-derivative of the edge Weyl matrix.
pub fn edge_weyl_derivative(kind: TripleKind, t: &TransferMatrix) -> EdgeWeylMatrix {
    let d = t.dz();
    let (p, dp) = match kind {
        TripleKind::DirichletBased => (t.s, d.s),
        TripleKind::NeumannBased => (t.cp, d.cp),
    };
    // derivative of x / p
    let q = |x: C64, dx: C64| (dx * p - x * dp) / (p * p);
    match kind {
        TripleKind::DirichletBased => EdgeWeylMatrix {
            ii: -q(t.c, d.c),
            it: q(ONE, C64::new(0.0, 0.0)),
            ti: q(ONE, C64::new(0.0, 0.0)),
            tt: -q(t.sp, d.sp),
            kind,
        },
        TripleKind::NeumannBased => EdgeWeylMatrix {
            ii: q(t.sp, d.sp),
            it: q(ONE, C64::new(0.0, 0.0)),
            ti: q(ONE, C64::new(0.0, 0.0)),
            tt: q(t.c, d.c),
            kind,
        },
    }
}

pub fn edge_weyl(
    kind: TripleKind,
    potential: &Potential,
    l: f64,
    z: C64,
) -> Result<EdgeWeylMatrix, WeylError> {
    let t = ode::transfer(potential, l, z, false)?;
    edge_weyl_from(kind, &t, z)
}

/// Deck-space Weyl matrix assembled slot by slot.
pub fn full_weyl_from(g: &MetricGraph, m: &EdgeWeylMatrix) -> CMatrix {
    let deck = g.deck();
    let n = deck.len();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        let si = deck.slot(i);
        let j = deck.partner(i);
        out[(i, i)] = m.entry(si.end, si.end);
        out[(i, j)] += m.entry(si.end, si.end.other());
    }
    out
}

pub fn full_weyl(g: &MetricGraph, kind: TripleKind, z: C64) -> Result<CMatrix, WeylError> {
    let m = edge_weyl(kind, g.potential(), g.length(), z)?;
    Ok(full_weyl_from(g, &m))
}

/// `m_ii I + m_it D`, valid when the edge matrix is symmetric.
pub fn symmetric_weyl(g: &MetricGraph, m: &EdgeWeylMatrix) -> CMatrix {
    let n = g.deck().len();
    CMatrix::identity(n).scale(m.ii) + discrete::deck_shift(g).scale(m.it)
}

/// Coupling family the reduction runs with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `eta = c + alpha s`, `T = Delta_beta`.
    Delta,
    /// `eta = c + alpha s` with `alpha = 1/beta`, `T = D_P` on the
    /// complements of the constants.
    DeltaPrime,
    /// Neumann frame: `eta = c + alpha c'`, `n = c'`, `T = -Delta_beta`.
    DeltaPrimeS,
    /// Directed graphs with a common ratio `kappa = outdeg / deg`:
    /// `eta = kappa c + (1 - kappa) s' + alpha s`; any potential.
    Kappa { kappa: f64 },
    /// Any scalar coupling in the Dirichlet frame: `eta = (alpha - m_ii)/m_it`,
    /// `T = D_P`.
    Projected,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Delta => "delta",
            Family::DeltaPrime => "delta_prime",
            Family::DeltaPrimeS => "delta_prime_s",
            Family::Kappa { .. } => "directed_kappa",
            Family::Projected => "projected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("interval ({0}, {1}) is empty or not finite")]
    BadInterval(f64, f64),
    #[error("vertices mix Dirichlet-frame and Neumann-frame couplings")]
    MixedFrames,
    #[error("symmetry hypothesis fails: V(x) != V(l - x); only the secular solver applies")]
    AsymmetricPotential,
    #[error("scalar-spectrum hypothesis fails: {0}")]
    ScalarCondition(#[from] ScalarConditionError),
    #[error("the reduced space ran P is trivial")]
    EmptyReducedSpace,
    #[error("the reference spectrum meets the interval near z = {0}")]
    ReferenceSpectrumInInterval(f64),
    #[error("the set where eta lies in [inf T, sup T] is disconnected ({0} components)")]
    DisconnectedK(usize),
    #[error("eta' changes sign inside K near z = {0}")]
    NonMonotone(f64),
    #[error("sign(eta') != sign(n) inside K at z = {0}")]
    SignLaw(f64),
    #[error(transparent)]
    Discrete(#[from] DiscreteError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Weyl(#[from] WeylError),
}

impl ReductionError {
    /// True when a hypothesis of the reduction fails, false for numerical
    /// failures.
    pub fn is_precondition(&self) -> bool {
        !matches!(
            self,
            ReductionError::Discrete(_) | ReductionError::Ode(_) | ReductionError::Weyl(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionOptions {
    pub grid_points: usize,
    pub symmetry_tol: f64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self {
            grid_points: 512,
            symmetry_tol: 1e-10,
        }
    }
}

/// Connected piece of the gap on which `eta` takes values in `[inf T, sup T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_clipped: bool,
    pub hi_clipped: bool,
    pub increasing: bool,
    /// Smallest `|eta'|` seen on the grid inside `K`.
    pub min_abs_derivative: f64,
    /// Grid points inside `K` where `eta'` and `n` were compared.
    pub checked_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PreimageError {
    #[error("lambda = {lambda} meets eta at the gap end {endpoint}")]
    Boundary { lambda: f64, endpoint: f64 },
    #[error("lambda = {0} lies outside eta(K)")]
    OutOfRange(f64),
    #[error("K is empty")]
    EmptyK,
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Scalar functions of the reduction at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalars {
    pub eta: C64,
    pub deta: Option<C64>,
    pub n: C64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Class {
    Below,
    Inside,
    Above,
}

/// Everything the reduction needs for one graph and one gap.
#[derive(Debug, Clone)]
pub struct ReductionContext {
    graph: MetricGraph,
    family: Family,
    kind: TripleKind,
    scalar: ScalarCondition,
    alpha: f64,
    symmetric: bool,
    projector: BlockProjector,
    t: CMatrix,
    eig: EigenDecomposition,
    interval: (f64, f64),
    k: Option<KInterval>,
    options: ReductionOptions,
}

impl ReductionContext {
    pub fn new(g: &MetricGraph, interval: (f64, f64)) -> Result<Self, ReductionError> {
        Self::with_options(g, interval, ReductionOptions::default())
    }

    pub fn with_options(
        g: &MetricGraph,
        interval: (f64, f64),
        options: ReductionOptions,
    ) -> Result<Self, ReductionError> {
        let (a, b) = interval;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(ReductionError::BadInterval(a, b));
        }
        let frames: Vec<Frame> = g.vertices().iter().map(|v| v.coupling.frame()).collect();
        let frame = frames[0];
        if frames.iter().any(|&f| f != frame) {
            return Err(ReductionError::MixedFrames);
        }
        let kind = TripleKind::from_frame(frame);
        let scalar = coupling::check_scalar_condition(g)?;
        let symmetric =
            ode::check_symmetric_potential(g.potential(), g.length(), options.symmetry_tol);
        let projector = discrete::block_projector(g)?;
        if projector.rank() == 0 {
            return Err(ReductionError::EmptyReducedSpace);
        }
        let delta_type = discrete::theta_map(g).is_ok();
        let (family, alpha, sign) = match kind {
            TripleKind::NeumannBased => {
                if !symmetric {
                    return Err(ReductionError::AsymmetricPotential);
                }
                (Family::DeltaPrimeS, -scalar.alpha, -1.0)
            }
            TripleKind::DirichletBased if delta_type => {
                if symmetric {
                    (Family::Delta, scalar.alpha, 1.0)
                } else {
                    let kappa = |v: &crate::graph::Vertex| v.outdegree as f64 / v.degree as f64;
                    let k0 = kappa(&g.vertices()[0]);
                    if g.vertices().iter().any(|v| (kappa(v) - k0).abs() > 1e-12) {
                        return Err(ReductionError::AsymmetricPotential);
                    }
                    (Family::Kappa { kappa: k0 }, scalar.alpha, 1.0)
                }
            }
            TripleKind::DirichletBased => {
                if !symmetric {
                    return Err(ReductionError::AsymmetricPotential);
                }
                let all_dp = g
                    .vertices()
                    .iter()
                    .all(|v| matches!(v.coupling, coupling::CouplingSpec::DeltaPrime { .. }));
                (
                    if all_dp {
                        Family::DeltaPrime
                    } else {
                        Family::Projected
                    },
                    scalar.alpha,
                    1.0,
                )
            }
        };
        let d_p = discrete::projected_shift(g, &projector).matrix;
        let t = d_p.scale(C64::new(sign, 0.0));
        let eig = discrete::hermitian_eigs(&t)?;
        let mut ctx = Self {
            graph: g.clone(),
            family,
            kind,
            scalar,
            alpha,
            symmetric,
            projector,
            t,
            eig,
            interval,
            k: None,
            options,
        };
        ctx.check_reference_free()?;
        ctx.k = ctx.locate_k()?;
        Ok(ctx)
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn kind(&self) -> TripleKind {
        self.kind
    }

    pub fn scalar_condition(&self) -> ScalarCondition {
        self.scalar
    }

    /// The `alpha` entering the family formula for `eta`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn projector(&self) -> &BlockProjector {
        &self.projector
    }

    /// Discrete operator `T` written in the basis of `ran P`.
    pub fn operator(&self) -> &CMatrix {
        &self.t
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn k(&self) -> Option<KInterval> {
        self.k
    }

    /// `[inf spec T, sup spec T]`.
    pub fn spectral_hull(&self) -> (f64, f64) {
        (self.eig.values[0], *self.eig.values.last().unwrap())
    }

    fn transfer(&self, z: C64, want_dz: bool) -> Result<TransferMatrix, OdeError> {
        ode::transfer(self.graph.potential(), self.graph.length(), z, want_dz)
    }

    /// `eta`, optionally `eta'`, and `n` at a complex point.
    pub fn scalars(&self, z: C64, want_derivative: bool) -> Result<Scalars, OdeError> {
        let t = self.transfer(z, want_derivative)?;
        let a = self.alpha;
        let (eta, n) = match self.family {
            Family::Delta | Family::DeltaPrime | Family::Projected => (t.c + t.s * a, -t.s),
            Family::Kappa { kappa } => (t.c * kappa + t.sp * (1.0 - kappa) + t.s * a, -t.s),
            Family::DeltaPrimeS => (t.c + t.cp * a, t.cp),
        };
        let deta = want_derivative.then(|| {
            let d = t.dz();
            match self.family {
                Family::Delta | Family::DeltaPrime | Family::Projected => d.c + d.s * a,
                Family::Kappa { kappa } => d.c * kappa + d.sp * (1.0 - kappa) + d.s * a,
                Family::DeltaPrimeS => d.c + d.cp * a,
            }
        });
        Ok(Scalars { eta, deta, n })
    }

    /// `eta(z)` and optionally `eta'(z)` for real `z`.
    pub fn eta(&self, z: f64, want_derivative: bool) -> Result<(f64, Option<f64>), OdeError> {
        let s = self.scalars(C64::new(z, 0.0), want_derivative)?;
        Ok((s.eta.re, s.deta.map(|d| d.re)))
    }

    /// `n(z)` for real `z`.
    pub fn n(&self, z: f64) -> Result<f64, OdeError> {
        Ok(self.scalars(C64::new(z, 0.0), false)?.n.re)
    }

    /// `eta` from the Weyl matrix entries, `(alpha - m_ii)/m_it`, with the
    /// sign of the family convention.
    pub fn eta_from_weyl(&self, z: f64) -> Result<f64, WeylError> {
        let m = edge_weyl(
            self.kind,
            self.graph.potential(),
            self.graph.length(),
            C64::new(z, 0.0),
        )?;
        let generic = (C64::new(self.scalar.alpha, 0.0) - m.ii) / m.it;
        let sign = if self.kind == TripleKind::NeumannBased {
            -1.0
        } else {
            1.0
        };
        Ok(sign * generic.re)
    }

    /// `Q^* M(z) Q` on `ran P`.
    pub fn projected_weyl(&self, z: C64) -> Result<CMatrix, WeylError> {
        let m = full_weyl(&self.graph, self.kind, z)?;
        let q = &self.projector.basis;
        Ok(&(&q.adjoint() * &m) * q)
    }

    /// Sample points of the open interval: a uniform grid with the two ends
    /// replaced by geometric sequences approaching them. The ends themselves
    /// are excluded; at a reference eigenvalue `eta` often sits exactly on a
    /// bound of the hull and turns away within a fraction of a grid step.
    fn grid(&self) -> Vec<f64> {
        let (a, b) = self.interval;
        let n = self.options.grid_points.max(8);
        let h = (b - a) / n as f64;
        let closest = 1e-6 * (b - a);
        let mut near: Vec<f64> = Vec::new();
        let mut d = 0.5 * h;
        while d > closest {
            near.push(d);
            d *= 0.5;
        }
        near.push(closest);
        let mut out: Vec<f64> = near.iter().rev().map(|d| a + d).collect();
        out.extend((1..n).map(|i| a + h * i as f64));
        out.extend(near.iter().map(|d| b - d));
        out
    }

    fn check_reference_free(&self) -> Result<(), ReductionError> {
        let grid = self.grid();
        let inner = &grid[..];
        let mut prev: Option<f64> = None;
        for &z in inner {
            let n = self.n(z)?;
            if n == 0.0 {
                return Err(ReductionError::ReferenceSpectrumInInterval(z));
            }
            if let Some(p) = prev {
                if (p < 0.0) != (n < 0.0) {
                    return Err(ReductionError::ReferenceSpectrumInInterval(z));
                }
            }
            prev = Some(n);
        }
        Ok(())
    }

    fn classify(&self, eta: f64) -> Class {
        let (lo, hi) = self.spectral_hull();
        let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if eta < lo - tol {
            Class::Below
        } else if eta > hi + tol {
            Class::Above
        } else {
            Class::Inside
        }
    }

    fn solve_eta(&self, target: f64, a: f64, b: f64) -> Result<f64, OdeError> {
        let f = |z: f64| -> Result<f64, OdeError> { Ok(self.eta(z, false)?.0 - target) };
        let fa = f(a)?;
        let fb = f(b)?;
        if (fa < 0.0) == (fb < 0.0) && fa != 0.0 && fb != 0.0 {
            // touching without a crossing; the nearer end is the answer
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        ode::refine_root(f, a, b, fa, fb)
    }

    /// Locates `K = eta^{-1}([inf T, sup T]) inside J` and checks that `eta`
    /// is strictly monotone there with `sign(eta') = sign(n)`.
    pub fn locate_k(&self) -> Result<Option<KInterval>, ReductionError> {
        let grid = self.grid();
        let (lo_t, hi_t) = self.spectral_hull();
        let etas: Vec<f64> = grid
            .iter()
            .map(|&z| self.eta(z, false).map(|e| e.0))
            .collect::<Result<_, _>>()?;
        let classes: Vec<Class> = etas.iter().map(|&e| self.classify(e)).collect();
        let bound_between = |from: Class| if from == Class::Below { lo_t } else { hi_t };

        // collect visits of the hull: runs of Inside and direct jumps across it
        let mut visits: Vec<(f64, f64, bool, bool)> = Vec::new();
        let mut i = 0;
        let last = grid.len() - 1;
        while i <= last {
            if classes[i] == Class::Inside {
                let start = i;
                while i < last && classes[i + 1] == Class::Inside {
                    i += 1;
                }
                let end = i;
                let (lo, lo_clipped) = if start == 0 {
                    (self.interval.0, true)
                } else {
                    let target = bound_between(classes[start - 1]);
                    (self.solve_eta(target, grid[start - 1], grid[start])?, false)
                };
                let (hi, hi_clipped) = if end == last {
                    (self.interval.1, true)
                } else {
                    let target = bound_between(classes[end + 1]);
                    (self.solve_eta(target, grid[end], grid[end + 1])?, false)
                };
                visits.push((lo, hi, lo_clipped, hi_clipped));
            } else if i < last && classes[i + 1] != Class::Inside && classes[i + 1] != classes[i] {
                let first = self.solve_eta(bound_between(classes[i]), grid[i], grid[i + 1])?;
                let second = self.solve_eta(bound_between(classes[i + 1]), grid[i], grid[i + 1])?;
                visits.push((first.min(second), first.max(second), false, false));
            }
            i += 1;
        }
        if visits.len() > 1 {
            return Err(ReductionError::DisconnectedK(visits.len()));
        }
        let Some(&(lo, hi, lo_clipped, hi_clipped)) = visits.first() else {
            return Ok(None);
        };

        // monotonicity and the sign law on interior grid points of K
        let mut points: Vec<f64> = grid.iter().copied().filter(|&z| z > lo && z < hi).collect();
        if points.is_empty() {
            points.push(0.5 * (lo + hi));
        }
        let mut sign: Option<bool> = None;
        let mut min_abs = f64::INFINITY;
        let mut weakest = points[0];
        let mut check =
            |z: f64, min_abs: &mut f64, weakest: &mut f64| -> Result<(), ReductionError> {
                let s = self.scalars(C64::new(z, 0.0), true)?;
                let d = s.deta.unwrap().re;
                let n = s.n.re;
                if d == 0.0 {
                    return Err(ReductionError::NonMonotone(z));
                }
                match sign {
                    None => sign = Some(d > 0.0),
                    Some(up) if up != (d > 0.0) => return Err(ReductionError::NonMonotone(z)),
                    _ => {}
                }
                if (d > 0.0) != (n > 0.0) {
                    return Err(ReductionError::SignLaw(z));
                }
                if d.abs() < *min_abs {
                    *min_abs = d.abs();
                    *weakest = z;
                }
                Ok(())
            };
        for &z in &points {
            check(z, &mut min_abs, &mut weakest)?;
        }
        // refine around the point where eta' is smallest
        let h = (self.interval.1 - self.interval.0) / self.options.grid_points.max(8) as f64;
        let centre = weakest;
        for j in 1..32 {
            let z = centre - h + 2.0 * h * j as f64 / 32.0;
            if z > lo && z < hi {
                check(z, &mut min_abs, &mut weakest)?;
            }
        }
        Ok(Some(KInterval {
            lo,
            hi,
            lo_clipped,
            hi_clipped,
            increasing: sign.unwrap_or(true),
            min_abs_derivative: min_abs,
            checked_points: points.len(),
        }))
    }

    /// The unique `z` in `K` with `eta(z) = lambda`.
    pub fn preimage(&self, lambda: f64) -> Result<f64, PreimageError> {
        let k = self.k.ok_or(PreimageError::EmptyK)?;
        let (a, b) = self.interval;
        for (endpoint, clipped) in [(a, k.lo_clipped), (b, k.hi_clipped)] {
            if clipped && (self.eta(endpoint, false)?.0 - lambda).abs() <= BOUNDARY_TOL {
                return Err(PreimageError::Boundary { lambda, endpoint });
            }
        }
        let e_lo = self.eta(k.lo, false)?.0;
        let e_hi = self.eta(k.hi, false)?.0;
        let (min, max) = (e_lo.min(e_hi), e_lo.max(e_hi));
        let tol = 1e-12 * (1.0 + lambda.abs());
        if lambda < min - tol || lambda > max + tol {
            return Err(PreimageError::OutOfRange(lambda));
        }
        let f = |z: f64| -> Result<f64, OdeError> { Ok(self.eta(z, false)?.0 - lambda) };
        let (fa, fb) = (e_lo - lambda, e_hi - lambda);
        if (fa < 0.0) == (fb < 0.0) && fa != 0.0 && fb != 0.0 {
            return Ok(if fa.abs() < fb.abs() { k.lo } else { k.hi });
        }
        Ok(ode::refine_root(f, k.lo, k.hi, fa, fb)?)
    }

    /// Spectrum in `J` as preimages of the eigenvalues of `T`.
    pub fn reduce_spectrum(&self) -> Result<SpectralResult, ReductionError> {
        let mut result = SpectralResult::new(self.interval);
        if self.k.is_none() {
            result
                .warnings
                .push(String::from("eta(J) misses [inf T, sup T]; K is empty"));
            return Ok(result);
        }
        for group in &self.eig.groups {
            match self.preimage(group.value) {
                Ok(z) => {
                    let residual = (self.eta(z, false)?.0 - group.value).abs();
                    result.entries.push(SpectralEntry {
                        z,
                        multiplicity: group.multiplicity,
                        lambda: Some(group.value),
                        method: Method::Reduced,
                        residual,
                    });
                }
                Err(PreimageError::Boundary { lambda, endpoint }) => {
                    result.boundary.push(BoundaryCase {
                        lambda,
                        multiplicity: group.multiplicity,
                        endpoint,
                    })
                }
                Err(PreimageError::OutOfRange(_)) | Err(PreimageError::EmptyK) => {}
                Err(PreimageError::Ode(e)) => return Err(e.into()),
            }
        }
        result.sort();
        let (a, b) = self.interval;
        if let Some(e) = result.entries.iter().find(|e| !(e.z > a && e.z < b)) {
            result.warnings.push(format!(
                "reduced eigenvalue {} sits on the gap boundary",
                e.z
            ));
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{CouplingSpec, Strength};
    use crate::graph::{EdgeDesc, GraphDescription, VertexDesc};
    use crate::math::{cos, sqrt, PI};
    use alloc::string::ToString;
    use alloc::vec;

    fn graph(
        vs: &[&str],
        es: &[(&str, &str, &str)],
        coupling: CouplingSpec,
        potential: Potential,
    ) -> MetricGraph {
        MetricGraph::build(&GraphDescription {
            length: 1.0,
            potential,
            vertices: vs
                .iter()
                .map(|v| VertexDesc {
                    id: v.to_string(),
                    coupling: coupling.clone(),
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

    fn kirchhoff() -> CouplingSpec {
        CouplingSpec::Delta {
            alpha: Strength::PerDegree(0.0),
        }
    }

    fn triangle() -> MetricGraph {
        graph(
            &["a", "b", "c"],
            &[("ab", "a", "b"), ("bc", "b", "c"), ("ca", "c", "a")],
            kirchhoff(),
            Potential::Zero,
        )
    }

    #[test]
    fn edge_weyl_quarter_wave() {
        let z = C64::new(PI * PI / 4.0, 0.0);
        let m = edge_weyl(TripleKind::DirichletBased, &Potential::Zero, 1.0, z).unwrap();
        assert!(m.ii.norm() < 1e-14 && m.tt.norm() < 1e-14);
        assert!((m.it - C64::new(PI / 2.0, 0.0)).norm() < 1e-14);
        let m = edge_weyl(TripleKind::NeumannBased, &Potential::Zero, 1.0, z).unwrap();
        assert!((m.it + C64::new(2.0 / PI, 0.0)).norm() < 1e-14);
        assert!(m.ii.norm() < 1e-14);
    }

    #[test]
    fn edge_weyl_refuses_reference_points() {
        let z = C64::new(PI * PI, 0.0);
        let r = edge_weyl(TripleKind::DirichletBased, &Potential::Zero, 1.0, z);
        assert!(matches!(r, Err(WeylError::NearReference { .. })));
    }

    #[test]
    fn herglotz_sign() {
        for kind in [TripleKind::DirichletBased, TripleKind::NeumannBased] {
            for &re in &[-3.0, 2.0, 30.0] {
                let m = edge_weyl(kind, &Potential::Zero, 1.0, C64::new(re, 0.5)).unwrap();
                assert!(m.min_imaginary_eigenvalue() >= -1e-12);
            }
        }
    }

    #[test]
    fn single_edge_full_weyl() {
        let g = graph(
            &["v1", "v2"],
            &[("e", "v1", "v2")],
            kirchhoff(),
            Potential::Zero,
        );
        let m = full_weyl(&g, TripleKind::DirichletBased, C64::new(PI * PI / 4.0, 0.0)).unwrap();
        assert!((m[(0, 1)] - C64::new(PI / 2.0, 0.0)).norm() < 1e-14);
        assert!(m[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn asymmetric_full_weyl_differs_from_shortcut() {
        let ramp = Potential::polynomial(vec![0.0, 1.0]).unwrap();
        let g = graph(&["v1", "v2"], &[("e", "v1", "v2")], kirchhoff(), ramp);
        let z = C64::new(3.0, 0.0);
        let m = edge_weyl(TripleKind::DirichletBased, g.potential(), 1.0, z).unwrap();
        let diff = full_weyl_from(&g, &m) - symmetric_weyl(&g, &m);
        assert!(diff.max_abs() > 1e-3);
    }

    #[test]
    fn triangle_gap_zero() {
        let g = triangle();
        let ctx = ReductionContext::new(&g, (-1.0, PI * PI)).unwrap();
        assert_eq!(ctx.family(), Family::Delta);
        let k = ctx.k().unwrap();
        assert!(k.lo.abs() < 1e-10);
        assert!((k.hi - (2.0 * PI / 3.0).powi(2)).abs() < 1e-9);
        assert!(!k.increasing);
        let r = ctx.reduce_spectrum().unwrap();
        assert_eq!(r.entries.len(), 2);
        assert!(r.entries[0].z.abs() < 1e-10);
        assert_eq!(r.entries[0].multiplicity, 1);
        assert!((r.entries[1].z - 4.0 * PI * PI / 9.0).abs() < 1e-9);
        assert_eq!(r.entries[1].multiplicity, 2);
    }

    #[test]
    fn second_gap_is_clipped() {
        let g = graph(
            &["v1", "v2"],
            &[("e", "v1", "v2")],
            kirchhoff(),
            Potential::Zero,
        );
        let ctx = ReductionContext::new(&g, (PI * PI, 4.0 * PI * PI)).unwrap();
        let k = ctx.k().unwrap();
        assert!(k.increasing);
        assert!((k.lo - PI * PI).abs() < 1e-9 && (k.hi - 4.0 * PI * PI).abs() < 1e-9);
        let r = ctx.reduce_spectrum().unwrap();
        assert!(r.entries.is_empty());
        assert_eq!(r.boundary.len(), 2);
    }

    #[test]
    fn eta_closed_forms() {
        let g = graph(
            &["v1", "v2"],
            &[("e", "v1", "v2")],
            CouplingSpec::Delta {
                alpha: Strength::PerDegree(0.7),
            },
            Potential::Zero,
        );
        let ctx = ReductionContext::new(&g, (-1.0, PI * PI)).unwrap();
        for &z in &[0.0, 1.3, 5.0] {
            let (e, _) = ctx.eta(z, false).unwrap();
            let exact = if z == 0.0 {
                1.7
            } else {
                cos(sqrt(z)) + 0.7 * crate::math::sin(sqrt(z)) / sqrt(z)
            };
            assert!((e - exact).abs() < 1e-12);
            assert!(
                (ctx.eta_from_weyl(z.max(0.1)).unwrap() - ctx.eta(z.max(0.1), false).unwrap().0)
                    .abs()
                    < 1e-9
            );
        }
    }

    #[test]
    fn preimage_values() {
        let ctx = ReductionContext::new(&triangle(), (-1.0, PI * PI)).unwrap();
        let z = ctx.preimage(-0.5).unwrap();
        assert!((z - (2.0 * PI / 3.0).powi(2)).abs() < 1e-10);
        assert!(ctx.preimage(1.0).unwrap().abs() < 1e-11);
        assert!(matches!(
            ctx.preimage(-1.0),
            Err(PreimageError::OutOfRange(_))
        ));
    }

    #[test]
    fn asymmetric_delta_is_rejected() {
        let ramp = Potential::polynomial(vec![0.0, 1.0]).unwrap();
        let g = graph(
            &["a", "b", "c"],
            &[("ab", "a", "b"), ("bc", "b", "c"), ("ac", "a", "c")],
            kirchhoff(),
            ramp,
        );
        let e = ReductionContext::new(&g, (-1.0, 9.0)).unwrap_err();
        assert_eq!(e, ReductionError::AsymmetricPotential);
        assert!(e.is_precondition());
    }
}
