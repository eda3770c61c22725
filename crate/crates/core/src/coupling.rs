//! Vertex conditions in (A, B), unitary and projector forms.
//!
//! A unitary `U` of size `deg v` encodes the condition
//! `(1 - U) G = i (1 + U) G'` on the boundary values `G` and derivatives `G'`
//! collected at the vertex.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::graph::MetricGraph;
use crate::linalg::{self, CMatrix, LinalgError, C64, I, ONE};
use crate::math::{cos, sin, sqrt, PI};

/// Eigenvalues closer than this to `-1` count as `-1`.
pub const MINUS_ONE_TOL: f64 = 1e-10;
/// Tolerance for unitarity of user-provided matrices.
pub const UNITARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    SizeMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("coupling parameter is not finite")]
    NonFinite,
    #[error("delta-prime strength must be nonzero")]
    ZeroDeltaPrime,
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("A B* != B A* (defect {0:e})")]
    NotHermitianPair(f64),
    #[error("A A* + B B* is singular")]
    DegenerateAB,
    #[error("1 + U restricted to ran P is singular; an eigenvalue -1 leaked into ran P")]
    LeakingMinusOne,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalarConditionError {
    #[error(
        "vertex couplings have two distinct eigenvalues besides -1: \
         {first} at vertex `{first_vertex}` and {second} at vertex `{second_vertex}`"
    )]
    Distinct {
        first_vertex: String,
        first: C64,
        second_vertex: String,
        second: C64,
    },
    #[error("every vertex unitary is -1; no eigenvalue other than -1 exists")]
    OnlyMinusOne,
    #[error("vertex `{vertex}`: {source}")]
    Coupling {
        vertex: String,
        source: CouplingError,
    },
}

/// A coupling strength either given directly or as a multiple of the degree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength {
    Fixed(f64),
    PerDegree(f64),
}

impl Strength {
    pub fn at(&self, deg: usize) -> f64 {
        match *self {
            Strength::Fixed(a) => a,
            Strength::PerDegree(a) => a * deg as f64,
        }
    }
}

/// Boundary triple the unitary refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    /// `G = (f(0), f(l))`, `G' = (f'(0), -f'(l))`.
    Dirichlet,
    /// `G = (-f'(0), f'(l))`, `G' = (f(0), f(l))`.
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSpec {
    /// Continuity plus `sum_e f'_e(v) = alpha(v) f(v)`.
    Delta {
        alpha: Strength,
    },
    /// `sum_e f_e(v) = 0` plus `f_e - f_b = (beta(v)/deg)(f'_e - f'_b)`.
    DeltaPrime {
        beta: Strength,
    },
    /// Continuity of derivatives plus `sum_e f_e(v) = alpha(v) f'(v)`, in the
    /// Neumann frame.
    DeltaPrimeS {
        alpha: Strength,
    },
    /// `A G = B G'`.
    CustomAB {
        a: CMatrix,
        b: CMatrix,
    },
    CustomU {
        u: CMatrix,
    },
}

impl CouplingSpec {
    pub fn frame(&self) -> Frame {
        match self {
            CouplingSpec::DeltaPrimeS { .. } => Frame::Neumann,
            _ => Frame::Dirichlet,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CouplingSpec::Delta { .. } => "delta",
            CouplingSpec::DeltaPrime { .. } => "delta_prime",
            CouplingSpec::DeltaPrimeS { .. } => "delta_prime_s",
            CouplingSpec::CustomAB { .. } => "custom_AB",
            CouplingSpec::CustomU { .. } => "custom_U",
        }
    }
}

fn ones(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| ONE)
}

fn check_size(m: &CMatrix, d: usize) -> Result<(), CouplingError> {
    if m.rows() != d || m.cols() != d {
        return Err(CouplingError::SizeMismatch {
            expected: d,
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    Ok(())
}

fn check_finite(m: &CMatrix) -> Result<(), CouplingError> {
    if m.max_abs().is_finite() {
        Ok(())
    } else {
        Err(CouplingError::NonFinite)
    }
}

/// Unitary matrix `U_v` for a vertex of degree `deg`.
pub fn to_unitary(spec: &CouplingSpec, deg: usize) -> Result<CMatrix, CouplingError> {
    let d = deg as f64;
    let id = CMatrix::identity(deg);
    let u = match spec {
        CouplingSpec::Delta { alpha } => {
            let a = alpha.at(deg);
            if !a.is_finite() {
                return Err(CouplingError::NonFinite);
            }
            ones(deg).scale(C64::new(2.0, 0.0) / C64::new(d, a)) - id
        }
        CouplingSpec::DeltaPrime { beta } => {
            let b = beta.at(deg);
            if !b.is_finite() {
                return Err(CouplingError::NonFinite);
            }
            if b == 0.0 {
                return Err(CouplingError::ZeroDeltaPrime);
            }
            // -1 on the constants, theta on their complement
            let theta = -C64::new(d, b) / C64::new(d, -b);
            let avg = ones(deg).scale(C64::new(1.0 / d, 0.0));
            (id - avg.clone()).scale(theta) - avg
        }
        CouplingSpec::DeltaPrimeS { alpha } => {
            let a = alpha.at(deg);
            if !a.is_finite() {
                return Err(CouplingError::NonFinite);
            }
            ones(deg).scale(C64::new(2.0, 0.0) / C64::new(d, -a)) - id
        }
        CouplingSpec::CustomAB { a, b } => {
            check_size(a, deg)?;
            check_size(b, deg)?;
            check_finite(a)?;
            check_finite(b)?;
            ab_to_unitary(a, b)?
        }
        CouplingSpec::CustomU { u } => {
            check_size(u, deg)?;
            check_finite(u)?;
            let defect = u.unitarity_defect();
            if defect > UNITARY_TOL {
                return Err(CouplingError::NotUnitary(defect));
            }
            u.clone()
        }
    };
    let defect = u.unitarity_defect();
    if defect > 1e-10 {
        return Err(CouplingError::NotUnitary(defect));
    }
    Ok(u)
}

/// `U = -(A - iB)^{-1}(A + iB)`.
pub fn ab_to_unitary(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, CouplingError> {
    let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
    let pair = &(a * &b.adjoint()) - &(b * &a.adjoint());
    let defect = pair.max_abs() / (scale * scale);
    if defect > 1e-10 {
        return Err(CouplingError::NotHermitianPair(defect));
    }
    let gram = &(a * &a.adjoint()) + &(b * &b.adjoint());
    let (vals, _) = linalg::jacobi_hermitian(&gram)?;
    if vals.first().map_or(true, |&v| v <= 1e-12 * scale * scale) {
        return Err(CouplingError::DegenerateAB);
    }
    let minus = a.clone() - b.scale(I);
    let plus = a.clone() + b.scale(I);
    let u = minus
        .solve(&plus)
        .map_err(|_| CouplingError::DegenerateAB)?
        .scale(-ONE);
    Ok(u)
}

/// Eigenpair of a unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryEigenpair {
    pub value: C64,
    pub vector: Vec<C64>,
}

impl UnitaryEigenpair {
    pub fn is_minus_one(&self) -> bool {
        (self.value + ONE).norm() <= MINUS_ONE_TOL
    }
}

/// Eigen-decomposition of a unitary matrix through a Hermitian Cayley
/// transform `i(w + U)(w - U)^{-1}` with `w` on the unit circle away from the
/// spectrum.
pub fn unitary_eigen(u: &CMatrix) -> Result<Vec<UnitaryEigenpair>, CouplingError> {
    let n = u.rows();
    if !u.is_square() {
        return Err(LinalgError::NotSquare {
            rows: u.rows(),
            cols: u.cols(),
        }
        .into());
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let id = CMatrix::identity(n);
    let mut best: Option<(f64, C64)> = None;
    for k in 0..8 {
        let phi = 2.0 * PI * (k as f64 + 0.37) / 8.0;
        let w = C64::new(cos(phi), sin(phi));
        let s = linalg::singular_values(&(id.scale(w) - u.clone()))?;
        let gap = *s.last().unwrap();
        if best.map_or(true, |(g, _)| gap > g) {
            best = Some((gap, w));
        }
    }
    let (_, w) = best.unwrap();
    let inv = (id.scale(w) - u.clone()).inverse()?;
    let cayley = (&(id.scale(w) + u.clone()) * &inv).scale(I);
    let (_, vecs) = linalg::jacobi_hermitian(&cayley)?;
    let mut pairs = Vec::with_capacity(n);
    for j in 0..n {
        let v = vecs.column(j);
        let value = linalg::dot(&v, &u.mul_vec(&v));
        pairs.push(UnitaryEigenpair {
            value: value / value.norm(),
            vector: v,
        });
    }
    Ok(pairs)
}

/// Unitary together with the projector `P` onto `ker(1 + U)^perp`, an
/// orthonormal basis of `ran P`, a basis of `ker(1 + U)` and the Hermitian
/// matrix `C` written in the basis of `ran P`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCoupling {
    pub u: CMatrix,
    pub p: CMatrix,
    pub basis: CMatrix,
    pub complement: CMatrix,
    pub c: CMatrix,
}

impl NormalizedCoupling {
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// `C` as an operator on the full space, `Q C Q^*`.
    pub fn c_full(&self) -> CMatrix {
        &(&self.basis * &self.c) * &self.basis.adjoint()
    }
}

fn projector_basis(p: &CMatrix) -> Result<CMatrix, CouplingError> {
    let n = p.rows();
    let (vals, vecs) = linalg::jacobi_hermitian(p)?;
    let mut cols = Vec::new();
    for (j, &v) in vals.iter().enumerate() {
        if v > 0.5 {
            let mut x = vecs.column(j);
            linalg::normalize_phase(&mut x);
            cols.push(x);
        }
    }
    Ok(CMatrix::from_columns(n, &cols))
}

pub fn to_projector_form(u: &CMatrix) -> Result<NormalizedCoupling, CouplingError> {
    let n = u.rows();
    let pairs = unitary_eigen(u)?;
    let mut p_minus = CMatrix::zeros(n, n);
    for pair in pairs.iter().filter(|p| p.is_minus_one()) {
        let v = &pair.vector;
        p_minus = p_minus + CMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj());
    }
    let p = (CMatrix::identity(n) - p_minus.clone()).hermitian_part();
    let basis = projector_basis(&p)?;
    let complement = projector_basis(&p_minus.hermitian_part())?;
    let r = basis.cols();
    let c = if r == 0 {
        CMatrix::zeros(0, 0)
    } else {
        let ur = &(&basis.adjoint() * u) * &basis;
        let id = CMatrix::identity(r);
        let inv = (id.clone() + ur.clone())
            .inverse()
            .map_err(|_| CouplingError::LeakingMinusOne)?;
        let c = (&(id - ur) * &inv).scale(-I);
        if c.hermitian_defect() > 1e-8 * (1.0 + c.max_abs()) {
            return Err(CouplingError::LeakingMinusOne);
        }
        c.hermitian_part()
    };
    Ok(NormalizedCoupling {
        u: u.clone(),
        p,
        basis,
        complement,
        c,
    })
}

/// Columns spanning `{(G, G') : (1 - U)G = i(1 + U)G'}` as a `2n x n` matrix.
pub fn relation_from_unitary(u: &CMatrix) -> CMatrix {
    let id = CMatrix::identity(u.rows());
    let top = id.clone() + u.clone();
    let bottom = (id - u.clone()).scale(-I);
    top.vstack(&bottom).expect("square blocks")
}

/// Columns spanning `{(G, G') : A G = B G'}`.
pub fn relation_from_ab(a: &CMatrix, b: &CMatrix) -> CMatrix {
    b.adjoint().vstack(&a.adjoint()).expect("square blocks")
}

/// Columns spanning `{(G, G') : (1 - P)G = 0, P G' = C P G}`.
pub fn relation_from_projector(nc: &NormalizedCoupling) -> CMatrix {
    let n = nc.u.rows();
    let r = nc.rank();
    let k = nc.complement.cols();
    let mut out = CMatrix::zeros(2 * n, r + k);
    out.set_block(0, 0, &nc.basis);
    out.set_block(n, 0, &(&nc.basis * &nc.c));
    out.set_block(n, r, &nc.complement);
    out
}

/// Largest principal-angle sine between the column spaces of two relation
/// matrices, measured as the smallest singular value gap of `[R1 R2]`.
pub fn relation_distance(r1: &CMatrix, r2: &CMatrix) -> Result<f64, CouplingError> {
    let q1 = orthonormalize(r1)?;
    let q2 = orthonormalize(r2)?;
    if q1.cols() != q2.cols() {
        return Ok(f64::INFINITY);
    }
    // || (1 - Q1 Q1^*) Q2 ||
    let proj = &q1 * &(&q1.adjoint() * &q2);
    Ok((q2 - proj).max_abs())
}

fn orthonormalize(a: &CMatrix) -> Result<CMatrix, CouplingError> {
    let gram = &a.adjoint() * a;
    let (vals, vecs) = linalg::jacobi_hermitian(&gram)?;
    let top = vals.last().copied().unwrap_or(0.0);
    let mut cols = Vec::new();
    for (j, &v) in vals.iter().enumerate() {
        if v > 1e-20 * top.max(f64::MIN_POSITIVE) && v > 0.0 {
            let y = a.mul_vec(&vecs.column(j));
            let s = 1.0 / sqrt(v);
            cols.push(y.iter().map(|x| x * s).collect());
        }
    }
    Ok(CMatrix::from_columns(a.rows(), &cols))
}

/// Phases `e^{i beta_{v,e}}` over the deck block of vertex `v`.
pub fn vertex_phases(g: &MetricGraph, v: usize) -> Vec<C64> {
    let deck = g.deck();
    deck.block(v)
        .map(|i| {
            let b = g.slot_phase(&deck.slot(i));
            C64::new(cos(b), sin(b))
        })
        .collect()
}

/// `Phi^* U_v Phi` with `Phi = diag(e^{i beta_{v,e}})`: the unitary acting on
/// the plain edge traces once magnetic phases are absorbed.
pub fn effective_unitary(g: &MetricGraph, v: usize) -> CMatrix {
    let phases = vertex_phases(g, v);
    let u = g.unitary(v);
    CMatrix::from_fn(u.rows(), u.cols(), |i, j| {
        phases[i].conj() * u[(i, j)] * phases[j]
    })
}

/// Result of the scalar-spectrum test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCondition {
    pub theta: C64,
    /// `-i(1 - theta)/(1 + theta)`
    pub alpha: f64,
}

/// Checks that all vertex unitaries share a single eigenvalue `theta` besides
/// `-1`.
pub fn check_scalar_condition(g: &MetricGraph) -> Result<ScalarCondition, ScalarConditionError> {
    let mut found: Option<(usize, C64)> = None;
    for (v, vert) in g.vertices().iter().enumerate() {
        let pairs =
            unitary_eigen(g.unitary(v)).map_err(|source| ScalarConditionError::Coupling {
                vertex: vert.id.clone(),
                source,
            })?;
        for pair in pairs.iter().filter(|p| !p.is_minus_one()) {
            match found {
                None => found = Some((v, pair.value)),
                Some((w, theta)) => {
                    if (pair.value - theta).norm() > 1e-10 {
                        return Err(ScalarConditionError::Distinct {
                            first_vertex: g.vertices()[w].id.clone(),
                            first: theta,
                            second_vertex: vert.id.clone(),
                            second: pair.value,
                        });
                    }
                }
            }
        }
    }
    let (_, theta) = found.ok_or(ScalarConditionError::OnlyMinusOne)?;
    let alpha = (-I * (ONE - theta) / (ONE + theta)).re;
    Ok(ScalarCondition { theta, alpha })
}

/// Inverse of `theta -> alpha`: `theta = (1 - i alpha)/(1 + i alpha)`.
pub fn theta_from_alpha(alpha: f64) -> C64 {
    C64::new(1.0, -alpha) / C64::new(1.0, alpha)
}
