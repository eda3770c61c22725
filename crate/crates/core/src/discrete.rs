//! Discrete operators: the weighted adjacency operator on `l2(G)`, its
//! magnetic version, the deck shift `D`, its compression `D_P` and the map
//! `Theta`.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

use crate::coupling::{self, CouplingError, NormalizedCoupling};
use crate::graph::MetricGraph;
use crate::linalg::{self, CMatrix, LinalgError, C64, ONE};
use crate::math::{cos, sin, sqrt};

/// Eigenvalues closer than this are reported as one multiple eigenvalue.
pub const GROUPING_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscreteError {
    #[error("operator is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("vertex `{0}` does not carry a delta-type projector")]
    NotDeltaType(String),
    #[error("vertex `{vertex}`: {source}")]
    Coupling {
        vertex: String,
        source: CouplingError,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Weighted adjacency operator in the vertex basis, with optional magnetic
/// phases `beta_e`.
fn adjacency_with(g: &MetricGraph, betas: Option<&[f64]>) -> CMatrix {
    let n = g.vertices().len();
    let mut m = CMatrix::zeros(n, n);
    for (k, e) in g.edges().iter().enumerate() {
        let b = betas.map_or(0.0, |bs| bs[k]);
        let forward = C64::new(cos(b), -sin(b));
        // row tail picks up f(head) e^{-i beta}, row head picks up f(tail) e^{i beta}
        m[(e.tail, e.head)] += forward;
        m[(e.head, e.tail)] += forward.conj();
    }
    for v in 0..n {
        let d = g.degree(v) as f64;
        for w in 0..n {
            m[(v, w)] /= d;
        }
    }
    m
}

/// `(Delta f)(v) = (1/deg v)(sum_{tail e = v} f(head e) + sum_{head e = v} f(tail e))`.
pub fn adjacency_operator(g: &MetricGraph) -> CMatrix {
    adjacency_with(g, None)
}

/// Magnetic adjacency `Delta_beta`; phases are indexed like `g.edges()`.
pub fn magnetic_adjacency(g: &MetricGraph, betas: &[f64]) -> CMatrix {
    assert_eq!(betas.len(), g.edges().len(), "one phase per edge");
    adjacency_with(g, Some(betas))
}

/// `W^{1/2} A W^{-1/2}` with `W = diag(deg v)`; Hermitian for the adjacency
/// operators above.
pub fn symmetrize(g: &MetricGraph, a: &CMatrix) -> CMatrix {
    let w: Vec<f64> = (0..g.vertices().len())
        .map(|v| sqrt(g.degree(v) as f64))
        .collect();
    CMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] * (w[i] / w[j]))
}

/// Inner product `sum_v deg v conj(f(v)) h(v)` of `l2(G)`.
pub fn weighted_inner(g: &MetricGraph, f: &[C64], h: &[C64]) -> C64 {
    f.iter()
        .zip(h)
        .enumerate()
        .map(|(v, (a, b))| a.conj() * b * g.degree(v) as f64)
        .sum()
}

/// Permutation matrix of the partner involution on deck slots.
pub fn deck_shift(g: &MetricGraph) -> CMatrix {
    let deck = g.deck();
    let n = deck.len();
    let mut d = CMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, deck.partner(i))] = ONE;
    }
    d
}

/// Block-diagonal projector `P = (+)_v P_v` over the deck space, built from
/// the vertex unitaries with magnetic phases absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProjector {
    pub couplings: Vec<NormalizedCoupling>,
    /// `P` on the whole deck space.
    pub p: CMatrix,
    /// Orthonormal basis of `ran P`, one column block per vertex.
    pub basis: CMatrix,
    /// `C` in the basis of `ran P`.
    pub c: CMatrix,
    /// Column range of each vertex inside `basis`.
    pub blocks: Vec<Range<usize>>,
}

impl BlockProjector {
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }
}

pub fn block_projector(g: &MetricGraph) -> Result<BlockProjector, DiscreteError> {
    let deck = g.deck();
    let n = deck.len();
    let mut couplings = Vec::with_capacity(g.vertices().len());
    for (v, vert) in g.vertices().iter().enumerate() {
        let u = coupling::effective_unitary(g, v);
        let nc = coupling::to_projector_form(&u).map_err(|source| DiscreteError::Coupling {
            vertex: vert.id.clone(),
            source,
        })?;
        couplings.push(nc);
    }
    let r: usize = couplings.iter().map(NormalizedCoupling::rank).sum();
    let mut p = CMatrix::zeros(n, n);
    let mut basis = CMatrix::zeros(n, r);
    let mut c = CMatrix::zeros(r, r);
    let mut blocks = Vec::with_capacity(couplings.len());
    let mut col = 0;
    for (v, nc) in couplings.iter().enumerate() {
        let rows = deck.block(v);
        p.set_block(rows.start, rows.start, &nc.p);
        basis.set_block(rows.start, col, &nc.basis);
        c.set_block(col, col, &nc.c);
        blocks.push(col..col + nc.rank());
        col += nc.rank();
    }
    Ok(BlockProjector {
        couplings,
        p,
        basis,
        c,
        blocks,
    })
}

/// `D_P = P D P^*` written in the basis of `ran P`. An empty matrix means
/// `ran P = {0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedShift {
    pub matrix: CMatrix,
    pub is_empty: bool,
}

pub fn projected_shift(g: &MetricGraph, bp: &BlockProjector) -> ProjectedShift {
    let d = deck_shift(g);
    let q = &bp.basis;
    let matrix = (&(&q.adjoint() * &d) * q).hermitian_part();
    let is_empty = matrix.rows() == 0;
    ProjectedShift { matrix, is_empty }
}

/// `Theta: l2(G) -> ran P`, `(Theta xi)_{v,e} = e^{-i beta_{v,e}} xi(v)`, as a
/// deck-by-vertex matrix. Requires every vertex projector to be the rank-one
/// projector onto its phased constant vector.
pub fn theta_map(g: &MetricGraph) -> Result<CMatrix, DiscreteError> {
    let bp = block_projector(g)?;
    let deck = g.deck();
    let mut theta = CMatrix::zeros(deck.len(), g.vertices().len());
    for (v, vert) in g.vertices().iter().enumerate() {
        let phases = coupling::vertex_phases(g, v);
        let d = phases.len() as f64;
        let expected = CMatrix::from_fn(phases.len(), phases.len(), |i, j| {
            phases[i].conj() * phases[j] / d
        });
        if (bp.couplings[v].p.clone() - expected).max_abs() > 1e-10 {
            return Err(DiscreteError::NotDeltaType(vert.id.clone()));
        }
        for (k, i) in deck.block(v).enumerate() {
            theta[(i, v)] = phases[k].conj();
        }
    }
    Ok(theta)
}

/// Group of numerically equal eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenGroup {
    pub value: f64,
    pub multiplicity: usize,
    /// Column range in `EigenDecomposition::vectors`.
    pub columns: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: CMatrix,
    pub groups: Vec<EigenGroup>,
}

impl EigenDecomposition {
    /// `sum v v^*` over eigenvectors whose eigenvalue satisfies `select`.
    pub fn spectral_projector(&self, select: impl Fn(f64) -> bool) -> CMatrix {
        let n = self.vectors.rows();
        let mut e = CMatrix::zeros(n, n);
        for (j, &lam) in self.values.iter().enumerate() {
            if select(lam) {
                let v = self.vectors.column(j);
                e = e + CMatrix::from_fn(n, n, |a, b| v[a] * v[b].conj());
            }
        }
        e
    }

    pub fn group_projector(&self, group: &EigenGroup) -> CMatrix {
        let n = self.vectors.rows();
        let mut e = CMatrix::zeros(n, n);
        for j in group.columns.clone() {
            let v = self.vectors.column(j);
            e = e + CMatrix::from_fn(n, n, |a, b| v[a] * v[b].conj());
        }
        e
    }
}

/// Full eigen-decomposition of a Hermitian matrix with multiplicity grouping.
pub fn hermitian_eigs(m: &CMatrix) -> Result<EigenDecomposition, DiscreteError> {
    let defect = m.hermitian_defect();
    if defect > 1e-10 * (1.0 + m.max_abs()) {
        return Err(DiscreteError::NotHermitian(defect));
    }
    let (values, vectors) = linalg::jacobi_hermitian(m)?;
    let mut groups: Vec<EigenGroup> = Vec::new();
    for (j, &lam) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if lam - values[g.columns.end - 1] <= GROUPING_TOL => {
                g.columns.end = j + 1;
                g.multiplicity += 1;
            }
            _ => groups.push(EigenGroup {
                value: lam,
                multiplicity: 1,
                columns: j..j + 1,
            }),
        }
    }
    for g in &mut groups {
        g.value = values[g.columns.clone()].iter().sum::<f64>() / g.multiplicity as f64;
    }
    Ok(EigenDecomposition {
        values,
        vectors,
        groups,
    })
}

/// Spectrum of the (magnetic) adjacency operator of `g`, using the phases
/// stored on its edges.
pub fn adjacency_spectrum(g: &MetricGraph) -> Result<EigenDecomposition, DiscreteError> {
    let a = magnetic_adjacency(g, &g.phases());
    hermitian_eigs(&symmetrize(g, &a))
}
