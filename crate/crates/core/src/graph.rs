//! Finite equilateral metric graphs and their half-edge ("deck") indexing.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

use crate::coupling::{self, CouplingError, CouplingSpec};
use crate::linalg::CMatrix;
use crate::potential::{Potential, PotentialError};

pub const DEFAULT_MAX_DEGREE: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph has no vertices")]
    Empty,
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` refers to unknown vertex `{vertex}`")]
    UnknownVertex { edge: String, vertex: String },
    #[error("vertex `{0}` is isolated")]
    IsolatedVertex(String),
    #[error("vertex `{vertex}` has degree {degree}, above the bound {max}")]
    DegreeTooLarge {
        vertex: String,
        degree: usize,
        max: usize,
    },
    #[error("edge length must be positive and finite, got {0}")]
    NonPositiveLength(f64),
    #[error("magnetic phase of edge `{0}` is not finite")]
    BadPhase(String),
    #[error("malformed potential: {0}")]
    Potential(#[from] PotentialError),
    #[error("vertex `{vertex}`: {source}")]
    Coupling {
        vertex: String,
        source: CouplingError,
    },
}

/// End of an edge: `Initial` is `x = 0` (the tail), `Terminal` is `x = l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum End {
    Initial,
    Terminal,
}

impl End {
    pub fn other(self) -> End {
        match self {
            End::Initial => End::Terminal,
            End::Terminal => End::Initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexDesc {
    pub id: String,
    pub coupling: CouplingSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDesc {
    pub id: String,
    pub tail: String,
    pub head: String,
    /// Magnetic phase `beta_e` in radians.
    pub beta: f64,
}

/// Plain description of a graph, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphDescription {
    pub length: f64,
    pub potential: Potential,
    pub vertices: Vec<VertexDesc>,
    pub edges: Vec<EdgeDesc>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphConfig {
    pub max_degree: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            max_degree: DEFAULT_MAX_DEGREE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub coupling: CouplingSpec,
    pub degree: usize,
    pub indegree: usize,
    pub outdegree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub beta: f64,
}

impl Edge {
    pub fn vertex_at(&self, end: End) -> usize {
        match end {
            End::Initial => self.tail,
            End::Terminal => self.head,
        }
    }

    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

/// Validated metric graph. Vertices and edges are sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    length: f64,
    potential: Potential,
    unitaries: Vec<CMatrix>,
    deck: DeckIndex,
}

impl MetricGraph {
    pub fn build(desc: &GraphDescription) -> Result<Self, GraphError> {
        Self::build_with(desc, &GraphConfig::default())
    }

    pub fn build_with(desc: &GraphDescription, config: &GraphConfig) -> Result<Self, GraphError> {
        if !(desc.length > 0.0) || !desc.length.is_finite() {
            return Err(GraphError::NonPositiveLength(desc.length));
        }
        if desc.vertices.is_empty() {
            return Err(GraphError::Empty);
        }
        desc.potential.validate_on(desc.length)?;

        let mut vdescs: Vec<&VertexDesc> = desc.vertices.iter().collect();
        vdescs.sort_by(|a, b| a.id.cmp(&b.id));
        for w in vdescs.windows(2) {
            if w[0].id == w[1].id {
                return Err(GraphError::DuplicateVertex(w[0].id.clone()));
            }
        }
        let index: BTreeMap<&str, usize> = vdescs
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), i))
            .collect();

        let mut edescs: Vec<&EdgeDesc> = desc.edges.iter().collect();
        edescs.sort_by(|a, b| a.id.cmp(&b.id));
        for w in edescs.windows(2) {
            if w[0].id == w[1].id {
                return Err(GraphError::DuplicateEdge(w[0].id.clone()));
            }
        }
        let mut edges = Vec::with_capacity(edescs.len());
        for e in &edescs {
            let lookup = |name: &String| {
                index
                    .get(name.as_str())
                    .copied()
                    .ok_or_else(|| GraphError::UnknownVertex {
                        edge: e.id.clone(),
                        vertex: name.clone(),
                    })
            };
            if !e.beta.is_finite() {
                return Err(GraphError::BadPhase(e.id.clone()));
            }
            edges.push(Edge {
                id: e.id.clone(),
                tail: lookup(&e.tail)?,
                head: lookup(&e.head)?,
                beta: e.beta,
            });
        }

        let mut vertices: Vec<Vertex> = vdescs
            .iter()
            .map(|v| Vertex {
                id: v.id.clone(),
                coupling: v.coupling.clone(),
                degree: 0,
                indegree: 0,
                outdegree: 0,
            })
            .collect();
        for e in &edges {
            vertices[e.tail].outdegree += 1;
            vertices[e.head].indegree += 1;
        }
        let mut unitaries = Vec::with_capacity(vertices.len());
        for v in &mut vertices {
            v.degree = v.indegree + v.outdegree;
            if v.degree == 0 {
                return Err(GraphError::IsolatedVertex(v.id.clone()));
            }
            if v.degree > config.max_degree {
                return Err(GraphError::DegreeTooLarge {
                    vertex: v.id.clone(),
                    degree: v.degree,
                    max: config.max_degree,
                });
            }
            let u = coupling::to_unitary(&v.coupling, v.degree).map_err(|source| {
                GraphError::Coupling {
                    vertex: v.id.clone(),
                    source,
                }
            })?;
            unitaries.push(u);
        }
        let deck = DeckIndex::new(&vertices, &edges);
        Ok(Self {
            vertices,
            edges,
            length: desc.length,
            potential: desc.potential.clone(),
            unitaries,
            deck,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn degree(&self, v: usize) -> usize {
        self.vertices[v].degree
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices
            .binary_search_by(|v| v.id.as_str().cmp(id))
            .ok()
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.binary_search_by(|e| e.id.as_str().cmp(id)).ok()
    }

    pub fn deck(&self) -> &DeckIndex {
        &self.deck
    }

    /// Vertex unitary `U_v` of the coupling, without magnetic phases.
    pub fn unitary(&self, v: usize) -> &CMatrix {
        &self.unitaries[v]
    }

    pub fn has_magnetic_phases(&self) -> bool {
        self.edges.iter().any(|e| e.beta != 0.0)
    }

    pub fn phases(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.beta).collect()
    }

    /// Same graph with the magnetic phases replaced.
    pub fn with_phases(&self, betas: &[f64]) -> Self {
        assert_eq!(betas.len(), self.edges.len());
        let mut g = self.clone();
        for (e, &b) in g.edges.iter_mut().zip(betas) {
            e.beta = b;
        }
        g
    }

    /// Phase `beta_{v,e}` carried by a deck slot: 0 at the tail, `beta_e` at
    /// the head.
    pub fn slot_phase(&self, slot: &Slot) -> f64 {
        match slot.end {
            End::Initial => 0.0,
            End::Terminal => self.edges[slot.edge].beta,
        }
    }

    /// Reconstructs a description that rebuilds to the same graph.
    pub fn to_description(&self) -> GraphDescription {
        GraphDescription {
            length: self.length,
            potential: self.potential.clone(),
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexDesc {
                    id: v.id.clone(),
                    coupling: v.coupling.clone(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDesc {
                    id: e.id.clone(),
                    tail: self.vertices[e.tail].id.clone(),
                    head: self.vertices[e.head].id.clone(),
                    beta: e.beta,
                })
                .collect(),
        }
    }
}

/// A half-edge slot `(v, e, end)` of the deck space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub vertex: usize,
    pub edge: usize,
    pub end: End,
}

/// Indexing of the deck space `G = (+)_v C^{deg v}` by half-edge slots,
/// ordered by (vertex, edge, end) with the initial end first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeckIndex {
    slots: Vec<Slot>,
    partner: Vec<usize>,
    blocks: Vec<Range<usize>>,
}

impl DeckIndex {
    fn new(vertices: &[Vertex], edges: &[Edge]) -> Self {
        let mut slots = Vec::with_capacity(2 * edges.len());
        for (i, e) in edges.iter().enumerate() {
            slots.push(Slot {
                vertex: e.tail,
                edge: i,
                end: End::Initial,
            });
            slots.push(Slot {
                vertex: e.head,
                edge: i,
                end: End::Terminal,
            });
        }
        slots.sort();
        let position: BTreeMap<Slot, usize> =
            slots.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let partner = slots
            .iter()
            .map(|s| {
                let e = &edges[s.edge];
                let other = s.end.other();
                position[&Slot {
                    vertex: e.vertex_at(other),
                    edge: s.edge,
                    end: other,
                }]
            })
            .collect();
        let mut blocks = Vec::with_capacity(vertices.len());
        let mut start = 0;
        for v in 0..vertices.len() {
            let len = slots[start..].iter().take_while(|s| s.vertex == v).count();
            blocks.push(start..start + len);
            start += len;
        }
        Self {
            slots,
            partner,
            blocks,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn slot(&self, i: usize) -> Slot {
        self.slots[i]
    }

    /// Index of the slot at the other end of the same edge.
    pub fn partner(&self, i: usize) -> usize {
        self.partner[i]
    }

    /// Contiguous range of slot indices belonging to vertex `v`.
    pub fn block(&self, v: usize) -> Range<usize> {
        self.blocks[v].clone()
    }

    pub fn position(&self, slot: &Slot) -> Option<usize> {
        self.slots.binary_search(slot).ok()
    }
}

/// Same as [`MetricGraph::deck`], as a free function.
pub fn deck_index(g: &MetricGraph) -> DeckIndex {
    g.deck().clone()
}
