//! Graph description documents in TOML or JSON.
//!
//! ```toml
//! length = 1.0
//! potential = { kind = "cosine", coefficients = [0.0, 1.0] }
//!
//! [[vertices]]
//! id = "a"
//! coupling = { type = "delta", parameters = { alpha = 0.7, per_degree = true } }
//!
//! [[edges]]
//! id = "ab"
//! tail = "a"
//! head = "b"
//! beta = 0.0
//! ```
//!
//! Potential kinds: `zero`, `polynomial` (`coefficients`, constant first),
//! `cosine` (`coefficients` of `cos(2 pi k x / period)`, optional `period`,
//! default the edge length) and `table` (`samples = [[x, v], ...]`).
//!
//! Coupling types: `delta` (`alpha`), `delta_prime` (`beta`), `delta_prime_s`
//! (`alpha`), each with optional `per_degree`; `custom_AB` (`a`, `b`) and
//! `custom_U` (`u`). Matrix entries are numbers or `[re, im]` pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use qgraph_core::coupling::{CouplingSpec, Strength};
use qgraph_core::graph::{EdgeDesc, GraphDescription, GraphError, MetricGraph, VertexDesc};
use qgraph_core::linalg::{CMatrix, C64};
use qgraph_core::potential::{Potential, PotentialError};

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {source}")]
    Graph { path: String, source: GraphError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub length: f64,
    #[serde(default)]
    pub potential: PotentialDoc,
    pub vertices: Vec<VertexDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialDoc {
    Zero,
    Polynomial {
        coefficients: Vec<f64>,
    },
    Cosine {
        coefficients: Vec<f64>,
        #[serde(default)]
        period: Option<f64>,
    },
    Table {
        samples: Vec<[f64; 2]>,
    },
}

impl Default for PotentialDoc {
    fn default() -> Self {
        PotentialDoc::Zero
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexDoc {
    pub id: String,
    pub coupling: CouplingDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "parameters", deny_unknown_fields)]
pub enum CouplingDoc {
    #[serde(rename = "delta")]
    Delta(StrengthDoc<AlphaKey>),
    #[serde(rename = "delta_prime")]
    DeltaPrime(StrengthDoc<BetaKey>),
    #[serde(rename = "delta_prime_s")]
    DeltaPrimeS(StrengthDoc<AlphaKey>),
    #[serde(rename = "custom_AB")]
    CustomAB {
        a: Vec<Vec<Entry>>,
        b: Vec<Vec<Entry>>,
    },
    #[serde(rename = "custom_U")]
    CustomU { u: Vec<Vec<Entry>> },
}

// the strength key is `alpha` or `beta` depending on the coupling
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaKey {
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaKey {
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthDoc<K> {
    #[serde(flatten)]
    pub value: K,
    #[serde(default)]
    pub per_degree: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(&self) -> C64 {
        match *self {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }

    fn from_value(z: C64) -> Self {
        if z.im == 0.0 {
            Entry::Real(z.re)
        } else {
            Entry::Complex([z.re, z.im])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub id: String,
    pub tail: String,
    pub head: String,
    #[serde(default)]
    pub beta: f64,
}

fn strength(value: f64, per_degree: bool) -> Strength {
    if per_degree {
        Strength::PerDegree(value)
    } else {
        Strength::Fixed(value)
    }
}

fn matrix(rows: &[Vec<Entry>]) -> Result<CMatrix, String> {
    let values: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| r.iter().map(Entry::value).collect())
        .collect();
    CMatrix::from_rows(&values).map_err(|e| e.to_string())
}

fn matrix_doc(m: &CMatrix) -> Vec<Vec<Entry>> {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| Entry::from_value(m[(i, j)]))
                .collect()
        })
        .collect()
}

impl Document {
    pub fn to_description(&self) -> Result<GraphDescription, String> {
        let potential = match &self.potential {
            PotentialDoc::Zero => Ok(Potential::Zero),
            PotentialDoc::Polynomial { coefficients } => {
                Potential::polynomial(coefficients.clone())
            }
            PotentialDoc::Cosine {
                coefficients,
                period,
            } => Potential::cosine(coefficients.clone(), period.unwrap_or(self.length)),
            PotentialDoc::Table { samples } => {
                let s: Vec<(f64, f64)> = samples.iter().map(|p| (p[0], p[1])).collect();
                Potential::sampled(&s)
            }
        }
        .map_err(|e: PotentialError| format!("potential: {e}"))?;
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            let coupling = match &v.coupling {
                CouplingDoc::Delta(s) => CouplingSpec::Delta {
                    alpha: strength(s.value.alpha, s.per_degree),
                },
                CouplingDoc::DeltaPrime(s) => CouplingSpec::DeltaPrime {
                    beta: strength(s.value.beta, s.per_degree),
                },
                CouplingDoc::DeltaPrimeS(s) => CouplingSpec::DeltaPrimeS {
                    alpha: strength(s.value.alpha, s.per_degree),
                },
                CouplingDoc::CustomAB { a, b } => CouplingSpec::CustomAB {
                    a: matrix(a).map_err(|e| format!("vertex `{}`: matrix a: {e}", v.id))?,
                    b: matrix(b).map_err(|e| format!("vertex `{}`: matrix b: {e}", v.id))?,
                },
                CouplingDoc::CustomU { u } => CouplingSpec::CustomU {
                    u: matrix(u).map_err(|e| format!("vertex `{}`: matrix u: {e}", v.id))?,
                },
            };
            vertices.push(VertexDesc {
                id: v.id.clone(),
                coupling,
            });
        }
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeDesc {
                id: e.id.clone(),
                tail: e.tail.clone(),
                head: e.head.clone(),
                beta: e.beta,
            })
            .collect();
        Ok(GraphDescription {
            length: self.length,
            potential,
            vertices,
            edges,
        })
    }

    pub fn from_description(desc: &GraphDescription) -> Self {
        let potential = match &desc.potential {
            Potential::Zero => PotentialDoc::Zero,
            Potential::Polynomial(c) => PotentialDoc::Polynomial {
                coefficients: c.clone(),
            },
            Potential::Cosine {
                coefficients,
                period,
            } => PotentialDoc::Cosine {
                coefficients: coefficients.clone(),
                period: Some(*period),
            },
            Potential::Sampled(s) => PotentialDoc::Table {
                samples: s.samples().map(|(x, v)| [x, v]).collect(),
            },
        };
        let split = |s: &Strength| match *s {
            Strength::Fixed(x) => (x, false),
            Strength::PerDegree(x) => (x, true),
        };
        let vertices = desc
            .vertices
            .iter()
            .map(|v| {
                let coupling = match &v.coupling {
                    CouplingSpec::Delta { alpha } => {
                        let (alpha, per_degree) = split(alpha);
                        CouplingDoc::Delta(StrengthDoc {
                            value: AlphaKey { alpha },
                            per_degree,
                        })
                    }
                    CouplingSpec::DeltaPrime { beta } => {
                        let (beta, per_degree) = split(beta);
                        CouplingDoc::DeltaPrime(StrengthDoc {
                            value: BetaKey { beta },
                            per_degree,
                        })
                    }
                    CouplingSpec::DeltaPrimeS { alpha } => {
                        let (alpha, per_degree) = split(alpha);
                        CouplingDoc::DeltaPrimeS(StrengthDoc {
                            value: AlphaKey { alpha },
                            per_degree,
                        })
                    }
                    CouplingSpec::CustomAB { a, b } => CouplingDoc::CustomAB {
                        a: matrix_doc(a),
                        b: matrix_doc(b),
                    },
                    CouplingSpec::CustomU { u } => CouplingDoc::CustomU { u: matrix_doc(u) },
                };
                VertexDoc {
                    id: v.id.clone(),
                    coupling,
                }
            })
            .collect();
        let edges = desc
            .edges
            .iter()
            .map(|e| EdgeDoc {
                id: e.id.clone(),
                tail: e.tail.clone(),
                head: e.head.clone(),
                beta: e.beta,
            })
            .collect();
        Document {
            length: desc.length,
            potential,
            vertices,
            edges,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("documents always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    /// JSON for `.json` files, TOML otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

pub fn parse_document(text: &str, format: Format, origin: &str) -> Result<Document, DocumentError> {
    let parsed = match format {
        Format::Toml => toml::from_str::<Document>(text).map_err(|e| e.to_string()),
        Format::Json => serde_json::from_str::<Document>(text).map_err(|e| e.to_string()),
    };
    parsed.map_err(|message| DocumentError::Parse {
        path: origin.to_string(),
        message: message.trim_end().to_string(),
    })
}

/// Parses and validates a graph document.
pub fn parse_graph(text: &str, format: Format, origin: &str) -> Result<MetricGraph, DocumentError> {
    let doc = parse_document(text, format, origin)?;
    let desc = doc
        .to_description()
        .map_err(|message| DocumentError::Invalid {
            path: origin.to_string(),
            message,
        })?;
    MetricGraph::build(&desc).map_err(|source| DocumentError::Graph {
        path: origin.to_string(),
        source,
    })
}

/// Reads a graph file and returns the graph with the raw bytes for digests.
pub fn load_graph(path: &Path) -> Result<(MetricGraph, Vec<u8>), DocumentError> {
    let origin = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| DocumentError::Io {
        path: origin.clone(),
        source,
    })?;
    let text = String::from_utf8_lossy(&bytes);
    let g = parse_graph(&text, Format::from_path(path), &origin)?;
    Ok((g, bytes))
}
