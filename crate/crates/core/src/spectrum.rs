//! Spectral result lists shared by the reduction and the secular solver.

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Reduced,
    Oracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Reduced => "reduced",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEntry {
    pub z: f64,
    pub multiplicity: usize,
    /// Discrete eigenvalue the entry comes from (reduced entries only).
    pub lambda: Option<f64>,
    pub method: Method,
    /// `|eta(z) - lambda|` for reduced entries, `sigma_min / sigma_max` of
    /// the secular matrix for oracle entries.
    pub residual: f64,
}

/// Discrete eigenvalue whose preimage would sit on the boundary of the gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCase {
    pub lambda: f64,
    pub multiplicity: usize,
    pub endpoint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    /// Sorted by `z`.
    pub entries: Vec<SpectralEntry>,
    pub interval: (f64, f64),
    pub boundary: Vec<BoundaryCase>,
    pub warnings: Vec<String>,
}

impl SpectralResult {
    pub fn new(interval: (f64, f64)) -> Self {
        Self {
            entries: Vec::new(),
            interval,
            boundary: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| a.z.total_cmp(&b.z));
    }

    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// Entries inside `[a, b]`.
    pub fn restricted(&self, a: f64, b: f64) -> SpectralResult {
        SpectralResult {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|e| e.z >= a && e.z <= b)
                .collect(),
            interval: (a, b),
            boundary: self.boundary.clone(),
            warnings: self.warnings.clone(),
        }
    }
}
