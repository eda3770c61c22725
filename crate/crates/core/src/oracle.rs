//! Direct eigenvalue search through the secular matrix.
//!
//! On every edge `f_e = a_e c(x; z) + b_e s(x; z)`; each deck slot contributes
//! one row `(1 - U_v) G - i (1 + U_v) G' = 0` in the unknowns `(a_e, b_e)`.
//! Eigenvalues are the real points where this matrix loses rank. Nothing here
//! uses the reduction, so agreement with it is an independent check.

use alloc::format;
use alloc::vec::Vec;

use thiserror::Error;

use crate::coupling::Frame;
use crate::graph::{End, MetricGraph};
use crate::linalg::{self, CMatrix, LinalgError, C64, I, ONE, ZERO};
use crate::math::{cos, sin};
use crate::ode::{self, OdeError, TransferMatrix};
use crate::spectrum::{Method, SpectralEntry, SpectralResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("interval ({0}, {1}) is empty or not finite")]
    BadInterval(f64, f64),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub grid_points: usize,
    /// Rank drop when `sigma_min < rank_tol * sigma_max`.
    pub rank_tol: f64,
    /// Multiplicity counts singular values below `multiplicity_tol * sigma_max`.
    pub multiplicity_tol: f64,
    pub merge_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            grid_points: 2048,
            rank_tol: 1e-8,
            multiplicity_tol: 1e-6,
            merge_tol: 1e-9,
        }
    }
}

// boundary traces of one slot as coefficients of (a_e, b_e)
fn slot_traces(frame: Frame, end: End, t: &TransferMatrix) -> ([C64; 2], [C64; 2]) {
    match (frame, end) {
        (Frame::Dirichlet, End::Initial) => ([ONE, ZERO], [ZERO, ONE]),
        (Frame::Dirichlet, End::Terminal) => ([t.c, t.s], [-t.cp, -t.sp]),
        (Frame::Neumann, End::Initial) => ([ZERO, -ONE], [ONE, ZERO]),
        (Frame::Neumann, End::Terminal) => ([t.cp, t.sp], [t.c, t.s]),
    }
}

/// Secular matrix from a precomputed transfer matrix.
pub fn secular_matrix_from(g: &MetricGraph, t: &TransferMatrix) -> CMatrix {
    let deck = g.deck();
    let mut m = CMatrix::zeros(deck.len(), 2 * g.edges().len());
    for (v, vert) in g.vertices().iter().enumerate() {
        let block = deck.block(v);
        let u = g.unitary(v);
        let frame = vert.coupling.frame();
        for (r, row) in block.clone().enumerate() {
            for (k, slot_index) in block.clone().enumerate() {
                let slot = deck.slot(slot_index);
                let beta = match slot.end {
                    End::Initial => 0.0,
                    End::Terminal => g.edges()[slot.edge].beta,
                };
                let phase = C64::new(cos(beta), sin(beta));
                let delta = if r == k { ONE } else { ZERO };
                let left = (delta - u[(r, k)]) * phase;
                let right = -I * (delta + u[(r, k)]) * phase;
                let (gamma, gamma_p) = slot_traces(frame, slot.end, t);
                for j in 0..2 {
                    m[(row, 2 * slot.edge + j)] += left * gamma[j] + right * gamma_p[j];
                }
            }
        }
    }
    m
}

pub fn secular_matrix(g: &MetricGraph, z: C64) -> Result<CMatrix, OdeError> {
    let t = ode::transfer(g.potential(), g.length(), z, false)?;
    Ok(secular_matrix_from(g, &t))
}

/// `sigma_min / sigma_max` and the full list of singular values at real `z`.
fn rank_ratio(g: &MetricGraph, z: f64) -> Result<(f64, Vec<f64>), OracleError> {
    let m = secular_matrix(g, C64::new(z, 0.0))?;
    let s = linalg::singular_values(&m)?;
    let top = s[0].max(f64::MIN_POSITIVE);
    Ok((*s.last().unwrap() / top, s))
}

fn golden_section(g: &MetricGraph, mut a: f64, mut b: f64) -> Result<(f64, f64), OracleError> {
    let phi = 0.5 * (crate::math::sqrt(5.0) - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = rank_ratio(g, x1)?.0;
    let mut f2 = rank_ratio(g, x2)?.0;
    for _ in 0..200 {
        if b - a <= 1e-14 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = rank_ratio(g, x1)?.0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = rank_ratio(g, x2)?.0;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

#[derive(Debug, Clone, Copy)]
struct Root {
    z: f64,
    ratio: f64,
    multiplicity: usize,
}

// indices of local minima; the ends count only when `ends` allows it
fn local_minima(rs: &[f64], ends: (bool, bool)) -> Vec<usize> {
    let last = rs.len() - 1;
    (0..=last)
        .filter(|&i| {
            if (i == 0 && !ends.0) || (i == last && !ends.1) {
                return false;
            }
            let left = if i == 0 { f64::INFINITY } else { rs[i - 1] };
            let right = if i == last { f64::INFINITY } else { rs[i + 1] };
            rs[i] <= left && rs[i] < right
        })
        .collect()
}

fn ratios(
    g: &MetricGraph,
    a: f64,
    b: f64,
    points: usize,
) -> Result<(Vec<f64>, Vec<f64>), OracleError> {
    let zs: Vec<f64> = (0..=points)
        .map(|i| a + (b - a) * i as f64 / points as f64)
        .collect();
    let rs = zs
        .iter()
        .map(|&z| rank_ratio(g, z).map(|r| r.0))
        .collect::<Result<_, _>>()?;
    Ok((zs, rs))
}

const SUB_POINTS: usize = 64;

// every coarse minimum is scanned again on a finer grid across its bracket,
// so two roots sharing a coarse cell are both seen
fn scan(
    g: &MetricGraph,
    a: f64,
    b: f64,
    points: usize,
    opts: &OracleOptions,
) -> Result<Vec<Root>, OracleError> {
    let (zs, rs) = ratios(g, a, b, points)?;
    let mut roots = Vec::new();
    for i in local_minima(&rs, (true, true)) {
        let lo = zs[i.saturating_sub(1)];
        let hi = zs[(i + 1).min(points)];
        let (sz, sr) = ratios(g, lo, hi, SUB_POINTS)?;
        for j in local_minima(&sr, (lo == a, hi == b)) {
            let (z, ratio) =
                golden_section(g, sz[j.saturating_sub(1)], sz[(j + 1).min(SUB_POINTS)])?;
            if ratio < opts.rank_tol {
                let (_, s) = rank_ratio(g, z)?;
                let top = s[0];
                let multiplicity = s
                    .iter()
                    .filter(|&&x| x < opts.multiplicity_tol * top)
                    .count()
                    .max(1);
                roots.push(Root {
                    z,
                    ratio,
                    multiplicity,
                });
            }
        }
    }
    Ok(roots)
}

fn merge(mut roots: Vec<Root>, tol: f64) -> Vec<Root> {
    roots.sort_by(|x, y| x.z.total_cmp(&y.z));
    let mut out: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        match out.last_mut() {
            Some(prev) if (r.z - prev.z).abs() <= tol * (1.0 + r.z.abs()) => {
                if r.ratio < prev.ratio {
                    prev.z = r.z;
                    prev.ratio = r.ratio;
                }
                prev.multiplicity = prev.multiplicity.max(r.multiplicity);
            }
            _ => out.push(r),
        }
    }
    out
}

/// Eigenvalues of the graph in `[a, b]` located by scanning the rank ratio
/// of the secular matrix.
pub fn oracle_spectrum(
    g: &MetricGraph,
    interval: (f64, f64),
    opts: &OracleOptions,
) -> Result<SpectralResult, OracleError> {
    let (a, b) = interval;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(OracleError::BadInterval(a, b));
    }
    let n = opts.grid_points.max(16);
    let step = (b - a) / n as f64;
    let mut roots = merge(scan(g, a, b, n, opts)?, opts.merge_tol);
    let mut result = SpectralResult::new(interval);

    // one finer pass around roots that crowd each other
    let mut i = 0;
    while i + 1 < roots.len() {
        if roots[i + 1].z - roots[i].z < 10.0 * step {
            let lo = (roots[i].z - 2.0 * step).max(a);
            let hi = (roots[i + 1].z + 2.0 * step).min(b);
            let fine = scan(g, lo, hi, 512, opts)?;
            let fine_step = (hi - lo) / 512.0;
            roots.retain(|r| r.z < lo || r.z > hi);
            let fine = merge(fine, opts.merge_tol);
            for w in fine.windows(2) {
                if w[1].z - w[0].z < 10.0 * fine_step {
                    result.warnings.push(format!(
                        "roots {} and {} are closer than the scan resolution",
                        w[0].z, w[1].z
                    ));
                }
            }
            roots.extend(fine);
            roots = merge(roots, opts.merge_tol);
            i += 2;
        } else {
            i += 1;
        }
    }

    result.entries = roots
        .into_iter()
        .map(|r| SpectralEntry {
            z: r.z,
            multiplicity: r.multiplicity,
            lambda: None,
            method: Method::Oracle,
            residual: r.ratio,
        })
        .collect();
    result.sort();
    Ok(result)
}

/// Window `[a + c_a, b - c_b]` with `c = 1e-4 (1 + |endpoint|)`, used to drop
/// eigenvalues too close to the ends of an interval before comparing.
pub fn collar_window(interval: (f64, f64)) -> (f64, f64) {
    let (a, b) = interval;
    (a + 1e-4 * (1.0 + a.abs()), b - 1e-4 * (1.0 + b.abs()))
}

/// Allowed deviation `abs + rel |z|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }

    pub fn at(&self, z: f64) -> f64 {
        self.abs + self.rel * z.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub reduced: SpectralEntry,
    pub oracle: SpectralEntry,
    pub deviation: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_reduced: Vec<SpectralEntry>,
    pub unmatched_oracle: Vec<SpectralEntry>,
    pub max_deviation: f64,
    pub multiplicity_mismatches: usize,
    pub passed: bool,
}

/// Greedy nearest-neighbour matching of two spectral lists.
pub fn compare(
    reduced: &SpectralResult,
    oracle: &SpectralResult,
    tol: Tolerance,
) -> ComparisonReport {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, r) in reduced.entries.iter().enumerate() {
        for (j, o) in oracle.entries.iter().enumerate() {
            candidates.push(((r.z - o.z).abs(), i, j));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut used_r = alloc::vec![false; reduced.entries.len()];
    let mut used_o = alloc::vec![false; oracle.entries.len()];
    let mut pairs = Vec::new();
    for (d, i, j) in candidates {
        if used_r[i] || used_o[j] {
            continue;
        }
        used_r[i] = true;
        used_o[j] = true;
        let r = reduced.entries[i];
        pairs.push(MatchedPair {
            reduced: r,
            oracle: oracle.entries[j],
            deviation: d,
            within_tolerance: d <= tol.at(r.z),
        });
    }
    pairs.sort_by(|x, y| x.reduced.z.total_cmp(&y.reduced.z));
    let unmatched_reduced: Vec<SpectralEntry> = reduced
        .entries
        .iter()
        .zip(&used_r)
        .filter(|(_, u)| !**u)
        .map(|(e, _)| *e)
        .collect();
    let unmatched_oracle: Vec<SpectralEntry> = oracle
        .entries
        .iter()
        .zip(&used_o)
        .filter(|(_, u)| !**u)
        .map(|(e, _)| *e)
        .collect();
    let max_deviation = pairs.iter().fold(0.0f64, |m, p| m.max(p.deviation));
    let multiplicity_mismatches = pairs
        .iter()
        .filter(|p| p.reduced.multiplicity != p.oracle.multiplicity)
        .count();
    let passed = unmatched_reduced.is_empty()
        && unmatched_oracle.is_empty()
        && multiplicity_mismatches == 0
        && pairs.iter().all(|p| p.within_tolerance);
    ComparisonReport {
        pairs,
        unmatched_reduced,
        unmatched_oracle,
        max_deviation,
        multiplicity_mismatches,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{CouplingSpec, Strength};
    use crate::graph::{EdgeDesc, GraphDescription, VertexDesc};
    use crate::math::PI;
    use crate::potential::Potential;
    use alloc::string::ToString;

    fn graph(vs: &[&str], es: &[(&str, &str, &str, f64)], coupling: CouplingSpec) -> MetricGraph {
        MetricGraph::build(&GraphDescription {
            length: 1.0,
            potential: Potential::Zero,
            vertices: vs
                .iter()
                .map(|v| VertexDesc {
                    id: v.to_string(),
                    coupling: coupling.clone(),
                })
                .collect(),
            edges: es
                .iter()
                .map(|(e, t, h, b)| EdgeDesc {
                    id: e.to_string(),
                    tail: t.to_string(),
                    head: h.to_string(),
                    beta: *b,
                })
                .collect(),
        })
        .unwrap()
    }

    fn kirchhoff() -> CouplingSpec {
        CouplingSpec::Delta {
            alpha: Strength::Fixed(0.0),
        }
    }

    #[test]
    fn single_edge_neumann_ground_state() {
        let g = graph(&["v1", "v2"], &[("e", "v1", "v2", 0.0)], kirchhoff());
        let m = secular_matrix(&g, ZERO).unwrap();
        // f'(0) = 0 and f'(1) = 0 in the unknowns (a, b) = (f(0), f'(0))
        let det = m.lu().map(|lu| lu.determinant()).unwrap_or(ZERO);
        assert!(det.norm() < 1e-14);
        let r = oracle_spectrum(&g, (-0.5, PI * PI - 0.01), &OracleOptions::default()).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert!(r.entries[0].z.abs() < 1e-10);
        assert_eq!(r.entries[0].multiplicity, 1);
    }

    #[test]
    fn dirichlet_decoupling_sees_dirichlet_spectrum() {
        let u = CMatrix::identity(1).scale(-ONE);
        let g = graph(
            &["v1", "v2"],
            &[("e", "v1", "v2", 0.0)],
            CouplingSpec::CustomU { u },
        );
        let r = oracle_spectrum(&g, (1.0, 30.0), &OracleOptions::default()).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert!((r.entries[0].z - PI * PI).abs() < 1e-9);
    }

    #[test]
    fn triangle_first_gap() {
        let g = graph(
            &["a", "b", "c"],
            &[
                ("ab", "a", "b", 0.0),
                ("bc", "b", "c", 0.0),
                ("ca", "c", "a", 0.0),
            ],
            kirchhoff(),
        );
        let r = oracle_spectrum(&g, (-0.5, PI * PI - 0.01), &OracleOptions::default()).unwrap();
        let zs: Vec<(f64, usize)> = r.entries.iter().map(|e| (e.z, e.multiplicity)).collect();
        assert_eq!(zs.len(), 2);
        assert!(zs[0].0.abs() < 1e-10 && zs[0].1 == 1);
        assert!((zs[1].0 - 4.0 * PI * PI / 9.0).abs() < 1e-9 && zs[1].1 == 2);
    }

    #[test]
    fn coarse_grid_still_separates_neighbours() {
        let g = graph(
            &["a", "b", "c"],
            &[
                ("ab", "a", "b", 0.0),
                ("bc", "b", "c", 0.0),
                ("ca", "c", "a", 0.0),
            ],
            kirchhoff(),
        );
        let coarse = OracleOptions {
            grid_points: 16,
            ..OracleOptions::default()
        };
        let a = oracle_spectrum(&g, (-0.5, 60.0), &coarse).unwrap();
        let b = oracle_spectrum(&g, (-0.5, 60.0), &OracleOptions::default()).unwrap();
        assert!(
            compare(&a, &b, Tolerance::absolute(1e-9)).passed,
            "{:?}\n{:?}",
            a.entries,
            b.entries
        );
    }

    #[test]
    fn magnetic_loop() {
        let phi = 1.1;
        let g = graph(&["v"], &[("loop", "v", "v", phi)], kirchhoff());
        let r = oracle_spectrum(&g, (0.1, 30.0), &OracleOptions::default()).unwrap();
        // cos sqrt z = cos phi
        let expected = [
            phi * phi,
            (2.0 * PI - phi).powi(2),
            (2.0 * PI + phi).powi(2),
        ];
        let found: Vec<f64> = r.entries.iter().map(|e| e.z).collect();
        let want: Vec<f64> = expected.iter().copied().filter(|&z| z < 30.0).collect();
        assert_eq!(found.len(), want.len());
        for (f, w) in found.iter().zip(&want) {
            assert!((f - w).abs() < 1e-9, "{f} vs {w}");
        }
    }

    #[test]
    fn compare_flags_shift() {
        let mk = |z: f64| SpectralEntry {
            z,
            multiplicity: 1,
            lambda: None,
            method: Method::Oracle,
            residual: 0.0,
        };
        let mut a = SpectralResult::new((0.0, 10.0));
        a.entries = alloc::vec![mk(1.0), mk(4.0)];
        let same = compare(&a, &a, Tolerance::absolute(1e-8));
        assert!(same.passed && same.max_deviation == 0.0);
        let mut b = a.clone();
        b.entries[1].z += 1e-3;
        let shifted = compare(&b, &a, Tolerance::absolute(1e-8));
        assert!(!shifted.passed);
        assert!((shifted.max_deviation - 1e-3).abs() < 1e-12);
    }
}
