use std::f64::consts::PI;

use qgraph_core::coupling::{CouplingSpec, Strength};
use qgraph_core::graph::{EdgeDesc, GraphDescription, MetricGraph, VertexDesc};
use qgraph_core::linalg::C64;
use qgraph_core::ode;
use qgraph_core::oracle::{self, OracleOptions, Tolerance};
use qgraph_core::potential::Potential;
use qgraph_core::weyl::{Family, ReductionContext, ReductionError};

fn build(
    edges: &[(&str, &str, &str)],
    coupling: CouplingSpec,
    potential: Potential,
) -> MetricGraph {
    let mut ids: Vec<&str> = edges.iter().flat_map(|e| [e.1, e.2]).collect();
    ids.sort();
    ids.dedup();
    MetricGraph::build(&GraphDescription {
        length: 1.0,
        potential,
        vertices: ids
            .iter()
            .map(|v| VertexDesc {
                id: v.to_string(),
                coupling: coupling.clone(),
            })
            .collect(),
        edges: edges
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

const TRIANGLE: [(&str, &str, &str); 3] = [("ab", "a", "b"), ("bc", "b", "c"), ("ca", "c", "a")];
const STAR: [(&str, &str, &str); 3] = [
    ("s1", "hub", "l1"),
    ("s2", "hub", "l2"),
    ("s3", "hub", "l3"),
];

fn gaps(g: &MetricGraph, n: usize) -> Vec<(f64, f64)> {
    ode::dirichlet_spectrum(g.potential(), g.length(), n)
        .unwrap()
        .gaps()
}

fn agree(g: &MetricGraph, interval: (f64, f64), tol: f64) {
    let ctx = ReductionContext::new(g, interval).unwrap();
    let window = oracle::collar_window(interval);
    let reduced = ctx
        .reduce_spectrum()
        .unwrap()
        .restricted(window.0, window.1);
    let found = oracle::oracle_spectrum(g, interval, &OracleOptions::default())
        .unwrap()
        .restricted(window.0, window.1);
    let report = oracle::compare(&reduced, &found, Tolerance::absolute(tol));
    assert!(report.passed, "{interval:?}: {report:?}");
}

#[test]
fn robin_triangle_matches_secular_solver() {
    let g = build(
        &TRIANGLE,
        CouplingSpec::Delta {
            alpha: Strength::PerDegree(-0.4),
        },
        Potential::Zero,
    );
    for j in gaps(&g, 3) {
        agree(&g, j, 1e-8);
    }
}

#[test]
fn tabulated_potential_star() {
    let samples: Vec<(f64, f64)> = (0..=20)
        .map(|i| {
            let x = i as f64 / 20.0;
            (x, 3.0 * (x - 0.5) * (x - 0.5))
        })
        .collect();
    let g = build(
        &STAR,
        CouplingSpec::Delta {
            alpha: Strength::Fixed(0.0),
        },
        Potential::sampled(&samples).unwrap(),
    );
    for j in gaps(&g, 2) {
        agree(&g, j, 1e-6);
    }
}

#[test]
fn eta_agrees_with_weyl_entries() {
    let g = build(
        &TRIANGLE,
        CouplingSpec::Delta {
            alpha: Strength::PerDegree(0.3),
        },
        Potential::cosine(vec![0.0, 0.8], 1.0).unwrap(),
    );
    let j = gaps(&g, 1)[0];
    let ctx = ReductionContext::new(&g, j).unwrap();
    for i in 1..10 {
        let z = j.0 + (j.1 - j.0) * i as f64 / 10.0;
        let a = ctx.eta(z, false).unwrap().0;
        let b = ctx.eta_from_weyl(z).unwrap();
        assert!(
            (a - b).abs() < 1e-9 * (1.0 + a.abs()),
            "z = {z}: {a} vs {b}"
        );
    }
}

#[test]
fn interior_adjacency_eigenvalue_keeps_its_multiplicity() {
    // star adjacency spectrum is {-1, 0, 0, 1}; +-1 sit at the excluded gap ends
    let g = build(
        &STAR,
        CouplingSpec::Delta {
            alpha: Strength::Fixed(0.0),
        },
        Potential::Zero,
    );
    let j = (PI * PI + 1e-3, 4.0 * PI * PI - 1e-3);
    let ctx = ReductionContext::new(&g, j).unwrap();
    let r = ctx.reduce_spectrum().unwrap();
    assert_eq!(r.entries.len(), 1);
    let e = &r.entries[0];
    assert_eq!(e.multiplicity, 2);
    assert!(e.lambda.unwrap().abs() < 1e-12);
    assert!((e.z - 2.25 * PI * PI).abs() < 1e-9);
    assert!(r.boundary.is_empty());
}

#[test]
fn kappa_family_for_balanced_orientation() {
    let ramp = Potential::polynomial(vec![0.0, 1.0]).unwrap();
    let g = build(
        &[
            ("ab", "a", "b"),
            ("bc", "b", "c"),
            ("cd", "c", "d"),
            ("da", "d", "a"),
        ],
        CouplingSpec::Delta {
            alpha: Strength::Fixed(0.0),
        },
        ramp,
    );
    let j = gaps(&g, 1)[0];
    let ctx = ReductionContext::new(&g, j).unwrap();
    assert_eq!(ctx.family(), Family::Kappa { kappa: 0.5 });
    // n and eta stay real on the real axis
    let s = ctx.scalars(C64::new(0.5 * (j.0 + j.1), 0.0), true).unwrap();
    assert_eq!(s.eta.im, 0.0);
    agree(&g, j, 1e-6);
}

#[test]
fn reference_eigenvalue_inside_interval_is_refused() {
    let g = build(
        &TRIANGLE,
        CouplingSpec::Delta {
            alpha: Strength::Fixed(0.0),
        },
        Potential::Zero,
    );
    let e = ReductionContext::new(&g, (1.0, 12.0)).unwrap_err();
    assert!(
        matches!(e, ReductionError::ReferenceSpectrumInInterval(_)),
        "{e:?}"
    );
}
