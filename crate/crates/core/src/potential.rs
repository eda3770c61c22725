//! Edge potentials `V` on `[0, l]`.

use alloc::vec::Vec;

use thiserror::Error;

use crate::math::{cos, PI};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("potential table needs at least two samples")]
    TooFewSamples,
    #[error("potential table abscissae must be strictly increasing (at sample {0})")]
    NotIncreasing(usize),
    #[error("potential table covers [{first}, {last}] but the edge is [0, {length}]")]
    DoesNotCover { first: f64, last: f64, length: f64 },
    #[error("potential contains a non-finite value")]
    NonFinite,
    #[error("cosine period must be positive")]
    BadPeriod,
}

/// Real potential shared by every edge of the graph.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    /// `V(x) = sum_k a_k x^k`
    Polynomial(Vec<f64>),
    /// `V(x) = sum_k a_k cos(2 pi k x / period)`
    Cosine {
        coefficients: Vec<f64>,
        period: f64,
    },
    Sampled(SampledPotential),
}

/// Tabulated potential. Four or more samples are joined by a natural cubic
/// spline, fewer by straight lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPotential {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots, empty for linear interpolation
    m: Vec<f64>,
}

impl SampledPotential {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self, PotentialError> {
        if samples.len() < 2 {
            return Err(PotentialError::TooFewSamples);
        }
        if samples
            .iter()
            .any(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(PotentialError::NonFinite);
        }
        for (k, w) in samples.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(PotentialError::NotIncreasing(k + 1));
            }
        }
        let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let m = if xs.len() >= 4 {
            natural_spline_moments(&xs, &ys)
        } else {
            Vec::new()
        };
        Ok(Self { xs, ys, m })
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn is_cubic(&self) -> bool {
        !self.m.is_empty()
    }

    fn covers(&self, length: f64) -> Result<(), PotentialError> {
        let first = self.xs[0];
        let last = *self.xs.last().unwrap();
        let slack = 1e-12 * (1.0 + length);
        if first > slack || last < length - slack {
            return Err(PotentialError::DoesNotCover {
                first,
                last,
                length,
            });
        }
        Ok(())
    }

    fn evaluate(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let k = match self.xs.partition_point(|&t| t <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        if self.m.is_empty() {
            return a * y0 + b * y1;
        }
        let (m0, m1) = (self.m[k], self.m[k + 1]);
        a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0
    }
}

/// Second derivatives of the natural cubic spline through the knots.
fn natural_spline_moments(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = alloc::vec![0.0; n];
    // tridiagonal system for interior moments, Thomas algorithm
    let mut diag = alloc::vec![0.0; n];
    let mut rhs = alloc::vec![0.0; n];
    let mut upper = alloc::vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        let lower = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        upper[i] = h1 / 6.0;
        rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
        if i > 1 {
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
    }
    for i in (1..n - 1).rev() {
        let next = if i + 1 < n - 1 { m[i + 1] } else { 0.0 };
        m[i] = (rhs[i] - upper[i] * next) / diag[i];
    }
    m
}

impl Potential {
    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self, PotentialError> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        Ok(Potential::Polynomial(coefficients))
    }

    pub fn cosine(coefficients: Vec<f64>, period: f64) -> Result<Self, PotentialError> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(PotentialError::BadPeriod);
        }
        Ok(Potential::Cosine {
            coefficients,
            period,
        })
    }

    pub fn sampled(samples: &[(f64, f64)]) -> Result<Self, PotentialError> {
        SampledPotential::new(samples).map(Potential::Sampled)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potential::Zero => true,
            Potential::Polynomial(c) => c.iter().all(|&a| a == 0.0),
            Potential::Cosine { coefficients, .. } => coefficients.iter().all(|&a| a == 0.0),
            Potential::Sampled(_) => false,
        }
    }

    /// Checks that the potential is defined on all of `[0, length]`.
    pub fn validate_on(&self, length: f64) -> Result<(), PotentialError> {
        match self {
            Potential::Sampled(s) => s.covers(length),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            Potential::Cosine {
                coefficients,
                period,
            } => coefficients
                .iter()
                .enumerate()
                .map(|(k, &a)| a * cos(2.0 * PI * k as f64 * x / *period))
                .sum(),
            Potential::Sampled(s) => s.evaluate(x),
        }
    }

    /// Minimum over a uniform grid of `[0, length]`.
    pub fn grid_min(&self, length: f64, points: usize) -> f64 {
        (0..=points)
            .map(|i| self.evaluate(length * i as f64 / points as f64))
            .fold(f64::INFINITY, f64::min)
    }
}
