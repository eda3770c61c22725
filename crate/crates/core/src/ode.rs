//! Fundamental solutions of `-y'' + V y = z y` on `[0, l]` and the Dirichlet
//! and Neumann spectra of a single edge.

use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::{C64, ONE, ZERO};
use crate::math::{sqrt, PI};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OdeError {
    #[error("integrator step size collapsed at x = {x} (error estimate {error:e})")]
    StepSizeCollapse { x: f64, error: f64 },
    #[error("integrator exceeded {steps} steps at x = {x}")]
    TooManySteps { steps: usize, x: f64 },
    #[error("edge length must be positive, got {0}")]
    BadLength(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpectrumError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("found only {found} of {requested} eigenvalues below the scan cap {cap}")]
    WindowExhausted {
        found: usize,
        requested: usize,
        cap: f64,
    },
    #[error("eigenvalue {0} is not simple (vanishing derivative)")]
    NotSimple(f64),
}

/// z-derivatives of the transfer entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferDerivative {
    pub c: C64,
    pub s: C64,
    pub cp: C64,
    pub sp: C64,
}

/// Values `c(l; z)`, `s(l; z)`, `c'(l; z)`, `s'(l; z)` of the solutions with
/// `c(0) = s'(0) = 1`, `c'(0) = s(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub c: C64,
    pub s: C64,
    pub cp: C64,
    pub sp: C64,
    pub dz: Option<TransferDerivative>,
}

impl TransferMatrix {
    pub fn wronskian(&self) -> C64 {
        self.c * self.sp - self.s * self.cp
    }

    pub fn dz(&self) -> TransferDerivative {
        self.dz
            .expect("transfer matrix computed without z-derivatives")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Use the closed form when the potential vanishes identically.
    pub closed_form_when_free: bool,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 1_000_000,
            closed_form_when_free: true,
        }
    }
}

pub fn transfer(
    potential: &Potential,
    l: f64,
    z: C64,
    want_dz: bool,
) -> Result<TransferMatrix, OdeError> {
    transfer_with(&OdeSettings::default(), potential, l, z, want_dz)
}

pub fn transfer_with(
    settings: &OdeSettings,
    potential: &Potential,
    l: f64,
    z: C64,
    want_dz: bool,
) -> Result<TransferMatrix, OdeError> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(OdeError::BadLength(l));
    }
    if settings.closed_form_when_free && potential.is_zero() {
        let mut t = free_transfer(l, z);
        if !want_dz {
            t.dz = None;
        }
        return Ok(t);
    }
    let v = |x: f64| potential.evaluate(x);
    if want_dz {
        let y0 = [ONE, ZERO, ZERO, ONE, ZERO, ZERO, ZERO, ZERO];
        let y = integrate(settings, l, y0, |x, y: &[C64; 8]| {
            let q = C64::new(v(x), 0.0) - z;
            [
                y[1],
                q * y[0],
                y[3],
                q * y[2],
                y[5],
                q * y[4] - y[0],
                y[7],
                q * y[6] - y[2],
            ]
        })?;
        Ok(TransferMatrix {
            c: y[0],
            cp: y[1],
            s: y[2],
            sp: y[3],
            dz: Some(TransferDerivative {
                c: y[4],
                cp: y[5],
                s: y[6],
                sp: y[7],
            }),
        })
    } else {
        let y0 = [ONE, ZERO, ZERO, ONE];
        let y = integrate(settings, l, y0, |x, y: &[C64; 4]| {
            let q = C64::new(v(x), 0.0) - z;
            [y[1], q * y[0], y[3], q * y[2]]
        })?;
        Ok(TransferMatrix {
            c: y[0],
            cp: y[1],
            s: y[2],
            sp: y[3],
            dz: None,
        })
    }
}

// cos(sqrt w), sin(sqrt w)/sqrt w and their w-derivatives
fn free_kernels(w: C64) -> (C64, C64, C64, C64) {
    if w.norm() < 1.0 {
        // even power series; 1/(2n)! decays fast enough for 20 terms
        let mut cw = ZERO;
        let mut sw = ZERO;
        let mut dcw = ZERO;
        let mut dsw = ZERO;
        let mut pow = ONE; // (-w)^n
        let mut prev = ONE; // (-w)^(n-1)
        let mut fact_even = 1.0; // (2n)!
        for n in 0..20usize {
            let fact_odd = fact_even * (2 * n + 1) as f64; // (2n+1)!
            cw += pow / fact_even;
            sw += pow / fact_odd;
            if n > 0 {
                let k = -(n as f64);
                dcw += prev * k / fact_even;
                dsw += prev * k / fact_odd;
            }
            prev = pow;
            pow *= -w;
            fact_even = fact_odd * (2 * n + 2) as f64;
        }
        (cw, sw, dcw, dsw)
    } else {
        let k = w.sqrt();
        let cw = k.cos();
        let sw = k.sin() / k;
        (cw, sw, -sw * 0.5, (cw - sw) / (w * 2.0))
    }
}

/// Closed-form transfer matrix for `V = 0`, with z-derivatives.
pub fn free_transfer(l: f64, z: C64) -> TransferMatrix {
    let l2 = l * l;
    let w = z * l2;
    let (cw, sw, dcw, dsw) = free_kernels(w);
    let c = cw;
    let s = sw * l;
    let cp = -z * sw * l;
    let dc = dcw * l2;
    let ds = dsw * l * l2;
    let dcp = -sw * l - z * dsw * l * l2;
    TransferMatrix {
        c,
        s,
        cp,
        sp: c,
        dz: Some(TransferDerivative {
            c: dc,
            s: ds,
            cp: dcp,
            sp: dc,
        }),
    }
}

// Dormand-Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<const N: usize>(y: &[C64; N], h: f64, terms: &[(f64, &[C64; N])]) -> [C64; N] {
    let mut out = *y;
    for (a, k) in terms {
        if *a == 0.0 {
            continue;
        }
        let f = h * a;
        for i in 0..N {
            out[i] += k[i] * f;
        }
    }
    out
}

fn integrate<const N: usize>(
    settings: &OdeSettings,
    l: f64,
    y0: [C64; N],
    f: impl Fn(f64, &[C64; N]) -> [C64; N],
) -> Result<[C64; N], OdeError> {
    let mut x = 0.0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    let scale = k1.iter().fold(0.0f64, |m, k| m.max(k.norm()));
    let mut h = (l / 16.0).min(0.05 / sqrt(1.0 + scale)).max(l * 1e-6);
    let mut steps = 0;
    let mut last_reject = false;
    while x < l {
        if steps >= settings.max_steps {
            return Err(OdeError::TooManySteps { steps, x });
        }
        steps += 1;
        let mut final_step = false;
        if x + h >= l {
            h = l - x;
            final_step = true;
        }
        let k2 = f(x + C2 * h, &combine(&y, h, &[(A21, &k1)]));
        let k3 = f(x + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            x + C4 * h,
            &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            x + C5 * h,
            &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            x + h,
            &combine(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = combine(
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let k7 = f(x + h, &y_new);
        let err_vec = combine(
            &[ZERO; N],
            h,
            &[
                (E1, &k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
        );
        let mut acc = 0.0;
        for i in 0..N {
            let sc = settings.atol + settings.rtol * y[i].norm().max(y_new[i].norm());
            let r = err_vec[i].norm() / sc;
            acc += r * r;
        }
        let err = sqrt(acc / N as f64);
        if !err.is_finite() {
            h *= 0.2;
            last_reject = true;
            if h < 1e-14 * l {
                return Err(OdeError::StepSizeCollapse { x, error: err });
            }
            continue;
        }
        let mut factor = if err == 0.0 {
            5.0
        } else {
            0.9 * crate::math::powf(err, -0.2)
        };
        factor = factor.clamp(0.2, 5.0);
        if err <= 1.0 {
            x = if final_step { l } else { x + h };
            y = y_new;
            k1 = k7;
            if last_reject {
                factor = factor.min(1.0);
            }
            last_reject = false;
            h *= factor;
        } else {
            h *= factor;
            last_reject = true;
            if h < 1e-14 * l {
                return Err(OdeError::StepSizeCollapse { x, error: err });
            }
        }
    }
    Ok(y)
}

/// Which endpoint problem a spectrum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceProblem {
    /// Zeros of `s(l; z)`.
    Dirichlet,
    /// Zeros of `c'(l; z)`.
    Neumann,
}

/// Reference eigenvalues `nu_1 < nu_2 < ...` and the gaps between them.
#[derive(Debug, Clone, PartialEq)]
pub struct GapList {
    pub problem: ReferenceProblem,
    pub eigenvalues: Vec<f64>,
    /// Left end used for the lowest gap.
    pub z_min: f64,
}

impl GapList {
    /// Default left end `min(-1, nu_1 - 10)`.
    pub fn default_z_min(first: f64) -> f64 {
        (-1.0f64).min(first - 10.0)
    }

    pub fn with_z_min(mut self, z_min: f64) -> Self {
        self.z_min = z_min;
        self
    }

    /// Gap `k`: `(z_min, nu_1)` for `k = 0`, `(nu_k, nu_{k+1})` otherwise.
    pub fn gap(&self, k: usize) -> Option<(f64, f64)> {
        let right = *self.eigenvalues.get(k)?;
        let left = if k == 0 {
            self.z_min
        } else {
            self.eigenvalues[k - 1]
        };
        Some((left, right))
    }

    pub fn gaps(&self) -> Vec<(f64, f64)> {
        (0..self.eigenvalues.len())
            .filter_map(|k| self.gap(k))
            .collect()
    }
}

pub fn reference_value(t: &TransferMatrix, problem: ReferenceProblem) -> C64 {
    match problem {
        ReferenceProblem::Dirichlet => t.s,
        ReferenceProblem::Neumann => t.cp,
    }
}

fn reference_derivative(t: &TransferMatrix, problem: ReferenceProblem) -> C64 {
    match problem {
        ReferenceProblem::Dirichlet => t.dz().s,
        ReferenceProblem::Neumann => t.dz().cp,
    }
}

pub fn dirichlet_spectrum(
    potential: &Potential,
    l: f64,
    count: usize,
) -> Result<GapList, SpectrumError> {
    reference_spectrum(potential, l, count, ReferenceProblem::Dirichlet)
}

pub fn neumann_spectrum(
    potential: &Potential,
    l: f64,
    count: usize,
) -> Result<GapList, SpectrumError> {
    reference_spectrum(potential, l, count, ReferenceProblem::Neumann)
}

/// Refines a sign change of `f` on `[a, b]`: bisection to width
/// `1e-12 (1 + |z|)`, then one secant step kept inside the bracket.
pub fn refine_root(
    mut f: impl FnMut(f64) -> Result<f64, OdeError>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
) -> Result<f64, OdeError> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    for _ in 0..200 {
        if b - a <= 1e-12 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    let secant = a - fa * (b - a) / (fb - fa);
    if secant.is_finite() && secant >= a && secant <= b {
        Ok(secant)
    } else {
        Ok(0.5 * (a + b))
    }
}

fn reference_spectrum(
    potential: &Potential,
    l: f64,
    count: usize,
    problem: ReferenceProblem,
) -> Result<GapList, SpectrumError> {
    let vmin = potential.grid_min(l, 512);
    // Dirichlet eigenvalues lie above min V; Neumann ones at or above it
    let start = match problem {
        ReferenceProblem::Dirichlet => vmin,
        ReferenceProblem::Neumann => vmin - 1.0,
    };
    let dq = PI / (8.0 * l);
    let max_steps = 8 * (count + 8) * 16;
    let eval = |z: f64| -> Result<f64, OdeError> {
        Ok(reference_value(&transfer(potential, l, C64::new(z, 0.0), false)?, problem).re)
    };
    let mut roots = Vec::with_capacity(count);
    let mut q_prev = 0.0;
    let mut z_prev = start;
    let mut f_prev = eval(z_prev)?;
    let mut step = 0;
    while roots.len() < count {
        if step >= max_steps {
            return Err(SpectrumError::WindowExhausted {
                found: roots.len(),
                requested: count,
                cap: z_prev,
            });
        }
        step += 1;
        let q = q_prev + dq;
        let z = start + q * q;
        let fz = eval(z)?;
        if f_prev == 0.0 {
            roots.push(z_prev);
        } else if (fz < 0.0) != (f_prev < 0.0) && fz != 0.0 {
            roots.push(refine_root(eval, z_prev, z, f_prev, fz)?);
        }
        q_prev = q;
        z_prev = z;
        f_prev = fz;
    }
    roots.truncate(count);
    for &r in &roots {
        let t = transfer(potential, l, C64::new(r, 0.0), true)?;
        let d = reference_derivative(&t, problem).norm();
        let scale = t.c.norm() + t.s.norm() + t.cp.norm() + t.sp.norm();
        if d <= 1e-10 * scale / (1.0 + r.abs()) {
            return Err(SpectrumError::NotSimple(r));
        }
    }
    let z_min = roots.first().map_or(-1.0, |&r| GapList::default_z_min(r));
    Ok(GapList {
        problem,
        eigenvalues: roots,
        z_min,
    })
}

/// Symmetry test `V(x) = V(l - x)` on a sample grid, together with
/// `s'(l; z) = c(l; z)` at five probe energies.
pub fn check_symmetric_potential(potential: &Potential, l: f64, tol: f64) -> bool {
    let n = 256;
    for i in 0..=n {
        let x = l * i as f64 / n as f64;
        if (potential.evaluate(x) - potential.evaluate(l - x)).abs() > tol {
            return false;
        }
    }
    for &z in &[-2.0, -0.5, 1.0, 5.0, 20.0] {
        let Ok(t) = transfer(potential, l, C64::new(z, 0.0), false) else {
            return false;
        };
        if (t.sp - t.c).norm() > tol * (1.0 + t.c.norm()) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const FORCE_ODE: OdeSettings = OdeSettings {
        rtol: 1e-12,
        atol: 1e-14,
        max_steps: 1_000_000,
        closed_form_when_free: false,
    };

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn free_values_at_quarter_wave() {
        let z = c((PI / 2.0) * (PI / 2.0), 0.0);
        let t = transfer_with(&FORCE_ODE, &Potential::Zero, 1.0, z, false).unwrap();
        assert!(t.c.norm() < 1e-11);
        assert!((t.s - c(2.0 / PI, 0.0)).norm() < 1e-11);
        assert!(t.sp.norm() < 1e-11);
        assert!((t.cp - c(-PI / 2.0, 0.0)).norm() < 1e-11);
    }

    #[test]
    fn free_values_at_zero() {
        let t = free_transfer(1.0, ZERO);
        assert_eq!((t.c, t.s, t.cp, t.sp), (ONE, ONE, ZERO, ONE));
        let t = transfer_with(&FORCE_ODE, &Potential::Zero, 1.0, ZERO, false).unwrap();
        assert!((t.c - ONE).norm() < 1e-13 && (t.s - ONE).norm() < 1e-13);
    }

    #[test]
    fn series_and_closed_form_agree_across_threshold() {
        for &w in &[0.999, 1.001, -0.999, -1.001] {
            let a = free_kernels(c(w, 0.3));
            let b = free_kernels(c(w, 0.3) * 1.0000001);
            assert!((a.0 - b.0).norm() < 1e-6);
            assert!((a.3 - b.3).norm() < 1e-6);
        }
    }

    #[test]
    fn ode_derivative_matches_closed_form() {
        let z = c(7.3, -1.2);
        let a = transfer_with(&FORCE_ODE, &Potential::Zero, 1.3, z, true).unwrap();
        let b = free_transfer(1.3, z);
        let (da, db) = (a.dz(), b.dz());
        for (x, y) in [(da.c, db.c), (da.s, db.s), (da.cp, db.cp), (da.sp, db.sp)] {
            assert!((x - y).norm() < 1e-9 * (1.0 + y.norm()), "{x} vs {y}");
        }
    }

    #[test]
    fn free_dirichlet_spectrum() {
        let g = dirichlet_spectrum(&Potential::Zero, 1.0, 3).unwrap();
        for (n, nu) in g.eigenvalues.iter().enumerate() {
            let exact = (PI * (n + 1) as f64).powi(2);
            assert!((nu - exact).abs() < 1e-9 * exact, "{nu} vs {exact}");
        }
        let g = dirichlet_spectrum(&Potential::Zero, 2.0, 2).unwrap();
        assert!((g.eigenvalues[0] - (PI / 2.0).powi(2)).abs() < 1e-10);
        assert!((g.eigenvalues[1] - PI * PI).abs() < 1e-10);
        assert_eq!(
            g.gap(0),
            Some((GapList::default_z_min(g.eigenvalues[0]), g.eigenvalues[0]))
        );
    }

    #[test]
    fn free_neumann_spectrum() {
        let g = neumann_spectrum(&Potential::Zero, 1.0, 3).unwrap();
        assert!(g.eigenvalues[0].abs() < 1e-10);
        assert!((g.eigenvalues[1] - PI * PI).abs() < 1e-9);
        assert!((g.eigenvalues[2] - 4.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn symmetry_check() {
        assert!(check_symmetric_potential(&Potential::Zero, 1.0, 1e-9));
        let cosine = Potential::cosine(vec![0.0, 1.0], 1.0).unwrap();
        assert!(check_symmetric_potential(&cosine, 1.0, 1e-9));
        let ramp = Potential::polynomial(vec![0.0, 1.0]).unwrap();
        assert!(!check_symmetric_potential(&ramp, 1.0, 1e-9));
    }

    #[test]
    fn gap_list_gaps() {
        let g = GapList {
            problem: ReferenceProblem::Dirichlet,
            eigenvalues: vec![1.0, 4.0],
            z_min: -9.0,
        };
        assert_eq!(g.gaps(), vec![(-9.0, 1.0), (1.0, 4.0)]);
        assert_eq!(g.gap(2), None);
    }
}
