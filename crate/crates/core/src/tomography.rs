//! Phase-space tomography of oscillator states: the Wigner function in its
//! displaced-parity form and rotated-quadrature distributions, for pure
//! states and density matrices alike.
//!
//! W(beta) = (2/pi) Tr[D†(beta) rho D(beta) (-1)^n], so each phase-space
//! point costs one truncated displacement matrix. Quadrature distributions
//! contract the state with harmonic-oscillator position overlaps.

use crate::fock::{displacement_matrix, quadrature_overlap, FockVector};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("grid needs at least 2 points, got {points}")]
    TooFewPoints { points: usize },
    #[error("grid bounds [{min}, {max}] must be finite and increasing")]
    BadBounds { min: f64, max: f64 },
    #[error("pure state norm {norm} deviates from 1 by more than 1e-6")]
    NotNormalized { norm: f64 },
    #[error("density matrix trace {trace} deviates from 1 by more than 1e-6")]
    NotUnitTrace { trace: f64 },
    #[error("density matrix asymmetry {asymmetry:.3e} exceeds 1e-6")]
    NotHermitian { asymmetry: f64 },
    #[error("density matrix must be square, got {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("the fringe direction is undefined at zero displacement")]
    DegenerateDirection,
}

/// Uniform, inclusive 1D grid.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self, TomographyError> {
        if points < 2 {
            return Err(TomographyError::TooFewPoints { points });
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(TomographyError::BadBounds { min, max });
        }
        Ok(GridSpec { min, max, points })
    }

    /// Phase-space default: [-3.5, 3.5] at 141 points per axis (step 0.05),
    /// wide enough for displacements up to |alpha| = 2 plus fringes.
    pub fn wigner_default() -> Self {
        GridSpec {
            min: -3.5,
            max: 3.5,
            points: 141,
        }
    }

    /// Quadrature default: X in [-6, 6] at step 0.01.
    pub fn quadrature_default() -> Self {
        GridSpec {
            min: -6.0,
            max: 6.0,
            points: 1201,
        }
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points).map(|i| self.min + i as f64 * step).collect()
    }
}

/// An oscillator state whose phase-space picture is wanted.
#[derive(Debug, Clone)]
pub enum OscillatorState {
    Pure(FockVector),
    Mixed(Array2<C64>),
}

impl OscillatorState {
    fn levels(&self) -> usize {
        match self {
            OscillatorState::Pure(psi) => psi.amps().len(),
            OscillatorState::Mixed(rho) => rho.nrows(),
        }
    }

    fn validate(&self) -> Result<(), TomographyError> {
        match self {
            OscillatorState::Pure(psi) => {
                let norm = psi.norm();
                if (norm - 1.0).abs() > 1e-6 {
                    return Err(TomographyError::NotNormalized { norm });
                }
            }
            OscillatorState::Mixed(rho) => {
                let (rows, cols) = rho.dim();
                if rows != cols {
                    return Err(TomographyError::NotSquare { rows, cols });
                }
                let trace: C64 = (0..rows).map(|i| rho[(i, i)]).sum();
                if (trace - C64::new(1.0, 0.0)).norm() > 1e-6 {
                    return Err(TomographyError::NotUnitTrace { trace: trace.re });
                }
                let mut asym = 0.0f64;
                for i in 0..rows {
                    for j in i..rows {
                        let d = (rho[(i, j)] - rho[(j, i)].conj()).norm();
                        if d > asym {
                            asym = d;
                        }
                    }
                }
                if asym > 1e-6 {
                    return Err(TomographyError::NotHermitian { asymmetry: asym });
                }
            }
        }
        Ok(())
    }
}

/// Zero-pads the state to at least `levels` oscillator levels. The padded
/// state is physically identical; the headroom lets the displaced-basis
/// parity sums cancel properly at grid points far from the state's
/// support, where a tight truncation leaves spurious signal.
pub fn pad_to_levels(state: &OscillatorState, levels: usize) -> OscillatorState {
    match state {
        OscillatorState::Pure(psi) => {
            if psi.amps().len() >= levels {
                return state.clone();
            }
            let mut amps = psi.amps().to_vec();
            amps.resize(levels, C64::new(0.0, 0.0));
            OscillatorState::Pure(FockVector::new(amps).expect("padding preserves the norm"))
        }
        OscillatorState::Mixed(rho) => {
            if rho.nrows() >= levels {
                return state.clone();
            }
            let mut big: Array2<C64> = Array2::zeros((levels, levels));
            for i in 0..rho.nrows() {
                for j in 0..rho.ncols() {
                    big[(i, j)] = rho[(i, j)];
                }
            }
            OscillatorState::Mixed(big)
        }
    }
}

/// Levels that keep a state supported within |alpha| <= support_radius
/// faithful out to |beta| = reach, the farthest evaluated phase-space
/// point (for a square grid [-L, L]^2 that is the corner, L * sqrt(2)).
/// The displaced basis then covers excitation (reach + support_radius)^2
/// plus tail room.
pub fn levels_for_grid(support_radius: f64, reach: f64) -> usize {
    let r = support_radius + reach;
    (r * r + 6.0 * r).ceil() as usize + 1
}

fn wigner_point(state: &OscillatorState, beta: C64) -> f64 {
    let levels = state.levels();
    let two_over_pi = std::f64::consts::FRAC_2_PI;
    match state {
        OscillatorState::Pure(psi) => {
            let d = displacement_matrix(levels, -beta);
            let mut acc = 0.0;
            for l in 0..levels {
                let mut chi = C64::new(0.0, 0.0);
                for m in 0..levels {
                    chi += d[(l, m)] * psi.amps()[m];
                }
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * chi.norm_sqr();
            }
            two_over_pi * acc
        }
        OscillatorState::Mixed(rho) => {
            let d = displacement_matrix(levels, beta);
            // X = rho D; then sum_l (-1)^l (D† X)_{ll}.
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..levels {
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                let mut diag = C64::new(0.0, 0.0);
                for k in 0..levels {
                    let mut x_kl = C64::new(0.0, 0.0);
                    for j in 0..levels {
                        x_kl += rho[(k, j)] * d[(j, l)];
                    }
                    diag += d[(k, l)].conj() * x_kl;
                }
                acc += sign * diag;
            }
            two_over_pi * acc.re
        }
    }
}

/// Wigner function sampled on re x im: values[(i, j)] = W(re[i] + i im[j]).
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub values: Array2<f64>,
}

impl WignerGrid {
    fn cell_weights(axis: &[f64]) -> Vec<f64> {
        let mut w = vec![1.0; axis.len()];
        w[0] = 0.5;
        *w.last_mut().unwrap() = 0.5;
        w
    }

    /// Trapezoid integral of W over the grid; 1 for a state the grid
    /// contains.
    pub fn total_mass(&self) -> f64 {
        self.reduce(|w| w)
    }

    /// Trapezoid integral of the negative part, Int max(0, -W): zero for
    /// Gaussian states, positive when interference fringes dip below zero.
    pub fn negativity_volume(&self) -> f64 {
        self.reduce(|w| (-w).max(0.0))
    }

    fn reduce(&self, f: impl Fn(f64) -> f64) -> f64 {
        let dre = self.re[1] - self.re[0];
        let dim = self.im[1] - self.im[0];
        let wr = Self::cell_weights(&self.re);
        let wi = Self::cell_weights(&self.im);
        let mut acc = 0.0;
        for i in 0..self.re.len() {
            for j in 0..self.im.len() {
                acc += wr[i] * wi[j] * f(self.values[(i, j)]);
            }
        }
        acc * dre * dim
    }
}

/// Samples the Wigner function over a rectangular grid, one displaced
/// parity evaluation per point, parallel over rows.
pub fn wigner(
    state: &OscillatorState,
    re: &GridSpec,
    im: &GridSpec,
) -> Result<WignerGrid, TomographyError> {
    state.validate()?;
    let re_vals = re.values();
    let im_vals = im.values();
    let rows: Vec<Vec<f64>> = re_vals
        .par_iter()
        .map(|&x| {
            im_vals
                .iter()
                .map(|&y| wigner_point(state, C64::new(x, y)))
                .collect()
        })
        .collect();
    let mut values: Array2<f64> = Array2::zeros((re_vals.len(), im_vals.len()));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            values[(i, j)] = v;
        }
    }
    Ok(WignerGrid {
        re: re_vals,
        im: im_vals,
        values,
    })
}

/// Wigner function at a single phase-space point.
pub fn wigner_at(state: &OscillatorState, beta: C64) -> Result<f64, TomographyError> {
    state.validate()?;
    Ok(wigner_point(state, beta))
}

/// Largest |W| on the interference axis: the line through the origin
/// perpendicular to the branch displacement `alpha`, scanned over
/// [-half_span, half_span]. The fringes of a two-component superposition
/// peak on this line, so their attenuation tracks coherence loss.
pub fn wigner_fringe_extremum(
    state: &OscillatorState,
    alpha: C64,
    half_span: f64,
    points: usize,
) -> Result<f64, TomographyError> {
    if alpha.norm() == 0.0 {
        return Err(TomographyError::DegenerateDirection);
    }
    let grid = GridSpec::new(-half_span, half_span, points)?;
    state.validate()?;
    let direction = C64::i() * alpha / alpha.norm();
    let best = grid
        .values()
        .par_iter()
        .map(|&s| wigner_point(state, direction * s).abs())
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Distribution of the rotated quadrature X(theta).
#[derive(Debug, Clone)]
pub struct QuadratureDistribution {
    pub theta: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl QuadratureDistribution {
    /// Trapezoid integral of P over the grid; 1 when the grid contains the
    /// state.
    pub fn total_mass(&self) -> f64 {
        let step = self.x[1] - self.x[0];
        let n = self.p.len();
        let mut acc = 0.5 * (self.p[0] + self.p[n - 1]);
        for v in &self.p[1..n - 1] {
            acc += v;
        }
        acc * step
    }

    /// Peak-to-trough excursion of P inside |X| <= half_window, where the
    /// interference fringes of a cat state live.
    pub fn fringe_amplitude(&self, half_window: f64) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (x, p) in self.x.iter().zip(self.p.iter()) {
            if x.abs() <= half_window {
                lo = lo.min(*p);
                hi = hi.max(*p);
            }
        }
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }
}

/// P(X; theta) = <X(theta)| rho |X(theta)> over the given grid.
pub fn quadrature_distribution(
    state: &OscillatorState,
    theta: f64,
    grid: &GridSpec,
) -> Result<QuadratureDistribution, TomographyError> {
    state.validate()?;
    let levels = state.levels();
    let x = grid.values();
    let p: Vec<f64> = x
        .par_iter()
        .map(|&xv| {
            let q: Vec<C64> = (0..levels)
                .map(|m| quadrature_overlap(m, xv, theta))
                .collect();
            match state {
                OscillatorState::Pure(psi) => {
                    let amp: C64 = q
                        .iter()
                        .zip(psi.amps().iter())
                        .map(|(qm, am)| qm * am)
                        .sum();
                    amp.norm_sqr()
                }
                OscillatorState::Mixed(rho) => {
                    let mut acc = C64::new(0.0, 0.0);
                    for m in 0..levels {
                        for n in 0..levels {
                            acc += q[m] * rho[(m, n)] * q[n].conj();
                        }
                    }
                    acc.re
                }
            }
        })
        .collect();
    Ok(QuadratureDistribution { theta, x, p })
}
