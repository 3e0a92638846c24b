//! Open-system dynamics: the driven joint model with qubit relaxation /
//! excitation and oscillator decay / heating, integrated as a Lindblad
//! master equation.
//!
//! The integrator works in the frame rotating at omega_r for the oscillator
//! (an exact transformation: the dissipators are invariant and the ladder
//! coupling just acquires e^{+-i omega_r t} phases). That removes the
//! omega_r n_d phase winding from the stored matrix, so the step only has
//! to resolve the oscillation of the coefficients, not n_d times faster
//! rotation of the top Fock coherences. Sampled states are returned in the
//! lab frame.
//!
//! Every right-hand side is applied structurally: the Hamiltonian couples
//! each matrix entry to a handful of neighbours and the dissipators are
//! diagonal shifts, so one evaluation costs O(dim^2).

use crate::closed::{IntegratorConfig, JointPureState, Method, BRANCH_PROBABILITY_FLOOR};
use crate::fock::{cat_vector, CatTarget, Parity};
use crate::linalg::{eigvalsh, LinalgError};
use crate::model::{hamiltonian_split, CouplingVariant, ModelError, SystemParams};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Trace drift beyond this aborts a run. The right-hand side conserves the
/// trace identically, so anything larger than roundoff means a broken step.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Step-generated asymmetry beyond this aborts a run; the state itself is
/// re-symmetrized after every step.
pub const HERMITICITY_DRIFT_LIMIT: f64 = 1e-9;

/// How negative the least eigenvalue may go before a state stops being
/// physically meaningful at the crate's tolerances.
pub const MIN_EIGENVALUE_FLOOR: f64 = -1e-6;

#[derive(Debug, Error)]
pub enum OpenError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{name} must be non-negative and finite, got {value}")]
    BadRate { name: &'static str, value: f64 },
    #[error("density matrix must be square, got {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("joint dimension {dim} is not an even number of levels")]
    OddDimension { dim: usize },
    #[error("state truncated at {state} but the integrator was configured for {config}")]
    TruncationMismatch { state: usize, config: usize },
    #[error("step {step} must be positive and finite")]
    BadStep { step: f64 },
    #[error("t_end {t_end} lies before the initial time {t0}")]
    TimeReversed { t0: f64, t_end: f64 },
    #[error("trace drifted by {trace_error:.3e} at t = {t}; the step is broken")]
    TraceDrift { t: f64, trace_error: f64 },
    #[error(
        "step asymmetry {asymmetry:.3e} at t = {t} exceeds the hermiticity \
         budget; reduce the step"
    )]
    HermiticityDrift { t: f64, asymmetry: f64 },
    #[error("sampled state failed a caller invariant: {0}")]
    InvariantViolated(String),
}

/// Bath coupling rates, in the same frequency units as the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceRates {
    /// Qubit relaxation rate gamma_q.
    pub gamma_q: f64,
    /// Qubit bath occupation nbar_q.
    pub nbar_q: f64,
    /// Oscillator decay rate kappa_r.
    pub kappa_r: f64,
    /// Oscillator bath occupation nbar_r.
    pub nbar_r: f64,
}

impl DecoherenceRates {
    pub fn none() -> Self {
        DecoherenceRates {
            gamma_q: 0.0,
            nbar_q: 0.0,
            kappa_r: 0.0,
            nbar_r: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), OpenError> {
        let fields = [
            ("gamma_q", self.gamma_q),
            ("nbar_q", self.nbar_q),
            ("kappa_r", self.kappa_r),
            ("nbar_r", self.nbar_r),
        ];
        for (name, value) in fields {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(OpenError::BadRate { name, value });
            }
        }
        Ok(())
    }
}

/// Joint density matrix on the (qubit level, Fock index) basis at time t,
/// always held in the lab frame.
#[derive(Debug, Clone)]
pub struct JointDensityMatrix {
    t: f64,
    rho: Array2<C64>,
}

impl JointDensityMatrix {
    pub fn new(t: f64, rho: Array2<C64>) -> Result<Self, OpenError> {
        let (rows, cols) = rho.dim();
        if rows != cols {
            return Err(OpenError::NotSquare { rows, cols });
        }
        if rows == 0 || rows % 2 != 0 {
            return Err(OpenError::OddDimension { dim: rows });
        }
        Ok(JointDensityMatrix { t, rho })
    }

    /// The protocol's initial state |+, 0><+, 0|.
    pub fn plus_zero(n_d: usize) -> Self {
        let levels = n_d + 1;
        let mut rho: Array2<C64> = Array2::zeros((2 * levels, 2 * levels));
        let half = C64::new(0.5, 0.0);
        for &i in &[0, levels] {
            for &j in &[0, levels] {
                rho[(i, j)] = half;
            }
        }
        JointDensityMatrix { t: 0.0, rho }
    }

    pub fn from_pure(state: &JointPureState) -> Self {
        let levels = state.n_d() + 1;
        let dim = 2 * levels;
        let mut psi = Vec::with_capacity(dim);
        psi.extend_from_slice(state.a());
        psi.extend_from_slice(state.b());
        let mut rho: Array2<C64> = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                rho[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        JointDensityMatrix {
            t: state.t(),
            rho,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.rho
    }

    pub fn levels(&self) -> usize {
        self.rho.nrows() / 2
    }

    pub fn n_d(&self) -> usize {
        self.levels() - 1
    }

    pub fn trace(&self) -> C64 {
        (0..self.rho.nrows()).map(|i| self.rho[(i, i)]).sum()
    }

    pub fn trace_error(&self) -> f64 {
        (self.trace() - C64::new(1.0, 0.0)).norm()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.rho.nrows();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let d = (self.rho[(i, j)] - self.rho[(j, i)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Mean oscillator occupation, normalized by the trace.
    pub fn mean_occupation(&self) -> f64 {
        let levels = self.levels();
        let tr = self.trace().re;
        if tr == 0.0 {
            return 0.0;
        }
        let raw: f64 = (0..levels)
            .map(|m| {
                m as f64 * (self.rho[(m, m)].re + self.rho[(levels + m, levels + m)].re)
            })
            .sum();
        raw / tr
    }

    /// Population of the top retained Fock level, the truncation diagnostic.
    pub fn tail_mass(&self) -> f64 {
        let levels = self.levels();
        let m = levels - 1;
        self.rho[(m, m)].re + self.rho[(levels + m, levels + m)].re
    }
}

/// Smallest eigenvalue of the state; slightly negative values bound the
/// integration error, anything below [`MIN_EIGENVALUE_FLOOR`] is broken.
pub fn min_eigenvalue(state: &JointDensityMatrix) -> Result<f64, OpenError> {
    let vals = eigvalsh(&state.rho)?;
    Ok(vals[0])
}

/// Default truncation for open runs: enough for the displacement path plus
/// thermal spread, 14 + ceil(6 nbar_r).
pub fn default_truncation(nbar_r: f64) -> usize {
    14 + (6.0 * nbar_r).ceil() as usize
}

/// Open-system default step: the stored matrix rotates slowly in the
/// oscillator frame, so the step only resolves the coefficient oscillations
/// at omega_r and the drive sideband (1 + xi) omega_0.
pub fn default_open_step(params: &SystemParams) -> f64 {
    let fastest = params
        .omega_r
        .max((1.0 + params.xi) * params.omega_0)
        .max(params.omega_q)
        .max(1.0);
    0.02 / fastest
}

/// Master-equation defaults; `renormalize` is ignored by the open
/// integrator (the trace is conserved identically by the linear flow).
pub fn open_default_config(params: &SystemParams, n_d: usize) -> IntegratorConfig {
    IntegratorConfig {
        n_d,
        step: default_open_step(params),
        sample_dt: 0.02,
        method: Method::Rk4,
        renormalize: false,
    }
}

/// Lindblad right-hand side in the lab frame:
/// drho/dt = -i[H(t), rho]
///   + gamma_q nbar_q D[sigma_+] + gamma_q (nbar_q + 1) D[sigma_-]
///   + kappa_r nbar_r D[a†] + kappa_r (nbar_r + 1) D[a],
/// with D[o] rho = o rho o† - (o†o rho + rho o†o)/2.
///
/// This is the reference form used by the tests; the integrator applies an
/// equivalent kernel in the rotating frame.
pub fn lindblad_rhs(
    params: &SystemParams,
    rates: &DecoherenceRates,
    t: f64,
    rho: &Array2<C64>,
    out: &mut Array2<C64>,
) {
    let dim = rho.nrows();
    assert_eq!(rho.dim(), (dim, dim));
    assert_eq!(out.dim(), (dim, dim));
    assert!(dim >= 2 && dim % 2 == 0);
    let levels = dim / 2;
    let kernel = LabKernel::new(params, levels - 1);
    let rho_flat = rho.as_slice().expect("row-major input");
    let out_flat = out.as_slice_mut().expect("row-major output");
    out_flat.fill(C64::new(0.0, 0.0));
    kernel.apply(t, rho_flat, out_flat);
    add_dissipators(rates, levels, rho_flat, out_flat);
}

/// Hamiltonian commutator via the sparse entries of H(t) = S + cos(w0 t) D.
struct LabKernel {
    dim: usize,
    static_terms: Vec<(usize, usize, f64)>,
    drive_terms: Vec<(usize, usize, f64)>,
    omega_0: f64,
}

impl LabKernel {
    fn new(params: &SystemParams, n_d: usize) -> Self {
        let (h_static, h_drive) = hamiltonian_split(params, n_d);
        let collect = |h: &Array2<C64>| {
            let mut terms = Vec::new();
            for r in 0..h.nrows() {
                for c in 0..h.ncols() {
                    let v = h[(r, c)];
                    if v.norm() > 0.0 {
                        debug_assert!(v.im == 0.0);
                        terms.push((r, c, v.re));
                    }
                }
            }
            terms
        };
        LabKernel {
            dim: 2 * (n_d + 1),
            static_terms: collect(&h_static),
            drive_terms: collect(&h_drive),
            omega_0: params.omega_0,
        }
    }

    fn apply(&self, t: f64, rho: &[C64], out: &mut [C64]) {
        let dim = self.dim;
        let cos = (self.omega_0 * t).cos();
        let mut term = |r: usize, c: usize, v: f64| {
            // -i v (E_rc rho) + i v (rho E_rc).
            let miv = C64::new(0.0, -v);
            let piv = C64::new(0.0, v);
            for j in 0..dim {
                out[r * dim + j] += miv * rho[c * dim + j];
            }
            for i in 0..dim {
                out[i * dim + c] += piv * rho[i * dim + r];
            }
        };
        for &(r, c, v) in &self.static_terms {
            term(r, c, v);
        }
        for &(r, c, v) in &self.drive_terms {
            term(r, c, v * cos);
        }
    }
}

/// Hamiltonian commutator for the longitudinal variant in the oscillator
/// rotating frame: the omega_r a†a term is gone and the ladder coupling
/// carries e^{-+ i omega_r t} phases.
struct RotatingKernel {
    levels: usize,
    half_wq: f64,
    drive_amp: f64,
    omega_0: f64,
    omega_r: f64,
    g0: f64,
    sqrt: Vec<f64>,
}

impl RotatingKernel {
    fn new(params: &SystemParams, n_d: usize) -> Self {
        let levels = n_d + 1;
        RotatingKernel {
            levels,
            half_wq: 0.5 * params.omega_q,
            drive_amp: params.xi * params.omega_0,
            omega_0: params.omega_0,
            omega_r: params.omega_r,
            g0: params.g0,
            sqrt: (0..=levels).map(|m| (m as f64).sqrt()).collect(),
        }
    }

    fn apply(&self, t: f64, rho: &[C64], out: &mut [C64]) {
        let levels = self.levels;
        let dim = 2 * levels;
        let drive = self.drive_amp * (self.omega_0 * t).cos();
        let c = C64::from_polar(1.0, -self.omega_r * t);
        let cb = c.conj();
        let minus_i = C64::new(0.0, -1.0);
        let plus_i = C64::new(0.0, 1.0);
        for s in 0..2 {
            let sz_s = if s == 0 { 1.0 } else { -1.0 };
            let row_flip: isize = if s == 0 {
                (levels * dim) as isize
            } else {
                -((levels * dim) as isize)
            };
            for m in 0..levels {
                let row = (s * levels + m) * dim;
                for sp in 0..2 {
                    let sz_sp = if sp == 0 { 1.0 } else { -1.0 };
                    let col_flip: isize = if sp == 0 {
                        levels as isize
                    } else {
                        -(levels as isize)
                    };
                    let splitting = self.half_wq * (sz_s - sz_sp);
                    for n in 0..levels {
                        let ii = row + sp * levels + n;
                        let mut acc = minus_i * splitting * rho[ii];
                        // Transverse drive: sigma_x rho - rho sigma_x.
                        acc += minus_i
                            * drive
                            * rho[(ii as isize + row_flip) as usize];
                        acc += plus_i
                            * drive
                            * rho[(ii as isize + col_flip) as usize];
                        // Ladder coupling, row side: -i g0 sz (c a + c* a†).
                        let mut ladder = C64::new(0.0, 0.0);
                        if m + 1 < levels {
                            ladder += c * (self.sqrt[m + 1] * rho[ii + dim]);
                        }
                        if m > 0 {
                            ladder += cb * (self.sqrt[m] * rho[ii - dim]);
                        }
                        acc += minus_i * (self.g0 * sz_s) * ladder;
                        // Column side: +i g0 sz' (rho a c + rho a† c*).
                        let mut ladder = C64::new(0.0, 0.0);
                        if n > 0 {
                            ladder += c * (self.sqrt[n] * rho[ii - 1]);
                        }
                        if n + 1 < levels {
                            ladder += cb * (self.sqrt[n + 1] * rho[ii + 1]);
                        }
                        acc += plus_i * (self.g0 * sz_sp) * ladder;
                        out[ii] += acc;
                    }
                }
            }
        }
    }
}

/// Adds all four dissipators to `out`; identical in the lab and rotating
/// frames because the frame only rephases the jump operators.
fn add_dissipators(rates: &DecoherenceRates, levels: usize, rho: &[C64], out: &mut [C64]) {
    let dim = 2 * levels;
    let k_down = rates.kappa_r * (rates.nbar_r + 1.0);
    let k_up = rates.kappa_r * rates.nbar_r;
    let g_down = rates.gamma_q * (rates.nbar_q + 1.0);
    let g_up = rates.gamma_q * rates.nbar_q;
    if k_down == 0.0 && k_up == 0.0 && g_down == 0.0 && g_up == 0.0 {
        return;
    }
    let qshift = levels * dim + levels;
    // The thermal pump uses the truncated ladder operator, so its
    // anticommutator weight vanishes on the top level; this keeps the
    // truncated generator exactly trace-preserving, matching the dense
    // operator-algebra form.
    let pump_weight = |x: usize| if x + 1 < levels { (x + 1) as f64 } else { 0.0 };
    for s in 0..2 {
        // sigma_- jump lands in the lower-lower block, sigma_+ in the
        // upper-upper one; the anticommutators weight rows / columns by
        // which qubit projector the jump operator squares to.
        let upper_s = if s == 0 { 1.0 } else { 0.0 };
        for m in 0..levels {
            let row = (s * levels + m) * dim;
            for sp in 0..2 {
                let upper_sp = if sp == 0 { 1.0 } else { 0.0 };
                let qubit_decay = -0.5
                    * (g_down * (upper_s + upper_sp)
                        + g_up * (2.0 - upper_s - upper_sp));
                for n in 0..levels {
                    let ii = row + sp * levels + n;
                    let osc_decay = -0.5
                        * (k_down * (m + n) as f64
                            + k_up * (pump_weight(m) + pump_weight(n)));
                    let mut acc = (qubit_decay + osc_decay) * rho[ii];
                    if m + 1 < levels && n + 1 < levels {
                        acc += k_down
                            * (((m + 1) * (n + 1)) as f64).sqrt()
                            * rho[ii + dim + 1];
                    }
                    if m > 0 && n > 0 {
                        acc += k_up * ((m * n) as f64).sqrt() * rho[ii - dim - 1];
                    }
                    if s == 1 && sp == 1 {
                        acc += g_down * rho[ii - qshift];
                    }
                    if s == 0 && sp == 0 {
                        acc += g_up * rho[ii + qshift];
                    }
                    out[ii] += acc;
                }
            }
        }
    }
}

enum RhsKernel {
    Rotating(RotatingKernel),
    Lab(LabKernel),
}

impl RhsKernel {
    fn for_params(params: &SystemParams, n_d: usize) -> Self {
        match params.variant {
            CouplingVariant::SigmaZ => RhsKernel::Rotating(RotatingKernel::new(params, n_d)),
            _ => RhsKernel::Lab(LabKernel::new(params, n_d)),
        }
    }

    fn is_rotating(&self) -> bool {
        matches!(self, RhsKernel::Rotating(_))
    }

    fn apply(&self, rates: &DecoherenceRates, levels: usize, t: f64, rho: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        match self {
            RhsKernel::Rotating(k) => k.apply(t, rho, out),
            RhsKernel::Lab(k) => k.apply(t, rho, out),
        }
        add_dissipators(rates, levels, rho, out);
    }
}

/// Step-quality metrics delivered with each sample: worst values since the
/// previous sample (the state itself is re-symmetrized every step, so the
/// asymmetry reported here is what the steps generated, not what remains).
#[derive(Debug, Clone, Copy)]
pub struct StepMetrics {
    pub trace_error: f64,
    pub hermiticity_error: f64,
}

/// Run-wide integration statistics.
#[derive(Debug, Clone, Copy)]
pub struct RunStats {
    pub steps: u64,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
}

/// Cheap per-sample diagnostics recorded by [`integrate_master`].
#[derive(Debug, Clone, Copy)]
pub struct OpenDiagnostics {
    pub t: f64,
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub mean_occupation: f64,
}

/// A completed open run with the default diagnostics; callers that need
/// per-sample spectra (negativity, least eigenvalue) use
/// [`integrate_master_with`] and compute them in the callback.
#[derive(Debug)]
pub struct OpenRun {
    pub diagnostics: Vec<OpenDiagnostics>,
    pub final_state: JointDensityMatrix,
    pub stats: RunStats,
}

/// Integrates |+, 0><+, 0| to t_end, recording default diagnostics at the
/// sample cadence.
pub fn integrate_master(
    params: &SystemParams,
    rates: &DecoherenceRates,
    config: &IntegratorConfig,
    t_end: f64,
) -> Result<OpenRun, OpenError> {
    let mut diagnostics = Vec::new();
    let (final_state, stats) =
        integrate_master_with(params, rates, config, t_end, |state, metrics| {
            let (p_plus, p_minus) = branch_probabilities(state);
            diagnostics.push(OpenDiagnostics {
                t: state.t(),
                trace_error: metrics.trace_error,
                hermiticity_error: metrics.hermiticity_error,
                p_plus,
                p_minus,
                mean_occupation: state.mean_occupation(),
            });
            Ok(())
        })?;
    Ok(OpenRun {
        diagnostics,
        final_state,
        stats,
    })
}

/// Callback form of [`integrate_master`], starting from |+, 0><+, 0|.
pub fn integrate_master_with(
    params: &SystemParams,
    rates: &DecoherenceRates,
    config: &IntegratorConfig,
    t_end: f64,
    on_sample: impl FnMut(&JointDensityMatrix, &StepMetrics) -> Result<(), OpenError>,
) -> Result<(JointDensityMatrix, RunStats), OpenError> {
    integrate_master_from(
        params,
        rates,
        config,
        &JointDensityMatrix::plus_zero(config.n_d),
        t_end,
        on_sample,
    )
}

/// Integrates an arbitrary lab-frame state to t_end with fixed steps and a
/// shortened final step, invoking `on_sample` with the lab-frame state at
/// the sample cadence (initial state included, endpoint always last).
pub fn integrate_master_from(
    params: &SystemParams,
    rates: &DecoherenceRates,
    config: &IntegratorConfig,
    initial: &JointDensityMatrix,
    t_end: f64,
    mut on_sample: impl FnMut(&JointDensityMatrix, &StepMetrics) -> Result<(), OpenError>,
) -> Result<(JointDensityMatrix, RunStats), OpenError> {
    params.validate()?;
    rates.validate()?;
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(OpenError::BadStep { step: config.step });
    }
    if initial.n_d() != config.n_d {
        return Err(OpenError::TruncationMismatch {
            state: initial.n_d(),
            config: config.n_d,
        });
    }
    let t0 = initial.t();
    if t_end < t0 {
        return Err(OpenError::TimeReversed { t0, t_end });
    }
    let Method::Rk4 = config.method;

    let levels = config.n_d + 1;
    let dim = 2 * levels;
    let kernel = RhsKernel::for_params(params, config.n_d);
    let omega_r = if kernel.is_rotating() { params.omega_r } else { 0.0 };

    // Into the integration frame.
    let mut rho = to_frame(initial.matrix(), levels, omega_r * t0);
    let mut work = MasterWorkspace::new(dim);
    let mut stats = RunStats {
        steps: 0,
        max_trace_error: trace_error_flat(&rho, dim),
        max_hermiticity_error: 0.0,
    };
    let mut window = StepMetrics {
        trace_error: stats.max_trace_error,
        hermiticity_error: 0.0,
    };

    let span = t_end - t0;
    let full_steps = (span / config.step).floor() as u64;
    let remainder = span - full_steps as f64 * config.step;
    let stride = ((config.sample_dt / config.step).round() as u64).max(1);

    let emit = |rho: &[C64],
                    t: f64,
                    window: &mut StepMetrics,
                    on_sample: &mut dyn FnMut(
        &JointDensityMatrix,
        &StepMetrics,
    ) -> Result<(), OpenError>|
     -> Result<(), OpenError> {
        let lab = from_frame(rho, levels, omega_r * t);
        let state = JointDensityMatrix { t, rho: lab };
        on_sample(&state, window)?;
        *window = StepMetrics {
            trace_error: 0.0,
            hermiticity_error: 0.0,
        };
        Ok(())
    };

    emit(&rho, t0, &mut window, &mut on_sample)?;

    let advance = |rho: &mut Vec<C64>,
                       t: f64,
                       h: f64,
                       work: &mut MasterWorkspace,
                       stats: &mut RunStats,
                       window: &mut StepMetrics|
     -> Result<(), OpenError> {
        work.step(&kernel, rates, levels, t, h, rho);
        stats.steps += 1;
        let asym = resymmetrize(rho, dim);
        let tr_err = trace_error_flat(rho, dim);
        if asym > window.hermiticity_error {
            window.hermiticity_error = asym;
        }
        if tr_err > window.trace_error {
            window.trace_error = tr_err;
        }
        if asym > stats.max_hermiticity_error {
            stats.max_hermiticity_error = asym;
        }
        if tr_err > stats.max_trace_error {
            stats.max_trace_error = tr_err;
        }
        if tr_err > TRACE_DRIFT_LIMIT {
            return Err(OpenError::TraceDrift {
                t: t + h,
                trace_error: tr_err,
            });
        }
        if asym > HERMITICITY_DRIFT_LIMIT {
            return Err(OpenError::HermiticityDrift {
                t: t + h,
                asymmetry: asym,
            });
        }
        Ok(())
    };

    for k in 0..full_steps {
        let t = t0 + k as f64 * config.step;
        advance(&mut rho, t, config.step, &mut work, &mut stats, &mut window)?;
        let is_last = k + 1 == full_steps && remainder <= 1e-12 * config.step;
        if (k + 1) % stride == 0 && !is_last {
            emit(
                &rho,
                t0 + (k + 1) as f64 * config.step,
                &mut window,
                &mut on_sample,
            )?;
        }
    }
    if remainder > 1e-12 * config.step {
        let t = t0 + full_steps as f64 * config.step;
        advance(&mut rho, t, remainder, &mut work, &mut stats, &mut window)?;
    }
    emit(&rho, t_end, &mut window, &mut on_sample)?;

    let lab = from_frame(&rho, levels, omega_r * t_end);
    Ok((JointDensityMatrix { t: t_end, rho: lab }, stats))
}

fn to_frame(rho: &Array2<C64>, levels: usize, angle: f64) -> Vec<C64> {
    // rho~_{(s,m),(s',n)} = e^{+i angle m} rho e^{-i angle n}.
    let dim = 2 * levels;
    let mut out = vec![C64::new(0.0, 0.0); dim * dim];
    let phase: Vec<C64> = (0..levels)
        .map(|m| C64::from_polar(1.0, angle * m as f64))
        .collect();
    for i in 0..dim {
        let pm = phase[i % levels];
        for j in 0..dim {
            out[i * dim + j] = pm * rho[(i, j)] * phase[j % levels].conj();
        }
    }
    out
}

fn from_frame(rho: &[C64], levels: usize, angle: f64) -> Array2<C64> {
    let dim = 2 * levels;
    let mut out: Array2<C64> = Array2::zeros((dim, dim));
    let phase: Vec<C64> = (0..levels)
        .map(|m| C64::from_polar(1.0, angle * m as f64))
        .collect();
    for i in 0..dim {
        let pm = phase[i % levels].conj();
        for j in 0..dim {
            out[(i, j)] = pm * rho[i * dim + j] * phase[j % levels];
        }
    }
    out
}

fn trace_error_flat(rho: &[C64], dim: usize) -> f64 {
    let tr: C64 = (0..dim).map(|i| rho[i * dim + i]).sum();
    (tr - C64::new(1.0, 0.0)).norm()
}

/// Replaces rho by (rho + rho†)/2 and returns the largest asymmetry found.
fn resymmetrize(rho: &mut [C64], dim: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in i..dim {
            let upper = rho[i * dim + j];
            let lower = rho[j * dim + i];
            let asym = (upper - lower.conj()).norm();
            if asym > worst {
                worst = asym;
            }
            let mean = 0.5 * (upper + lower.conj());
            rho[i * dim + j] = mean;
            rho[j * dim + i] = mean.conj();
        }
    }
    worst
}

struct MasterWorkspace {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    probe: Vec<C64>,
}

impl MasterWorkspace {
    fn new(dim: usize) -> Self {
        let zero = || vec![C64::new(0.0, 0.0); dim * dim];
        MasterWorkspace {
            k1: zero(),
            k2: zero(),
            k3: zero(),
            k4: zero(),
            probe: zero(),
        }
    }

    fn step(
        &mut self,
        kernel: &RhsKernel,
        rates: &DecoherenceRates,
        levels: usize,
        t: f64,
        h: f64,
        rho: &mut [C64],
    ) {
        let half = 0.5 * h;
        kernel.apply(rates, levels, t, rho, &mut self.k1);
        for (p, (r, k)) in self.probe.iter_mut().zip(rho.iter().zip(&self.k1)) {
            *p = r + half * k;
        }
        kernel.apply(rates, levels, t + half, &self.probe, &mut self.k2);
        for (p, (r, k)) in self.probe.iter_mut().zip(rho.iter().zip(&self.k2)) {
            *p = r + half * k;
        }
        kernel.apply(rates, levels, t + half, &self.probe, &mut self.k3);
        for (p, (r, k)) in self.probe.iter_mut().zip(rho.iter().zip(&self.k3)) {
            *p = r + h * k;
        }
        kernel.apply(rates, levels, t + h, &self.probe, &mut self.k4);
        let w = h / 6.0;
        for i in 0..rho.len() {
            rho[i] += w * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// One qubit-projected branch of a density matrix: its probability and,
/// when the probability is above [`BRANCH_PROBABILITY_FLOOR`], the
/// normalized conditional oscillator state.
#[derive(Debug, Clone)]
pub struct ConditionedOscillator {
    pub probability: f64,
    pub rho: Option<Array2<C64>>,
}

/// Branch weights under projecting the qubit onto (|0> +- |1>)/sqrt(2),
/// without building the conditional states.
pub fn branch_probabilities(state: &JointDensityMatrix) -> (f64, f64) {
    let levels = state.levels();
    let rho = state.matrix();
    let mut diag = 0.0;
    let mut cross = 0.0;
    for m in 0..levels {
        diag += rho[(m, m)].re + rho[(levels + m, levels + m)].re;
        cross += rho[(m, levels + m)].re + rho[(levels + m, m)].re;
    }
    (0.5 * (diag + cross), 0.5 * (diag - cross))
}

/// Projects the qubit onto (|0> +- |1>)/sqrt(2), leaving the oscillator in
/// Lambda_+- / (2 P_+-) with
/// Lambda_+- = rho_00 + rho_11 +- (rho_01 + rho_10) (qubit blocks).
pub fn condition_on_qubit_open(
    state: &JointDensityMatrix,
) -> (ConditionedOscillator, ConditionedOscillator) {
    let levels = state.levels();
    let rho = state.matrix();
    let branch = |sign: f64| {
        let mut lambda: Array2<C64> = Array2::zeros((levels, levels));
        for m in 0..levels {
            for n in 0..levels {
                lambda[(m, n)] = rho[(m, n)]
                    + rho[(levels + m, levels + n)]
                    + sign * (rho[(m, levels + n)] + rho[(levels + m, n)]);
            }
        }
        let p = 0.5
            * (0..levels)
                .map(|m| lambda[(m, m)].re)
                .sum::<f64>();
        let rho = if p > BRANCH_PROBABILITY_FLOOR {
            let scale = C64::new(1.0 / (2.0 * p), 0.0);
            Some(lambda.mapv(|v| v * scale))
        } else {
            None
        };
        ConditionedOscillator {
            probability: p,
            rho,
        }
    };
    (branch(1.0), branch(-1.0))
}

/// Fidelities <cat|rho_branch|cat> of the conditional oscillator states
/// against the even / odd cat at the closed-form displacement alpha(t).
/// None when the branch weight is negligible or the target degenerate.
pub fn fidelity_open(
    state: &JointDensityMatrix,
    solution: &crate::analytic::RwaSolution,
) -> (Option<f64>, Option<f64>) {
    let alpha = solution.alpha(state.t());
    let (plus, minus) = condition_on_qubit_open(state);
    let against = |branch: &ConditionedOscillator, parity: Parity| -> Option<f64> {
        let rho = branch.rho.as_ref()?;
        let target = CatTarget::new(alpha, parity).ok()?;
        let cat = cat_vector(&target, rho.nrows() - 1);
        let amps = cat.amps();
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..rho.nrows() {
            for n in 0..rho.ncols() {
                acc += amps[m].conj() * rho[(m, n)] * amps[n];
            }
        }
        Some(acc.re)
    };
    (against(&plus, Parity::Even), against(&minus, Parity::Odd))
}

/// Logarithmic negativity across the qubit-oscillator split.
#[derive(Debug, Clone, Copy)]
pub struct LogNegativity {
    /// max(raw, 0): the reported entanglement measure.
    pub value: f64,
    /// log2 of the partial-transpose trace norm before clamping; slightly
    /// negative values measure numerical error on separable states.
    pub raw: f64,
}

/// Computes log2 || rho^{T_osc} ||_1 by transposing the oscillator indices
/// and summing the absolute eigenvalues of the (Hermitian) result.
pub fn log_negativity_numeric(
    state: &JointDensityMatrix,
) -> Result<LogNegativity, OpenError> {
    let levels = state.levels();
    let rho = state.matrix();
    let dim = 2 * levels;
    let mut pt: Array2<C64> = Array2::zeros((dim, dim));
    for s in 0..2 {
        for m in 0..levels {
            for sp in 0..2 {
                for n in 0..levels {
                    pt[(s * levels + m, sp * levels + n)] =
                        rho[(s * levels + n, sp * levels + m)];
                }
            }
        }
    }
    let vals = eigvalsh(&pt)?;
    let trace_norm: f64 = vals.iter().map(|v| v.abs()).sum();
    let raw = trace_norm.log2();
    Ok(LogNegativity {
        value: raw.max(0.0),
        raw,
    })
}
