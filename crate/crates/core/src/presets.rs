//! Named run configurations: each preset bundles system parameters, bath
//! rates, run horizon, and an optional built-in sweep for one reference
//! figure panel. All frequencies are in units of g_0 and times in 1/g_0.

use crate::model::{CouplingVariant, SystemParams};
use crate::open::DecoherenceRates;
use crate::specfun::bessel_j;
use std::f64::consts::{PI, TAU};

/// Drive amplitude used across the delta = g family.
pub const XI: f64 = 1.5271;

/// What a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    /// Closed-form entanglement entropy and log-negativity vs time.
    AnalyticEntanglement,
    /// Closed-system amplitude integration: occupation, reference-solution
    /// fidelity, conditional probabilities and cat fidelities vs time.
    ClosedDynamics,
    /// Closed-system state at the displacement peak, rendered as Wigner
    /// maps and rotated-quadrature distributions of both branches.
    ClosedTomography,
    /// Master-equation run reporting log-negativity vs time.
    OpenNegativity,
    /// Master-equation run reporting branch fidelities and probabilities.
    OpenCat,
    /// Master-equation run to the displacement peak, then branch Wigner
    /// maps.
    OpenWigner,
    /// Master-equation run to the displacement peak, then branch
    /// quadrature distributions at the fringe angle.
    OpenQuadrature,
}

/// Dissipation parameter singled out by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    GammaQ,
    KappaR,
    NbarQ,
    NbarR,
}

impl SweepParameter {
    pub fn key(self) -> &'static str {
        match self {
            SweepParameter::GammaQ => "gamma_q",
            SweepParameter::KappaR => "kappa_r",
            SweepParameter::NbarQ => "nbar_q",
            SweepParameter::NbarR => "nbar_r",
        }
    }

    pub fn parse(key: &str) -> Option<Self> {
        match key {
            "gamma_q" => Some(SweepParameter::GammaQ),
            "kappa_r" => Some(SweepParameter::KappaR),
            "nbar_q" => Some(SweepParameter::NbarQ),
            "nbar_r" => Some(SweepParameter::NbarR),
            _ => None,
        }
    }

    pub fn apply(self, rates: &mut DecoherenceRates, value: f64) {
        match self {
            SweepParameter::GammaQ => rates.gamma_q = value,
            SweepParameter::KappaR => rates.kappa_r = value,
            SweepParameter::NbarQ => rates.nbar_q = value,
            SweepParameter::NbarR => rates.nbar_r = value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// A complete, runnable configuration.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub kind: RunKind,
    pub params: SystemParams,
    pub rates: DecoherenceRates,
    /// Run horizon in g_0 t units (the figure axis).
    pub t_end_gt: f64,
    /// Row spacing of time-series output, in g_0 t units.
    pub sample_gt: f64,
    pub sweep: Option<Sweep>,
    /// Integrator step override in 1/g_0; None picks the solver default.
    pub step_override: Option<f64>,
    /// Fock truncation override; None picks the recommended truncation.
    pub truncation_override: Option<usize>,
}

/// System parameters with the drive tuned so the effective detuning equals
/// the effective coupling. With n_0 = 1 the coupling g = g_0 J_2(2 xi) does
/// not depend on omega_0, so delta = g pins omega_0 = (omega_r - g)/2.
pub fn delta_equals_g(omega_r: f64) -> SystemParams {
    let g = bessel_j(2, 2.0 * XI);
    SystemParams {
        omega_q: 0.0,
        omega_0: 0.5 * (omega_r - g),
        omega_r,
        xi: XI,
        g0: 1.0,
        variant: CouplingVariant::SigmaZ,
    }
}

fn bath(gamma_q: f64, nbar_q: f64, kappa_r: f64, nbar_r: f64) -> DecoherenceRates {
    DecoherenceRates {
        gamma_q,
        nbar_q,
        kappa_r,
        nbar_r,
    }
}

/// Coarser step for runs with a thermally occupied oscillator bath: the
/// truncation (and so the cost per step) grows with nbar_r while the
/// fastest Hamiltonian frequency does not, leaving step error well inside
/// the trace/Hermiticity budgets.
pub const THERMAL_STEP: f64 = 2.5e-4;

fn thermal_override(rates: &DecoherenceRates, sweep: &Option<Sweep>) -> Option<f64> {
    let swept_thermal = matches!(
        sweep,
        Some(Sweep {
            parameter: SweepParameter::NbarR,
            ..
        })
    );
    if rates.nbar_r >= 1.0 || swept_thermal {
        Some(THERMAL_STEP)
    } else {
        None
    }
}

fn closed_run(name: &'static str, summary: &'static str, omega_r: f64) -> Preset {
    Preset {
        name,
        summary,
        kind: RunKind::ClosedDynamics,
        params: delta_equals_g(omega_r),
        rates: DecoherenceRates::none(),
        t_end_gt: TAU,
        sample_gt: 0.01,
        sweep: None,
        step_override: None,
        truncation_override: Some(14),
    }
}

fn open_run(
    name: &'static str,
    summary: &'static str,
    kind: RunKind,
    rates: DecoherenceRates,
    t_end_gt: f64,
    sweep: Option<Sweep>,
) -> Preset {
    let step_override = thermal_override(&rates, &sweep);
    Preset {
        name,
        summary,
        kind,
        params: delta_equals_g(200.0),
        rates,
        t_end_gt,
        sample_gt: 0.02,
        sweep,
        step_override,
        truncation_override: None,
    }
}

fn sweep(parameter: SweepParameter, values: &[f64]) -> Option<Sweep> {
    Some(Sweep {
        parameter,
        values: values.to_vec(),
    })
}

/// The full preset catalog, in figure order.
pub fn all() -> Vec<Preset> {
    let mut v = Vec::new();

    v.push(Preset {
        name: "fig2",
        summary: "closed-form entanglement entropy and log-negativity vs time",
        kind: RunKind::AnalyticEntanglement,
        params: delta_equals_g(200.0),
        rates: DecoherenceRates::none(),
        t_end_gt: 26.0,
        sample_gt: 0.01,
        sweep: None,
        step_override: None,
        truncation_override: None,
    });

    v.push(closed_run(
        "fig3a_w30",
        "closed dynamics at omega_r/g0 = 30: occupation and reference fidelity",
        30.0,
    ));
    v.push(closed_run(
        "fig3a_w50",
        "closed dynamics at omega_r/g0 = 50: occupation and reference fidelity",
        50.0,
    ));
    v.push(closed_run(
        "fig3a_w200",
        "closed dynamics at omega_r/g0 = 200: occupation and reference fidelity",
        200.0,
    ));
    v.push(closed_run(
        "fig5",
        "closed dynamics at omega_r/g0 = 200: conditional qubit probabilities",
        200.0,
    ));

    v.push(Preset {
        name: "fig6",
        summary: "branch Wigner maps and quadrature fringes at the displacement peak",
        kind: RunKind::ClosedTomography,
        params: delta_equals_g(200.0),
        rates: DecoherenceRates::none(),
        t_end_gt: PI,
        sample_gt: PI,
        sweep: None,
        step_override: None,
        truncation_override: Some(14),
    });

    v.push(open_run(
        "fig7a",
        "log-negativity decay for three qubit relaxation rates",
        RunKind::OpenNegativity,
        bath(0.01, 0.0, 0.001, 0.0),
        26.0,
        sweep(SweepParameter::GammaQ, &[0.01, 0.05, 0.1]),
    ));
    v.push(open_run(
        "fig7b",
        "log-negativity decay for three oscillator decay rates",
        RunKind::OpenNegativity,
        bath(0.01, 0.0, 0.001, 0.0),
        26.0,
        sweep(SweepParameter::KappaR, &[0.001, 0.005, 0.01]),
    ));
    v.push(open_run(
        "fig7c",
        "log-negativity decay for three qubit bath occupations",
        RunKind::OpenNegativity,
        bath(0.01, 1.0, 0.001, 0.0),
        26.0,
        sweep(SweepParameter::NbarQ, &[1.0, 3.0, 5.0]),
    ));
    v.push(open_run(
        "fig7d",
        "log-negativity decay for three oscillator bath occupations",
        RunKind::OpenNegativity,
        bath(0.01, 0.0, 0.001, 1.0),
        26.0,
        sweep(SweepParameter::NbarR, &[1.0, 3.0, 5.0]),
    ));

    v.push(open_run(
        "fig8a",
        "branch fidelities vs time for three qubit relaxation rates",
        RunKind::OpenCat,
        bath(0.01, 0.0, 0.001, 0.0),
        TAU,
        sweep(SweepParameter::GammaQ, &[0.01, 0.05, 0.1]),
    ));
    v.push(open_run(
        "fig8b",
        "branch probabilities vs time for three qubit relaxation rates",
        RunKind::OpenCat,
        bath(0.01, 0.0, 0.001, 0.0),
        TAU,
        sweep(SweepParameter::GammaQ, &[0.01, 0.05, 0.1]),
    ));
    v.push(open_run(
        "fig8c",
        "branch fidelities vs time for three qubit bath occupations",
        RunKind::OpenCat,
        bath(0.01, 1.0, 0.001, 0.0),
        TAU,
        sweep(SweepParameter::NbarQ, &[1.0, 5.0, 8.0]),
    ));
    v.push(open_run(
        "fig8d",
        "branch probabilities vs time for three qubit bath occupations",
        RunKind::OpenCat,
        bath(0.01, 1.0, 0.001, 0.0),
        TAU,
        sweep(SweepParameter::NbarQ, &[1.0, 5.0, 8.0]),
    ));

    v.push(open_run(
        "fig9a",
        "branch fidelities vs time for three oscillator decay rates",
        RunKind::OpenCat,
        bath(0.01, 0.0, 0.001, 0.0),
        TAU,
        sweep(SweepParameter::KappaR, &[0.001, 0.005, 0.01]),
    ));
    v.push(open_run(
        "fig9b",
        "branch probabilities vs time for three oscillator decay rates",
        RunKind::OpenCat,
        bath(0.01, 0.0, 0.001, 0.0),
        TAU,
        sweep(SweepParameter::KappaR, &[0.001, 0.005, 0.01]),
    ));
    v.push(open_run(
        "fig9c",
        "branch fidelities vs time for three oscillator bath occupations",
        RunKind::OpenCat,
        bath(0.01, 0.0, 0.001, 1.0),
        TAU,
        sweep(SweepParameter::NbarR, &[1.0, 5.0, 8.0]),
    ));
    v.push(open_run(
        "fig9d",
        "branch probabilities vs time for three oscillator bath occupations",
        RunKind::OpenCat,
        bath(0.01, 0.0, 0.001, 1.0),
        TAU,
        sweep(SweepParameter::NbarR, &[1.0, 5.0, 8.0]),
    ));

    let wigner_panels: [(&'static str, DecoherenceRates, &'static str); 12] = [
        ("fig10a", bath(0.01, 0.0, 0.02, 0.0), "plus-branch Wigner map, gamma_q = 0.01"),
        ("fig10b", bath(0.1, 0.0, 0.02, 0.0), "plus-branch Wigner map, gamma_q = 0.1"),
        ("fig10c", bath(0.5, 0.0, 0.02, 0.0), "plus-branch Wigner map, gamma_q = 0.5"),
        ("fig10d", bath(0.1, 1.0, 0.02, 0.0), "plus-branch Wigner map, nbar_q = 1"),
        ("fig10e", bath(0.1, 4.0, 0.02, 0.0), "plus-branch Wigner map, nbar_q = 4"),
        ("fig10f", bath(0.1, 6.0, 0.02, 0.0), "plus-branch Wigner map, nbar_q = 6"),
        ("fig10g", bath(0.1, 0.0, 0.01, 0.0), "plus-branch Wigner map, kappa_r = 0.01"),
        ("fig10h", bath(0.1, 0.0, 0.05, 0.0), "plus-branch Wigner map, kappa_r = 0.05"),
        ("fig10i", bath(0.1, 0.0, 0.1, 0.0), "plus-branch Wigner map, kappa_r = 0.1"),
        ("fig10j", bath(0.1, 0.0, 0.02, 1.0), "plus-branch Wigner map, nbar_r = 1"),
        ("fig10k", bath(0.1, 0.0, 0.02, 3.0), "plus-branch Wigner map, nbar_r = 3"),
        ("fig10l", bath(0.1, 0.0, 0.02, 5.0), "plus-branch Wigner map, nbar_r = 5"),
    ];
    for (name, rates, summary) in wigner_panels {
        v.push(open_run(name, summary, RunKind::OpenWigner, rates, PI, None));
    }

    v.push(open_run(
        "fig11a",
        "quadrature fringes at the peak for four qubit relaxation rates",
        RunKind::OpenQuadrature,
        bath(0.01, 0.0, 0.001, 0.0),
        PI,
        sweep(SweepParameter::GammaQ, &[0.01, 0.1, 0.2, 0.5]),
    ));
    v.push(open_run(
        "fig11b",
        "quadrature fringes at the peak for four oscillator decay rates",
        RunKind::OpenQuadrature,
        bath(0.1, 0.0, 0.001, 0.0),
        PI,
        sweep(SweepParameter::KappaR, &[0.001, 0.01, 0.02, 0.05]),
    ));
    v.push(open_run(
        "fig11c",
        "quadrature fringes at the peak for four qubit bath occupations",
        RunKind::OpenQuadrature,
        bath(0.01, 1.0, 0.001, 0.0),
        PI,
        sweep(SweepParameter::NbarQ, &[1.0, 4.0, 8.0, 12.0]),
    ));
    v.push(open_run(
        "fig11d",
        "quadrature fringes at the peak for four oscillator bath occupations",
        RunKind::OpenQuadrature,
        bath(0.1, 0.0, 0.01, 1.0),
        PI,
        sweep(SweepParameter::NbarR, &[1.0, 2.0, 3.0, 5.0]),
    ));

    // Nanomechanical parameter set: omega_r = 2 pi x 58 MHz with
    // g0 = 2 pi x 2.3 MHz, kappa_r = 2 pi x 1.934 kHz, a qubit lifetime of
    // 100 us, and ten thermal phonons, all expressed in units of g0.
    let bench = bath(1.0 / (TAU * 230.0), 0.0, 1.934 / 2300.0, 10.0);
    v.push(Preset {
        name: "experiment",
        summary: "nanomechanical parameter set: branch fidelities and probabilities",
        kind: RunKind::OpenCat,
        params: delta_equals_g(58.0 / 2.3),
        rates: bench,
        t_end_gt: TAU,
        sample_gt: 0.02,
        sweep: None,
        step_override: thermal_override(&bench, &None),
        truncation_override: None,
    });

    v
}

pub fn find(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}
