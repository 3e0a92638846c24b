//! Resolving a run: preset lookup, config-file parsing, flag merging, and
//! the validation shared by both paths. Config files are flat key = value
//! text under [system], [integrator], [sweep], and [output] headers, with
//! every frequency and rate in units of g0.

use catsim_core::model::{effective_params, CouplingVariant, SystemParams};
use catsim_core::open::DecoherenceRates;
use catsim_core::presets::{self, RunKind, SweepParameter, XI};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

/// A fully resolved invocation: what to run, how to integrate it, and
/// where the artifacts go. `step` and `truncation` of `None` defer to the
/// solver defaults, resolved per sweep point.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub name: String,
    pub kind: RunKind,
    pub params: SystemParams,
    pub rates: DecoherenceRates,
    pub t_end_gt: f64,
    pub sample_gt: f64,
    pub sweep: Option<(SweepParameter, Vec<f64>)>,
    pub step: Option<f64>,
    pub truncation: Option<usize>,
    pub out_dir: PathBuf,
    pub workers: usize,
}

pub fn kind_name(kind: RunKind) -> &'static str {
    match kind {
        RunKind::AnalyticEntanglement => "analytic_entanglement",
        RunKind::ClosedDynamics => "closed_dynamics",
        RunKind::ClosedTomography => "closed_tomography",
        RunKind::OpenNegativity => "open_negativity",
        RunKind::OpenCat => "open_cat",
        RunKind::OpenWigner => "open_wigner",
        RunKind::OpenQuadrature => "open_quadrature",
    }
}

fn parse_kind(value: &str) -> Result<RunKind, String> {
    Ok(match value {
        "analytic_entanglement" => RunKind::AnalyticEntanglement,
        "closed_dynamics" => RunKind::ClosedDynamics,
        "closed_tomography" => RunKind::ClosedTomography,
        "open_negativity" => RunKind::OpenNegativity,
        "open_cat" => RunKind::OpenCat,
        "open_wigner" => RunKind::OpenWigner,
        "open_quadrature" => RunKind::OpenQuadrature,
        other => {
            return Err(format!(
                "unknown kind {other:?}; valid kinds: analytic_entanglement, \
                 closed_dynamics, closed_tomography, open_negativity, open_cat, \
                 open_wigner, open_quadrature"
            ))
        }
    })
}

/// Whether the kind integrates the master equation (as opposed to pure
/// amplitudes or the closed form alone).
pub fn open_kind(kind: RunKind) -> bool {
    matches!(
        kind,
        RunKind::OpenNegativity
            | RunKind::OpenCat
            | RunKind::OpenWigner
            | RunKind::OpenQuadrature
    )
}

pub fn variant_name(variant: CouplingVariant) -> &'static str {
    match variant {
        CouplingVariant::SigmaZ => "sigma_z",
        CouplingVariant::SigmaX => "sigma_x",
        CouplingVariant::JaynesCummings => "jaynes_cummings",
    }
}

fn parse_variant(value: &str) -> Result<CouplingVariant, String> {
    Ok(match value {
        "sigma_z" => CouplingVariant::SigmaZ,
        "sigma_x" => CouplingVariant::SigmaX,
        "jaynes_cummings" => CouplingVariant::JaynesCummings,
        other => {
            return Err(format!(
                "unknown variant {other:?}; valid variants: sigma_z, sigma_x, \
                 jaynes_cummings"
            ))
        }
    })
}

pub fn from_preset(name: &str) -> Result<RunSpec, String> {
    let Some(preset) = presets::find(name) else {
        let mut names: Vec<&str> = presets::all().iter().map(|p| p.name).collect();
        names.sort_unstable();
        return Err(format!(
            "unknown preset {name:?}; valid presets: {}",
            names.join(", ")
        ));
    };
    Ok(RunSpec {
        name: preset.name.to_string(),
        kind: preset.kind,
        params: preset.params,
        rates: preset.rates,
        t_end_gt: preset.t_end_gt,
        sample_gt: preset.sample_gt,
        sweep: preset.sweep.map(|s| (s.parameter, s.values)),
        step: preset.step_override,
        truncation: preset.truncation_override,
        out_dir: PathBuf::from("out"),
        workers: 0,
    })
}

pub fn from_file(path: &Path) -> Result<RunSpec, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("run")
        .to_string();
    parse_config(&text, name)
}

/// `--sweep key=v1,v2,...`: the same grammar as a [sweep] line.
pub fn parse_sweep_flag(flag: &str) -> Result<(SweepParameter, Vec<f64>), String> {
    let Some((key, list)) = flag.split_once('=') else {
        return Err(format!(
            "sweep must look like parameter=v1,v2,... got {flag:?}"
        ));
    };
    parse_sweep_axis(key.trim(), list)
}

fn parse_sweep_axis(key: &str, list: &str) -> Result<(SweepParameter, Vec<f64>), String> {
    let Some(parameter) = SweepParameter::parse(key) else {
        return Err(format!(
            "unknown sweep parameter {key:?}; valid parameters: gamma_q, \
             kappa_r, nbar_q, nbar_r"
        ));
    };
    let mut values = Vec::new();
    for piece in list.split(',') {
        let piece = piece.trim();
        let value: f64 = piece
            .parse()
            .map_err(|_| format!("sweep value {piece:?} is not a number"))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(format!("sweep value {value} must be finite and >= 0"));
        }
        if values.contains(&value) {
            return Err(format!(
                "duplicate sweep value {value}: points must map to distinct files"
            ));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err("a sweep needs at least one value".into());
    }
    Ok((parameter, values))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    System,
    Integrator,
    Sweep,
    Output,
}

fn parse_config(text: &str, name: String) -> Result<RunSpec, String> {
    let mut section = None;
    let mut system: Vec<(String, String)> = Vec::new();
    let mut integrator: Vec<(String, String)> = Vec::new();
    let mut sweep_lines: Vec<(String, String)> = Vec::new();
    let mut output: Vec<(String, String)> = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let Some(header) = inner.strip_suffix(']') else {
                return Err(format!("line {}: unterminated section header", index + 1));
            };
            section = Some(match header {
                "system" => Section::System,
                "integrator" => Section::Integrator,
                "sweep" => Section::Sweep,
                "output" => Section::Output,
                other => {
                    return Err(format!(
                        "line {}: unknown section [{other}]; valid sections: \
                         [system], [integrator], [sweep], [output]",
                        index + 1
                    ))
                }
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "line {}: expected key = value, got {line:?}",
                index + 1
            ));
        };
        let entry = (key.trim().to_string(), value.trim().to_string());
        match section {
            None => {
                return Err(format!(
                    "line {}: key outside any section; start with [system]",
                    index + 1
                ))
            }
            Some(Section::System) => system.push(entry),
            Some(Section::Integrator) => integrator.push(entry),
            Some(Section::Sweep) => sweep_lines.push(entry),
            Some(Section::Output) => output.push(entry),
        }
    }

    // A preset key seeds every field; explicit keys then override it.
    let preset_base = system
        .iter()
        .find(|(k, _)| k == "preset")
        .map(|(_, v)| from_preset(v))
        .transpose()?;
    let has_base = preset_base.is_some();
    let mut spec = preset_base.unwrap_or(RunSpec {
        name: String::new(),
        kind: RunKind::ClosedDynamics,
        params: SystemParams {
            omega_q: 0.0,
            omega_0: f64::NAN,
            omega_r: f64::NAN,
            xi: XI,
            g0: 1.0,
            variant: CouplingVariant::SigmaZ,
        },
        rates: DecoherenceRates::none(),
        t_end_gt: TAU,
        sample_gt: f64::NAN,
        sweep: None,
        step: None,
        truncation: None,
        out_dir: PathBuf::from("out"),
        workers: 0,
    });
    spec.name = name;

    let parse_f64 = |key: &str, value: &str| -> Result<f64, String> {
        value
            .parse::<f64>()
            .map_err(|_| format!("{key}: expected a number, got {value:?}"))
    };

    let (mut gave_omega_0, mut gave_omega_r) = (has_base, has_base);
    for (key, value) in &system {
        match key.as_str() {
            "preset" => {}
            "omega_q" => spec.params.omega_q = parse_f64(key, value)?,
            "omega_0" => {
                spec.params.omega_0 = parse_f64(key, value)?;
                gave_omega_0 = true;
            }
            "omega_r" => {
                spec.params.omega_r = parse_f64(key, value)?;
                gave_omega_r = true;
            }
            "xi" => spec.params.xi = parse_f64(key, value)?,
            "g0" => spec.params.g0 = parse_f64(key, value)?,
            "variant" => spec.params.variant = parse_variant(value)?,
            "gamma_q" => spec.rates.gamma_q = parse_f64(key, value)?,
            "nbar_q" => spec.rates.nbar_q = parse_f64(key, value)?,
            "kappa_r" => spec.rates.kappa_r = parse_f64(key, value)?,
            "nbar_r" => spec.rates.nbar_r = parse_f64(key, value)?,
            other => {
                return Err(format!(
                    "unknown [system] key {other:?}; valid keys: preset, omega_q, \
                     omega_0, omega_r, xi, g0, variant, gamma_q, nbar_q, kappa_r, \
                     nbar_r"
                ))
            }
        }
    }
    if !(gave_omega_0 && gave_omega_r) {
        return Err(
            "[system] needs omega_0 and omega_r (or a preset to start from)".into(),
        );
    }

    let mut sample_gt_given = has_base;
    for (key, value) in &integrator {
        match key.as_str() {
            "step" => {
                let step = parse_f64(key, value)?;
                if !(step > 0.0 && step.is_finite()) {
                    return Err(format!("step must be positive and finite, got {step}"));
                }
                spec.step = Some(step);
            }
            "truncation" => {
                let n_d: usize = value
                    .parse()
                    .map_err(|_| format!("truncation: expected an integer, got {value:?}"))?;
                if n_d == 0 {
                    return Err("truncation must retain at least level 1".into());
                }
                spec.truncation = Some(n_d);
            }
            "sample_gt" => {
                spec.sample_gt = parse_f64(key, value)?;
                sample_gt_given = true;
            }
            "t_end_gt" => spec.t_end_gt = parse_f64(key, value)?,
            other => {
                return Err(format!(
                    "unknown [integrator] key {other:?}; valid keys: step, \
                     truncation, sample_gt, t_end_gt"
                ))
            }
        }
    }

    if sweep_lines.len() > 1 {
        return Err("a sweep has a single axis; give one [sweep] key".into());
    }
    if let Some((key, list)) = sweep_lines.first() {
        spec.sweep = Some(parse_sweep_axis(key, list)?);
    }

    for (key, value) in &output {
        match key.as_str() {
            "kind" => spec.kind = parse_kind(value)?,
            "dir" => spec.out_dir = PathBuf::from(value),
            other => {
                return Err(format!(
                    "unknown [output] key {other:?}; valid keys: kind, dir"
                ))
            }
        }
    }

    if !sample_gt_given {
        spec.sample_gt = match spec.kind {
            RunKind::AnalyticEntanglement | RunKind::ClosedDynamics => 0.01,
            RunKind::OpenNegativity | RunKind::OpenCat => 0.02,
            // Endpoint-only kinds need no intermediate samples.
            RunKind::ClosedTomography | RunKind::OpenWigner | RunKind::OpenQuadrature => {
                spec.t_end_gt
            }
        };
    }

    Ok(spec)
}

/// Checks every cross-field rule after flags are merged in; errors here are
/// usage errors.
pub fn validate(spec: &RunSpec) -> Result<(), String> {
    spec.params.validate().map_err(|e| e.to_string())?;
    spec.rates.validate().map_err(|e| e.to_string())?;
    if spec.params.variant == CouplingVariant::JaynesCummings {
        return Err(
            "the excitation-exchange variant is a library-level cross-check; the \
             driver runs the longitudinal protocol (variant sigma_z or sigma_x)"
                .into(),
        );
    }
    if !(spec.t_end_gt > 0.0 && spec.t_end_gt.is_finite()) {
        return Err(format!(
            "t_end_gt must be positive and finite, got {}",
            spec.t_end_gt
        ));
    }
    if !(spec.sample_gt > 0.0 && spec.sample_gt.is_finite()) {
        return Err(format!(
            "sample_gt must be positive and finite, got {}",
            spec.sample_gt
        ));
    }
    let eff = effective_params(&spec.params);
    if !(eff.delta > 0.0 && eff.delta.is_finite()) {
        return Err(format!(
            "the resolved detuning delta = omega_r - 2 n0 omega_0 = {:.6e} must be \
             positive: the protocol parks the drive slightly below the n0-th \
             harmonic",
            eff.delta
        ));
    }
    if !(eff.g > 0.0) {
        return Err(format!(
            "the effective coupling g0 J_(2 n0)(2 xi) = {:.6e} must be positive; \
             adjust xi",
            eff.g
        ));
    }
    Ok(())
}
