//! Command implementations.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use magsqueeze::dynamics::LinearizedModel;
use magsqueeze::optimize::{
    best_squeezing, power_thresholds, spectrum_curve, sweep_detuning, sweep_kappa, sweep_omega_phi,
    temperature_ceiling, temperature_curves, PhaseMode, SpectrumCurve, SqueezingOptimum, ThresholdResult,
};
use magsqueeze::params::{OperatingPoint, PhysicalParams};
use magsqueeze::spectra::{linspace, nsd_db, spectrum, VACUUM};
use magsqueeze::verify::{run_checks, VerifyOptions};
use serde_json::{json, Value};

use crate::config::{load_config, RunConfig, SweepKind};
use crate::error::CliError;
use crate::output::{num, OutputDir};
use crate::plot;
use crate::report::{config_hash, Headline, RunReport, StabilitySummary, Validity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Spectrum,
    Sweep,
    OptimizePhase,
    Stability,
    Threshold,
    Ceiling,
    Params,
    Verify,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Spectrum => "spectrum",
            CommandKind::Sweep => "sweep",
            CommandKind::OptimizePhase => "optimize-phase",
            CommandKind::Stability => "stability",
            CommandKind::Threshold => "threshold",
            CommandKind::Ceiling => "ceiling",
            CommandKind::Params => "params",
            CommandKind::Verify => "verify",
        }
    }
}

/// `--grid NxM`: N ω points, M points on the second axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub n: usize,
    pub m: Option<usize>,
}

impl FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| -> Result<usize, String> {
            match t.trim().parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(format!("invalid grid size `{s}`: expected N or NxM with positive integers")),
            }
        };
        match s.split_once(['x', 'X']) {
            Some((a, b)) => Ok(Self {
                n: parse(a)?,
                m: Some(parse(b)?),
            }),
            None => Ok(Self { n: parse(s)?, m: None }),
        }
    }
}

/// `--phi 0.3`, `--phi 0.3pi` or `--phi 0.3π`, all meaning φ = 0.3π.
pub fn parse_phi(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let t = t
        .strip_suffix("pi")
        .or_else(|| t.strip_suffix('π'))
        .unwrap_or(t)
        .trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("invalid phase `{s}`: expected a multiple of π such as 0.3")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: CommandKind,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub grid: Option<GridSize>,
    /// Phase override as a multiple of π.
    pub phi_over_pi: Option<f64>,
    pub global_phi: bool,
}

/// Report (when the configuration could be loaded) and the failure, if any.
#[derive(Debug)]
pub struct Outcome {
    pub report: Option<RunReport>,
    pub error: Option<CliError>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, CliError::exit_code)
    }
}

struct Ctx<'a> {
    inv: &'a Invocation,
    cfg: RunConfig,
    params: PhysicalParams<f64>,
    op: OperatingPoint<f64>,
    model: LinearizedModel<f64>,
    wb: f64,
}

impl Ctx<'_> {
    fn lib(&self, e: magsqueeze::Error) -> CliError {
        CliError::from_library(e, self.wb)
    }

    fn omegas(&self) -> Result<Vec<f64>, CliError> {
        self.cfg.omega_grid(self.inv.grid.map(|g| g.n))
    }

    fn second_axis(&self) -> Option<usize> {
        self.inv.grid.and_then(|g| g.m)
    }

    fn fixed_phi(&self) -> f64 {
        PI * self
            .inv
            .phi_over_pi
            .or(self.cfg.sweep.phi_over_pi)
            .unwrap_or(0.3)
    }

    fn global_phi(&self) -> bool {
        self.inv.global_phi || self.cfg.sweep.global_phi.unwrap_or(false)
    }
}

pub fn execute(inv: &Invocation) -> Outcome {
    let (cfg, bytes) = match load_config(&inv.config) {
        Ok(v) => v,
        Err(e) => {
            return Outcome {
                report: None,
                error: Some(e),
            }
        }
    };
    match prepare(inv, cfg, &bytes) {
        Ok((ctx, mut out, mut report)) => {
            let result = dispatch(&ctx, &mut out, &mut report);
            report.files = out.files.clone();
            let written = out.report(&report);
            let error = result.err().or_else(|| written.err());
            Outcome {
                report: Some(report),
                error,
            }
        }
        Err(e) => Outcome {
            report: None,
            error: Some(e),
        },
    }
}

fn prepare<'a>(inv: &'a Invocation, cfg: RunConfig, bytes: &[u8]) -> Result<(Ctx<'a>, OutputDir, RunReport), CliError> {
    let params = cfg.physical_params()?;
    let wb = params.omega_b;
    let lib = |e| CliError::from_library(e, wb);
    let op = params.operating_point().map_err(lib)?;
    let model = LinearizedModel::build(&op.modes, op.coupling, &op.occupations).map_err(lib)?;
    let stability = model.stability().map_err(lib)?;
    let out = OutputDir::create(&inv.out)?;
    let report = RunReport {
        command: inv.command.name().into(),
        config_hash: config_hash(bytes),
        stability: Some(StabilitySummary::new(&stability, wb)),
        headline: None,
        validity: Some(Validity::new(&op, params.kerr, params.constants.spin_s)),
        files: Vec::new(),
        details: Value::Null,
        config: cfg.echo(),
        summary: Vec::new(),
    };
    Ok((
        Ctx {
            inv,
            cfg,
            params,
            op,
            model,
            wb,
        },
        out,
        report,
    ))
}

fn dispatch(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    match ctx.inv.command {
        CommandKind::Spectrum => cmd_spectrum(ctx, out, report),
        CommandKind::Sweep => cmd_sweep(ctx, out, report),
        CommandKind::OptimizePhase => cmd_optimize_phase(ctx, out, report),
        CommandKind::Stability => cmd_stability(ctx, out, report),
        CommandKind::Threshold => cmd_threshold(ctx, out, report),
        CommandKind::Ceiling => cmd_ceiling(ctx, out, report),
        CommandKind::Params => cmd_params(ctx, out, report),
        CommandKind::Verify => cmd_verify(ctx, out, report),
    }
}

/// Dumps the stability analysis and fails unless the base model is stable.
fn require_stable(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    let stability = ctx.model.stability().map_err(|e| ctx.lib(e))?;
    if stability.is_strictly_stable() {
        return Ok(());
    }
    let summary = StabilitySummary::new(&stability, ctx.wb);
    out.json("stability.json", &summary)?;
    report.summary.push(format!("unstable: max Re λ = {:.6e} ω_b", summary.max_real_part_over_omega_b));
    for [re, im] in &summary.eigenvalues_over_omega_b {
        report.summary.push(format!("  λ/ω_b = {re:+.6e} {im:+.6e}i"));
    }
    Err(CliError::Unstable {
        max_real_part_over_omega_b: summary.max_real_part_over_omega_b,
    })
}

fn db(s: f64) -> String {
    nsd_db(s).map(num).unwrap_or_default()
}

fn above(s: f64) -> String {
    (s > VACUUM).to_string()
}

fn headline_line(h: &Headline) -> String {
    format!(
        "min S = {:.4} ({:.2} dB) at ω/ω_b = {:.4}, φ/π = {:.4}",
        h.min_s, h.min_s_db, h.omega_over_omega_b, h.phi_over_pi
    )
}

fn set_headline(report: &mut RunReport, h: Headline) {
    report.summary.push(headline_line(&h));
    report.headline = Some(h);
}

fn optimum_json(o: &SqueezingOptimum<f64>, wb: f64) -> Value {
    json!({
        "s_min": o.s_min,
        "db": o.db,
        "omega_over_omega_b": o.omega / wb,
        "phi_over_pi": o.phi / PI,
    })
}

fn cmd_spectrum(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    require_stable(ctx, out, report)?;
    let omegas = ctx.omegas()?;
    let phases: Vec<f64> = match ctx.inv.phi_over_pi {
        Some(p) => vec![p],
        None => ctx.cfg.grid.phases_over_pi.clone().unwrap_or_else(|| vec![0.3, 0.6, 0.9]),
    };
    let phis: Vec<f64> = phases.iter().map(|p| p * PI).collect();
    let res = spectrum(&ctx.model, &omegas, &phis).map_err(|e| ctx.lib(e))?;
    let mut rows = Vec::with_capacity(res.values.len());
    for (i, w) in res.omega_over_omega_b.iter().enumerate() {
        for (j, p) in res.phi_over_pi.iter().enumerate() {
            let k = i * phis.len() + j;
            rows.push(vec![num(*w), num(*p), num(res.values[k]), num(res.values_db[k])]);
        }
    }
    out.csv("spectrum.csv", &["omega_over_omega_b", "phi_over_pi", "S", "S_dB"], &rows)?;
    let per_phase: Vec<Value> = (0..phis.len())
        .map(|j| {
            let (i, s) = (0..omegas.len())
                .map(|i| (i, res.get(i, j)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            json!({
                "phi_over_pi": res.phi_over_pi[j],
                "min_s": s,
                "omega_over_omega_b": res.omega_over_omega_b[i],
                "max_s": (0..omegas.len()).map(|i| res.get(i, j)).fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect();
    let (s, w, p) = res.minimum();
    report.details = json!({ "n_omega": omegas.len(), "phases_over_pi": phases, "per_phase": per_phase });
    report.summary.push(format!("spectrum: {} ω × {} φ", omegas.len(), phis.len()));
    set_headline(report, Headline::new(s, w, p));
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    require_stable(ctx, out, report)?;
    let kind = ctx.cfg.sweep.kind.unwrap_or(SweepKind::OmegaPhi);
    let omegas = ctx.omegas()?;
    let lib = |e| ctx.lib(e);
    match kind {
        SweepKind::OmegaPhi => {
            let phis = ctx.cfg.phi_grid(ctx.second_axis());
            let grid = sweep_omega_phi(&ctx.params, &omegas, &phis).map_err(lib)?;
            let mut rows = Vec::with_capacity(grid.points.len());
            for (i, w) in grid.axes[0].values.iter().enumerate() {
                for (j, p) in grid.axes[1].values.iter().enumerate() {
                    let s = grid.get(i, j).s.expect("stable grid");
                    rows.push(vec![num(*w), num(*p), num(s), db(s), above(s)]);
                }
            }
            out.csv(
                "sweep.csv",
                &["omega_over_omega_b", "phi_over_pi", "S", "S_dB", "above_vacuum"],
                &rows,
            )?;
            out.text("sweep_plot.py", &plot::heatmap("omega_over_omega_b", "phi_over_pi", "φ/π"))?;
            let min = grid.minimum().expect("non-empty grid");
            report.details = json!({
                "kind": "omega_phi",
                "shape": [omegas.len(), phis.len()],
                "created_unix": grid.provenance.created_unix,
            });
            report.summary.push(format!("sweep ω × φ: {} × {}", omegas.len(), phis.len()));
            set_headline(report, Headline::new(min.s, min.coords.0, min.coords.1));
        }
        SweepKind::Detuning => {
            let s = &ctx.cfg.sweep;
            let deltas = linspace(
                s.delta_a_min_over_omega_b.unwrap_or(-1.5) * ctx.wb,
                s.delta_a_max_over_omega_b.unwrap_or(1.5) * ctx.wb,
                ctx.second_axis().or(s.n_delta_a).unwrap_or(121),
            );
            let phi = ctx.fixed_phi();
            let grid = sweep_detuning(&ctx.params, &deltas, &omegas, phi).map_err(lib)?;
            let mut rows = Vec::with_capacity(grid.points.len());
            for (i, d) in grid.axes[0].values.iter().enumerate() {
                for (j, w) in grid.axes[1].values.iter().enumerate() {
                    let q = grid.get(i, j);
                    let (sv, sd, av) = match q.s {
                        Some(v) => (num(v), db(v), above(v)),
                        None => (String::new(), String::new(), String::new()),
                    };
                    rows.push(vec![num(*d), num(*w), num(phi / PI), sv, sd, av, q.stable.to_string()]);
                }
            }
            out.csv(
                "sweep.csv",
                &["delta_a_over_omega_b", "omega_over_omega_b", "phi_over_pi", "S", "S_dB", "above_vacuum", "stable"],
                &rows,
            )?;
            out.text("sweep_plot.py", &plot::heatmap("omega_over_omega_b", "delta_a_over_omega_b", "Δ_a/ω_b"))?;
            let unstable_rows = (0..deltas.len()).filter(|&i| !grid.get(i, 0).stable).count();
            report.summary.push(format!(
                "sweep Δ_a × ω: {} × {}, φ = {:.3}π, {} unstable detunings",
                deltas.len(),
                omegas.len(),
                phi / PI,
                unstable_rows
            ));
            let min = grid.minimum();
            report.details = json!({
                "kind": "detuning",
                "shape": [deltas.len(), omegas.len()],
                "phi_over_pi": phi / PI,
                "unstable_detunings": unstable_rows,
                "optimum_delta_a_over_omega_b": min.map(|m| m.coords.0),
                "created_unix": grid.provenance.created_unix,
            });
            if let Some(m) = min {
                report.summary.push(format!("optimum Δ_a = {:.4} ω_b", m.coords.0));
                set_headline(report, Headline::new(m.s, m.coords.1, phi / PI));
            }
        }
        SweepKind::Kappa => {
            let kappas: Vec<f64> = ctx
                .cfg
                .sweep
                .kappa_a_over_omega_b
                .clone()
                .unwrap_or_else(|| vec![0.2, 0.5, 1.0])
                .iter()
                .map(|k| k * ctx.wb)
                .collect();
            let mode = if ctx.global_phi() { PhaseMode::Global } else { PhaseMode::Fixed(ctx.fixed_phi()) };
            let curves = sweep_kappa(&ctx.params, &kappas, &omegas, mode).map_err(lib)?;
            family_output(ctx, out, report, "kappa_a_over_omega_b", "κ_a/ω_b", &curves)?;
        }
        SweepKind::Temperature => {
            let temps = ctx.cfg.sweep.temperatures_k.clone().unwrap_or_else(|| vec![0.02, 0.2, 0.5]);
            let mode = if ctx.global_phi() {
                PhaseMode::Global
            } else if ctx.inv.phi_over_pi.is_some() {
                PhaseMode::Fixed(ctx.fixed_phi())
            } else {
                PhaseMode::PerOmega
            };
            let curves = temperature_curves(&ctx.params, &temps, &omegas, mode).map_err(lib)?;
            family_output(ctx, out, report, "temperature_k", "T (K)", &curves)?;
        }
    }
    Ok(())
}

fn family_output(
    ctx: &Ctx,
    out: &mut OutputDir,
    report: &mut RunReport,
    column: &str,
    label: &str,
    curves: &[SpectrumCurve<f64>],
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut members = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None;
    for c in curves {
        let stable = c.stability.is_strictly_stable();
        for (k, w) in c.omega_over_omega_b.iter().enumerate() {
            if stable {
                let s = c.s[k];
                rows.push(vec![
                    num(c.parameter),
                    num(*w),
                    num(c.phi_over_pi[k]),
                    num(s),
                    db(s),
                    above(s),
                    "true".into(),
                ]);
            } else {
                let blank = String::new;
                rows.push(vec![num(c.parameter), num(*w), blank(), blank(), blank(), blank(), "false".into()]);
            }
        }
        let min = c.minimum();
        if let Some(m) = min {
            if best.is_none_or(|b| m.2 < b.2) {
                best = Some(m);
            }
        }
        members.push(json!({
            "parameter": c.parameter,
            "stable": stable,
            "max_real_part_over_omega_b": c.stability.max_real_part / ctx.wb,
            "min_s": min.map(|m| m.2),
            "omega_over_omega_b": min.map(|m| m.0),
            "phi_over_pi": min.map(|m| m.1),
        }));
        report.summary.push(match min {
            Some((w, p, s)) => format!("{label} = {:.4}: min S = {s:.4} at ω/ω_b = {w:.4}, φ/π = {p:.4}", c.parameter),
            None => format!("{label} = {:.4}: unstable", c.parameter),
        });
    }
    out.csv(
        "sweep.csv",
        &[column, "omega_over_omega_b", "phi_over_pi", "S", "S_dB", "above_vacuum", "stable"],
        &rows,
    )?;
    out.text("sweep_plot.py", &plot::family(column, label))?;
    report.details = json!({ "kind": column, "members": members });
    if let Some((w, p, s)) = best {
        set_headline(report, Headline::new(s, w, p));
    }
    Ok(())
}

fn cmd_optimize_phase(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    require_stable(ctx, out, report)?;
    let omegas = ctx.omegas()?;
    let lib = |e| ctx.lib(e);
    let mode = if ctx.global_phi() { PhaseMode::Global } else { PhaseMode::PerOmega };
    let curve = spectrum_curve(ctx.params.temperature, &ctx.model, &omegas, mode).map_err(lib)?;
    let rows: Vec<Vec<String>> = (0..omegas.len())
        .map(|k| {
            let s = curve.s[k];
            vec![num(curve.omega_over_omega_b[k]), num(curve.phi_over_pi[k]), num(s), db(s)]
        })
        .collect();
    out.csv("optimal_phase.csv", &["omega_over_omega_b", "phi_over_pi", "S", "S_dB"], &rows)?;
    let best = best_squeezing(&ctx.model, &omegas).map_err(lib)?;
    report.details = json!({
        "mode": if ctx.global_phi() { "global" } else { "per_omega" },
        "refined_optimum": optimum_json(&best, ctx.wb),
    });
    report.summary.push(format!(
        "optimize-phase: {} ω, {} φ",
        omegas.len(),
        if ctx.global_phi() { "global" } else { "per-ω" }
    ));
    if ctx.global_phi() {
        let (w, p, s) = curve.minimum().expect("non-empty curve");
        set_headline(report, Headline::new(s, w, p));
    } else {
        set_headline(report, Headline::new(best.s_min, best.omega / ctx.wb, best.phi / PI));
    }
    Ok(())
}

fn cmd_stability(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    let stability = ctx.model.stability().map_err(|e| ctx.lib(e))?;
    let summary = StabilitySummary::new(&stability, ctx.wb);
    out.json("stability.json", &summary)?;
    report.summary.push(format!(
        "stability: {} (max Re λ = {:.6e} ω_b, margin = {:.6e} ω_b)",
        summary.verdict, summary.max_real_part_over_omega_b, summary.margin_over_omega_b
    ));
    report.details = json!({ "coupling_over_omega_b": ctx.op.coupling.norm() / ctx.wb });
    Ok(())
}

fn threshold_json(r: &ThresholdResult<f64>, scale: f64, wb: f64) -> Value {
    json!({
        "quantity": r.quantity,
        "value": r.value * scale,
        "bracket": [r.bracket.0 * scale, r.bracket.1 * scale],
        "iterations": r.iterations,
        "best_at": r.best_at * scale,
        "best": optimum_json(&r.best, wb),
    })
}

fn threshold_omegas(ctx: &Ctx) -> Result<Vec<f64>, CliError> {
    ctx.cfg.omega_grid(ctx.cfg.threshold.n_omega.or(Some(401)))
}

fn cmd_threshold(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    let t = &ctx.cfg.threshold;
    let bracket = (t.power_min_mw.unwrap_or(10.0) * 1e-3, t.power_max_mw.unwrap_or(2000.0) * 1e-3);
    let omegas = threshold_omegas(ctx)?;
    let r = power_thresholds(&ctx.params, bracket, &omegas).map_err(|e| ctx.lib(e))?;
    let eff = &r.effective_fixed;
    let bare = match &r.bare_fixed {
        Ok(b) => threshold_json(b, 1e3, ctx.wb),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let value = json!({
        "unit": "mW",
        "effective_detuning_fixed": threshold_json(eff, 1e3, ctx.wb),
        "bare_detuning_fixed": bare,
        "delta_m_effective_over_omega_b": r.effective_detuning / ctx.wb,
        "delta_m_bare_over_omega_b": r.bare_detuning / ctx.wb,
    });
    out.json("threshold.json", &value)?;
    report.summary.push(format!(
        "P_max = {:.1} mW with Δ̃_m fixed; best {:.2} dB at {:.1} mW",
        eff.value * 1e3,
        eff.best.db,
        eff.best_at * 1e3
    ));
    match &r.bare_fixed {
        Ok(b) => report.summary.push(format!(
            "P_max = {:.1} mW with Δ_m fixed; best {:.2} dB at {:.1} mW",
            b.value * 1e3,
            b.best.db,
            b.best_at * 1e3
        )),
        Err(e) => report.summary.push(format!("with Δ_m fixed: {e}")),
    }
    report.details = value;
    report.headline = Some(Headline::new(eff.best.s_min, eff.best.omega / ctx.wb, eff.best.phi / PI));
    Ok(())
}

fn cmd_ceiling(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    let t = &ctx.cfg.threshold;
    let bracket = (t.temperature_min_k.unwrap_or(0.02), t.temperature_max_k.unwrap_or(2.0));
    let omegas = threshold_omegas(ctx)?;
    let r = temperature_ceiling(&ctx.params, bracket, &omegas).map_err(|e| ctx.lib(e))?;
    let mut value = threshold_json(&r, 1.0, ctx.wb);
    value["unit"] = json!("K");
    out.json("ceiling.json", &value)?;
    report.summary.push(format!(
        "T_max = {:.3} K (bracket {:.4}..{:.4} K); at {:.3} K min S = {:.4}",
        r.value, r.bracket.0, r.bracket.1, r.best_at, r.best.s_min
    ));
    report.details = value;
    report.headline = Some(Headline::new(r.best.s_min, r.best.omega / ctx.wb, r.best.phi / PI));
    Ok(())
}

fn cmd_params(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    let p = &ctx.params;
    let m = &ctx.op.modes;
    let wb = ctx.wb;
    let tau = std::f64::consts::TAU;
    let steady = ctx.op.steady.as_ref();
    let value = json!({
        "omega_b_hz": wb / tau,
        "omega_a_hz": p.omega_a / tau,
        "kappa_a_over_omega_b": m.kappa_a() / wb,
        "kappa_1_over_omega_b": m.kappa_1 / wb,
        "kappa_2_over_omega_b": m.kappa_2 / wb,
        "kappa_m_over_omega_b": m.kappa_m / wb,
        "g_over_omega_b": m.g / wb,
        "gamma_hz": m.gamma / tau,
        "quality_factor": p.quality_factor(),
        "delta_a_over_omega_b": m.delta_a / wb,
        "delta_m_effective_over_omega_b": m.delta_m / wb,
        "g0_hz": p.g0 / tau,
        "drive_power_mw": p.drive_power().map(|x| x * 1e3),
        "drive_field_t": p.drive_field().ok().flatten(),
        "spin_count": ctx.op.spin_count,
        "rabi_hz": steady.map(|s| s.omega / tau),
        "magnon_amplitude": steady.map(|s| s.m_avg.norm()),
        "coupling_over_omega_b": ctx.op.coupling.norm() / wb,
        "coupling_hz": ctx.op.coupling.norm() / tau,
        "coupling_phase_over_pi": ctx.op.coupling.arg() / PI,
        "temperature_k": p.temperature,
        "n_a": ctx.op.occupations.n_a,
        "n_m": ctx.op.occupations.n_m,
        "n_b": ctx.op.occupations.n_b,
        "validity": report.validity,
    });
    out.json("params.json", &value)?;
    out.text("config.echo.toml", &ctx.cfg.echo())?;
    report.summary.push(format!(
        "Δ̃_m = {:.4} ω_b, Δ_a = {:.4} ω_b, κ_a = {:.4} ω_b, κ₁ = {:.4} ω_b, κ₂ = {:.4} ω_b, κ_m = {:.4} ω_b",
        m.delta_m / wb,
        m.delta_a / wb,
        m.kappa_a() / wb,
        m.kappa_1 / wb,
        m.kappa_2 / wb,
        m.kappa_m / wb
    ));
    report.summary.push(format!("|G| = {:.4} ω_b = 2π × {:.4e} Hz", ctx.op.coupling.norm() / wb, ctx.op.coupling.norm() / tau));
    if let Some(s) = steady {
        report.summary.push(format!("Ω = 2π × {:.4e} Hz, |⟨m⟩| = {:.4e}", s.omega / tau, s.m_avg.norm()));
    }
    if let Some(v) = &report.validity {
        if let (Some(k), Some(l)) = (v.kerr_ratio, v.low_excitation_ratio) {
            report.summary.push(format!("Kerr ratio = {k:.4}, |⟨m⟩|²/(2Ns) = {l:.4e}"));
        }
    }
    report.details = value;
    Ok(())
}

fn cmd_verify(ctx: &Ctx, out: &mut OutputDir, report: &mut RunReport) -> Result<(), CliError> {
    require_stable(ctx, out, report)?;
    let v = &ctx.cfg.verify;
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        seed: ctx.inv.seed.or(v.seed).unwrap_or(defaults.seed),
        mc_runs: v.mc_runs.unwrap_or(defaults.mc_runs),
        mc_segments: v.mc_segments.unwrap_or(defaults.mc_segments),
        mc_segment_periods: v.mc_segment_periods.unwrap_or(defaults.mc_segment_periods),
        omega_points: defaults.omega_points,
    };
    let result = run_checks(&ctx.model, &opts).map_err(|e| ctx.lib(e))?;
    let checks: Vec<Value> = result
        .checks
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "passed": c.passed,
                "measured": c.measured,
                "tolerance": c.tolerance,
                "detail": c.detail,
            })
        })
        .collect();
    let value = json!({ "seed": opts.seed, "passed": result.all_passed(), "checks": checks });
    out.json("verify.json", &value)?;
    for c in &result.checks {
        report.summary.push(format!(
            "{} {:<40} measured {:>12.4e}  limit {:>9.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance
        ));
    }
    report.details = value;
    if result.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = result.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::Verification(format!(
            "{} of {} checks failed: {}",
            failed.len(),
            result.checks.len(),
            failed.join(", ")
        )))
    }
}
