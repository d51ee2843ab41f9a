//! Phase optimization, parameter sweeps and threshold searches.
//!
//! Grids are given in absolute units (rad/s, rad); results store them scaled
//! by ω_b and π. When a sweep changes a parameter that enters the drive chain
//! and the drive is specified as a power or field, the coupling G is
//! recomputed at every point. A directly specified G stays fixed.

use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::dynamics::{LinearizedModel, StabilityReport};
use crate::error::{invalid, Error, Result};
use crate::params::{Drive, MagnonDetuning, PhysicalParams};
use crate::scalar::{lit, Real};
use crate::spectra::{linspace, nsd_db, quadrature_spectral_matrix, quadrature_value, VACUUM};

/// Points per axis of the default grids.
pub const DEFAULT_GRID_POINTS: usize = 201;
/// ω points used by the threshold predicates before local refinement.
pub const THRESHOLD_GRID_POINTS: usize = 401;
/// Relative bracket width at which the power bisection stops.
pub const POWER_REL_TOL: f64 = 1e-3;
/// Temperature resolution of the ceiling search, K.
pub const TEMPERATURE_TOL: f64 = 1e-3;
/// Fraction of the threshold power at which the best squeezing is reported.
pub const BELOW_THRESHOLD: f64 = 0.99;

const MAX_BISECTIONS: usize = 200;
const GOLDEN_ITERATIONS: usize = 80;

/// `count` points spanning ω ∈ [0.5, 1.5]ω_b.
pub fn default_omegas<T: Real>(omega_b: T, count: usize) -> Vec<T> {
    linspace(lit::<T>(0.5) * omega_b, lit::<T>(1.5) * omega_b, count)
}

/// Minimum of `e(φ)ᵀ M e(φ)` over φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptimum<T> {
    /// Minimizing phase in [0, π), rad.
    pub phi: T,
    pub s_min: T,
    pub s_max: T,
}

/// Closed-form minimization over φ for a symmetric 2×2 spectral matrix. The
/// minimizer is the angle of the minor eigenvector; an isotropic matrix
/// gives φ = 0.
pub fn phase_optimum<T: Real>(m: &Matrix2<T>) -> PhaseOptimum<T> {
    let half = lit::<T>(0.5);
    let mean = (m[(0, 0)] + m[(1, 1)]) * half;
    let half_diff = (m[(0, 0)] - m[(1, 1)]) * half;
    let off = (m[(0, 1)] + m[(1, 0)]) * half;
    let r = half_diff.hypot(off);
    let s_min = mean - r;
    let s_max = mean + r;
    let scale = mean.abs().max(T::one());
    if r <= lit::<T>(16.0) * T::eps() * scale {
        return PhaseOptimum {
            phi: T::zero(),
            s_min,
            s_max,
        };
    }
    let mut phi = half * off.atan2(half_diff) + T::frac_pi_2();
    if phi >= T::pi() {
        phi -= T::pi();
    }
    if phi < T::zero() {
        phi += T::pi();
    }
    PhaseOptimum { phi, s_min, s_max }
}

pub fn optimal_phase<T: Real>(model: &LinearizedModel<T>, omega: T) -> Result<PhaseOptimum<T>> {
    Ok(phase_optimum(&quadrature_spectral_matrix(model, omega)?))
}

/// Phase optimum at every ω of the grid, in grid order.
pub fn optimal_phase_curve<T: Real>(model: &LinearizedModel<T>, omegas: &[T]) -> Result<Vec<PhaseOptimum<T>>> {
    model.require_stable()?;
    omegas.par_iter().map(|&w| optimal_phase(model, w)).collect()
}

/// Deepest squeezing found over ω with φ optimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingOptimum<T> {
    pub omega: T,
    pub phi: T,
    pub s_min: T,
    /// Squeezing below vacuum, dB.
    pub db: T,
}

/// Grid search of the smaller eigenvalue of M(ω) followed by a golden-section
/// refinement between the neighbours of the best grid point. The refined
/// value never exceeds the grid value.
pub fn best_squeezing<T: Real>(model: &LinearizedModel<T>, omegas: &[T]) -> Result<SqueezingOptimum<T>> {
    if omegas.is_empty() {
        return Err(Error::InvalidGrid("empty ω grid".into()));
    }
    let curve = optimal_phase_curve(model, omegas)?;
    let (k, grid_best) = curve
        .iter()
        .enumerate()
        .fold((0, curve[0]), |acc, (k, p)| if p.s_min < acc.1.s_min { (k, *p) } else { acc });
    let mut omega = omegas[k];
    let mut best = grid_best;
    if omegas.len() > 1 {
        let lo = omegas[k.saturating_sub(1)];
        let hi = omegas[(k + 1).min(omegas.len() - 1)];
        let (w, p) = golden_section(lo, hi, |w| optimal_phase(model, w))?;
        if p.s_min < best.s_min {
            omega = w;
            best = p;
        }
    }
    Ok(SqueezingOptimum {
        omega,
        phi: best.phi,
        s_min: best.s_min,
        db: nsd_db(best.s_min)?,
    })
}

fn golden_section<T: Real>(
    mut a: T,
    mut b: T,
    f: impl Fn(T) -> Result<PhaseOptimum<T>>,
) -> Result<(T, PhaseOptimum<T>)> {
    let inv_phi = (lit::<T>(5.0).sqrt() - T::one()) * lit(0.5);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..GOLDEN_ITERATIONS {
        if (b - a).abs() <= T::eps() * lit::<T>(4.0) * (a.abs() + b.abs()) {
            break;
        }
        if fc.s_min < fd.s_min {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d)?;
        }
    }
    Ok(if fc.s_min < fd.s_min { (c, fc) } else { (d, fd) })
}

/// One axis of a sweep grid. Values are stored in units of `unit`
/// (`omega_b` for frequencies and detunings, `pi` for phases).
#[derive(Debug, Clone, PartialEq)]
pub struct Axis<T> {
    pub name: String,
    pub unit: String,
    pub values: Vec<T>,
}

impl<T> Axis<T> {
    fn new(name: &str, unit: &str, values: Vec<T>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint<T> {
    /// Noise spectral density; `None` at unstable points.
    pub s: Option<T>,
    /// Phase at which `s` was evaluated when it was optimized, in units of π.
    pub optimal_phi: Option<T>,
    pub stable: bool,
}

impl<T> GridPoint<T> {
    fn unstable() -> Self {
        Self {
            s: None,
            optimal_phi: None,
            stable: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
    /// Hash of the configuration that produced the sweep, when known.
    pub config_hash: Option<String>,
}

impl Provenance {
    pub fn now() -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            created_unix,
            config_hash: None,
        }
    }
}

/// Two-dimensional sweep; points are row-major over `axes[0]` then `axes[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid<T> {
    pub axes: [Axis<T>; 2],
    pub points: Vec<GridPoint<T>>,
    pub fixed: PhysicalParams<T>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMinimum<T> {
    pub index: (usize, usize),
    /// Axis coordinates in axis units.
    pub coords: (T, T),
    pub s: T,
    pub optimal_phi: Option<T>,
}

impl<T: Real> SweepGrid<T> {
    pub fn shape(&self) -> (usize, usize) {
        (self.axes[0].values.len(), self.axes[1].values.len())
    }

    pub fn get(&self, i: usize, j: usize) -> &GridPoint<T> {
        &self.points[i * self.axes[1].values.len() + j]
    }

    pub fn unstable_count(&self) -> usize {
        self.points.iter().filter(|p| !p.stable).count()
    }

    /// Smallest S over the stable points.
    pub fn minimum(&self) -> Option<GridMinimum<T>> {
        let cols = self.axes[1].values.len();
        let mut best: Option<GridMinimum<T>> = None;
        for (k, p) in self.points.iter().enumerate() {
            let Some(s) = p.s else { continue };
            if best.is_none_or(|b| s < b.s) {
                let (i, j) = (k / cols, k % cols);
                best = Some(GridMinimum {
                    index: (i, j),
                    coords: (self.axes[0].values[i], self.axes[1].values[j]),
                    s,
                    optimal_phi: p.optimal_phi,
                });
            }
        }
        best
    }
}

fn check_axis<T>(name: &str, values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} axis is empty")));
    }
    Ok(())
}

fn base_model<T: Real>(params: &PhysicalParams<T>) -> Result<LinearizedModel<T>> {
    let model = params.linearize()?;
    model.require_stable()?;
    Ok(model)
}

/// Dense S_W(ω, φ) grid. Axes are `omega` (ω/ω_b) and `phi` (φ/π).
pub fn sweep_omega_phi<T: Real>(params: &PhysicalParams<T>, omegas: &[T], phis: &[T]) -> Result<SweepGrid<T>> {
    check_axis("omega", omegas)?;
    check_axis("phi", phis)?;
    let model = base_model(params)?;
    let rows: Vec<Vec<GridPoint<T>>> = omegas
        .par_iter()
        .map(|&w| {
            let m = quadrature_spectral_matrix(&model, w)?;
            Ok(phis
                .iter()
                .map(|&p| GridPoint {
                    s: Some(quadrature_value(&m, p)),
                    optimal_phi: None,
                    stable: true,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let wb = params.omega_b;
    Ok(SweepGrid {
        axes: [
            Axis::new("omega", "omega_b", omegas.iter().map(|&w| w / wb).collect()),
            Axis::new("phi", "pi", phis.iter().map(|&p| p / T::pi()).collect()),
        ],
        points: rows.into_iter().flatten().collect(),
        fixed: *params,
        provenance: Provenance::now(),
    })
}

/// S_W over (Δ_a, ω) at fixed φ. Axes are `delta_a` and `omega`, both in
/// units of ω_b. Detunings at which the system is unstable are flagged.
pub fn sweep_detuning<T: Real>(
    params: &PhysicalParams<T>,
    delta_as: &[T],
    omegas: &[T],
    phi: T,
) -> Result<SweepGrid<T>> {
    check_axis("delta_a", delta_as)?;
    check_axis("omega", omegas)?;
    base_model(params)?;
    let rows: Vec<Vec<GridPoint<T>>> = delta_as
        .par_iter()
        .map(|&d| {
            let p = PhysicalParams { delta_a: d, ..*params };
            let model = p.linearize()?;
            if !model.stability()?.is_strictly_stable() {
                return Ok(vec![GridPoint::unstable(); omegas.len()]);
            }
            omegas
                .iter()
                .map(|&w| {
                    let m = quadrature_spectral_matrix(&model, w)?;
                    Ok(GridPoint {
                        s: Some(quadrature_value(&m, phi)),
                        optimal_phi: None,
                        stable: true,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let wb = params.omega_b;
    Ok(SweepGrid {
        axes: [
            Axis::new("delta_a", "omega_b", delta_as.iter().map(|&d| d / wb).collect()),
            Axis::new("omega", "omega_b", omegas.iter().map(|&w| w / wb).collect()),
        ],
        points: rows.into_iter().flatten().collect(),
        fixed: *params,
        provenance: Provenance::now(),
    })
}

/// One spectrum of a family indexed by a scalar parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve<T> {
    /// Family parameter in its natural unit (κ_a/ω_b, kelvin, ...).
    pub parameter: T,
    pub stability: StabilityReport<T>,
    pub omega_over_omega_b: Vec<T>,
    /// S per ω; empty when the member is unstable.
    pub s: Vec<T>,
    /// φ/π used at each ω; empty when the member is unstable.
    pub phi_over_pi: Vec<T>,
}

impl<T: Real> SpectrumCurve<T> {
    /// (ω/ω_b, φ/π, S) at the smallest S.
    pub fn minimum(&self) -> Option<(T, T, T)> {
        let mut best: Option<(T, T, T)> = None;
        for ((&w, &p), &s) in self.omega_over_omega_b.iter().zip(&self.phi_over_pi).zip(&self.s) {
            if best.is_none_or(|b| s < b.2) {
                best = Some((w, p, s));
            }
        }
        best
    }
}

/// How φ is chosen along a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseMode<T> {
    Fixed(T),
    /// Optimized separately at every ω.
    PerOmega,
    /// One φ for the whole curve: the optimal phase at the deepest point,
    /// which minimizes min_ω S_W(ω, φ) over φ.
    Global,
}

/// Spectrum of one model with φ chosen by `mode`; unstable models give an
/// empty curve.
pub fn spectrum_curve<T: Real>(
    parameter: T,
    model: &LinearizedModel<T>,
    omegas: &[T],
    mode: PhaseMode<T>,
) -> Result<SpectrumCurve<T>> {
    let stability = model.stability()?;
    let wb = model.omega_b();
    let omega_over_omega_b: Vec<T> = omegas.iter().map(|&w| w / wb).collect();
    if !stability.is_strictly_stable() {
        return Ok(SpectrumCurve {
            parameter,
            stability,
            omega_over_omega_b,
            s: Vec::new(),
            phi_over_pi: Vec::new(),
        });
    }
    let matrices: Vec<Matrix2<T>> = omegas
        .par_iter()
        .map(|&w| quadrature_spectral_matrix(model, w))
        .collect::<Result<_>>()?;
    let (s, phis): (Vec<T>, Vec<T>) = match mode {
        PhaseMode::Fixed(phi) => matrices.iter().map(|m| (quadrature_value(m, phi), phi)).unzip(),
        PhaseMode::PerOmega => matrices
            .iter()
            .map(|m| {
                let o = phase_optimum(m);
                (o.s_min, o.phi)
            })
            .unzip(),
        PhaseMode::Global => {
            let phi = matrices
                .iter()
                .map(phase_optimum)
                .fold(None::<PhaseOptimum<T>>, |acc, o| match acc {
                    Some(a) if a.s_min <= o.s_min => Some(a),
                    _ => Some(o),
                })
                .map_or(T::zero(), |o| o.phi);
            matrices.iter().map(|m| (quadrature_value(m, phi), phi)).unzip()
        }
    };
    Ok(SpectrumCurve {
        parameter,
        stability,
        omega_over_omega_b,
        s,
        phi_over_pi: phis.into_iter().map(|p| p / T::pi()).collect(),
    })
}

fn check_family<T: Real>(params: &PhysicalParams<T>, members: &[T], omegas: &[T]) -> Result<()> {
    check_axis("family", members)?;
    check_axis("omega", omegas)?;
    base_model(params).map(|_| ())
}

/// One spectrum per total cavity linewidth κ_a (rad/s), keeping κ₁/κ_a
/// fixed. The curve parameter is κ_a/ω_b.
pub fn sweep_kappa<T: Real>(
    params: &PhysicalParams<T>,
    kappa_as: &[T],
    omegas: &[T],
    mode: PhaseMode<T>,
) -> Result<Vec<SpectrumCurve<T>>> {
    check_family(params, kappa_as, omegas)?;
    kappa_as
        .iter()
        .map(|&k| {
            let model = params.with_kappa_a(k).linearize()?;
            spectrum_curve(k / params.omega_b, &model, omegas, mode)
        })
        .collect()
}

/// One spectrum per temperature (K).
pub fn temperature_curves<T: Real>(
    params: &PhysicalParams<T>,
    temperatures: &[T],
    omegas: &[T],
    mode: PhaseMode<T>,
) -> Result<Vec<SpectrumCurve<T>>> {
    check_family(params, temperatures, omegas)?;
    if let Some(t) = temperatures.iter().find(|t| !(**t >= T::zero())) {
        return Err(invalid("temperature", format!("must be non-negative, got {t}")));
    }
    temperatures
        .iter()
        .map(|&t| {
            let model = PhysicalParams { temperature: t, ..*params }.linearize()?;
            spectrum_curve(t, &model, omegas, mode)
        })
        .collect()
}

/// Result of a bisection on a boolean predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult<T> {
    pub quantity: String,
    pub unit: String,
    /// Midpoint of the final bracket.
    pub value: T,
    /// Final bracket; the predicate holds at `.0` and fails at `.1`.
    pub bracket: (T, T),
    pub iterations: usize,
    /// Bracket after every step, starting with the initial one.
    pub history: Vec<(T, T)>,
    /// Deepest squeezing just inside the predicate region.
    pub best: SqueezingOptimum<T>,
    /// Where `best` was evaluated.
    pub best_at: T,
}

struct Bisection<T> {
    bracket: (T, T),
    iterations: usize,
    history: Vec<(T, T)>,
}

/// Bisects between `holds` (predicate true) and `fails` (predicate false).
fn bisect<T: Real>(
    holds: T,
    fails: T,
    mut pred: impl FnMut(T) -> Result<bool>,
    done: impl Fn(T, T) -> bool,
) -> Result<Bisection<T>> {
    let mut bracket = (holds, fails);
    let mut history = vec![bracket];
    let mut iterations = 0;
    while !done(bracket.0, bracket.1) {
        if iterations == MAX_BISECTIONS {
            return Err(Error::NoConvergence {
                iterations,
                last_change: (bracket.1 - bracket.0).abs().to_f64_lossy(),
            });
        }
        let mid = (bracket.0 + bracket.1) * lit(0.5);
        if pred(mid)? {
            bracket.0 = mid;
        } else {
            bracket.1 = mid;
        }
        iterations += 1;
        history.push(bracket);
    }
    Ok(Bisection {
        bracket,
        iterations,
        history,
    })
}

fn no_crossing<T: Real>(lo: T, hi: T, detail: &str) -> Error {
    Error::NoCrossing {
        lo: lo.to_f64_lossy(),
        hi: hi.to_f64_lossy(),
        detail: detail.into(),
    }
}

fn is_stable_at_power<T: Real>(params: &PhysicalParams<T>, power: T) -> Result<bool> {
    let model = params.with_drive(Drive::Power(power)).linearize()?;
    Ok(model.stability()?.is_strictly_stable())
}

/// Largest drive power (W) at which the system stays stable, searched in
/// `bracket` with G following the drive chain. The best squeezing is
/// reported at 0.99 of the threshold on the `omegas` grid.
pub fn power_threshold<T: Real>(
    params: &PhysicalParams<T>,
    bracket: (T, T),
    omegas: &[T],
) -> Result<ThresholdResult<T>> {
    if matches!(params.drive, Drive::Coupling(_)) {
        return Err(invalid("drive", "power threshold needs a power or field drive"));
    }
    let (lo, hi) = bracket;
    if !(lo > T::zero() && hi > lo) {
        return Err(invalid("power_bracket", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    let stable_lo = is_stable_at_power(params, lo)?;
    let stable_hi = is_stable_at_power(params, hi)?;
    if !stable_lo {
        return Err(no_crossing(lo, hi, "unstable at the lower end"));
    }
    if stable_hi {
        return Err(no_crossing(lo, hi, "stable across the whole bracket"));
    }
    let tol = lit::<T>(POWER_REL_TOL);
    let b = bisect(lo, hi, |p| is_stable_at_power(params, p), |a, b| (b - a) <= tol * b)?;
    let value = (b.bracket.0 + b.bracket.1) * lit(0.5);
    let best_at = value * lit(BELOW_THRESHOLD);
    let model = params.with_drive(Drive::Power(best_at)).linearize()?;
    let best = best_squeezing(&model, omegas)?;
    Ok(ThresholdResult {
        quantity: "drive_power".into(),
        unit: "W".into(),
        value,
        bracket: b.bracket,
        iterations: b.iterations,
        history: b.history,
        best,
        best_at,
    })
}

/// Power thresholds with the effective magnon detuning held fixed and with
/// the bare detuning held fixed (so that Δ̃_m shifts with power). Both start
/// from the operating point of `params`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerThresholds<T> {
    pub effective_fixed: ThresholdResult<T>,
    pub bare_fixed: Result<ThresholdResult<T>>,
    pub effective_detuning: T,
    pub bare_detuning: T,
}

pub fn power_thresholds<T: Real>(
    params: &PhysicalParams<T>,
    bracket: (T, T),
    omegas: &[T],
) -> Result<PowerThresholds<T>> {
    let op = params.operating_point()?;
    let effective = op.modes.delta_m;
    let bare = effective + op.coupling.norm_sqr() / params.omega_b;
    let eff_params = PhysicalParams {
        magnon_detuning: MagnonDetuning::Effective(effective),
        ..*params
    };
    let bare_params = PhysicalParams {
        magnon_detuning: MagnonDetuning::Bare(bare),
        ..*params
    };
    Ok(PowerThresholds {
        effective_fixed: power_threshold(&eff_params, bracket, omegas)?,
        bare_fixed: power_threshold(&bare_params, bracket, omegas),
        effective_detuning: effective,
        bare_detuning: bare,
    })
}

fn squeezed_at<T: Real>(params: &PhysicalParams<T>, temperature: T, omegas: &[T]) -> Result<bool> {
    let model = PhysicalParams { temperature, ..*params }.linearize()?;
    Ok(best_squeezing(&model, omegas)?.s_min < lit(VACUUM))
}

/// Highest temperature (K) at which min over ω, φ of S_W stays below
/// vacuum, to 1 mK.
pub fn temperature_ceiling<T: Real>(
    params: &PhysicalParams<T>,
    bracket: (T, T),
    omegas: &[T],
) -> Result<ThresholdResult<T>> {
    let (lo, hi) = bracket;
    if !(lo >= T::zero() && hi > lo) {
        return Err(invalid(
            "temperature_bracket",
            format!("need 0 <= lo < hi, got ({lo}, {hi})"),
        ));
    }
    base_model(params)?;
    if !squeezed_at(params, lo, omegas)? {
        return Err(no_crossing(lo, hi, "no squeezing at the lower end"));
    }
    if squeezed_at(params, hi, omegas)? {
        return Err(no_crossing(lo, hi, "squeezing across the whole bracket"));
    }
    let tol = lit::<T>(TEMPERATURE_TOL);
    let b = bisect(lo, hi, |t| squeezed_at(params, t, omegas), |a, b| (b - a) <= tol)?;
    let value = (b.bracket.0 + b.bracket.1) * lit(0.5);
    let best_at = b.bracket.0;
    let model = PhysicalParams {
        temperature: best_at,
        ..*params
    }
    .linearize()?;
    let best = best_squeezing(&model, omegas)?;
    Ok(ThresholdResult {
        quantity: "temperature".into(),
        unit: "K".into(),
        value,
        bracket: b.bracket,
        iterations: b.iterations,
        history: b.history,
        best,
        best_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::presets;
    use crate::spectra::output_nsd;
    use num_complex::Complex;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn fig2() -> PhysicalParams<f64> {
        presets::fig2()
    }

    #[test]
    fn fig2_optimal_phase_near_mechanical_frequency() {
        let p = fig2();
        let model = p.linearize().unwrap();
        let best = best_squeezing(&model, &default_omegas(p.omega_b, 201)).unwrap();
        assert!((best.omega / p.omega_b - 1.0).abs() < 0.05);
        let o = optimal_phase(&model, best.omega).unwrap();
        assert!((o.phi / PI - 0.3).abs() < 0.05, "{}", o.phi / PI);
        assert!((o.s_min - 0.15).abs() < 0.02, "{}", o.s_min);
    }

    #[test]
    fn isotropic_matrix_ties_to_zero() {
        let o = phase_optimum(&(Matrix2::identity() * 0.5));
        assert_eq!(o.phi, 0.0);
        assert_eq!(o.s_min, 0.5);
        let model = presets::vacuum::<f64>().linearize().unwrap();
        let o = optimal_phase(&model, 1.3 * model.omega_b()).unwrap();
        assert_eq!(o.phi, 0.0);
        assert!((o.s_min - 0.5).abs() < 1e-12);
    }

    #[test]
    fn optimum_beats_random_probes_and_is_pi_periodic() {
        let p = fig2();
        let model = p.linearize().unwrap();
        let mut probe = 0.123_f64;
        for w in default_omegas(p.omega_b, 21) {
            let o = optimal_phase(&model, w).unwrap();
            let at = output_nsd(&model, w, o.phi).unwrap();
            assert!((at - o.s_min).abs() < 1e-12 * o.s_max);
            let shifted = output_nsd(&model, w, o.phi + PI).unwrap();
            assert!((at - shifted).abs() < 1e-12 * o.s_max);
            for _ in 0..100 {
                probe = (probe * 7.31 + 0.37).fract();
                let s = output_nsd(&model, w, probe * PI).unwrap();
                assert!(o.s_min <= s + 1e-12 * o.s_max);
            }
        }
    }

    #[test]
    fn best_squeezing_refines_the_grid() {
        let p = fig2();
        let model = p.linearize().unwrap();
        let coarse = default_omegas(p.omega_b, 11);
        let grid_min = optimal_phase_curve(&model, &coarse)
            .unwrap()
            .iter()
            .map(|o| o.s_min)
            .fold(f64::INFINITY, f64::min);
        let best = best_squeezing(&model, &coarse).unwrap();
        assert!(best.s_min <= grid_min);
        assert!((best.omega / p.omega_b - 1.0).abs() < 0.05);
        assert!((best.db - 5.2).abs() < 0.5, "{}", best.db);
        assert!(best_squeezing(&model, &[]).is_err());
    }

    #[test]
    fn two_by_two_sweep() {
        let p = fig2();
        let g = sweep_omega_phi(&p, &[0.9 * p.omega_b, p.omega_b], &[0.0, 0.3 * PI]).unwrap();
        assert_eq!(g.shape(), (2, 2));
        assert_eq!(g.points.len(), 4);
        assert!(g.points.iter().all(|q| q.stable && q.s.is_some()));
        assert!(sweep_omega_phi(&p, &[], &[0.0]).is_err());
    }

    #[test]
    fn sweep_rejects_unstable_base() {
        let mut p = fig2();
        p.drive = Drive::Coupling(Complex::new(p.omega_b, 0.0));
        assert!(matches!(
            sweep_omega_phi(&p, &[p.omega_b], &[0.0]),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn sweep_is_deterministic() {
        let p = fig2();
        let w = default_omegas(p.omega_b, 31);
        let phis = linspace(0.0, PI, 17);
        let a = sweep_omega_phi(&p, &w, &phis).unwrap();
        let b = sweep_omega_phi(&p, &w, &phis).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.axes, b.axes);
    }

    #[test]
    fn refining_never_raises_the_minimum() {
        let p = fig2();
        let mut previous = f64::INFINITY;
        for k in 1..=5 {
            let n = (1usize << k) * 4 + 1;
            let g = sweep_omega_phi(&p, &default_omegas(p.omega_b, n), &linspace(0.0, PI, n)).unwrap();
            let m = g.minimum().unwrap().s;
            assert!(m <= previous + 1e-12, "{m} > {previous}");
            previous = m;
        }
    }

    #[test]
    fn detuning_axis_of_length_one_is_a_spectrum() {
        let p = fig2();
        let w = default_omegas(p.omega_b, 9);
        let g = sweep_detuning(&p, &[p.delta_a], &w, 0.3 * PI).unwrap();
        assert_eq!(g.shape(), (1, 9));
        let model = p.linearize().unwrap();
        for (j, &wj) in w.iter().enumerate() {
            let direct = output_nsd(&model, wj, 0.3 * PI).unwrap();
            assert!((g.get(0, j).s.unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn unstable_detunings_are_flagged() {
        let p = fig2();
        let d: Vec<f64> = linspace(-1.5, 1.5, 13).iter().map(|x| x * p.omega_b).collect();
        let g = sweep_detuning(&p, &d, &default_omegas(p.omega_b, 5), 0.3 * PI).unwrap();
        assert!(g.unstable_count() > 0);
        for q in &g.points {
            assert_eq!(q.stable, q.s.is_some());
        }
    }

    #[test]
    fn kappa_family_keeps_ratio() {
        let p = fig2();
        let ks: Vec<f64> = [0.2, 0.5, 1.0].iter().map(|x| x * p.omega_b).collect();
        for &k in &ks {
            let q = p.with_kappa_a(k);
            assert!((q.kappa_1 / q.kappa_a() - 0.9).abs() < 1e-12);
            assert!(q.kappa_m <= q.kappa_a() + 1e-9);
        }
        let single = sweep_kappa(&p, &[p.kappa_a()], &default_omegas(p.omega_b, 7), PhaseMode::Fixed(0.3 * PI)).unwrap();
        let model = p.linearize().unwrap();
        for (w, s) in single[0].omega_over_omega_b.iter().zip(&single[0].s) {
            assert!((output_nsd(&model, w * p.omega_b, 0.3 * PI).unwrap() - s).abs() < 1e-14);
        }
    }

    #[test]
    fn global_phase_is_constant_and_no_deeper_than_per_omega() {
        let p = fig2();
        let w = default_omegas(p.omega_b, 41);
        let per = temperature_curves(&p, &[0.02], &w, PhaseMode::PerOmega).unwrap();
        let glob = temperature_curves(&p, &[0.02], &w, PhaseMode::Global).unwrap();
        let phi0 = glob[0].phi_over_pi[0];
        assert!(glob[0].phi_over_pi.iter().all(|&x| x == phi0));
        for (a, b) in per[0].s.iter().zip(&glob[0].s) {
            assert!(a <= &(b + 1e-12));
        }
        assert!((per[0].minimum().unwrap().2 - glob[0].minimum().unwrap().2).abs() < 1e-12);
        assert!(temperature_curves(&p, &[-1.0], &w, PhaseMode::PerOmega).is_err());
    }

    #[test]
    fn zero_temperature_is_deepest() {
        let p = fig2();
        let w = default_omegas(p.omega_b, 81);
        let curves = temperature_curves(&p, &[0.0, 0.02, 0.2, 0.5], &w, PhaseMode::PerOmega).unwrap();
        let minima: Vec<f64> = curves.iter().map(|c| c.minimum().unwrap().2).collect();
        for pair in minima.windows(2) {
            assert!(pair[0] < pair[1], "{minima:?}");
        }
    }

    #[test]
    fn power_threshold_brackets_and_shrinks() {
        let p = fig2();
        let w = default_omegas(p.omega_b, THRESHOLD_GRID_POINTS);
        let r = power_threshold(&p, (0.05, 2.0), &w).unwrap();
        assert!(r.bracket.1 - r.bracket.0 <= POWER_REL_TOL * r.bracket.1);
        assert!(is_stable_at_power(&p, r.bracket.0).unwrap());
        assert!(!is_stable_at_power(&p, r.bracket.1).unwrap());
        for pair in r.history.windows(2) {
            assert!(pair[1].1 - pair[1].0 < pair[0].1 - pair[0].0);
            assert!(pair[1].0 >= pair[0].0 && pair[1].1 <= pair[0].1);
        }
        assert!((r.value - 0.37).abs() < 0.15 * 0.37, "{}", r.value);
        assert!((r.best.db - 5.6).abs() < 0.5, "{}", r.best.db);
    }

    #[test]
    fn power_threshold_without_magnetostriction_has_no_crossing() {
        let mut p = fig2();
        p.g0 = 0.0;
        let w = default_omegas(p.omega_b, 11);
        assert!(matches!(
            power_threshold(&p, (0.01, 10.0), &w),
            Err(Error::NoCrossing { .. })
        ));
        p.drive = Drive::Coupling(Complex::new(0.0, 0.0));
        assert!(power_threshold(&p, (0.01, 10.0), &w).is_err());
    }

    #[test]
    fn temperature_ceiling_high_q() {
        let mut p = fig2();
        p.gamma = TAU * 10.0;
        let w = default_omegas(p.omega_b, THRESHOLD_GRID_POINTS);
        let r = temperature_ceiling(&p, (0.02, 1.5), &w).unwrap();
        assert!(r.bracket.1 - r.bracket.0 <= TEMPERATURE_TOL);
        assert!((r.value - 0.75).abs() < 0.05, "{}", r.value);
        assert!(r.best.s_min < 0.5);
    }

    #[test]
    fn ceiling_bracket_on_cold_side_fails() {
        let p = fig2();
        let w = default_omegas(p.omega_b, 41);
        assert!(matches!(
            temperature_ceiling(&p, (0.0, 0.01), &w),
            Err(Error::NoCrossing { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn closed_form_matches_dense_phase_scan(a in 0.2f64..3.0, d in 0.2f64..3.0, b in -1.0f64..1.0) {
            let m = Matrix2::new(a, b, b, d);
            let o = phase_optimum(&m);
            prop_assert!(o.phi >= 0.0 && o.phi < PI);
            let scan = (0..2000)
                .map(|k| quadrature_value(&m, PI * k as f64 / 2000.0))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(o.s_min <= scan + 1e-12);
            prop_assert!((quadrature_value(&m, o.phi) - o.s_min).abs() < 1e-12);
        }
    }
}
