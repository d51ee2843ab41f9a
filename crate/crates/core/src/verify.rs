//! Self-consistency checks of a linearized model.
//!
//! The intracavity spectral matrix `χ D χᴴ` integrated over ω/2π must
//! reproduce the Lyapunov covariance; the analytic output spectrum must
//! agree with the Monte Carlo estimate; and the symmetry properties of the
//! spectrum must hold to rounding.

use std::f64::consts::PI;

use nalgebra::Matrix6;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::LinearizedModel;
use crate::error::{Error, Result};
use crate::optimize::phase_optimum;
use crate::params::{ModeParams, ThermalOccupations};
use crate::scalar::{lit, Real};
use crate::spectra::{
    monte_carlo_spectrum, output_nsd, quadrature_spectral_matrix, quadrature_value, MonteCarloConfig, VACUUM,
};

/// Relative tolerance of the Lyapunov/integrated-spectrum comparison.
pub const LYAPUNOV_TOL: f64 = 1e-4;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const SUSCEPTIBILITY_TOL: f64 = 1e-10;
pub const VACUUM_TOL: f64 = 1e-12;
pub const DET_TOL: f64 = 1e-6;
/// Fraction of Monte Carlo points that must lie within three standard errors.
pub const MC_COVERAGE: f64 = 0.95;
pub const MC_SIGMAS: f64 = 3.0;

// Gauss–Kronrod 7/15 nodes and weights on [−1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 20_000;

struct Segment<T: Real> {
    a: T,
    b: T,
    value: Matrix6<T>,
    error: T,
}

fn gauss_kronrod<T: Real>(a: T, b: T, f: &impl Fn(T) -> Result<Matrix6<T>>) -> Result<Segment<T>> {
    let half = (b - a) * lit(0.5);
    let center = (a + b) * lit(0.5);
    let mid = f(center)?;
    let mut kronrod = mid * lit::<T>(WGK[7]);
    let mut gauss = mid * lit::<T>(WG[3]);
    for k in 0..7 {
        let dx = half * lit::<T>(XGK[k]);
        let pair = f(center - dx)? + f(center + dx)?;
        kronrod += pair * lit::<T>(WGK[k]);
        if k % 2 == 1 {
            gauss += pair * lit::<T>(WG[k / 2]);
        }
    }
    let value = kronrod * half;
    let error = (value - gauss * half).amax();
    Ok(Segment { a, b, value, error })
}

/// Integral of the symmetrized intracavity spectrum over ω/2π, computed on
/// ω = ω_b tan θ with breakpoints at the resonances and global adaptive
/// Gauss–Kronrod subdivision. Returns the matrix and the number of segments.
pub fn integrated_covariance<T: Real>(model: &LinearizedModel<T>, rel_tol: T) -> Result<(Matrix6<T>, usize)> {
    let report = model.stability()?;
    model.require_stable()?;
    let scale = model.omega_b();
    let d = model.diffusion().map(|x| Complex::new(x, T::zero()));
    // V = (1/π)∫₀^∞ Re[χ D χᴴ] dω because the integrand is even in ω.
    let integrand = |theta: T| -> Result<Matrix6<T>> {
        let (s, c) = theta.sin_cos();
        let omega = scale * s / c;
        let chi = model.susceptibility(omega)?;
        let spec = chi * d * chi.adjoint();
        Ok(spec.map(|z| z.re) * (scale / (c * c) / T::pi()))
    };
    let top = T::frac_pi_2();
    let mut breaks: Vec<T> = report
        .eigenvalues
        .iter()
        .filter(|e| e.im > T::zero())
        .map(|e| (e.im / scale).atan())
        .collect();
    breaks.push(T::zero());
    breaks.push(top);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    breaks.dedup_by(|a, b| (*a - *b).abs() <= T::eps());

    let mut segments = Vec::new();
    for w in breaks.windows(2) {
        segments.push(gauss_kronrod(w[0], w[1], &integrand)?);
    }
    loop {
        let total = segments.iter().fold(Matrix6::zeros(), |acc, s| acc + s.value);
        let error = segments.iter().fold(T::zero(), |acc, s| acc + s.error);
        if error <= rel_tol * total.amax() {
            return Ok((total, segments.len()));
        }
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::NoConvergence {
                iterations: segments.len(),
                last_change: error.to_f64_lossy(),
            });
        }
        let (k, _) = segments
            .iter()
            .enumerate()
            .fold((0, T::zero()), |acc, (k, s)| if s.error > acc.1 { (k, s.error) } else { acc });
        let worst = segments.swap_remove(k);
        let mid = (worst.a + worst.b) * lit(0.5);
        segments.push(gauss_kronrod(worst.a, mid, &integrand)?);
        segments.push(gauss_kronrod(mid, worst.b, &integrand)?);
    }
}

/// One pass/fail check with its measured discrepancy.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    fn at_most(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail,
        }
    }

    /// Passes when `measured >= tolerance`.
    fn at_least(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured >= tolerance,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Number of independent Monte Carlo runs (seeds `seed`, `seed + 1`, ...).
    pub mc_runs: usize,
    pub mc_segments: usize,
    /// Segment length in units of 1/ω_b.
    pub mc_segment_periods: f64,
    /// ω points of the analytic checks over [0.2, 2]ω_b.
    pub omega_points: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            mc_runs: 2,
            mc_segments: 96,
            mc_segment_periods: 2000.0,
            omega_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

const PHIS: usize = 12;

fn phase_grid() -> Vec<f64> {
    (0..PHIS).map(|k| PI * k as f64 / PHIS as f64).collect()
}

/// Runs every check against `model`. Fails early only when the model itself
/// cannot be analysed (for instance when it is unstable).
pub fn run_checks(model: &LinearizedModel<f64>, opts: &VerifyOptions) -> Result<VerifyReport> {
    model.require_stable()?;
    let wb = model.omega_b();
    let n = opts.omega_points.max(2);
    let omegas: Vec<f64> = (0..n).map(|k| wb * (0.2 + 1.8 * k as f64 / (n - 1) as f64)).collect();
    let phis = phase_grid();
    let mut checks = Vec::new();

    let mut resid: f64 = 0.0;
    for &w in &omegas {
        resid = resid.max(model.susceptibility_check(w)?);
        resid = resid.max(model.susceptibility_check(-w)?);
    }
    checks.push(Check::at_most(
        "susceptibility_residual",
        resid,
        SUSCEPTIBILITY_TOL,
        format!("max ‖(−iωI − A)χ − I‖ over {} frequencies", 2 * n),
    ));

    let cov = model.lyapunov_covariance()?;
    checks.push(Check::at_most(
        "lyapunov_residual",
        model.lyapunov_residual(&cov),
        SYMMETRY_TOL,
        "‖AV + VAᵀ + D‖ / ‖D‖".into(),
    ));
    checks.push(Check::at_least(
        "uncertainty_principle",
        cov.uncertainty_min_eigenvalue(),
        -1e-9,
        "min eigenvalue of V + iJ/2".into(),
    ));

    let (integrated, segments) = integrated_covariance(model, 1e-9)?;
    let lyap = (integrated - cov.v).amax() / cov.v.amax();
    checks.push(Check::at_most(
        "lyapunov_vs_integrated_spectrum",
        lyap,
        LYAPUNOV_TOL,
        format!("max |∫S dω/2π − V| / max |V| with {segments} segments"),
    ));

    let mut even: f64 = 0.0;
    let mut periodic: f64 = 0.0;
    let mut det_min = f64::INFINITY;
    for &w in &omegas {
        let m = quadrature_spectral_matrix(model, w)?;
        let mm = quadrature_spectral_matrix(model, -w)?;
        det_min = det_min.min(m.determinant());
        for &p in &phis {
            let s = quadrature_value(&m, p);
            even = even.max(rel(s, quadrature_value(&mm, p)));
            periodic = periodic.max(rel(s, quadrature_value(&m, p + PI)));
        }
    }
    checks.push(Check::at_most("evenness_in_omega", even, SYMMETRY_TOL, "max relative |S(ω) − S(−ω)|".into()));
    checks.push(Check::at_most(
        "pi_periodicity",
        periodic,
        SYMMETRY_TOL,
        "max relative |S(φ) − S(φ + π)|".into(),
    ));
    checks.push(Check::at_least(
        "spectral_uncertainty",
        det_min - 0.25,
        -DET_TOL,
        "min det M(ω) − ¼".into(),
    ));

    checks.push(coupling_phase_check(model, &omegas, opts.seed)?);
    checks.push(no_squeezing_without_coupling(model, &omegas)?);
    checks.push(vacuum_floor(model, &omegas)?);
    checks.push(monte_carlo_check(model, opts)?);

    Ok(VerifyReport { checks })
}

/// φ-optimized spectra are independent of arg G, and fixed-φ spectra obey
/// `S_W(φ; G e^{iθ}) = S_W(φ − θ; G)`.
fn coupling_phase_check(model: &LinearizedModel<f64>, omegas: &[f64], seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let theta: f64 = rng.random_range(0.0..2.0 * PI);
        let rotated = model.with_coupling_phase(theta)?;
        let a = model.stability()?.max_real_part;
        let b = rotated.stability()?.max_real_part;
        worst = worst.max((a - b).abs() / model.omega_b());
        for &w in omegas {
            let m0 = quadrature_spectral_matrix(model, w)?;
            let m1 = quadrature_spectral_matrix(&rotated, w)?;
            let (o0, o1) = (phase_optimum(&m0), phase_optimum(&m1));
            worst = worst.max(rel(o0.s_min, o1.s_min)).max(rel(o0.s_max, o1.s_max));
            for p in phase_grid() {
                worst = worst.max(rel(quadrature_value(&m1, p), quadrature_value(&m0, p - theta)));
            }
        }
    }
    Ok(Check::at_most(
        "coupling_phase_invariance",
        worst,
        SYMMETRY_TOL,
        "min/max over φ invariant and S(φ; Ge^{iθ}) = S(φ − θ; G) for random θ".into(),
    ))
}

fn decoupled(modes: &ModeParams<f64>, keep_g: bool) -> ModeParams<f64> {
    ModeParams {
        g: if keep_g { modes.g } else { 0.0 },
        ..*modes
    }
}

fn no_squeezing_without_coupling(model: &LinearizedModel<f64>, omegas: &[f64]) -> Result<Check> {
    let zero = LinearizedModel::build(&decoupled(model.modes(), true), Complex::new(0.0, 0.0), model.occupations())?;
    let mut floor = f64::INFINITY;
    for &w in omegas {
        floor = floor.min(phase_optimum(&quadrature_spectral_matrix(&zero, w)?).s_min);
    }
    Ok(Check::at_least(
        "no_squeezing_without_magnetostriction",
        floor - VACUUM,
        -SYMMETRY_TOL,
        "min over ω, φ of S − ½ with G = 0".into(),
    ))
}

fn vacuum_floor(model: &LinearizedModel<f64>, omegas: &[f64]) -> Result<Check> {
    let cold = LinearizedModel::build(
        &decoupled(model.modes(), false),
        Complex::new(0.0, 0.0),
        &ThermalOccupations::zero(),
    )?;
    let mut worst: f64 = 0.0;
    for &w in omegas {
        for p in phase_grid() {
            worst = worst.max((output_nsd(&cold, w, p)? - VACUUM).abs());
        }
    }
    Ok(Check::at_most(
        "vacuum_floor",
        worst,
        VACUUM_TOL,
        "max |S − ½| for the decoupled system at T = 0".into(),
    ))
}

fn monte_carlo_check(model: &LinearizedModel<f64>, opts: &VerifyOptions) -> Result<Check> {
    let wb = model.omega_b();
    let omegas: Vec<f64> = [0.6, 0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2, 1.4].iter().map(|x| x * wb).collect();
    let phis = [0.0, 0.3 * PI, 0.6 * PI, 0.9 * PI];
    let mut hits = 0usize;
    let mut total = 0usize;
    let mut worst: f64 = 0.0;
    for run in 0..opts.mc_runs.max(1) {
        let cfg = MonteCarloConfig::for_model(
            model,
            opts.seed.wrapping_add(run as u64),
            opts.mc_segments,
            opts.mc_segment_periods,
        )?;
        let mc = monte_carlo_spectrum(model, &omegas, &phis, &cfg)?;
        for (i, &w) in omegas.iter().enumerate() {
            for (j, &p) in phis.iter().enumerate() {
                let exact = output_nsd(model, w, p)?;
                let (mean, se) = mc.get(i, j);
                let z = (mean - exact).abs() / se.max(f64::MIN_POSITIVE);
                worst = worst.max(z);
                total += 1;
                if (mean - exact).abs() <= MC_SIGMAS * se {
                    hits += 1;
                }
            }
        }
    }
    let fraction = hits as f64 / total as f64;
    Ok(Check::at_least(
        "monte_carlo_agreement",
        fraction,
        MC_COVERAGE,
        format!("{hits}/{total} points within 3 SE, worst |Δ|/SE = {worst:.2}"),
    ))
}
