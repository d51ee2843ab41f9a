//! Physical parameters, unit conversions and the drive chain
//! `P → B → Ω → ⟨m⟩ → G` that feeds the linearized model.
//!
//! All frequencies and rates are angular (rad/s); fields are in tesla,
//! powers in watt, lengths in metre and temperatures in kelvin.

use num_complex::Complex;

use crate::dynamics::LinearizedModel;
use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, modulus, two_pi, Real};

/// Physical constants for a YIG sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    /// Reduced Planck constant, J·s.
    pub hbar: T,
    /// Boltzmann constant, J/K.
    pub k_b: T,
    /// Gyromagnetic ratio, rad·s⁻¹·T⁻¹.
    pub gamma0: T,
    /// Spin density, m⁻³.
    pub spin_density: T,
    /// Ground-state spin of the Fe³⁺ ion.
    pub spin_s: T,
}

impl<T: Real> PhysicalConstants<T> {
    /// CODATA ħ and k_B with YIG material values (γ₀/2π = 28 GHz/T,
    /// ρ = 4.22×10²⁷ m⁻³, s = 5/2).
    pub fn yig() -> Self {
        Self {
            hbar: lit(1.054_571_817e-34),
            k_b: lit(1.380_649e-23),
            gamma0: two_pi::<T>() * lit(28e9),
            spin_density: lit(4.22e27),
            spin_s: lit(2.5),
        }
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::yig()
    }
}

/// Calibration anchor of the power→field conversion. The field amplitude
/// scales as the square root of the power through this point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCalibration<T> {
    /// Reference power, W.
    pub power_ref: T,
    /// Field amplitude at the reference power, T.
    pub field_ref: T,
}

impl<T: Real> Default for DriveCalibration<T> {
    fn default() -> Self {
        Self {
            power_ref: lit(0.1),
            field_ref: lit(1.3e-4),
        }
    }
}

/// How the magnon drive is specified. Exactly one input mode is active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive<T> {
    /// Microwave drive power, W.
    Power(T),
    /// Drive magnetic field amplitude, T.
    Field(T),
    /// Linearized coupling `G` given directly, rad/s. Bypasses the drive chain.
    Coupling(Complex<T>),
}

/// How the magnon-drive detuning is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagnonDetuning<T> {
    /// Effective detuning Δ̃_m, already including the magnetostrictive shift.
    Effective(T),
    /// Bare detuning Δ_m = ω_m − ω_d; Δ̃_m is solved self-consistently.
    Bare(T),
    /// Bias field minus demagnetization field (H₀ − H_d), T. Sets
    /// ω_m = γ₀(H₀ − H_d) and the bare detuning ω_m − ω_d.
    BiasField(T),
}

/// Raw physical inputs of the cavity–magnon–phonon system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams<T> {
    pub omega_a: T,
    pub omega_b: T,
    /// Magnon frequency used for its thermal occupation. When `None` it is
    /// derived from the drive frequency and the detuning.
    pub omega_m: Option<T>,
    /// External (detection port) cavity coupling κ₁.
    pub kappa_1: T,
    /// Remaining cavity losses κ₂; κ_a = κ₁ + κ₂.
    pub kappa_2: T,
    pub kappa_m: T,
    /// Mechanical damping γ.
    pub gamma: T,
    /// Cavity–magnon coupling g.
    pub g: T,
    /// Bare magnomechanical coupling G₀.
    pub g0: T,
    /// YIG sphere radius, m.
    pub sphere_radius: T,
    pub drive: Drive<T>,
    pub temperature: T,
    /// Magnon Kerr coefficient K.
    pub kerr: T,
    /// Cavity-drive detuning Δ_a = ω_a − ω_d.
    pub delta_a: T,
    pub magnon_detuning: MagnonDetuning<T>,
    pub calibration: DriveCalibration<T>,
    pub constants: PhysicalConstants<T>,
}

/// Rates and detunings entering the linearized equations of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams<T> {
    pub omega_b: T,
    pub gamma: T,
    pub g: T,
    pub delta_a: T,
    /// Effective magnon detuning Δ̃_m.
    pub delta_m: T,
    pub kappa_1: T,
    pub kappa_2: T,
    pub kappa_m: T,
}

impl<T: Real> ModeParams<T> {
    pub fn kappa_a(&self) -> T {
        self.kappa_1 + self.kappa_2
    }
}

/// Classical mean fields of the driven system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState<T> {
    /// Magnon amplitude ⟨m⟩.
    pub m_avg: Complex<T>,
    /// Cavity amplitude ⟨a⟩.
    pub a_avg: Complex<T>,
    /// Mechanical displacement ⟨q⟩.
    pub q_avg: T,
    /// Rabi frequency Ω.
    pub omega: T,
    /// Linearized magnomechanical coupling G.
    pub coupling: Complex<T>,
}

/// Mean thermal occupations of the three baths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalOccupations<T> {
    pub n_a: T,
    pub n_m: T,
    pub n_b: T,
}

impl<T: Real> ThermalOccupations<T> {
    pub fn zero() -> Self {
        Self {
            n_a: T::zero(),
            n_m: T::zero(),
            n_b: T::zero(),
        }
    }
}

/// Everything resolved from [`PhysicalParams`] on the way to a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<T> {
    pub modes: ModeParams<T>,
    pub coupling: Complex<T>,
    pub occupations: ThermalOccupations<T>,
    /// Present when the coupling came from the drive chain.
    pub steady: Option<SteadyState<T>>,
    /// Spin count of the sphere.
    pub spin_count: T,
}

/// Number of spins in a sphere of radius `radius`: N = 4πρR³/3.
pub fn spin_count<T: Real>(radius: T, constants: &PhysicalConstants<T>) -> T {
    lit::<T>(4.0 / 3.0) * T::pi() * constants.spin_density * radius * radius * radius
}

/// Kittel-mode frequency ω_m = γ₀(H₀ − H_d).
pub fn magnon_frequency<T: Real>(field_difference: T, constants: &PhysicalConstants<T>) -> Result<T> {
    if !(field_difference >= T::zero()) {
        return Err(invalid(
            "bias_field_minus_demag",
            format!("must be non-negative, got {field_difference}"),
        ));
    }
    Ok(constants.gamma0 * field_difference)
}

/// Drive field amplitude for a given power, B = B_ref·√(P/P_ref).
pub fn field_from_power<T: Real>(power: T, calibration: &DriveCalibration<T>) -> Result<T> {
    if !(power >= T::zero()) {
        return Err(invalid("drive_power", format!("must be non-negative, got {power}")));
    }
    Ok(calibration.field_ref * (power / calibration.power_ref).sqrt())
}

/// Inverse of [`field_from_power`].
pub fn power_from_field<T: Real>(field: T, calibration: &DriveCalibration<T>) -> T {
    let ratio = field / calibration.field_ref;
    calibration.power_ref * ratio * ratio
}

/// Magnon–drive coupling Ω = (√5/4)·γ₀·√N·B.
pub fn rabi_frequency<T: Real>(field: T, spin_count: T, constants: &PhysicalConstants<T>) -> T {
    lit::<T>(5.0).sqrt() / lit(4.0) * constants.gamma0 * spin_count.sqrt() * field
}

/// Bose–Einstein occupation 1/(exp(ħω/k_BT) − 1); exactly zero at T = 0.
pub fn thermal_occupation<T: Real>(
    omega: T,
    temperature: T,
    constants: &PhysicalConstants<T>,
) -> Result<T> {
    if !(omega > T::zero()) || !omega.is_finite() {
        return Err(invalid("omega", format!("must be positive, got {omega}")));
    }
    if !(temperature >= T::zero()) {
        return Err(invalid("temperature", format!("must be non-negative, got {temperature}")));
    }
    if temperature == T::zero() {
        return Ok(T::zero());
    }
    // Evaluate the exponent in f64-safe order: ħ and k_B are tiny.
    let x = (constants.hbar / constants.k_b) * (omega / temperature);
    Ok(T::one() / x.exp_m1())
}

/// Mean fields for a given Rabi frequency.
///
/// ⟨m⟩ = Ω(κ_a/2 + iΔ_a) / [(κ_m/2 + iΔ̃_m)(κ_a/2 + iΔ_a) + g²],
/// ⟨a⟩ = −ig⟨m⟩/(κ_a/2 + iΔ_a), ⟨q⟩ = −G₀|⟨m⟩|²/ω_b.
pub fn steady_state<T: Real>(modes: &ModeParams<T>, rabi: T, g0: T) -> Result<SteadyState<T>> {
    let half: T = lit(0.5);
    let cavity = Complex::new(half * modes.kappa_a(), modes.delta_a);
    let magnon = Complex::new(half * modes.kappa_m, modes.delta_m);
    let denom = magnon * cavity + Complex::from(modes.g * modes.g);
    let scale = (modulus(magnon) * modulus(cavity)).max(modes.g * modes.g);
    if !(modulus(denom) > scale * lit::<T>(1e3) * T::eps()) {
        return Err(Error::Degenerate(
            "(κ_m/2 + iΔ̃_m)(κ_a/2 + iΔ_a) + g² vanishes".into(),
        ));
    }
    let m_avg = cavity * rabi / denom;
    let a_avg = if modulus(cavity) > T::zero() {
        -Complex::<T>::i() * m_avg * modes.g / cavity
    } else if modes.g == T::zero() {
        Complex::new(T::zero(), T::zero())
    } else {
        return Err(Error::Degenerate("lossless resonant cavity has no steady state".into()));
    };
    let q_avg = if modes.omega_b > T::zero() {
        -g0 * m_avg.norm_sqr() / modes.omega_b
    } else {
        return Err(invalid("omega_b", "must be positive"));
    };
    Ok(SteadyState {
        m_avg,
        a_avg,
        q_avg,
        omega: rabi,
        coupling: linearized_coupling(g0, m_avg),
    })
}

/// Linearized coupling convention: G = G₀⟨m⟩ (no extra √2).
pub fn linearized_coupling<T: Real>(g0: T, m_avg: Complex<T>) -> Complex<T> {
    m_avg * g0
}

/// Δ̃_m = Δ_m + G₀⟨q⟩ = Δ_m − G₀²|⟨m⟩|²/ω_b.
pub fn effective_detuning<T: Real>(delta_m: T, g0: T, m_avg: Complex<T>, omega_b: T) -> Result<T> {
    if !(omega_b > T::zero()) {
        return Err(invalid("omega_b", "must be positive"));
    }
    Ok(delta_m - g0 * g0 * m_avg.norm_sqr() / omega_b)
}

/// Relative tolerance and iteration cap of the self-consistent detuning loop.
pub const SELF_CONSISTENT_TOL: f64 = 1e-12;
pub const SELF_CONSISTENT_MAX_ITER: usize = 100;

/// Solves Δ̃_m = Δ_m − G₀²|⟨m(Δ̃_m)⟩|²/ω_b by fixed-point iteration.
///
/// `modes.delta_m` is ignored and replaced by the solution. Returns the
/// converged steady state together with the effective detuning.
pub fn self_consistent_detuning<T: Real>(
    modes: &ModeParams<T>,
    bare_delta_m: T,
    rabi: T,
    g0: T,
) -> Result<(T, SteadyState<T>)> {
    let tol = lit::<T>(SELF_CONSISTENT_TOL).max(lit::<T>(16.0) * T::eps());
    let mut current = *modes;
    current.delta_m = bare_delta_m;
    let mut last_change = f64::INFINITY;
    for _ in 0..SELF_CONSISTENT_MAX_ITER {
        let state = steady_state(&current, rabi, g0)?;
        let next = effective_detuning(bare_delta_m, g0, state.m_avg, modes.omega_b)?;
        let change = (next - current.delta_m).abs();
        let scale = next.abs().max(bare_delta_m.abs()).max(T::eps() * modes.omega_b);
        last_change = (change / scale).to_f64_lossy();
        current.delta_m = next;
        if change <= tol * scale {
            let state = steady_state(&current, rabi, g0)?;
            return Ok((next, state));
        }
    }
    Err(Error::NoConvergence {
        iterations: SELF_CONSISTENT_MAX_ITER,
        last_change,
    })
}

/// Kerr validity ratio K|⟨m⟩|³/Ω. The linear model needs this ≪ 1.
pub fn kerr_validity<T: Real>(kerr: T, m_avg: Complex<T>, rabi: T) -> Result<T> {
    if !(rabi > T::zero()) {
        return Err(invalid("rabi_frequency", "must be positive for the Kerr ratio"));
    }
    let amp = modulus(m_avg);
    Ok(kerr * amp * amp * amp / rabi)
}

/// Low-excitation ratio |⟨m⟩|²/(2Ns) of the Holstein–Primakoff mapping.
pub fn low_excitation_check<T: Real>(m_avg: Complex<T>, spin_count: T, spin_s: T) -> Result<T> {
    if !(spin_count > T::zero()) {
        return Err(invalid("spin_count", "must be positive"));
    }
    Ok(m_avg.norm_sqr() / (lit::<T>(2.0) * spin_count * spin_s))
}

/// Magnomechanical cooperativity C = |G|²/(κ_m γ).
pub fn cooperativity<T: Real>(coupling: Complex<T>, kappa_m: T, gamma: T) -> Result<T> {
    if !(kappa_m > T::zero()) {
        return Err(invalid("kappa_m", "must be positive for the cooperativity"));
    }
    if !(gamma > T::zero()) {
        return Err(invalid("gamma", "must be positive for the cooperativity"));
    }
    Ok(coupling.norm_sqr() / (kappa_m * gamma))
}

fn check_rate<T: Real>(name: &'static str, value: T) -> Result<()> {
    if !value.is_finite() {
        return Err(invalid(name, "must be finite"));
    }
    if value < T::zero() {
        return Err(invalid(name, format!("must be non-negative, got {value}")));
    }
    Ok(())
}

impl<T: Real> PhysicalParams<T> {
    pub fn kappa_a(&self) -> T {
        self.kappa_1 + self.kappa_2
    }

    /// Drive frequency ω_d = ω_a − Δ_a.
    pub fn drive_frequency(&self) -> T {
        self.omega_a - self.delta_a
    }

    /// Mechanical quality factor ω_b/γ (infinite when γ = 0).
    pub fn quality_factor(&self) -> T {
        self.omega_b / self.gamma
    }

    pub fn validate(&self) -> Result<()> {
        check_rate("omega_a", self.omega_a)?;
        check_rate("omega_b", self.omega_b)?;
        if self.omega_b == T::zero() {
            return Err(invalid("omega_b", "must be positive"));
        }
        if let Some(w) = self.omega_m {
            check_rate("omega_m", w)?;
        }
        check_rate("kappa_1", self.kappa_1)?;
        check_rate("kappa_2", self.kappa_2)?;
        check_rate("kappa_m", self.kappa_m)?;
        check_rate("gamma", self.gamma)?;
        check_rate("g", self.g)?;
        check_rate("sphere_radius", self.sphere_radius)?;
        check_rate("temperature", self.temperature)?;
        check_rate("kerr", self.kerr)?;
        if !self.g0.is_finite() {
            return Err(invalid("g0", "must be finite"));
        }
        if !self.delta_a.is_finite() {
            return Err(invalid("delta_a", "must be finite"));
        }
        if self.gamma > self.omega_b {
            return Err(invalid(
                "gamma",
                "mechanical quality factor omega_b/gamma must be at least 1",
            ));
        }
        match self.drive {
            Drive::Power(p) => check_rate("drive_power", p)?,
            Drive::Field(b) => check_rate("drive_field", b)?,
            Drive::Coupling(c) => {
                if !(c.re.is_finite() && c.im.is_finite()) {
                    return Err(invalid("coupling", "must be finite"));
                }
            }
        }
        match self.magnon_detuning {
            MagnonDetuning::Effective(d) | MagnonDetuning::Bare(d) => {
                if !d.is_finite() {
                    return Err(invalid("delta_m", "must be finite"));
                }
            }
            MagnonDetuning::BiasField(h) => check_rate("bias_field_minus_demag", h)?,
        }
        if !(self.calibration.power_ref > T::zero() && self.calibration.field_ref >= T::zero()) {
            return Err(invalid("calibration", "reference power must be positive"));
        }
        Ok(())
    }

    pub fn spin_count(&self) -> T {
        spin_count(self.sphere_radius, &self.constants)
    }

    /// Drive field amplitude, or `None` when G is given directly.
    pub fn drive_field(&self) -> Result<Option<T>> {
        match self.drive {
            Drive::Power(p) => field_from_power(p, &self.calibration).map(Some),
            Drive::Field(b) => Ok(Some(b)),
            Drive::Coupling(_) => Ok(None),
        }
    }

    /// Drive power, or `None` when G is given directly.
    pub fn drive_power(&self) -> Option<T> {
        match self.drive {
            Drive::Power(p) => Some(p),
            Drive::Field(b) => Some(power_from_field(b, &self.calibration)),
            Drive::Coupling(_) => None,
        }
    }

    pub fn rabi_frequency(&self) -> Result<Option<T>> {
        Ok(self
            .drive_field()?
            .map(|b| rabi_frequency(b, self.spin_count(), &self.constants)))
    }

    /// Bare magnon detuning, when one is specified.
    pub fn bare_magnon_detuning(&self) -> Result<Option<T>> {
        match self.magnon_detuning {
            MagnonDetuning::Effective(_) => Ok(None),
            MagnonDetuning::Bare(d) => Ok(Some(d)),
            MagnonDetuning::BiasField(h) => {
                Ok(Some(magnon_frequency(h, &self.constants)? - self.drive_frequency()))
            }
        }
    }

    /// Magnon frequency used for the thermal occupation.
    pub fn resolved_omega_m(&self, effective_delta_m: T) -> Result<T> {
        if let Some(w) = self.omega_m {
            return Ok(w);
        }
        match self.magnon_detuning {
            MagnonDetuning::BiasField(h) => magnon_frequency(h, &self.constants),
            MagnonDetuning::Bare(d) => Ok(self.drive_frequency() + d),
            MagnonDetuning::Effective(_) => Ok(self.drive_frequency() + effective_delta_m),
        }
    }

    pub fn occupations(&self, omega_m: T) -> Result<ThermalOccupations<T>> {
        let t = self.temperature;
        let c = &self.constants;
        Ok(ThermalOccupations {
            n_a: thermal_occupation(self.omega_a, t, c)?,
            n_m: thermal_occupation(omega_m, t, c)?,
            n_b: thermal_occupation(self.omega_b, t, c)?,
        })
    }

    fn mode_params(&self, delta_m: T) -> ModeParams<T> {
        ModeParams {
            omega_b: self.omega_b,
            gamma: self.gamma,
            g: self.g,
            delta_a: self.delta_a,
            delta_m,
            kappa_1: self.kappa_1,
            kappa_2: self.kappa_2,
            kappa_m: self.kappa_m,
        }
    }

    /// Runs the drive chain and resolves the effective detuning.
    pub fn operating_point(&self) -> Result<OperatingPoint<T>> {
        self.validate()?;
        let n_spins = self.spin_count();
        let bare = self.bare_magnon_detuning()?;
        let (delta_m, coupling, steady) = match (self.drive, bare) {
            (Drive::Coupling(c), None) => {
                let MagnonDetuning::Effective(d) = self.magnon_detuning else {
                    unreachable!("bare detuning resolved above")
                };
                (d, c, None)
            }
            // G₀²|⟨m⟩|²/ω_b = |G|²/ω_b regardless of how G is split.
            (Drive::Coupling(c), Some(bare)) => (bare - c.norm_sqr() / self.omega_b, c, None),
            (_, bare) => {
                let rabi = self.rabi_frequency()?.expect("drive chain active");
                match bare {
                    None => {
                        let delta = match self.magnon_detuning {
                            MagnonDetuning::Effective(d) => d,
                            _ => unreachable!(),
                        };
                        let state = steady_state(&self.mode_params(delta), rabi, self.g0)?;
                        (delta, state.coupling, Some(state))
                    }
                    Some(bare) => {
                        let (delta, state) = self_consistent_detuning(
                            &self.mode_params(bare),
                            bare,
                            rabi,
                            self.g0,
                        )?;
                        (delta, state.coupling, Some(state))
                    }
                }
            }
        };
        let omega_m = self.resolved_omega_m(delta_m)?;
        Ok(OperatingPoint {
            modes: self.mode_params(delta_m),
            coupling,
            occupations: self.occupations(omega_m)?,
            steady,
            spin_count: n_spins,
        })
    }

    /// Builds the linearized quadrature model at this operating point.
    pub fn linearize(&self) -> Result<LinearizedModel<T>> {
        let op = self.operating_point()?;
        LinearizedModel::build(&op.modes, op.coupling, &op.occupations)
    }

    /// Copy with the drive replaced.
    pub fn with_drive(&self, drive: Drive<T>) -> Self {
        Self { drive, ..*self }
    }

    /// Copy with a new total cavity linewidth, keeping κ₁/κ_a fixed.
    pub fn with_kappa_a(&self, kappa_a: T) -> Self {
        let total = self.kappa_a();
        let ratio = if total > T::zero() {
            self.kappa_1 / total
        } else {
            T::one()
        };
        let kappa_1 = ratio * kappa_a;
        Self {
            kappa_1,
            kappa_2: kappa_a - kappa_1,
            ..*self
        }
    }
}

impl<T: Real> OperatingPoint<T> {
    pub fn kerr_ratio(&self, kerr: T) -> Option<Result<T>> {
        self.steady.map(|s| kerr_validity(kerr, s.m_avg, s.omega))
    }

    pub fn low_excitation_ratio(&self, spin_s: T) -> Option<Result<T>> {
        self.steady
            .map(|s| low_excitation_check(s.m_avg, self.spin_count, spin_s))
    }

    pub fn cooperativity(&self) -> Result<T> {
        cooperativity(self.coupling, self.modes.kappa_m, self.modes.gamma)
    }
}

/// Reference parameter sets.
pub mod presets {
    use super::*;

    /// Mechanical frequency ω_b = 2π × 10 MHz shared by all presets.
    pub fn omega_b<T: Real>() -> T {
        two_pi::<T>() * lit(10e6)
    }

    /// Reference operating point: Δ̃_m = 0.3ω_b, Δ_a = 0.1ω_b, κ_a = ω_b,
    /// κ_m = 0.2ω_b, κ₁ = 0.9ω_b, g = ω_b, γ/2π = 100 Hz, G₀/2π = 0.1 Hz,
    /// P = 100 mW, R = 125 μm, T = 20 mK, K/2π = 6.4 nHz.
    pub fn fig2<T: Real>() -> PhysicalParams<T> {
        let wb = omega_b::<T>();
        let tp = two_pi::<T>();
        PhysicalParams {
            omega_a: tp * lit(10e9),
            omega_b: wb,
            omega_m: None,
            kappa_1: lit::<T>(0.9) * wb,
            kappa_2: lit::<T>(0.1) * wb,
            kappa_m: lit::<T>(0.2) * wb,
            gamma: tp * lit(100.0),
            g: wb,
            g0: tp * lit(0.1),
            sphere_radius: lit(125e-6),
            drive: Drive::Power(lit(0.1)),
            temperature: lit(0.02),
            kerr: tp * lit(6.4e-9),
            delta_a: lit::<T>(0.1) * wb,
            magnon_detuning: MagnonDetuning::Effective(lit::<T>(0.3) * wb),
            calibration: DriveCalibration::default(),
            constants: PhysicalConstants::yig(),
        }
    }

    /// Decoupled, zero-temperature system: every output spectrum is vacuum.
    pub fn vacuum<T: Real>() -> PhysicalParams<T> {
        PhysicalParams {
            g: T::zero(),
            g0: T::zero(),
            temperature: T::zero(),
            drive: Drive::Coupling(Complex::new(T::zero(), T::zero())),
            ..fig2()
        }
    }
}
