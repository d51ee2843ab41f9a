//! Linearized fluctuation dynamics in the real quadrature basis.
//!
//! State `u = (X_a, Y_a, x_m, y_m, q, p)` with `X = (c + c†)/√2`,
//! `Y = i(c† − c)/√2` for the cavity (`a`) and magnon (`m`) modes.
//! Inputs `z = (X₁ⁱⁿ, Y₁ⁱⁿ, X₂ⁱⁿ, Y₂ⁱⁿ, x_mⁱⁿ, y_mⁱⁿ, ξ)`.
//! The model is `u̇ = A u + B z` with white inputs whose symmetrized
//! spectral densities are the diagonal `S_z`.

use nalgebra::{Complex, Matrix6, SMatrix, SVector, Schur, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::params::{ModeParams, ThermalOccupations};
use crate::scalar::{lit, Real};

pub type Drift<T> = Matrix6<T>;
pub type NoiseRouting<T> = SMatrix<T, 6, 7>;
pub type InputPsd<T> = SVector<T, 7>;
pub type Susceptibility<T> = Matrix6<Complex<T>>;

pub const STATE_LABELS: [&str; 6] = ["X_a", "Y_a", "x_m", "y_m", "q", "p"];
pub const INPUT_LABELS: [&str; 7] = ["X1_in", "Y1_in", "X2_in", "Y2_in", "xm_in", "ym_in", "xi"];

/// Marginal-stability tolerance relative to ω_b.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Eigenvalue summary of the drift matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    /// Eigenvalues sorted by (real, imaginary) part.
    pub eigenvalues: Vec<Complex<T>>,
    pub max_real_part: T,
    /// All real parts strictly negative.
    pub stable: bool,
    /// |max real part| below `MARGINAL_TOL · ω_b`.
    pub marginal: bool,
    /// `−max_real_part`.
    pub margin: T,
}

impl<T: Real> StabilityReport<T> {
    /// Stable with a margin that is not a numerical zero.
    pub fn is_strictly_stable(&self) -> bool {
        self.stable && !self.marginal
    }
}

/// Stationary covariance of the state quadratures.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T: Real> {
    pub v: Matrix6<T>,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Smallest eigenvalue of `V + (i/2)J`, computed through its real 12×12
    /// representation. Non-negative for a physical state.
    pub fn uncertainty_min_eigenvalue(&self) -> T {
        let half: T = lit(0.5);
        let mut big = SMatrix::<T, 12, 12>::zeros();
        let j = symplectic_form::<T>();
        for r in 0..6 {
            for c in 0..6 {
                let k = half * j[(r, c)];
                big[(r, c)] = self.v[(r, c)];
                big[(r + 6, c + 6)] = self.v[(r, c)];
                big[(r, c + 6)] = -k;
                big[(r + 6, c)] = k;
            }
        }
        SymmetricEigen::new(big).eigenvalues.min()
    }

    pub fn cavity_block(&self) -> nalgebra::Matrix2<T> {
        self.v.fixed_view::<2, 2>(0, 0).into_owned()
    }
}

/// Symplectic form J with `[u_i, u_j] = i J_ij`.
pub fn symplectic_form<T: Real>() -> Matrix6<T> {
    let mut j = Matrix6::zeros();
    for k in 0..3 {
        j[(2 * k, 2 * k + 1)] = T::one();
        j[(2 * k + 1, 2 * k)] = -T::one();
    }
    j
}

/// The linearized model: drift, noise routing and input spectral densities.
#[derive(Debug, Clone)]
pub struct LinearizedModel<T: Real> {
    drift: Drift<T>,
    routing: NoiseRouting<T>,
    input_psd: InputPsd<T>,
    modes: ModeParams<T>,
    coupling: Complex<T>,
    occupations: ThermalOccupations<T>,
    stability: Result<StabilityReport<T>>,
}

fn check_finite<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, "must be finite"))
    }
}

impl<T: Real> LinearizedModel<T> {
    /// Assembles `A`, `B` and `S_z` for the given rates, coupling and baths.
    pub fn build(
        modes: &ModeParams<T>,
        coupling: Complex<T>,
        occupations: &ThermalOccupations<T>,
    ) -> Result<Self> {
        let m = modes;
        for (name, v) in [
            ("omega_b", m.omega_b),
            ("gamma", m.gamma),
            ("g", m.g),
            ("delta_a", m.delta_a),
            ("delta_m", m.delta_m),
            ("kappa_1", m.kappa_1),
            ("kappa_2", m.kappa_2),
            ("kappa_m", m.kappa_m),
            ("coupling", coupling.re),
            ("coupling", coupling.im),
            ("n_a", occupations.n_a),
            ("n_m", occupations.n_m),
            ("n_b", occupations.n_b),
        ] {
            check_finite(name, v)?;
        }
        for (name, v) in [
            ("gamma", m.gamma),
            ("kappa_1", m.kappa_1),
            ("kappa_2", m.kappa_2),
            ("kappa_m", m.kappa_m),
        ] {
            if v < T::zero() {
                return Err(invalid(name, format!("must be non-negative, got {v}")));
            }
        }

        let half: T = lit(0.5);
        let sqrt2 = lit::<T>(2.0).sqrt();
        let ka2 = half * m.kappa_a();
        let km2 = half * m.kappa_m;
        let (gr, gi) = (sqrt2 * coupling.re, sqrt2 * coupling.im);
        let z = T::zero();
        #[rustfmt::skip]
        let drift = Matrix6::new(
            -ka2,        m.delta_a,  z,           m.g,        z,          z,
            -m.delta_a,  -ka2,       -m.g,        z,          z,          z,
            z,           m.g,        -km2,        m.delta_m,  gi,         z,
            -m.g,        z,          -m.delta_m,  -km2,       -gr,        z,
            z,           z,          z,           z,          z,          m.omega_b,
            z,           z,          -gr,         -gi,        -m.omega_b, -m.gamma,
        );

        let mut routing = NoiseRouting::zeros();
        let s1 = m.kappa_1.sqrt();
        let s2 = m.kappa_2.sqrt();
        let sm = m.kappa_m.sqrt();
        routing[(0, 0)] = s1;
        routing[(1, 1)] = s1;
        routing[(0, 2)] = s2;
        routing[(1, 3)] = s2;
        routing[(2, 4)] = sm;
        routing[(3, 5)] = sm;
        routing[(5, 6)] = T::one();

        let na = occupations.n_a + half;
        let nm = occupations.n_m + half;
        let xi = m.gamma * (lit::<T>(2.0) * occupations.n_b + T::one());
        let input_psd = InputPsd::from_column_slice(&[na, na, na, na, nm, nm, xi]);

        let stability = stability_of(&drift, m.omega_b);
        Ok(Self {
            drift,
            routing,
            input_psd,
            modes: *modes,
            coupling,
            occupations: *occupations,
            stability,
        })
    }

    /// Overrides the bath occupations of the two cavity ports. The default
    /// build uses `n_a` for both.
    pub fn with_port_occupations(mut self, n_port1: T, n_port2: T) -> Self {
        let half: T = lit(0.5);
        self.input_psd[0] = n_port1 + half;
        self.input_psd[1] = n_port1 + half;
        self.input_psd[2] = n_port2 + half;
        self.input_psd[3] = n_port2 + half;
        self
    }

    pub fn drift(&self) -> &Drift<T> {
        &self.drift
    }

    pub fn noise_routing(&self) -> &NoiseRouting<T> {
        &self.routing
    }

    pub fn input_psd(&self) -> &InputPsd<T> {
        &self.input_psd
    }

    pub fn modes(&self) -> &ModeParams<T> {
        &self.modes
    }

    pub fn coupling(&self) -> Complex<T> {
        self.coupling
    }

    pub fn occupations(&self) -> &ThermalOccupations<T> {
        &self.occupations
    }

    pub fn omega_b(&self) -> T {
        self.modes.omega_b
    }

    pub fn kappa_1(&self) -> T {
        self.modes.kappa_1
    }

    /// Same model with `G → G·e^{iθ}`.
    pub fn with_coupling_phase(&self, theta: T) -> Result<Self> {
        let rot = Complex::new(theta.cos(), theta.sin());
        Self::build(&self.modes, self.coupling * rot, &self.occupations)
    }

    /// Diffusion matrix `D = B S_z Bᵀ`.
    pub fn diffusion(&self) -> Matrix6<T> {
        self.routing * SMatrix::<T, 7, 7>::from_diagonal(&self.input_psd) * self.routing.transpose()
    }

    /// Eigenvalue stability analysis of the drift matrix.
    pub fn stability(&self) -> Result<StabilityReport<T>> {
        self.stability.clone()
    }

    /// Fails unless the model is strictly stable.
    pub fn require_stable(&self) -> Result<&Self> {
        let report = self.stability.as_ref().map_err(Clone::clone)?;
        if report.is_strictly_stable() {
            Ok(self)
        } else {
            Err(Error::Unstable {
                max_real_part: report.max_real_part.to_f64_lossy(),
            })
        }
    }

    /// `χ(ω) = (−iωI − A)⁻¹`.
    pub fn susceptibility(&self, omega: T) -> Result<Susceptibility<T>> {
        let m = self.resolvent_operand(omega);
        let inv = m
            .full_piv_lu()
            .try_inverse()
            .ok_or(Error::SingularSusceptibility {
                omega: omega.to_f64_lossy(),
            })?;
        let residual = susceptibility_residual(&m, &inv);
        if !(residual <= T::eps().sqrt()) {
            return Err(Error::SingularSusceptibility {
                omega: omega.to_f64_lossy(),
            });
        }
        Ok(inv)
    }

    /// Residual `‖(−iωI − A)χ − I‖` (Frobenius, which bounds the spectral norm).
    pub fn susceptibility_check(&self, omega: T) -> Result<T> {
        let chi = self.susceptibility(omega)?;
        Ok(susceptibility_residual(&self.resolvent_operand(omega), &chi))
    }

    fn resolvent_operand(&self, omega: T) -> Susceptibility<T> {
        let mut m = self.drift.map(|x| Complex::new(-x, T::zero()));
        for k in 0..6 {
            m[(k, k)] -= Complex::new(T::zero(), omega);
        }
        m
    }

    /// Stationary covariance `V` solving `AV + VAᵀ = −D`.
    pub fn lyapunov_covariance(&self) -> Result<CovarianceMatrix<T>> {
        self.require_stable()?;
        let v = solve_lyapunov(&self.drift, &self.diffusion())?;
        Ok(CovarianceMatrix { v })
    }

    /// `‖AV + VAᵀ + D‖ / ‖D‖` for a candidate covariance.
    pub fn lyapunov_residual(&self, cov: &CovarianceMatrix<T>) -> T {
        let d = self.diffusion();
        let r = self.drift * cov.v + cov.v * self.drift.transpose() + d;
        r.norm() / d.norm()
    }
}

fn susceptibility_residual<T: Real>(m: &Susceptibility<T>, chi: &Susceptibility<T>) -> T {
    (m * chi - Susceptibility::identity()).norm()
}

fn stability_of<T: Real>(drift: &Drift<T>, omega_b: T) -> Result<StabilityReport<T>> {
    let schur = Schur::try_new(*drift, T::eps(), 10_000).ok_or(Error::EigenSolver)?;
    let mut eigenvalues: Vec<Complex<T>> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    let max_real_part = eigenvalues
        .iter()
        .map(|e| e.re)
        .fold(T::min_value().unwrap_or(-T::max_value().unwrap()), |a, b| a.max(b));
    let tol = lit::<T>(MARGINAL_TOL) * omega_b.abs();
    Ok(StabilityReport {
        stable: max_real_part < T::zero(),
        marginal: max_real_part.abs() < tol,
        margin: -max_real_part,
        max_real_part,
        eigenvalues,
    })
}

/// Solves `AV + VAᵀ = −D` through the vectorized Kronecker system
/// `(I⊗A + A⊗I) vec V = −vec D`, then symmetrizes.
pub fn solve_lyapunov<T: Real>(a: &Matrix6<T>, d: &Matrix6<T>) -> Result<Matrix6<T>> {
    const N: usize = 6;
    let mut k = SMatrix::<T, 36, 36>::zeros();
    // vec is column-major: index (i, j) ↦ i + N j.
    for j in 0..N {
        for i in 0..N {
            let row = i + N * j;
            for l in 0..N {
                // (A V)_{ij} = Σ_l A_il V_lj
                k[(row, l + N * j)] += a[(i, l)];
                // (V Aᵀ)_{ij} = Σ_l V_il A_jl
                k[(row, i + N * l)] += a[(j, l)];
            }
        }
    }
    let rhs = SVector::<T, 36>::from_iterator(d.iter().map(|&x| -x));
    let lu = k.full_piv_lu();
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate("Lyapunov operator is singular".into()))?;
    // One step of iterative refinement.
    let resid = rhs - k * sol;
    if let Some(corr) = lu.solve(&resid) {
        sol += corr;
    }
    let v = Matrix6::from_column_slice(sol.as_slice());
    Ok((v + v.transpose()) * lit::<T>(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::presets;
    use approx::assert_relative_eq;

    fn fig2() -> LinearizedModel<f64> {
        presets::fig2::<f64>().linearize().unwrap()
    }

    fn modes(wb: f64) -> ModeParams<f64> {
        ModeParams {
            omega_b: wb,
            gamma: 1e-5 * wb,
            g: wb,
            delta_a: 0.1 * wb,
            delta_m: 0.3 * wb,
            kappa_1: 0.9 * wb,
            kappa_2: 0.1 * wb,
            kappa_m: 0.2 * wb,
        }
    }

    #[test]
    fn decoupled_limit_is_block_diagonal() {
        let mut m = modes(1.0);
        m.g = 0.0;
        let model =
            LinearizedModel::build(&m, Complex::new(0.0, 0.0), &ThermalOccupations::zero()).unwrap();
        let a = model.drift();
        let block = |i: usize| i / 2;
        for r in 0..6 {
            for c in 0..6 {
                if block(r) != block(c) {
                    assert_eq!(a[(r, c)], 0.0, "({r},{c})");
                }
            }
        }
    }

    #[test]
    fn named_entries_match_equations_of_motion() {
        let model = fig2();
        let a = model.drift();
        let m = model.modes();
        assert_eq!(a[(0, 1)], m.delta_a);
        assert_eq!(a[(4, 5)], m.omega_b);
        assert_eq!(a[(5, 5)], -m.gamma);
    }

    #[test]
    fn real_coupling_routes_only_through_y_m_and_x_m() {
        // G real: G*δm + Gδm† = √2 G x_m and −iG(δq) − h.c. drives y_m only.
        let g = 0.19;
        let model = LinearizedModel::build(
            &modes(1.0),
            Complex::new(g, 0.0),
            &ThermalOccupations::zero(),
        )
        .unwrap();
        let a = model.drift();
        let col_q: Vec<f64> = (0..6).map(|r| a[(r, 4)]).collect();
        assert_eq!(col_q, vec![0.0, 0.0, 0.0, -2f64.sqrt() * g, 0.0, -1.0]);
        let row_p: Vec<f64> = (0..4).map(|c| a[(5, c)]).collect();
        assert_eq!(row_p, vec![0.0, 0.0, -2f64.sqrt() * g, 0.0]);
    }

    #[test]
    fn routing_sparsity_and_input_psd() {
        let model = fig2();
        let b = model.noise_routing();
        let m = model.modes();
        let mut expect = NoiseRouting::<f64>::zeros();
        expect[(0, 0)] = m.kappa_1.sqrt();
        expect[(1, 1)] = m.kappa_1.sqrt();
        expect[(0, 2)] = m.kappa_2.sqrt();
        expect[(1, 3)] = m.kappa_2.sqrt();
        expect[(2, 4)] = m.kappa_m.sqrt();
        expect[(3, 5)] = m.kappa_m.sqrt();
        expect[(5, 6)] = 1.0;
        assert_eq!(*b, expect);
        let s = model.input_psd();
        let occ = model.occupations();
        for k in 0..4 {
            assert_eq!(s[k], occ.n_a + 0.5);
        }
        assert_eq!(s[4], occ.n_m + 0.5);
        assert_eq!(s[6], m.gamma * (2.0 * occ.n_b + 1.0));
    }

    #[test]
    fn non_finite_parameters_rejected() {
        let mut m = modes(1.0);
        m.delta_a = f64::NAN;
        assert!(LinearizedModel::build(&m, Complex::new(0.0, 0.0), &ThermalOccupations::zero()).is_err());
        let m = modes(1.0);
        assert!(LinearizedModel::build(
            &m,
            Complex::new(f64::INFINITY, 0.0),
            &ThermalOccupations::zero()
        )
        .is_err());
    }

    #[test]
    fn fig2_is_stable() {
        let r = fig2().stability().unwrap();
        assert!(r.stable && !r.marginal);
        assert_eq!(r.eigenvalues.len(), 6);
        assert_relative_eq!(r.margin, -r.max_real_part);
    }

    #[test]
    fn lossless_oscillators_are_marginal() {
        let mut m = modes(1.0);
        m.gamma = 0.0;
        m.kappa_1 = 0.0;
        m.kappa_2 = 0.0;
        m.kappa_m = 0.0;
        m.g = 0.0;
        let model =
            LinearizedModel::build(&m, Complex::new(0.0, 0.0), &ThermalOccupations::zero()).unwrap();
        let r = model.stability().unwrap();
        assert!(r.marginal);
        assert!(!r.is_strictly_stable());
        for e in &r.eigenvalues {
            assert!(e.re.abs() < 1e-12);
        }
        assert!(model.require_stable().is_err());
    }

    #[test]
    fn coupling_threshold_exists() {
        // Bisection on |G| at the reference rates.
        let max_re = |g: f64| {
            LinearizedModel::build(&modes(1.0), Complex::new(g, 0.0), &ThermalOccupations::zero())
                .unwrap()
                .stability()
                .unwrap()
                .max_real_part
        };
        let (mut lo, mut hi) = (0.19, 2.0);
        assert!(max_re(lo) < 0.0 && max_re(hi) > 0.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if max_re(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!(lo > 0.3 && lo < 0.45, "{lo}");
    }

    #[test]
    fn eigenvalues_come_in_conjugate_pairs() {
        let r = fig2().stability().unwrap();
        for e in &r.eigenvalues {
            let partner = r
                .eigenvalues
                .iter()
                .map(|f| (f - e.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(partner < 1e-6 * e.norm().max(1.0));
        }
    }

    #[test]
    fn susceptibility_conjugate_symmetry_and_residual() {
        let model = fig2();
        let w = 0.8 * model.omega_b();
        let a = model.susceptibility(w).unwrap();
        let b = model.susceptibility(-w).unwrap();
        assert!((a - b.map(|z| z.conj())).norm() < 1e-12 * a.norm());
        assert!(model.susceptibility_check(model.omega_b()).unwrap() <= 1e-10);
    }

    #[test]
    fn scalar_channel_susceptibility() {
        let mut m = modes(1.0);
        m.g = 0.0;
        m.delta_a = 0.0;
        m.delta_m = 0.0;
        m.omega_b = 0.0;
        let model = LinearizedModel::build(&m, Complex::new(0.0, 0.0), &ThermalOccupations::zero());
        // ω_b = 0 is accepted by build; drift is diagonal −diag(r) with r_q = 0
        // so only probe the lossy channels.
        let model = model.unwrap();
        let w = 0.37;
        let chi = model.susceptibility(w).unwrap();
        let rates = [0.5, 0.5, 0.1, 0.1];
        for (k, r) in rates.iter().enumerate() {
            let expect = Complex::new(1.0, 0.0) / Complex::new(*r, -w);
            assert!((chi[(k, k)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn vacuum_cavity_covariance() {
        let mut m = modes(1.0);
        m.g = 0.0;
        let model =
            LinearizedModel::build(&m, Complex::new(0.0, 0.0), &ThermalOccupations::zero()).unwrap();
        let cov = model.lyapunov_covariance().unwrap();
        let block = cov.cavity_block();
        assert!((block - nalgebra::Matrix2::identity() * 0.5).norm() < 1e-12);
        assert!(model.lyapunov_residual(&cov) < 1e-10);
    }

    #[test]
    fn thermal_mechanical_covariance() {
        let mut m = modes(1.0);
        m.g = 0.0;
        let occ = ThermalOccupations { n_a: 0.0, n_m: 0.0, n_b: 41.0 };
        let model = LinearizedModel::build(&m, Complex::new(0.0, 0.0), &occ).unwrap();
        let v = model.lyapunov_covariance().unwrap().v;
        assert_relative_eq!(v[(4, 4)], 41.5, max_relative = 1e-6);
        assert_relative_eq!(v[(5, 5)], 41.5, max_relative = 1e-6);
        assert!(v[(4, 5)].abs() < 1e-6);
    }

    #[test]
    fn covariance_of_fig2_is_physical() {
        let model = fig2();
        let cov = model.lyapunov_covariance().unwrap();
        assert!(model.lyapunov_residual(&cov) < 1e-10);
        assert!((cov.v - cov.v.transpose()).norm() == 0.0);
        assert!(cov.uncertainty_min_eigenvalue() > -1e-9);
        for k in 0..6 {
            assert!(cov.v[(k, k)] >= 0.0);
        }
    }

    #[test]
    fn unstable_model_has_no_covariance() {
        let model = LinearizedModel::build(
            &modes(1.0),
            Complex::new(1.0, 0.0),
            &ThermalOccupations::zero(),
        )
        .unwrap();
        assert!(matches!(model.lyapunov_covariance(), Err(Error::Unstable { .. })));
    }

    #[test]
    fn diffusion_is_symmetric_psd() {
        let d = fig2().diffusion();
        assert_eq!(d, d.transpose());
        assert!(SymmetricEigen::new(d).eigenvalues.min() >= 0.0);
    }

    #[test]
    fn coupling_phase_is_a_joint_cavity_magnon_rotation() {
        // G → Ge^{iθ} with g real is the frame change a → ae^{iθ}, m → me^{iθ}:
        // stability is unchanged and the cavity covariance rotates by R(θ).
        let model = fig2();
        let base = model.lyapunov_covariance().unwrap().cavity_block();
        let r0 = model.stability().unwrap();
        for theta in [0.3f64, 1.7, -2.9] {
            let rot = model.with_coupling_phase(theta).unwrap();
            let r = rot.stability().unwrap();
            assert_eq!(r.stable, r0.stable);
            assert_relative_eq!(r.max_real_part, r0.max_real_part, max_relative = 1e-8);
            let (s, c) = theta.sin_cos();
            let rmat = nalgebra::Matrix2::new(c, -s, s, c);
            let expect = rmat * base * rmat.transpose();
            let block = rot.lyapunov_covariance().unwrap().cavity_block();
            let rel = (block - expect).norm() / base.norm();
            assert!(rel <= 1e-10, "{rel:e}");
            assert_relative_eq!(block.determinant(), base.determinant(), max_relative = 1e-10);
        }
    }

    #[test]
    fn zero_coupling_decouples_mechanics_in_covariance() {
        let model =
            LinearizedModel::build(&modes(1.0), Complex::new(0.0, 0.0), &ThermalOccupations::zero())
                .unwrap();
        let v = model.lyapunov_covariance().unwrap().v;
        for r in 0..4 {
            for c in 4..6 {
                assert!(v[(r, c)].abs() < 1e-12);
            }
        }
    }
}
