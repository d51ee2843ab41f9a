//! Output-field transfer matrix and homodyne noise spectral density.
//!
//! The cavity output quadratures follow from the input–output relation
//! `δa_out = √κ₁ δa − a₁ⁱⁿ`, so `T(ω) = C χ(ω) B + D` with `C = √κ₁` on the
//! cavity rows and `D = −1` on the port-1 input columns. The symmetrized
//! spectral matrix of `(X_out, Y_out)` is `M(ω) = Re[T S_z Tᴴ]` and the
//! quadrature at local-oscillator phase φ has `S_W = e(φ)ᵀ M e(φ)` with
//! `e(φ) = (cos φ, sin φ)`. The vacuum level is ½.

mod monte_carlo;

pub use monte_carlo::{monte_carlo_spectrum, MonteCarloConfig, MonteCarloSpectrum};

use nalgebra::{Complex, Matrix2, SMatrix};

use crate::dynamics::{LinearizedModel, StabilityReport};
use crate::error::{invalid, Result};
use crate::scalar::{lit, Real};

/// Vacuum (shot-noise) level of a quadrature spectral density.
pub const VACUUM: f64 = 0.5;

/// Output quadratures `(X_out, Y_out)` in terms of the seven inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix<T: Real> {
    pub t: SMatrix<Complex<T>, 2, 7>,
    pub omega: T,
}

/// Transfer matrix at angular frequency `omega` (drive rotating frame).
pub fn transfer_matrix<T: Real>(model: &LinearizedModel<T>, omega: T) -> Result<TransferMatrix<T>> {
    let chi = model.susceptibility(omega)?;
    let b = model.noise_routing();
    let s1 = model.kappa_1().sqrt();
    let mut t = SMatrix::<Complex<T>, 2, 7>::zeros();
    for r in 0..2 {
        for c in 0..7 {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in 0..6 {
                let bk = b[(k, c)];
                if bk != T::zero() {
                    acc += chi[(r, k)] * bk;
                }
            }
            t[(r, c)] = acc * s1;
        }
        t[(r, r)] -= Complex::new(T::one(), T::zero());
    }
    Ok(TransferMatrix { t, omega })
}

impl<T: Real> TransferMatrix<T> {
    /// `Re[T S_z Tᴴ]` for the given diagonal input densities.
    pub fn spectral_matrix(&self, input_psd: &nalgebra::SVector<T, 7>) -> Matrix2<T> {
        let mut m = Matrix2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = T::zero();
                for k in 0..7 {
                    let z = self.t[(i, k)] * self.t[(j, k)].conj();
                    acc += input_psd[k] * z.re;
                }
                m[(i, j)] = acc;
            }
        }
        m
    }
}

/// Symmetrized spectral matrix of the output quadratures:
/// `[[S_X, S_XY], [S_XY, S_Y]]`.
pub fn quadrature_spectral_matrix<T: Real>(model: &LinearizedModel<T>, omega: T) -> Result<Matrix2<T>> {
    model.require_stable()?;
    spectral_matrix_unchecked(model, omega)
}

pub(crate) fn spectral_matrix_unchecked<T: Real>(
    model: &LinearizedModel<T>,
    omega: T,
) -> Result<Matrix2<T>> {
    Ok(transfer_matrix(model, omega)?.spectral_matrix(model.input_psd()))
}

/// `e(φ)ᵀ M e(φ)`.
pub fn quadrature_value<T: Real>(m: &Matrix2<T>, phi: T) -> T {
    let (s, c) = phi.sin_cos();
    c * c * m[(0, 0)] + s * s * m[(1, 1)] + lit::<T>(2.0) * s * c * m[(0, 1)]
}

/// Homodyne noise spectral density `S_W(ω, φ)` of the output field.
pub fn output_nsd<T: Real>(model: &LinearizedModel<T>, omega: T, phi: T) -> Result<T> {
    Ok(quadrature_value(&quadrature_spectral_matrix(model, omega)?, phi))
}

/// Squeezing in dB below vacuum: `−10 log₁₀(S/½)`.
pub fn nsd_db<T: Real>(s: T) -> Result<T> {
    if !(s > T::zero()) {
        return Err(invalid("S", format!("spectral density must be positive, got {s}")));
    }
    Ok(-lit::<T>(10.0) * (s / lit(VACUUM)).log10())
}

/// Spectral densities over an (ω, φ) grid.
#[derive(Debug, Clone)]
pub struct SpectrumResult<T> {
    /// ω/ω_b for each grid row.
    pub omega_over_omega_b: Vec<T>,
    /// φ/π for each grid column.
    pub phi_over_pi: Vec<T>,
    /// Row-major (ω outer, φ inner) spectral densities.
    pub values: Vec<T>,
    pub values_db: Vec<T>,
    pub stability: StabilityReport<T>,
}

impl<T: Real> SpectrumResult<T> {
    pub fn get(&self, i_omega: usize, i_phi: usize) -> T {
        self.values[i_omega * self.phi_over_pi.len() + i_phi]
    }

    /// Smallest value with its (ω/ω_b, φ/π) location.
    pub fn minimum(&self) -> (T, T, T) {
        let n_phi = self.phi_over_pi.len();
        let (idx, v) = self
            .values
            .iter()
            .copied()
            .enumerate()
            .fold((0, self.values[0]), |best, (i, v)| if v < best.1 { (i, v) } else { best });
        (v, self.omega_over_omega_b[idx / n_phi], self.phi_over_pi[idx % n_phi])
    }
}

/// Evaluates `S_W` at every `(ω, φ)` pair. `omegas` in rad/s, `phis` in rad.
pub fn spectrum<T: Real>(model: &LinearizedModel<T>, omegas: &[T], phis: &[T]) -> Result<SpectrumResult<T>> {
    model.require_stable()?;
    let stability = model.stability()?;
    let wb = model.omega_b();
    let mut values = Vec::with_capacity(omegas.len() * phis.len());
    for &w in omegas {
        let m = spectral_matrix_unchecked(model, w)?;
        values.extend(phis.iter().map(|&p| quadrature_value(&m, p)));
    }
    let values_db = values.iter().map(|&s| nsd_db(s)).collect::<Result<Vec<_>>>()?;
    Ok(SpectrumResult {
        omega_over_omega_b: omegas.iter().map(|&w| w / wb).collect(),
        phi_over_pi: phis.iter().map(|&p| p / T::pi()).collect(),
        values,
        values_db,
        stability,
    })
}

/// `n` evenly spaced points covering `[lo, hi]`.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / lit::<T>((n - 1) as f64);
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * lit::<T>(i as f64) })
                .collect()
        }
    }
}
