//! Time-domain Monte Carlo estimate of the output spectrum.
//!
//! The linear system `u̇ = Au + Bw` is driven by classical white noise with
//! intensities `S_z`; for a linear system this reproduces every symmetrized
//! spectrum. The state is augmented with the time-integrated output
//! quadratures and the pair is propagated with its exact discrete-time
//! transition and process covariance (Van Loan), so there is no
//! discretization bias. Output samples are block averages of the output
//! over `decimation` steps; each segment gets a Hann-windowed DFT at the
//! requested frequencies. Segments do not overlap, so the spread of the
//! per-segment periodograms gives an honest standard error.

use nalgebra::{DMatrix, SMatrix, SVector, SymmetricEigen};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::LinearizedModel;
use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Real};

/// Run parameters. Times are in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig<T> {
    pub seed: u64,
    pub total_time: T,
    pub dt: T,
    /// Length of one Welch segment.
    pub segment_time: T,
}

impl<T: Real> MonteCarloConfig<T> {
    /// Largest admissible step: `0.01 / max(max|λ|, ω_b)`.
    pub fn max_dt(model: &LinearizedModel<T>) -> Result<T> {
        let report = model.stability()?;
        let spectral_radius = report
            .eigenvalues
            .iter()
            .map(|e| e.re.hypot(e.im))
            .fold(T::zero(), |a, b| a.max(b));
        Ok(lit::<T>(0.01) / spectral_radius.max(model.omega_b()))
    }

    /// A configuration with the largest admissible step and `segments`
    /// segments of `segment_periods / ω_b` each.
    pub fn for_model(
        model: &LinearizedModel<T>,
        seed: u64,
        segments: usize,
        segment_periods: T,
    ) -> Result<Self> {
        let dt = Self::max_dt(model)?;
        let segment_time = segment_periods / model.omega_b();
        Ok(Self {
            seed,
            total_time: segment_time * lit::<T>(segments as f64),
            dt,
            segment_time,
        })
    }
}

/// Estimated spectral densities with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSpectrum<T> {
    pub omega_over_omega_b: Vec<T>,
    pub phi_over_pi: Vec<T>,
    /// Row-major (ω outer, φ inner) means over segments.
    pub mean: Vec<T>,
    pub std_error: Vec<T>,
    pub segments: usize,
    pub samples_per_segment: usize,
}

impl<T: Real> MonteCarloSpectrum<T> {
    pub fn get(&self, i_omega: usize, i_phi: usize) -> (T, T) {
        let k = i_omega * self.phi_over_pi.len() + i_phi;
        (self.mean[k], self.std_error[k])
    }
}

type Aug<T> = SMatrix<T, 8, 8>;

/// Square root `L` with `L Lᵀ = M` for a symmetric PSD matrix; tiny
/// negative eigenvalues from rounding are clipped.
fn psd_sqrt<const N: usize, T: Real>(m: &SMatrix<T, N, N>) -> SMatrix<T, N, N> {
    let dynamic = DMatrix::from_iterator(N, N, m.iter().copied());
    let sym = (&dynamic + dynamic.transpose()) * lit::<T>(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut l = eig.eigenvectors;
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(T::zero()).sqrt();
        l.column_mut(k).scale_mut(s);
    }
    SMatrix::from_iterator(l.iter().copied())
}

/// Exact discrete transition and process-noise covariance over `dt` for the
/// state augmented with the integrated output quadratures.
fn discretize<T: Real>(model: &LinearizedModel<T>, dt: T) -> (Aug<T>, Aug<T>) {
    let a = model.drift();
    let b = model.noise_routing();
    let s1 = model.kappa_1().sqrt();

    let mut aug_a = Aug::<T>::zeros();
    aug_a.fixed_view_mut::<6, 6>(0, 0).copy_from(a);
    aug_a[(6, 0)] = s1;
    aug_a[(7, 1)] = s1;

    let mut aug_b = SMatrix::<T, 8, 7>::zeros();
    aug_b.fixed_view_mut::<6, 7>(0, 0).copy_from(b);
    aug_b[(6, 0)] = -T::one();
    aug_b[(7, 1)] = -T::one();

    let q = aug_b * SMatrix::<T, 7, 7>::from_diagonal(model.input_psd()) * aug_b.transpose();

    let mut vl = SMatrix::<T, 16, 16>::zeros();
    vl.fixed_view_mut::<8, 8>(0, 0).copy_from(&(-aug_a * dt));
    vl.fixed_view_mut::<8, 8>(0, 8).copy_from(&(q * dt));
    vl.fixed_view_mut::<8, 8>(8, 8).copy_from(&(aug_a.transpose() * dt));
    let e = vl.exp();
    let phi = e.fixed_view::<8, 8>(8, 8).transpose();
    let qd = phi * e.fixed_view::<8, 8>(0, 8);
    (phi, qd)
}

/// Monte Carlo estimate of `S_W(ω, φ)` on the given grids (ω in rad/s,
/// φ in rad). Deterministic for a given seed.
pub fn monte_carlo_spectrum<T: Real>(
    model: &LinearizedModel<T>,
    omegas: &[T],
    phis: &[T],
    config: &MonteCarloConfig<T>,
) -> Result<MonteCarloSpectrum<T>> {
    model.require_stable()?;
    if omegas.is_empty() || phis.is_empty() {
        return Err(Error::InvalidGrid("empty ω or φ grid".into()));
    }
    let limit = MonteCarloConfig::max_dt(model)?;
    let dt = config.dt;
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be positive"));
    }
    if dt > limit * lit(1.0 + 1e-12) {
        return Err(Error::StepTooCoarse {
            dt: dt.to_f64_lossy(),
            limit: limit.to_f64_lossy(),
        });
    }
    let omega_max = omegas.iter().fold(T::zero(), |a, &w| a.max(w.abs()));
    // Block averaging over Δ attenuates the coloured part of the spectrum by
    // sinc²(ωΔ/2); ωΔ ≤ 0.05 keeps that below 2·10⁻⁴.
    let decimation = if omega_max > T::zero() {
        (lit::<T>(0.05) / (omega_max * dt)).floor().to_f64_lossy().max(1.0) as usize
    } else {
        1
    };
    let sample_dt = dt * lit::<T>(decimation as f64);
    let samples_per_segment = (config.segment_time / sample_dt).floor().to_f64_lossy() as usize;
    if samples_per_segment < 16 {
        return Err(invalid("segment_time", "segment shorter than 16 samples"));
    }
    let segment_steps = samples_per_segment * decimation;
    let segments = (config.total_time / (dt * lit::<T>(segment_steps as f64)))
        .floor()
        .to_f64_lossy() as usize;
    if segments < 2 {
        return Err(invalid("total_time", "need at least two Welch segments"));
    }

    let (phi_mat, qd) = discretize(model, dt);
    let transition: SMatrix<T, 8, 6> = phi_mat.fixed_view::<8, 6>(0, 0).into_owned();
    let noise_sqrt = psd_sqrt(&qd);
    let cov = model.lyapunov_covariance()?;
    let init_sqrt = psd_sqrt(&cov.v);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut normal = || -> T { lit(StandardNormal.sample(&mut rng)) };

    let mut state: SVector<T, 6> = init_sqrt * SVector::<T, 6>::from_fn(|_, _| normal());

    // Hann window over the segment samples.
    let two_pi = T::two_pi();
    let denom = lit::<T>((samples_per_segment - 1) as f64);
    let window: Vec<T> = (0..samples_per_segment)
        .map(|k| {
            let x = two_pi * lit::<T>(k as f64) / denom;
            lit::<T>(0.5) * (T::one() - x.cos())
        })
        .collect();
    let window_power: T = window.iter().fold(T::zero(), |acc, &w| acc + w * w);
    let norm = sample_dt / window_power;

    let steps: Vec<Complex<T>> = omegas
        .iter()
        .map(|&w| {
            let (s, c) = (w * sample_dt).sin_cos();
            Complex::new(c, -s)
        })
        .collect();
    let trig: Vec<(T, T)> = phis.iter().map(|&p| {
        let (s, c) = p.sin_cos();
        (c, s)
    }).collect();

    let n_points = omegas.len() * phis.len();
    let mut sum = vec![T::zero(); n_points];
    let mut sum_sq = vec![T::zero(); n_points];
    let mut acc_x = vec![Complex::new(T::zero(), T::zero()); omegas.len()];
    let mut acc_y = acc_x.clone();
    let mut phasor = acc_x.clone();
    let inv_block = T::one() / sample_dt;

    for _ in 0..segments {
        for (a, b) in acc_x.iter_mut().zip(acc_y.iter_mut()) {
            *a = Complex::new(T::zero(), T::zero());
            *b = Complex::new(T::zero(), T::zero());
        }
        for p in phasor.iter_mut() {
            *p = Complex::new(T::one(), T::zero());
        }
        for &w in &window {
            let mut out_x = T::zero();
            let mut out_y = T::zero();
            for _ in 0..decimation {
                let xi = SVector::<T, 8>::from_fn(|_, _| normal());
                let next = transition * state + noise_sqrt * xi;
                out_x += next[6];
                out_y += next[7];
                state = next.fixed_rows::<6>(0).into_owned();
            }
            let yx = out_x * inv_block * w;
            let yy = out_y * inv_block * w;
            for j in 0..omegas.len() {
                acc_x[j] += phasor[j] * yx;
                acc_y[j] += phasor[j] * yy;
                phasor[j] *= steps[j];
            }
        }
        for j in 0..omegas.len() {
            for (k, &(c, s)) in trig.iter().enumerate() {
                let z = acc_x[j] * c + acc_y[j] * s;
                let p = z.norm_sqr() * norm;
                let idx = j * phis.len() + k;
                sum[idx] += p;
                sum_sq[idx] += p * p;
            }
        }
    }

    let n = lit::<T>(segments as f64);
    let mut mean = Vec::with_capacity(n_points);
    let mut std_error = Vec::with_capacity(n_points);
    for (s, s2) in sum.iter().zip(sum_sq.iter()) {
        let m = *s / n;
        let var = ((*s2 - n * m * m) / (n - T::one())).max(T::zero());
        mean.push(m);
        std_error.push((var / n).sqrt());
    }

    let wb = model.omega_b();
    Ok(MonteCarloSpectrum {
        omega_over_omega_b: omegas.iter().map(|&w| w / wb).collect(),
        phi_over_pi: phis.iter().map(|&p| p / T::pi()).collect(),
        mean,
        std_error,
        segments,
        samples_per_segment,
    })
}
