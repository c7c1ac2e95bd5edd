//! Exact baseband echo synthesis for uniformly moving point targets.
//!
//! A unit scatterer contributes, at fast time `tau` and slow time `eta`,
//!
//! ```text
//! wr(tau - 2R/c) * wa(eta - eta_c) * exp(j*pi*Kr*(tau - 2R/c)^2 - j*4*pi*f0*R/c)
//! ```
//!
//! with `R(eta)` the exact slant range, `wr` a rectangle on `[0, Tp)` and
//! `wa` a rectangle on `[-Ta/2, Ta/2)`.

use crate::par;
use crate::radar::{Kinematics, RadarParams, Scene, Target};
use crate::{Complex64, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex `Nr x Na` sample grid, stored column by column so that sample
/// `(m, n)` sits at vec position `m + Nr * n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoMatrix {
    range_samples: usize,
    azimuth_samples: usize,
    samples: Vec<Complex64>,
}

impl EchoMatrix {
    pub fn zeros(range_samples: usize, azimuth_samples: usize) -> Self {
        EchoMatrix {
            range_samples,
            azimuth_samples,
            samples: vec![ZERO; range_samples * azimuth_samples],
        }
    }

    /// Wraps samples already in vec (column-stacked) order.
    pub fn from_vec(
        range_samples: usize,
        azimuth_samples: usize,
        samples: Vec<Complex64>,
    ) -> Result<Self> {
        if samples.len() != range_samples * azimuth_samples {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {range_samples} x {azimuth_samples} echo",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::Format("non-finite echo sample".into()));
        }
        Ok(EchoMatrix {
            range_samples,
            azimuth_samples,
            samples,
        })
    }

    pub fn range_samples(&self) -> usize {
        self.range_samples
    }

    pub fn azimuth_samples(&self) -> usize {
        self.azimuth_samples
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.samples[m + self.range_samples * n]
    }

    pub fn column(&self, n: usize) -> &[Complex64] {
        &self.samples[n * self.range_samples..(n + 1) * self.range_samples]
    }

    /// Samples in vec order.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|s| *s == ZERO)
    }

    /// Mean power over the nonzero samples, with the count of such samples.
    pub fn support_power(&self) -> (f64, usize) {
        let (sum, count) = self
            .samples
            .iter()
            .filter(|s| **s != ZERO)
            .fold((0.0, 0usize), |(s, c), x| (s + x.norm_sqr(), c + 1));
        if count == 0 {
            (0.0, 0)
        } else {
            (sum / count as f64, count)
        }
    }

    /// Fails unless the echo is `Nr x Na` for `params`.
    pub fn check_dims(&self, params: &RadarParams) -> Result<()> {
        if self.range_samples != params.range_samples || self.azimuth_samples != params.azimuth_samples
        {
            return Err(Error::DimensionMismatch(format!(
                "echo is {} x {}, radar expects {} x {}",
                self.range_samples, self.azimuth_samples, params.range_samples, params.azimuth_samples
            )));
        }
        Ok(())
    }
}

/// Exact slant range at slow time `eta` for platform speed `v`.
#[inline]
pub fn instantaneous_range(k: &Kinematics, eta: f64, v: f64) -> f64 {
    let (a, b) = (k.x + k.vx * eta, k.y + (k.vy - v) * eta);
    (a * a + b * b).sqrt()
}

/// Zero-Doppler time `y / (v - vy)`.
pub fn zero_doppler_time(k: &Kinematics, v: f64) -> Result<f64> {
    if k.vy == v {
        return Err(Error::SingularZeroDoppler { vy: k.vy });
    }
    Ok(k.y / (v - k.vy))
}

/// Second-order expansion of the slant range about the zero-Doppler time.
pub fn taylor_range(k: &Kinematics, eta: f64, v: f64) -> Result<f64> {
    if !(k.x > 0.0) {
        return Err(Error::param("x", "expansion requires positive range"));
    }
    let eta_c = zero_doppler_time(k, v)?;
    let d = eta - eta_c;
    let rel = k.vy - v;
    Ok(k.x + k.vx * d + rel * rel / (2.0 * k.x) * d * d)
}

/// Per-sample signal model shared by the simulator and the dictionary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SignalModel {
    pub v: f64,
    two_over_c: f64,
    half_kr: f64,
    two_f0_over_c: f64,
    pulse_width: f64,
    half_aperture: f64,
}

impl SignalModel {
    pub fn new(p: &RadarParams) -> Self {
        SignalModel {
            v: p.platform_speed,
            two_over_c: 2.0 / p.propagation_speed,
            half_kr: 0.5 * p.chirp_rate,
            two_f0_over_c: 2.0 * p.carrier_frequency / p.propagation_speed,
            pulse_width: p.pulse_width,
            half_aperture: p.aperture_time() / 2.0,
        }
    }

    #[inline]
    pub fn in_beam(&self, eta: f64, eta_c: f64) -> bool {
        let a = eta - eta_c;
        (a >= -self.half_aperture) & (a < self.half_aperture)
    }

    /// Two-way delay for slant range `r`.
    #[inline]
    pub fn delay(&self, r: f64) -> f64 {
        r * self.two_over_c
    }

    /// Unit-reflectivity sample at fast time `tau` for a scatterer at range
    /// `r`, azimuth gate already passed.
    #[inline]
    pub fn chirp_sample(&self, tau: f64, r: f64) -> Complex64 {
        let t = tau - r * self.two_over_c;
        // Phase in cycles, wrapped to [-1/2, 1/2] before the trig call;
        // the carrier term alone is ~10^6 cycles at 30 km.
        let cycles = self.half_kr * t * t - self.two_f0_over_c * r;
        let (s, c) = sin_cos_turns(cycles - round_half_even(cycles));
        let on = (t >= 0.0) & (t < self.pulse_width);
        Complex64::new(if on { c } else { 0.0 }, if on { s } else { 0.0 })
    }

    /// Full sample `(tau, eta)` of a unit scatterer with zero-Doppler time `eta_c`.
    ///
    /// Branch-free so the per-column loops vectorise.
    #[inline]
    pub fn sample(&self, k: &Kinematics, eta_c: f64, tau: f64, eta: f64) -> Complex64 {
        let z = self.chirp_sample(tau, instantaneous_range(k, eta, self.v));
        let on = self.in_beam(eta, eta_c);
        Complex64::new(if on { z.re } else { 0.0 }, if on { z.im } else { 0.0 })
    }
}

/// `exp(j 2 pi cycles)` with the argument wrapped before evaluation.
#[inline]
pub(crate) fn cis_cycles(cycles: f64) -> Complex64 {
    let (s, c) = sin_cos_turns(cycles - round_half_even(cycles));
    Complex64::new(c, s)
}

const ROUND_MAGIC: f64 = 6755399441055744.0; // 1.5 * 2^52

/// Nearest integer (ties to even) for `|x| < 2^51`, without a libm call.
#[inline]
fn round_half_even(x: f64) -> f64 {
    (x + ROUND_MAGIC) - ROUND_MAGIC
}

/// `(sin, cos)` of `2*pi*x` for `|x| <= 1/2`, accurate to a few ulp.
///
/// Quadrant reduction to `|theta| <= pi/4`, then Taylor series through
/// degree 17 (sin) and 18 (cos); truncation error is below 1e-16 there.
#[inline]
pub(crate) fn sin_cos_turns(x: f64) -> (f64, f64) {
    let shifted = 4.0 * x + ROUND_MAGIC;
    // Low mantissa bits of the shifted value hold the quadrant mod 4.
    let q = shifted.to_bits() & 3;
    let quadrant = shifted - ROUND_MAGIC;
    let theta = 2.0 * PI * (x - 0.25 * quadrant);
    let t2 = theta * theta;
    let s = theta
        * (1.0
            + t2 * (-1.0 / 6.0
                + t2 * (1.0 / 120.0
                    + t2 * (-1.0 / 5040.0
                        + t2 * (1.0 / 362880.0
                            + t2 * (-1.0 / 39916800.0
                                + t2 * (1.0 / 6227020800.0
                                    + t2 * (-1.0 / 1307674368000.0
                                        + t2 * (1.0 / 355687428096000.0)))))))));
    let c = 1.0
        + t2 * (-0.5
            + t2 * (1.0 / 24.0
                + t2 * (-1.0 / 720.0
                    + t2 * (1.0 / 40320.0
                        + t2 * (-1.0 / 3628800.0
                            + t2 * (1.0 / 479001600.0
                                + t2 * (-1.0 / 87178291200.0
                                    + t2 * (1.0 / 20922789888000.0
                                        + t2 * (-1.0 / 6402373705728000.0)))))))));
    // Quadrant rotation by bit selects; the quadrant is effectively random
    // across samples.
    let swap = 0u64.wrapping_sub(q & 1);
    let (sb, cb) = (s.to_bits(), c.to_bits());
    let sin_bits = (sb & !swap) | (cb & swap);
    let cos_bits = (cb & !swap) | (sb & swap);
    let sin_sign = (q >> 1) << 63;
    let cos_sign = ((q ^ (q >> 1)) & 1) << 63;
    (
        f64::from_bits(sin_bits ^ sin_sign),
        f64::from_bits(cos_bits ^ cos_sign),
    )
}

/// Rows whose fast time can fall inside the pulse for delay `delay`; a
/// superset by a couple of samples, callers still test each row.
pub(crate) fn candidate_rows(p: &RadarParams, delay: f64) -> std::ops::Range<usize> {
    let start = ((delay - p.range_window_start) * p.range_sample_rate).floor() - 2.0;
    let len = (p.pulse_width * p.range_sample_rate).ceil() + 5.0;
    let lo = start.max(0.0).min(p.range_samples as f64) as usize;
    let hi = (start + len).max(0.0).min(p.range_samples as f64) as usize;
    lo..hi
}

fn accumulate_column(
    p: &RadarParams,
    model: &SignalModel,
    target: &Target,
    eta_c: f64,
    n: usize,
    column: &mut [Complex64],
) {
    let eta = p.slow_time(n);
    if !model.in_beam(eta, eta_c) {
        return;
    }
    let r = instantaneous_range(&target.kinematics, eta, model.v);
    for m in candidate_rows(p, model.delay(r)) {
        let s = model.chirp_sample(p.fast_time(m), r);
        if s != ZERO {
            column[m] += target.reflectivity * s;
        }
    }
}

/// Echo of a single target. Returns an all-zero matrix when the target's
/// returns miss the sampling window entirely; check with
/// [`EchoMatrix::is_zero`].
pub fn point_echo(target: &Target, params: &RadarParams) -> Result<EchoMatrix> {
    scene_echo(&Scene::new(vec![*target]), params)
}

/// Superposition of the echoes of every target in the scene.
pub fn scene_echo(scene: &Scene, params: &RadarParams) -> Result<EchoMatrix> {
    params.validate()?;
    let eta_cs = scene
        .targets
        .iter()
        .map(|t| {
            t.validate(params)?;
            zero_doppler_time(&t.kinematics, params.platform_speed)
        })
        .collect::<Result<Vec<_>>>()?;
    let model = SignalModel::new(params);
    let mut echo = EchoMatrix::zeros(params.range_samples, params.azimuth_samples);
    par::for_each_chunk_mut(&mut echo.samples, params.range_samples, |n, column| {
        for (t, &eta_c) in scene.targets.iter().zip(&eta_cs) {
            accumulate_column(params, &model, t, eta_c, n, column);
        }
    });
    Ok(echo)
}

/// The scene echo evaluated only at the given vec positions; equal to
/// `scene_echo(..)` read out at those positions.
pub fn scene_echo_at(scene: &Scene, params: &RadarParams, positions: &[usize]) -> Result<Vec<Complex64>> {
    params.validate()?;
    let total = params.total_samples();
    if let Some(&bad) = positions.iter().find(|&&g| g >= total) {
        return Err(Error::InvalidSelection {
            requested: bad,
            available: total,
        });
    }
    let eta_cs = scene
        .targets
        .iter()
        .map(|t| {
            t.validate(params)?;
            zero_doppler_time(&t.kinematics, params.platform_speed)
        })
        .collect::<Result<Vec<_>>>()?;
    let model = SignalModel::new(params);
    let nr = params.range_samples;
    Ok(par::map_range(positions.len(), |i| {
        let (m, n) = (positions[i] % nr, positions[i] / nr);
        let (tau, eta) = (params.fast_time(m), params.slow_time(n));
        scene
            .targets
            .iter()
            .zip(&eta_cs)
            .fold(ZERO, |acc, (t, &eta_c)| {
                let s = model.sample(&t.kinematics, eta_c, tau, eta);
                if s == ZERO {
                    acc
                } else {
                    acc + t.reflectivity * s
                }
            })
    }))
}

/// Per-sample noise variance giving `snr_db` relative to the mean power over
/// the echo's nonzero samples.
pub fn noise_variance(echo: &EchoMatrix, snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::param("snr_db", format!("unusable SNR {snr_db}")));
    }
    let (power, count) = echo.support_power();
    if count == 0 {
        return Err(Error::ZeroEnergyEcho);
    }
    Ok(power / 10f64.powf(snr_db / 10.0))
}

/// Adds circular complex white Gaussian noise at `snr_db` (over the signal
/// support). `f64::INFINITY` leaves the echo untouched. Draws come from
/// ChaCha8 seeded with `seed`, real then imaginary part, in vec order.
pub fn add_noise(echo: &EchoMatrix, snr_db: f64, seed: u64) -> Result<EchoMatrix> {
    if snr_db == f64::INFINITY {
        return Ok(echo.clone());
    }
    let variance = noise_variance(echo, snr_db)?;
    let sigma = (variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = echo.clone();
    for s in out.samples.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *s += Complex64::new(sigma * re, sigma * im);
    }
    Ok(out)
}
