//! Matched-filter reference imager.
//!
//! Range compression correlates every pulse with the transmitted chirp. The
//! velocity-hypothesis image correlates the whole echo with each spatial atom
//! at one fixed `(vx, vy)` and normalises by the atom norm, so a target that
//! moves differently from the hypothesis shows up displaced and smeared.

use crate::echo::{self, EchoMatrix, SignalModel};
use crate::par;
use crate::radar::{ExtendedGrid, GridCoord, Kinematics, RadarParams};
use crate::recovery::SparseProfile;
use crate::{Complex64, Error, Result};
use rustfft::FftPlanner;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Transmitted chirp sampled at the range rate, `round(Tp * fs)` samples.
pub fn chirp_replica(params: &RadarParams) -> Vec<Complex64> {
    (0..params.chirp_samples())
        .map(|k| {
            let t = k as f64 / params.range_sample_rate;
            echo::cis_cycles(0.5 * params.chirp_rate * t * t)
        })
        .collect()
}

/// Correlates each azimuth column with the chirp replica:
/// `out[m] = sum_k e[m + k] * conj(h[k])`, samples past the window end
/// taken as zero. Lag `m` thus lines up with fast time `tau_m`.
pub fn range_compress(echo: &EchoMatrix, params: &RadarParams) -> Result<EchoMatrix> {
    echo.check_dims(params)?;
    let (nr, na) = (echo.range_samples(), echo.azimuth_samples());
    let replica = chirp_replica(params);
    let len = (nr + replica.len()).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);

    let mut kernel = vec![ZERO; len];
    kernel[..replica.len()].copy_from_slice(&replica);
    forward.process(&mut kernel);
    let scale = 1.0 / len as f64;
    for k in kernel.iter_mut() {
        *k = k.conj() * scale;
    }

    let mut out = echo.as_slice().to_vec();
    par::for_each_chunk_mut(&mut out, nr, |_, column| {
        let mut buf = vec![ZERO; len];
        buf[..nr].copy_from_slice(column);
        forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&kernel) {
            *b *= k;
        }
        inverse.process(&mut buf);
        column.copy_from_slice(&buf[..nr]);
    });
    EchoMatrix::from_vec(nr, na, out)
}

/// Nonnegative image over the spatial grid, `nx` rows (range bins) by `ny`
/// columns (azimuth bins).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    nx: usize,
    ny: usize,
    pixels: Vec<f64>,
    /// `(vx, vy)` the image was focused for; `None` for images collapsed
    /// over velocity.
    pub velocity_hypothesis: Option<(f64, f64)>,
}

impl IntensityImage {
    /// Pixels in row-major order, `pixels[n1 * ny + n2]`.
    pub fn new(nx: usize, ny: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != nx * ny {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {nx} x {ny} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::param("pixels", "must be finite and nonnegative"));
        }
        Ok(IntensityImage {
            nx,
            ny,
            pixels,
            velocity_hypothesis: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.nx
    }

    pub fn cols(&self) -> usize {
        self.ny
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, n1: usize, n2: usize) -> f64 {
        self.pixels[n1 * self.ny + n2]
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(0.0, f64::max)
    }

    /// Position of the largest pixel; the first in row-major order on ties.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.pixels.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| (i / self.ny, i % self.ny))
    }
}

/// Grid velocity indices `(p, q)` for a hypothesis, if it lies on the grid.
pub fn velocity_bins(grid: &ExtendedGrid, vx: f64, vy: f64) -> Result<(usize, usize)> {
    grid.locate(&Kinematics::new(grid.x_origin, grid.y_origin, vx, vy))
        .map(|c| (c.p, c.q))
        .ok_or_else(|| Error::param("velocity_hypothesis", format!("({vx}, {vy}) is not on the velocity grid")))
}

/// `|<echo, d>| / |d|` for every spatial cell at velocity `(vx, vy)`, over
/// all `Nr * Na` samples.
pub fn matched_filter_image(
    echo: &EchoMatrix,
    params: &RadarParams,
    grid: &ExtendedGrid,
    velocity: (f64, f64),
) -> Result<IntensityImage> {
    params.validate()?;
    grid.validate_against(params)?;
    echo.check_dims(params)?;
    let (nr, na) = (echo.range_samples(), echo.azimuth_samples());
    let (p, q) = velocity_bins(grid, velocity.0, velocity.1)?;

    // With t = tau - d the conjugate atom factors as
    //   exp(-j pi Kr tau^2) exp(j 2 pi Kr d tau) exp(-j pi Kr d^2) exp(j 2 pi f0 d),
    // so after dechirping the data each pulse reduces to a geometric sum.
    let dechirped: Vec<Complex64> = par::map_range(nr * na, |i| {
        let tau = params.fast_time(i % nr);
        echo.as_slice()[i] * echo::cis_cycles(-0.5 * params.chirp_rate * tau * tau)
    });
    let model = SignalModel::new(params);
    let ny = grid.ny;
    let pixels = par::map_range(grid.nx * ny, |i| {
        let k = grid.physical_unchecked(GridCoord::new(i / ny, i % ny, p, q));
        let eta_c = k.y / (params.platform_speed - k.vy);
        let mut total = ZERO;
        let mut count = 0usize;
        for n in 0..na {
            let eta = params.slow_time(n);
            if !model.in_beam(eta, eta_c) {
                continue;
            }
            let r = echo::instantaneous_range(&k, eta, params.platform_speed);
            let d = model.delay(r);
            let rows = echo::candidate_rows(params, d);
            let Some(first) = rows.clone().find(|&m| {
                let t = params.fast_time(m) - d;
                t >= 0.0 && t < params.pulse_width
            }) else {
                continue;
            };
            let column = &dechirped[n * nr..(n + 1) * nr];
            let step = echo::cis_cycles(params.chirp_rate * d / params.range_sample_rate);
            let mut w = echo::cis_cycles(params.chirp_rate * d * params.fast_time(first));
            let mut acc = ZERO;
            for m in first..rows.end {
                let t = params.fast_time(m) - d;
                if !(t < params.pulse_width) {
                    break;
                }
                acc += column[m] * w;
                w *= step;
                count += 1;
            }
            let carrier = params.carrier_frequency * d - 0.5 * params.chirp_rate * d * d;
            total += acc * echo::cis_cycles(carrier);
        }
        if count == 0 {
            0.0
        } else {
            total.norm() / (count as f64).sqrt()
        }
    });
    let mut image = IntensityImage::new(grid.nx, ny, pixels)?;
    image.velocity_hypothesis = Some(velocity);
    Ok(image)
}

/// Spatial image of a sparse profile: each pixel takes the largest
/// coefficient magnitude over all velocity cells at that position.
pub fn profile_image(profile: &SparseProfile) -> IntensityImage {
    let g = profile.grid();
    let mut pixels = vec![0.0f64; g.nx * g.ny];
    for (c, a) in profile.entries() {
        let px = &mut pixels[c.n1 * g.ny + c.n2];
        *px = px.max(a.norm());
    }
    IntensityImage {
        nx: g.nx,
        ny: g.ny,
        pixels,
        velocity_hypothesis: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidelobeMetrics {
    /// Strongest pixel outside the `+-1` bin neighbourhoods of the true
    /// positions, relative to the image peak, `20 log10`. `-inf` when
    /// nothing lies outside or it is all zero.
    pub pslr_db: f64,
    /// Contiguous bins at or above -3 dB through the peak, along range.
    pub range_width: usize,
    /// Same along azimuth.
    pub azimuth_width: usize,
}

/// Peak sidelobe ratio and -3 dB mainlobe widths of `image`.
pub fn sidelobe_metrics(image: &IntensityImage, true_positions: &[(usize, usize)]) -> Result<SidelobeMetrics> {
    if true_positions.is_empty() {
        return Err(Error::param("true_positions", "at least one position is required"));
    }
    let peak = image.max();
    if image.pixels.is_empty() || peak <= 0.0 {
        return Err(Error::EmptyImage);
    }
    let near = |n1: usize, n2: usize| {
        true_positions
            .iter()
            .any(|&(a, b)| n1.abs_diff(a) <= 1 && n2.abs_diff(b) <= 1)
    };
    let mut sidelobe = 0.0f64;
    for n1 in 0..image.nx {
        for n2 in 0..image.ny {
            if !near(n1, n2) {
                sidelobe = sidelobe.max(image.get(n1, n2));
            }
        }
    }
    let pslr_db = if sidelobe > 0.0 {
        20.0 * (sidelobe / peak).log10()
    } else {
        f64::NEG_INFINITY
    };

    let (r0, c0) = image.argmax().expect("nonempty image");
    let floor = peak * 10f64.powf(-3.0 / 20.0);
    let run = |len: usize, at: &dyn Fn(usize) -> f64, centre: usize| {
        let lo = (0..centre).rev().take_while(|&i| at(i) >= floor).count();
        let hi = (centre + 1..len).take_while(|&i| at(i) >= floor).count();
        lo + hi + 1
    };
    Ok(SidelobeMetrics {
        pslr_db,
        range_width: run(image.nx, &|i| image.get(i, c0), r0),
        azimuth_width: run(image.ny, &|j| image.get(r0, j), c0),
    })
}
