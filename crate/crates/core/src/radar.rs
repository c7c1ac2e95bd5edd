//! System constants, point targets and the discretised 4-D target space.
//!
//! Coordinates are slant-plane: `x` is range, `y` is azimuth (along-track),
//! and the platform sits at the origin at slow time zero, flying along `+y`.

use crate::{Complex64, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radar, waveform and sampling constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarParams {
    /// Platform speed `v` (m/s).
    pub platform_speed: f64,
    /// Carrier frequency `f0` (Hz).
    pub carrier_frequency: f64,
    /// Carrier wavelength (m).
    pub wavelength: f64,
    /// Chirp rate `Kr` (Hz/s).
    pub chirp_rate: f64,
    /// Pulse width `Tp` (s).
    pub pulse_width: f64,
    /// Chirp bandwidth `B` (Hz).
    pub bandwidth: f64,
    /// Range (fast-time) sampling rate `fs` (Hz).
    pub range_sample_rate: f64,
    /// Pulse repetition frequency `fa` (Hz).
    pub prf: f64,
    /// Fast-time samples per pulse `Nr`.
    pub range_samples: usize,
    /// Number of pulses `Na`.
    pub azimuth_samples: usize,
    /// Fast time of the first range sample `tau0` (s).
    pub range_window_start: f64,
    /// Propagation speed `c` (m/s).
    pub propagation_speed: f64,
}

impl RadarParams {
    /// Builds a parameter set from the independent quantities; chirp rate and
    /// wavelength are derived.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        platform_speed: f64,
        carrier_frequency: f64,
        bandwidth: f64,
        pulse_width: f64,
        range_sample_rate: f64,
        prf: f64,
        range_samples: usize,
        azimuth_samples: usize,
        range_window_start: f64,
        propagation_speed: f64,
    ) -> Result<Self> {
        let p = RadarParams {
            platform_speed,
            carrier_frequency,
            wavelength: propagation_speed / carrier_frequency,
            chirp_rate: bandwidth / pulse_width,
            pulse_width,
            bandwidth,
            range_sample_rate,
            prf,
            range_samples,
            azimuth_samples,
            range_window_start,
            propagation_speed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("platform_speed", self.platform_speed),
            ("carrier_frequency", self.carrier_frequency),
            ("wavelength", self.wavelength),
            ("chirp_rate", self.chirp_rate),
            ("pulse_width", self.pulse_width),
            ("bandwidth", self.bandwidth),
            ("range_sample_rate", self.range_sample_rate),
            ("prf", self.prf),
            ("propagation_speed", self.propagation_speed),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {value}")));
            }
        }
        let kr = self.bandwidth / self.pulse_width;
        if ((self.chirp_rate - kr) / kr).abs() > 1e-9 {
            return Err(Error::param(
                "chirp_rate",
                format!("{} != bandwidth / pulse_width = {kr}", self.chirp_rate),
            ));
        }
        let c = self.wavelength * self.carrier_frequency;
        if ((c - self.propagation_speed) / self.propagation_speed).abs() > 1e-3 {
            return Err(Error::param(
                "wavelength",
                format!("wavelength * carrier_frequency = {c} disagrees with propagation speed"),
            ));
        }
        let chirp_samples = (self.pulse_width * self.range_sample_rate - 1e-9).ceil() as usize;
        if self.range_samples < chirp_samples {
            return Err(Error::param(
                "range_samples",
                format!("{} < {chirp_samples} samples in one pulse", self.range_samples),
            ));
        }
        if self.azimuth_samples == 0 {
            return Err(Error::param("azimuth_samples", "must be >= 1"));
        }
        if !(self.range_window_start.is_finite() && self.range_window_start >= 0.0) {
            return Err(Error::param("range_window_start", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Fast time of range sample `m`.
    #[inline]
    pub fn fast_time(&self, m: usize) -> f64 {
        self.range_window_start + m as f64 / self.range_sample_rate
    }

    /// Slow time of pulse `n`; the aperture is centred so that pulse
    /// `Na / 2` (integer division) fires at `eta = 0`.
    #[inline]
    pub fn slow_time(&self, n: usize) -> f64 {
        (n as f64 - (self.azimuth_samples / 2) as f64) / self.prf
    }

    /// Synthetic aperture duration `Na / fa`.
    pub fn aperture_time(&self) -> f64 {
        self.azimuth_samples as f64 / self.prf
    }

    /// Number of complex samples in one pulse echo, `round(Tp * fs)`.
    pub fn chirp_samples(&self) -> usize {
        (self.pulse_width * self.range_sample_rate).round() as usize
    }

    pub fn total_samples(&self) -> usize {
        self.range_samples * self.azimuth_samples
    }

    /// Two-way delay to the nearest grid range, `2 * x_origin / c`.
    pub fn window_start_for(grid: &ExtendedGrid, propagation_speed: f64) -> f64 {
        2.0 * grid.x_origin / propagation_speed
    }

    /// Checks that the fast-time window holds the full pulse returned from
    /// every spatial grid cell at `eta = 0`.
    pub fn check_window(&self, grid: &ExtendedGrid) -> Result<()> {
        let (x_lo, x_hi) = (grid.x_origin, grid.x_at(grid.nx - 1));
        let (y_lo, y_hi) = (grid.y_origin, grid.y_at(grid.ny - 1));
        let nearest = |lo: f64, hi: f64| if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
        let r_min = nearest(x_lo, x_hi).hypot(nearest(y_lo, y_hi));
        let r_max = x_lo.abs().max(x_hi.abs()).hypot(y_lo.abs().max(y_hi.abs()));
        let first = 2.0 * r_min / self.propagation_speed;
        let last = 2.0 * r_max / self.propagation_speed + self.pulse_width;
        let window_end = self.fast_time(self.range_samples);
        if first < self.range_window_start || last > window_end {
            return Err(Error::param(
                "range_window_start",
                format!(
                    "window [{:.9e}, {:.9e}] s does not hold echoes spanning [{first:.9e}, {last:.9e}] s",
                    self.range_window_start, window_end
                ),
            ));
        }
        Ok(())
    }
}

/// Position at `eta = 0` and constant velocity of a point scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl Kinematics {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Kinematics { x, y, vx, vy }
    }
}

/// A uniformly moving point target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub kinematics: Kinematics,
    pub reflectivity: Complex64,
}

impl Target {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64, reflectivity: Complex64) -> Self {
        Target {
            kinematics: Kinematics::new(x, y, vx, vy),
            reflectivity,
        }
    }

    /// Rejects targets that fly alongside the platform.
    pub fn validate(&self, params: &RadarParams) -> Result<()> {
        let k = &self.kinematics;
        if ![k.x, k.y, k.vx, k.vy, self.reflectivity.re, self.reflectivity.im]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::param("target", "non-finite field"));
        }
        if k.vy == params.platform_speed {
            return Err(Error::SingularZeroDoppler { vy: k.vy });
        }
        Ok(())
    }
}

/// An ordered collection of point targets; may be empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub targets: Vec<Target>,
}

impl Scene {
    pub fn new(targets: Vec<Target>) -> Self {
        Scene { targets }
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Index of one cell of the extended target space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridCoord {
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub q: usize,
}

impl GridCoord {
    pub fn new(n1: usize, n2: usize, p: usize, q: usize) -> Self {
        GridCoord { n1, n2, p, q }
    }
}

/// Uniform discretisation of range, azimuth, range speed and azimuth speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedGrid {
    pub x_origin: f64,
    pub y_origin: f64,
    pub vx_origin: f64,
    pub vy_origin: f64,
    pub bin_x: f64,
    pub bin_y: f64,
    pub bin_vx: f64,
    pub bin_vy: f64,
    pub nx: usize,
    pub ny: usize,
    pub nvx: usize,
    pub nvy: usize,
}

impl ExtendedGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x_origin", self.x_origin),
            ("y_origin", self.y_origin),
            ("vx_origin", self.vx_origin),
            ("vy_origin", self.vy_origin),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        for (name, v) in [
            ("bin_x", self.bin_x),
            ("bin_y", self.bin_y),
            ("bin_vx", self.bin_vx),
            ("bin_vy", self.bin_vy),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("nx", self.nx),
            ("ny", self.ny),
            ("nvx", self.nvx),
            ("nvy", self.nvy),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be >= 1"));
            }
        }
        if self.len() == usize::MAX {
            return Err(Error::param("grid", "too many cells"));
        }
        Ok(())
    }

    /// Also rejects any azimuth-speed cell equal to the platform speed.
    pub fn validate_against(&self, params: &RadarParams) -> Result<()> {
        self.validate()?;
        for q in 0..self.nvy {
            let vy = self.vy_at(q);
            if vy == params.platform_speed {
                return Err(Error::SingularZeroDoppler { vy });
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.nx, self.ny, self.nvx, self.nvy]
    }

    /// Number of cells `N1 * N2 * P * Q`.
    pub fn len(&self) -> usize {
        self.nx
            .checked_mul(self.ny)
            .and_then(|v| v.checked_mul(self.nvx))
            .and_then(|v| v.checked_mul(self.nvy))
            .unwrap_or(usize::MAX)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: GridCoord) -> bool {
        c.n1 < self.nx && c.n2 < self.ny && c.p < self.nvx && c.q < self.nvy
    }

    /// Column-stacking position of `c`: `n1 + N1*(n2 + N2*(p + P*q))`.
    pub fn flat_index(&self, c: GridCoord) -> Result<usize> {
        if !self.contains(c) {
            return Err(Error::CoordOutOfRange {
                n1: c.n1,
                n2: c.n2,
                p: c.p,
                q: c.q,
                dims: self.dims(),
            });
        }
        Ok(c.n1 + self.nx * (c.n2 + self.ny * (c.p + self.nvx * c.q)))
    }

    pub fn unflatten(&self, index: usize) -> Result<GridCoord> {
        if index >= self.len() {
            return Err(Error::FlatIndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        Ok(self.unflatten_unchecked(index))
    }

    #[inline]
    pub(crate) fn unflatten_unchecked(&self, index: usize) -> GridCoord {
        let n1 = index % self.nx;
        let rest = index / self.nx;
        let n2 = rest % self.ny;
        let rest = rest / self.ny;
        GridCoord {
            n1,
            n2,
            p: rest % self.nvx,
            q: rest / self.nvx,
        }
    }

    #[inline]
    pub fn x_at(&self, n1: usize) -> f64 {
        self.x_origin + self.bin_x * n1 as f64
    }
    #[inline]
    pub fn y_at(&self, n2: usize) -> f64 {
        self.y_origin + self.bin_y * n2 as f64
    }
    #[inline]
    pub fn vx_at(&self, p: usize) -> f64 {
        self.vx_origin + self.bin_vx * p as f64
    }
    #[inline]
    pub fn vy_at(&self, q: usize) -> f64 {
        self.vy_origin + self.bin_vy * q as f64
    }

    /// Physical position and velocity of a grid cell.
    pub fn to_physical(&self, c: GridCoord) -> Result<Kinematics> {
        if !self.contains(c) {
            return Err(Error::CoordOutOfRange {
                n1: c.n1,
                n2: c.n2,
                p: c.p,
                q: c.q,
                dims: self.dims(),
            });
        }
        Ok(self.physical_unchecked(c))
    }

    #[inline]
    pub(crate) fn physical_unchecked(&self, c: GridCoord) -> Kinematics {
        Kinematics {
            x: self.x_at(c.n1),
            y: self.y_at(c.n2),
            vx: self.vx_at(c.p),
            vy: self.vy_at(c.q),
        }
    }

    /// The grid cell whose coordinates match `k` to within `1e-6` of a bin
    /// on every axis, if any.
    pub fn locate(&self, k: &Kinematics) -> Option<GridCoord> {
        fn axis(v: f64, origin: f64, bin: f64, n: usize) -> Option<usize> {
            let t = (v - origin) / bin;
            let i = t.round();
            if (t - i).abs() > 1e-6 || i < 0.0 || i >= n as f64 {
                None
            } else {
                Some(i as usize)
            }
        }
        Some(GridCoord {
            n1: axis(k.x, self.x_origin, self.bin_x, self.nx)?,
            n2: axis(k.y, self.y_origin, self.bin_y, self.ny)?,
            p: axis(k.vx, self.vx_origin, self.bin_vx, self.nvx)?,
            q: axis(k.vy, self.vy_origin, self.bin_vy, self.nvy)?,
        })
    }
}
