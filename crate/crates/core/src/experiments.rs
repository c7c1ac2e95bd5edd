//! Monte Carlo recovery experiments.
//!
//! Every trial draws its scene, measurement rows and noise from seeds derived
//! from `(base_seed, k, M, snr, trial)`, so the outcome of a sweep does not
//! depend on how trials are scheduled across threads.

use crate::baseline::{self, IntensityImage, SidelobeMetrics};
use crate::dictionary::{select_measurements, CachePolicy, SensingOperator};
use crate::echo;
use crate::par;
use crate::radar::{ExtendedGrid, GridCoord, RadarParams, Scene, Target};
use crate::recovery::{recover, relative_error, Diagnostics, RecoveryConfig, SparseProfile};
use crate::rng::{derive_seed, sample_sorted, splitmix};
use crate::{Complex64, Error, Result};
use std::fmt::Write as _;
use std::str::FromStr;

/// Relative profile error below which a trial counts as a success.
pub const SUCCESS_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fig2,
    PsrVsM,
    PsrVsSnr,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Fig2 => "fig2",
            Mode::PsrVsM => "psr_vs_m",
            Mode::PsrVsSnr => "psr_vs_snr",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Mode::Fig2),
            "psr_vs_m" => Ok(Mode::PsrVsM),
            "psr_vs_snr" => Ok(Mode::PsrVsSnr),
            _ => Err(Error::param("mode", format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub target_counts: Vec<usize>,
    pub measurement_counts: Vec<usize>,
    /// SNR values in dB. Empty in `psr_vs_m` mode means noiseless.
    pub snr_values_db: Vec<f64>,
    pub trials_per_point: usize,
    pub base_seed: u64,
    pub params: RadarParams,
    pub grid: ExtendedGrid,
    /// Solver settings; the sparsity is overridden by each point's `k`.
    pub recovery: RecoveryConfig,
    pub cache_policy: CachePolicy,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate_against(&self.params)?;
        if self.trials_per_point == 0 {
            return Err(Error::param("trials_per_point", "must be >= 1"));
        }
        if self.target_counts.is_empty() {
            return Err(Error::param("target_counts", "must not be empty"));
        }
        if self.measurement_counts.is_empty() {
            return Err(Error::param("measurement_counts", "must not be empty"));
        }
        if self.mode == Mode::PsrVsSnr && self.snr_values_db.is_empty() {
            return Err(Error::param("snr_values_db", "must not be empty in psr_vs_snr mode"));
        }
        if let Some(&k) = self.target_counts.iter().find(|&&k| k == 0 || k > self.grid.len()) {
            return Err(Error::param("target_counts", format!("{k} targets on a grid of {}", self.grid.len())));
        }
        let total = self.params.total_samples();
        if let Some(&m) = self.measurement_counts.iter().find(|&&m| m == 0 || m > total) {
            return Err(Error::InvalidSelection {
                requested: m,
                available: total,
            });
        }
        if let Some(s) = self.snr_values_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return Err(Error::param("snr_values_db", format!("unusable SNR {s}")));
        }
        RecoveryConfig {
            sparsity: 1,
            ..self.recovery
        }
        .validate()
    }

    /// Sweep points in output order: `k`, then `M`, then SNR for
    /// `psr_vs_m`; `k`, then SNR, then `M` for `psr_vs_snr`.
    pub fn points(&self) -> Vec<(usize, usize, Option<f64>)> {
        let snrs: Vec<Option<f64>> = if self.snr_values_db.is_empty() {
            vec![None]
        } else {
            self.snr_values_db.iter().map(|s| Some(*s)).collect()
        };
        let mut out = Vec::new();
        for &k in &self.target_counts {
            match self.mode {
                Mode::PsrVsSnr => {
                    for &m in &self.measurement_counts {
                        for &s in &snrs {
                            out.push((k, m, s));
                        }
                    }
                }
                _ => {
                    for &s in &snrs {
                        for &m in &self.measurement_counts {
                            out.push((k, m, s));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Aggregate over the trials of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PsrPoint {
    pub k: usize,
    pub m: usize,
    /// `None` for noiseless trials.
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub successes: usize,
    /// Trials where the solver returned an error.
    pub failures: usize,
    /// Mean relative error over trials that produced an estimate; NaN when
    /// none did.
    pub mean_rel_error: f64,
}

impl PsrPoint {
    pub fn psr(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// `k` distinct grid cells drawn uniformly, each a unit-reflectivity target.
pub fn random_scene(k: usize, grid: &ExtendedGrid, seed: u64) -> Result<(Scene, SparseProfile)> {
    grid.validate()?;
    if k > grid.len() {
        return Err(Error::param("k", format!("{k} targets on a grid of {}", grid.len())));
    }
    let mut rng = splitmix(seed);
    let one = Complex64::new(1.0, 0.0);
    let flat = sample_sorted(&mut rng, grid.len(), k);
    let coords: Vec<GridCoord> = flat.iter().map(|&g| grid.unflatten_unchecked(g)).collect();
    let targets = coords
        .iter()
        .map(|&c| {
            let kin = grid.physical_unchecked(c);
            Target::new(kin.x, kin.y, kin.vx, kin.vy, one)
        })
        .collect();
    let truth = SparseProfile::new(*grid, coords.into_iter().map(|c| (c, one)).collect())?;
    Ok((Scene::new(targets), truth))
}

/// Seeds for one trial's random draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub selection: u64,
    pub noise: u64,
}

impl TrialSeeds {
    pub fn from_trial(trial_seed: u64) -> Self {
        TrialSeeds {
            selection: derive_seed(trial_seed, &[1]),
            noise: derive_seed(trial_seed, &[2]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub success: bool,
    /// `None` when the solver failed.
    pub relative_error: Option<f64>,
    pub diagnostics: Option<Diagnostics>,
    pub error: Option<String>,
}

/// Simulates, selects `m` rows, recovers with `k` equal to the true target
/// count and scores the estimate.
///
/// Noiseless trials evaluate the echo only at the selected rows. Noisy
/// trials simulate the full echo, add noise at `snr_db` and halt the solver
/// once the residual reaches the expected noise norm `sqrt(M) * sigma`,
/// unless an explicit threshold is configured.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    params: &RadarParams,
    grid: &ExtendedGrid,
    scene: &Scene,
    truth: &SparseProfile,
    m: usize,
    snr_db: Option<f64>,
    seeds: TrialSeeds,
    recovery: &RecoveryConfig,
    cache_policy: CachePolicy,
) -> Result<TrialOutcome> {
    if truth.is_empty() {
        return Err(Error::ZeroTruth);
    }
    let selection = select_measurements(m, params.total_samples(), seeds.selection)?;
    let mut cfg = RecoveryConfig {
        sparsity: truth.len(),
        ..*recovery
    };
    let y = match snr_db.filter(|s| *s != f64::INFINITY) {
        None => echo::scene_echo_at(scene, params, selection.indices())?,
        Some(snr) => {
            let clean = echo::scene_echo(scene, params)?;
            let variance = echo::noise_variance(&clean, snr)?;
            if cfg.residual_threshold.is_none() {
                cfg.residual_threshold = Some((m as f64 * variance).sqrt());
            }
            let noisy = echo::add_noise(&clean, snr, seeds.noise)?;
            selection.restrict(noisy.as_slice())?
        }
    };
    let op = SensingOperator::new(*params, *grid, selection, cache_policy)?;
    Ok(match recover(&op, &y, &cfg) {
        Ok(rec) => {
            let err = relative_error(&rec.profile, truth)?;
            TrialOutcome {
                success: err < SUCCESS_THRESHOLD,
                relative_error: Some(err),
                diagnostics: Some(rec.diagnostics),
                error: None,
            }
        }
        Err(e) => TrialOutcome {
            success: false,
            relative_error: None,
            diagnostics: None,
            error: Some(e.to_string()),
        },
    })
}

/// Seed of trial `trial` at point `(k, m, snr)`.
pub fn trial_seed(base_seed: u64, k: usize, m: usize, snr_db: Option<f64>, trial: usize) -> u64 {
    let snr_word = snr_db.map_or(u64::MAX, f64::to_bits);
    derive_seed(base_seed, &[k as u64, m as u64, snr_word, trial as u64])
}

fn one_trial(spec: &ExperimentSpec, k: usize, m: usize, snr: Option<f64>, trial: usize) -> TrialOutcome {
    let seed = trial_seed(spec.base_seed, k, m, snr, trial);
    let outcome = random_scene(k, &spec.grid, derive_seed(seed, &[0])).and_then(|(scene, truth)| {
        run_trial(
            &spec.params,
            &spec.grid,
            &scene,
            &truth,
            m,
            snr,
            TrialSeeds::from_trial(seed),
            &spec.recovery,
            spec.cache_policy,
        )
    });
    outcome.unwrap_or_else(|e| TrialOutcome {
        success: false,
        relative_error: None,
        diagnostics: None,
        error: Some(e.to_string()),
    })
}

/// Runs every point of the sweep. Trials run in parallel when enabled; the
/// reduction walks them in fixed order.
pub fn psr_sweep(spec: &ExperimentSpec) -> Result<Vec<PsrPoint>> {
    spec.validate()?;
    if spec.mode == Mode::Fig2 {
        return Err(Error::param("mode", "fig2 is a single comparison, not a sweep"));
    }
    let points = spec.points();
    let t = spec.trials_per_point;
    let outcomes = par::map_range(points.len() * t, |i| {
        let (k, m, snr) = points[i / t];
        one_trial(spec, k, m, snr, i % t)
    });
    Ok(points
        .iter()
        .zip(outcomes.chunks(t))
        .map(|(&(k, m, snr_db), trials)| {
            let errors: Vec<f64> = trials.iter().filter_map(|o| o.relative_error).collect();
            PsrPoint {
                k,
                m,
                snr_db,
                trials: t,
                successes: trials.iter().filter(|o| o.success).count(),
                failures: trials.len() - errors.len(),
                mean_rel_error: if errors.is_empty() {
                    f64::NAN
                } else {
                    errors.iter().sum::<f64>() / errors.len() as f64
                },
            }
        })
        .collect())
}

pub const CSV_HEADER: &str = "mode,k,M,snr_db,trials,successes,psr,mean_rel_error,base_seed";

fn fmt_snr(s: Option<f64>) -> String {
    s.map_or_else(|| "inf".to_string(), |v| v.to_string())
}

/// Sweep results as CSV. `comments` are written first, each prefixed `# `.
pub fn psr_csv(spec: &ExperimentSpec, points: &[PsrPoint], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let _ = writeln!(out, "{CSV_HEADER}");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:e},{}",
            spec.mode.as_str(),
            p.k,
            p.m,
            fmt_snr(p.snr_db),
            p.trials,
            p.successes,
            p.psr(),
            p.mean_rel_error,
            spec.base_seed
        );
    }
    out
}

/// Side-by-side CS and matched-filter imaging of one scene.
#[derive(Debug, Clone)]
pub struct ImagingComparison {
    pub truth: SparseProfile,
    pub estimate: SparseProfile,
    pub diagnostics: Diagnostics,
    pub relative_error: f64,
    pub cs_image: IntensityImage,
    pub cs_metrics: SidelobeMetrics,
    /// Matched-filter image at zero velocity.
    pub mf_static: IntensityImage,
    pub mf_metrics: SidelobeMetrics,
    /// Per target: matched-filter value at its cell under the static
    /// hypothesis over the value under its own velocity, in dB.
    pub static_focus_loss_db: Vec<f64>,
}

/// Recovers `scene` from `m` random rows of its noiseless echo and images it
/// with the matched filter at zero velocity and at each target's velocity.
pub fn compare_imaging(
    params: &RadarParams,
    grid: &ExtendedGrid,
    scene: &Scene,
    m: usize,
    selection_seed: u64,
    recovery: &RecoveryConfig,
    cache_policy: CachePolicy,
) -> Result<ImagingComparison> {
    let coords = scene
        .targets
        .iter()
        .map(|t| {
            grid.locate(&t.kinematics)
                .ok_or_else(|| Error::param("scene", "targets must lie on the grid"))
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = SparseProfile::new(*grid, coords.iter().zip(&scene.targets).map(|(c, t)| (*c, t.reflectivity)).collect())?;
    let full = echo::scene_echo(scene, params)?;
    let selection = select_measurements(m, params.total_samples(), selection_seed)?;
    let y = selection.restrict(full.as_slice())?;
    let op = SensingOperator::new(*params, *grid, selection, cache_policy)?;
    let rec = recover(
        &op,
        &y,
        &RecoveryConfig {
            sparsity: truth.len(),
            ..*recovery
        },
    )?;
    let relative_error = relative_error(&rec.profile, &truth)?;
    let positions: Vec<(usize, usize)> = coords.iter().map(|c| (c.n1, c.n2)).collect();
    let cs_image = baseline::profile_image(&rec.profile);
    let cs_metrics = baseline::sidelobe_metrics(&cs_image, &positions)?;
    let mf_static = baseline::matched_filter_image(&full, params, grid, (0.0, 0.0))?;
    let mf_metrics = baseline::sidelobe_metrics(&mf_static, &positions)?;
    let mut static_focus_loss_db = Vec::with_capacity(coords.len());
    for (c, t) in coords.iter().zip(&scene.targets) {
        let own = baseline::matched_filter_image(&full, params, grid, (t.kinematics.vx, t.kinematics.vy))?;
        static_focus_loss_db.push(20.0 * (mf_static.get(c.n1, c.n2) / own.get(c.n1, c.n2)).log10());
    }
    Ok(ImagingComparison {
        truth,
        estimate: rec.profile,
        diagnostics: rec.diagnostics,
        relative_error,
        cs_image,
        cs_metrics,
        mf_static,
        mf_metrics,
        static_focus_loss_db,
    })
}
