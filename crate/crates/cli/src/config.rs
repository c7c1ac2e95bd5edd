//! Run configuration: TOML with every section optional, defaults taken from
//! the reference radar, grid and three-target scene.

use sarcs::dictionary::CachePolicy;
use sarcs::experiments::{ExperimentSpec, Mode};
use sarcs::radar::{ExtendedGrid, RadarParams, Scene, Target, SPEED_OF_LIGHT};
use sarcs::recovery::RecoveryConfig;
use sarcs::{reference, Complex64};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 0 lets the runtime decide.
    pub threads: usize,
    pub radar: RadarSection,
    pub grid: GridSection,
    pub scene: SceneSection,
    pub recovery: RecoverySection,
    pub baseline: BaselineSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            threads: 0,
            radar: RadarSection::default(),
            grid: GridSection::default(),
            scene: SceneSection::default(),
            recovery: RecoverySection::default(),
            baseline: BaselineSection::default(),
            experiment: ExperimentSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarSection {
    pub platform_speed: f64,
    pub carrier_frequency: f64,
    pub bandwidth: f64,
    pub pulse_width: f64,
    pub range_sample_rate: f64,
    pub prf: f64,
    pub range_samples: usize,
    pub azimuth_samples: usize,
    pub propagation_speed: f64,
    /// Fast time of the first range sample; defaults to the two-way delay
    /// to `grid.x_origin`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range_window_start: Option<f64>,
}

impl Default for RadarSection {
    fn default() -> Self {
        let p = reference::radar_params();
        RadarSection {
            platform_speed: p.platform_speed,
            carrier_frequency: p.carrier_frequency,
            bandwidth: p.bandwidth,
            pulse_width: p.pulse_width,
            range_sample_rate: p.range_sample_rate,
            prf: p.prf,
            range_samples: p.range_samples,
            azimuth_samples: p.azimuth_samples,
            propagation_speed: SPEED_OF_LIGHT,
            range_window_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
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

impl Default for GridSection {
    fn default() -> Self {
        let g = reference::scene_grid();
        GridSection {
            x_origin: g.x_origin,
            y_origin: g.y_origin,
            vx_origin: g.vx_origin,
            vy_origin: g.vy_origin,
            bin_x: g.bin_x,
            bin_y: g.bin_y,
            bin_vx: g.bin_vx,
            bin_vy: g.bin_vy,
            nx: g.nx,
            ny: g.ny,
            nvx: g.nvx,
            nvy: g.nvy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetEntry {
    /// Slant range at zero-Doppler geometry, metres.
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    #[serde(default = "one")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    /// Explicit targets. Ignored when `random_targets` is set.
    pub targets: Vec<TargetEntry>,
    /// Draw this many unit targets uniformly on the grid instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_targets: Option<usize>,
    pub random_seed: u64,
    /// Adds white noise at this SNR when simulating; absent means noiseless.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub noise_seed: u64,
}

impl Default for SceneSection {
    fn default() -> Self {
        SceneSection {
            targets: reference::three_target_scene()
                .targets
                .iter()
                .map(|t| TargetEntry {
                    x: t.kinematics.x,
                    y: t.kinematics.y,
                    vx: t.kinematics.vx,
                    vy: t.kinematics.vy,
                    re: t.reflectivity.re,
                    im: t.reflectivity.im,
                })
                .collect(),
            random_targets: None,
            random_seed: 0,
            snr_db: None,
            noise_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheChoice {
    None,
    FullRowCache,
}

impl From<CacheChoice> for CachePolicy {
    fn from(c: CacheChoice) -> Self {
        match c {
            CacheChoice::None => CachePolicy::None,
            CacheChoice::FullRowCache => CachePolicy::FullRowCache,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoverySection {
    /// Atoms to recover; 0 means the number of scene targets.
    pub sparsity: usize,
    pub measurements: usize,
    pub selection_seed: u64,
    /// Absolute residual threshold; absent means `1e-6 * |y|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_threshold: Option<f64>,
    pub max_iterations: usize,
    pub stall_tolerance: f64,
    pub cache_policy: CacheChoice,
    /// Restricted-dictionary file reused across runs; built and written
    /// when missing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_file: Option<PathBuf>,
}

impl Default for RecoverySection {
    fn default() -> Self {
        let r = RecoveryConfig::default();
        RecoverySection {
            sparsity: 0,
            measurements: 100,
            selection_seed: 2024,
            residual_threshold: None,
            max_iterations: r.max_iterations,
            stall_tolerance: r.stall_tolerance,
            cache_policy: CacheChoice::FullRowCache,
            cache_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    /// `(vx, vy)` pairs to focus the matched-filter image for.
    pub velocity_hypotheses: Vec<[f64; 2]>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            velocity_hypotheses: vec![[0.0, 0.0], [10.0, 0.0], [4.0, 4.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub mode: String,
    pub target_counts: Vec<usize>,
    pub measurement_counts: Vec<usize>,
    pub snr_values_db: Vec<f64>,
    pub trials_per_point: usize,
    pub base_seed: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            mode: "psr_vs_m".into(),
            target_counts: vec![1, 2, 3, 4],
            measurement_counts: (1..=10).map(|i| 10 * i).collect(),
            snr_values_db: vec![],
            trials_per_point: 200,
            base_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Write PGM images.
    pub pgm: bool,
    /// Write CSV images and the echo magnitude CSV.
    pub csv: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            pgm: true,
            csv: true,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// The TOML with `threads` and `[output]` at their defaults, so the text
    /// depends only on settings that affect results.
    pub fn settings_toml(&self) -> String {
        RunConfig {
            threads: 0,
            output: OutputSection::default(),
            ..self.clone()
        }
        .to_toml()
    }

    pub fn grid(&self) -> sarcs::Result<ExtendedGrid> {
        let g = &self.grid;
        let grid = ExtendedGrid {
            x_origin: g.x_origin,
            y_origin: g.y_origin,
            vx_origin: g.vx_origin,
            vy_origin: g.vy_origin,
            bin_x: g.bin_x,
            bin_y: g.bin_y,
            bin_vx: g.bin_vx,
            bin_vy: g.bin_vy,
            nx: g.nx,
            ny: g.ny,
            nvx: g.nvx,
            nvy: g.nvy,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn radar(&self) -> sarcs::Result<RadarParams> {
        let r = &self.radar;
        let grid = self.grid()?;
        let start = r
            .range_window_start
            .unwrap_or_else(|| RadarParams::window_start_for(&grid, r.propagation_speed));
        let p = RadarParams::new(
            r.platform_speed,
            r.carrier_frequency,
            r.bandwidth,
            r.pulse_width,
            r.range_sample_rate,
            r.prf,
            r.range_samples,
            r.azimuth_samples,
            start,
            r.propagation_speed,
        )?;
        grid.validate_against(&p)?;
        Ok(p)
    }

    pub fn scene(&self) -> sarcs::Result<Scene> {
        if let Some(k) = self.scene.random_targets {
            let (scene, _) = sarcs::experiments::random_scene(k, &self.grid()?, self.scene.random_seed)?;
            return Ok(scene);
        }
        let p = self.radar()?;
        let targets = self
            .scene
            .targets
            .iter()
            .map(|t| {
                let target = Target::new(t.x, t.y, t.vx, t.vy, Complex64::new(t.re, t.im));
                target.validate(&p)?;
                Ok(target)
            })
            .collect::<sarcs::Result<Vec<_>>>()?;
        Ok(Scene::new(targets))
    }

    /// Solver settings for a scene of `targets` targets.
    pub fn recovery_config(&self, targets: usize) -> sarcs::Result<RecoveryConfig> {
        let r = &self.recovery;
        let cfg = RecoveryConfig {
            sparsity: if r.sparsity == 0 { targets } else { r.sparsity },
            residual_threshold: r.residual_threshold,
            max_iterations: r.max_iterations,
            stall_tolerance: r.stall_tolerance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn experiment(&self) -> sarcs::Result<ExperimentSpec> {
        let e = &self.experiment;
        let spec = ExperimentSpec {
            mode: e.mode.parse::<Mode>()?,
            target_counts: e.target_counts.clone(),
            measurement_counts: e.measurement_counts.clone(),
            snr_values_db: e.snr_values_db.clone(),
            trials_per_point: e.trials_per_point,
            base_seed: e.base_seed,
            params: self.radar()?,
            grid: self.grid()?,
            recovery: RecoveryConfig {
                sparsity: 1,
                ..self.recovery_config(1)?
            },
            cache_policy: self.recovery.cache_policy.into(),
        };
        if spec.mode != Mode::Fig2 {
            spec.validate()?;
        }
        Ok(spec)
    }
}

/// Named starting points for `init-config`.
pub fn profile(name: &str) -> Option<RunConfig> {
    let mut c = RunConfig::default();
    match name {
        "default" => {}
        "fig2" => {
            c.experiment.mode = "fig2".into();
            c.output.directory = "out/fig2".into();
        }
        "fig3" => {
            c.experiment.mode = "psr_vs_m".into();
            c.experiment.trials_per_point = 200;
            c.output.directory = "out/fig3".into();
        }
        "fig4" => {
            c.experiment.mode = "psr_vs_snr".into();
            c.experiment.target_counts = vec![1];
            c.experiment.measurement_counts = vec![20, 40, 60, 100];
            c.experiment.snr_values_db = (0..=10).map(|i| -15.0 + 5.0 * i as f64).collect();
            c.experiment.trials_per_point = 100;
            c.output.directory = "out/fig4".into();
        }
        "smoke" => {
            c.experiment.mode = "psr_vs_m".into();
            c.experiment.target_counts = vec![1];
            c.experiment.measurement_counts = vec![40];
            c.experiment.trials_per_point = 1;
            c.output.directory = "out/smoke".into();
        }
        _ => return None,
    }
    Some(c)
}

pub const PROFILES: [&str; 5] = ["default", "fig2", "fig3", "fig4", "smoke"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_reference_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.radar().unwrap(), reference::radar_params());
        assert_eq!(c.grid().unwrap(), reference::scene_grid());
        assert_eq!(c.scene().unwrap(), reference::three_target_scene());
    }

    #[test]
    fn effective_config_roundtrips() {
        for name in PROFILES {
            let c = profile(name).unwrap();
            assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c, "{name}");
        }
    }

    #[test]
    fn unknown_keys_are_reported_by_name() {
        let err = RunConfig::parse("[radar]\nplatform_sped = 3.0\n").unwrap_err();
        assert!(err.contains("platform_sped"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = RunConfig::parse("[recovery]\nmeasurements = 60\n[grid]\nnx = 5\n").unwrap();
        assert_eq!(c.recovery.measurements, 60);
        assert_eq!(c.recovery.selection_seed, 2024);
        assert_eq!(c.grid().unwrap().nx, 5);
        assert_eq!(c.grid().unwrap().ny, 31);
    }

    #[test]
    fn settings_text_ignores_execution_fields() {
        let mut c = RunConfig::default();
        let before = c.settings_toml();
        c.threads = 7;
        c.output.directory = "elsewhere".into();
        assert_eq!(c.settings_toml(), before);
        c.recovery.measurements = 61;
        assert_ne!(c.settings_toml(), before);
    }

    #[test]
    fn sparsity_zero_follows_scene() {
        let c = RunConfig::default();
        assert_eq!(c.recovery_config(3).unwrap().sparsity, 3);
    }

    #[test]
    fn invalid_values_surface_as_errors() {
        let c = RunConfig::parse("[radar]\nprf = -1.0\n").unwrap();
        assert!(c.radar().is_err());
        let c = RunConfig::parse("[experiment]\nmode = \"fig9\"\n").unwrap();
        assert!(c.experiment().is_err());
    }
}
