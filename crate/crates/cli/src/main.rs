//! `sarcs`: simulate echoes, image them with CoSaMP or the matched filter,
//! and run recovery-rate sweeps.

mod config;

use clap::{Parser, Subcommand};
use config::RunConfig;
use sarcs::baseline::{self, IntensityImage};
use sarcs::dictionary::{select_measurements, CachePolicy, SensingOperator};
use sarcs::echo::{self, EchoMatrix};
use sarcs::experiments::{self, Mode};
use sarcs::recovery::{recover, relative_error, SparseProfile};
use sarcs::{io, Error};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sarcs", version, about = "Compressive-sensing SAR imaging of moving targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration; omitted sections take reference defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads, overriding `threads`.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured scene; writes echo.bin and truth.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Recover the sparse profile from an echo file with CoSaMP.
    ImageCs {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        echo: PathBuf,
        /// Ground-truth profile CSV for the relative error.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Matched-filter images for each configured velocity hypothesis.
    ImageMf {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        echo: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the configured experiment and write psr.csv (or the imaging
    /// comparison in fig2 mode).
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Print a starting configuration.
    InitConfig {
        #[arg(long, default_value = "default", value_parser = clap::builder::PossibleValuesParser::new(config::PROFILES))]
        profile: String,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Io(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io(_) | Error::Format(_) => Failure::Io(msg),
            Error::ZeroEnergyEcho | Error::SingularZeroDoppler { .. } | Error::EmptyImage | Error::ZeroTruth => {
                Failure::Numeric(msg)
            }
            _ => Failure::Config(msg),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

type Run<T> = Result<T, Failure>;

struct Context {
    cfg: RunConfig,
    out: PathBuf,
}

impl Context {
    fn load(common: &Common) -> Run<Self> {
        let mut cfg = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                RunConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(t) = common.threads {
            cfg.threads = t;
        }
        if let Some(dir) = &common.out {
            cfg.output.directory = dir.clone();
        }
        configure_threads(cfg.threads)?;
        let out = cfg.output.directory.clone();
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        let ctx = Context { cfg, out };
        ctx.write("config.toml", ctx.cfg.to_toml().as_bytes())?;
        Ok(ctx)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Run<()> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))
    }

    fn write_image(&self, stem: &str, image: &IntensityImage) -> Run<()> {
        if self.cfg.output.pgm {
            self.write(&format!("{stem}.pgm"), &io::pgm(image))?;
        }
        if self.cfg.output.csv {
            self.write(&format!("{stem}.csv"), io::image_csv(image).as_bytes())?;
        }
        Ok(())
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) -> Run<()> {
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Config(format!("threads: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_threads: usize) -> Run<()> {
    Ok(())
}

fn read_echo(path: &Path, params: &sarcs::radar::RadarParams) -> Run<EchoMatrix> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let echo = io::read_echo(&mut std::io::BufReader::new(file))?;
    echo.check_dims(params)?;
    Ok(echo)
}

fn read_truth(path: &Path, grid: sarcs::radar::ExtendedGrid) -> Run<SparseProfile> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(io::read_profile_csv(file, grid)?)
}

fn simulate(common: &Common) -> Run<()> {
    let ctx = Context::load(common)?;
    let params = ctx.cfg.radar()?;
    let grid = ctx.cfg.grid()?;
    let scene = ctx.cfg.scene()?;
    let mut echo = echo::scene_echo(&scene, &params)?;
    if let Some(snr) = ctx.cfg.scene.snr_db {
        echo = echo::add_noise(&echo, snr, ctx.cfg.scene.noise_seed)?;
    }
    let mut bin = Vec::new();
    io::write_echo(&mut bin, &echo)?;
    ctx.write("echo.bin", &bin)?;
    if ctx.cfg.output.csv {
        ctx.write("echo_magnitude.csv", io::echo_magnitude_csv(&echo).as_bytes())?;
    }
    let entries = scene
        .targets
        .iter()
        .map(|t| {
            grid.locate(&t.kinematics)
                .map(|c| (c, t.reflectivity))
                .ok_or_else(|| Failure::Config(format!("target {:?} is not on the grid", t.kinematics)))
        })
        .collect::<Run<Vec<_>>>()?;
    let truth = SparseProfile::new(grid, entries)?;
    ctx.write("truth.csv", io::profile_csv(&truth, false)?.as_bytes())?;
    println!(
        "simulated {} target(s): {} x {} samples, energy {}",
        scene.targets.len(),
        echo.range_samples(),
        echo.azimuth_samples(),
        echo.energy()
    );
    Ok(())
}

/// Builds the operator, reusing a stored dictionary when one matches.
fn operator(ctx: &Context, params: sarcs::radar::RadarParams, grid: sarcs::radar::ExtendedGrid, m: usize) -> Run<SensingOperator> {
    let selection = select_measurements(m, params.total_samples(), ctx.cfg.recovery.selection_seed)?;
    let policy: CachePolicy = ctx.cfg.recovery.cache_policy.into();
    let Some(path) = &ctx.cfg.recovery.cache_file else {
        return Ok(SensingOperator::new(params, grid, selection, policy)?);
    };
    if path.exists() {
        let file = fs::File::open(path).map_err(io_err(path))?;
        let (rows, cols, data) = io::read_cache(&mut std::io::BufReader::new(file))?;
        if rows != m || cols != grid.len() {
            return Err(Failure::Config(format!(
                "{}: stored dictionary is {rows} x {cols}, configuration needs {m} x {}",
                path.display(),
                grid.len()
            )));
        }
        let op = SensingOperator::with_cached_matrix(params, grid, selection, data)?;
        spot_check(&op)?;
        return Ok(op);
    }
    let op = SensingOperator::new(params, grid, selection, CachePolicy::FullRowCache)?;
    let mut bytes = Vec::new();
    io::write_cache(&mut bytes, m, op.cached_matrix().expect("cache was built"))?;
    fs::write(path, bytes).map_err(io_err(path))?;
    Ok(op)
}

/// Compares a few stored entries with fresh evaluations, catching a cache
/// written for another selection or geometry.
fn spot_check(op: &SensingOperator) -> Run<()> {
    let cache = op.cached_matrix().expect("cache present");
    let m = op.selection().len();
    let n = op.grid().len();
    let nr = op.params().range_samples;
    for k in 0..16usize {
        let g = (k * 7919 + 13) % n;
        let i = (k * 104729 + 5) % m;
        let pos = op.selection().indices()[i];
        let fresh = op.atom_sample(op.grid().unflatten(g)?, pos % nr, pos / nr)?;
        if (cache[g * m + i] - fresh).norm() > 1e-9 {
            return Err(Failure::Config(
                "stored dictionary does not match the configured geometry and selection".into(),
            ));
        }
    }
    Ok(())
}

fn image_cs(common: &Common, echo_path: &Path, truth_path: Option<&Path>) -> Run<()> {
    let ctx = Context::load(common)?;
    let params = ctx.cfg.radar()?;
    let grid = ctx.cfg.grid()?;
    let echo = read_echo(echo_path, &params)?;
    let truth = truth_path.map(|p| read_truth(p, grid)).transpose()?;
    let m = ctx.cfg.recovery.measurements;
    let targets = match &truth {
        Some(t) => t.len(),
        None => ctx.cfg.scene()?.targets.len(),
    };
    let cfg = ctx.cfg.recovery_config(targets)?;
    let op = operator(&ctx, params, grid, m)?;
    let y = op.selection().restrict(echo.as_slice())?;
    let rec = recover(&op, &y, &cfg).map_err(|e| Failure::Numeric(e.to_string()))?;
    ctx.write("profile.csv", io::profile_csv(&rec.profile, true)?.as_bytes())?;
    ctx.write("diagnostics.csv", io::diagnostics_csv(&rec.diagnostics).as_bytes())?;
    ctx.write_image("cs_image", &baseline::profile_image(&rec.profile))?;
    let d = &rec.diagnostics;
    let mut summary = format!(
        "M={m} k={} iterations={} residual={:e} threshold={:e} halt={}",
        cfg.sparsity,
        d.iterations.len(),
        d.final_residual_norm,
        d.threshold,
        d.halt_reason.as_str()
    );
    if let Some(t) = &truth {
        summary.push_str(&format!(" relative_error={:e}", relative_error(&rec.profile, t)?));
    }
    summary.push('\n');
    ctx.write("summary.txt", summary.as_bytes())?;
    print!("{summary}");
    for (c, a) in rec.profile.entries() {
        let k = grid.to_physical(*c)?;
        println!("  x={} y={} vx={} vy={} |a|={}", k.x, k.y, k.vx, k.vy, a.norm());
    }
    Ok(())
}

fn image_mf(common: &Common, echo_path: &Path, truth_path: Option<&Path>) -> Run<()> {
    let ctx = Context::load(common)?;
    let params = ctx.cfg.radar()?;
    let grid = ctx.cfg.grid()?;
    let echo = read_echo(echo_path, &params)?;
    let truth = truth_path.map(|p| read_truth(p, grid)).transpose()?;
    let mut summary = String::new();
    for &[vx, vy] in &ctx.cfg.baseline.velocity_hypotheses {
        let image = baseline::matched_filter_image(&echo, &params, &grid, (vx, vy))?;
        ctx.write_image(&format!("mf_vx{vx}_vy{vy}"), &image)?;
        let positions: Vec<(usize, usize)> = match &truth {
            Some(t) => t.coords().iter().map(|c| (c.n1, c.n2)).collect(),
            None => image.argmax().into_iter().collect(),
        };
        let line = if image.max() > 0.0 {
            let m = baseline::sidelobe_metrics(&image, &positions)?;
            let (r, c) = image.argmax().expect("nonempty");
            format!(
                "vx={vx} vy={vy} peak={} at=({r},{c}) pslr_db={} range_width={} azimuth_width={}\n",
                image.max(),
                m.pslr_db,
                m.range_width,
                m.azimuth_width
            )
        } else {
            format!("vx={vx} vy={vy} peak=0\n")
        };
        summary.push_str(&line);
    }
    ctx.write("summary.txt", summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn sweep(common: &Common) -> Run<()> {
    let ctx = Context::load(common)?;
    let spec = ctx.cfg.experiment()?;
    if spec.mode == Mode::Fig2 {
        return fig2(&ctx);
    }
    let points = experiments::psr_sweep(&spec)?;
    let csv = experiments::psr_csv(&spec, &points, &[ctx.cfg.settings_toml()]);
    ctx.write("psr.csv", csv.as_bytes())?;
    for p in &points {
        println!(
            "k={} M={} snr_db={} psr={} ({}/{})",
            p.k,
            p.m,
            p.snr_db.map_or("inf".to_string(), |s| s.to_string()),
            p.psr(),
            p.successes,
            p.trials
        );
    }
    Ok(())
}

fn fig2(ctx: &Context) -> Run<()> {
    let params = ctx.cfg.radar()?;
    let grid = ctx.cfg.grid()?;
    let scene = ctx.cfg.scene()?;
    let cfg = ctx.cfg.recovery_config(scene.targets.len())?;
    let cmp = experiments::compare_imaging(
        &params,
        &grid,
        &scene,
        ctx.cfg.recovery.measurements,
        ctx.cfg.recovery.selection_seed,
        &cfg,
        ctx.cfg.recovery.cache_policy.into(),
    )
    .map_err(|e| match e {
        Error::InvalidParameter { .. } | Error::InvalidSelection { .. } | Error::SparsityTooLarge { .. } => Failure::from(e),
        other => Failure::Numeric(other.to_string()),
    })?;
    ctx.write("profile.csv", io::profile_csv(&cmp.estimate, true)?.as_bytes())?;
    ctx.write("truth.csv", io::profile_csv(&cmp.truth, false)?.as_bytes())?;
    ctx.write_image("cs_image", &cmp.cs_image)?;
    ctx.write_image("mf_static", &cmp.mf_static)?;
    let losses: Vec<String> = cmp.static_focus_loss_db.iter().map(|l| l.to_string()).collect();
    let summary = format!(
        "relative_error={:e}\ncs_pslr_db={}\nmf_pslr_db={}\nmf_range_width={}\nmf_azimuth_width={}\nstatic_focus_loss_db={}\n",
        cmp.relative_error,
        cmp.cs_metrics.pslr_db,
        cmp.mf_metrics.pslr_db,
        cmp.mf_metrics.range_width,
        cmp.mf_metrics.azimuth_width,
        losses.join(",")
    );
    ctx.write("summary.txt", summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => simulate(common),
        Command::ImageCs { common, echo, truth } => image_cs(common, echo, truth.as_deref()),
        Command::ImageMf { common, echo, truth } => image_mf(common, echo, truth.as_deref()),
        Command::Sweep { common } => sweep(common),
        Command::InitConfig { profile } => {
            print!("{}", config::profile(profile).expect("validated by clap").to_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
