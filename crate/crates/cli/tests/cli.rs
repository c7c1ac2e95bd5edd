use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const RADAR_GRID: &str = r#"
[radar]
platform_speed = 200.0
carrier_frequency = 10e9
bandwidth = 30e6
pulse_width = 2e-6
range_sample_rate = 40e6
prf = 400.0
range_samples = 100
azimuth_samples = 48

[grid]
x_origin = 9990.3
y_origin = 0.0
vx_origin = 0.0
vy_origin = 0.0
bin_x = 5.0
bin_y = 6.0
bin_vx = 4.0
bin_vy = 4.0
nx = 4
ny = 4
nvx = 2
nvy = 2
"#;

const TWO_TARGETS: &str = r#"
[scene]
targets = [
  { x = 9995.3, y = 12.0, vx = 0.0, vy = 0.0 },
  { x = 10005.3, y = 6.0, vx = 4.0, vy = 4.0, re = 0.5, im = -0.5 },
]
"#;

const REST: &str = r#"
[recovery]
measurements = 60
selection_seed = 5

[baseline]
velocity_hypotheses = [[0.0, 0.0], [4.0, 4.0]]
"#;

fn small(scene: &str, extra: &str) -> String {
    format!("{RADAR_GRID}{scene}{REST}{extra}")
}

fn sarcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sarcs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    write(dir, name, &small(TWO_TARGETS, extra))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate(dir: &Path, cfg: &Path, out: &str) -> PathBuf {
    let out = dir.join(out);
    let o = sarcs(&["simulate", "-c", s(cfg), "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn reference_echo_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = sarcs(&["simulate", "-o", s(&out)]);
    assert!(o.status.success());
    let bytes = fs::read(out.join("echo.bin")).unwrap();
    assert_eq!(&bytes[..8], b"SARECHO\0");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1213);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 595);
    assert_eq!(bytes.len(), 16 + 1213 * 595 * 16);
    let truth = fs::read_to_string(out.join("truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 4);
}

#[test]
fn reference_scene_is_recovered_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(sarcs(&["simulate", "-o", s(&sim)]).status.success());
    let cs = dir.path().join("cs");
    let o = sarcs(&[
        "image-cs",
        "-o",
        s(&cs),
        "--echo",
        s(&sim.join("echo.bin")),
        "--truth",
        s(&sim.join("truth.csv")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("M=100 k=3 "), "{text}");
    assert!(text.contains("relative_error="));
    let profile = fs::read_to_string(cs.join("profile.csv")).unwrap();
    let rows: Vec<&str> = profile.lines().collect();
    assert_eq!(rows[0], "flat_index,n1,n2,p,q,x,y,vx,vy,re,im");
    let positions: Vec<String> = rows[1..]
        .iter()
        .map(|r| r.split(',').skip(5).take(4).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(positions, vec!["29996.5,2.5,0,0", "30000,10,10,0", "30004,8,4,4"]);
}

#[test]
fn empty_scene_gives_zero_echo_and_zero_image() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", &small("[scene]\ntargets = []\n", ""));
    let sim = simulate(dir.path(), &cfg, "sim");
    let bytes = fs::read(sim.join("echo.bin")).unwrap();
    assert!(bytes[16..].iter().all(|b| *b == 0));
    let mf = dir.path().join("mf");
    let o = sarcs(&["image-mf", "-c", s(&cfg), "-o", s(&mf), "--echo", s(&sim.join("echo.bin"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let img = fs::read_to_string(mf.join("mf_vx0_vy0.csv")).unwrap();
    assert!(img.split([',', '\n']).filter(|v| !v.is_empty()).all(|v| v == "0"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "run.toml", "");
    let a = simulate(dir.path(), &cfg, "a");
    let b = simulate(dir.path(), &cfg, "b");
    for f in ["echo.bin", "truth.csv", "echo_magnitude.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn small_scene_roundtrip_with_and_without_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "run.toml", "");
    let sim = simulate(dir.path(), &cfg, "sim");
    let echo = sim.join("echo.bin");
    let truth = sim.join("truth.csv");

    let with = dir.path().join("with");
    let o = sarcs(&["image-cs", "-c", s(&cfg), "-o", s(&with), "--echo", s(&echo), "--truth", s(&truth)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(with.join("summary.txt")).unwrap();
    let err: f64 = summary
        .split_whitespace()
        .find_map(|w| w.strip_prefix("relative_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 1e-9, "{summary}");
    for f in ["profile.csv", "diagnostics.csv", "cs_image.pgm", "cs_image.csv", "config.toml"] {
        assert!(with.join(f).exists(), "{f}");
    }

    let without = dir.path().join("without");
    let o = sarcs(&["image-cs", "-c", s(&cfg), "-o", s(&without), "--echo", s(&echo)]);
    assert!(o.status.success());
    assert!(!stdout(&o).contains("relative_error"));
}

#[test]
fn matched_filter_focuses_each_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "run.toml", "");
    let sim = simulate(dir.path(), &cfg, "sim");
    let mf = dir.path().join("mf");
    let o = sarcs(&[
        "image-mf",
        "-c",
        s(&cfg),
        "-o",
        s(&mf),
        "--echo",
        s(&sim.join("echo.bin")),
        "--truth",
        s(&sim.join("truth.csv")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("vx=0 vy=0 ") && lines[0].contains("at=(1,2)"), "{text}");
    assert!(lines[1].starts_with("vx=4 vy=4 ") && lines[1].contains("at=(3,1)"), "{text}");
    let pgm = fs::read(mf.join("mf_vx4_vy4.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n4 4\n255\n"));
}

#[test]
fn stored_dictionary_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("dict.bin");
    let cfg = config(dir.path(), "run.toml", "");
    let text = fs::read_to_string(&cfg).unwrap().replace(
        "selection_seed = 5",
        &format!("selection_seed = 5\ncache_file = {:?}", s(&cache)),
    );
    fs::write(&cfg, text).unwrap();
    let sim = simulate(dir.path(), &cfg, "sim");
    let run = |out: &str| {
        let out = dir.path().join(out);
        let o = sarcs(&["image-cs", "-c", s(&cfg), "-o", s(&out), "--echo", s(&sim.join("echo.bin"))]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("profile.csv")).unwrap()
    };
    let first = run("first");
    let bytes = fs::read(&cache).unwrap();
    assert_eq!(&bytes[..8], b"SARDICT\0");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 60);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 64);
    assert_eq!(run("second"), first);

    // A stored dictionary for a different selection is refused.
    let other = fs::read_to_string(&cfg).unwrap().replace("selection_seed = 5", "selection_seed = 6");
    fs::write(&cfg, other).unwrap();
    let o = sarcs(&["image-cs", "-c", s(&cfg), "-o", s(&dir.path().join("x")), "--echo", s(&sim.join("echo.bin"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "run.toml", "");
    let sim = simulate(dir.path(), &cfg, "sim");
    let echo = sim.join("echo.bin");

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[radar]\nplatform_sped = 1.0\n").unwrap();
    let o = sarcs(&["simulate", "-c", s(&bad), "-o", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("platform_sped"));

    let too_many = write(dir.path(), "many.toml", &small(TWO_TARGETS, "").replace("measurements = 60", "measurements = 4801"));
    let o = sarcs(&["image-cs", "-c", s(&too_many), "-o", s(&dir.path().join("x")), "--echo", s(&echo)]);
    assert_eq!(o.status.code(), Some(1));

    let o = sarcs(&["image-cs", "-c", s(&cfg), "-o", s(&dir.path().join("x")), "--echo", s(&dir.path().join("missing.bin"))]);
    assert_eq!(o.status.code(), Some(2));

    // Reference-sized echo against the small configuration.
    let big = dir.path().join("big");
    assert!(sarcs(&["simulate", "-o", s(&big)]).status.success());
    let o = sarcs(&["image-cs", "-c", s(&cfg), "-o", s(&dir.path().join("x")), "--echo", s(&big.join("echo.bin"))]);
    assert_eq!(o.status.code(), Some(1));

    let off_grid = write(
        dir.path(),
        "off.toml",
        &small(TWO_TARGETS, "").replace("[[0.0, 0.0], [4.0, 4.0]]", "[[1.0, 0.0]]"),
    );
    let o = sarcs(&["image-mf", "-c", s(&off_grid), "-o", s(&dir.path().join("x")), "--echo", s(&echo)]);
    assert_eq!(o.status.code(), Some(1));

    // Noise relative to a zero echo is undefined.
    let silent = write(dir.path(), "silent.toml", &small("[scene]\ntargets = []\nsnr_db = 10.0\n", ""));
    let o = sarcs(&["simulate", "-c", s(&silent), "-o", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(3));

    let snr_without_values = config(
        dir.path(),
        "nosnr.toml",
        "[experiment]\nmode = \"psr_vs_snr\"\ntarget_counts = [1]\nmeasurement_counts = [10]\n",
    );
    let o = sarcs(&["sweep", "-c", s(&snr_without_values), "-o", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_csv_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "sweep.toml",
        "[experiment]\nmode = \"psr_vs_snr\"\ntarget_counts = [1, 2]\nmeasurement_counts = [12, 30]\nsnr_values_db = [0.0, 20.0]\ntrials_per_point = 6\nbase_seed = 3\n",
    );
    let run = |threads: &str, out: &str| {
        let out = dir.path().join(out);
        let o = sarcs(&["sweep", "-c", s(&cfg), "-o", s(&out), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("psr.csv")).unwrap()
    };
    let one = run("1", "t1");
    assert_eq!(one, run("3", "t3"));
    assert_eq!(one, run("1", "t1b"));
    let text = String::from_utf8(one).unwrap();
    assert!(text.lines().any(|l| l == "mode,k,M,snr_db,trials,successes,psr,mean_rel_error,base_seed"));
    assert!(text.lines().next().unwrap().starts_with("# "));
    assert_eq!(text.lines().filter(|l| l.starts_with("psr_vs_snr,")).count(), 8);
}

#[test]
fn smoke_profile_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = sarcs(&["init-config", "--profile", "smoke"]);
    assert!(o.status.success());
    let cfg = dir.path().join("smoke.toml");
    fs::write(&cfg, &o.stdout).unwrap();
    let out = dir.path().join("smoke");
    let o = sarcs(&["sweep", "-c", s(&cfg), "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("psr.csv")).unwrap();
    let row = csv.lines().last().unwrap();
    assert!(row.starts_with("psr_vs_m,1,40,inf,1,"), "{row}");
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    let blocker = write(dir.path(), "file", "");
    let mut seen = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            // A file in place of the output directory: parse failures exit
            // 1, so reaching the output stage (exit 2) proves the file parsed.
            let o = sarcs(&["sweep", "-c", s(&path), "-o", s(&blocker.join("out"))]);
            assert_eq!(o.status.code(), Some(2), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
