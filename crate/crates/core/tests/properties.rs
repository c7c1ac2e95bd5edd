use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarcs::dictionary::{select_measurements, CachePolicy, DenseMatrix, SensingMatrix, SensingOperator};
use sarcs::echo::{scene_echo, scene_echo_at, EchoMatrix};
use sarcs::experiments::{psr_csv, psr_sweep, random_scene, trial_seed, ExperimentSpec, Mode};
use sarcs::io::{profile_csv, read_echo, read_profile_csv, write_echo};
use sarcs::radar::{ExtendedGrid, GridCoord, RadarParams, SPEED_OF_LIGHT};
use sarcs::recovery::{cosamp, relative_error, RecoveryConfig, SparseProfile};
use sarcs::rng::{sample_sorted, splitmix};
use sarcs::{reference, Complex64};
use std::collections::HashSet;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn small_grid() -> ExtendedGrid {
    ExtendedGrid {
        x_origin: 9990.3,
        y_origin: 0.0,
        vx_origin: -4.0,
        vy_origin: -4.0,
        bin_x: 5.0,
        bin_y: 6.0,
        bin_vx: 4.0,
        bin_vy: 4.0,
        nx: 3,
        ny: 3,
        nvx: 3,
        nvy: 2,
    }
}

fn small_params() -> RadarParams {
    RadarParams::new(
        200.0,
        10e9,
        30e6,
        2e-6,
        40e6,
        400.0,
        100,
        48,
        RadarParams::window_start_for(&small_grid(), SPEED_OF_LIGHT),
        SPEED_OF_LIGHT,
    )
    .unwrap()
}

fn coord() -> impl Strategy<Value = GridCoord> {
    (0usize..31, 0usize..31, 0usize..11, 0usize..11).prop_map(|(a, b, p, q)| GridCoord::new(a, b, p, q))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn echo_container_roundtrips(nr in 1usize..6, na in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = EchoMatrix::from_vec(nr, na, random_vec(&mut rng, nr * na)).unwrap();
        let mut buf = Vec::new();
        write_echo(&mut buf, &e).unwrap();
        prop_assert_eq!(buf.len(), 16 + 16 * nr * na);
        prop_assert_eq!(read_echo(&mut buf.as_slice()).unwrap(), e);
    }

    #[test]
    fn profile_csv_roundtrips(cells in prop::collection::btree_set(coord(), 0..6), seed in any::<u64>(), physical in any::<bool>()) {
        let grid = reference::scene_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<(GridCoord, Complex64)> = cells
            .into_iter()
            .map(|g| (g, c(rng.random_range(-1e3..1e3), rng.random_range(-1e-9..1e-9))))
            .collect();
        let prof = SparseProfile::new(grid, entries).unwrap();
        let text = profile_csv(&prof, physical).unwrap();
        prop_assert_eq!(read_profile_csv(text.as_bytes(), grid).unwrap(), prof);
    }

    #[test]
    fn subsets_are_sorted_distinct_and_complete(n in 1usize..500, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let m = ((n as f64) * frac) as usize;
        let s = sample_sorted(&mut splitmix(seed), n, m);
        prop_assert_eq!(s.len(), m);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.iter().all(|&i| i < n));
        prop_assert_eq!(sample_sorted(&mut splitmix(seed), n, m), s);
    }

    #[test]
    fn relative_error_is_scale_consistent(cells in prop::collection::btree_set(coord(), 1..5), t in -2.0f64..2.0) {
        let grid = reference::scene_grid();
        let truth = SparseProfile::new(grid, cells.iter().map(|&g| (g, c(1.0, -0.5))).collect()).unwrap();
        let scaled = SparseProfile::new(grid, cells.iter().map(|&g| (g, c(1.0, -0.5) * (1.0 + t))).collect()).unwrap();
        prop_assert!((relative_error(&scaled, &truth).unwrap() - t.abs()).abs() < 1e-12);
        prop_assert_eq!(relative_error(&truth, &truth).unwrap(), 0.0);
        prop_assert!((relative_error(&SparseProfile::empty(grid), &truth).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cosamp_is_scale_equivariant(seed in any::<u64>(), k in 1usize..4, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        prop_assume!(re.hypot(im) > 1e-3);
        let (m, n) = (24, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DenseMatrix::new(m, n, random_vec(&mut rng, m * n)).unwrap();
        let support = sample_sorted(&mut splitmix(seed), n, k);
        let x: Vec<(usize, Complex64)> = support.iter().map(|&g| (g, c(1.0, 0.0) + random_vec(&mut rng, 1)[0])).collect();
        let y = a.forward_sparse(&x);
        let alpha = c(re, im);
        let ys: Vec<Complex64> = y.iter().map(|v| alpha * v).collect();
        let cfg = RecoveryConfig::new(k);
        let s1 = cosamp(&a, &y, &cfg).unwrap();
        let s2 = cosamp(&a, &ys, &cfg).unwrap();
        let g1: Vec<usize> = s1.entries.iter().map(|e| e.0).collect();
        let g2: Vec<usize> = s2.entries.iter().map(|e| e.0).collect();
        prop_assert_eq!(g1, g2);
        for ((_, b1), (_, b2)) in s1.entries.iter().zip(&s2.entries) {
            prop_assert!((alpha * b1 - b2).norm() <= 1e-9 * (1.0 + b2.norm()));
        }
    }

    #[test]
    fn cosamp_support_is_bounded_and_visible(seed in any::<u64>(), k in 1usize..5, m in 8usize..40) {
        let grid = small_grid();
        let p = small_params();
        let (scene, _) = random_scene(k.min(grid.len()), &grid, seed).unwrap();
        let sel = select_measurements(m, p.total_samples(), seed).unwrap();
        let y = scene_echo_at(&scene, &p, sel.indices()).unwrap();
        let op = SensingOperator::new(p, grid, sel, CachePolicy::FullRowCache).unwrap();
        let norms = op.column_norms();
        if let Ok(sol) = cosamp(&op, &y, &RecoveryConfig::new(k)) {
            prop_assert!(sol.entries.len() <= k);
            prop_assert!(sol.entries.iter().all(|e| norms[e.0] > 0.0));
            let best = sol.diagnostics.iterations.iter().map(|i| i.residual_norm).fold(f64::INFINITY, f64::min);
            prop_assert!(sol.diagnostics.final_residual_norm <= best * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn sampled_echo_agrees_with_full_echo(seed in any::<u64>(), k in 0usize..4, m in 1usize..60) {
        let grid = small_grid();
        let p = small_params();
        let scene = if k == 0 {
            sarcs::radar::Scene::new(vec![])
        } else {
            random_scene(k, &grid, seed).unwrap().0
        };
        let sel = select_measurements(m, p.total_samples(), seed ^ 1).unwrap();
        let full = scene_echo(&scene, &p).unwrap();
        prop_assert_eq!(scene_echo_at(&scene, &p, sel.indices()).unwrap(), sel.restrict(full.as_slice()).unwrap());
    }
}

#[test]
fn trial_seeds_do_not_collide() {
    let mut seen = HashSet::new();
    for k in 1..=4 {
        for m in (10..=100).step_by(10) {
            for snr in [None, Some(-15.0), Some(0.0), Some(-0.0), Some(20.0)] {
                for t in 0..200 {
                    assert!(seen.insert(trial_seed(1, k, m, snr, t)), "k={k} M={m} snr={snr:?} trial={t}");
                }
            }
        }
    }
}

#[test]
fn sweep_is_reproducible_and_well_formed() {
    let spec = ExperimentSpec {
        mode: Mode::PsrVsSnr,
        target_counts: vec![1, 2],
        measurement_counts: vec![10, 30],
        snr_values_db: vec![0.0, 30.0],
        trials_per_point: 5,
        base_seed: 9,
        params: small_params(),
        grid: small_grid(),
        recovery: RecoveryConfig::default(),
        cache_policy: CachePolicy::None,
    };
    let a = psr_sweep(&spec).unwrap();
    let b = psr_sweep(&ExperimentSpec {
        cache_policy: CachePolicy::FullRowCache,
        ..spec.clone()
    })
    .unwrap();
    assert_eq!(psr_csv(&spec, &a, &[]), psr_csv(&spec, &b, &[]));
    assert_eq!(a.len(), 8);
    for p in &a {
        assert!(p.successes + p.failures <= p.trials);
        assert!((0.0..=1.0).contains(&p.psr()));
    }
    let other = psr_sweep(&ExperimentSpec { base_seed: 10, ..spec.clone() }).unwrap();
    assert_ne!(
        a.iter().map(|p| p.mean_rel_error.to_bits()).collect::<Vec<_>>(),
        other.iter().map(|p| p.mean_rel_error.to_bits()).collect::<Vec<_>>()
    );
}
