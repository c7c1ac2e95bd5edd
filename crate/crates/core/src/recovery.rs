//! Sparse recovery of the reflectivity profile with CoSaMP.
//!
//! Each iteration forms the signal proxy `A^H r`, picks the `2k` atoms with
//! the largest normalised correlation `|proxy_g| / |a_g|`, merges them with
//! the current support, fits the measurements by least squares on the merged
//! columns, keeps the `k` largest coefficients and updates the residual. The
//! best pruned iterate (smallest residual) is refitted on its own support and
//! returned.

use crate::dictionary::{SensingMatrix, SensingOperator};
use crate::lsq;
use crate::radar::{ExtendedGrid, GridCoord};
use crate::{Complex64, Error, Result};
use std::cmp::Ordering;
use std::collections::BTreeMap;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Consecutive non-improving iterations tolerated before halting.
pub const STALL_PATIENCE: usize = 3;

/// Relative threshold used when none is configured.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    /// Number of atoms to recover, `k >= 1`.
    pub sparsity: usize,
    /// Halt once the residual norm drops below this. `None` uses
    /// `1e-6 * |y|`.
    pub residual_threshold: Option<f64>,
    pub max_iterations: usize,
    /// Halt when the best residual has improved by less than this fraction
    /// for [`STALL_PATIENCE`] consecutive iterations.
    pub stall_tolerance: f64,
}

impl RecoveryConfig {
    pub fn new(sparsity: usize) -> Self {
        RecoveryConfig {
            sparsity,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return Err(Error::param("sparsity", "must be >= 1"));
        }
        if let Some(eps) = self.residual_threshold {
            if !(eps >= 0.0) {
                return Err(Error::param("residual_threshold", "must be >= 0"));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be >= 1"));
        }
        if !(self.stall_tolerance.is_finite()) {
            return Err(Error::param("stall_tolerance", "must be finite"));
        }
        Ok(())
    }
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            sparsity: 1,
            residual_threshold: None,
            max_iterations: 50,
            stall_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    ResidualBelowThreshold,
    MaxIterations,
    Stalled,
}

impl HaltReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            HaltReason::ResidualBelowThreshold => "residual_below_threshold",
            HaltReason::MaxIterations => "max_iterations",
            HaltReason::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_norm: f64,
    /// Flat indices after pruning, ascending.
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: Vec<IterationRecord>,
    pub halt_reason: HaltReason,
    pub threshold: f64,
    /// Residual norm of the returned solution.
    pub final_residual_norm: f64,
    /// Atoms discarded by the least-squares step as linearly dependent.
    pub dropped_columns: Vec<usize>,
}

/// Sparse solution as `(flat index, coefficient)` pairs, ascending by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub entries: Vec<(usize, Complex64)>,
    pub diagnostics: Diagnostics,
}

/// A sparse reflectivity profile on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseProfile {
    grid: ExtendedGrid,
    entries: Vec<(GridCoord, Complex64)>,
}

impl SparseProfile {
    pub fn empty(grid: ExtendedGrid) -> Self {
        SparseProfile {
            grid,
            entries: Vec::new(),
        }
    }

    /// Builds from grid coordinates; rejects duplicates and off-grid cells.
    pub fn new(grid: ExtendedGrid, entries: Vec<(GridCoord, Complex64)>) -> Result<Self> {
        let flat = entries
            .iter()
            .map(|(c, a)| Ok((grid.flat_index(*c)?, *a)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_flat(grid, flat)
    }

    pub fn from_flat(grid: ExtendedGrid, mut entries: Vec<(usize, Complex64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("profile", "duplicate grid cell"));
        }
        let entries = entries
            .into_iter()
            .map(|(g, a)| Ok((grid.unflatten(g)?, a)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SparseProfile { grid, entries })
    }

    pub fn grid(&self) -> &ExtendedGrid {
        &self.grid
    }

    pub fn entries(&self) -> &[(GridCoord, Complex64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn coords(&self) -> Vec<GridCoord> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn flat_entries(&self) -> Vec<(usize, Complex64)> {
        self.entries
            .iter()
            .map(|(c, a)| (self.grid.flat_index(*c).expect("validated"), *a))
            .collect()
    }

    /// The full `N1*N2*P*Q` coefficient vector.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.grid.len()];
        for (g, a) in self.flat_entries() {
            out[g] = a;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `|estimate - truth| / |truth|` over the dense profiles.
pub fn relative_error(estimate: &SparseProfile, truth: &SparseProfile) -> Result<f64> {
    if estimate.grid != truth.grid {
        return Err(Error::DimensionMismatch("profiles live on different grids".into()));
    }
    let truth_norm = truth.norm();
    if truth_norm == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let mut diff: BTreeMap<usize, Complex64> = BTreeMap::new();
    for (g, a) in estimate.flat_entries() {
        *diff.entry(g).or_insert(ZERO) += a;
    }
    for (g, a) in truth.flat_entries() {
        *diff.entry(g).or_insert(ZERO) -= a;
    }
    let num = diff.values().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
    Ok(num / truth_norm)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Descending by score, ascending by index on ties.
fn rank(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

fn top(mut scored: Vec<(f64, usize)>, count: usize) -> Vec<usize> {
    if scored.len() > count {
        scored.select_nth_unstable_by(count, rank);
        scored.truncate(count);
    }
    let mut idx: Vec<usize> = scored.into_iter().map(|s| s.1).collect();
    idx.sort_unstable();
    idx
}

fn fit<A: SensingMatrix + ?Sized>(
    op: &A,
    support: &[usize],
    y: &[Complex64],
    dropped: &mut Vec<usize>,
) -> Vec<Complex64> {
    let columns: Vec<Vec<Complex64>> = support
        .iter()
        .map(|&g| {
            let mut c = vec![ZERO; op.rows()];
            op.column_into(g, &mut c);
            c
        })
        .collect();
    let sol = lsq::solve(&columns, y);
    for j in sol.dropped {
        if !dropped.contains(&support[j]) {
            dropped.push(support[j]);
        }
    }
    sol.coefficients
}

fn residual_of<A: SensingMatrix + ?Sized>(
    op: &A,
    y: &[Complex64],
    entries: &[(usize, Complex64)],
) -> Vec<Complex64> {
    let ax = op.forward_sparse(entries);
    y.iter().zip(ax).map(|(a, b)| a - b).collect()
}

/// Recovers a `cfg.sparsity`-sparse `x` with `y ~ A x`.
pub fn cosamp<A: SensingMatrix + ?Sized>(
    op: &A,
    y: &[Complex64],
    cfg: &RecoveryConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if y.len() != op.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} measurements for an operator with {} rows",
            y.len(),
            op.rows()
        )));
    }
    let k = cfg.sparsity;
    let norms = op.column_norms();
    let visible: Vec<usize> = (0..norms.len()).filter(|&g| norms[g] > 0.0).collect();
    if k > visible.len() {
        return Err(Error::SparsityTooLarge {
            k,
            visible: visible.len(),
        });
    }
    let y_norm = norm(y);
    let threshold = cfg
        .residual_threshold
        .unwrap_or(DEFAULT_RELATIVE_THRESHOLD * y_norm);

    let mut iterations = Vec::new();
    let mut dropped = Vec::new();
    let mut best: Vec<(usize, Complex64)> = Vec::new();
    let mut best_norm = y_norm;
    let mut residual = y.to_vec();
    let mut support: Vec<usize> = Vec::new();

    let halt_reason = if y_norm < threshold || y_norm == 0.0 {
        HaltReason::ResidualBelowThreshold
    } else {
        let mut reason = HaltReason::MaxIterations;
        let mut stale = 0;
        for iteration in 1..=cfg.max_iterations {
            let proxy = op.adjoint(&residual);
            let scored: Vec<(f64, usize)> = visible
                .iter()
                .map(|&g| (proxy[g].norm() / norms[g], g))
                .collect();
            let mut merged = top(scored, 2 * k);
            merged.extend_from_slice(&support);
            merged.sort_unstable();
            merged.dedup();

            let coeffs = fit(op, &merged, y, &mut dropped);
            let pruned: Vec<(f64, usize)> = merged
                .iter()
                .zip(&coeffs)
                .filter(|(_, b)| **b != ZERO)
                .map(|(&g, b)| (b.norm(), g))
                .collect();
            support = top(pruned, k);
            let entries: Vec<(usize, Complex64)> = support
                .iter()
                .map(|&g| (g, coeffs[merged.binary_search(&g).expect("in merged")]))
                .collect();
            residual = residual_of(op, y, &entries);
            let r_norm = norm(&residual);
            iterations.push(IterationRecord {
                iteration,
                residual_norm: r_norm,
                support: support.clone(),
            });

            if best_norm - r_norm < cfg.stall_tolerance * best_norm {
                stale += 1;
            } else {
                stale = 0;
            }
            if r_norm < best_norm {
                best_norm = r_norm;
                best = entries;
            }
            if r_norm < threshold {
                reason = HaltReason::ResidualBelowThreshold;
                break;
            }
            if iteration == cfg.max_iterations {
                break;
            }
            if stale >= STALL_PATIENCE {
                reason = HaltReason::Stalled;
                break;
            }
        }
        reason
    };

    // Refit the kept support so the residual is orthogonal to its columns.
    let best_support: Vec<usize> = best.iter().map(|e| e.0).collect();
    let entries: Vec<(usize, Complex64)> = if best_support.is_empty() {
        Vec::new()
    } else {
        let coeffs = fit(op, &best_support, y, &mut dropped);
        best_support
            .into_iter()
            .zip(coeffs)
            .filter(|(_, b)| *b != ZERO)
            .collect()
    };
    let final_residual_norm = norm(&residual_of(op, y, &entries));
    dropped.sort_unstable();

    Ok(Solution {
        entries,
        diagnostics: Diagnostics {
            iterations,
            halt_reason,
            threshold,
            final_residual_norm,
            dropped_columns: dropped,
        },
    })
}

/// A recovered profile with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub profile: SparseProfile,
    pub diagnostics: Diagnostics,
}

/// CoSaMP on the radar dictionary, returning grid coordinates.
pub fn recover(op: &SensingOperator, y: &[Complex64], cfg: &RecoveryConfig) -> Result<Recovery> {
    let sol = cosamp(op, y, cfg)?;
    Ok(Recovery {
        profile: SparseProfile::from_flat(*op.grid(), sol.entries)?,
        diagnostics: sol.diagnostics,
    })
}

/// Runs CoSaMP with `k = 1, 2, ..` up to `max_sparsity` until the residual
/// falls below the threshold; returns the last attempt otherwise.
pub fn recover_auto(
    op: &SensingOperator,
    y: &[Complex64],
    cfg: &RecoveryConfig,
    max_sparsity: usize,
) -> Result<Recovery> {
    let mut last = None;
    for k in 1..=max_sparsity.max(1) {
        let rec = recover(op, y, &RecoveryConfig { sparsity: k, ..*cfg })?;
        let done = rec.diagnostics.final_residual_norm < rec.diagnostics.threshold;
        last = Some(rec);
        if done {
            break;
        }
    }
    Ok(last.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
        let data = (0..m * n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        DenseMatrix::new(m, n, data).unwrap()
    }

    fn tiny_grid() -> ExtendedGrid {
        ExtendedGrid {
            x_origin: 0.0,
            y_origin: 0.0,
            vx_origin: 0.0,
            vy_origin: 0.0,
            bin_x: 1.0,
            bin_y: 1.0,
            bin_vx: 1.0,
            bin_vy: 1.0,
            nx: 3,
            ny: 2,
            nvx: 2,
            nvy: 1,
        }
    }

    #[test]
    fn single_atom_is_recovered_in_one_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = gaussian_matrix(&mut rng, 20, 60);
        let y = a.column(17).to_vec();
        let sol = cosamp(&a, &y, &RecoveryConfig::new(1)).unwrap();
        assert_eq!(sol.entries.len(), 1);
        assert_eq!(sol.entries[0].0, 17);
        assert!((sol.entries[0].1 - c(1.0, 0.0)).norm() < 1e-8);
        assert_eq!(sol.diagnostics.iterations.len(), 1);
        assert_eq!(sol.diagnostics.halt_reason, HaltReason::ResidualBelowThreshold);
    }

    #[test]
    fn sparse_vector_recovered_from_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = gaussian_matrix(&mut rng, 40, 200);
        let truth = [(5usize, c(1.0, -1.0)), (77, c(0.3, 0.0)), (150, c(0.0, 2.0))];
        let y = a.forward_sparse(&truth);
        let sol = cosamp(&a, &y, &RecoveryConfig::new(3)).unwrap();
        assert_eq!(sol.entries.len(), 3);
        for ((g, b), (tg, tb)) in sol.entries.iter().zip(truth) {
            assert_eq!(*g, tg);
            assert!((b - tb).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_measurements_give_empty_profile() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = gaussian_matrix(&mut rng, 10, 30);
        let sol = cosamp(&a, &[ZERO; 10], &RecoveryConfig::new(2)).unwrap();
        assert!(sol.entries.is_empty());
        assert!(sol.diagnostics.iterations.is_empty());
    }

    #[test]
    fn sparsity_beyond_visible_columns_is_rejected() {
        let mut data = vec![ZERO; 4 * 5];
        data[0] = c(1.0, 0.0);
        data[4 + 1] = c(1.0, 0.0);
        let a = DenseMatrix::new(4, 5, data).unwrap();
        let y = vec![c(1.0, 0.0), ZERO, ZERO, ZERO];
        assert!(matches!(
            cosamp(&a, &y, &RecoveryConfig::new(3)),
            Err(Error::SparsityTooLarge { k: 3, visible: 2 })
        ));
        let sol = cosamp(&a, &y, &RecoveryConfig::new(2)).unwrap();
        assert_eq!(sol.entries, vec![(0, c(1.0, 0.0))]);
    }

    #[test]
    fn invisible_columns_are_never_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut a = gaussian_matrix(&mut rng, 12, 40);
        let mut data: Vec<Complex64> = (0..40).flat_map(|g| a.column(g).to_vec()).collect();
        for g in [3usize, 8, 21] {
            data[g * 12..(g + 1) * 12].fill(ZERO);
        }
        a = DenseMatrix::new(12, 40, data).unwrap();
        let y = a.forward_sparse(&[(9, c(1.0, 0.0)), (30, c(-1.0, 0.5))]);
        let sol = cosamp(&a, &y, &RecoveryConfig::new(2)).unwrap();
        for rec in &sol.diagnostics.iterations {
            assert!(rec.support.iter().all(|g| ![3, 8, 21].contains(g)));
        }
    }

    #[test]
    fn scaling_measurements_scales_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = gaussian_matrix(&mut rng, 15, 80);
        let y: Vec<Complex64> = (0..15)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let cfg = RecoveryConfig {
            max_iterations: 6,
            ..RecoveryConfig::new(3)
        };
        let base = cosamp(&a, &y, &cfg).unwrap();
        for alpha in [c(2.0, 0.0), c(0.0, 1.0), c(-0.5, 0.0)] {
            let ys: Vec<Complex64> = y.iter().map(|v| v * alpha).collect();
            let s = cosamp(&a, &ys, &cfg).unwrap();
            assert_eq!(
                s.entries.iter().map(|e| e.0).collect::<Vec<_>>(),
                base.entries.iter().map(|e| e.0).collect::<Vec<_>>()
            );
            for (x, z) in s.entries.iter().zip(&base.entries) {
                assert!((x.1 - z.1 * alpha).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn returned_residual_is_orthogonal_to_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = gaussian_matrix(&mut rng, 25, 100);
        let mut y = a.forward_sparse(&[(1, c(1.0, 0.0)), (50, c(0.0, 1.0))]);
        for v in y.iter_mut() {
            *v += c(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
        }
        let sol = cosamp(&a, &y, &RecoveryConfig::new(2)).unwrap();
        let r = residual_of(&a, &y, &sol.entries);
        for (g, _) in &sol.entries {
            let col = a.column(*g);
            let ip = col.iter().zip(&r).fold(ZERO, |acc, (x, z)| acc + x.conj() * z);
            assert!(ip.norm() <= 1e-8 * norm(col) * norm(&y));
        }
        let best = sol
            .diagnostics
            .iterations
            .iter()
            .map(|i| i.residual_norm)
            .fold(f64::INFINITY, f64::min);
        assert!(sol.diagnostics.final_residual_norm <= best * (1.0 + 1e-12));
        assert!(sol.entries.len() <= 2);
    }

    #[test]
    fn rejects_bad_config_and_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let a = gaussian_matrix(&mut rng, 5, 10);
        assert!(cosamp(&a, &[ZERO; 4], &RecoveryConfig::new(1)).is_err());
        assert!(cosamp(&a, &[ZERO; 5], &RecoveryConfig::new(0)).is_err());
        let bad = RecoveryConfig {
            max_iterations: 0,
            ..RecoveryConfig::new(1)
        };
        assert!(cosamp(&a, &[ZERO; 5], &bad).is_err());
    }

    #[test]
    fn relative_error_examples() {
        let grid = tiny_grid();
        let truth = SparseProfile::new(grid, vec![(GridCoord::new(1, 1, 0, 0), c(1.0, 0.0))]).unwrap();
        assert_eq!(relative_error(&truth, &truth).unwrap(), 0.0);
        assert_eq!(relative_error(&SparseProfile::empty(grid), &truth).unwrap(), 1.0);
        let est = SparseProfile::new(grid, vec![(GridCoord::new(1, 1, 0, 0), c(0.95, 0.0))]).unwrap();
        assert!((relative_error(&est, &truth).unwrap() - 0.05).abs() < 1e-12);
        let wrong = SparseProfile::new(grid, vec![(GridCoord::new(0, 1, 0, 0), c(1.0, 0.0))]).unwrap();
        assert!((relative_error(&wrong, &truth).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            relative_error(&truth, &SparseProfile::empty(grid)),
            Err(Error::ZeroTruth)
        ));
    }

    #[test]
    fn profile_rejects_duplicates_and_off_grid() {
        let grid = tiny_grid();
        assert!(SparseProfile::from_flat(grid, vec![(1, c(1.0, 0.0)), (1, c(2.0, 0.0))]).is_err());
        assert!(SparseProfile::from_flat(grid, vec![(12, c(1.0, 0.0))]).is_err());
        let p = SparseProfile::from_flat(grid, vec![(4, c(1.0, 0.0)), (2, c(0.0, 1.0))]).unwrap();
        assert_eq!(p.flat_entries()[0].0, 2);
        assert_eq!(p.to_dense()[4], c(1.0, 0.0));
    }
}
