//! The sensing operator: the dictionary of unit-target echoes, one atom per
//! grid cell, restricted to a random subset of echo samples.
//!
//! The full dictionary has `Nr*Na` rows and `N1*N2*P*Q` columns and is never
//! formed. Rows are addressed by vec position `m + Nr*n`; columns by the
//! grid's flat index. Atoms are evaluated on the fly from the same signal
//! model as the simulator, or optionally cached for the selected rows only.

use crate::echo::SignalModel;
use crate::par;
use crate::radar::{ExtendedGrid, GridCoord, Kinematics, RadarParams};
use crate::rng;
use crate::{Complex64, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sorted, distinct vec positions of the measured samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementSelection {
    indices: Vec<usize>,
    total: usize,
    seed: Option<u64>,
}

impl MeasurementSelection {
    /// `m` positions drawn uniformly without replacement from `0..total`.
    pub fn random(m: usize, total: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > total {
            return Err(Error::InvalidSelection {
                requested: m,
                available: total,
            });
        }
        let mut rng = rng::splitmix(seed);
        Ok(MeasurementSelection {
            indices: rng::sample_sorted(&mut rng, total, m),
            total,
            seed: Some(seed),
        })
    }

    /// Uses the given positions, which must be strictly increasing.
    pub fn from_indices(indices: Vec<usize>, total: usize) -> Result<Self> {
        if indices.is_empty() || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("selection", "indices must be non-empty and strictly increasing"));
        }
        if *indices.last().unwrap() >= total {
            return Err(Error::InvalidSelection {
                requested: *indices.last().unwrap(),
                available: total,
            });
        }
        Ok(MeasurementSelection {
            indices,
            total,
            seed: None,
        })
    }

    pub fn all(total: usize) -> Result<Self> {
        Self::from_indices((0..total).collect(), total)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Picks the selected entries out of a full vec-ordered sample vector.
    pub fn restrict(&self, full: &[Complex64]) -> Result<Vec<Complex64>> {
        if full.len() != self.total {
            return Err(Error::DimensionMismatch(format!(
                "selection over {} samples applied to {}",
                self.total,
                full.len()
            )));
        }
        Ok(self.indices.iter().map(|&i| full[i]).collect())
    }
}

/// Draws `m` of `total` sample positions; see [`MeasurementSelection::random`].
pub fn select_measurements(m: usize, total: usize, seed: u64) -> Result<MeasurementSelection> {
    MeasurementSelection::random(m, total, seed)
}

/// Whether atoms are recomputed on every use or stored for the selected rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CachePolicy {
    /// O(M + N) extra memory; every product re-evaluates the atoms.
    None,
    /// Stores the `M x N` restricted matrix (16 bytes per entry).
    #[default]
    FullRowCache,
}

/// A linear map from grid coefficients to measured samples, as used by the
/// recovery routines.
pub trait SensingMatrix: Sync {
    /// Number of measurements `M`.
    fn rows(&self) -> usize;
    /// Number of atoms.
    fn cols(&self) -> usize;
    /// Writes column `g` into `out` (length `rows()`).
    fn column_into(&self, g: usize, out: &mut [Complex64]);
    /// `A^H r`.
    fn adjoint(&self, residual: &[Complex64]) -> Vec<Complex64>;
    /// `A x` for a sparse `x` given as `(column, value)` pairs.
    fn forward_sparse(&self, entries: &[(usize, Complex64)]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.rows()];
        let mut col = vec![ZERO; self.rows()];
        for &(g, a) in entries {
            self.column_into(g, &mut col);
            for (yi, ci) in y.iter_mut().zip(&col) {
                *yi += a * ci;
            }
        }
        y
    }
    /// Euclidean norm of every column.
    fn column_norms(&self) -> Vec<f64> {
        par::map_range(self.cols(), |g| {
            let mut col = vec![ZERO; self.rows()];
            self.column_into(g, &mut col);
            col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
        })
    }
}

/// Explicit column-major matrix, for small problems and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    /// `data` is column-major, `rows * cols` long.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows} x {cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn column(&self, g: usize) -> &[Complex64] {
        &self.data[g * self.rows..(g + 1) * self.rows]
    }
}

impl SensingMatrix for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn column_into(&self, g: usize, out: &mut [Complex64]) {
        out.copy_from_slice(self.column(g));
    }
    fn adjoint(&self, residual: &[Complex64]) -> Vec<Complex64> {
        par::map_range(self.cols, |g| dot_conj(self.column(g), residual))
    }
}

#[inline]
fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

#[derive(Debug, Clone, Copy)]
struct Site {
    tau: f64,
    eta: f64,
}

/// Matrix-free dictionary restricted to a measurement selection.
#[derive(Debug, Clone)]
pub struct SensingOperator {
    params: RadarParams,
    grid: ExtendedGrid,
    selection: MeasurementSelection,
    model: SignalModel,
    sites: Vec<Site>,
    cache: Option<Vec<Complex64>>,
}

impl SensingOperator {
    pub fn new(
        params: RadarParams,
        grid: ExtendedGrid,
        selection: MeasurementSelection,
        policy: CachePolicy,
    ) -> Result<Self> {
        params.validate()?;
        grid.validate_against(&params)?;
        if selection.total() != params.total_samples() {
            return Err(Error::DimensionMismatch(format!(
                "selection over {} samples, radar has {}",
                selection.total(),
                params.total_samples()
            )));
        }
        let nr = params.range_samples;
        let sites = selection
            .indices()
            .iter()
            .map(|&g| Site {
                tau: params.fast_time(g % nr),
                eta: params.slow_time(g / nr),
            })
            .collect();
        let mut op = SensingOperator {
            model: SignalModel::new(&params),
            params,
            grid,
            selection,
            sites,
            cache: None,
        };
        if policy == CachePolicy::FullRowCache {
            op.cache = Some(op.build_cache());
        }
        Ok(op)
    }

    /// Operator over a previously stored restricted matrix (atom-major:
    /// atom `g` occupies entries `g*M..(g+1)*M`).
    pub fn with_cached_matrix(
        params: RadarParams,
        grid: ExtendedGrid,
        selection: MeasurementSelection,
        matrix: Vec<Complex64>,
    ) -> Result<Self> {
        let mut op = Self::new(params, grid, selection, CachePolicy::None)?;
        if matrix.len() != op.sites.len() * grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "cached matrix has {} entries, expected {} x {}",
                matrix.len(),
                op.sites.len(),
                grid.len()
            )));
        }
        op.cache = Some(matrix);
        Ok(op)
    }

    fn build_cache(&self) -> Vec<Complex64> {
        let m = self.sites.len();
        let mut cache = vec![ZERO; m * self.grid.len()];
        par::for_each_chunk_mut(&mut cache, m, |g, col| self.eval_column(g, col));
        cache
    }

    pub fn params(&self) -> &RadarParams {
        &self.params
    }

    pub fn grid(&self) -> &ExtendedGrid {
        &self.grid
    }

    pub fn selection(&self) -> &MeasurementSelection {
        &self.selection
    }

    pub fn cache_policy(&self) -> CachePolicy {
        if self.cache.is_some() {
            CachePolicy::FullRowCache
        } else {
            CachePolicy::None
        }
    }

    /// The cached restricted matrix in atom-major order, if built.
    pub fn cached_matrix(&self) -> Option<&[Complex64]> {
        self.cache.as_deref()
    }

    #[inline]
    fn atom(&self, g: usize) -> (Kinematics, f64) {
        let k = self.grid.physical_unchecked(self.grid.unflatten_unchecked(g));
        let eta_c = k.y / (self.model.v - k.vy);
        (k, eta_c)
    }

    fn eval_column(&self, g: usize, out: &mut [Complex64]) {
        let (k, eta_c) = self.atom(g);
        for (o, s) in out.iter_mut().zip(&self.sites) {
            *o = self.model.sample(&k, eta_c, s.tau, s.eta);
        }
    }

    /// Unit-reflectivity echo of grid cell `coord` at sample `(m, n)`.
    pub fn atom_sample(&self, coord: GridCoord, m: usize, n: usize) -> Result<Complex64> {
        atom_sample(&self.params, &self.grid, coord, m, n)
    }

    /// `A x` for a dense coefficient vector over the whole grid.
    pub fn forward_dense(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "profile of length {} for grid of {}",
                x.len(),
                self.grid.len()
            )));
        }
        let entries: Vec<(usize, Complex64)> = x
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != ZERO)
            .map(|(g, a)| (g, *a))
            .collect();
        Ok(self.forward(&entries))
    }

    /// `A x` for `(flat index, coefficient)` pairs. Indices must be on the grid.
    pub fn forward(&self, entries: &[(usize, Complex64)]) -> Vec<Complex64> {
        match &self.cache {
            Some(_) => self.forward_sparse(entries),
            None => {
                let atoms: Vec<(Kinematics, f64, Complex64)> = entries
                    .iter()
                    .map(|&(g, a)| {
                        let (k, eta_c) = self.atom(g);
                        (k, eta_c, a)
                    })
                    .collect();
                par::map_range(self.sites.len(), |i| {
                    let s = self.sites[i];
                    atoms.iter().fold(ZERO, |acc, (k, eta_c, a)| {
                        acc + a * self.model.sample(k, *eta_c, s.tau, s.eta)
                    })
                })
            }
        }
    }
}

impl SensingMatrix for SensingOperator {
    fn rows(&self) -> usize {
        self.sites.len()
    }

    fn cols(&self) -> usize {
        self.grid.len()
    }

    fn column_into(&self, g: usize, out: &mut [Complex64]) {
        match &self.cache {
            Some(c) => {
                let m = self.sites.len();
                out.copy_from_slice(&c[g * m..(g + 1) * m]);
            }
            None => self.eval_column(g, out),
        }
    }

    fn adjoint(&self, residual: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(residual.len(), self.sites.len(), "residual length");
        match &self.cache {
            Some(c) => {
                let m = self.sites.len();
                par::map_range(self.grid.len(), |g| dot_conj(&c[g * m..(g + 1) * m], residual))
            }
            None => par::map_range(self.grid.len(), |g| {
                let (k, eta_c) = self.atom(g);
                self.sites.iter().zip(residual).fold(ZERO, |acc, (s, r)| {
                    acc + self.model.sample(&k, eta_c, s.tau, s.eta).conj() * r
                })
            }),
        }
    }

    fn column_norms(&self) -> Vec<f64> {
        match &self.cache {
            Some(c) => {
                let m = self.sites.len();
                par::map_range(self.grid.len(), |g| {
                    c[g * m..(g + 1) * m]
                        .iter()
                        .map(|x| x.norm_sqr())
                        .sum::<f64>()
                        .sqrt()
                })
            }
            None => par::map_range(self.grid.len(), |g| {
                let (k, eta_c) = self.atom(g);
                self.sites
                    .iter()
                    .map(|s| self.model.sample(&k, eta_c, s.tau, s.eta).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            }),
        }
    }
}

/// Unit-reflectivity echo of grid cell `coord` at sample `(m, n)`, using the
/// exact slant range.
pub fn atom_sample(
    params: &RadarParams,
    grid: &ExtendedGrid,
    coord: GridCoord,
    m: usize,
    n: usize,
) -> Result<Complex64> {
    if m >= params.range_samples || n >= params.azimuth_samples {
        return Err(Error::InvalidSelection {
            requested: m + params.range_samples * n,
            available: params.total_samples(),
        });
    }
    let k = grid.to_physical(coord)?;
    let model = SignalModel::new(params);
    let eta_c = k.y / (model.v - k.vy);
    Ok(model.sample(&k, eta_c, params.fast_time(m), params.slow_time(n)))
}
