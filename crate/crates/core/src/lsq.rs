//! Complex least squares over a handful of explicit columns.
//!
//! Modified Gram-Schmidt with one reorthogonalisation pass ("twice is
//! enough"), then back substitution. Columns that are numerically in the
//! span of the earlier ones are dropped and get a zero coefficient.

use crate::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative residual norm below which a column counts as dependent.
pub(crate) const DEPENDENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct LsSolution {
    /// One coefficient per input column; zero for dropped columns.
    pub coefficients: Vec<Complex64>,
    /// Positions (into the input column list) of dropped columns.
    pub dropped: Vec<usize>,
}

fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Minimises `|y - sum_j b_j * columns[j]|`.
pub(crate) fn solve(columns: &[Vec<Complex64>], y: &[Complex64]) -> LsSolution {
    let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(columns.len());
    // r[j] is column j of the upper-triangular factor (length j + 1).
    let mut r: Vec<Vec<Complex64>> = Vec::with_capacity(columns.len());
    let mut kept = Vec::with_capacity(columns.len());
    let mut dropped = Vec::new();

    for (j, col) in columns.iter().enumerate() {
        debug_assert_eq!(col.len(), y.len());
        let original = norm(col);
        if original == 0.0 {
            dropped.push(j);
            continue;
        }
        let mut v = col.clone();
        let mut rc = vec![ZERO; q.len()];
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let h = dot_conj(qi, &v);
                for (vk, qk) in v.iter_mut().zip(qi) {
                    *vk -= h * qk;
                }
                rc[i] += h;
            }
        }
        let nv = norm(&v);
        if nv <= DEPENDENCE_TOL * original {
            dropped.push(j);
            continue;
        }
        for vk in v.iter_mut() {
            *vk /= nv;
        }
        rc.push(Complex64::new(nv, 0.0));
        q.push(v);
        r.push(rc);
        kept.push(j);
    }

    let z: Vec<Complex64> = q.iter().map(|qi| dot_conj(qi, y)).collect();
    let n = kept.len();
    let mut b = vec![ZERO; n];
    for i in (0..n).rev() {
        let mut acc = z[i];
        for j in i + 1..n {
            acc -= r[j][i] * b[j];
        }
        b[i] = acc / r[i][i];
    }

    let mut coefficients = vec![ZERO; columns.len()];
    for (slot, value) in kept.into_iter().zip(b) {
        coefficients[slot] = value;
    }
    LsSolution {
        coefficients,
        dropped,
    }
}
