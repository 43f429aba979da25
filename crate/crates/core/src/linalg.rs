//! Small dense solver for weighted least-squares normal equations.

use crate::error::{Error, Result};

/// Reciprocal-condition threshold below which a normal matrix is rejected.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Row-major square matrix of order `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.dim + c] = v;
    }

    /// Adds `weight * row rowᵀ`.
    pub fn add_outer(&mut self, row: &[f64], weight: f64) {
        debug_assert_eq!(row.len(), self.dim);
        for (r, &a) in row.iter().enumerate() {
            let wa = weight * a;
            let base = r * self.dim;
            for (c, &b) in row.iter().enumerate() {
                self.data[base + c] += wa * b;
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|r| dot(&self.data[r * self.dim..(r + 1) * self.dim], v))
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `a x = rhs` for a symmetric positive semi-definite `a`.
///
/// The matrix is first equilibrated to unit diagonal, then factored by
/// Gaussian elimination with complete pivoting. The ratio of the smallest to
/// the largest pivot serves as the reciprocal-condition estimate; columns whose
/// pivots fall under [`RCOND_THRESHOLD`] are reported as collinear.
pub fn solve_normal(a: &SquareMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let p = a.dim();
    if rhs.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "normal matrix of order {p} with right-hand side of length {}",
            rhs.len()
        )));
    }
    if p == 0 {
        return Ok(Vec::new());
    }

    let mut degenerate = Vec::new();
    let scale: Vec<f64> = (0..p)
        .map(|i| {
            let d = a.get(i, i);
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                degenerate.push(i);
                0.0
            }
        })
        .collect();
    if !degenerate.is_empty() {
        return Err(Error::Singular {
            columns: degenerate,
            rcond: 0.0,
        });
    }

    let mut m: Vec<f64> = (0..p * p)
        .map(|k| a.data[k] * scale[k / p] * scale[k % p])
        .collect();
    let mut b: Vec<f64> = rhs.iter().zip(&scale).map(|(v, s)| v * s).collect();
    let mut col_perm: Vec<usize> = (0..p).collect();
    let mut pivots = Vec::with_capacity(p);

    for k in 0..p {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for r in k..p {
            for c in k..p {
                let v = m[r * p + c].abs();
                if v > best {
                    best = v;
                    pr = r;
                    pc = c;
                }
            }
        }
        if pr != k {
            for c in 0..p {
                m.swap(k * p + c, pr * p + c);
            }
            b.swap(k, pr);
        }
        if pc != k {
            for r in 0..p {
                m.swap(r * p + k, r * p + pc);
            }
            col_perm.swap(k, pc);
        }
        let piv = m[k * p + k];
        pivots.push(piv.abs());
        if piv == 0.0 {
            continue;
        }
        for r in (k + 1)..p {
            let f = m[r * p + k] / piv;
            if f == 0.0 {
                continue;
            }
            for c in k..p {
                m[r * p + c] -= f * m[k * p + c];
            }
            b[r] -= f * b[k];
        }
    }

    let max_piv = pivots.iter().cloned().fold(0.0, f64::max);
    let min_piv = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = if max_piv > 0.0 { min_piv / max_piv } else { 0.0 };
    if !(rcond >= RCOND_THRESHOLD) {
        let mut columns: Vec<usize> = pivots
            .iter()
            .enumerate()
            .filter(|(_, &v)| !(v >= RCOND_THRESHOLD * max_piv) || v == 0.0)
            .map(|(k, _)| col_perm[k])
            .collect();
        columns.sort_unstable();
        return Err(Error::Singular { columns, rcond });
    }

    let mut y = vec![0.0; p];
    for k in (0..p).rev() {
        let mut acc = b[k];
        for c in (k + 1)..p {
            acc -= m[k * p + c] * y[c];
        }
        y[k] = acc / m[k * p + k];
    }
    let mut x = vec![0.0; p];
    for (k, &col) in col_perm.iter().enumerate() {
        x[col] = y[k] * scale[col];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn matrix(dim: usize, data: &[f64]) -> SquareMatrix {
        SquareMatrix {
            dim,
            data: data.to_vec(),
        }
    }

    #[test]
    fn solves_two_by_two() {
        let a = matrix(2, &[4.0, 2.0, 2.0, 3.0]);
        let x = solve_normal(&a, &[2.0, 1.0]).unwrap();
        assert_relative_eq!(x[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(x[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn badly_scaled_columns_are_fine() {
        let a = matrix(2, &[1e12, 1e6, 1e6, 2.0]);
        let x_true = [3e-6, 7.0];
        let rhs = a.mul_vec(&x_true);
        let x = solve_normal(&a, &rhs).unwrap();
        assert_relative_eq!(x[0], x_true[0], max_relative = 1e-10);
        assert_relative_eq!(x[1], x_true[1], max_relative = 1e-10);
    }

    #[test]
    fn collinear_columns_are_reported() {
        // Column 2 = 2 * column 1.
        let rows = [[1.0, 1.0, 2.0], [1.0, 2.0, 4.0], [1.0, 3.0, 6.0]];
        let mut a = SquareMatrix::zeros(3);
        for r in &rows {
            a.add_outer(r, 1.0);
        }
        match solve_normal(&a, &[1.0, 1.0, 1.0]) {
            Err(Error::Singular { columns, rcond }) => {
                assert!(rcond < RCOND_THRESHOLD);
                assert_eq!(columns.len(), 1);
                assert!(columns[0] == 1 || columns[0] == 2);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn zero_column_is_singular() {
        let a = matrix(2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            solve_normal(&a, &[1.0, 0.0]),
            Err(Error::Singular { ref columns, .. }) if columns == &vec![1]
        ));
    }
}
