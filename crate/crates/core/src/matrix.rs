use serde::{Deserialize, Serialize};

/// Dense square matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self::filled(dim, 0.0)
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        SquareMatrix {
            dim,
            data: vec![value; dim * dim],
        }
    }

    /// `diag` on the diagonal, `off` elsewhere.
    pub fn planted(dim: usize, diag: f64, off: f64) -> Self {
        let mut m = Self::filled(dim, off);
        for l in 0..dim {
            m[(l, l)] = diag;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        assert!(rows.iter().all(|r| r.len() == dim), "matrix must be square");
        SquareMatrix {
            dim,
            data: rows.concat(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.data[l * self.dim..(l + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest `|a_ls - a_sl|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for l in 0..self.dim {
            for s in l + 1..self.dim {
                worst = worst.max((self[(l, s)] - self[(s, l)]).abs());
            }
        }
        worst
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (l, out) in y.iter_mut().enumerate() {
            *out = self.row(l).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Conjugates by a label permutation: `out[(p[l], p[s])] = self[(l, s)]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.dim);
        for l in 0..self.dim {
            for s in 0..self.dim {
                out[(perm[l], perm[s])] = self[(l, s)];
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (l, s): (usize, usize)) -> &f64 {
        &self.data[l * self.dim + s]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (l, s): (usize, usize)) -> &mut f64 {
        &mut self.data[l * self.dim + s]
    }
}
