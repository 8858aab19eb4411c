//! Exact linear algebra over the rationals.
//!
//! Ranks are computed by fraction-free (Bareiss) elimination on an integer
//! matrix obtained by clearing denominators row by row; row scaling does not
//! change the rank, and the Bareiss pivot division is always exact. Kernel
//! bases come from a straightforward rational Gauss-Jordan pass.

use crate::scalar::{Rat, Scalar};
use num::bigint::BigInt;
use num::Integer;
use num::Signed;

/// Dense rational matrix, row major.
#[derive(Clone, PartialEq)]
pub struct QMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Rat>,
}

impl std::fmt::Debug for QMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "QMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.at(r, c).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl QMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        QMatrix {
            rows,
            cols,
            data: vec![Rat::int(0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = QMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rat::int(1));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Rat) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        QMatrix { rows, cols, data }
    }

    pub fn from_int_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        QMatrix::from_fn(r, c, |i, j| Rat::int(rows[i][j]))
    }

    pub fn at(&self, r: usize, c: usize) -> &Rat {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rat) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> QMatrix {
        QMatrix::from_fn(self.cols, self.rows, |r, c| self.at(c, r).clone())
    }

    pub fn mul(&self, rhs: &QMatrix) -> QMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        QMatrix::from_fn(self.rows, rhs.cols, |r, c| {
            let mut acc = Rat::int(0);
            for k in 0..self.cols {
                acc += self.at(r, k).clone() * rhs.at(k, c).clone();
            }
            acc
        })
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Rat]) -> Vec<Rat> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in matrix-vector product");
        (0..self.rows)
            .map(|r| {
                let mut acc = Rat::int(0);
                for k in 0..self.cols {
                    acc += self.at(r, k).clone() * v[k].clone();
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, rhs: &QMatrix) -> QMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        QMatrix::from_fn(self.rows, self.cols, |r, c| {
            self.at(r, c).clone() + rhs.at(r, c).clone()
        })
    }

    pub fn sub(&self, rhs: &QMatrix) -> QMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        QMatrix::from_fn(self.rows, self.cols, |r, c| {
            self.at(r, c).clone() - rhs.at(r, c).clone()
        })
    }

    pub fn scale(&self, s: &Rat) -> QMatrix {
        QMatrix::from_fn(self.rows, self.cols, |r, c| self.at(r, c).clone() * s.clone())
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn hcat(&self, rhs: &QMatrix) -> QMatrix {
        assert_eq!(self.rows, rhs.rows);
        QMatrix::from_fn(self.rows, self.cols + rhs.cols, |r, c| {
            if c < self.cols {
                self.at(r, c).clone()
            } else {
                rhs.at(r, c - self.cols).clone()
            }
        })
    }

    /// Rank via Bareiss fraction-free elimination on the denominator-cleared
    /// integer matrix.
    pub fn rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        // Clear denominators per row; scaling rows by nonzero constants
        // preserves rank.
        let mut m: Vec<Vec<BigInt>> = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut lcm = BigInt::from(1);
            for c in 0..self.cols {
                lcm = lcm.lcm(self.at(r, c).denom());
            }
            let row: Vec<BigInt> = (0..self.cols)
                .map(|c| {
                    let q = self.at(r, c);
                    q.numer() * (&lcm / q.denom())
                })
                .collect();
            m.push(row);
        }

        let (rows, cols) = (self.rows, self.cols);
        let mut rank = 0usize;
        let mut prev = BigInt::from(1);
        let mut row = 0usize;
        for col in 0..cols {
            // Find a pivot in this column.
            let mut piv = None;
            for r in row..rows {
                if m[r][col].signum() != BigInt::from(0) {
                    piv = Some(r);
                    break;
                }
            }
            let Some(p) = piv else { continue };
            m.swap(row, p);
            for r in row + 1..rows {
                for c in col + 1..cols {
                    let num = &m[row][col] * &m[r][c] - &m[r][col] * &m[row][c];
                    // Bareiss: division by the previous pivot is exact.
                    m[r][c] = num / &prev;
                }
                m[r][col] = BigInt::from(0);
            }
            prev = m[row][col].clone();
            row += 1;
            rank += 1;
            if row == rows {
                break;
            }
        }
        rank
    }

    /// Reduced row echelon form together with the pivot column list.
    pub fn rref(&self) -> (QMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0usize;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let mut piv = None;
            for r in row..m.rows {
                if !m.at(r, col).is_zero() {
                    piv = Some(r);
                    break;
                }
            }
            let Some(p) = piv else { continue };
            for c in 0..m.cols {
                let tmp = m.at(row, c).clone();
                m.set(row, c, m.at(p, c).clone());
                m.set(p, c, tmp);
            }
            let inv = Rat::int(1).div(m.at(row, col));
            for c in 0..m.cols {
                let v = m.at(row, c).clone() * inv.clone();
                m.set(row, c, v);
            }
            for r in 0..m.rows {
                if r != row && !m.at(r, col).is_zero() {
                    let factor = m.at(r, col).clone();
                    for c in 0..m.cols {
                        let v = m.at(r, c).clone() - factor.clone() * m.at(row, c).clone();
                        m.set(r, c, v);
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    /// Basis of the right null space, returned as matrix columns.
    pub fn nullspace(&self) -> QMatrix {
        let (rr, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut basis = QMatrix::zeros(self.cols, free.len());
        for (k, &fc) in free.iter().enumerate() {
            basis.set(fc, k, Rat::int(1));
            for (prow, &pc) in pivots.iter().enumerate() {
                basis.set(pc, k, -rr.at(prow, fc).clone());
            }
        }
        basis
    }

    /// Basis of the column space: the columns of `self` at pivot positions.
    pub fn column_space(&self) -> QMatrix {
        let (_, pivots) = self.rref();
        QMatrix::from_fn(self.rows, pivots.len(), |r, k| self.at(r, pivots[k]).clone())
    }

    /// Solve `self * x = b` for one solution; `None` if inconsistent.
    /// `b` must be a column vector matrix.
    pub fn solve(&self, b: &QMatrix) -> Option<QMatrix> {
        assert_eq!(b.cols, 1);
        assert_eq!(b.rows, self.rows);
        let aug = self.hcat(b);
        let (rr, pivots) = aug.rref();
        if pivots.contains(&self.cols) {
            return None; // pivot in the augmented column
        }
        let mut x = QMatrix::zeros(self.cols, 1);
        for (prow, &pc) in pivots.iter().enumerate() {
            x.set(pc, 0, rr.at(prow, self.cols).clone());
        }
        Some(x)
    }

    /// Express every column of `b` in terms of the columns of `self`.
    /// Returns the coefficient matrix `c` with `self * c = b`, or `None`
    /// if some column of `b` is outside the column span.
    pub fn solve_many(&self, b: &QMatrix) -> Option<QMatrix> {
        let mut out = QMatrix::zeros(self.cols, b.cols);
        for j in 0..b.cols {
            let col = QMatrix::from_fn(b.rows, 1, |r, _| b.at(r, j).clone());
            let x = self.solve(&col)?;
            for i in 0..self.cols {
                out.set(i, j, x.at(i, 0).clone());
            }
        }
        Some(out)
    }

    pub fn max_abs_f64(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.approx_f64().abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_known_matrices() {
        let m = QMatrix::from_int_rows(&[vec![1, 2, 3], vec![2, 4, 6], vec![1, 0, 1]]);
        assert_eq!(m.rank(), 2);
        assert_eq!(QMatrix::identity(4).rank(), 4);
        assert_eq!(QMatrix::zeros(3, 5).rank(), 0);
    }

    #[test]
    fn rank_with_fractions() {
        let m = QMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => Rat::new(1, 2),
            (0, 1) => Rat::new(1, 3),
            (1, 0) => Rat::new(3, 2),
            (1, 1) => Rat::int(1),
            _ => unreachable!(),
        });
        // Second row is 3x the first.
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn nullspace_dimension_matches_rank() {
        let m = QMatrix::from_int_rows(&[vec![1, 2, 3, 4], vec![0, 1, 1, 1]]);
        let ns = m.nullspace();
        assert_eq!(ns.cols, 2);
        // Every basis vector is an actual kernel element.
        let prod = m.mul(&ns);
        assert!(prod.is_zero());
    }

    #[test]
    fn solve_consistent_and_inconsistent() {
        let m = QMatrix::from_int_rows(&[vec![1, 1], vec![2, 2]]);
        let b = QMatrix::from_int_rows(&[vec![3], vec![6]]);
        let x = m.solve(&b).unwrap();
        assert_eq!(m.mul(&x), b);
        let bad = QMatrix::from_int_rows(&[vec![3], vec![7]]);
        assert!(m.solve(&bad).is_none());
    }

    #[test]
    fn rref_rank_agrees_with_bareiss() {
        // Cross-check the fraction-free rank against the pivot count from
        // rational elimination on a few fixed matrices.
        let mats = [
            QMatrix::from_int_rows(&[vec![2, 3, 5], vec![4, 6, 10], vec![1, 1, 1]]),
            QMatrix::from_int_rows(&[vec![0, 0], vec![0, 1]]),
            QMatrix::from_int_rows(&[vec![1, 2], vec![3, 4], vec![5, 6]]),
        ];
        for m in mats {
            let (_, pivots) = m.rref();
            assert_eq!(m.rank(), pivots.len());
        }
    }
}
