//! Exact linear algebra over the field of expressions.

use crate::expr::Expr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Expr>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Expr::zero(); rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged matrix");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Expr::one());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &Expr {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Expr) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Expr] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Expr>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn columns(&self, cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                m.set(r, j, self.get(r, c).clone());
            }
        }
        m
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for c in 0..other.cols {
                let mut acc = Expr::zero();
                for k in 0..self.cols {
                    let a = self.get(r, k);
                    if a.is_zero() {
                        continue;
                    }
                    acc = &acc + &(a * other.get(k, c));
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Reduced row echelon form and the pivot columns.
    pub fn rref(&self) -> (Matrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let best = (row..m.rows).filter(|&r| !m.get(r, col).is_zero()).min_by_key(|&r| m.get(r, col).size());
            let Some(p) = best else { continue };
            m.swap_rows(row, p);
            let inv = m.get(row, col).recip().expect("nonzero pivot");
            for c in col..m.cols {
                let v = m.get(row, c) * &inv;
                m.set(row, c, v);
            }
            for r in 0..m.rows {
                if r == row || m.get(r, col).is_zero() {
                    continue;
                }
                let f = m.get(r, col).clone();
                for c in col..m.cols {
                    let v = m.get(r, c) - &(&f * m.get(row, c));
                    m.set(r, c, v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Determinant by fraction-carrying elimination.
    pub fn det(&self) -> Expr {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let mut m = self.clone();
        let n = m.rows;
        let mut det = Expr::one();
        for col in 0..n {
            let best = (col..n).filter(|&r| !m.get(r, col).is_zero()).min_by_key(|&r| m.get(r, col).size());
            let Some(p) = best else { return Expr::zero() };
            if p != col {
                m.swap_rows(p, col);
                det = -det;
            }
            let piv = m.get(col, col).clone();
            det = &det * &piv;
            let inv = piv.recip().expect("nonzero pivot");
            for r in col + 1..n {
                if m.get(r, col).is_zero() {
                    continue;
                }
                let f = m.get(r, col) * &inv;
                for c in col..n {
                    let v = m.get(r, c) - &(&f * m.get(col, c));
                    m.set(r, c, v);
                }
            }
        }
        det
    }

    /// A solution of `self · x = b`, with free unknowns set to zero.
    pub fn solve(&self, b: &[Expr]) -> Option<Vec<Expr>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Matrix::zeros(self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, self.cols, b[r].clone());
        }
        let (red, pivots) = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![Expr::zero(); self.cols];
        for (r, &c) in pivots.iter().enumerate() {
            x[c] = red.get(r, self.cols).clone();
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: i64) -> Expr {
        Expr::int(n)
    }

    #[test]
    fn determinant_of_cofactor_example() {
        let t = Expr::indep(0);
        let m = Matrix::from_rows(vec![
            vec![t.clone(), e(1), e(0)],
            vec![e(1), e(0), e(0)],
            vec![e(0), t, e(1)],
        ]);
        assert_eq!(m.det(), e(-1));
        assert_eq!(m.rank(), 3);
    }

    #[test]
    fn solve_and_inconsistency() {
        let x = Expr::indep(1);
        let a = Matrix::from_rows(vec![vec![e(1), e(0)], vec![x.clone(), e(1)]]);
        let sol = a.solve(&[e(1), &x + &e(2)]).unwrap();
        assert_eq!(sol, vec![e(1), e(2)]);
        let singular = Matrix::from_rows(vec![vec![e(1), x.clone()], vec![e(2), &e(2) * &x]]);
        assert!(singular.solve(&[e(1), e(3)]).is_none());
        assert_eq!(singular.rank(), 1);
        assert!(singular.det().is_zero());
    }
}
