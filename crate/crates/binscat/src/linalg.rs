//! Symmetric banded matrices, banded Cholesky, and the block solver used for
//! Newton steps.
//!
//! The basis Gram/Hessian blocks are symmetric with at most `p`
//! super-diagonals (basis functions overlap only within `p+1` consecutive
//! indices), so everything here is O(K·bw²) instead of O(K³). Control
//! columns add a small dense border handled by a Schur complement.

use crate::error::{Error, Result};

/// Symmetric banded matrix stored by super-diagonals:
/// `data[i*(bw+1) + d] = A[i][i+d]` for `d ≤ bw`, zero-padded past the edge.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> SymBanded {
        SymBanded {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw {
            0.0
        } else {
            self.data[lo * (self.bw + 1) + (hi - lo)]
        }
    }

    #[inline]
    fn entry_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(j >= i && j - i <= self.bw);
        &mut self.data[i * (self.bw + 1) + (j - i)]
    }

    /// Rank-one update `A += w · v v'` for a contiguous coefficient block
    /// starting at column `start`. The block length must stay within the
    /// bandwidth.
    pub fn add_outer(&mut self, start: usize, vals: &[f64], w: f64) {
        debug_assert!(vals.len() <= self.bw + 1);
        for (a, &va) in vals.iter().enumerate() {
            let wa = w * va;
            for (b, &vb) in vals.iter().enumerate().skip(a) {
                *self.entry_mut(start + a, start + b) += wa * vb;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// Adds `c` to every diagonal entry.
    pub fn add_diagonal(&mut self, c: f64) {
        for i in 0..self.n {
            self.data[i * (self.bw + 1)] += c;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * (self.bw + 1)]).sum()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = self.data[i * (self.bw + 1)] * x[i];
            for d in 1..=self.bw.min(self.n - 1 - i) {
                let a = self.data[i * (self.bw + 1) + d];
                acc += a * x[i + d];
                y[i + d] += a * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// `x' A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            acc += self.data[i * (self.bw + 1)] * x[i] * x[i];
            for d in 1..=self.bw.min(self.n - 1 - i) {
                acc += 2.0 * self.data[i * (self.bw + 1) + d] * x[i] * x[i + d];
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Banded Cholesky factorization `A = L L'`. Fails on a non-positive
    /// pivot (matrix not positive definite to working precision).
    pub fn cholesky(&self) -> Result<BandedChol> {
        let bw = self.bw;
        let n = self.n;
        // low[i*(bw+1) + e] = L[i][i-e]
        let mut low = vec![0.0; n * (bw + 1)];
        for j in 0..n {
            let mut diag = self.get(j, j);
            for e in 1..=bw.min(j) {
                diag -= low[j * (bw + 1) + e] * low[j * (bw + 1) + e];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::SingularSystem(format!(
                    "non-positive pivot {diag:.3e} at index {j} during banded Cholesky"
                )));
            }
            let ljj = diag.sqrt();
            low[j * (bw + 1)] = ljj;
            for i in (j + 1)..n.min(j + bw + 1) {
                let mut acc = self.get(i, j);
                // overlap of row i and row j band segments
                let kmin = i.saturating_sub(bw).max(j.saturating_sub(bw));
                for k in kmin..j {
                    acc -= low[i * (bw + 1) + (i - k)] * low[j * (bw + 1) + (j - k)];
                }
                low[i * (bw + 1) + (i - j)] = acc / ljj;
            }
        }
        Ok(BandedChol { n, bw, low })
    }
}

/// Lower banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedChol {
    n: usize,
    bw: usize,
    low: Vec<f64>,
}

impl BandedChol {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i && i - j <= self.bw);
        self.low[i * (self.bw + 1) + (i - j)]
    }

    /// Solves `L L' x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        // forward: L y = b
        for i in 0..n {
            let mut acc = x[i];
            for j in i.saturating_sub(bw)..i {
                acc -= self.l(i, j) * x[j];
            }
            x[i] = acc / self.l(i, i);
        }
        // backward: L' x = y
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n.min(i + bw + 1) {
                acc -= self.l(j, i) * x[j];
            }
            x[i] = acc / self.l(i, i);
        }
    }

    /// `y = L' x` (used to push solutions through a factored meat matrix:
    /// with `Σ = L L'`, `x'Σx = ‖L'x‖²`).
    pub fn transpose_mul(&self, x: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for i in j..n.min(j + bw + 1) {
                acc += self.l(i, j) * x[i];
            }
            y[j] = acc;
        }
        y
    }

    /// `y = L x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in i.saturating_sub(bw)..=i {
                acc += self.l(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }
}

/// Dense symmetric positive-definite solver for the small Schur block.
#[derive(Debug, Clone)]
pub struct DenseChol {
    n: usize,
    low: Vec<f64>,
}

impl DenseChol {
    /// Factors a dense symmetric matrix given in row-major order.
    pub fn new(a: &[f64], n: usize) -> Result<DenseChol> {
        let mut low = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a[j * n + j];
            for k in 0..j {
                diag -= low[j * n + k] * low[j * n + k];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::SingularSystem(format!(
                    "non-positive pivot {diag:.3e} at index {j} during dense Cholesky"
                )));
            }
            low[j * n + j] = diag.sqrt();
            for i in (j + 1)..n {
                let mut acc = a[i * n + j];
                for k in 0..j {
                    acc -= low[i * n + k] * low[j * n + k];
                }
                low[i * n + j] = acc / low[j * n + j];
            }
        }
        Ok(DenseChol { n, low })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.low[i * n + j] * x[j];
            }
            x[i] /= self.low[i * n + i];
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] = x[i] - self.low[j * n + i] * x[j];
            }
            x[i] /= self.low[i * n + i];
        }
        x
    }
}

/// Solver for the arrow-shaped SPD system
/// `[A  B; B'  D] [u; v] = [a; b]`
/// with `A` banded `K×K`, `B` dense `K×d`, `D` dense `d×d`:
/// factor `A`, then eliminate the border through the Schur complement
/// `S = D − B'A⁻¹B`.
pub struct BlockSolver {
    a_chol: BandedChol,
    /// A⁻¹B, column-major.
    ainv_b: Vec<Vec<f64>>,
    /// Original B, column-major.
    b_cols: Vec<Vec<f64>>,
    s_chol: Option<DenseChol>,
    d: usize,
}

impl BlockSolver {
    pub fn new(a: &SymBanded, b_cols: &[Vec<f64>], d_block: &[f64]) -> Result<BlockSolver> {
        let d = b_cols.len();
        let a_chol = a.cholesky()?;
        let ainv_b: Vec<Vec<f64>> = b_cols.iter().map(|c| a_chol.solve(c)).collect();
        let s_chol = if d > 0 {
            let mut s = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    let mut acc = d_block[i * d + j];
                    for k in 0..a.dim() {
                        acc -= b_cols[i][k] * ainv_b[j][k];
                    }
                    s[i * d + j] = acc;
                }
            }
            Some(DenseChol::new(&s, d)?)
        } else {
            None
        };
        Ok(BlockSolver {
            a_chol,
            ainv_b,
            b_cols: b_cols.to_vec(),
            s_chol,
            d,
        })
    }

    /// Returns `(u, v)` solving the bordered system.
    pub fn solve(&self, a_rhs: &[f64], b_rhs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let u0 = self.a_chol.solve(a_rhs);
        if self.d == 0 {
            return (u0, Vec::new());
        }
        let s_chol = self.s_chol.as_ref().unwrap();
        let mut rhs = vec![0.0; self.d];
        for (i, col) in self.b_cols.iter().enumerate() {
            rhs[i] = b_rhs[i] - dot(col, &u0);
        }
        let v = s_chol.solve(&rhs);
        let mut u = u0;
        for (i, col) in self.ainv_b.iter().enumerate() {
            for (uk, ck) in u.iter_mut().zip(col.iter()) {
                *uk -= v[i] * ck;
            }
        }
        (u, v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Solves a small dense symmetric system by Gaussian elimination with
/// partial pivoting (used for selector constants and null-model fits, where
/// positive definiteness is not guaranteed analytically).
pub fn dense_solve(a: &[f64], n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = rhs.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col].abs() < 1e-300 {
            return Err(Error::SingularSystem(
                "zero pivot in dense elimination".into(),
            ));
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        let inv = 1.0 / m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut acc = x[r];
        for c in (r + 1)..n {
            acc -= m[r * n + c] * x[c];
        }
        x[r] = acc / m[r * n + r];
    }
    Ok(x)
}
