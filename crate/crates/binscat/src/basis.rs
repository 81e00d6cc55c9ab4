//! Binscatter basis evaluation and design matrices.
//!
//! Two smoothness regimes are supported for a degree-`p` basis on a `J`-bin
//! partition:
//!
//! - `s = 0`: within each bin the local monomials `((x−τ_L)/h)^k`,
//!   `k = 0..p`, giving a discontinuous piecewise-polynomial fit of
//!   dimension `(p+1)J`;
//! - `s = p`: order-`p+1` B-splines on the knot sequence with simple
//!   interior knots and endpoint knots repeated `p+1` times, dimension
//!   `J + p`.
//!
//! Every basis value carries a `√J` scaling. The two regimes span nested
//! function spaces (the spline space is the continuity-constrained rotation
//! of the piecewise one); intermediate smoothness `0 < s < p` is rejected.
//!
//! Evaluation exactly at an interior knot follows the left-closed bin
//! convention, so for `s = 0` the (discontinuous) derivative values at a
//! knot are the one-sided limits from the right.

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Degree, smoothness, and partition of a binscatter basis.
#[derive(Debug, Clone)]
pub struct BasisSpec {
    degree: usize,
    smoothness: usize,
    partition: Partition,
    /// B-spline knot vector (only for `s = p > 0`).
    tknots: Vec<f64>,
}

/// One evaluated basis row: values for the `p+1` consecutive active
/// functions starting at column `start`; all other entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRow {
    pub start: usize,
    pub vals: Vec<f64>,
}

impl BasisRow {
    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        out[self.start..self.start + self.vals.len()].copy_from_slice(&self.vals);
        out
    }

    pub fn nonzero_count(&self) -> usize {
        self.vals.iter().filter(|v| **v != 0.0).count()
    }

    pub fn dot(&self, coef: &[f64]) -> f64 {
        self.vals
            .iter()
            .zip(&coef[self.start..])
            .map(|(v, c)| v * c)
            .sum()
    }
}

/// Design matrix with one contiguous-support sparse row per observation.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub rows: Vec<BasisRow>,
    pub dim: usize,
}

impl BasisSpec {
    pub fn new(degree: usize, smoothness: usize, partition: Partition) -> Result<BasisSpec> {
        if smoothness != 0 && smoothness != degree {
            return Err(Error::UnsupportedSmoothness {
                s: smoothness,
                p: degree,
            });
        }
        let tknots = if smoothness == degree && degree > 0 {
            let p = degree;
            let k = partition.knots();
            let mut t = Vec::with_capacity(k.len() + 2 * p);
            t.extend(std::iter::repeat(k[0]).take(p + 1));
            t.extend_from_slice(&k[1..k.len() - 1]);
            t.extend(std::iter::repeat(k[k.len() - 1]).take(p + 1));
            t
        } else {
            Vec::new()
        };
        Ok(BasisSpec {
            degree,
            smoothness,
            partition,
            tknots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn smoothness(&self) -> usize {
        self.smoothness
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Basis dimension `K = (p+1)J − s(J−1)`.
    pub fn dim(&self) -> usize {
        let j = self.partition.nbins();
        (self.degree + 1) * j - self.smoothness * (j - 1)
    }

    /// Bandwidth of Gram-type matrices built from this basis: functions
    /// overlap only when their indices differ by at most `p`.
    pub fn band_width(&self) -> usize {
        self.degree
    }

    /// Evaluates the `v`-th derivative of the basis at `x`.
    pub fn eval(&self, x: f64, v: usize) -> Result<BasisRow> {
        if v > self.degree {
            return Err(Error::InvalidDerivative {
                v,
                p: self.degree,
            });
        }
        let bin = self.partition.bin_of(x)?;
        let scale = (self.partition.nbins() as f64).sqrt();
        if self.smoothness == 0 || self.degree == 0 {
            Ok(self.eval_piecewise(x, v, bin, scale))
        } else {
            Ok(self.eval_bspline(x, v, bin, scale))
        }
    }

    fn eval_piecewise(&self, x: f64, v: usize, bin: usize, scale: f64) -> BasisRow {
        let p = self.degree;
        let tau_l = self.partition.knots()[bin - 1];
        let h = self.partition.width(bin);
        let z = (x - tau_l) / h;
        let mut vals = vec![0.0; p + 1];
        for (k, slot) in vals.iter_mut().enumerate() {
            if k < v {
                continue;
            }
            // d^v/dx^v z^k = k!/(k−v)! · z^{k−v} / h^v
            let mut fall = 1.0;
            for m in 0..v {
                fall *= (k - m) as f64;
            }
            *slot = scale * fall * z.powi((k - v) as i32) / h.powi(v as i32);
        }
        BasisRow {
            start: (bin - 1) * (p + 1),
            vals,
        }
    }

    fn eval_bspline(&self, x: f64, v: usize, bin: usize, scale: f64) -> BasisRow {
        let p = self.degree;
        // span μ with t[μ] ≤ x < t[μ+1]; bins map to spans p..p+J−1
        let span = p + bin - 1;
        let ders = ders_basis_funs(span, x, p, v, &self.tknots);
        let vals = ders[v].iter().map(|b| b * scale).collect();
        BasisRow {
            start: bin - 1,
            vals,
        }
    }

    /// Stacks `eval(x_i, 0)` for every observation.
    pub fn design_matrix(&self, x: &[f64]) -> Result<DesignMatrix> {
        let rows = x
            .iter()
            .map(|&xi| self.eval(xi, 0))
            .collect::<Result<Vec<_>>>()?;
        Ok(DesignMatrix {
            rows,
            dim: self.dim(),
        })
    }
}

/// All derivatives `0..=nder` of the `p+1` B-splines active on `span`,
/// following the standard triangular recurrence (The NURBS Book, A2.3).
/// `out[k][j]` is the `k`-th derivative of basis function `span−p+j`.
fn ders_basis_funs(span: usize, x: f64, p: usize, nder: usize, t: &[f64]) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![0.0; p + 1]; nder + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    if nder == 0 {
        return ders;
    }

    let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=nder {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r <= pk + 1 { k - 1 } else { p - r };
            for j in j1..=j2 {
                a[s2][j] =
                    (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][(rk + j as isize) as usize];
                d += a[s2][j] * ndu[(rk + j as isize) as usize][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for k in 1..=nder {
        for j in 0..=p {
            ders[k][j] *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Partition;
    use proptest::prelude::*;

    fn spec(p: usize, s: usize, knots: Vec<f64>) -> BasisSpec {
        BasisSpec::new(p, s, Partition::user_knots(knots).unwrap()).unwrap()
    }

    #[test]
    fn piecewise_linear_example() {
        let b = spec(1, 0, vec![0.0, 0.5, 1.0]);
        let row = b.eval(0.25, 0).unwrap();
        let dense = row.to_dense(b.dim());
        let r2 = 2.0f64.sqrt();
        let expect = [r2, r2 / 2.0, 0.0, 0.0];
        for (d, e) in dense.iter().zip(expect.iter()) {
            assert!((d - e).abs() < 1e-14, "{dense:?}");
        }
    }

    #[test]
    fn hat_function_peak() {
        let b = spec(1, 1, vec![0.0, 0.5, 1.0]);
        let dense = b.eval(0.5, 0).unwrap().to_dense(3);
        let r2 = 2.0f64.sqrt();
        assert!((dense[0]).abs() < 1e-14);
        assert!((dense[1] - r2).abs() < 1e-14);
        assert!((dense[2]).abs() < 1e-14);
    }

    #[test]
    fn indicator_basis() {
        let b = spec(0, 0, vec![0.0, 0.5, 1.0]);
        for &(x, bin) in &[(0.2, 0usize), (0.7, 1), (1.0, 1)] {
            let dense = b.eval(x, 0).unwrap().to_dense(2);
            for (j, dj) in dense.iter().enumerate() {
                let expect = if j == bin { 2.0f64.sqrt() } else { 0.0 };
                assert!((dj - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dimension_formula() {
        let knots: Vec<f64> = (0..=6).map(|i| i as f64).collect();
        for p in 0..4 {
            let b0 = spec(p, 0, knots.clone());
            assert_eq!(b0.dim(), (p + 1) * 6);
            let bp = spec(p, p, knots.clone());
            assert_eq!(bp.dim(), 6 + p);
        }
    }

    #[test]
    fn intermediate_smoothness_rejected() {
        let part = Partition::user_knots(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            BasisSpec::new(3, 1, part),
            Err(Error::UnsupportedSmoothness { .. })
        ));
    }

    #[test]
    fn derivative_order_above_degree_rejected() {
        let b = spec(1, 1, vec![0.0, 0.5, 1.0]);
        assert!(matches!(
            b.eval(0.3, 2),
            Err(Error::InvalidDerivative { v: 2, p: 1 })
        ));
    }

    #[test]
    fn partition_of_unity_for_splines() {
        let knots = vec![0.0, 0.13, 0.4, 0.55, 0.8, 1.0];
        for p in 1..=4 {
            let b = spec(p, p, knots.clone());
            let scale = (b.partition().nbins() as f64).sqrt();
            for i in 0..=400 {
                let x = i as f64 / 400.0;
                let sum: f64 = b.eval(x, 0).unwrap().vals.iter().sum();
                assert!(
                    (sum / scale - 1.0).abs() <= 1e-12,
                    "p={p} x={x} sum={sum}"
                );
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let knots = vec![0.0, 0.2, 0.45, 0.7, 1.0];
        for &(p, s) in &[(1usize, 0usize), (2, 0), (3, 0), (1, 1), (2, 2), (3, 3)] {
            let b = spec(p, s, knots.clone());
            for i in 0..40 {
                // interior, off knots
                let x = 0.0123 + 0.024 * i as f64;
                let h = 1e-5 * 0.25;
                let up = b.eval(x + h, 0).unwrap().to_dense(b.dim());
                let dn = b.eval(x - h, 0).unwrap().to_dense(b.dim());
                let an = b.eval(x, 1).unwrap().to_dense(b.dim());
                let scale = an.iter().map(|a| a.abs()).fold(1.0f64, f64::max);
                for k in 0..b.dim() {
                    let fd = (up[k] - dn[k]) / (2.0 * h);
                    assert!(
                        (fd - an[k]).abs() <= 1e-6 * scale,
                        "p={p} s={s} x={x} k={k}: fd={fd} an={}",
                        an[k]
                    );
                }
            }
        }
    }

    #[test]
    fn row_sparsity_and_structure() {
        let b = spec(1, 0, vec![0.0, 0.5, 1.0]);
        let xs = [0.1, 0.3, 0.8];
        let dm = b.design_matrix(&xs).unwrap();
        for (row, &x) in dm.rows.iter().zip(xs.iter()) {
            assert_eq!(row.vals.len(), 2);
            let bin = b.partition().bin_of(x).unwrap();
            let tau_l = b.partition().knots()[bin - 1];
            let h = b.partition().width(bin);
            // second entry is the first times the in-bin coordinate
            let ratio = (x - tau_l) / h;
            assert!((row.vals[1] - row.vals[0] * ratio).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn sparsity_bound_holds(
            x in 0.0f64..=1.0,
            p in 0usize..5,
            v in 0usize..3,
            smooth in proptest::bool::ANY,
        ) {
            prop_assume!(v <= p);
            let s = if smooth { p } else { 0 };
            let b = spec(p, s, vec![0.0, 0.21, 0.5, 0.66, 1.0]);
            let row = b.eval(x, v).unwrap();
            prop_assert!(row.nonzero_count() <= p + 1);
            prop_assert!(row.start + row.vals.len() <= b.dim());
        }
    }
}
