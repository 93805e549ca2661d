//! Symmetric tensors and their spectral decompositions.
//!
//! [`SymTensor`] stores the packed upper triangle of a symmetric matrix.
//! Eigenvalues come from a cyclic Jacobi iteration: for matrices of the sizes
//! used here (n <= 4 pointwise, occasionally a bit larger in diagnostics) it
//! is simple, deterministic, and accurate to a few ulps, which is what the
//! admissibility margins downstream depend on.
//!
//! Metric-weighted spectra are reduced to the flat case: with
//! `gamma = g^{-1/2}` the eigenvalues of `W` with respect to `g` are the plain
//! eigenvalues of `gamma * W * gamma`.

use crate::error::{Error, Result};
use crate::symfn::EigenvalueVector;

/// Symmetric `n x n` tensor, packed upper triangle, row-major within rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    n: usize,
    /// Entry `(i, j)` with `i <= j` lives at `i*n - i*(i-1)/2 + (j - i)`.
    data: Vec<f64>,
}

impl SymTensor {
    fn packed_len(n: usize) -> usize {
        n * (n + 1) / 2
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * (2 * self.n + 1 - i) / 2 + (j - i)
    }

    /// Zero tensor of dimension `n >= 2`.
    pub fn zero(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "symmetric tensor needs dimension >= 2, got {n}"
            )));
        }
        Ok(Self {
            n,
            data: vec![0.0; Self::packed_len(n)],
        })
    }

    /// Identity tensor.
    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zero(n)?;
        for i in 0..n {
            t.set(i, i, 1.0);
        }
        Ok(t)
    }

    /// Diagonal tensor from its diagonal entries.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let mut t = Self::zero(diag.len())?;
        for (i, &v) in diag.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("diagonal entry {i}"),
                });
            }
            t.set(i, i, v);
        }
        Ok(t)
    }

    /// Builds from full rows, rejecting non-square, non-symmetric, or
    /// non-finite input. Symmetry is checked exactly: callers that computed
    /// `a_ij` and `a_ji` by different formulas should symmetrize first.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut t = Self::zero(n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("matrix entry ({i},{j})"),
                    });
                }
                if j < i && v != rows[j][i] {
                    return Err(Error::NotSymmetric {
                        i,
                        j,
                        a_ij: rows[j][i],
                        a_ji: v,
                    });
                }
                if j >= i {
                    t.set(i, j, v);
                }
            }
        }
        Ok(t)
    }

    /// Dimension `n`.
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    /// Sets `(i, j)` and `(j, i)` simultaneously.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                acc += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        acc.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &SymTensor, c: f64) {
        assert_eq!(self.n, other.n, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// `self += c * v v^T`.
    pub fn add_rank_one(&mut self, v: &[f64], c: f64) {
        assert_eq!(self.n, v.len(), "dimension mismatch");
        for i in 0..self.n {
            for j in i..self.n {
                let k = self.idx(i, j);
                self.data[k] += c * v[i] * v[j];
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    /// Double contraction `sum_{ij} A_ij B_ij`.
    pub fn double_dot(&self, other: &SymTensor) -> f64 {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * self.get(i, j) * other.get(i, j);
            }
        }
        acc
    }

    /// Full row-major `n x n` copy.
    pub fn to_full(&self) -> Vec<f64> {
        let n = self.n;
        let mut full = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                full[i * n + j] = self.get(i, j);
            }
        }
        full
    }

    /// Exact (bitwise) identity test, used to skip metric transformations.
    pub fn is_identity(&self) -> bool {
        for i in 0..self.n {
            for j in i..self.n {
                let want = if i == j { 1.0 } else { 0.0 };
                if self.get(i, j) != want {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Add<&SymTensor> for &SymTensor {
    type Output = SymTensor;

    fn add(self, rhs: &SymTensor) -> SymTensor {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl std::ops::Sub<&SymTensor> for &SymTensor {
    type Output = SymTensor;

    fn sub(self, rhs: &SymTensor) -> SymTensor {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

/// Eigenvalues (ascending) with their orthonormal eigenvector basis.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: EigenvalueVector,
    /// Row-major `n x n`; column `m` is the eigenvector for `eigenvalues[m]`.
    vectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &EigenvalueVector {
        &self.eigenvalues
    }

    /// Copy of eigenvector `m`.
    pub fn eigenvector(&self, m: usize) -> Vec<f64> {
        let n = self.dim();
        assert!(m < n, "eigenvector index {m} out of bounds for {n}");
        (0..n).map(|r| self.vectors[r * n + m]).collect()
    }

    /// Row-major matrix whose columns are the eigenvectors.
    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    /// `sum_m lambda_m v_m v_m^T`; should reproduce the input up to roundoff.
    pub fn reconstruct(&self) -> SymTensor {
        let n = self.dim();
        let mut out = SymTensor::zero(n).expect("dimension validated");
        for m in 0..n {
            let v = self.eigenvector(m);
            out.add_rank_one(&v, self.eigenvalues[m]);
        }
        out
    }

    /// `max |(V^T V - I)_{ij}|`, a direct orthonormality certificate.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a..n {
                let dot: f64 = (0..n)
                    .map(|r| self.vectors[r * n + a] * self.vectors[r * n + b])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Frobenius norm of the strictly off-diagonal part of a full matrix.
fn off_diagonal_norm(n: usize, a: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = a[i * n + j];
            acc += 2.0 * v * v;
        }
    }
    acc.sqrt()
}

const JACOBI_MAX_SWEEPS: usize = 50;
const JACOBI_REL_TOL: f64 = 1e-14;

/// Eigendecomposition of a symmetric tensor by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `1e-14 * ||W||_F` (measured against the original tensor). Eigenvalues are
/// returned ascending; an already-diagonal input passes through exactly.
pub fn eigen(w: &SymTensor) -> Result<SpectralDecomposition> {
    let n = w.dim();
    let mut a = w.to_full();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let norm0 = w.frobenius_norm();
    let tol = JACOBI_REL_TOL * norm0;
    let mut off = off_diagonal_norm(n, &a);
    let mut sweeps = 0;
    while off > tol {
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNoConvergence { sweeps, off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[p * n + p] -= t * apq;
                a[q * n + q] += t * apq;
                // Zero the target pair explicitly instead of rotating it.
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = vrp - s * (vrq + tau * vrp);
                    v[r * n + q] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        off = off_diagonal_norm(n, &a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[i * n + i]
            .partial_cmp(&a[j * n + j])
            .expect("eigenvalues finite for finite input")
    });
    let eigenvalues = EigenvalueVector::new(order.iter().map(|&i| a[i * n + i]).collect())?;
    let mut vectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + new_col] = v[r * n + old_col];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
    })
}

const PD_REL_FLOOR: f64 = 1e-12;

/// Inverse square root `gamma = g^{-1/2}` of a positive-definite metric,
/// so that `gamma * gamma = g^{-1}`.
pub fn metric_sqrt_inverse(g: &SymTensor) -> Result<SymTensor> {
    let dec = eigen(g)?;
    let lam = dec.eigenvalues();
    let largest = lam.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = PD_REL_FLOOR * largest.max(0.0);
    if let Some(&bad) = lam.iter().find(|&&l| l <= floor) {
        return Err(Error::NotPositiveDefinite {
            eigenvalue: bad,
            largest,
        });
    }
    let n = g.dim();
    let mut out = SymTensor::zero(n)?;
    for m in 0..n {
        let v = dec.eigenvector(m);
        out.add_rank_one(&v, 1.0 / lam[m].sqrt());
    }
    Ok(out)
}

/// Eigendecomposition of `W` with respect to a metric `g`: the spectrum of
/// `gamma * W * gamma` with `gamma = g^{-1/2}`. An exactly-identity metric
/// short-circuits to [`eigen`] so flat-metric callers pay nothing.
pub fn eigen_wrt_metric(w: &SymTensor, g: &SymTensor) -> Result<SpectralDecomposition> {
    if w.dim() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "tensor dimension {} does not match metric dimension {}",
            w.dim(),
            g.dim()
        )));
    }
    if g.is_identity() {
        return eigen(w);
    }
    let gamma = metric_sqrt_inverse(g)?;
    let n = w.dim();
    let gf = gamma.to_full();
    let wf = w.to_full();
    let mut gw = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += gf[i * n + l] * wf[l * n + j];
            }
            gw[i * n + j] = acc;
        }
    }
    let mut b = SymTensor::zero(n)?;
    for i in 0..n {
        for j in i..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += gw[i * n + l] * gf[l * n + j];
            }
            let mut acc_t = 0.0;
            for l in 0..n {
                acc_t += gw[j * n + l] * gf[l * n + i];
            }
            // Symmetric in exact arithmetic; average away roundoff skew.
            b.set(i, j, 0.5 * (acc + acc_t));
        }
    }
    eigen(&b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn packed_roundtrip() {
        let mut t = SymTensor::zero(3).unwrap();
        t.set(0, 2, 4.5);
        t.set(1, 1, -2.0);
        assert_eq!(t.get(2, 0), 4.5);
        assert_eq!(t.get(0, 2), 4.5);
        assert_eq!(t.get(1, 1), -2.0);
        assert_eq!(t.trace(), -2.0);
    }

    #[test]
    fn from_rows_validation() {
        assert!(SymTensor::from_rows(&[vec![1.0]]).is_err());
        assert!(matches!(
            SymTensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            SymTensor::from_rows(&[vec![1.0, f64::NAN], vec![f64::NAN, 1.0]]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn known_block_spectrum() {
        // [[2,1,0],[1,2,0],[0,0,5]] has eigenvalues 1, 3, 5.
        let w = SymTensor::from_rows(&[
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 0.0],
            vec![0.0, 0.0, 5.0],
        ])
        .unwrap();
        let dec = eigen(&w).unwrap();
        let lam = dec.eigenvalues();
        assert_close(lam[0], 1.0, 1e-13);
        assert_close(lam[1], 3.0, 1e-13);
        assert_close(lam[2], 5.0, 1e-13);
        assert!(dec.orthonormality_error() <= 1e-13);
        let rec = dec.reconstruct();
        assert!((&rec - &w).frobenius_norm() <= 1e-12 * w.frobenius_norm());
        // eigen-equation residual for the smallest eigenvalue
        let v = dec.eigenvector(0);
        let full = w.to_full();
        for i in 0..3 {
            let wv: f64 = (0..3).map(|j| full[i * 3 + j] * v[j]).sum();
            assert_close(wv, lam[0] * v[i], 1e-12);
        }
    }

    #[test]
    fn diagonal_input_is_exact() {
        let w = SymTensor::from_diagonal(&[3.0, 1.0, 2.0]).unwrap();
        let dec = eigen(&w).unwrap();
        assert_eq!(dec.eigenvalues().as_slice(), &[1.0, 2.0, 3.0]);
        // eigenvectors must be the matching coordinate axes
        assert_eq!(dec.eigenvector(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(dec.eigenvector(2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_eigenvalues_are_exact() {
        let dec = eigen(&SymTensor::identity(4).unwrap()).unwrap();
        assert_eq!(dec.eigenvalues().as_slice(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        for &(a, b, c) in &[(2.0, 1.0, 0.5), (-1.0, 3.0, 4.0), (0.0, 1e-3, 0.0)] {
            let w = SymTensor::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
            let dec = eigen(&w).unwrap();
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            assert_close(dec.eigenvalues()[0], mid - rad, 1e-12);
            assert_close(dec.eigenvalues()[1], mid + rad, 1e-12);
        }
    }

    #[test]
    fn metric_sqrt_inverse_diagonal() {
        let g = SymTensor::from_diagonal(&[4.0, 1.0]).unwrap();
        let gamma = metric_sqrt_inverse(&g).unwrap();
        assert_close(gamma.get(0, 0), 0.5, 1e-14);
        assert_close(gamma.get(1, 1), 1.0, 1e-14);
        assert_close(gamma.get(0, 1), 0.0, 1e-14);
    }

    #[test]
    fn metric_sqrt_inverse_rejects_semidefinite() {
        let g = SymTensor::from_diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            metric_sqrt_inverse(&g),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let g = SymTensor::from_diagonal(&[1.0, -2.0]).unwrap();
        assert!(metric_sqrt_inverse(&g).is_err());
    }

    #[test]
    fn metric_eigen_scales_against_identity() {
        let w = SymTensor::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        // identity metric short-circuits to the flat decomposition
        let flat = eigen(&w).unwrap();
        let viaid = eigen_wrt_metric(&w, &SymTensor::identity(2).unwrap()).unwrap();
        assert_eq!(flat.eigenvalues().as_slice(), viaid.eigenvalues().as_slice());
        // g = 2I halves every eigenvalue
        let mut g2 = SymTensor::identity(2).unwrap();
        g2.scale(2.0);
        let scaled = eigen_wrt_metric(&w, &g2).unwrap();
        for m in 0..2 {
            assert_close(scaled.eigenvalues()[m], 0.5 * flat.eigenvalues()[m], 1e-12);
        }
    }

    #[test]
    fn double_dot_counts_off_diagonals_twice() {
        let a = SymTensor::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let b = SymTensor::from_rows(&[vec![5.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        // 1*5 + 3*2 + 2*(2*-1) = 7
        assert_close(a.double_dot(&b), 7.0, 1e-14);
        assert_close(a.double_dot(&b), b.double_dot(&a), 0.0);
    }

    fn arb_symtensor(n: usize) -> impl Strategy<Value = SymTensor> {
        proptest::collection::vec(-5.0f64..5.0, SymTensor::packed_len(n)).prop_map(move |data| {
            let mut t = SymTensor::zero(n).unwrap();
            let mut idx = 0;
            for i in 0..n {
                for j in i..n {
                    t.set(i, j, data[idx]);
                    idx += 1;
                }
            }
            t
        })
    }

    proptest! {
        #[test]
        fn reconstruction_and_orthonormality(w in (2usize..=5).prop_flat_map(arb_symtensor)) {
            let dec = eigen(&w).unwrap();
            prop_assert!(dec.orthonormality_error() <= 1e-12);
            let rec = dec.reconstruct();
            let scale = w.frobenius_norm().max(1.0);
            prop_assert!((&rec - &w).frobenius_norm() <= 1e-11 * scale);
            // ascending order
            let lam = dec.eigenvalues();
            for m in 1..lam.len() {
                prop_assert!(lam[m] >= lam[m - 1]);
            }
        }

        #[test]
        fn trace_is_eigenvalue_sum(w in (2usize..=4).prop_flat_map(arb_symtensor)) {
            let dec = eigen(&w).unwrap();
            let sum: f64 = dec.eigenvalues().iter().sum();
            let scale = w.frobenius_norm().max(1.0);
            prop_assert!((sum - w.trace()).abs() <= 1e-12 * scale);
        }

        #[test]
        fn spd_metric_sqrt_inverts(diag in proptest::collection::vec(0.1f64..4.0, 2..=4)) {
            // random SPD built from a diagonal plus a rank-one bump
            let n = diag.len();
            let mut g = SymTensor::from_diagonal(&diag).unwrap();
            let v: Vec<f64> = (0..n).map(|i| 0.3 * (i as f64 + 1.0)).collect();
            g.add_rank_one(&v, 0.5);
            let gamma = metric_sqrt_inverse(&g).unwrap();
            // gamma * g * gamma should be the identity
            let dec = eigen_wrt_metric(&g, &g).unwrap();
            for m in 0..n {
                prop_assert!((dec.eigenvalues()[m] - 1.0).abs() <= 1e-10);
            }
            // and gamma itself is symmetric positive definite
            let gdec = eigen(&gamma).unwrap();
            prop_assert!(gdec.eigenvalues()[0] > 0.0);
        }
    }
}
