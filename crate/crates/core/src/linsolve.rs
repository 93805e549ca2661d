//! Sparse linear algebra for the Newton updates.
//!
//! The linearized operator is nonsymmetric whenever the augmentation term
//! depends on the gradient (first-order terms), so the iterative path is
//! restarted GMRES with diagonal (Jacobi) right-preconditioning. Small
//! systems go through a dense partial-pivot LU instead, which is both faster
//! at that scale and a useful cross-check on the iterative path.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Entries are sorted and
    /// duplicates summed; out-of-range columns and non-finite values are
    /// rejected.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n} rows, got {}",
                rows.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let mut last_col = usize::MAX;
            for (c, v) in row {
                if c >= n {
                    return Err(Error::IndexOutOfBounds { index: c, n });
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("matrix entry ({i},{c})"),
                    });
                }
                if c == last_col {
                    *vals.last_mut().expect("entry exists") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last_col = c;
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[idx] * x[self.cols[idx]];
            }
            y[i] = acc;
        }
    }

    /// Main diagonal (zero where absent).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[idx] == i {
                    d[i] = self.vals[idx];
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                dense[i * self.n + self.cols[idx]] = self.vals[idx];
            }
        }
        dense
    }
}

/// Options for the restarted GMRES iteration.
#[derive(Debug, Clone)]
pub struct KrylovOpts {
    /// Restart length (Krylov subspace dimension per cycle).
    pub restart: usize,
    /// Total iteration budget across restarts.
    pub max_iters: usize,
    /// Target relative residual.
    pub tol: f64,
    /// Acceptance threshold: exceeding this after the budget is a hard
    /// failure; between `tol` and this the solve is accepted as-is.
    pub fail_threshold: f64,
}

impl Default for KrylovOpts {
    fn default() -> Self {
        Self {
            restart: 50,
            max_iters: 5000,
            tol: 1e-10,
            fail_threshold: 1e-8,
        }
    }
}

/// Iteration count and achieved relative residual of a linear solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restarted GMRES with Jacobi right-preconditioning, starting from zero.
pub fn gmres(a: &CsrMatrix, b: &[f64], opts: &KrylovOpts) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::InvalidInput(format!(
            "rhs length {} does not match matrix size {n}",
            b.len()
        )));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }

    let diag = a.diagonal();
    let minv: Vec<f64> = diag
        .iter()
        .map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 })
        .collect();

    let m = opts.restart.max(1);
    let mut x = vec![0.0; n];
    let mut total = 0usize;
    let mut scratch = vec![0.0; n];
    loop {
        // true residual at the start of each cycle
        a.matvec(&x, &mut scratch);
        let r: Vec<f64> = b.iter().zip(&scratch).map(|(bi, ax)| bi - ax).collect();
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if rel <= opts.tol {
            return Ok((
                x,
                SolveStats {
                    iterations: total,
                    relative_residual: rel,
                },
            ));
        }
        if total >= opts.max_iters {
            if rel > opts.fail_threshold {
                return Err(Error::LinearSolveFailure {
                    iterations: total,
                    relative_residual: rel,
                });
            }
            return Ok((
                x,
                SolveStats {
                    iterations: total,
                    relative_residual: rel,
                },
            ));
        }

        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        // columns of the Hessenberg matrix after Givens reduction
        let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;

        let mut j_used = 0;
        for j in 0..m {
            // w = A * M^{-1} * v_j
            let z: Vec<f64> = v[j].iter().zip(&minv).map(|(vj, mi)| vj * mi).collect();
            a.matvec(&z, &mut scratch);
            let mut w = scratch.clone();
            let mut hcol = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate().take(j + 1) {
                let hij = dot(&w, vi);
                hcol[i] = hij;
                for (wc, vc) in w.iter_mut().zip(vi) {
                    *wc -= hij * vc;
                }
            }
            let hnext = norm2(&w);
            hcol[j + 1] = hnext;
            let breakdown = hnext <= 1e-300;
            if !breakdown {
                v.push(w.iter().map(|wc| wc / hnext).collect());
            }

            // apply accumulated Givens rotations, then create the new one
            for i in 0..j {
                let t = cs[i] * hcol[i] + sn[i] * hcol[i + 1];
                hcol[i + 1] = -sn[i] * hcol[i] + cs[i] * hcol[i + 1];
                hcol[i] = t;
            }
            let denom = (hcol[j] * hcol[j] + hcol[j + 1] * hcol[j + 1]).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (hcol[j] / denom, hcol[j + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            hcol[j] = c * hcol[j] + s * hcol[j + 1];
            hcol[j + 1] = 0.0;
            let gj = g[j];
            g[j] = c * gj;
            g[j + 1] = -s * gj;
            hcols.push(hcol);

            total += 1;
            j_used = j + 1;
            let est = g[j + 1].abs() / bnorm;
            if est <= opts.tol || total >= opts.max_iters || breakdown {
                break;
            }
        }

        // back-substitute R y = g and accumulate x += M^{-1} V y
        let mut y = vec![0.0; j_used];
        for i in (0..j_used).rev() {
            let mut acc = g[i];
            for l in (i + 1)..j_used {
                acc -= hcols[l][i] * y[l];
            }
            y[i] = acc / hcols[i][i];
        }
        for (i, &yi) in y.iter().enumerate() {
            for r in 0..n {
                x[r] += minv[r] * v[i][r] * yi;
            }
        }
    }
}

/// Dense LU solve with partial pivoting; intended for small systems.
pub fn lu_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::InvalidInput(format!(
            "rhs length {} does not match matrix size {n}",
            b.len()
        )));
    }
    let mut m = a.to_dense();
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                m[r1 * n + col]
                    .abs()
                    .partial_cmp(&m[r2 * n + col].abs())
                    .expect("finite entries")
            })
            .expect("non-empty range");
        let pivot = m[pivot_row * n + col];
        if pivot.abs() <= 1e-300 {
            return Err(Error::LinearSolveFailure {
                iterations: 0,
                relative_residual: f64::INFINITY,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            x.swap(col, pivot_row);
            perm.swap(col, pivot_row);
        }
        for row in (col + 1)..n {
            let factor = m[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            m[row * n + col] = 0.0;
            for j in (col + 1)..n {
                m[row * n + j] -= factor * m[col * n + j];
            }
            x[row] -= factor * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for j in (row + 1)..n {
            acc -= m[row * n + j] * x[j];
        }
        x[row] = acc / m[row * n + row];
    }
    Ok(x)
}
