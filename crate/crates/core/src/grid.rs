//! Structured box grids and second-order finite-difference calculus.
//!
//! Domains are axis-aligned boxes in dimension 2 to 4 with uniform per-axis
//! spacing. Grid functions store one value per node in row-major
//! lexicographic order (last axis fastest). Derivatives use the classic
//! second-order stencils: centered first and second differences in the
//! interior, the 4-point cross stencil for mixed entries, and one-sided
//! second-order first derivatives at the boundary (used only for norms).
//!
//! All stencils are exact on polynomials of total degree <= 2, which the
//! solver tests lean on: a quadratic manufactured solution is recovered to
//! solver tolerance rather than discretization error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chi::ChiSpec;
use crate::error::{Error, Result};
use crate::spectral::{self, SymTensor};

/// Axis-aligned box with per-axis node counts (boundary included).
#[derive(Debug, Clone, PartialEq)]
pub struct GridBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    /// `strides[a]` = linear-index step when axis `a` advances by one node.
    strides: Vec<usize>,
}

impl GridBox {
    /// Requires dimension in `2..=4`, `upper > lower` per axis, and at least
    /// 5 nodes per axis (so an interior with room for centered stencils
    /// always exists).
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let n = lower.len();
        if !(2..=4).contains(&n) {
            return Err(Error::InvalidInput(format!(
                "box dimension must be 2..=4, got {n}"
            )));
        }
        if upper.len() != n || counts.len() != n {
            return Err(Error::InvalidInput(format!(
                "box field lengths disagree: lower {n}, upper {}, counts {}",
                upper.len(),
                counts.len()
            )));
        }
        for a in 0..n {
            if !(lower[a].is_finite() && upper[a].is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("box bounds on axis {a}"),
                });
            }
            if upper[a] <= lower[a] {
                return Err(Error::InvalidInput(format!(
                    "axis {a}: upper {} must exceed lower {}",
                    upper[a], lower[a]
                )));
            }
            if counts[a] < 5 {
                return Err(Error::InvalidInput(format!(
                    "axis {a}: need at least 5 nodes, got {}",
                    counts[a]
                )));
            }
        }
        let mut strides = vec![1usize; n];
        for a in (0..n - 1).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        Ok(Self {
            lower,
            upper,
            counts,
            strides,
        })
    }

    /// Cube helper: same bounds and count on every axis.
    pub fn cube(n: usize, lower: f64, upper: f64, count: usize) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n], vec![count; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.counts[axis] - 1) as f64
    }

    /// Largest per-axis spacing, the `h` used in convergence studies.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn num_nodes(&self) -> usize {
        self.counts.iter().product()
    }

    /// Coordinates of a node. Endpoints are reproduced exactly (not via
    /// `lower + i*h`, which can miss `upper` by an ulp).
    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        (0..self.dim())
            .map(|a| {
                let i = idx[a];
                debug_assert!(i < self.counts[a]);
                if i == 0 {
                    self.lower[a]
                } else if i == self.counts[a] - 1 {
                    self.upper[a]
                } else {
                    self.lower[a] + i as f64 * self.spacing(a)
                }
            })
            .collect()
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim());
        idx.iter()
            .zip(&self.strides)
            .map(|(&i, &s)| {
                i * s
            })
            .sum()
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        debug_assert!(lin < self.num_nodes());
        let mut idx = vec![0; self.dim()];
        for a in 0..self.dim() {
            idx[a] = lin / self.strides[a];
            lin %= self.strides[a];
        }
        idx
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn is_boundary(&self, idx: &[usize]) -> bool {
        idx.iter()
            .zip(&self.counts)
            .any(|(&i, &c)| i == 0 || i == c - 1)
    }

    pub fn is_interior(&self, idx: &[usize]) -> bool {
        !self.is_boundary(idx)
    }

    /// All multi-indices in lexicographic (linear) order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.num_nodes()).map(|lin| self.multi_index(lin))
    }

    /// Interior multi-indices in lexicographic order.
    pub fn interior_indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.indices().filter(|idx| self.is_interior(idx))
    }
}

/// Discrete scalar field on a [`GridBox`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: GridBox,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn from_values(grid: GridBox, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::InvalidInput(format!(
                "value count {} does not match grid nodes {}",
                values.len(),
                grid.num_nodes()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("grid value at node {:?}", grid.multi_index(bad)),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: GridBox, c: f64) -> Result<Self> {
        let n = grid.num_nodes();
        Self::from_values(grid, vec![c; n])
    }

    /// Samples `f` at every node; rejects non-finite samples with the
    /// offending node in the error.
    pub fn from_fn(grid: GridBox, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..grid.num_nodes())
            .map(|lin| f(&grid.point(&grid.multi_index(lin))))
            .collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &GridBox {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.linear_index(idx)]
    }

    pub fn value_lin(&self, lin: usize) -> f64 {
        self.values[lin]
    }

    /// New function `self + s * delta` (used for Newton updates); rejects
    /// non-finite results so a bad linear solve cannot poison an iterate.
    pub fn updated(&self, delta: &[f64], s: f64) -> Result<Self> {
        if delta.len() != self.values.len() {
            return Err(Error::InvalidInput(format!(
                "update length {} does not match node count {}",
                delta.len(),
                self.values.len()
            )));
        }
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(delta)
            .map(|(v, d)| v + s * d)
            .collect();
        Self::from_values(self.grid.clone(), values)
    }

    /// Copy with boundary nodes overwritten by `phi` (Dirichlet injection).
    pub fn with_boundary(&self, phi: &GridFunction) -> Result<Self> {
        if phi.grid != self.grid {
            return Err(Error::GridMismatch(
                "boundary data lives on a different grid".into(),
            ));
        }
        let mut values = self.values.clone();
        for (lin, idx) in self.grid.indices().enumerate() {
            if self.grid.is_boundary(&idx) {
                values[lin] = phi.values[lin];
            }
        }
        Self::from_values(self.grid.clone(), values)
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        if other.grid != self.grid {
            return Err(Error::GridMismatch(
                "comparing functions on different grids".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    fn require_interior(&self, idx: &[usize]) -> Result<()> {
        if !self.grid.is_interior(idx) {
            return Err(Error::BoundaryIndex {
                index: idx.to_vec(),
            });
        }
        Ok(())
    }

    /// Centered gradient; interior nodes only.
    pub fn gradient_at(&self, idx: &[usize]) -> Result<Vec<f64>> {
        self.require_interior(idx)?;
        let lin = self.grid.linear_index(idx);
        Ok((0..self.grid.dim())
            .map(|a| {
                let s = self.grid.strides[a];
                (self.values[lin + s] - self.values[lin - s]) / (2.0 * self.grid.spacing(a))
            })
            .collect())
    }

    /// Gradient at any node: centered where possible, second-order one-sided
    /// on boundary axes. Used for the C1 norm, which runs over the closed box.
    fn gradient_closed(&self, idx: &[usize]) -> Vec<f64> {
        let lin = self.grid.linear_index(idx);
        (0..self.grid.dim())
            .map(|a| {
                let s = self.grid.strides[a];
                let h = self.grid.spacing(a);
                let i = idx[a];
                let c = self.grid.counts[a];
                if i == 0 {
                    (-3.0 * self.values[lin] + 4.0 * self.values[lin + s]
                        - self.values[lin + 2 * s])
                        / (2.0 * h)
                } else if i == c - 1 {
                    (3.0 * self.values[lin] - 4.0 * self.values[lin - s]
                        + self.values[lin - 2 * s])
                        / (2.0 * h)
                } else {
                    (self.values[lin + s] - self.values[lin - s]) / (2.0 * h)
                }
            })
            .collect()
    }

    /// Centered Hessian with the 4-point cross stencil; interior nodes only.
    pub fn hessian_at(&self, idx: &[usize]) -> Result<SymTensor> {
        self.require_interior(idx)?;
        let n = self.grid.dim();
        let lin = self.grid.linear_index(idx);
        let mut h = SymTensor::zero(n)?;
        for a in 0..n {
            let s = self.grid.strides[a];
            let ha = self.grid.spacing(a);
            h.set(
                a,
                a,
                (self.values[lin + s] - 2.0 * self.values[lin] + self.values[lin - s])
                    / (ha * ha),
            );
            for b in (a + 1)..n {
                let sb = self.grid.strides[b];
                let hb = self.grid.spacing(b);
                let cross = (self.values[lin + s + sb] + self.values[lin - s - sb]
                    - self.values[lin + s - sb]
                    - self.values[lin - s + sb])
                    / (4.0 * ha * hb);
                h.set(a, b, cross);
            }
        }
        Ok(h)
    }

    /// Augmented Hessian `U = D^2 u + chi(x, u, Du)` at an interior node.
    pub fn assemble_u(&self, chi: &ChiSpec, idx: &[usize]) -> Result<SymTensor> {
        let mut u = self.hessian_at(idx)?;
        if chi.is_zero() {
            return Ok(u);
        }
        let x = self.grid.point(idx);
        let z = self.value(idx);
        let p = self.gradient_at(idx)?;
        let c = chi.value(&x, z, &p)?;
        u.add_scaled(&c, 1.0);
        Ok(u)
    }

    /// Discrete `(C0, C1, C2)` norms: `max |u|` over all nodes, max gradient
    /// magnitude over the closed box (one-sided at the boundary), and max
    /// Hessian spectral radius over the interior.
    pub fn norms(&self) -> Result<(f64, f64, f64)> {
        let mut c0 = 0.0f64;
        let mut c1 = 0.0f64;
        let mut c2 = 0.0f64;
        for idx in self.grid.indices() {
            c0 = c0.max(self.value(&idx).abs());
            let g = self.gradient_closed(&idx);
            c1 = c1.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
            if self.grid.is_interior(&idx) {
                let h = self.hessian_at(&idx)?;
                let dec = spectral::eigen(&h)?;
                let rho = dec
                    .eigenvalues()
                    .iter()
                    .fold(0.0f64, |m, &l| m.max(l.abs()));
                c2 = c2.max(rho);
            }
        }
        Ok((c0, c1, c2))
    }

    /// Text dump: header `n k counts lower upper`, then one value per line in
    /// lexicographic order. `k` is the operator order the field was solved
    /// with (carried as metadata so dumps are self-describing).
    pub fn to_text(&self, k: usize) -> String {
        let g = &self.grid;
        let mut out = String::new();
        out.push_str(&format!("{} {}", g.dim(), k));
        for &c in g.counts() {
            out.push_str(&format!(" {c}"));
        }
        for &l in g.lower() {
            out.push_str(&format!(" {l}"));
        }
        for &u in g.upper() {
            out.push_str(&format!(" {u}"));
        }
        out.push('\n');
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    /// Parses the text dump format; returns the function and the stored `k`.
    pub fn from_text(text: &str) -> Result<(Self, usize)> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            position: 0,
            message: "empty dump".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() < 2 {
            return Err(Error::Parse {
                position: 0,
                message: "header needs at least n and k".into(),
            });
        }
        let parse_usize = |t: &str, what: &str| {
            t.parse::<usize>().map_err(|_| Error::Parse {
                position: 0,
                message: format!("bad {what} token {t:?}"),
            })
        };
        let parse_f64 = |t: &str, what: &str| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                position: 0,
                message: format!("bad {what} token {t:?}"),
            })
        };
        let n = parse_usize(toks[0], "dimension")?;
        let k = parse_usize(toks[1], "order")?;
        if toks.len() != 2 + 3 * n {
            return Err(Error::Parse {
                position: 0,
                message: format!("header for n={n} needs {} tokens, got {}", 2 + 3 * n, toks.len()),
            });
        }
        let counts: Vec<usize> = toks[2..2 + n]
            .iter()
            .map(|t| parse_usize(t, "count"))
            .collect::<Result<_>>()?;
        let lower: Vec<f64> = toks[2 + n..2 + 2 * n]
            .iter()
            .map(|t| parse_f64(t, "lower bound"))
            .collect::<Result<_>>()?;
        let upper: Vec<f64> = toks[2 + 2 * n..2 + 3 * n]
            .iter()
            .map(|t| parse_f64(t, "upper bound"))
            .collect::<Result<_>>()?;
        let grid = GridBox::new(lower, upper, counts)?;
        let values: Vec<f64> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| parse_f64(l.trim(), "value"))
            .collect::<Result<_>>()?;
        Ok((Self::from_values(grid, values)?, k))
    }

    pub fn write_text(&self, k: usize, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text(k))?;
        Ok(())
    }

    pub fn read_text(path: impl AsRef<Path>) -> Result<(Self, usize)> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    /// JSON variant of the dump.
    pub fn to_json(&self, k: usize) -> serde_json::Value {
        serde_json::json!(GridDump {
            n: self.grid.dim(),
            k,
            counts: self.grid.counts().to_vec(),
            lower: self.grid.lower().to_vec(),
            upper: self.grid.upper().to_vec(),
            values: self.values.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<(Self, usize)> {
        let dump: GridDump = serde_json::from_str(text)?;
        if dump.counts.len() != dump.n {
            return Err(Error::InvalidInput(format!(
                "dump declares n={} but {} counts",
                dump.n,
                dump.counts.len()
            )));
        }
        let grid = GridBox::new(dump.lower, dump.upper, dump.counts)?;
        Ok((Self::from_values(grid, dump.values)?, dump.k))
    }
}

#[derive(Serialize, Deserialize)]
struct GridDump {
    n: usize,
    k: usize,
    counts: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    values: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square(count: usize) -> GridBox {
        GridBox::cube(2, 0.0, 1.0, count).unwrap()
    }

    #[test]
    fn box_validation() {
        assert!(GridBox::new(vec![0.0], vec![1.0], vec![5]).is_err()); // n=1
        assert!(GridBox::cube(5, 0.0, 1.0, 5).is_err()); // n=5
        assert!(GridBox::cube(2, 0.0, 1.0, 4).is_err()); // too coarse
        assert!(GridBox::new(vec![0.0, 0.0], vec![1.0, 0.0], vec![5, 5]).is_err()); // flat axis
        assert!(GridBox::cube(3, -1.0, 1.0, 5).is_ok());
    }

    #[test]
    fn endpoints_are_exact() {
        let g = GridBox::new(vec![-1.0, 0.0], vec![1.0, 0.3], vec![7, 9]).unwrap();
        assert_eq!(g.point(&[0, 0]), vec![-1.0, 0.0]);
        assert_eq!(g.point(&[6, 8]), vec![1.0, 0.3]);
        assert_eq!(g.point(&[3, 0])[0], 0.0);
    }

    #[test]
    fn index_roundtrip_and_ordering() {
        let g = GridBox::new(vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0], vec![5, 6, 7]).unwrap();
        // last axis fastest
        assert_eq!(g.linear_index(&[0, 0, 1]), 1);
        assert_eq!(g.linear_index(&[0, 1, 0]), 7);
        assert_eq!(g.linear_index(&[1, 0, 0]), 42);
        for lin in [0, 1, 41, 42, 100, 209] {
            assert_eq!(g.linear_index(&g.multi_index(lin)), lin);
        }
    }

    #[test]
    fn boundary_classification() {
        let g = unit_square(5);
        assert!(g.is_boundary(&[0, 2]));
        assert!(g.is_boundary(&[2, 4]));
        assert!(g.is_interior(&[2, 2]));
        assert_eq!(g.interior_indices().count(), 9);
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = unit_square(6);
        let f = GridFunction::from_fn(g, |x| 2.0 * x[0] - x[1] + 0.5).unwrap();
        for idx in f.grid().interior_indices() {
            let grad = f.gradient_at(&idx).unwrap();
            assert!((grad[0] - 2.0).abs() <= 1e-14);
            assert!((grad[1] + 1.0).abs() <= 1e-14);
        }
        assert!(matches!(
            f.gradient_at(&[0, 3]),
            Err(Error::BoundaryIndex { .. })
        ));
    }

    #[test]
    fn gradient_of_square_at_half() {
        // h = 0.25 on [0,1]: d/dx x^2 at x=0.5 is exactly 1 by symmetry
        let g = unit_square(5);
        let f = GridFunction::from_fn(g, |x| x[0] * x[0]).unwrap();
        let grad = f.gradient_at(&[2, 2]).unwrap();
        assert_eq!(grad[0], 1.0);
    }

    #[test]
    fn hessian_exact_on_quadratic_form() {
        let g = GridBox::cube(3, -1.0, 1.0, 7).unwrap();
        // x^T A x / 2 with A = [[2,0.5,0],[0.5,1,-0.3],[0,-0.3,1.5]]
        let a = SymTensor::from_rows(&[
            vec![2.0, 0.5, 0.0],
            vec![0.5, 1.0, -0.3],
            vec![0.0, -0.3, 1.5],
        ])
        .unwrap();
        let af = a.clone();
        let f = GridFunction::from_fn(g, move |x| {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += x[i] * af.get(i, j) * x[j];
                }
            }
            0.5 * acc
        })
        .unwrap();
        for idx in f.grid().interior_indices() {
            let h = f.hessian_at(&idx).unwrap();
            assert!((&h - &a).max_abs() <= 1e-12, "at {idx:?}");
        }
    }

    #[test]
    fn hessian_second_order_on_sine() {
        // error ratio between h and h/2 should be ~4 (second order)
        let exact = |x: f64| -(std::f64::consts::PI * x).sin() * std::f64::consts::PI.powi(2);
        let err_at = |count: usize| -> f64 {
            let g = unit_square(count);
            let f =
                GridFunction::from_fn(g, |x| (std::f64::consts::PI * x[0]).sin()).unwrap();
            let mut worst = 0.0f64;
            for idx in f.grid().interior_indices() {
                let x = f.grid().point(&idx);
                let h = f.hessian_at(&idx).unwrap();
                worst = worst.max((h.get(0, 0) - exact(x[0])).abs());
            }
            worst
        };
        let coarse = err_at(9);
        let fine = err_at(17);
        let ratio = coarse / fine;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn norms_on_reference_fields() {
        let g3 = GridBox::cube(3, -1.0, 1.0, 9).unwrap();
        let zero = GridFunction::constant(g3.clone(), 0.0).unwrap();
        assert_eq!(zero.norms().unwrap(), (0.0, 0.0, 0.0));

        let linear = GridFunction::from_fn(g3.clone(), |x| x[0]).unwrap();
        let (c0, c1, c2) = linear.norms().unwrap();
        assert!((c0 - 1.0).abs() <= 1e-14);
        assert!((c1 - 1.0).abs() <= 1e-13);
        assert!(c2.abs() <= 1e-12);

        // |x|^2/2: gradient x hits sqrt(3) at corners, Hessian is identity
        let quad =
            GridFunction::from_fn(g3, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>()).unwrap();
        let (c0, c1, c2) = quad.norms().unwrap();
        assert!((c0 - 1.5).abs() <= 1e-14);
        assert!((c1 - 3.0f64.sqrt()).abs() <= 1e-13);
        assert!((c2 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn assemble_u_with_and_without_chi() {
        let g = GridBox::cube(3, -1.0, 1.0, 7).unwrap();
        let f =
            GridFunction::from_fn(g, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>()).unwrap();
        let idx = [3, 3, 3];

        let plain = f.assemble_u(&ChiSpec::zero(3), &idx).unwrap();
        let hess = f.hessian_at(&idx).unwrap();
        assert_eq!(plain, hess);

        // chi = z * I adds q(x) to the diagonal
        let with_z = f.assemble_u(&ChiSpec::linear_z(3, 1.0), &idx).unwrap();
        let z = f.value(&idx);
        for i in 0..3 {
            assert!((with_z.get(i, i) - (hess.get(i, i) + z)).abs() <= 1e-14);
        }

        // constant identity chi shifts the diagonal by one
        let with_const = f
            .assemble_u(&ChiSpec::constant(SymTensor::identity(3).unwrap()), &idx)
            .unwrap();
        assert!((with_const.get(0, 0) - (hess.get(0, 0) + 1.0)).abs() <= 1e-14);
    }

    #[test]
    fn boundary_injection() {
        let g = unit_square(5);
        let f = GridFunction::constant(g.clone(), 1.0).unwrap();
        let phi = GridFunction::constant(g, 7.0).unwrap();
        let injected = f.with_boundary(&phi).unwrap();
        assert_eq!(injected.value(&[0, 3]), 7.0);
        assert_eq!(injected.value(&[2, 2]), 1.0);
    }

    #[test]
    fn from_fn_rejects_non_finite() {
        let g = unit_square(5);
        let res = GridFunction::from_fn(g, |x| {
            if x[0] > 0.9 {
                f64::NAN
            } else {
                0.0
            }
        });
        assert!(matches!(res, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn text_dump_roundtrip() {
        let g = GridBox::new(vec![-1.0, 0.0], vec![1.0, 2.0], vec![5, 6]).unwrap();
        let f = GridFunction::from_fn(g, |x| x[0] * 0.125 + x[1]).unwrap();
        let text = f.to_text(3);
        let first = text.lines().next().unwrap();
        assert_eq!(first, "2 3 5 6 -1 0 1 2");
        let (back, k) = GridFunction::from_text(&text).unwrap();
        assert_eq!(k, 3);
        assert_eq!(back, f);
    }

    #[test]
    fn json_dump_roundtrip() {
        let g = GridBox::cube(2, 0.0, 1.0, 5).unwrap();
        let f = GridFunction::from_fn(g, |x| x[0] - x[1]).unwrap();
        let json = f.to_json(2).to_string();
        let (back, k) = GridFunction::from_json(&json).unwrap();
        assert_eq!(k, 2);
        assert_eq!(back, f);
    }

    #[test]
    fn dump_parse_errors() {
        assert!(GridFunction::from_text("").is_err());
        assert!(GridFunction::from_text("2 3 5 6 -1 0 1").is_err()); // short header
        assert!(GridFunction::from_text("2 3 5 6 -1 0 1 2\n1\nbogus\n").is_err());
    }

    proptest! {
        #[test]
        fn linear_multi_index_roundtrip(
            counts in proptest::collection::vec(5usize..9, 2..=3),
            frac in 0.0f64..1.0,
        ) {
            let n = counts.len();
            let g = GridBox::new(vec![0.0; n], vec![1.0; n], counts).unwrap();
            let lin = (frac * (g.num_nodes() - 1) as f64) as usize;
            prop_assert_eq!(g.linear_index(&g.multi_index(lin)), lin);
        }

        #[test]
        fn boundary_samples_match_source(
            count in 5usize..9,
        ) {
            // a function built from a field agrees with that field exactly
            // at boundary nodes (no stencil involvement)
            let g = GridBox::cube(2, -1.0, 1.0, count).unwrap();
            let f = GridFunction::from_fn(g.clone(), |x| x[0].sin() + x[1]).unwrap();
            for idx in g.indices().filter(|i| g.is_boundary(i)) {
                let x = g.point(&idx);
                prop_assert_eq!(f.value(&idx), x[0].sin() + x[1]);
            }
        }
    }
}
