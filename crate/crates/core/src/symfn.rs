//! Elementary symmetric functions, Garding cones, and Newton–MacLaurin gaps.
//!
//! Everything downstream (operator values, ellipticity weights, admissibility
//! checks) reduces to evaluating `sigma_j` on an eigenvalue vector. The
//! evaluation uses the prefix recurrence
//!
//! ```text
//! sigma_j(lambda_1..lambda_m) =
//!     sigma_j(lambda_1..lambda_{m-1}) + lambda_m * sigma_{j-1}(lambda_1..lambda_{m-1})
//! ```
//!
//! which costs `O(n*k)`, never forms the `C(n,k)` monomials explicitly, and
//! only adds products of inputs (no cancellation beyond what the polynomial
//! itself demands). Restricted functions `sigma_j(lambda | i)` reuse the same
//! recurrence with entry `i` skipped, which is also how gradients are formed:
//! `d sigma_k / d lambda_i = sigma_{k-1}(lambda | i)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// A validated vector of eigenvalues: finite entries, dimension at least 2.
///
/// Most routines in this module accept plain slices so intermediate results
/// (for example eigenvalues straight out of a decomposition) do not need to be
/// re-wrapped; this type is the validated front door for external input.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EigenvalueVector {
    values: Vec<f64>,
}

impl EigenvalueVector {
    /// Validates finiteness and dimension (`>= 2`).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "eigenvalue vector needs at least 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("eigenvalue vector entry {bad}"),
            });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl std::ops::Deref for EigenvalueVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl std::ops::Index<usize> for EigenvalueVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Binomial coefficient as a float, computed multiplicatively.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// All of `sigma_0 .. sigma_upto` in one pass. `sigma_0 = 1` by convention.
pub fn sigma_all(upto: usize, lambda: &[f64]) -> Result<Vec<f64>> {
    let n = lambda.len();
    if upto > n {
        return Err(Error::OrderOutOfRange { order: upto, n });
    }
    let mut s = vec![0.0; upto + 1];
    s[0] = 1.0;
    for &v in lambda {
        // Descending j so each sigma_{j-1} read is still the previous prefix.
        for j in (1..=upto).rev() {
            s[j] += v * s[j - 1];
        }
    }
    Ok(s)
}

/// `sigma_k(lambda)`.
pub fn sigma(k: usize, lambda: &[f64]) -> Result<f64> {
    Ok(*sigma_all(k, lambda)?.last().expect("non-empty by construction"))
}

/// All of `sigma_0 .. sigma_upto` of the vector with entry `skip` removed.
pub fn sigma_restricted_all(upto: usize, lambda: &[f64], skip: usize) -> Result<Vec<f64>> {
    let n = lambda.len();
    if skip >= n {
        return Err(Error::IndexOutOfBounds { index: skip, n });
    }
    if upto > n - 1 {
        return Err(Error::OrderOutOfRange { order: upto, n: n - 1 });
    }
    let mut s = vec![0.0; upto + 1];
    s[0] = 1.0;
    for (i, &v) in lambda.iter().enumerate() {
        if i == skip {
            continue;
        }
        for j in (1..=upto).rev() {
            s[j] += v * s[j - 1];
        }
    }
    Ok(s)
}

/// `sigma_k(lambda | i)`: the k-th symmetric function with entry `i` deleted.
pub fn sigma_restricted(k: usize, lambda: &[f64], skip: usize) -> Result<f64> {
    Ok(*sigma_restricted_all(k, lambda, skip)?
        .last()
        .expect("non-empty by construction"))
}

/// Gradient of `sigma_k`: component `i` is `sigma_{k-1}(lambda | i)`.
pub fn sigma_gradient(k: usize, lambda: &[f64]) -> Result<Vec<f64>> {
    let n = lambda.len();
    if k == 0 {
        return Ok(vec![0.0; n]);
    }
    if k > n {
        return Err(Error::OrderOutOfRange { order: k, n });
    }
    (0..n)
        .map(|i| sigma_restricted(k - 1, lambda, i))
        .collect()
}

/// First cone constraint of `Gamma_m` violated at threshold `tau`, if any.
///
/// Scans `sigma_1 .. sigma_m` in order and returns `(i, sigma_i)` for the
/// first index with `sigma_i <= tau`. `tau = 0` tests strict membership;
/// positive `tau` tests membership with margin.
pub fn cone_violation(m: usize, lambda: &[f64], tau: f64) -> Option<(usize, f64)> {
    assert!(
        m <= lambda.len(),
        "cone order {m} exceeds dimension {}",
        lambda.len()
    );
    let mut s = vec![0.0; m + 1];
    s[0] = 1.0;
    for &v in lambda {
        for j in (1..=m).rev() {
            s[j] += v * s[j - 1];
        }
    }
    (1..=m).find_map(|i| (s[i] <= tau).then_some((i, s[i])))
}

/// Strict membership in the cone `Gamma_m = { sigma_i > 0, 1 <= i <= m }`.
pub fn in_cone(m: usize, lambda: &[f64]) -> bool {
    cone_violation(m, lambda, 0.0).is_none()
}

/// Newton–MacLaurin gap
/// `[(sigma_r/C(n,r)) / (sigma_s/C(n,s))]^{1/(r-s)}
///  - [(sigma_m/C(n,m)) / (sigma_l/C(n,l))]^{1/(m-l)}`,
/// which is nonnegative for `lambda` in `Gamma_m` whenever
/// `m > l >= 0`, `r > s >= 0`, `m >= r`, `l >= s`.
///
/// Index contracts are rejected with [`Error::InvalidInput`]; vectors outside
/// `Gamma_m` are rejected with [`Error::ConeViolation`].
pub fn newton_maclaurin_gap(
    m: usize,
    l: usize,
    r: usize,
    s: usize,
    lambda: &[f64],
) -> Result<f64> {
    let n = lambda.len();
    if m > n {
        return Err(Error::OrderOutOfRange { order: m, n });
    }
    if !(m > l && r > s && m >= r && l >= s) {
        return Err(Error::InvalidInput(format!(
            "Newton-MacLaurin indices need m > l, r > s, m >= r, l >= s; got (m,l,r,s)=({m},{l},{r},{s})"
        )));
    }
    if let Some((order, value)) = cone_violation(m, lambda, 0.0) {
        return Err(Error::ConeViolation {
            order,
            value,
            threshold: 0.0,
        });
    }
    let sig = sigma_all(m, lambda)?;
    let norm = |j: usize| sig[j] / binomial(n, j);
    let lhs = (norm(m) / norm(l)).powf(1.0 / (m - l) as f64);
    let rhs = (norm(r) / norm(s)).powf(1.0 / (r - s) as f64);
    Ok(rhs - lhs)
}
