//! The mixed Hessian-quotient operator and its pointwise derivatives.
//!
//! For an augmented Hessian `U` with eigenvalues `lambda` the operator reads
//!
//! ```text
//! G(U) = sigma_k / sigma_{k-1} - sum_{l=0}^{k-2} alpha_l * sigma_l / sigma_{k-1}
//! ```
//!
//! evaluated at `lambda`. Admissibility means `lambda` lies in the cone
//! `Gamma_{k-1}`; there the operator is elliptic and concave (for
//! `alpha_l >= 0`), degenerating as the cone boundary is approached.
//!
//! The derivative `dG/dU` is assembled in the eigenbasis: with
//! `q_j = sigma_j` at `lambda` and `r_j = sigma_j(lambda | m)`,
//!
//! ```text
//! f_m = [r_{k-1} q_{k-1} - q_k r_{k-2}] / q_{k-1}^2
//!       - sum_l alpha_l [r_{l-1} q_{k-1} - q_l r_{k-2}] / q_{k-1}^2
//! dG/dU = sum_m f_m v_m v_m^T
//! ```
//!
//! so the smallest `f_m` is the ellipticity margin and their sum is the trace
//! that the lower bound `(n-k+1)/k` applies to.

use crate::error::{Error, Result};
use crate::spectral::{self, SymTensor};
use crate::symfn::{self, EigenvalueVector};

/// Dimension, order, and lower-order coefficients of the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorParams {
    n: usize,
    k: usize,
    alphas: Vec<f64>,
}

impl OperatorParams {
    /// Requires `2 <= k <= n` and exactly `k-1` finite nonnegative
    /// coefficients `alpha_0 .. alpha_{k-2}`.
    pub fn new(n: usize, k: usize, alphas: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("dimension n={n} must be >= 2")));
        }
        if k < 2 || k > n {
            return Err(Error::InvalidInput(format!(
                "order k={k} must satisfy 2 <= k <= n={n}"
            )));
        }
        if alphas.len() != k - 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} lower-order coefficients for k={k}, got {}",
                k - 1,
                alphas.len()
            )));
        }
        for (l, &a) in alphas.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("coefficient alpha_{l}"),
                });
            }
            if a < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "coefficient alpha_{l} = {a} must be nonnegative"
                )));
            }
        }
        Ok(Self { n, k, alphas })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// True in the regime the sharper structural results assume:
    /// `k >= 3` with strictly positive lower-order coefficients.
    pub fn strict_regime(&self) -> bool {
        self.k >= 3 && self.alphas.iter().all(|&a| a > 0.0)
    }

    /// Lower bound `(n-k+1)/k` for the trace of `dG/dU` on the cone.
    pub fn trace_lower_bound(&self) -> f64 {
        (self.n - self.k + 1) as f64 / self.k as f64
    }
}

/// Value and first derivative of `G` at one symmetric tensor.
#[derive(Debug, Clone)]
pub struct OperatorEval {
    /// `G(U)`.
    pub value: f64,
    /// `dG/dU` as a symmetric tensor (`G^{ij}`).
    pub gradient: SymTensor,
    /// `sigma_l / sigma_{k-1}` for `l = 0 ..= k`.
    pub quotients: Vec<f64>,
    /// Raw `sigma_{k-1}(lambda)`: the admissibility margin monitors track
    /// its minimum over the grid.
    pub sigma_km1: f64,
    /// Smallest eigenvalue `f_m` of the gradient: the ellipticity margin.
    pub min_ellipticity: f64,
    /// `sum_i G^{ii} = sum_m f_m`.
    pub trace: f64,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "admissibility margin tau={tau} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// `G` at an eigenvalue vector, with admissibility margin `tau`:
/// every `sigma_i` with `i <= k-1` must exceed `tau`.
pub fn eval_g_lambda(lambda: &[f64], params: &OperatorParams, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if lambda.len() != params.n {
        return Err(Error::InvalidInput(format!(
            "eigenvalue vector length {} does not match n={}",
            lambda.len(),
            params.n
        )));
    }
    if let Some((order, value)) = symfn::cone_violation(params.k - 1, lambda, tau) {
        return Err(Error::ConeViolation {
            order,
            value,
            threshold: tau,
        });
    }
    let k = params.k;
    let sig = symfn::sigma_all(k, lambda)?;
    let denom = sig[k - 1];
    let mut value = sig[k] / denom;
    for (l, &a) in params.alphas.iter().enumerate() {
        value -= a * sig[l] / denom;
    }
    Ok(value)
}

/// Full evaluation (value, derivative, ellipticity data) with margin `tau`.
pub fn eval_g_with_margin(
    u: &SymTensor,
    params: &OperatorParams,
    tau: f64,
) -> Result<OperatorEval> {
    check_tau(tau)?;
    if u.dim() != params.n {
        return Err(Error::InvalidInput(format!(
            "tensor dimension {} does not match n={}",
            u.dim(),
            params.n
        )));
    }
    let dec = spectral::eigen(u)?;
    let lambda = dec.eigenvalues().as_slice();
    if let Some((order, value)) = symfn::cone_violation(params.k - 1, lambda, tau) {
        return Err(Error::ConeViolation {
            order,
            value,
            threshold: tau,
        });
    }

    let (n, k) = (params.n, params.k);
    let sig = symfn::sigma_all(k, lambda)?;
    let denom = sig[k - 1];
    let denom2 = denom * denom;
    let quotients: Vec<f64> = sig.iter().map(|s| s / denom).collect();
    let mut value = quotients[k];
    for (l, &a) in params.alphas.iter().enumerate() {
        value -= a * quotients[l];
    }

    let mut gradient = SymTensor::zero(n)?;
    let mut min_ellipticity = f64::INFINITY;
    let mut trace = 0.0;
    for m in 0..n {
        let r = symfn::sigma_restricted_all(k - 1, lambda, m)?;
        let mut f_m = (r[k - 1] * denom - sig[k] * r[k - 2]) / denom2;
        for (l, &a) in params.alphas.iter().enumerate() {
            let upper = if l == 0 { 0.0 } else { r[l - 1] * denom };
            f_m -= a * (upper - sig[l] * r[k - 2]) / denom2;
        }
        if !f_m.is_finite() {
            return Err(Error::NonFinite {
                context: format!("derivative weight f_{m}"),
            });
        }
        gradient.add_rank_one(&dec.eigenvector(m), f_m);
        min_ellipticity = min_ellipticity.min(f_m);
        trace += f_m;
    }

    Ok(OperatorEval {
        value,
        gradient,
        quotients,
        sigma_km1: denom,
        min_ellipticity,
        trace,
    })
}

/// Full evaluation with strict admissibility (`tau = 0`).
pub fn eval_g(u: &SymTensor, params: &OperatorParams) -> Result<OperatorEval> {
    eval_g_with_margin(u, params, 0.0)
}

/// Concavity probe: `G(t U + (1-t) V) - [t G(U) + (1-t) G(V)]`, which is
/// nonnegative for admissible `U`, `V` and `t` in `[0, 1]`.
pub fn concavity_gap(
    u: &SymTensor,
    v: &SymTensor,
    t: f64,
    params: &OperatorParams,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!(
            "interpolation parameter t={t} must lie in [0, 1]"
        )));
    }
    let mut blend = u.clone();
    blend.scale(t);
    blend.add_scaled(v, 1.0 - t);
    let gu = eval_g(u, params)?.value;
    let gv = eval_g(v, params)?.value;
    let gb = eval_g(&blend, params)?.value;
    Ok(gb - (t * gu + (1.0 - t) * gv))
}

/// Evaluates `G` along a path of eigenvalue vectors. Any point outside
/// `Gamma_{k-1}` aborts with the cone violation for that point, which makes
/// the probe a convenient way to watch the operator degenerate as a path
/// approaches the cone boundary.
pub fn degeneracy_probe(
    params: &OperatorParams,
    path: &[EigenvalueVector],
) -> Result<Vec<f64>> {
    path.iter()
        .map(|lam| eval_g_lambda(lam.as_slice(), params, 0.0))
        .collect()
}
