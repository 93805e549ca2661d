//! Curvature-style augmentation terms `chi(x, z, p)` and their validation.
//!
//! The operator acts on the augmented Hessian `U = D^2 u + chi(x, u, Du)`.
//! A [`ChiSpec`] bundles the tensor callback with its partial derivatives in
//! `z` and `p` (needed by the linearization) and, optionally, growth
//! parameters used by the structural validator.
//!
//! [`validate`] samples the structural conditions the solver theory leans on:
//! concavity of `p -> chi^{xi xi}`, monotonicity in `z` (the `z`-derivative
//! must be positive semidefinite as a quadratic form), growth bounds when
//! parameters are supplied, and finite-difference consistency of the supplied
//! derivative callbacks. Sampling is seeded, so reports are reproducible.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::SymTensor;

/// Tensor-valued augmentation term with analytic partials.
pub trait ChiTensor: Send + Sync {
    /// Spatial dimension `n` (tensors are `n x n`, points and momenta length `n`).
    fn dim(&self) -> usize;

    /// `chi(x, z, p)`.
    fn value(&self, x: &[f64], z: f64, p: &[f64]) -> SymTensor;

    /// `d chi / d z`.
    fn dz(&self, x: &[f64], z: f64, p: &[f64]) -> SymTensor;

    /// `d chi / d p_s` for `s = 0..n`.
    fn dp(&self, x: &[f64], z: f64, p: &[f64]) -> Vec<SymTensor>;

    /// Fast-path hint: true only if the term is exactly zero everywhere.
    fn is_identically_zero(&self) -> bool {
        false
    }
}

/// Growth parameters for the gradient-estimate conditions: positive scales
/// `psi1`, `psi2` and exponents `gamma1`, `gamma2` in the open interval (0, 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthBounds {
    pub psi1: f64,
    pub psi2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl GrowthBounds {
    pub fn new(psi1: f64, psi2: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(psi1 > 0.0 && psi1.is_finite() && psi2 > 0.0 && psi2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "growth scales must be positive finite, got psi1={psi1}, psi2={psi2}"
            )));
        }
        for (name, g) in [("gamma1", gamma1), ("gamma2", gamma2)] {
            if !(g > 0.0 && g < 2.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in (0, 2), got {g}"
                )));
            }
        }
        Ok(Self {
            psi1,
            psi2,
            gamma1,
            gamma2,
        })
    }
}

/// Shareable, named augmentation term.
#[derive(Clone)]
pub struct ChiSpec {
    name: String,
    inner: Arc<dyn ChiTensor>,
    growth: Option<GrowthBounds>,
}

impl std::fmt::Debug for ChiSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChiSpec")
            .field("name", &self.name)
            .field("dim", &self.inner.dim())
            .field("growth", &self.growth)
            .finish()
    }
}

impl ChiSpec {
    pub fn new(name: impl Into<String>, inner: Arc<dyn ChiTensor>) -> Self {
        Self {
            name: name.into(),
            inner,
            growth: None,
        }
    }

    /// The zero term: `U` reduces to the plain Hessian.
    pub fn zero(n: usize) -> Self {
        Self::new("zero", Arc::new(ZeroChi { n }))
    }

    /// A constant tensor field.
    pub fn constant(t: SymTensor) -> Self {
        Self::new("constant", Arc::new(ConstantChi { t }))
    }

    /// `chi = coef * z * I`; monotone in `z` when `coef >= 0`.
    pub fn linear_z(n: usize, coef: f64) -> Self {
        Self::new("linear-z", Arc::new(LinearZ { n, coef }))
    }

    /// `chi = -|p|^2 * I`; concave in `p` but with quadratic growth, so it
    /// violates any sub-quadratic off-diagonal growth claim at large `|p|`.
    pub fn neg_p_squared(n: usize) -> Self {
        Self::new("neg-p-squared", Arc::new(NegPSquared { n }))
    }

    /// Arbitrary term from closures (value and partial derivatives).
    pub fn from_closures(
        name: impl Into<String>,
        n: usize,
        value: impl Fn(&[f64], f64, &[f64]) -> SymTensor + Send + Sync + 'static,
        dz: impl Fn(&[f64], f64, &[f64]) -> SymTensor + Send + Sync + 'static,
        dp: impl Fn(&[f64], f64, &[f64]) -> Vec<SymTensor> + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            name,
            Arc::new(ClosureChi {
                n,
                value: Box::new(value),
                dz: Box::new(dz),
                dp: Box::new(dp),
            }),
        )
    }

    /// Attaches growth parameters for validation.
    pub fn with_growth(mut self, growth: GrowthBounds) -> Self {
        self.growth = Some(growth);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn growth(&self) -> Option<&GrowthBounds> {
        self.growth.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.inner.is_identically_zero()
    }

    fn check_dim(&self, t: &SymTensor, x: &[f64], z: f64, what: &str) -> Result<()> {
        if t.dim() != self.dim() {
            return Err(Error::ChiCallback {
                x: x.to_vec(),
                z,
                detail: format!(
                    "{what} returned a {}x{} tensor, expected {}x{}",
                    t.dim(),
                    t.dim(),
                    self.dim(),
                    self.dim()
                ),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64], z: f64, p: &[f64]) -> Result<SymTensor> {
        let t = self.inner.value(x, z, p);
        self.check_dim(&t, x, z, "value")?;
        Ok(t)
    }

    pub fn dz(&self, x: &[f64], z: f64, p: &[f64]) -> Result<SymTensor> {
        let t = self.inner.dz(x, z, p);
        self.check_dim(&t, x, z, "dz")?;
        Ok(t)
    }

    pub fn dp(&self, x: &[f64], z: f64, p: &[f64]) -> Result<Vec<SymTensor>> {
        let ts = self.inner.dp(x, z, p);
        if ts.len() != self.dim() {
            return Err(Error::ChiCallback {
                x: x.to_vec(),
                z,
                detail: format!("dp returned {} tensors, expected {}", ts.len(), self.dim()),
            });
        }
        for t in &ts {
            self.check_dim(t, x, z, "dp")?;
        }
        Ok(ts)
    }
}

struct ZeroChi {
    n: usize,
}

impl ChiTensor for ZeroChi {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, _: &[f64], _: f64, _: &[f64]) -> SymTensor {
        SymTensor::zero(self.n).expect("dimension validated")
    }

    fn dz(&self, _: &[f64], _: f64, _: &[f64]) -> SymTensor {
        SymTensor::zero(self.n).expect("dimension validated")
    }

    fn dp(&self, _: &[f64], _: f64, _: &[f64]) -> Vec<SymTensor> {
        vec![SymTensor::zero(self.n).expect("dimension validated"); self.n]
    }

    fn is_identically_zero(&self) -> bool {
        true
    }
}

struct ConstantChi {
    t: SymTensor,
}

impl ChiTensor for ConstantChi {
    fn dim(&self) -> usize {
        self.t.dim()
    }

    fn value(&self, _: &[f64], _: f64, _: &[f64]) -> SymTensor {
        self.t.clone()
    }

    fn dz(&self, _: &[f64], _: f64, _: &[f64]) -> SymTensor {
        SymTensor::zero(self.t.dim()).expect("dimension validated")
    }

    fn dp(&self, _: &[f64], _: f64, _: &[f64]) -> Vec<SymTensor> {
        vec![SymTensor::zero(self.t.dim()).expect("dimension validated"); self.t.dim()]
    }
}

struct LinearZ {
    n: usize,
    coef: f64,
}

impl ChiTensor for LinearZ {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, _: &[f64], z: f64, _: &[f64]) -> SymTensor {
        let mut t = SymTensor::identity(self.n).expect("dimension validated");
        t.scale(self.coef * z);
        t
    }

    fn dz(&self, _: &[f64], _: f64, _: &[f64]) -> SymTensor {
        let mut t = SymTensor::identity(self.n).expect("dimension validated");
        t.scale(self.coef);
        t
    }

    fn dp(&self, _: &[f64], _: f64, _: &[f64]) -> Vec<SymTensor> {
        vec![SymTensor::zero(self.n).expect("dimension validated"); self.n]
    }
}

struct NegPSquared {
    n: usize,
}

impl ChiTensor for NegPSquared {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, _: &[f64], _: f64, p: &[f64]) -> SymTensor {
        let p2: f64 = p.iter().map(|v| v * v).sum();
        let mut t = SymTensor::identity(self.n).expect("dimension validated");
        t.scale(-p2);
        t
    }

    fn dz(&self, _: &[f64], _: f64, _: &[f64]) -> SymTensor {
        SymTensor::zero(self.n).expect("dimension validated")
    }

    fn dp(&self, _: &[f64], _: f64, p: &[f64]) -> Vec<SymTensor> {
        (0..self.n)
            .map(|s| {
                let mut t = SymTensor::identity(self.n).expect("dimension validated");
                t.scale(-2.0 * p[s]);
                t
            })
            .collect()
    }
}

struct ClosureChi {
    n: usize,
    value: Box<dyn Fn(&[f64], f64, &[f64]) -> SymTensor + Send + Sync>,
    dz: Box<dyn Fn(&[f64], f64, &[f64]) -> SymTensor + Send + Sync>,
    dp: Box<dyn Fn(&[f64], f64, &[f64]) -> Vec<SymTensor> + Send + Sync>,
}

impl ChiTensor for ClosureChi {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64], z: f64, p: &[f64]) -> SymTensor {
        (self.value)(x, z, p)
    }

    fn dz(&self, x: &[f64], z: f64, p: &[f64]) -> SymTensor {
        (self.dz)(x, z, p)
    }

    fn dp(&self, x: &[f64], z: f64, p: &[f64]) -> Vec<SymTensor> {
        (self.dp)(x, z, p)
    }
}

/// Deterministic sampling plan for [`validate`].
#[derive(Debug, Clone)]
pub struct SamplePlan {
    pub seed: u64,
    pub samples: usize,
    /// Momentum magnitudes cycled through the samples; mixing small and
    /// large radii is what makes super-quadratic growth visible.
    pub p_radii: Vec<f64>,
    pub z_range: (f64, f64),
    pub x_range: (f64, f64),
    /// Random unit directions tested per sample on top of the coordinate axes.
    pub random_dirs: usize,
    /// Step for the finite-difference checks (x-gradient, dz/dp consistency).
    pub fd_step: f64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            seed: 7,
            samples: 256,
            p_radii: vec![0.1, 1.0, 10.0],
            z_range: (-2.0, 2.0),
            x_range: (-1.0, 1.0),
            random_dirs: 8,
            fd_step: 1e-5,
        }
    }
}

/// Worst offender recorded for one structural check.
#[derive(Debug, Clone, Serialize)]
pub struct ChiWorstSample {
    pub sample: usize,
    pub margin: f64,
    pub x: Vec<f64>,
    pub z: f64,
    pub p: Vec<f64>,
}

/// Outcome of one structural check over all samples. `margin >= 0` means the
/// condition held (with tolerance already folded in at the pass/fail level).
#[derive(Debug, Clone, Serialize)]
pub struct ChiCheckSummary {
    pub name: String,
    pub samples: usize,
    pub failures: usize,
    pub worst_margin: f64,
    pub worst: Option<ChiWorstSample>,
    pub pass: bool,
}

/// Full validation report; serializes deterministically.
#[derive(Debug, Clone, Serialize)]
pub struct ChiValidationReport {
    pub chi: String,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<ChiCheckSummary>,
    pub all_pass: bool,
}

impl ChiValidationReport {
    pub fn check(&self, name: &str) -> Option<&ChiCheckSummary> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.iter().map(|a| a / norm).collect();
        }
    }
}

fn quad_form(t: &SymTensor, xi: &[f64]) -> f64 {
    let n = t.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += xi[i] * t.get(i, j) * xi[j];
        }
    }
    acc
}

fn bilinear_form(t: &SymTensor, xi: &[f64], eta: &[f64]) -> f64 {
    let n = t.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += xi[i] * t.get(i, j) * eta[j];
        }
    }
    acc
}

struct CheckAccumulator {
    name: &'static str,
    tol: f64,
    samples: usize,
    failures: usize,
    worst_margin: f64,
    worst: Option<ChiWorstSample>,
}

impl CheckAccumulator {
    fn new(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            tol,
            samples: 0,
            failures: 0,
            worst_margin: f64::INFINITY,
            worst: None,
        }
    }

    fn record(&mut self, sample: usize, margin: f64, x: &[f64], z: f64, p: &[f64]) {
        self.samples += 1;
        if margin < -self.tol {
            self.failures += 1;
        }
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.worst = Some(ChiWorstSample {
                sample,
                margin,
                x: x.to_vec(),
                z,
                p: p.to_vec(),
            });
        }
    }

    fn finish(self) -> ChiCheckSummary {
        let pass = self.failures == 0;
        ChiCheckSummary {
            name: self.name.to_string(),
            samples: self.samples,
            failures: self.failures,
            worst_margin: if self.samples == 0 {
                0.0
            } else {
                self.worst_margin
            },
            worst: self.worst,
            pass,
        }
    }
}

const STRUCT_TOL: f64 = 1e-10;
const GROWTH_TOL: f64 = 1e-8;
const CONSISTENCY_TOL: f64 = 1e-6;

/// Samples the structural conditions on `chi` and reports margins.
///
/// Checks always run: midpoint concavity of `p -> chi^{xi xi}`, positive
/// semidefiniteness of the `z`-derivative, and finite-difference consistency
/// of the `dz`/`dp` callbacks. When [`GrowthBounds`] are attached, the two
/// growth inequalities are checked as well (the radial bound on
/// `p . grad_x chi^{xi xi}` and the off-diagonal bound on `|chi^{xi eta}|^2`).
pub fn validate(chi: &ChiSpec, plan: &SamplePlan) -> Result<ChiValidationReport> {
    let n = chi.dim();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "chi dimension must be >= 2, got {n}"
        )));
    }
    if plan.p_radii.is_empty() {
        return Err(Error::InvalidInput(
            "sample plan needs at least one momentum radius".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut concavity = CheckAccumulator::new("p-concavity", STRUCT_TOL);
    let mut monotone = CheckAccumulator::new("z-monotonicity", STRUCT_TOL);
    let mut dz_consist = CheckAccumulator::new("dz-consistency", CONSISTENCY_TOL);
    let mut dp_consist = CheckAccumulator::new("dp-consistency", CONSISTENCY_TOL);
    let mut growth_radial = chi
        .growth()
        .map(|_| CheckAccumulator::new("growth-radial", GROWTH_TOL));
    let mut growth_offdiag = chi
        .growth()
        .map(|_| CheckAccumulator::new("growth-offdiag", GROWTH_TOL));

    let h = plan.fd_step;
    for sample in 0..plan.samples {
        let x: Vec<f64> = (0..n)
            .map(|_| rng.random_range(plan.x_range.0..=plan.x_range.1))
            .collect();
        let z = rng.random_range(plan.z_range.0..=plan.z_range.1);
        let r1 = plan.p_radii[sample % plan.p_radii.len()];
        let r2 = plan.p_radii[(sample + 1) % plan.p_radii.len()];
        let d1 = unit_vector(&mut rng, n);
        let d2 = unit_vector(&mut rng, n);
        let p1: Vec<f64> = d1.iter().map(|v| v * r1).collect();
        let p2: Vec<f64> = d2.iter().map(|v| v * r2).collect();
        let mid: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| 0.5 * (a + b)).collect();

        let mut dirs: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        for _ in 0..plan.random_dirs {
            dirs.push(unit_vector(&mut rng, n));
        }

        let chi_p1 = chi.value(&x, z, &p1)?;
        let chi_p2 = chi.value(&x, z, &p2)?;
        let chi_mid = chi.value(&x, z, &mid)?;
        let dz_t = chi.dz(&x, z, &p1)?;
        let dp_t = chi.dp(&x, z, &p1)?;

        // (a) midpoint concavity along p for every probe direction
        let conc_margin = dirs
            .iter()
            .map(|xi| {
                quad_form(&chi_mid, xi) - 0.5 * (quad_form(&chi_p1, xi) + quad_form(&chi_p2, xi))
            })
            .fold(f64::INFINITY, f64::min);
        concavity.record(sample, conc_margin, &x, z, &p1);

        // (b) z-derivative as a quadratic form
        let mono_margin = dirs
            .iter()
            .map(|xi| quad_form(&dz_t, xi))
            .fold(f64::INFINITY, f64::min);
        monotone.record(sample, mono_margin, &x, z, &p1);

        // (c) callback consistency against central differences
        let chi_zp = chi.value(&x, z + h, &p1)?;
        let chi_zm = chi.value(&x, z - h, &p1)?;
        let scale = 1.0 + chi_p1.max_abs() + dz_t.max_abs();
        let mut worst_dz = f64::INFINITY;
        for i in 0..n {
            for j in i..n {
                let fd = (chi_zp.get(i, j) - chi_zm.get(i, j)) / (2.0 * h);
                worst_dz = worst_dz.min(-((fd - dz_t.get(i, j)).abs() / scale));
            }
        }
        dz_consist.record(sample, worst_dz, &x, z, &p1);

        let mut worst_dp = f64::INFINITY;
        for s in 0..n {
            let mut pp = p1.clone();
            let mut pm = p1.clone();
            pp[s] += h;
            pm[s] -= h;
            let cp = chi.value(&x, z, &pp)?;
            let cm = chi.value(&x, z, &pm)?;
            let scale = 1.0 + cp.max_abs() + dp_t[s].max_abs();
            for i in 0..n {
                for j in i..n {
                    let fd = (cp.get(i, j) - cm.get(i, j)) / (2.0 * h);
                    worst_dp = worst_dp.min(-((fd - dp_t[s].get(i, j)).abs() / scale));
                }
            }
        }
        dp_consist.record(sample, worst_dp, &x, z, &p1);

        // (d) growth inequalities when parameters were supplied
        if let Some(g) = chi.growth() {
            let pnorm = p1.iter().map(|v| v * v).sum::<f64>().sqrt();
            let bound1 = g.psi1 * (1.0 + pnorm.powf(g.gamma1));
            let bound2 = g.psi2 * (1.0 + pnorm.powf(g.gamma2));

            // central FD gradient of chi^{xi xi} in x, dotted with p
            let mut grads: Vec<SymTensor> = Vec::with_capacity(n);
            for a in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[a] += h;
                xm[a] -= h;
                let cp = chi.value(&xp, z, &p1)?;
                let cm = chi.value(&xm, z, &p1)?;
                let mut d = &cp - &cm;
                d.scale(1.0 / (2.0 * h));
                grads.push(d);
            }
            let radial_margin = dirs
                .iter()
                .map(|xi| {
                    let directional: f64 = (0..n)
                        .map(|a| p1[a] * quad_form(&grads[a], xi))
                        .sum();
                    bound1 - directional
                })
                .fold(f64::INFINITY, f64::min);
            growth_radial
                .as_mut()
                .expect("present when growth set")
                .record(sample, radial_margin, &x, z, &p1);

            // off-diagonal bound over direction pairs, including xi = eta
            let mut offdiag_margin = f64::INFINITY;
            for xi in &dirs {
                let b = bilinear_form(&chi_p1, xi, xi);
                offdiag_margin = offdiag_margin.min(bound2 - b * b);
            }
            for w in dirs.windows(2) {
                let b = bilinear_form(&chi_p1, &w[0], &w[1]);
                offdiag_margin = offdiag_margin.min(bound2 - b * b);
            }
            growth_offdiag
                .as_mut()
                .expect("present when growth set")
                .record(sample, offdiag_margin, &x, z, &p1);
        }
    }

    let mut checks = vec![
        concavity.finish(),
        monotone.finish(),
        dz_consist.finish(),
        dp_consist.finish(),
    ];
    if let Some(acc) = growth_radial {
        checks.push(acc.finish());
    }
    if let Some(acc) = growth_offdiag {
        checks.push(acc.finish());
    }
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(ChiValidationReport {
        chi: chi.name().to_string(),
        seed: plan.seed,
        samples: plan.samples,
        checks,
        all_pass,
    })
}
