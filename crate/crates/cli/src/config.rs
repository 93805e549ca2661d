//! JSON run configuration: parsing, validation, and assembly into a
//! [`ProblemSpec`].
//!
//! A config either names a built-in problem (optionally overriding `k`,
//! `alphas`, `resolution`, and solver knobs) or describes a custom problem
//! in full. Unknown keys are hard errors so typos cannot silently fall back
//! to defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use mixed_hessian::chi::{ChiSpec, GrowthBounds};
use mixed_hessian::grid::GridBox;
use mixed_hessian::problems;
use mixed_hessian::solver::{ProblemSpec, ScalarField, SolverOpts};
use mixed_hessian::spectral::SymTensor;
use mixed_hessian::{Error, Result};

/// Top-level run configuration. Every key is optional; validation happens
/// when the config is turned into a problem or a property run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in problem name. Absent for fully custom problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<FieldSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<ChiConfig>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub domain: Option<BoxConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsolution: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// A scalar coefficient field: a constant or a closed-form expression in
/// `x1..xn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Const(f64),
    Expr(String),
}

impl FieldSpec {
    pub fn to_field(&self) -> Result<ScalarField> {
        match self {
            FieldSpec::Const(c) => Ok(ScalarField::Const(*c)),
            FieldSpec::Expr(src) => ScalarField::expr(src),
        }
    }

    fn as_const(&self) -> Result<f64> {
        match self {
            FieldSpec::Const(c) => Ok(*c),
            FieldSpec::Expr(src) => Err(Error::InvalidInput(format!(
                "built-in problems take constant alphas, got expression {src:?}"
            ))),
        }
    }
}

/// Box domain: per-axis bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Augmentation term selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiConfig {
    /// One of `zero`, `constant`, `linear-z`, `neg-p-squared`.
    pub kind: String,
    /// Coefficient for `linear-z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Symmetric matrix rows for `constant`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<Vec<Vec<f64>>>,
    /// Optional growth-condition parameters checked by `check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    pub psi1: f64,
    pub psi2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Solver overrides; anything absent keeps its default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_newton: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_newton_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_halvings: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub armijo_beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_coeff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub krylov_restart: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub krylov_max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub krylov_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub krylov_fail_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense_threshold: Option<usize>,
}

impl SolverConfig {
    pub fn apply(&self, opts: &mut SolverOpts) {
        if let Some(v) = self.tol_newton {
            opts.tol_newton = v;
        }
        if let Some(v) = self.max_newton_iters {
            opts.max_newton_iters = v;
        }
        if let Some(v) = self.max_halvings {
            opts.max_halvings = v;
        }
        if let Some(v) = self.armijo_beta {
            opts.armijo_beta = v;
        }
        if let Some(v) = self.dt {
            opts.dt = v;
        }
        if let Some(v) = self.dt_min {
            opts.dt_min = v;
        }
        if let Some(v) = self.tau_coeff {
            opts.tau_coeff = v;
        }
        if let Some(v) = self.krylov_restart {
            opts.krylov.restart = v;
        }
        if let Some(v) = self.krylov_max_iters {
            opts.krylov.max_iters = v;
        }
        if let Some(v) = self.krylov_tol {
            opts.krylov.tol = v;
        }
        if let Some(v) = self.krylov_fail_threshold {
            opts.krylov.fail_threshold = v;
        }
        if let Some(v) = self.dense_threshold {
            opts.dense_threshold = v;
        }
    }
}

/// Parses a config from JSON text. Unknown keys and malformed values are
/// reported with the line/column context serde_json provides.
pub fn parse_config(source: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(source)
        .map_err(|e| Error::InvalidInput(format!("config parse error: {e}")))?;
    validate(&cfg)?;
    Ok(cfg)
}

/// Structural validation that does not need a grid: primarily the order
/// bound `k <= n` for configs that state both.
pub fn validate(cfg: &RunConfig) -> Result<()> {
    if let (Some(n), Some(k)) = (cfg.n, cfg.k) {
        if k > n {
            return Err(Error::InvalidInput(format!(
                "k <= n required (got k={k}, n={n})"
            )));
        }
    }
    if let Some(b) = &cfg.domain {
        if b.lower.len() != b.upper.len() {
            return Err(Error::InvalidInput(format!(
                "box lower has {} entries, upper has {}",
                b.lower.len(),
                b.upper.len()
            )));
        }
        if let Some(n) = cfg.n {
            if b.lower.len() != n {
                return Err(Error::InvalidInput(format!(
                    "box dimension {} does not match n={n}",
                    b.lower.len()
                )));
            }
        }
    }
    Ok(())
}

pub fn build_chi(cfg: &ChiConfig, n: usize) -> Result<ChiSpec> {
    let mut chi = match cfg.kind.as_str() {
        "zero" => ChiSpec::zero(n),
        "constant" => {
            let rows = cfg.tensor.clone().ok_or_else(|| {
                Error::InvalidInput("chi kind \"constant\" requires a \"tensor\"".into())
            })?;
            ChiSpec::constant(SymTensor::from_rows(&rows)?)
        }
        "linear-z" => ChiSpec::linear_z(n, cfg.scale.unwrap_or(1.0)),
        "neg-p-squared" => ChiSpec::neg_p_squared(n),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown chi kind {other:?}; available: zero, constant, linear-z, neg-p-squared"
            )))
        }
    };
    if cfg.scale.is_some() && cfg.kind != "linear-z" {
        return Err(Error::InvalidInput(format!(
            "\"scale\" only applies to chi kind \"linear-z\", not {:?}",
            cfg.kind
        )));
    }
    if cfg.tensor.is_some() && cfg.kind != "constant" {
        return Err(Error::InvalidInput(format!(
            "\"tensor\" only applies to chi kind \"constant\", not {:?}",
            cfg.kind
        )));
    }
    if let Some(g) = &cfg.growth {
        chi = chi.with_growth(GrowthBounds::new(g.psi1, g.psi2, g.gamma1, g.gamma2)?);
    }
    Ok(chi)
}

/// Turns a validated config into a solvable problem.
pub fn build_problem(cfg: &RunConfig) -> Result<ProblemSpec> {
    validate(cfg)?;
    let mut spec = match &cfg.problem {
        Some(name) => {
            // built-ins own their fields; only parameters may be overridden
            let fixed: &[(&str, bool)] = &[
                ("n", cfg.n.is_some()),
                ("rhs", cfg.rhs.is_some()),
                ("phi", cfg.phi.is_some()),
                ("chi", cfg.chi.is_some()),
                ("box", cfg.domain.is_some()),
                ("subsolution", cfg.subsolution.is_some()),
            ];
            if let Some((key, _)) = fixed.iter().find(|(_, set)| *set) {
                return Err(Error::InvalidInput(format!(
                    "key {key:?} cannot be combined with a built-in problem; \
                     built-ins accept only k, alphas, resolution, and solver overrides"
                )));
            }
            let alphas = cfg
                .alphas
                .as_ref()
                .map(|v| v.iter().map(FieldSpec::as_const).collect::<Result<Vec<_>>>())
                .transpose()?;
            problems::by_name(name, cfg.resolution, cfg.k, alphas)?
        }
        None => build_custom(cfg)?,
    };
    if let Some(sc) = &cfg.solver {
        sc.apply(&mut spec.opts);
    }
    Ok(spec)
}

fn build_custom(cfg: &RunConfig) -> Result<ProblemSpec> {
    let n = match (cfg.n, &cfg.domain) {
        (Some(n), _) => n,
        (None, Some(b)) => b.lower.len(),
        (None, None) => {
            return Err(Error::InvalidInput(
                "custom problems need \"n\" or a \"box\"".into(),
            ))
        }
    };
    let k = cfg
        .k
        .ok_or_else(|| Error::InvalidInput("custom problems need \"k\"".into()))?;
    if k > n {
        return Err(Error::InvalidInput(format!(
            "k <= n required (got k={k}, n={n})"
        )));
    }
    let resolution = cfg.resolution.unwrap_or(problems::DEFAULT_RESOLUTION);
    let grid = match &cfg.domain {
        Some(b) => GridBox::new(
            b.lower.clone(),
            b.upper.clone(),
            vec![resolution; b.lower.len()],
        )?,
        None => GridBox::cube(n, -1.0, 1.0, resolution)?,
    };
    let require = |field: &Option<FieldSpec>, key: &str| -> Result<ScalarField> {
        field
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("custom problems need {key:?}")))?
            .to_field()
    };
    let alphas = cfg
        .alphas
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("custom problems need \"alphas\"".into()))?
        .iter()
        .map(FieldSpec::to_field)
        .collect::<Result<Vec<_>>>()?;
    let chi = match &cfg.chi {
        Some(c) => build_chi(c, n)?,
        None => ChiSpec::zero(n),
    };
    Ok(ProblemSpec::new(
        "custom",
        grid,
        k,
        alphas,
        require(&cfg.rhs, "rhs")?,
        require(&cfg.phi, "phi")?,
        chi,
        require(&cfg.subsolution, "subsolution")?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_builtin_config() {
        let cfg = parse_config(r#"{"problem":"quadratic-mms"}"#).unwrap();
        assert_eq!(cfg.problem.as_deref(), Some("quadratic-mms"));
        let spec = build_problem(&cfg).unwrap();
        assert_eq!(spec.grid.counts(), &[17, 17, 17]);
        assert_eq!(spec.k, 3);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let err = parse_config(r#"{"problem":"quadratic-mms","typo":1}"#).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("typo"), "{text}");
        assert!(text.contains("line 1"), "{text}");
        assert!(err.is_spec_error(), "unknown keys must be config errors");
    }

    #[test]
    fn order_bound_is_enforced() {
        let err = parse_config(r#"{"n":3,"k":5,"alphas":[0,0,0,0]}"#).unwrap_err();
        assert!(err.to_string().contains("k <= n required"), "{err}");
    }

    #[test]
    fn full_config_round_trips() {
        let cfg = RunConfig {
            problem: None,
            n: Some(3),
            k: Some(3),
            alphas: Some(vec![FieldSpec::Const(0.3), FieldSpec::Expr("0.1*x1^2".into())]),
            rhs: Some(FieldSpec::Const(0.13)),
            phi: Some(FieldSpec::Expr("(x1^2+x2^2+x3^2)/2".into())),
            chi: Some(ChiConfig {
                kind: "linear-z".into(),
                scale: Some(0.5),
                tensor: None,
                growth: Some(GrowthConfig {
                    psi1: 1.0,
                    psi2: 12.0,
                    gamma1: 1.0,
                    gamma2: 1.0,
                }),
            }),
            domain: Some(BoxConfig {
                lower: vec![-1.0, -1.0, -1.0],
                upper: vec![1.0, 1.0, 1.0],
            }),
            resolution: Some(9),
            subsolution: Some(FieldSpec::Expr("(x1^2+x2^2+x3^2)/2".into())),
            solver: Some(SolverConfig {
                tol_newton: Some(1e-9),
                dt: Some(0.05),
                ..SolverConfig::default()
            }),
            seed: Some(7),
            samples: Some(128),
            suites: Some(vec!["newton-maclaurin".into()]),
            out: Some(PathBuf::from("/tmp/out")),
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn builtin_rejects_field_overrides() {
        let cfg = parse_config(r#"{"problem":"quadratic-mms","rhs":0.5}"#).unwrap();
        let err = build_problem(&cfg).unwrap_err();
        assert!(err.to_string().contains("rhs"), "{err}");
    }

    #[test]
    fn builtin_accepts_parameter_overrides() {
        let cfg =
            parse_config(r#"{"problem":"quadratic-mms","k":2,"alphas":[0.2],"resolution":5}"#)
                .unwrap();
        let spec = build_problem(&cfg).unwrap();
        assert_eq!(spec.k, 2);
        assert_eq!(spec.grid.counts(), &[5, 5, 5]);
    }

    #[test]
    fn custom_problem_builds() {
        let cfg = parse_config(
            r#"{
                "n": 3, "k": 3,
                "alphas": [0.3, 0.1],
                "rhs": 0.13333333333333333,
                "phi": "(x1^2+x2^2+x3^2)/2",
                "subsolution": "(x1^2+x2^2+x3^2)/2",
                "resolution": 5
            }"#,
        )
        .unwrap();
        let spec = build_problem(&cfg).unwrap();
        assert_eq!(spec.name, "custom");
        assert!(spec.chi.is_zero());
    }

    #[test]
    fn chi_configs_are_validated() {
        assert!(build_chi(
            &ChiConfig {
                kind: "constant".into(),
                scale: None,
                tensor: None,
                growth: None
            },
            3
        )
        .is_err());
        assert!(build_chi(
            &ChiConfig {
                kind: "zero".into(),
                scale: Some(1.0),
                tensor: None,
                growth: None
            },
            3
        )
        .is_err());
        assert!(build_chi(
            &ChiConfig {
                kind: "nope".into(),
                scale: None,
                tensor: None,
                growth: None
            },
            3
        )
        .is_err());
        let ok = build_chi(
            &ChiConfig {
                kind: "linear-z".into(),
                scale: Some(0.5),
                tensor: None,
                growth: None,
            },
            3,
        )
        .unwrap();
        assert_eq!(ok.name(), "linear-z");
    }
}
