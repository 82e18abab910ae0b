//! Scenario files and the built-in scenarios.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "moc-r3"
//!
//! [plant]
//! kind = "mass-on-car"
//! m1 = 4.0
//! m2 = 1.0
//! k_spring = 2.0
//! d_damp = 1.0
//!
//! [controller]
//! alpha = 1.5
//! beta = 0.15
//! psi0 = 3.1
//! gains = [2.5, 2.5]
//!
//! [saturation]
//! kind = "componentwise"
//! level = 8.0
//!
//! [reference]
//! kind = "cosine"
//! amplitude = 0.5
//! omega = 1.0
//!
//! [integrator]
//! t_span = [0.0, 20.0]
//! ```
//!
//! Unknown keys are rejected. Missing optional keys take the defaults shown
//! by `funnel builtin <name>`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::FunnelController;
use crate::ode::IntegratorConfig;
use crate::plant::{CausalOperator, Disturbance, FunctionalPlant, Kernel, MassOnCar, Plant};
use crate::saturation::SaturationSpec;
use crate::sim::{self, Reference, RunOptions, RunOutput, SimError};
use crate::{ControllerParams, Surjection};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub plant: PlantSpec,
    pub controller: ControllerSpec,
    pub saturation: SaturationSpec,
    pub reference: Reference,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSpec {
    MassOnCar {
        m1: f64,
        m2: f64,
        k_spring: f64,
        d_damp: f64,
        #[serde(default)]
        theta: f64,
        /// `(z, s, ż, ṡ)`.
        #[serde(default)]
        initial: [f64; 4],
    },
    /// `y^{(r)} = u`.
    IntegratorChain {
        order: usize,
        #[serde(default = "one")]
        outputs: usize,
        /// `(y, …, y^{(r-1)})`; zeros when omitted.
        #[serde(default)]
        initial: Vec<f64>,
    },
    /// `y^{(r)} = d(t) + Σ c_j T(…)_j + b u` for a scalar output.
    Functional {
        order: usize,
        operator: OperatorSpec,
        feedback: Vec<f64>,
        input_gain: f64,
        #[serde(default)]
        initial: Vec<f64>,
        #[serde(default)]
        disturbance: Disturbance,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    DiscreteDelay { h: f64 },
    DistributedDelay { h: f64, kernel: Kernel },
}

impl OperatorSpec {
    fn build(&self) -> CausalOperator {
        match self {
            OperatorSpec::Identity => CausalOperator::identity(),
            OperatorSpec::DiscreteDelay { h } => CausalOperator::DiscreteDelay { h: *h },
            OperatorSpec::DistributedDelay { h, kernel } => CausalOperator::DistributedDelay {
                h: *h,
                kernel: *kernel,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub alpha: f64,
    pub beta: f64,
    pub psi0: f64,
    pub gains: Vec<f64>,
    #[serde(default = "default_surjection")]
    pub surjection: String,
}

fn default_surjection() -> String {
    "s_sin_s".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub t_span: [f64; 2],
    #[serde(default = "defaults::rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "defaults::abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "defaults::h_init")]
    pub h_init: f64,
    #[serde(default = "defaults::h_min")]
    pub h_min: f64,
    #[serde(default = "defaults::h_max")]
    pub h_max: f64,
    #[serde(default = "defaults::safety")]
    pub safety: f64,
    #[serde(default = "defaults::max_retries")]
    pub max_retries: usize,
    #[serde(default = "defaults::max_steps")]
    pub max_steps: usize,
}

mod defaults {
    use crate::ode::IntegratorConfig;

    fn d() -> IntegratorConfig {
        IntegratorConfig::default()
    }
    pub fn rel_tol() -> f64 {
        d().rel_tol
    }
    pub fn abs_tol() -> f64 {
        d().abs_tol
    }
    pub fn h_init() -> f64 {
        d().h_init
    }
    pub fn h_min() -> f64 {
        d().h_min
    }
    pub fn h_max() -> f64 {
        d().h_max
    }
    pub fn safety() -> f64 {
        d().safety
    }
    pub fn max_retries() -> usize {
        d().max_retries
    }
    pub fn max_steps() -> usize {
        d().max_steps
    }
}

impl IntegratorSpec {
    pub fn config(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            h_init: self.h_init,
            h_min: self.h_min,
            h_max: self.h_max,
            safety: self.safety,
            max_retries: self.max_retries,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Resampling step in milliseconds.
    #[serde(default = "default_resample")]
    pub resample_ms: f64,
}

fn default_resample() -> f64 {
    1.0
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            resample_ms: default_resample(),
        }
    }
}

/// A validated scenario, ready to run.
pub struct Built {
    pub plant: Box<dyn Plant>,
    pub controller: FunnelController,
    pub reference: Reference,
    pub options: RunOptions,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenarios serialise")
    }

    /// SHA-256 of the canonical JSON form, so formatting and comments do not matter.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenarios serialise");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn params(&self) -> Result<ControllerParams, ScenarioError> {
        let c = &self.controller;
        let surjection = Surjection::from_name(&c.surjection).ok_or_else(|| {
            ScenarioError::Invalid(vec![format!(
                "unknown surjection {:?} (known: {})",
                c.surjection,
                Surjection::REGISTERED.join(", ")
            )])
        })?;
        Ok(ControllerParams::new(c.alpha, c.beta, c.psi0, c.gains.clone())
            .with_surjection(surjection)
            .with_outputs(self.plant_outputs()))
    }

    fn plant_outputs(&self) -> usize {
        match &self.plant {
            PlantSpec::IntegratorChain { outputs, .. } => *outputs,
            _ => 1,
        }
    }

    fn build_plant(&self) -> Result<Box<dyn Plant>, String> {
        let stack = |initial: &[f64], n: usize| -> Result<Vec<f64>, String> {
            match initial.len() {
                0 => Ok(vec![0.0; n]),
                l if l == n => Ok(initial.to_vec()),
                l => Err(format!("initial has {l} entries, expected {n}")),
            }
        };
        match &self.plant {
            PlantSpec::MassOnCar {
                m1,
                m2,
                k_spring,
                d_damp,
                theta,
                initial,
            } => {
                let p = MassOnCar::new(*m1, *m2, *k_spring, *d_damp, *theta).map_err(|e| e.to_string())?;
                Ok(Box::new(p.with_initial(*initial)))
            }
            PlantSpec::IntegratorChain {
                order,
                outputs,
                initial,
            } => {
                let init = stack(initial, order * outputs)?;
                Ok(Box::new(
                    FunctionalPlant::integrator_chain(*order, *outputs, init).map_err(|e| e.to_string())?,
                ))
            }
            PlantSpec::Functional {
                order,
                operator,
                feedback,
                input_gain,
                initial,
                disturbance,
            } => {
                let init = stack(initial, *order)?;
                let p = FunctionalPlant::linear(*order, operator.build(), feedback.clone(), *input_gain, init)
                    .map_err(|e| e.to_string())?;
                Ok(Box::new(p.with_disturbance(*disturbance)))
            }
        }
    }

    /// Validates every section and assembles the run inputs. All problems
    /// found are reported together.
    pub fn build(&self) -> Result<Built, ScenarioError> {
        let mut errs = Vec::new();
        let params = match self.params() {
            Ok(p) => Some(p),
            Err(ScenarioError::Invalid(mut e)) => {
                errs.append(&mut e);
                None
            }
            Err(e) => return Err(e),
        };
        if let Some(p) = &params {
            if let Err(e) = p.validate() {
                errs.extend(e.0.iter().map(ToString::to_string));
            }
        }
        if !self.saturation.is_valid() {
            errs.push(format!("saturation level must be positive, got {}", self.saturation.level));
        }
        if !self.reference.is_finite() {
            errs.push("reference parameters must be finite".into());
        }
        let [t0, t1] = self.integrator.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            errs.push(format!("t_span must be an increasing pair, got [{t0}, {t1}]"));
        }
        if let Err(e) = self.integrator.config().validate() {
            errs.push(e);
        }
        if !(self.output.resample_ms > 0.0 && self.output.resample_ms.is_finite()) {
            errs.push(format!("resample_ms must be positive, got {}", self.output.resample_ms));
        }
        let plant = match self.build_plant() {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(e);
                None
            }
        };
        if let (Some(p), Some(params)) = (&plant, &params) {
            if p.order() != params.order() {
                errs.push(format!(
                    "plant has relative degree {} but {} gains give order {}",
                    p.order(),
                    params.gains.len(),
                    params.order()
                ));
            }
        }
        if !errs.is_empty() {
            return Err(ScenarioError::Invalid(errs));
        }
        let controller = FunnelController::new(params.expect("checked"), self.saturation)
            .map_err(|e| ScenarioError::Invalid(vec![e.to_string()]))?;
        Ok(Built {
            plant: plant.expect("checked"),
            controller,
            reference: self.reference.clone(),
            options: RunOptions {
                span: (t0, t1),
                integrator: self.integrator.config(),
                resample: self.output.resample_ms * 1e-3,
                ..RunOptions::default()
            },
        })
    }
}

impl Built {
    pub fn run(&self) -> Result<RunOutput, SimError> {
        sim::run(self.plant.as_ref(), &self.controller, &self.reference, &self.options)
    }
}

const MOC_R3: &str = r#"name = "moc-r3"
seed = 0

[plant]
kind = "mass-on-car"
m1 = 4.0
m2 = 1.0
k_spring = 2.0
d_damp = 1.0
theta = 0.0
initial = [0.0, 0.0, 0.0, 0.0]

[controller]
alpha = 1.5
beta = 0.15
psi0 = 3.1
gains = [2.5, 2.5]
surjection = "s_sin_s"

[saturation]
kind = "componentwise"
level = 8.0

[reference]
kind = "cosine"
amplitude = 0.5
omega = 1.0
phase = 0.0
offset = 0.0

[integrator]
t_span = [0.0, 20.0]
rel_tol = 1e-10
abs_tol = 1e-8

[output]
resample_ms = 1.0
"#;

const INTEGRATOR_CHAIN_R1: &str = r#"name = "integrator-chain-r1"

[plant]
kind = "integrator-chain"
order = 1
initial = [1.0]

[controller]
alpha = 1.0
beta = 0.1
psi0 = 2.0
gains = []

[saturation]
kind = "componentwise"
level = 2.0

[reference]
kind = "constant"
value = 0.0

[integrator]
t_span = [0.0, 10.0]
"#;

const INTEGRATOR_CHAIN_R2: &str = r#"name = "integrator-chain-r2"

[plant]
kind = "integrator-chain"
order = 2
initial = [0.0, 0.0]

[controller]
alpha = 1.0
beta = 0.1
psi0 = 2.0
gains = [2.0]

[saturation]
kind = "componentwise"
level = 4.0

[reference]
kind = "cosine"
amplitude = 0.5
omega = 1.0

[integrator]
t_span = [0.0, 10.0]
"#;

const INTEGRATOR_CHAIN_R3: &str = r#"name = "integrator-chain-r3"

[plant]
kind = "integrator-chain"
order = 3
initial = [0.0, 0.0, 0.0]

[controller]
alpha = 1.0
beta = 0.1
psi0 = 2.5
gains = [2.0, 2.0]

[saturation]
kind = "componentwise"
level = 4.0

[reference]
kind = "cosine"
amplitude = 0.5
omega = 1.0

[integrator]
t_span = [0.0, 10.0]
"#;

/// Names of the built-in scenarios.
pub const BUILTINS: [&str; 5] = [
    "moc-r3",
    "moc-r3-unsat",
    "integrator-chain-r1",
    "integrator-chain-r2",
    "integrator-chain-r3",
];

/// TOML text of a built-in scenario.
pub fn builtin_text(name: &str) -> Option<String> {
    match name {
        "moc-r3" => Some(MOC_R3.to_string()),
        "moc-r3-unsat" => Some(
            MOC_R3
                .replacen("name = \"moc-r3\"", "name = \"moc-r3-unsat\"", 1)
                .replacen("level = 8.0", "level = 1e6", 1),
        ),
        "integrator-chain-r1" => Some(INTEGRATOR_CHAIN_R1.to_string()),
        "integrator-chain-r2" => Some(INTEGRATOR_CHAIN_R2.to_string()),
        "integrator-chain-r3" => Some(INTEGRATOR_CHAIN_R3.to_string()),
        _ => None,
    }
}

pub fn builtin(name: &str) -> Option<Scenario> {
    builtin_text(name).map(|t| Scenario::from_toml(&t).expect("built-in scenarios parse"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_validate() {
        for name in BUILTINS {
            let s = builtin(name).unwrap();
            assert_eq!(s.name, name);
            s.build().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn benchmark_values() {
        let s = builtin("moc-r3").unwrap();
        let b = s.build().unwrap();
        let p = b.controller.params();
        assert_eq!((p.alpha, p.beta, p.psi0), (1.5, 0.15, 3.1));
        assert_eq!(p.gains, vec![2.5, 2.5]);
        assert_eq!(b.controller.saturation().level, 8.0);
        assert_eq!(b.options.span, (0.0, 20.0));
        assert_eq!((b.options.integrator.rel_tol, b.options.integrator.abs_tol), (1e-10, 1e-8));
        assert_eq!(builtin("moc-r3-unsat").unwrap().saturation.level, 1e6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MOC_R3.replace("m1 = 4.0", "m1 = 4.0\nmass = 3.0");
        assert!(matches!(Scenario::from_toml(&text), Err(ScenarioError::Parse(_))));
        assert!(matches!(Scenario::from_toml("name = "), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn validation_names_the_violated_constraint() {
        let text = MOC_R3.replace("psi0 = 3.1", "psi0 = 0.05");
        let err = Scenario::from_toml(&text).unwrap().build().err().unwrap();
        assert!(err.to_string().contains("psi0 ≤ beta/alpha"), "{err}");
        let text = MOC_R3.replace("gains = [2.5, 2.5]", "gains = [1.0, 2.5]");
        let err = Scenario::from_toml(&text).unwrap().build().err().unwrap();
        assert!(err.to_string().contains("k_1 ≤ alpha"), "{err}");
        let text = MOC_R3.replace("gains = [2.5, 2.5]", "gains = [2.5]");
        assert!(Scenario::from_toml(&text).unwrap().build().is_err());
    }

    #[test]
    fn hash_ignores_formatting_but_not_values() {
        let a = builtin("moc-r3").unwrap();
        let reformatted = format!("# comment\n{}", MOC_R3.replace(" = ", "   =   "));
        let b = Scenario::from_toml(&reformatted).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = Scenario::from_toml(&MOC_R3.replace("level = 8.0", "level = 8.5")).unwrap();
        assert_ne!(a.hash(), c.hash());
        // explicit defaults hash like omitted ones
        let d = Scenario::from_toml(&MOC_R3.replace("phase = 0.0\n", "")).unwrap();
        assert_eq!(a.hash(), d.hash());
    }

    #[test]
    fn toml_round_trip() {
        for name in BUILTINS {
            let s = builtin(name).unwrap();
            assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
        }
    }

    #[test]
    fn functional_plant_section() {
        let text = r#"
            name = "delay"
            [plant]
            kind = "functional"
            order = 1
            operator = { kind = "distributed-delay", h = 0.5, kernel = { kind = "constant", value = 1.0 } }
            feedback = [-0.5]
            input_gain = 1.0
            initial = [0.5]
            disturbance = { kind = "sine", amplitude = 0.1, omega = 2.0, phase = 0.0 }
            [controller]
            alpha = 1.0
            beta = 0.1
            psi0 = 1.0
            gains = []
            [saturation]
            kind = "radial"
            level = 3.0
            [reference]
            kind = "constant"
            value = 0.0
            [integrator]
            t_span = [0.0, 2.0]
        "#;
        let b = Scenario::from_toml(text).unwrap().build().unwrap();
        assert_eq!(b.plant.max_step(), Some(0.5));
    }
}
