//! Scenario file schema and validation.
//!
//! A scenario is a single TOML document describing the plant, the switching
//! graph, the coupling law with its gains, the simulation window and the
//! expected outcomes. Parsing failures and semantic violations carry the
//! offending field path.

use serde::{Deserialize, Serialize};
use syncnet_core::controllers::CouplingLaw;
use syncnet_core::graphnet::{GraphSegment, SwitchingGraph};
use syncnet_core::matcore::{detectability_gain, matrix_from_rows, stabilizing_gain};
use syncnet_core::plant::{LinearPlant, PeriodicCoefficients};
use syncnet_core::simkit::{SimulationConfig, SyncThresholds};
use syncnet_core::Matrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ScenarioError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub plant: PlantSpec,
    pub coupling: CouplingSpec,
    pub graph: GraphSpec,
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub thresholds: ThresholdSpec,
    #[serde(default, skip_serializing_if = "CertificateSpec::is_empty")]
    pub certificates: CertificateSpec,
    #[serde(default)]
    pub expect: ExpectSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    /// `continuous`, `discrete` or `periodic`.
    pub kind: String,
    /// System matrix (LTI kinds).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    /// Coefficient period (periodic kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Uniform samples of `A(t)` over one period (periodic kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    /// One of: `static-state-inverse-b`, `dynamic-state`,
    /// `dynamic-output-observer`, `static-diffusive-output`,
    /// `discrete-static-inverse-b`, `discrete-dynamic-output-observer`,
    /// `periodic-static-inverse-b`.
    pub variant: String,
    /// Feedback gain; synthesized when omitted but required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    /// Observer gain; synthesized when omitted but required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<Vec<f64>>>,
    /// Per-agent step weights for the discrete laws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub eta: f64,
    pub gamma: f64,
    /// Schedule repeats with this period when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub duration: f64,
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub seed: u64,
    /// Amplitude of the sampled initial conditions.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Explicit initial agent states (one row per agent); sampled when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_x: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_eta: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_xhat: Option<Vec<Vec<f64>>>,
}

fn default_record_every() -> usize {
    1
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub sync_ratio: f64,
    pub fail_ratio: f64,
    pub fail_rate: f64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        Self { sync_ratio: 1e-3, fail_ratio: 1e-1, fail_rate: -1e-3 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    /// Candidate storage matrix for the passivity check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passivity_p: Option<Vec<Vec<f64>>>,
    /// Window for the uniform-connectivity certificate; defaults to the
    /// graph period (periodic) or the simulation window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity_horizon: Option<f64>,
}

impl CertificateSpec {
    pub fn is_empty(&self) -> bool {
        self.passivity_p.is_none() && self.connectivity_horizon.is_none()
    }
}

/// Expected outcomes; every present key becomes a checked assertion.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExpectSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synchronized: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniformly_connected: Option<bool>,
    /// Spectral + PBH hypotheses of the law in use (Floquet exponents for
    /// periodic plants).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant_hypotheses: Option<bool>,
    /// Every segment individually connected and balanced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balanced_connected: Option<bool>,
    /// Passivity certificate verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passive: Option<bool>,
}

/// Scenario compiled into core types, ready to run.
#[derive(Debug)]
pub struct BuiltScenario {
    pub name: String,
    pub plant: LinearPlant<f64>,
    pub graph: SwitchingGraph<f64>,
    pub law: CouplingLaw<f64>,
    pub config: SimulationConfig<f64>,
    pub amplitude: f64,
    pub thresholds: SyncThresholds<f64>,
    pub passivity_p: Option<Matrix>,
    pub connectivity_horizon: f64,
    pub expect: ExpectSpec,
    pub initial_x: Option<Vec<Vec<f64>>>,
    pub initial_eta: Option<Vec<Vec<f64>>>,
    pub initial_xhat: Option<Vec<Vec<f64>>>,
    /// Gains that were synthesized rather than user-supplied.
    pub synthesized_gains: Vec<&'static str>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    /// Validates the description and compiles it into core types.
    pub fn build(&self) -> Result<BuiltScenario, ScenarioError> {
        let plant = self.build_plant()?;
        let graph = self.build_graph()?;
        let (law, synthesized_gains) = self.build_law(&plant)?;

        let sim = &self.simulation;
        if !(sim.step > 0.0) {
            return Err(ScenarioError::at("simulation.step", "must be positive"));
        }
        if sim.t_end <= sim.t0 {
            return Err(ScenarioError::at("simulation.t_end", "must exceed t0"));
        }
        if sim.record_every == 0 {
            return Err(ScenarioError::at("simulation.record_every", "must be at least 1"));
        }
        if let Some(coeffs) = plant.periodic_coefficients() {
            if sim.step > coeffs.spacing() * (1.0 + 1e-9) {
                return Err(ScenarioError::at(
                    "simulation.step",
                    format!(
                        "step {} must resolve the coefficient grid (spacing {})",
                        sim.step,
                        coeffs.spacing()
                    ),
                ));
            }
        }
        let config = SimulationConfig {
            t0: sim.t0,
            t_end: sim.t_end,
            step: sim.step,
            record_every: sim.record_every,
            seed: sim.seed,
        };

        let thresholds = SyncThresholds {
            sync_ratio: self.thresholds.sync_ratio,
            fail_ratio: self.thresholds.fail_ratio,
            fail_rate: self.thresholds.fail_rate,
        };

        let passivity_p = match &self.certificates.passivity_p {
            Some(rows) => Some(to_matrix(rows, "certificates.passivity_p")?),
            None => None,
        };
        let connectivity_horizon = self
            .certificates
            .connectivity_horizon
            .or(graph.period())
            .unwrap_or(sim.t_end - sim.t0);
        if !(connectivity_horizon > 0.0) {
            return Err(ScenarioError::at(
                "certificates.connectivity_horizon",
                "must be positive",
            ));
        }

        Ok(BuiltScenario {
            name: self.name.clone(),
            plant,
            graph,
            law,
            config,
            amplitude: sim.amplitude,
            thresholds,
            passivity_p,
            connectivity_horizon,
            expect: self.expect.clone(),
            initial_x: sim.initial_x.clone(),
            initial_eta: sim.initial_eta.clone(),
            initial_xhat: sim.initial_xhat.clone(),
            synthesized_gains,
        })
    }

    fn build_plant(&self) -> Result<LinearPlant<f64>, ScenarioError> {
        let spec = &self.plant;
        let b = to_matrix(&spec.b, "plant.b")?;
        let c = match &spec.c {
            Some(rows) => Some(to_matrix(rows, "plant.c")?),
            None => None,
        };
        let plant = match spec.kind.as_str() {
            "continuous" | "discrete" => {
                let rows = spec
                    .a
                    .as_ref()
                    .ok_or_else(|| ScenarioError::at("plant.a", "required for LTI plants"))?;
                let a = to_matrix(rows, "plant.a")?;
                if spec.kind == "continuous" {
                    LinearPlant::continuous(a, b, c)
                } else {
                    LinearPlant::discrete(a, b, c)
                }
            }
            "periodic" => {
                let period = spec
                    .period
                    .ok_or_else(|| ScenarioError::at("plant.period", "required for periodic plants"))?;
                let sample_rows = spec.samples.as_ref().ok_or_else(|| {
                    ScenarioError::at("plant.samples", "required for periodic plants")
                })?;
                let mut samples = Vec::with_capacity(sample_rows.len());
                for (i, rows) in sample_rows.iter().enumerate() {
                    samples.push(to_matrix(rows, &format!("plant.samples[{i}]"))?);
                }
                let coeffs = PeriodicCoefficients::new(period, samples)
                    .map_err(|e| ScenarioError::at("plant.samples", e.to_string()))?;
                LinearPlant::periodic(coeffs, b, c)
            }
            other => {
                return Err(ScenarioError::at(
                    "plant.kind",
                    format!("unknown kind '{other}' (continuous | discrete | periodic)"),
                ))
            }
        };
        plant.map_err(|e| ScenarioError::at("plant", e.to_string()))
    }

    fn build_graph(&self) -> Result<SwitchingGraph<f64>, ScenarioError> {
        let spec = &self.graph;
        if spec.segments.is_empty() {
            return Err(ScenarioError::at("graph.segments", "at least one segment"));
        }
        let mut segments = Vec::with_capacity(spec.segments.len());
        let mut start = 0.0;
        for (i, seg) in spec.segments.iter().enumerate() {
            if !(seg.duration > 0.0) {
                return Err(ScenarioError::at(
                    format!("graph.segments[{i}].duration"),
                    "must be positive",
                ));
            }
            let adjacency = to_matrix(&seg.weights, &format!("graph.segments[{i}].weights"))?;
            segments.push(GraphSegment { start, adjacency });
            start += seg.duration;
        }
        if let Some(p) = spec.period {
            if (p - start).abs() > 1e-9 * start.max(1.0) {
                return Err(ScenarioError::at(
                    "graph.period",
                    format!("period {p} must equal the sum of segment durations {start}"),
                ));
            }
        }
        SwitchingGraph::new(segments, spec.period, spec.eta, spec.gamma)
            .map_err(|e| ScenarioError::at("graph", e.to_string()))
    }

    fn build_law(
        &self,
        plant: &LinearPlant<f64>,
    ) -> Result<(CouplingLaw<f64>, Vec<&'static str>), ScenarioError> {
        let spec = &self.coupling;
        let mut synthesized = Vec::new();

        let explicit_k = match &spec.k {
            Some(rows) => Some(to_matrix(rows, "coupling.k")?),
            None => None,
        };
        let explicit_h = match &spec.h {
            Some(rows) => Some(to_matrix(rows, "coupling.h")?),
            None => None,
        };

        fn feedback_gain(
            explicit: &Option<Matrix>,
            plant: &LinearPlant<f64>,
            synthesized: &mut Vec<&'static str>,
        ) -> Result<Matrix, ScenarioError> {
            if let Some(k) = explicit.clone() {
                return Ok(k);
            }
            let a = plant.a().ok_or_else(|| {
                ScenarioError::at("coupling.k", "required: cannot synthesize for periodic plants")
            })?;
            synthesized.push("k");
            stabilizing_gain(a, plant.b())
                .map_err(|e| ScenarioError::at("coupling.k", format!("synthesis failed: {e}")))
        }

        let law = match spec.variant.as_str() {
            "static-state-inverse-b" => CouplingLaw::StaticStateInverseB,
            "periodic-static-inverse-b" => CouplingLaw::PeriodicStaticInverseB,
            "dynamic-state" => {
                CouplingLaw::DynamicState { k: feedback_gain(&explicit_k, plant, &mut synthesized)? }
            }
            "static-diffusive-output" => CouplingLaw::StaticDiffusiveOutput,
            "dynamic-output-observer" | "discrete-dynamic-output-observer" => {
                let k = feedback_gain(&explicit_k, plant, &mut synthesized)?;
                let h = match explicit_h {
                    Some(h) => h,
                    None => {
                        let a = plant.a().ok_or_else(|| {
                            ScenarioError::at("coupling.h", "required for periodic plants")
                        })?;
                        let c = plant.c().ok_or_else(|| {
                            ScenarioError::at("plant.c", "required for observer laws")
                        })?;
                        synthesized.push("h");
                        detectability_gain(a, c).map_err(|e| {
                            ScenarioError::at("coupling.h", format!("synthesis failed: {e}"))
                        })?
                    }
                };
                if spec.variant == "dynamic-output-observer" {
                    CouplingLaw::DynamicOutputObserver { k, h }
                } else {
                    let epsilons = spec.epsilons.clone().ok_or_else(|| {
                        ScenarioError::at("coupling.epsilons", "required for discrete laws")
                    })?;
                    CouplingLaw::DiscreteDynamicOutputObserver { k, h, epsilons }
                }
            }
            "discrete-static-inverse-b" => {
                let epsilons = spec.epsilons.clone().ok_or_else(|| {
                    ScenarioError::at("coupling.epsilons", "required for discrete laws")
                })?;
                CouplingLaw::DiscreteStaticInverseB { epsilons }
            }
            other => {
                return Err(ScenarioError::at(
                    "coupling.variant",
                    format!("unknown variant '{other}'"),
                ))
            }
        };
        Ok((law, synthesized))
    }
}

fn to_matrix(rows: &[Vec<f64>], path: &str) -> Result<Matrix, ScenarioError> {
    matrix_from_rows(rows).map_err(|e| ScenarioError::at(path, e.to_string()))
}
