//! Runs a scenario end to end: certificates, simulation, verdict,
//! assertions, artifacts.

use crate::output;
use crate::scenario::{BuiltScenario, Scenario, ScenarioError};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;
use syncnet_core::controllers::{
    passivity_candidates, passivity_check, ClosedLoop, CouplingLaw, NetworkState,
    PassivityCertificate, StateLayout,
};
use syncnet_core::graphnet::uniformly_connected;
use syncnet_core::matcore::pbh_observable;
use syncnet_core::plant::{monodromy, FloquetData};
use syncnet_core::simkit::{
    integrate, sample_initial_state, step_discrete, sync_verdict, SyncStatus,
};
use syncnet_core::Vector;

/// Exit code contract: 0 all assertions hold, 1 assertion failure or
/// divergence that breaks one, 2 input error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub step_override: Option<f64>,
    pub seed_override: Option<u64>,
    /// Skip writing the trace and summary files (used by tests).
    pub write_outputs: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("."),
            step_override: None,
            seed_override: None,
            write_outputs: true,
        }
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub name: String,
    pub exit_code: i32,
    pub summary: Value,
    pub headline: String,
}

fn input_error(name: &str, message: String) -> RunOutcome {
    RunOutcome {
        name: name.to_string(),
        exit_code: EXIT_INPUT,
        summary: json!({ "scenario": name, "error": message }),
        headline: format!("{name}: INPUT ERROR ({message})"),
    }
}

/// Loads and runs a scenario from a TOML file.
pub fn run_file(path: &Path, options: &RunOptions) -> RunOutcome {
    let label = path.display().to_string();
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => return input_error(&label, format!("cannot read file: {e}")),
    };
    match Scenario::from_toml(&text) {
        Ok(scenario) => run_scenario(&scenario, options),
        Err(e) => input_error(&label, e.to_string()),
    }
}

/// Runs a parsed scenario.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> RunOutcome {
    let started = Instant::now();
    let mut built = match scenario.build() {
        Ok(built) => built,
        Err(e @ ScenarioError::Invalid { .. }) | Err(e @ ScenarioError::Parse(_)) => {
            return input_error(&scenario.name, e.to_string())
        }
    };
    if let Some(step) = options.step_override {
        built.config.step = step;
    }
    if let Some(seed) = options.seed_override {
        built.config.seed = seed;
    }

    let digest = {
        let mut hasher = Sha256::new();
        hasher.update(scenario.to_toml().as_bytes());
        hex_string(&hasher.finalize())
    };

    // --- Certificates -----------------------------------------------------
    let hypotheses = match built.plant.check_hypotheses(1e-9) {
        Ok(report) => report,
        Err(e) => return input_error(&built.name, format!("hypothesis check failed: {e}")),
    };
    let floquet: Option<FloquetData<f64>> = match built.plant.periodic_coefficients() {
        Some(coeffs) => match monodromy(&built.plant, coeffs.spacing()) {
            Ok(data) => Some(data),
            Err(e) => return input_error(&built.name, format!("monodromy failed: {e}")),
        },
        None => None,
    };
    let connectivity = match uniformly_connected(&built.graph, built.connectivity_horizon) {
        Ok(report) => report,
        Err(e) => return input_error(&built.name, format!("connectivity check failed: {e}")),
    };

    let passivity: Option<(PassivityCertificate<f64>, &'static str)> =
        if let Some(p) = &built.passivity_p {
            match passivity_check(&built.plant, p, 1e-12) {
                Ok(cert) => Some((cert, "user")),
                Err(e) => return input_error(&built.name, format!("passivity check failed: {e}")),
            }
        } else if built.expect.passive.is_some() {
            let mut found = None;
            for candidate in passivity_candidates(&built.plant) {
                if let Ok(cert) = passivity_check(&built.plant, &candidate, 1e-12) {
                    let good = cert.verdict;
                    found = Some((cert, "candidate"));
                    if good {
                        break;
                    }
                }
            }
            found
        } else {
            None
        };

    // Observability enters the diffusive-output hypotheses.
    let observable = match (&built.law, built.plant.a(), built.plant.c()) {
        (CouplingLaw::StaticDiffusiveOutput, Some(a), Some(c)) => {
            pbh_observable(a, c).ok().map(|r| r.ok)
        }
        _ => None,
    };

    // --- Closed loop and simulation ---------------------------------------
    let closed = match ClosedLoop::new(built.plant.clone(), built.graph.clone(), built.law.clone())
    {
        Ok(closed) => closed,
        Err(e) => return input_error(&built.name, format!("coupling law rejected: {e}")),
    };
    let layout = closed.layout();

    let init = match initial_state(&built, layout) {
        Ok(init) => init,
        Err(e) => return input_error(&built.name, e.to_string()),
    };

    let trace_result = if closed.is_discrete() {
        step_discrete(&closed, &init, &built.config)
    } else {
        integrate(&closed, &init, &built.config)
    };
    let mut trace = match trace_result {
        Ok(trace) => trace,
        Err(e) => return input_error(&built.name, format!("simulation rejected: {e}")),
    };
    trace.metadata = format!("{};sha256:{digest}", built.name);

    let verdict = match sync_verdict(&trace, &built.plant, &built.thresholds) {
        Ok(verdict) => verdict,
        Err(e) => return input_error(&built.name, format!("verdict failed: {e}")),
    };

    // --- Assertions --------------------------------------------------------
    let mut assertions: Vec<Value> = Vec::new();
    let mut all_pass = true;
    fn assert_bool(
        assertions: &mut Vec<Value>,
        all_pass: &mut bool,
        name: &str,
        expected: Option<bool>,
        actual: bool,
    ) {
        if let Some(expected) = expected {
            let pass = expected == actual;
            *all_pass &= pass;
            assertions.push(json!({
                "name": name,
                "expected": expected,
                "actual": actual,
                "pass": pass,
            }));
        }
    }

    assert_bool(
        &mut assertions,
        &mut all_pass,
        "synchronized",
        built.expect.synchronized,
        verdict.status == SyncStatus::Synchronized,
    );
    if let Some(expected) = built.expect.synchronized {
        // Expecting failure means the run must actively fail, not remain
        // inconclusive.
        if !expected {
            let refuted = verdict.status == SyncStatus::NotSynchronized;
            all_pass &= refuted;
            assertions.push(json!({
                "name": "non-synchronization-established",
                "expected": true,
                "actual": refuted,
                "pass": refuted,
            }));
        }
    }
    assert_bool(
        &mut assertions,
        &mut all_pass,
        "uniformly_connected",
        built.expect.uniformly_connected,
        connectivity.uniform,
    );

    let plant_ok = {
        let spectral = match &floquet {
            Some(data) => data.no_unstable_mode(1e-6),
            None => hypotheses.no_unstable_mode().unwrap_or(false),
        };
        let extra = match &built.law {
            CouplingLaw::StaticStateInverseB
            | CouplingLaw::PeriodicStaticInverseB
            | CouplingLaw::DiscreteStaticInverseB { .. } => {
                hypotheses.b_invertibility.invertible
            }
            CouplingLaw::DynamicState { .. } => hypotheses.stabilizable_ok().unwrap_or(false),
            CouplingLaw::DynamicOutputObserver { .. }
            | CouplingLaw::DiscreteDynamicOutputObserver { .. } => {
                hypotheses.stabilizable_ok().unwrap_or(false)
                    && hypotheses.detectable_ok().unwrap_or(false)
            }
            CouplingLaw::StaticDiffusiveOutput => observable.unwrap_or(false),
        };
        spectral && extra
    };
    assert_bool(&mut assertions, &mut all_pass, "plant_hypotheses", built.expect.plant_hypotheses, plant_ok);

    let balanced_connected = connectivity.balanced.iter().all(|&b| b)
        && connectivity.connected_now.iter().all(|&c| c);
    assert_bool(&mut assertions, &mut all_pass, "balanced_connected", built.expect.balanced_connected, balanced_connected);

    assert_bool(
        &mut assertions,
        &mut all_pass,
        "passive",
        built.expect.passive,
        passivity.as_ref().map(|(c, _)| c.verdict).unwrap_or(false),
    );

    // --- Artifacts ----------------------------------------------------------
    let trace_path = options.out_dir.join(format!("{}.trace.csv", built.name));
    let summary_path = options.out_dir.join(format!("{}.summary.json", built.name));

    let status_str = match verdict.status {
        SyncStatus::Synchronized => "synchronized",
        SyncStatus::NotSynchronized => "not-synchronized",
        SyncStatus::Inconclusive => "inconclusive",
    };
    let summary = json!({
        "scenario": built.name,
        "digest": format!("sha256:{digest}"),
        "law": built.law.name(),
        "synthesized_gains": built.synthesized_gains,
        "certificates": {
            "plant": plant_certificate_json(&hypotheses, &floquet),
            "connectivity": {
                "uniform": connectivity.uniform,
                "root": connectivity.root,
                "horizon": connectivity.horizon,
                "connected_now": connectivity.connected_now,
                "balanced": connectivity.balanced,
                "symmetric": connectivity.symmetric,
                "lambda2_min": connectivity.lambda2_min,
            },
            "passivity": passivity.as_ref().map(|(cert, source)| json!({
                "verdict": cert.verdict,
                "residual_lyap": cert.residual_lyap,
                "residual_io": cert.residual_io,
                "min_eig_p": cert.min_eig_p,
                "source": source,
            })),
            "observable": observable,
        },
        "verdict": {
            "status": status_str,
            "fitted_rate": finite_or_string(verdict.fitted_rate),
            "final_ratio": finite_or_string(verdict.final_ratio),
            "openloop_residual": verdict.openloop_residual,
            "diverged": verdict.diverged,
        },
        "assertions": assertions,
        "pass": all_pass,
        "trace": trace_path.display().to_string(),
        "samples": trace.len(),
        "runtime_seconds": started.elapsed().as_secs_f64(),
    });

    if options.write_outputs {
        if let Err(e) = std::fs::create_dir_all(&options.out_dir)
            .and_then(|()| output::write_trace_csv(&trace_path, &trace, layout))
            .and_then(|()| output::write_summary_json(&summary_path, &summary))
        {
            return input_error(&built.name, format!("cannot write artifacts: {e}"));
        }
    }

    let exit_code = if all_pass { EXIT_OK } else { EXIT_ASSERTION };
    let verdict_note = if verdict.diverged {
        format!("{status_str}, diverged at t={}", trace.final_time())
    } else {
        format!(
            "{status_str}, rate={:.3e}, ratio={:.3e}",
            verdict.fitted_rate, verdict.final_ratio
        )
    };
    let headline = format!(
        "{}: {} ({verdict_note})",
        built.name,
        if all_pass { "PASS" } else { "FAIL" }
    );
    RunOutcome { name: built.name, exit_code, summary, headline }
}

fn plant_certificate_json(
    hypotheses: &syncnet_core::plant::HypothesisReport<f64>,
    floquet: &Option<FloquetData<f64>>,
) -> Value {
    json!({
        "classification": hypotheses.spectrum.as_ref().map(|s| format!("{:?}", s.classification)),
        "no_unstable_mode": hypotheses.no_unstable_mode(),
        "stabilizable": hypotheses.stabilizable_ok(),
        "detectable": hypotheses.detectable_ok(),
        "b_invertible": hypotheses.b_invertibility.invertible,
        "b_condition": hypotheses.b_invertibility.condition,
        "floquet": floquet.as_ref().map(|data| json!({
            "multiplier_moduli": data.multipliers.iter()
                .map(|m| m.norm_sqr().sqrt()).collect::<Vec<_>>(),
            "exponents_re": data.exponents.iter().map(|e| e.re).collect::<Vec<_>>(),
            "exponents_im": data.exponents.iter().map(|e| e.im).collect::<Vec<_>>(),
            "no_unstable_mode": data.no_unstable_mode(1e-6),
        })),
    })
}

fn finite_or_string(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(format!("{v}"))
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn initial_state(
    built: &BuiltScenario,
    layout: StateLayout,
) -> Result<NetworkState<f64>, ScenarioError> {
    let stack = |rows: &Vec<Vec<f64>>, path: &str| -> Result<Vector, ScenarioError> {
        if rows.len() != layout.agents {
            return Err(ScenarioError::Invalid {
                path: path.into(),
                message: format!("expected {} agent rows, got {}", layout.agents, rows.len()),
            });
        }
        let mut flat = Vec::with_capacity(layout.block_len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != layout.state_dim {
                return Err(ScenarioError::Invalid {
                    path: format!("{path}[{i}]"),
                    message: format!("expected {} coordinates, got {}", layout.state_dim, row.len()),
                });
            }
            flat.extend_from_slice(row);
        }
        Ok(Vector::from_vec(flat))
    };

    let mut state = match &built.initial_x {
        Some(rows) => {
            let mut s = NetworkState::zeros(layout);
            s.x = stack(rows, "simulation.initial_x")?;
            s
        }
        None => sample_initial_state(layout, built.config.seed, built.amplitude),
    };
    if let Some(rows) = &built.initial_eta {
        if !layout.has_eta {
            return Err(ScenarioError::Invalid {
                path: "simulation.initial_eta".into(),
                message: "this coupling law has no controller state".into(),
            });
        }
        state.eta = Some(stack(rows, "simulation.initial_eta")?);
    }
    if let Some(rows) = &built.initial_xhat {
        if !layout.has_xhat {
            return Err(ScenarioError::Invalid {
                path: "simulation.initial_xhat".into(),
                message: "this coupling law has no observer state".into(),
            });
        }
        state.xhat = Some(stack(rows, "simulation.initial_xhat")?);
    }
    Ok(state)
}
