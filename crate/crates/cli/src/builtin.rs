//! Built-in demonstration scenarios.

use crate::scenario::{
    CertificateSpec, CouplingSpec, ExpectSpec, GraphSpec, PlantSpec, Scenario, SegmentSpec,
    SimulationSpec, ThresholdSpec,
};
use syncnet_core::plant::rotating_frame_coefficients;
use syncnet_core::Matrix;

pub const BUILTIN_NAMES: [&str; 7] = [
    "example1-dynamic",
    "example1-static",
    "example2-dynamic",
    "example2-static",
    "a1-passive-balanced",
    "discrete-rotation",
    "periodic-floquet",
];

/// How the active edge advances relative to the information direction.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum EdgeRotation {
    /// Segment `i` activates the information edge `i -> i+1`: the edge
    /// sequence chases the flow of information around the ring.
    WithFlow,
    /// Segment `i` activates the information edge `i+1 -> i`: the edge
    /// sequence runs against the information direction. At period 7 this
    /// orientation makes static diffusive velocity coupling of harmonic
    /// oscillators genuinely unstable (a closed-loop Floquet multiplier of
    /// modulus 1.1253 leaves the unit disk), which is why the
    /// counterexample scenario pins it.
    AgainstFlow,
}

/// Rotating single directed edge among four nodes, one edge per quarter
/// period. The union over a full period is a directed ring, so the schedule
/// is uniformly connected although no instant is.
pub fn rotating_edge_segments(period: f64, rotation: EdgeRotation) -> Vec<SegmentSpec> {
    (0..4)
        .map(|i| {
            let mut weights = vec![vec![0.0; 4]; 4];
            match rotation {
                // weights[receiver][source]
                EdgeRotation::WithFlow => weights[(i + 1) % 4][i] = 1.0,
                EdgeRotation::AgainstFlow => weights[i][(i + 1) % 4] = 1.0,
            }
            SegmentSpec { duration: period / 4.0, weights }
        })
        .collect()
}

fn rotating_edge_graph(period: f64, rotation: EdgeRotation) -> GraphSpec {
    GraphSpec {
        eta: 1.0,
        gamma: 1.0,
        period: Some(period),
        segments: rotating_edge_segments(period, rotation),
    }
}

fn directed_ring_graph() -> GraphSpec {
    let mut weights = vec![vec![0.0; 4]; 4];
    for k in 0..4 {
        weights[(k + 1) % 4][k] = 1.0;
    }
    GraphSpec {
        eta: 1.0,
        gamma: 1.0,
        period: None,
        segments: vec![SegmentSpec { duration: 1.0, weights }],
    }
}

fn harmonic_oscillator() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (vec![vec![0.0, 1.0], vec![-1.0, 0.0]], vec![vec![0.0], vec![1.0]])
}

fn double_integrator() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    (vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![vec![0.0], vec![1.0]])
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn example1_dynamic() -> Scenario {
    let (a, b) = harmonic_oscillator();
    Scenario {
        name: "example1-dynamic".into(),
        description: Some(
            "Four harmonic oscillators under the dynamic state-feedback coupling \
             on a rotating single-edge digraph with period 7; expects exponential \
             synchronization to a common oscillation."
                .into(),
        ),
        plant: PlantSpec { kind: "continuous".into(), a: Some(a), b, c: None, period: None, samples: None },
        coupling: CouplingSpec {
            variant: "dynamic-state".into(),
            k: Some(vec![vec![0.0, -1.0]]),
            h: None,
            epsilons: None,
        },
        graph: rotating_edge_graph(7.0, EdgeRotation::WithFlow),
        simulation: SimulationSpec {
            t0: 0.0,
            t_end: 60.0,
            step: 0.001,
            record_every: 100,
            seed: 42,
            amplitude: 1.0,
            initial_x: None,
            initial_eta: None,
            initial_xhat: None,
        },
        thresholds: ThresholdSpec::default(),
        certificates: CertificateSpec::default(),
        expect: ExpectSpec {
            synchronized: Some(true),
            uniformly_connected: Some(true),
            plant_hypotheses: Some(true),
            balanced_connected: None,
            passive: None,
        },
    }
}

fn example1_static() -> Scenario {
    let (a, b) = harmonic_oscillator();
    Scenario {
        name: "example1-static".into(),
        description: Some(
            "Four harmonic oscillators under static diffusive coupling through the \
             velocity output y = x2 on a rotating-edge digraph (period 7) whose edge \
             sequence runs against the information direction; the disagreement \
             genuinely diverges (Floquet multiplier 1.1253), so synchronization \
             is expected to fail. The dynamic coupling synchronizes under both \
             rotating-edge orientations; this one was pinned because it is \
             where the static law breaks."
                .into(),
        ),
        plant: PlantSpec {
            kind: "continuous".into(),
            a: Some(a),
            b,
            c: Some(vec![vec![0.0, 1.0]]),
            period: None,
            samples: None,
        },
        coupling: CouplingSpec {
            variant: "static-diffusive-output".into(),
            k: None,
            h: None,
            epsilons: None,
        },
        graph: rotating_edge_graph(7.0, EdgeRotation::AgainstFlow),
        simulation: SimulationSpec {
            t0: 0.0,
            t_end: 60.0,
            step: 0.001,
            record_every: 100,
            seed: 42,
            amplitude: 1.0,
            initial_x: None,
            initial_eta: None,
            initial_xhat: None,
        },
        thresholds: ThresholdSpec::default(),
        certificates: CertificateSpec::default(),
        expect: ExpectSpec {
            synchronized: Some(false),
            uniformly_connected: Some(true),
            plant_hypotheses: Some(true),
            balanced_connected: Some(false),
            passive: None,
        },
    }
}

fn example2_dynamic() -> Scenario {
    let (a, b) = double_integrator();
    Scenario {
        name: "example2-dynamic".into(),
        description: Some(
            "Four double integrators under the dynamic state-feedback coupling on a \
             rotating single-edge digraph with period 2; expects synchronization to \
             a common ramp."
                .into(),
        ),
        plant: PlantSpec { kind: "continuous".into(), a: Some(a), b, c: None, period: None, samples: None },
        coupling: CouplingSpec {
            variant: "dynamic-state".into(),
            k: Some(vec![vec![-1.0, -1.0]]),
            h: None,
            epsilons: None,
        },
        graph: rotating_edge_graph(2.0, EdgeRotation::WithFlow),
        simulation: SimulationSpec {
            t0: 0.0,
            t_end: 60.0,
            step: 0.001,
            record_every: 100,
            seed: 43,
            amplitude: 1.0,
            initial_x: None,
            initial_eta: None,
            initial_xhat: None,
        },
        thresholds: ThresholdSpec::default(),
        certificates: CertificateSpec::default(),
        expect: ExpectSpec {
            synchronized: Some(true),
            uniformly_connected: Some(true),
            plant_hypotheses: Some(true),
            balanced_connected: None,
            passive: None,
        },
    }
}

fn example2_static() -> Scenario {
    let (a, b) = double_integrator();
    Scenario {
        name: "example2-static".into(),
        description: Some(
            "Four double integrators under static diffusive coupling through the \
             summed output y = x1 + x2 on the rotating-edge digraph (period 2); \
             synchronization is expected to fail."
                .into(),
        ),
        plant: PlantSpec {
            kind: "continuous".into(),
            a: Some(a),
            b,
            c: Some(vec![vec![1.0, 1.0]]),
            period: None,
            samples: None,
        },
        coupling: CouplingSpec {
            variant: "static-diffusive-output".into(),
            k: None,
            h: None,
            epsilons: None,
        },
        graph: rotating_edge_graph(2.0, EdgeRotation::WithFlow),
        simulation: SimulationSpec {
            t0: 0.0,
            t_end: 60.0,
            step: 0.001,
            record_every: 100,
            seed: 43,
            amplitude: 1.0,
            initial_x: None,
            initial_eta: None,
            initial_xhat: None,
        },
        thresholds: ThresholdSpec::default(),
        certificates: CertificateSpec::default(),
        expect: ExpectSpec {
            synchronized: Some(false),
            uniformly_connected: Some(true),
            plant_hypotheses: Some(true),
            balanced_connected: Some(false),
            passive: None,
        },
    }
}

fn a1_passive_balanced() -> Scenario {
    let (a, b) = harmonic_oscillator();
    Scenario {
        name: "a1-passive-balanced".into(),
        description: Some(
            "Passivity-certified harmonic oscillators (P = I) under static \
             diffusive output coupling on a static balanced directed ring; \
             expects synchronization with a non-increasing network energy."
                .into(),
        ),
        plant: PlantSpec {
            kind: "continuous".into(),
            a: Some(a),
            b,
            c: Some(vec![vec![0.0, 1.0]]),
            period: None,
            samples: None,
        },
        coupling: CouplingSpec {
            variant: "static-diffusive-output".into(),
            k: None,
            h: None,
            epsilons: None,
        },
        graph: directed_ring_graph(),
        simulation: SimulationSpec {
            t0: 0.0,
            t_end: 60.0,
            step: 0.002,
            record_every: 50,
            seed: 44,
            amplitude: 1.0,
            initial_x: None,
            initial_eta: None,
            initial_xhat: None,
        },
        thresholds: ThresholdSpec::default(),
        certificates: CertificateSpec {
            passivity_p: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            connectivity_horizon: Some(1.0),
        },
        expect: ExpectSpec {
            synchronized: Some(true),
            uniformly_connected: Some(true),
            plant_hypotheses: Some(true),
            balanced_connected: Some(true),
            passive: Some(true),
        },
    }
}

fn discrete_rotation() -> Scenario {
    let theta = 0.3f64;
    Scenario {
        name: "discrete-rotation".into(),
        description: Some(
            "Four discrete-time planar rotations (0.3 rad per step) under the \
             invertible-B state coupling with per-agent step weights 0.5, on a \
             rotating-edge schedule of five steps per edge; expects \
             synchronization to a common rotation."
                .into(),
        ),
        plant: PlantSpec {
            kind: "discrete".into(),
            a: Some(vec![
                vec![theta.cos(), theta.sin()],
                vec![-theta.sin(), theta.cos()],
            ]),
            b: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            c: None,
            period: None,
            samples: None,
        },
        coupling: CouplingSpec {
            variant: "discrete-static-inverse-b".into(),
            k: None,
            h: None,
            epsilons: Some(vec![0.5, 0.5, 0.5, 0.5]),
        },
        graph: rotating_edge_graph(20.0, EdgeRotation::WithFlow),
        simulation: SimulationSpec {
            t0: 0.0,
            t_end: 500.0,
            step: 1.0,
            record_every: 1,
            seed: 45,
            amplitude: 1.0,
            initial_x: None,
            initial_eta: None,
            initial_xhat: None,
        },
        thresholds: ThresholdSpec::default(),
        certificates: CertificateSpec::default(),
        expect: ExpectSpec {
            synchronized: Some(true),
            uniformly_connected: Some(true),
            plant_hypotheses: Some(true),
            balanced_connected: None,
            passive: None,
        },
    }
}

fn periodic_floquet() -> Scenario {
    // Rotating-frame plant with generator Omega = [[0, 1], [-1, 0]]: the
    // characteristic exponents sit at +-i on the imaginary axis.
    let omega = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let coeffs = rotating_frame_coefficients(&omega, 2.0 * std::f64::consts::PI, 256)
        .expect("valid construction");
    let samples = coeffs.samples().iter().map(rows_of).collect();
    Scenario {
        name: "periodic-floquet".into(),
        description: Some(
            "Four periodic plants built from a rotating frame around a marginal \
             generator (characteristic exponents on the imaginary axis), coupled \
             by the invertible-B state law on a rotating-edge digraph; expects \
             synchronization to a common periodic solution."
                .into(),
        ),
        plant: PlantSpec {
            kind: "periodic".into(),
            a: None,
            b: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            c: None,
            period: Some(coeffs.period()),
            samples: Some(samples),
        },
        coupling: CouplingSpec {
            variant: "periodic-static-inverse-b".into(),
            k: None,
            h: None,
            epsilons: None,
        },
        graph: rotating_edge_graph(2.0, EdgeRotation::WithFlow),
        simulation: SimulationSpec {
            t0: 0.0,
            t_end: 40.0,
            step: 0.002,
            record_every: 25,
            seed: 46,
            amplitude: 1.0,
            initial_x: None,
            initial_eta: None,
            initial_xhat: None,
        },
        thresholds: ThresholdSpec::default(),
        certificates: CertificateSpec::default(),
        expect: ExpectSpec {
            synchronized: Some(true),
            uniformly_connected: Some(true),
            plant_hypotheses: Some(true),
            balanced_connected: None,
            passive: None,
        },
    }
}

/// Builds a built-in scenario by name.
pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "example1-dynamic" => Some(example1_dynamic()),
        "example1-static" => Some(example1_static()),
        "example2-dynamic" => Some(example2_dynamic()),
        "example2-static" => Some(example2_static()),
        "a1-passive-balanced" => Some(a1_passive_balanced()),
        "discrete-rotation" => Some(discrete_rotation()),
        "periodic-floquet" => Some(periodic_floquet()),
        _ => None,
    }
}

/// One catalog line per built-in.
pub fn catalog() -> String {
    let mut out = String::new();
    for name in BUILTIN_NAMES {
        let sc = builtin(name).expect("catalog names are buildable");
        out.push_str(&format!("{name}\n    {}\n", sc.description.unwrap_or_default()));
    }
    out
}

/// Full description of a built-in: a comment header plus the canonical TOML,
/// which re-parses to the identical scenario.
pub fn describe(name: &str) -> Option<String> {
    let sc = builtin(name)?;
    let mut out = String::new();
    out.push_str(&format!("# {name}\n"));
    if let Some(d) = &sc.description {
        out.push_str(&format!("# {d}\n"));
    }
    out.push_str("#\n");
    out.push_str(&sc.to_toml());
    Some(out)
}
