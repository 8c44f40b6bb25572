//! Trace and report serialization.

use std::io::Write;
use std::path::Path;
use syncnet_core::controllers::StateLayout;
use syncnet_core::simkit::SimulationTrace;

/// Renders a trace as CSV: `time`, per-agent state coordinates, controller
/// and observer coordinates when present, and the disagreement norm.
pub fn trace_csv(trace: &SimulationTrace<f64>, layout: StateLayout) -> String {
    let mut out = String::new();
    out.push_str("time");
    let block = |out: &mut String, prefix: &str| {
        for agent in 1..=layout.agents {
            for coord in 1..=layout.state_dim {
                out.push_str(&format!(",{prefix}{agent}_{coord}"));
            }
        }
    };
    block(&mut out, "x");
    if layout.has_eta {
        block(&mut out, "eta");
    }
    if layout.has_xhat {
        block(&mut out, "xhat");
    }
    out.push_str(",disagreement\n");

    for (i, t) in trace.times.iter().enumerate() {
        let state = &trace.states[i];
        out.push_str(&format!("{t}"));
        for v in state.x.iter() {
            out.push_str(&format!(",{v}"));
        }
        if let Some(eta) = &state.eta {
            for v in eta.iter() {
                out.push_str(&format!(",{v}"));
            }
        }
        if let Some(xhat) = &state.xhat {
            for v in xhat.iter() {
                out.push_str(&format!(",{v}"));
            }
        }
        out.push_str(&format!(",{}\n", trace.disagreement[i]));
    }
    out
}

pub fn write_trace_csv(
    path: &Path,
    trace: &SimulationTrace<f64>,
    layout: StateLayout,
) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(trace_csv(trace, layout).as_bytes())
}

pub fn write_summary_json(path: &Path, summary: &serde_json::Value) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(serde_json::to_string_pretty(summary).expect("serializable").as_bytes())?;
    file.write_all(b"\n")
}
