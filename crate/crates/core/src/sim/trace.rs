//! Plain-text rollout traces.
//!
//! ```text
//! # vinn-trace v1 seed=<seed> steps=<n> grasped=<0|1> opened=<0|1>
//! step<TAB>obs<TAB>action<TAB>gripper<TAB>distance<TAB>progress<TAB>grasped
//! 0<TAB>-1.5,0.31,...<TAB>-0.98,-0.2,0<TAB>Open<TAB>0.142<TAB>0<TAB>0
//! ```
//!
//! `obs` is the observation the controller acted on; `distance`, `progress`
//! and `grasped` describe the state after the action. Vectors are
//! comma-separated shortest round-trip decimals.

use std::fmt::Write as _;

use super::RolloutResult;

pub const TRACE_HEADER: &str = "step\tobs\taction\tgripper\tdistance\tprogress\tgrasped";

fn join(v: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{x}").unwrap();
    }
    s
}

pub fn format_trace(result: &RolloutResult, seed: u64) -> String {
    let mut out = format!(
        "# vinn-trace v1 seed={seed} steps={} grasped={} opened={}\n{TRACE_HEADER}\n",
        result.steps_taken, result.handle_grasped as u8, result.door_opened as u8
    );
    for s in &result.trace {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.step,
            join(&s.obs),
            join(&s.action.translation),
            s.action.gripper,
            s.handle_distance,
            s.door_progress,
            s.grasped as u8
        )
        .unwrap();
    }
    out
}
