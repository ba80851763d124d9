//! Tab-separated result tables.
//!
//! Cell rows: `policy  x  seed  mse`. Summary rows: `policy  x  mean  std  seeds`.
//! MSE values are raw (not scaled by 10). Lines starting with `#` are comments.

use std::fmt::Write as _;

use super::{Cell, MseReport, PolicyKind, SweepCurve};

pub fn format_cells(x_name: &str, cells: &[Cell]) -> String {
    let mut out = format!("# cells\npolicy\t{x_name}\tseed\tmse\n");
    for c in cells {
        writeln!(out, "{}\t{}\t{}\t{:.6}", c.policy, c.x, c.seed, c.mse).unwrap();
    }
    out
}

pub fn format_curves(x_name: &str, curves: &[(PolicyKind, SweepCurve)]) -> String {
    let mut out = format!("# summary\npolicy\t{x_name}\tmean\tstd\tseeds\n");
    for (kind, curve) in curves {
        for p in &curve.points {
            writeln!(
                out,
                "{kind}\t{}\t{:.6}\t{:.6}\t{}",
                p.x,
                p.mse,
                p.std,
                curve.seeds.len()
            )
            .unwrap();
        }
    }
    out
}

/// `policy  frames  mse  mse_x10  config`.
pub fn format_reports(reports: &[MseReport]) -> String {
    let mut out = String::from("policy\tframes\tmse\tmse_x10\tconfig\n");
    for r in reports {
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.4}\t{}",
            r.policy,
            r.frames,
            r.mse,
            r.mse_x10(),
            r.config
        )
        .unwrap();
    }
    out
}
