//! Plain-text exports.
//!
//! Numbers are written as `{:.16e}` (17 significant digits), which parses
//! back to the same `f64`. Grid headers use the shortest representation that
//! round-trips, so configured ranges appear as written (`0.9`, not
//! `9.0000000000000002e-1`).
//!
//! Policy grid:
//!
//! ```text
//! psl-policy 1
//! stage <min> <max> <res>
//! state <min> <max> <res>
//! size <stage nodes> <state nodes>
//! <omega> <tau_y> <cost>        one line per cell, row-major [stage][state]
//! ```
//!
//! Mask grid: same header with `psl-mask 1`, then one line per stage node
//! holding one `0`/`1` character per state node.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use psl_core::automaton::HybridTrace;
use psl_core::controller::{GridAxis, PolicyEntry, PolicyTable, RecoverabilityMask};
use psl_core::manifold::sigma_apex;
use psl_core::planner::{NominalPlan, TerrainSpec};

pub const TRAJECTORY_HEADER: &str = "t,zeta,mode,x,xd,y,yd,z,sigma,omega,tau_y,event";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("nothing to export: {0}")]
    Empty(&'static str),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_file(path: &Path, text: &str) -> Result<(), ExportError> {
    fs::write(path, text).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_file(path: &Path) -> Result<String, ExportError> {
    fs::read_to_string(path).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn trajectory_csv(trace: &HybridTrace) -> Result<String, ExportError> {
    if trace.records.is_empty() {
        return Err(ExportError::Empty("trace has no samples"));
    }
    let mut out = String::with_capacity(200 * (trace.records.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in &trace.records {
        let events: Vec<String> = r.events.iter().map(|e| e.label()).collect();
        let state = [
            r.sagittal.x,
            r.sagittal.xd,
            r.lateral.y,
            r.lateral.yd,
            r.z,
            r.sigma,
            r.control.omega,
            r.control.tau_y,
        ];
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(r.t),
            num(r.zeta),
            r.mode.label(),
            state.map(num).join(","),
            events.join(";")
        );
    }
    Ok(out)
}

pub fn export_trajectory(trace: &HybridTrace, path: &Path) -> Result<(), ExportError> {
    write_file(path, &trajectory_csv(trace)?)
}

/// Terrain footholds and surfaces, one row per step.
pub fn terrain_csv(t: &TerrainSpec) -> String {
    let mut out = String::from("step,foot_x,foot_y,foot_z,tilt,slope,offset\n");
    for (k, s) in t.steps.iter().enumerate() {
        let v = [s.foot.x, s.foot.y, s.foot.z, s.tilt, s.surface.slope, s.surface.offset];
        let _ = writeln!(out, "{k},{}", v.map(num).join(","));
    }
    out
}

/// Sampled nominal manifolds, with `σ` of each sample.
pub fn manifolds_csv(plan: &NominalPlan) -> String {
    let mut out = String::from("step,x,xd,sigma\n");
    for (k, step) in plan.steps.iter().enumerate() {
        let m = &step.manifold.descriptor;
        for s in &step.manifold.samples {
            let _ = writeln!(out, "{k},{},{},{}", num(s.x), num(s.xd), num(sigma_apex(s, m)));
        }
    }
    out
}

pub fn transitions_csv(plan: &NominalPlan) -> String {
    let mut out = String::from("from,to,x_trans,xdot_trans,zeta_trans\n");
    for (k, tr) in plan.transitions.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{},{},{}",
            k + 1,
            num(tr.x_trans),
            num(tr.xdot_trans),
            num(tr.zeta_trans)
        );
    }
    out
}

fn axis_line(name: &str, a: &GridAxis) -> String {
    format!("{name} {} {} {}\n", a.min, a.max, a.res)
}

fn grid_header(kind: &str, stage: &GridAxis, state: &GridAxis) -> String {
    let mut out = format!("{kind} 1\n");
    out.push_str(&axis_line("stage", stage));
    out.push_str(&axis_line("state", state));
    let _ = writeln!(out, "size {} {}", stage.count(), state.count());
    out
}

pub fn policy_text(t: &PolicyTable) -> String {
    let mut out = grid_header("psl-policy", &t.stage, &t.state);
    for e in &t.entries {
        let _ = writeln!(out, "{} {} {}", num(e.omega), num(e.tau_y), num(e.cost));
    }
    out
}

pub fn mask_text(m: &RecoverabilityMask) -> String {
    let mut out = grid_header("psl-mask", &m.stage, &m.state);
    for row in m.cells.chunks(m.state.count()) {
        out.extend(row.iter().map(|&c| if c { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

pub fn export_policy(t: &PolicyTable, path: &Path) -> Result<(), ExportError> {
    write_file(path, &policy_text(t))
}

pub fn export_mask(m: &RecoverabilityMask, path: &Path) -> Result<(), ExportError> {
    write_file(path, &mask_text(m))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), ExportError> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or(ExportError::Format {
                line: 0,
                reason: format!("missing {what}"),
            })
    }
}

fn bad(line: usize, reason: impl Into<String>) -> ExportError {
    ExportError::Format {
        line,
        reason: reason.into(),
    }
}

fn parse_f64(line: usize, s: &str) -> Result<f64, ExportError> {
    s.parse().map_err(|_| bad(line, format!("not a number: {s:?}")))
}

fn parse_header<'a>(text: &'a str, kind: &str) -> Result<(GridAxis, GridAxis, Lines<'a>), ExportError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (n, l) = lines.next("header")?;
    if l != format!("{kind} 1") {
        return Err(bad(n, format!("expected \"{kind} 1\"")));
    }
    let mut axis = |name: &str| -> Result<GridAxis, ExportError> {
        let (n, l) = lines.next(name)?;
        let f: Vec<&str> = l.split(' ').collect();
        if f.len() != 4 || f[0] != name {
            return Err(bad(n, format!("expected \"{name} <min> <max> <res>\"")));
        }
        Ok(GridAxis::new(parse_f64(n, f[1])?, parse_f64(n, f[2])?, parse_f64(n, f[3])?))
    };
    let stage = axis("stage")?;
    let state = axis("state")?;
    let (n, l) = lines.next("size")?;
    let f: Vec<&str> = l.split(' ').collect();
    let size = |s: &str| s.parse::<usize>().map_err(|_| bad(n, format!("not a count: {s:?}")));
    if f.len() != 3 || f[0] != "size" {
        return Err(bad(n, "expected \"size <stages> <states>\""));
    }
    if (size(f[1])?, size(f[2])?) != (stage.count(), state.count()) {
        return Err(bad(n, "size does not match the axes"));
    }
    Ok((stage, state, lines))
}

pub fn parse_policy(text: &str) -> Result<PolicyTable, ExportError> {
    let (stage, state, lines) = parse_header(text, "psl-policy")?;
    let mut entries = Vec::with_capacity(stage.count() * state.count());
    for (i, l) in lines.inner {
        let f: Vec<&str> = l.split(' ').collect();
        if f.len() != 3 {
            return Err(bad(i + 1, "expected \"<omega> <tau_y> <cost>\""));
        }
        entries.push(PolicyEntry {
            omega: parse_f64(i + 1, f[0])?,
            tau_y: parse_f64(i + 1, f[1])?,
            cost: parse_f64(i + 1, f[2])?,
        });
    }
    if entries.len() != stage.count() * state.count() {
        return Err(bad(0, format!("{} cells, expected {}", entries.len(), stage.count() * state.count())));
    }
    Ok(PolicyTable { stage, state, entries })
}

pub fn parse_mask(text: &str) -> Result<RecoverabilityMask, ExportError> {
    let (stage, state, lines) = parse_header(text, "psl-mask")?;
    let mut cells = Vec::with_capacity(stage.count() * state.count());
    let mut rows = 0;
    for (i, l) in lines.inner {
        if l.len() != state.count() {
            return Err(bad(i + 1, format!("{} cells, expected {}", l.len(), state.count())));
        }
        for c in l.chars() {
            cells.push(match c {
                '0' => false,
                '1' => true,
                _ => return Err(bad(i + 1, format!("unexpected {c:?}"))),
            });
        }
        rows += 1;
    }
    if rows != stage.count() {
        return Err(bad(0, format!("{rows} rows, expected {}", stage.count())));
    }
    Ok(RecoverabilityMask { stage, state, cells })
}

pub fn import_policy(path: &Path) -> Result<PolicyTable, ExportError> {
    parse_policy(&read_file(path)?)
}

pub fn import_mask(path: &Path) -> Result<RecoverabilityMask, ExportError> {
    parse_mask(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use psl_core::controller::{estimate_recoverability, ControlAxis, DpConfig};

    fn small() -> DpConfig {
        DpConfig {
            stage: GridAxis::new(1.0, 1.2, 0.02),
            state: GridAxis::new(0.4, 1.0, 0.02),
            omega: ControlAxis::new(2.83, 3.43, 5),
            tau: ControlAxis::new(-3.0, 3.0, 5),
            ..Default::default()
        }
    }

    #[test]
    fn policy_and_mask_round_trip() {
        let (table, mask) = estimate_recoverability(&small(), 5e-4, 1e-3).unwrap();
        let text = policy_text(&table);
        let back = parse_policy(&text).unwrap();
        assert_eq!(back, table);
        assert_eq!(policy_text(&back), text);
        let text = mask_text(&mask);
        let back = parse_mask(&text).unwrap();
        assert_eq!(back, mask);
        assert_eq!(mask_text(&back), text);
        assert_eq!(back.cells.len(), mask.stage.count() * mask.state.count());
    }

    #[test]
    fn default_header_is_verbatim() {
        let cfg = DpConfig::default();
        let head = grid_header("psl-mask", &cfg.stage, &cfg.state);
        assert_eq!(head, "psl-mask 1\nstage 0.9 1.5 0.01\nstate 0.03 1.5 0.01\nsize 61 148\n");
    }

    #[test]
    fn malformed_grids_are_rejected() {
        let (table, mask) = estimate_recoverability(&small(), 5e-4, 1e-3).unwrap();
        let text = policy_text(&table);
        let short: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(parse_policy(&short).is_err());
        assert!(parse_policy(&text.replace("psl-policy", "psl-mask")).is_err());
        let m = mask_text(&mask).replacen("size 11", "size 12", 1);
        assert!(parse_mask(&m).is_err());
    }

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-3.0), "-3.0000000000000000e0");
        for v in [0.1, 1.0 / 3.0, 6.02e23, -1e-300, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
