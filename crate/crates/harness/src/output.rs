//! Recorded trajectories, their CSV forms and plot-ready extracts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};
use crate::io::format_float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
}

impl Cell {
    pub fn as_f64(self) -> f64 {
        match self {
            Cell::Int(v) => v as f64,
            Cell::Float(v) => v,
        }
    }

    fn render(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(v),
        }
    }
}

/// Run provenance. Kept out of the CSV bodies so they stay reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub seed: u64,
    pub replication: u64,
    pub config_hash: String,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: u64,
    /// `nodes[i][f]` is node field `f` at node `i`.
    pub nodes: Vec<Vec<Cell>>,
    pub metrics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    /// File stem, e.g. `localize_gossip_rep0`.
    pub name: String,
    pub meta: Metadata,
    pub node_fields: Vec<String>,
    pub metric_fields: Vec<String>,
    /// Index into `metric_fields` of the distance to the scenario's oracle.
    pub error_field: Option<usize>,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn new(name: impl Into<String>, node_fields: &[&str], metric_fields: &[&str]) -> Self {
        TrajectoryLog {
            name: name.into(),
            meta: Metadata::default(),
            node_fields: node_fields.iter().map(|s| s.to_string()).collect(),
            metric_fields: metric_fields.iter().map(|s| s.to_string()).collect(),
            error_field: None,
            rows: Vec::new(),
        }
    }

    pub fn with_error_field(mut self, field: &str) -> Self {
        self.error_field = self.metric_fields.iter().position(|f| f == field);
        self
    }

    /// Appends a row; steps must strictly increase.
    pub fn push(&mut self, row: LogRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(HarnessError::Validation(format!(
                    "log rows must increase in step: {} after {}",
                    row.step, last.step
                )));
            }
        }
        if row.metrics.len() != self.metric_fields.len()
            || row.nodes.iter().any(|n| n.len() != self.node_fields.len())
        {
            return Err(HarnessError::Validation("log row does not match its columns".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// Last value of the error metric, if the log has one.
    pub fn final_error(&self) -> Option<f64> {
        let f = self.error_field?;
        self.rows.last().map(|r| r.metrics[f])
    }

    /// Long format, `step,node,<node fields>`. `None` without node fields.
    pub fn trajectory_csv(&self) -> Option<String> {
        if self.node_fields.is_empty() {
            return None;
        }
        let mut out = format!("step,node,{}\n", self.node_fields.join(","));
        for row in &self.rows {
            for (node, cells) in row.nodes.iter().enumerate() {
                let _ = write!(out, "{},{}", row.step, node);
                for c in cells {
                    out.push(',');
                    out.push_str(&c.render());
                }
                out.push('\n');
            }
        }
        Some(out)
    }

    /// Wide format, `step,<metric fields>`. `None` without metrics.
    pub fn metrics_csv(&self) -> Option<String> {
        if self.metric_fields.is_empty() {
            return None;
        }
        let mut out = format!("step,{}\n", self.metric_fields.join(","));
        for row in &self.rows {
            out.push_str(&row.step.to_string());
            for &m in &row.metrics {
                out.push(',');
                out.push_str(&format_float(m));
            }
            out.push('\n');
        }
        Some(out)
    }

    /// Writes `<name>_trajectory.csv` and `<name>_metrics.csv` as applicable.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (suffix, body) in [
            ("trajectory", self.trajectory_csv()),
            ("metrics", self.metrics_csv()),
        ] {
            if let Some(body) = body {
                let path = dir.join(format!("{}_{suffix}.csv", self.name));
                fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))?;
                written.push(path);
            }
        }
        Ok(written)
    }

    /// Reads back either CSV form written by [`TrajectoryLog::write`].
    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, message: String| HarnessError::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"step") {
            return Err(err(1, "first column must be `step`".into()));
        }
        let long = cols.get(1) == Some(&"node");
        let fields: Vec<&str> = cols[if long { 2 } else { 1 }..].to_vec();
        let name = Path::new(origin)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("log")
            .to_string();
        let mut log = if long {
            TrajectoryLog::new(name, &fields, &[])
        } else {
            let log = TrajectoryLog::new(name, &[], &fields);
            let error = fields
                .iter()
                .position(|f| f.starts_with("error") || f.starts_with("l1_error"));
            TrajectoryLog { error_field: error, ..log }
        };
        for (idx, raw) in lines {
            let line_no = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let tokens: Vec<&str> = raw.split(',').map(str::trim).collect();
            if tokens.len() != cols.len() {
                return Err(err(
                    line_no,
                    format!("expected {} values, found {}", cols.len(), tokens.len()),
                ));
            }
            let step = tokens[0]
                .parse::<u64>()
                .map_err(|_| err(line_no, format!("bad step `{}`", tokens[0])))?;
            let float = |t: &str| {
                t.parse::<f64>()
                    .map_err(|_| err(line_no, format!("bad number `{t}`")))
            };
            if long {
                let node = tokens[1]
                    .parse::<usize>()
                    .map_err(|_| err(line_no, format!("bad node `{}`", tokens[1])))?;
                let cells = tokens[2..]
                    .iter()
                    .map(|t| match t.parse::<u64>() {
                        Ok(v) => Ok(Cell::Int(v)),
                        Err(_) => float(t).map(Cell::Float),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let same_step = log.rows.last().is_some_and(|r| r.step == step);
                if !same_step {
                    log.push(LogRow { step, nodes: Vec::new(), metrics: Vec::new() })
                        .map_err(|e| err(line_no, e.to_string()))?;
                }
                let row = log.rows.last_mut().expect("row just ensured");
                if node != row.nodes.len() {
                    return Err(err(line_no, format!("expected node {}, found {node}", row.nodes.len())));
                }
                row.nodes.push(cells);
            } else {
                let metrics = tokens[1..].iter().map(|t| float(t)).collect::<Result<Vec<_>>>()?;
                log.push(LogRow { step, nodes: Vec::new(), metrics })
                    .map_err(|e| err(line_no, e.to_string()))?;
            }
        }
        Ok(log)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `step,node0,node1,...` for one node field.
    Trajectory,
    /// `step,<error>` against the scenario's oracle.
    ErrorCurve,
}

impl std::str::FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trajectory" => Ok(PlotKind::Trajectory),
            "error-curve" => Ok(PlotKind::ErrorCurve),
            other => Err(HarnessError::Config(format!("unknown plot kind `{other}`"))),
        }
    }
}

/// Plot-ready CSV. `field` picks the node field for trajectories and
/// defaults to the first one.
pub fn emit_plot_data(log: &TrajectoryLog, kind: PlotKind, field: Option<&str>) -> Result<String> {
    if log.rows.is_empty() {
        return Err(HarnessError::EmptyLog);
    }
    match kind {
        PlotKind::ErrorCurve => {
            let f = log.error_field.ok_or_else(|| {
                HarnessError::Config(format!("log `{}` has no oracle error column", log.name))
            })?;
            let mut out = format!("step,{}\n", log.metric_fields[f]);
            for row in &log.rows {
                let _ = writeln!(out, "{},{}", row.step, format_float(row.metrics[f]));
            }
            Ok(out)
        }
        PlotKind::Trajectory => {
            let f = match field {
                Some(name) => log.node_fields.iter().position(|n| n == name).ok_or_else(|| {
                    HarnessError::Config(format!("log `{}` has no node field `{name}`", log.name))
                })?,
                None if log.node_fields.is_empty() => {
                    return Err(HarnessError::Config(format!(
                        "log `{}` has no per-node data",
                        log.name
                    )))
                }
                None => 0,
            };
            let n = log.rows[0].nodes.len();
            let mut out = String::from("step");
            for i in 0..n {
                let _ = write!(out, ",node{i}");
            }
            out.push('\n');
            for row in &log.rows {
                out.push_str(&row.step.to_string());
                for cells in &row.nodes {
                    out.push(',');
                    out.push_str(&cells[f].render());
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrajectoryLog {
        let mut log = TrajectoryLog::new("demo", &["x", "kappa"], &["error_x"]).with_error_field("error_x");
        for step in [0, 10, 20] {
            log.push(LogRow {
                step,
                nodes: vec![
                    vec![Cell::Float(step as f64 * 0.5), Cell::Int(step)],
                    vec![Cell::Float(-1.0), Cell::Int(0)],
                ],
                metrics: vec![1.0 / (1.0 + step as f64)],
            })
            .unwrap();
        }
        log
    }

    #[test]
    fn steps_must_increase() {
        let mut log = sample();
        let row = log.rows[0].clone();
        assert!(log.push(row).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let log = sample();
        let traj = log.trajectory_csv().unwrap();
        assert!(traj.starts_with("step,node,x,kappa\n0,0,0.0000000000000000e0,0\n"));
        let back = TrajectoryLog::from_csv(&traj, "demo_trajectory.csv").unwrap();
        assert_eq!(back.rows.len(), 3);
        assert_eq!(back.rows[2].nodes, log.rows[2].nodes);

        let metrics = TrajectoryLog::from_csv(&log.metrics_csv().unwrap(), "m.csv").unwrap();
        assert_eq!(metrics.error_field, Some(0));
        assert_eq!(metrics.rows[1].metrics, log.rows[1].metrics);
    }

    #[test]
    fn plot_data_examples() {
        let mut one = sample();
        one.rows.truncate(1);
        let curve = emit_plot_data(&one, PlotKind::ErrorCurve, None).unwrap();
        assert_eq!(curve.lines().count(), 2);
        let traj = emit_plot_data(&sample(), PlotKind::Trajectory, Some("kappa")).unwrap();
        assert_eq!(traj.lines().next(), Some("step,node0,node1"));
        assert_eq!(traj.lines().nth(3), Some("20,20,0"));

        let mut no_oracle = sample();
        no_oracle.error_field = None;
        let err = emit_plot_data(&no_oracle, PlotKind::ErrorCurve, None).unwrap_err();
        assert_eq!(err.class_name(), "ConfigError");

        let mut empty = sample();
        empty.rows.clear();
        assert!(matches!(
            emit_plot_data(&empty, PlotKind::Trajectory, None),
            Err(HarnessError::EmptyLog)
        ));
    }
}
