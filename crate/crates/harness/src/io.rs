//! Text formats: edge lists, matrix and vector CSV files, float rendering.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use gossip_core::localization::OrientedGraph;
use gossip_core::pagerank::WebGraph;
use gossip_core::{DenseMatrix, Vector};

use crate::error::{HarnessError, Result};

/// Renders a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Parsed edge list before any graph-specific validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Whitespace-separated `i j` pairs with 0-based ids. `#` starts a comment,
/// blank lines are ignored, and an optional `nodes=N` line fixes the node
/// count (otherwise it is the largest id plus one).
pub fn parse_edge_list(text: &str, origin: &str) -> Result<EdgeList> {
    let err = |line: usize, message: String| HarnessError::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut declared: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut max_id: Option<(usize, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("nodes") {
            let value = rest
                .trim_start()
                .strip_prefix('=')
                .ok_or_else(|| err(line_no, format!("expected `nodes=N`, got `{line}`")))?;
            let n = value
                .trim()
                .parse::<usize>()
                .map_err(|_| err(line_no, format!("bad node count `{}`", value.trim())))?;
            if declared.is_some() {
                return Err(err(line_no, "repeated `nodes=` header".into()));
            }
            declared = Some((n, line_no));
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(err(line_no, format!("expected two node ids, got `{line}`")));
        };
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| err(line_no, format!("bad node id `{t}`")))
        };
        let (i, j) = (parse(a)?, parse(b)?);
        if !seen.insert((i, j)) {
            return Err(err(line_no, format!("duplicate edge ({i}, {j})")));
        }
        let top = i.max(j);
        if max_id.is_none_or(|(m, _)| top > m) {
            max_id = Some((top, line_no));
        }
        edges.push((i, j));
    }
    let nodes = match (declared, max_id) {
        (Some((n, _)), Some((m, line))) if m >= n => {
            return Err(err(line, format!("node id {m} is outside nodes={n}")));
        }
        (Some((n, _)), _) => n,
        (None, Some((m, _))) => m + 1,
        (None, None) => 0,
    };
    Ok(EdgeList { nodes, edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// Undirected measurement graph stored with `i < j`.
    Oriented,
    /// Directed link graph.
    Directed,
}

#[derive(Debug, Clone)]
pub enum LoadedGraph {
    Oriented(OrientedGraph),
    Directed(WebGraph),
}

fn invalid(e: gossip_core::Error) -> HarnessError {
    HarnessError::Validation(format!("{}: {e}", e.class_name()))
}

pub fn graph_from_edge_list(list: EdgeList, kind: GraphKind) -> Result<LoadedGraph> {
    match kind {
        GraphKind::Oriented => OrientedGraph::new(list.nodes, list.edges)
            .map(LoadedGraph::Oriented)
            .map_err(invalid),
        GraphKind::Directed => WebGraph::new(list.nodes, list.edges)
            .map(LoadedGraph::Directed)
            .map_err(invalid),
    }
}

pub fn load_graph(path: &Path, kind: GraphKind) -> Result<LoadedGraph> {
    let text = read_text(path)?;
    graph_from_edge_list(parse_edge_list(&text, &path.display().to_string())?, kind)
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_number(token: &str, origin: &str, line: usize) -> Result<f64> {
    let value = token.trim().parse::<f64>().map_err(|_| HarnessError::Parse {
        path: origin.to_string(),
        line,
        message: format!("bad number `{}`", token.trim()),
    })?;
    if !value.is_finite() {
        return Err(HarnessError::Parse {
            path: origin.to_string(),
            line,
            message: format!("non-finite value `{}`", token.trim()),
        });
    }
    Ok(value)
}

/// `n` header-less rows of `n` comma-separated values.
pub fn parse_matrix_csv(text: &str, origin: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, content) in data_lines(text) {
        let row = content
            .split(',')
            .map(|t| parse_number(t, origin, line))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(HarnessError::Parse {
                    path: origin.to_string(),
                    line,
                    message: format!("expected {} values, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows.len() != rows[0].len() {
        return Err(HarnessError::Validation(format!(
            "{origin}: expected a square matrix, found {} rows of {} values",
            rows.len(),
            rows.first().map_or(0, Vec::len)
        )));
    }
    DenseMatrix::from_rows(&rows).map_err(invalid)
}

/// One value per line.
pub fn parse_vector_csv(text: &str, origin: &str) -> Result<Vector> {
    data_lines(text)
        .map(|(line, content)| {
            if content.contains(',') {
                return Err(HarnessError::Parse {
                    path: origin.to_string(),
                    line,
                    message: "expected a single column".into(),
                });
            }
            parse_number(content, origin, line)
        })
        .collect()
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    parse_matrix_csv(&read_text(path)?, &path.display().to_string())
}

pub fn load_vector(path: &Path) -> Result<Vector> {
    parse_vector_csv(&read_text(path)?, &path.display().to_string())
}
