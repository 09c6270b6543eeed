//! Spreading activation over a single layer.
//!
//! Updates are synchronous. At each step every node keeps `retention` of
//! its activation and sends the rest to its neighbours in proportion to edge
//! weight; isolated nodes keep everything. `decay` then scales all
//! activation by `1 − decay` and values below `suppress` are zeroed.
//!
//! Incoming contributions are summed in ascending order of value, so a
//! node's new activation depends only on the multiset of what it receives.
//! That makes results exactly equivariant under node relabelling and exactly
//! equal on nodes related by a graph automorphism.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Adjacency, NodeId, WeightedGraph, WordTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActivationError {
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("prime {0:?} is not a node of the layer")]
    UnknownPrime(NodeId),
    #[error("none of the primes occur in the layer")]
    NoPrimesPresent,
    #[error("invalid spreading parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadParams {
    pub initial_activation: f64,
    pub time_steps: usize,
    pub retention: f64,
    pub decay: f64,
    pub suppress: f64,
}

impl SpreadParams {
    pub fn validate(&self) -> Result<(), ActivationError> {
        let bad = |m: &str| Err(ActivationError::InvalidParams(m.to_string()));
        if !(self.initial_activation.is_finite() && self.initial_activation > 0.0) {
            return bad("initial_activation must be positive");
        }
        if self.time_steps == 0 {
            return bad("time_steps must be positive");
        }
        if !(0.0..=1.0).contains(&self.retention) {
            return bad("retention must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return bad("decay must lie in [0, 1]");
        }
        if !(self.suppress >= 0.0) {
            return bad("suppress must be non-negative");
        }
        Ok(())
    }
}

/// Optional user settings. Missing fields fall back to the layer-dependent
/// defaults: initial activation = node count, steps = twice the diameter,
/// retention 0.5, no decay, no suppression.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpreadOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_activation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppress: Option<f64>,
}

impl SpreadOverrides {
    /// Resolves against `g`; the diameter is only computed when the step
    /// count is not overridden.
    pub fn resolve(&self, g: &WeightedGraph, mode: DiameterMode) -> Result<(SpreadParams, Option<Diameter>), ActivationError> {
        let diam = match self.time_steps {
            Some(_) => None,
            None => Some(diameter(g, mode)?),
        };
        let params = SpreadParams {
            initial_activation: self.initial_activation.unwrap_or(g.node_count() as f64),
            time_steps: self.time_steps.unwrap_or_else(|| 2 * diam.map_or(1, |d| d.value).max(1)),
            retention: self.retention.unwrap_or(0.5),
            decay: self.decay.unwrap_or(0.0),
            suppress: self.suppress.unwrap_or(0.0),
        };
        params.validate()?;
        Ok((params, diam))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiameterMode {
    /// Breadth-first search from every node.
    Exact,
    /// iFUB with a cap on the number of breadth-first searches.
    Approx { max_bfs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diameter {
    pub value: usize,
    /// False when the search budget ran out and `value` is a lower bound.
    pub exact: bool,
    pub bfs_runs: usize,
}

fn eccentricity(adj: &Adjacency, source: usize) -> Result<(usize, Vec<usize>), ActivationError> {
    let dist = adj.bfs(source);
    let mut ecc = 0;
    for &d in &dist {
        if d == usize::MAX {
            return Err(ActivationError::Disconnected);
        }
        ecc = ecc.max(d);
    }
    Ok((ecc, dist))
}

/// Unweighted hop diameter of a connected graph.
pub fn diameter(g: &WeightedGraph, mode: DiameterMode) -> Result<Diameter, ActivationError> {
    let adj = g.adjacency();
    if adj.is_empty() {
        return Err(ActivationError::EmptyGraph);
    }
    eccentricity(&adj, 0)?;
    match mode {
        DiameterMode::Exact => {
            let value = (0..adj.len())
                .into_par_iter()
                .map(|s| adj.bfs(s).into_iter().max().unwrap_or(0))
                .max()
                .unwrap_or(0);
            Ok(Diameter { value, exact: true, bfs_runs: adj.len() })
        }
        DiameterMode::Approx { max_bfs } => ifub(&adj, max_bfs.max(4)),
    }
}

fn farthest(dist: &[usize]) -> usize {
    // first node at maximum distance, for determinism
    let max = *dist.iter().max().unwrap_or(&0);
    dist.iter().position(|&d| d == max).unwrap_or(0)
}

/// Node halfway along a shortest `from`–`to` path.
fn midpoint(adj: &Adjacency, dist_from: &[usize], to: usize) -> usize {
    let steps = dist_from[to] / 2;
    let mut cur = to;
    for _ in 0..steps {
        cur = *adj.neighbors(cur).iter().find(|&&v| dist_from[v] + 1 == dist_from[cur]).expect("shortest path");
    }
    cur
}

fn ifub(adj: &Adjacency, max_bfs: usize) -> Result<Diameter, ActivationError> {
    let runs = std::cell::Cell::new(0usize);
    let bfs = |s: usize| {
        runs.set(runs.get() + 1);
        eccentricity(adj, s)
    };
    // 4-sweep from the highest-degree node to choose a central start
    let r1 = (0..adj.len()).max_by_key(|&i| (adj.degree(i), std::cmp::Reverse(i))).unwrap_or(0);
    let (_, d_r1) = bfs(r1)?;
    let a1 = farthest(&d_r1);
    let (ecc_a1, d_a1) = bfs(a1)?;
    let b1 = farthest(&d_a1);
    let r2 = midpoint(adj, &d_a1, b1);
    let (_, d_r2) = bfs(r2)?;
    let a2 = farthest(&d_r2);
    let (ecc_a2, d_a2) = bfs(a2)?;
    let b2 = farthest(&d_a2);
    let u = midpoint(adj, &d_a2, b2);
    let (ecc_u, d_u) = bfs(u)?;

    let mut lower = ecc_a1.max(ecc_a2).max(ecc_u);
    let mut upper = 2 * ecc_u;
    let mut level = ecc_u;
    let mut fringes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &d) in d_u.iter().enumerate() {
        fringes.entry(d).or_default().push(v);
    }
    while upper > lower {
        let mut level_max = 0;
        for &v in fringes.get(&level).map(Vec::as_slice).unwrap_or(&[]) {
            if runs.get() >= max_bfs {
                return Ok(Diameter { value: lower.max(level_max), exact: false, bfs_runs: runs.get() });
            }
            level_max = level_max.max(bfs(v)?.0);
        }
        lower = lower.max(level_max);
        if level == 0 {
            break;
        }
        // every node at depth < level has eccentricity <= 2(level - 1)
        upper = upper.min(2 * (level - 1));
        if lower >= upper {
            break;
        }
        level -= 1;
    }
    Ok(Diameter { value: lower, exact: true, bfs_runs: runs.get() })
}

/// Final activation of every node after one spreading run.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationVector {
    pub prime: NodeId,
    pub params: SpreadParams,
    pub nodes: Vec<NodeId>,
    pub values: Vec<f64>,
}

impl ActivationVector {
    pub fn get(&self, node: NodeId) -> Option<f64> {
        self.nodes.binary_search(&node).ok().map(|i| self.values[i])
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Precomputed transition shares for repeated runs on one graph.
pub struct Spreader {
    adj: Adjacency,
    /// For each node, `(source, w_source,node / strength_source)` over its neighbours.
    inflow: Vec<Vec<(usize, f64)>>,
}

fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

impl Spreader {
    pub fn new(g: &WeightedGraph) -> Self {
        let adj = g.adjacency();
        let strength: Vec<f64> = (0..adj.len()).map(|i| ordered_sum(&mut adj.neighbor_weights(i).to_vec())).collect();
        let inflow = (0..adj.len())
            .map(|j| {
                adj.neighbors(j)
                    .iter()
                    .zip(adj.neighbor_weights(j))
                    .map(|(&i, &w)| (i, w / strength[i]))
                    .collect()
            })
            .collect();
        Spreader { adj, inflow }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Runs the process and calls `observe(step, activations)` after each step.
    pub fn run_observed<F: FnMut(usize, &[f64])>(
        &self,
        prime: NodeId,
        p: &SpreadParams,
        mut observe: F,
    ) -> Result<ActivationVector, ActivationError> {
        p.validate()?;
        let start = self.adj.local_index(prime).ok_or(ActivationError::UnknownPrime(prime))?;
        let n = self.adj.len();
        let mut a = vec![0.0; n];
        a[start] = p.initial_activation;
        let mut next = vec![0.0; n];
        let mut buf = Vec::new();
        let outflow = 1.0 - p.retention;
        for step in 1..=p.time_steps {
            for j in 0..n {
                let keep = if self.adj.degree(j) == 0 { a[j] } else { p.retention * a[j] };
                buf.clear();
                buf.extend(self.inflow[j].iter().filter(|(i, _)| a[*i] != 0.0).map(|&(i, share)| a[i] * outflow * share));
                buf.push(keep);
                next[j] = ordered_sum(&mut buf);
            }
            if p.decay > 0.0 || p.suppress > 0.0 {
                for x in next.iter_mut() {
                    *x *= 1.0 - p.decay;
                    if *x < p.suppress {
                        *x = 0.0;
                    }
                }
            }
            std::mem::swap(&mut a, &mut next);
            observe(step, &a);
        }
        Ok(ActivationVector { prime, params: *p, nodes: self.adj.nodes().to_vec(), values: a })
    }

    pub fn run(&self, prime: NodeId, p: &SpreadParams) -> Result<ActivationVector, ActivationError> {
        self.run_observed(prime, p, |_, _| {})
    }
}

pub fn spread(g: &WeightedGraph, prime: NodeId, p: &SpreadParams) -> Result<ActivationVector, ActivationError> {
    Spreader::new(g).run(prime, p)
}

/// Primes × targets final activations, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationMatrix {
    pub primes: Vec<String>,
    pub targets: Vec<String>,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl ActivationMatrix {
    pub fn new(primes: Vec<String>, targets: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), primes.len() * targets.len(), "matrix shape");
        ActivationMatrix { primes, targets, values, normalized: false }
    }

    pub fn rows(&self) -> usize {
        self.primes.len()
    }

    pub fn cols(&self) -> usize {
        self.targets.len()
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.targets.len() + col]
    }

    pub fn get(&self, prime: &str, target: &str) -> Option<f64> {
        let r = self.primes.iter().position(|p| p == prime)?;
        let c = self.targets.iter().position(|t| t == target)?;
        Some(self.at(r, c))
    }

    /// Column subset, in the given order.
    pub fn select_columns(&self, targets: &[String]) -> ActivationMatrix {
        let idx: Vec<usize> = targets.iter().filter_map(|t| self.targets.iter().position(|x| x == t)).collect();
        let mut values = Vec::with_capacity(self.rows() * idx.len());
        for r in 0..self.rows() {
            values.extend(idx.iter().map(|&c| self.at(r, c)));
        }
        ActivationMatrix {
            primes: self.primes.clone(),
            targets: idx.iter().map(|&c| self.targets[c].clone()).collect(),
            values,
            normalized: self.normalized,
        }
    }

    /// Header row of targets, then one row per prime.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("prime");
        for t in &self.targets {
            out.push(',');
            out.push_str(&csv_field(t));
        }
        out.push('\n');
        for (r, p) in self.primes.iter().enumerate() {
            out.push_str(&csv_field(p));
            for c in 0..self.cols() {
                out.push_str(&format!(",{}", self.at(r, c)));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, normalized: bool) -> Result<Self, String> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| e.to_string())?.clone();
        let targets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut primes = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            if rec.len() != targets.len() + 1 {
                return Err(format!("row for {:?} has {} fields", rec.get(0), rec.len()));
            }
            primes.push(rec[0].to_string());
            for v in rec.iter().skip(1) {
                values.push(v.parse::<f64>().map_err(|e| e.to_string())?);
            }
        }
        Ok(ActivationMatrix { primes, targets, values, normalized })
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Which requested words a layer lacks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub missing_primes: Vec<String>,
    pub missing_targets: Vec<String>,
}

/// One spreading run per prime present in `g`; absent words are left out
/// of the matrix and listed in the coverage report.
pub fn activation_matrix(
    g: &WeightedGraph,
    words: &WordTable,
    primes: &[String],
    targets: &[String],
    p: &SpreadParams,
) -> Result<(ActivationMatrix, Coverage), ActivationError> {
    let present = |w: &String| words.get(w).filter(|&id| g.contains_node(id));
    let mut coverage = Coverage::default();
    let mut prime_ids = Vec::new();
    for w in primes {
        match present(w) {
            Some(id) => prime_ids.push((w.clone(), id)),
            None => coverage.missing_primes.push(w.clone()),
        }
    }
    let mut target_ids = Vec::new();
    for w in targets {
        match present(w) {
            Some(id) => target_ids.push((w.clone(), id)),
            None => coverage.missing_targets.push(w.clone()),
        }
    }
    if prime_ids.is_empty() {
        return Err(ActivationError::NoPrimesPresent);
    }
    let spreader = Spreader::new(g);
    let rows: Vec<Vec<f64>> = prime_ids
        .par_iter()
        .map(|(_, id)| {
            let v = spreader.run(*id, p)?;
            Ok(target_ids.iter().map(|(_, t)| v.get(*t).unwrap_or(0.0)).collect())
        })
        .collect::<Result<_, ActivationError>>()?;
    let matrix = ActivationMatrix::new(
        prime_ids.into_iter().map(|(w, _)| w).collect(),
        target_ids.into_iter().map(|(w, _)| w).collect(),
        rows.into_iter().flatten().collect(),
    );
    Ok((matrix, coverage))
}
