//! Von Neumann entropy of graph layers and the Jensen–Shannon distance
//! between them.
//!
//! A layer on an aligned node order becomes the density matrix
//! `ρ = L / tr(L)` with `L = D − A` its weighted combinatorial Laplacian.
//! Entropies are `−Σ λ log2 λ` over the spectrum of `ρ`, computed either by
//! a dense symmetric eigensolve or, for large layers, by stochastic Lanczos
//! quadrature.

mod slq;

pub use slq::SlqConfig;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::diag::Diag;
use faer::{Mat, Par};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, WeightedGraph};

/// Eigenvalues below this are treated as exact zeros.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("layer has no edges")]
    NoEdges,
    #[error("layers are not aligned on the same node order")]
    UnalignedLayers,
    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
    #[error("stochastic Lanczos quadrature did not converge: {0}")]
    ConvergenceFailure(String),
}

/// Trace-normalized Laplacian stored as symmetric CSR, diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl DensityMatrix {
    /// Builds `ρ` for `g` on `order`. Nodes of `order` absent from `g` give
    /// zero rows; a node of `g` missing from `order` is an alignment error.
    pub fn from_graph(g: &WeightedGraph, order: &[NodeId]) -> Result<Self, SpectralError> {
        let position: std::collections::HashMap<NodeId, usize> = order.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        if position.len() != order.len() || g.nodes().any(|n| !position.contains_key(&n)) {
            return Err(SpectralError::UnalignedLayers);
        }
        let total: f64 = g.total_weight();
        if g.edge_count() == 0 || total <= 0.0 {
            return Err(SpectralError::NoEdges);
        }
        let trace = 2.0 * total;
        let dim = order.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        let mut degree = vec![0.0; dim];
        for (a, b, w) in g.edges() {
            let (i, j) = (position[&a], position[&b]);
            rows[i].push((j, -w / trace));
            rows[j].push((i, -w / trace));
            degree[i] += w;
            degree[j] += w;
        }
        for (i, row) in rows.iter_mut().enumerate() {
            if degree[i] > 0.0 {
                row.push((i, degree[i] / trace));
            }
        }
        Ok(Self::from_rows(dim, rows))
    }

    fn from_rows(dim: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        DensityMatrix { dim, offsets, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.offsets[i], self.offsets[i + 1]);
        match self.cols[s..e].binary_search(&j) {
            Ok(k) => self.vals[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `(self + other) / 2`.
    pub fn mixture(&self, other: &DensityMatrix) -> Result<DensityMatrix, SpectralError> {
        if self.dim != other.dim {
            return Err(SpectralError::UnalignedLayers);
        }
        let mut rows = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut row: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
            for m in [self, other] {
                for k in m.offsets[i]..m.offsets[i + 1] {
                    *row.entry(m.cols[k]).or_insert(0.0) += m.vals[k];
                }
            }
            rows.push(row.into_iter().map(|(j, v)| (j, v / 2.0)).collect());
        }
        Ok(Self::from_rows(self.dim, rows))
    }

    /// `y = ρ x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim {
            let mut acc = 0.0;
            for k in self.offsets[i]..self.offsets[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.offsets[i]..self.offsets[i + 1] {
                m[(i, self.cols[k])] = self.vals[k];
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EntropyMethod {
    Exact,
    Estimated(SlqConfig),
}

/// Dense eigensolves up to `exact_max` nodes, quadrature above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub exact_max: usize,
    pub slq: SlqConfig,
}

impl Default for EigenConfig {
    fn default() -> Self {
        EigenConfig { exact_max: 4000, slq: SlqConfig::default() }
    }
}

impl EigenConfig {
    pub fn method_for(&self, dim: usize) -> EntropyMethod {
        if dim <= self.exact_max {
            EntropyMethod::Exact
        } else {
            EntropyMethod::Estimated(self.slq)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Ascending spectrum of `ρ`; empty for estimated entropies.
    pub eigenvalues: Vec<f64>,
    pub entropy_bits: f64,
    pub method: Method,
    /// Standard error of the quadrature estimate.
    pub estimator_error: Option<f64>,
}

/// `−x log2 x` with `0 log 0 = 0` and sub-floor values treated as zero.
pub(crate) fn entropy_term(x: f64) -> f64 {
    if x <= EIGEN_FLOOR {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Symmetric eigendecomposition of the lower triangle, ascending.
///
/// Always sequential: faer's parallel kernels split work by thread count,
/// which changes rounding and would make results depend on `--threads`.
pub(crate) fn symmetric_eigen(a: &Mat<f64>, vectors: bool) -> Result<(Vec<f64>, Option<Mat<f64>>), String> {
    let n = a.nrows();
    let par = Par::Seq;
    let compute = if vectors { ComputeEigenvectors::Yes } else { ComputeEigenvectors::No };
    let mut s = Diag::<f64>::zeros(n);
    let mut u = vectors.then(|| Mat::<f64>::zeros(n, n));
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(n, compute, par, Default::default()));
    evd::self_adjoint_evd(a.as_ref(), s.as_mut(), u.as_mut().map(|u| u.as_mut()), par, MemStack::new(&mut buf), Default::default())
        .map_err(|e| format!("{e:?}"))?;
    Ok((s.column_vector().iter().copied().collect(), u))
}

pub fn eigenvalues(rho: &DensityMatrix) -> Result<Vec<f64>, SpectralError> {
    let (mut vals, _) = symmetric_eigen(&rho.to_dense(), false).map_err(SpectralError::Eigensolver)?;
    for v in vals.iter_mut() {
        if *v < EIGEN_FLOOR {
            *v = 0.0;
        }
    }
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

pub fn von_neumann_entropy(rho: &DensityMatrix, method: EntropyMethod) -> Result<SpectralSummary, SpectralError> {
    match method {
        EntropyMethod::Exact => {
            let eigenvalues = eigenvalues(rho)?;
            let entropy_bits = eigenvalues.iter().map(|&l| entropy_term(l)).sum::<f64>().max(0.0);
            Ok(SpectralSummary { eigenvalues, entropy_bits, method: Method::Exact, estimator_error: None })
        }
        EntropyMethod::Estimated(cfg) => {
            let (mean, stderr) = slq::entropy(rho, &cfg)?;
            Ok(SpectralSummary {
                eigenvalues: Vec::new(),
                entropy_bits: mean.max(0.0),
                method: Method::Estimated,
                estimator_error: Some(stderr),
            })
        }
    }
}

/// Entropy with the method picked by `cfg` for the matrix size.
pub fn entropy(rho: &DensityMatrix, cfg: &EigenConfig) -> Result<f64, SpectralError> {
    Ok(von_neumann_entropy(rho, cfg.method_for(rho.dim()))?.entropy_bits)
}

/// `sqrt(h((ρ1+ρ2)/2) − (h(ρ1)+h(ρ2))/2)`, clamped at zero.
pub fn js_distance_from_entropies(h_mix: f64, h1: f64, h2: f64) -> f64 {
    (h_mix - (h1 + h2) / 2.0).max(0.0).sqrt()
}

pub fn js_distance(rho1: &DensityMatrix, rho2: &DensityMatrix, cfg: &EigenConfig) -> Result<f64, SpectralError> {
    let mix = rho1.mixture(rho2)?;
    Ok(js_distance_from_entropies(entropy(&mix, cfg)?, entropy(rho1, cfg)?, entropy(rho2, cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeId;

    fn complete(n: u32) -> WeightedGraph {
        let mut g = WeightedGraph::new();
        for i in 0..n {
            for j in (i + 1)..n {
                g.set_edge(NodeId(i), NodeId(j), 1.0).unwrap();
            }
        }
        g
    }

    fn order(n: u32) -> Vec<NodeId> {
        (0..n).map(NodeId).collect()
    }

    #[test]
    fn single_edge_density() {
        let mut g = WeightedGraph::new();
        g.set_edge(NodeId(0), NodeId(1), 1.0).unwrap();
        let rho = DensityMatrix::from_graph(&g, &order(2)).unwrap();
        assert_eq!([rho.get(0, 0), rho.get(0, 1), rho.get(1, 0), rho.get(1, 1)], [0.5, -0.5, -0.5, 0.5]);
        let s = von_neumann_entropy(&rho, EntropyMethod::Exact).unwrap();
        assert!(s.entropy_bits.abs() < 1e-12);
    }

    #[test]
    fn complete_graph_spectrum() {
        // K_n Laplacian: eigenvalue 0 once and n once per remaining dimension;
        // over trace n(n-1) that is 1/(n-1) with multiplicity n-1
        let rho = DensityMatrix::from_graph(&complete(3), &order(3)).unwrap();
        let s = von_neumann_entropy(&rho, EntropyMethod::Exact).unwrap();
        for (got, want) in s.eigenvalues.iter().zip([0.0, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((s.entropy_bits - 1.0).abs() < 1e-9);
        let rho5 = DensityMatrix::from_graph(&complete(5), &order(5)).unwrap();
        assert!((entropy(&rho5, &EigenConfig::default()).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let mut g = WeightedGraph::new();
        g.add_node(NodeId(0));
        assert_eq!(DensityMatrix::from_graph(&g, &order(1)), Err(SpectralError::NoEdges));
        let k3 = complete(3);
        assert_eq!(DensityMatrix::from_graph(&k3, &order(2)), Err(SpectralError::UnalignedLayers));
        let a = DensityMatrix::from_graph(&k3, &order(3)).unwrap();
        let b = DensityMatrix::from_graph(&k3, &order(4)).unwrap();
        assert_eq!(a.mixture(&b), Err(SpectralError::UnalignedLayers));
    }

    #[test]
    fn padding_nodes_do_not_change_entropy() {
        let k4 = complete(4);
        let a = entropy(&DensityMatrix::from_graph(&k4, &order(4)).unwrap(), &EigenConfig::default()).unwrap();
        let b = entropy(&DensityMatrix::from_graph(&k4, &order(9)).unwrap(), &EigenConfig::default()).unwrap();
        assert!((a - b).abs() < 1e-12);
        let rho = DensityMatrix::from_graph(&k4, &order(9)).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn js_identity_is_exactly_zero() {
        let rho = DensityMatrix::from_graph(&complete(6), &order(6)).unwrap();
        assert_eq!(js_distance(&rho, &rho, &EigenConfig::default()).unwrap(), 0.0);
    }
}
