//! Greedy layer aggregation and the relative-entropy quality curve.
//!
//! Starting from one block per layer, the two blocks whose aggregated
//! layers are closest in Jensen–Shannon distance are merged until one block
//! remains. Each configuration `C` is scored with
//! `q(C) = 1 − mean_b h(block_b) / h(all layers)`; the configuration with
//! the largest `q` is optimal, and a network is irreducible when that is the
//! fully separated one.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{aggregate, GraphError, LayerKind, MultilayerNetwork, NodeId, WeightedGraph};
use crate::spectral::{entropy, js_distance_from_entropies, DensityMatrix, EigenConfig, SpectralError};

/// `q` values closer than this are treated as ties.
pub const Q_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReduceError {
    #[error("need at least two layers, found {0}")]
    TooFewLayers(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Layers padded to the union node set, in lexicographic word order.
#[derive(Debug, Clone)]
pub struct AlignedLayers {
    pub order: Vec<NodeId>,
    pub kinds: Vec<LayerKind>,
    pub layers: Vec<WeightedGraph>,
}

pub fn align_layers(m: &MultilayerNetwork) -> Result<AlignedLayers, ReduceError> {
    if m.layers().len() < 2 {
        return Err(ReduceError::TooFewLayers(m.layers().len()));
    }
    let union: BTreeSet<NodeId> = m.layers().iter().flat_map(|(_, g)| g.nodes()).collect();
    let mut order: Vec<NodeId> = union.iter().copied().collect();
    order.sort_by(|a, b| m.words.word(*a).cmp(m.words.word(*b)));
    Ok(AlignedLayers {
        order,
        kinds: m.layers().iter().map(|(k, _)| *k).collect(),
        layers: m.layers().iter().map(|(_, g)| g.padded(union.iter().copied())).collect(),
    })
}

/// Disjoint blocks of layer indices covering every layer.
///
/// Kept canonical: each block ascending, blocks ordered by first element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl LayerPartition {
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Self {
        for b in blocks.iter_mut() {
            b.sort_unstable();
        }
        blocks.retain(|b| !b.is_empty());
        blocks.sort();
        LayerPartition { blocks }
    }

    pub fn separated(layers: usize) -> Self {
        LayerPartition { blocks: (0..layers).map(|i| vec![i]).collect() }
    }

    pub fn is_valid_for(&self, layers: usize) -> bool {
        let mut seen: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        seen.sort_unstable();
        self.blocks.iter().all(|b| !b.is_empty()) && seen == (0..layers).collect::<Vec<_>>()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub js_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    pub partition: LayerPartition,
    pub mean_entropy: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub agent: String,
    pub layers: Vec<LayerKind>,
    /// Entropy of every single layer, in layer order.
    pub layer_entropies: Vec<f64>,
    pub aggregate_entropy: f64,
    pub steps: Vec<MergeStep>,
    /// From fully separated (index 0) to fully merged.
    pub q_curve: Vec<QPoint>,
    pub optimal: LayerPartition,
    pub optimal_index: usize,
    pub irreducible: bool,
    /// Every configuration scored the same `q`.
    pub degenerate: bool,
}

/// Memoized block aggregates and entropies on one aligned layer set.
struct BlockCache<'a> {
    aligned: &'a AlignedLayers,
    cfg: &'a EigenConfig,
    rho: BTreeMap<Vec<usize>, DensityMatrix>,
    h: BTreeMap<Vec<usize>, f64>,
}

impl<'a> BlockCache<'a> {
    fn new(aligned: &'a AlignedLayers, cfg: &'a EigenConfig) -> Self {
        BlockCache { aligned, cfg, rho: BTreeMap::new(), h: BTreeMap::new() }
    }

    fn density(&mut self, block: &[usize]) -> Result<DensityMatrix, ReduceError> {
        if let Some(r) = self.rho.get(block) {
            return Ok(r.clone());
        }
        let g = aggregate_block(self.aligned, block)?;
        let r = DensityMatrix::from_graph(&g, &self.aligned.order)?;
        self.rho.insert(block.to_vec(), r.clone());
        Ok(r)
    }

    fn entropy(&mut self, block: &[usize]) -> Result<f64, ReduceError> {
        if let Some(&h) = self.h.get(block) {
            return Ok(h);
        }
        let rho = self.density(block)?;
        let h = entropy(&rho, self.cfg)?;
        self.h.insert(block.to_vec(), h);
        Ok(h)
    }
}

/// Weight-sum aggregate of the layers in `block`, summed in index order.
pub fn aggregate_block(aligned: &AlignedLayers, block: &[usize]) -> Result<WeightedGraph, ReduceError> {
    let mut sorted = block.to_vec();
    sorted.sort_unstable();
    let mut acc = aligned.layers[sorted[0]].clone();
    for &i in &sorted[1..] {
        acc = aggregate(&acc, &aligned.layers[i])?;
    }
    Ok(acc)
}

/// Mean of block entropies, summed in ascending order so that the result
/// depends only on the multiset of blocks.
fn mean_entropy(hs: &mut [f64]) -> f64 {
    hs.sort_by(f64::total_cmp);
    hs.iter().sum::<f64>() / hs.len() as f64
}

/// `q` of an arbitrary partition.
pub fn partition_quality(
    aligned: &AlignedLayers,
    partition: &LayerPartition,
    cfg: &EigenConfig,
) -> Result<f64, ReduceError> {
    let mut cache = BlockCache::new(aligned, cfg);
    let all: Vec<usize> = (0..aligned.layers.len()).collect();
    let h_all = cache.entropy(&all)?;
    let mut hs = partition.blocks.iter().map(|b| cache.entropy(b)).collect::<Result<Vec<_>, _>>()?;
    Ok(1.0 - mean_entropy(&mut hs) / h_all)
}

/// Picks the best index of `qs`; among ties within [`Q_TIE_TOLERANCE`] the
/// earliest (least merged) configuration wins.
pub fn argmax_prefer_separated(qs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &q) in qs.iter().enumerate().skip(1) {
        if q > qs[best] + Q_TIE_TOLERANCE {
            best = i;
        }
    }
    best
}

pub fn reduce(m: &MultilayerNetwork, cfg: &EigenConfig) -> Result<ReductionReport, ReduceError> {
    let aligned = align_layers(m)?;
    let mut report = reduce_aligned(&aligned, cfg)?;
    report.agent = m.agent.clone();
    Ok(report)
}

pub fn reduce_aligned(aligned: &AlignedLayers, cfg: &EigenConfig) -> Result<ReductionReport, ReduceError> {
    let n_layers = aligned.layers.len();
    if n_layers < 2 {
        return Err(ReduceError::TooFewLayers(n_layers));
    }
    let mut cache = BlockCache::new(aligned, cfg);

    // single layers in parallel, results merged back in index order
    let singles: Vec<(DensityMatrix, f64)> = (0..n_layers)
        .into_par_iter()
        .map(|i| -> Result<_, ReduceError> {
            let rho = DensityMatrix::from_graph(&aligned.layers[i], &aligned.order)?;
            let h = entropy(&rho, cfg)?;
            Ok((rho, h))
        })
        .collect::<Result<_, _>>()?;
    for (i, (rho, h)) in singles.into_iter().enumerate() {
        cache.rho.insert(vec![i], rho);
        cache.h.insert(vec![i], h);
    }
    let layer_entropies: Vec<f64> = (0..n_layers).map(|i| cache.h[&vec![i]]).collect();
    let all: Vec<usize> = (0..n_layers).collect();
    let aggregate_entropy = cache.entropy(&all)?;

    let mut partition = LayerPartition::separated(n_layers);
    let mut steps = Vec::new();
    let mut q_curve = Vec::new();
    let score = |cache: &mut BlockCache, p: &LayerPartition| -> Result<QPoint, ReduceError> {
        let mut hs = p.blocks.iter().map(|b| cache.entropy(b)).collect::<Result<Vec<_>, _>>()?;
        let mean = mean_entropy(&mut hs);
        Ok(QPoint { partition: p.clone(), mean_entropy: mean, q: 1.0 - mean / aggregate_entropy })
    };
    q_curve.push(score(&mut cache, &partition)?);

    while partition.len() > 1 {
        let blocks = partition.blocks.clone();
        let pairs: Vec<(usize, usize)> =
            (0..blocks.len()).flat_map(|i| ((i + 1)..blocks.len()).map(move |j| (i, j))).collect();
        let block_rho: Vec<DensityMatrix> = blocks.iter().map(|b| cache.density(b)).collect::<Result<_, _>>()?;
        let block_h: Vec<f64> = blocks.iter().map(|b| cache.entropy(b)).collect::<Result<_, _>>()?;
        let distances: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| -> Result<f64, ReduceError> {
                let mix = block_rho[i].mixture(&block_rho[j])?;
                Ok(js_distance_from_entropies(entropy(&mix, cfg)?, block_h[i], block_h[j]))
            })
            .collect::<Result<_, _>>()?;
        // first minimum in pair order breaks ties
        let mut best = 0;
        for k in 1..pairs.len() {
            if distances[k] < distances[best] {
                best = k;
            }
        }
        let (i, j) = pairs[best];
        steps.push(MergeStep { left: blocks[i].clone(), right: blocks[j].clone(), js_distance: distances[best] });
        let mut next: Vec<Vec<usize>> =
            blocks.iter().enumerate().filter(|&(k, _)| k != i && k != j).map(|(_, b)| b.clone()).collect();
        next.push(blocks[i].iter().chain(&blocks[j]).copied().collect());
        partition = LayerPartition::new(next);
        q_curve.push(score(&mut cache, &partition)?);
    }

    let qs: Vec<f64> = q_curve.iter().map(|p| p.q).collect();
    let optimal_index = argmax_prefer_separated(&qs);
    let degenerate = qs.iter().all(|q| (q - qs[0]).abs() <= Q_TIE_TOLERANCE);
    Ok(ReductionReport {
        agent: String::new(),
        layers: aligned.kinds.clone(),
        layer_entropies,
        aggregate_entropy,
        steps,
        optimal: q_curve[optimal_index].partition.clone(),
        optimal_index,
        irreducible: optimal_index == 0,
        degenerate,
        q_curve,
    })
}

impl ReductionReport {
    /// `step,blocks,partition,mean_entropy,q,optimal` rows.
    pub fn q_curve_csv(&self) -> String {
        let mut out = String::from("step,blocks,partition,mean_entropy,q,optimal\n");
        for (i, p) in self.q_curve.iter().enumerate() {
            let label = self.partition_label(&p.partition);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i,
                p.partition.len(),
                label,
                p.mean_entropy,
                p.q,
                i == self.optimal_index
            ));
        }
        out
    }

    /// e.g. `associative+categorical|definitional`.
    pub fn partition_label(&self, p: &LayerPartition) -> String {
        p.blocks
            .iter()
            .map(|b| b.iter().map(|&i| self.layers[i].as_str()).collect::<Vec<_>>().join("+"))
            .collect::<Vec<_>>()
            .join("|")
    }
}
