//! Gender-stereotype bias from activation matrices.
//!
//! Each target column is normalized to a distribution over the primes, so
//! how often a target is reached at all cancels out. For every target and
//! every (female, male) prime pair the difference between the
//! stereotype-consistent and the inconsistent prime is taken; a Wilcoxon
//! signed-rank test over those differences gives the effect size.

mod lexicon;
mod wilcoxon;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation::{
    activation_matrix, ActivationError, ActivationMatrix, Coverage, Diameter, DiameterMode, SpreadOverrides, SpreadParams,
};
use crate::graph::{LayerKind, MultilayerNetwork, WeightedGraph, WordTable};

pub use lexicon::{Gender, Lexicon, PrimePair, Target, Topic};
pub use wilcoxon::{wilcoxon_signed_rank, EffectSize, PValueMethod, EXACT_MAX};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiasError {
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("matrix is already normalized")]
    AlreadyNormalized,
    #[error("matrix is not normalized")]
    NotNormalized,
    #[error("no usable prime pair and target combinations")]
    NoUsablePairs,
    #[error("non-finite difference {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Activation(#[from] ActivationError),
}

/// A normalized matrix and the targets dropped because no prime reached them.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub matrix: ActivationMatrix,
    pub zero_columns: Vec<String>,
}

/// Divides every target column by its sum over primes.
pub fn normalize(m: &ActivationMatrix) -> Result<Normalized, BiasError> {
    if m.normalized {
        return Err(BiasError::AlreadyNormalized);
    }
    let mut zero_columns = Vec::new();
    let mut keep = Vec::new();
    let mut sums = Vec::new();
    for c in 0..m.cols() {
        let s: f64 = (0..m.rows()).map(|r| m.at(r, c)).sum();
        if s > 0.0 && s.is_finite() {
            keep.push(c);
            sums.push(s);
        } else {
            zero_columns.push(m.targets[c].clone());
        }
    }
    let mut values = Vec::with_capacity(m.rows() * keep.len());
    for r in 0..m.rows() {
        values.extend(keep.iter().zip(&sums).map(|(&c, s)| m.at(r, c) / s));
    }
    let matrix = ActivationMatrix {
        primes: m.primes.clone(),
        targets: keep.iter().map(|&c| m.targets[c].clone()).collect(),
        values,
        normalized: true,
    };
    Ok(Normalized { matrix, zero_columns })
}

/// Consistent-minus-inconsistent differences for one topic and side, in
/// lexicon order of targets then pairs. Words missing from the matrix are
/// skipped.
pub fn paired_differences(m: &ActivationMatrix, lex: &Lexicon, topic: Topic, gender: Gender) -> Result<Vec<f64>, BiasError> {
    if !m.normalized {
        return Err(BiasError::NotNormalized);
    }
    let mut out = Vec::new();
    for t in lex.targets_of(topic, gender) {
        for pair in &lex.prime_pairs {
            let (Some(f), Some(ma)) = (m.get(&pair.female, &t.word), m.get(&pair.male, &t.word)) else {
                continue;
            };
            out.push(match gender {
                Gender::Female => f - ma,
                Gender::Male => ma - f,
            });
        }
    }
    if out.is_empty() {
        return Err(BiasError::NoUsablePairs);
    }
    Ok(out)
}

/// One row of the report. `topic` is `None` for the aggregate over topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCell {
    pub agent: String,
    pub layer: LayerKind,
    pub topic: Option<Topic>,
    pub gender: Gender,
    pub n_targets: usize,
    pub effect: Option<EffectSize>,
    /// Mean of the per-topic `r`, aggregates only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_topic_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Everything computed on one layer of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBias {
    pub agent: String,
    pub layer: LayerKind,
    pub params: SpreadParams,
    pub diameter: Option<Diameter>,
    pub coverage: Coverage,
    pub raw: ActivationMatrix,
    pub normalized: ActivationMatrix,
    pub zero_columns: Vec<String>,
    pub cells: Vec<BiasCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub agent: String,
    pub layer: LayerKind,
    pub params: SpreadParams,
    pub diameter: Option<Diameter>,
    pub coverage: Coverage,
    pub zero_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub lexicon: String,
    pub layers: Vec<LayerSummary>,
    pub cells: Vec<BiasCell>,
}

fn cell(agent: &str, layer: LayerKind, topic: Option<Topic>, gender: Gender, diffs: Result<(usize, Vec<f64>), BiasError>) -> BiasCell {
    let (n_targets, effect, error) = match diffs.and_then(|(n, d)| Ok((n, wilcoxon_signed_rank(&d)?))) {
        Ok((n, e)) => (n, Some(e), None),
        Err(e) => (0, None, Some(e.to_string())),
    };
    BiasCell { agent: agent.to_string(), layer, topic, gender, n_targets, effect, mean_topic_r: None, error }
}

fn present_targets(m: &ActivationMatrix, lex: &Lexicon, topic: Topic, gender: Gender) -> usize {
    lex.targets_of(topic, gender).filter(|t| m.targets.contains(&t.word)).count()
}

/// Effect sizes per topic and side, then per side pooled over topics.
pub fn layer_cells(agent: &str, layer: LayerKind, normalized: &ActivationMatrix, lex: &Lexicon) -> Vec<BiasCell> {
    let mut cells = Vec::new();
    for gender in Gender::ALL {
        let mut pooled = Vec::new();
        let mut targets = 0;
        let mut topic_rs = Vec::new();
        for topic in Topic::ALL {
            let diffs = paired_differences(normalized, lex, topic, gender);
            if let Ok(d) = &diffs {
                pooled.extend_from_slice(d);
                targets += present_targets(normalized, lex, topic, gender);
            }
            let c = cell(agent, layer, Some(topic), gender, diffs.map(|d| (present_targets(normalized, lex, topic, gender), d)));
            if let Some(e) = &c.effect {
                topic_rs.push(e.r);
            }
            cells.push(c);
        }
        let all = if pooled.is_empty() { Err(BiasError::NoUsablePairs) } else { Ok((targets, pooled)) };
        let mut agg = cell(agent, layer, None, gender, all);
        if !topic_rs.is_empty() {
            agg.mean_topic_r = Some(topic_rs.iter().sum::<f64>() / topic_rs.len() as f64);
        }
        cells.push(agg);
    }
    cells
}

/// Spreads from every prime over one layer and scores the result.
pub fn layer_bias(
    agent: &str,
    layer: LayerKind,
    g: &WeightedGraph,
    words: &WordTable,
    lex: &Lexicon,
    overrides: &SpreadOverrides,
    mode: DiameterMode,
) -> Result<LayerBias, BiasError> {
    let (params, diameter) = overrides.resolve(g, mode)?;
    let (raw, coverage) = activation_matrix(g, words, &lex.prime_words(), &lex.target_words(), &params)?;
    let Normalized { matrix, zero_columns } = normalize(&raw)?;
    let cells = layer_cells(agent, layer, &matrix, lex);
    Ok(LayerBias { agent: agent.to_string(), layer, params, diameter, coverage, raw, normalized: matrix, zero_columns, cells })
}

/// All layers of all networks. A layer that fails entirely is reported as
/// error cells rather than dropped.
pub fn bias_report(
    networks: &[&MultilayerNetwork],
    lex: &Lexicon,
    overrides: &SpreadOverrides,
    mode: DiameterMode,
) -> (BiasReport, Vec<LayerBias>) {
    let jobs: Vec<(&MultilayerNetwork, LayerKind, &WeightedGraph)> =
        networks.iter().flat_map(|m| m.layers().iter().map(move |(k, g)| (*m, *k, g))).collect();
    let results: Vec<Result<LayerBias, (String, LayerKind, BiasError)>> = jobs
        .par_iter()
        .map(|(m, kind, g)| layer_bias(&m.agent, *kind, g, &m.words, lex, overrides, mode).map_err(|e| (m.agent.clone(), *kind, e)))
        .collect();
    let mut layers = Vec::new();
    let mut report = BiasReport { lexicon: lex.name.clone(), layers: Vec::new(), cells: Vec::new() };
    for r in results {
        match r {
            Ok(lb) => {
                report.layers.push(lb.summary());
                report.cells.extend(lb.cells.iter().cloned());
                layers.push(lb);
            }
            Err((agent, layer, e)) => {
                for gender in Gender::ALL {
                    for topic in Topic::ALL.map(Some).into_iter().chain([None]) {
                        report.cells.push(cell(&agent, layer, topic, gender, Err(e.clone())));
                    }
                }
            }
        }
    }
    (report, layers)
}

impl LayerBias {
    pub fn summary(&self) -> LayerSummary {
        LayerSummary {
            agent: self.agent.clone(),
            layer: self.layer,
            params: self.params,
            diameter: self.diameter,
            coverage: self.coverage.clone(),
            zero_columns: self.zero_columns.clone(),
        }
    }
}

impl BiasReport {
    pub fn find(&self, agent: &str, layer: LayerKind, topic: Option<Topic>, gender: Gender) -> Option<&BiasCell> {
        self.cells.iter().find(|c| c.agent == agent && c.layer == layer && c.topic == topic && c.gender == gender)
    }

    pub fn agents(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.agent) {
                out.push(c.agent.clone());
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent,layer,topic,gender,n_targets,n_pairs,n_zero_dropped,w_plus,w_minus,r,p_value,method,degenerate,mean_topic_r,error\n");
        for c in &self.cells {
            let topic = c.topic.map_or("all", Topic::as_str);
            let mean = c.mean_topic_r.map(|r| r.to_string()).unwrap_or_default();
            let err = c.error.as_deref().unwrap_or("").replace(',', ";");
            match &c.effect {
                Some(e) => out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    c.agent, c.layer, topic, c.gender, c.n_targets, e.n_pairs, e.n_zero_dropped, e.w_plus, e.w_minus, e.r, e.p_value,
                    e.method.as_str(), e.degenerate, mean, err
                )),
                None => out.push_str(&format!("{},{},{},{},{},,,,,,,,,{},{}\n", c.agent, c.layer, topic, c.gender, c.n_targets, mean, err)),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeId;

    fn matrix(primes: &[&str], targets: &[&str], values: Vec<f64>) -> ActivationMatrix {
        ActivationMatrix::new(primes.iter().map(|s| s.to_string()).collect(), targets.iter().map(|s| s.to_string()).collect(), values)
    }

    fn tiny_lexicon() -> Lexicon {
        Lexicon::from_json(
            r#"{"version":1,"name":"tiny","prime_pairs":[{"female":"woman","male":"man"}],
            "targets":[{"word":"nurse","topic":"professions","gender":"female"},
                       {"word":"doctor","topic":"professions","gender":"male"}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn normalization_examples() {
        let n = normalize(&matrix(&["woman", "man"], &["doctor"], vec![0.2, 0.3])).unwrap();
        assert!((n.matrix.at(0, 0) - 0.4).abs() < 1e-15 && (n.matrix.at(1, 0) - 0.6).abs() < 1e-15);
        let n = normalize(&matrix(&["a", "b", "c", "d"], &["t"], vec![0.7; 4])).unwrap();
        assert_eq!(n.matrix.values, vec![0.25; 4]);
        let n = normalize(&matrix(&["a", "b"], &["t", "z"], vec![1.0, 0.0, 3.0, 0.0])).unwrap();
        assert_eq!(n.zero_columns, vec!["z"]);
        assert_eq!(n.matrix.targets, vec!["t"]);
        assert_eq!(normalize(&n.matrix), Err(BiasError::AlreadyNormalized));
    }

    #[test]
    fn difference_sign_follows_target_stereotype() {
        let lex = tiny_lexicon();
        let m = normalize(&matrix(&["woman", "man"], &["nurse", "doctor"], vec![0.6, 0.4, 0.4, 0.6])).unwrap().matrix;
        let f = paired_differences(&m, &lex, Topic::Professions, Gender::Female).unwrap();
        let ma = paired_differences(&m, &lex, Topic::Professions, Gender::Male).unwrap();
        assert!((f[0] - 0.2).abs() < 1e-15 && (ma[0] - 0.2).abs() < 1e-15);
        assert_eq!(paired_differences(&m, &lex, Topic::Traits, Gender::Female), Err(BiasError::NoUsablePairs));
        let sym = normalize(&matrix(&["woman", "man"], &["nurse", "doctor"], vec![0.3, 0.8, 0.3, 0.8])).unwrap().matrix;
        assert_eq!(paired_differences(&sym, &lex, Topic::Professions, Gender::Female).unwrap(), vec![0.0]);
    }

    #[test]
    fn scaling_raw_matrix_keeps_effects() {
        let lex = Lexicon::default_v1();
        let primes = lex.prime_words();
        let targets = lex.target_words();
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 + 0.01
        };
        let vals: Vec<f64> = (0..primes.len() * targets.len()).map(|_| next()).collect();
        let a = ActivationMatrix::new(primes.clone(), targets.clone(), vals.clone());
        let b = ActivationMatrix::new(primes, targets, vals.iter().map(|v| v * 4.0).collect());
        // multiplying by a power of two is exact, so normalization cancels it bit for bit
        let ca = layer_cells("x", LayerKind::Associative, &normalize(&a).unwrap().matrix, &lex);
        let cb = layer_cells("x", LayerKind::Associative, &normalize(&b).unwrap().matrix, &lex);
        assert_eq!(ca, cb);
        let c = ActivationMatrix { values: vals.iter().map(|v| v * 3.7).collect(), ..a.clone() };
        let cc = layer_cells("x", LayerKind::Associative, &normalize(&c).unwrap().matrix, &lex);
        for (x, y) in ca.iter().zip(&cc) {
            assert_eq!(x.effect.unwrap().r, y.effect.unwrap().r);
        }
    }

    #[test]
    fn aggregate_pools_topics() {
        let lex = Lexicon::default_v1();
        let vals: Vec<f64> = (0..10 * 172).map(|i| 1.0 + ((i * 37) % 101) as f64).collect();
        let m = normalize(&ActivationMatrix::new(lex.prime_words(), lex.target_words(), vals)).unwrap().matrix;
        let cells = layer_cells("x", LayerKind::Categorical, &m, &lex);
        assert_eq!(cells.len(), 10);
        let agg = cells.iter().find(|c| c.topic.is_none() && c.gender == Gender::Male).unwrap();
        let mut pooled = Vec::new();
        for t in Topic::ALL {
            pooled.extend(paired_differences(&m, &lex, t, Gender::Male).unwrap());
        }
        assert_eq!(agg.effect.unwrap(), wilcoxon_signed_rank(&pooled).unwrap());
        assert_eq!(agg.n_targets, 86);
        let per: Vec<f64> = cells.iter().filter(|c| c.topic.is_some() && c.gender == Gender::Male).map(|c| c.effect.unwrap().r).collect();
        assert_eq!(agg.mean_topic_r, Some(per.iter().sum::<f64>() / 4.0));
    }

    #[test]
    fn twin_primes_give_degenerate_zero_effects() {
        // each male prime has exactly the female prime's neighbourhood
        let lex = Lexicon::default_v1();
        let mut words = WordTable::new();
        let mut g = WeightedGraph::new();
        let hub = words.intern("hub").unwrap();
        let targets: Vec<NodeId> = lex.targets.iter().map(|t| words.intern(&t.word).unwrap()).collect();
        for (i, &t) in targets.iter().enumerate() {
            g.set_edge(hub, t, 2.0 + (i % 3) as f64).unwrap();
            if i > 0 && i % 4 != 0 {
                g.set_edge(targets[i - 1], t, 2.0).unwrap();
            }
        }
        for (k, p) in lex.prime_pairs.iter().enumerate() {
            let f = words.intern(&p.female).unwrap();
            let m = words.intern(&p.male).unwrap();
            for j in 0..5 {
                let t = targets[(k * 31 + j * 17) % targets.len()];
                g.set_edge(f, t, 2.0 + j as f64).unwrap();
                g.set_edge(m, t, 2.0 + j as f64).unwrap();
            }
        }
        let mut net = MultilayerNetwork::new("mirror", words);
        net.add_layer(LayerKind::Associative, g).unwrap();
        let (report, layers) = bias_report(&[&net], &lex, &SpreadOverrides::default(), DiameterMode::Exact);
        assert_eq!(layers.len(), 1);
        assert_eq!(report.cells.len(), 10);
        for c in &report.cells {
            let e = c.effect.unwrap();
            assert!(e.degenerate && e.r == 0.0 && e.p_value == 1.0, "{c:?}");
        }
    }

    #[test]
    fn failing_layer_is_reported_not_dropped() {
        let lex = tiny_lexicon();
        let mut words = WordTable::new();
        let mut g = WeightedGraph::new();
        g.set_edge(words.intern("a").unwrap(), words.intern("b").unwrap(), 2.0).unwrap();
        let mut net = MultilayerNetwork::new("x", words);
        net.add_layer(LayerKind::Definitional, g).unwrap();
        let (report, layers) = bias_report(&[&net], &lex, &SpreadOverrides::default(), DiameterMode::Exact);
        assert!(layers.is_empty());
        assert_eq!(report.cells.len(), 10);
        assert!(report.cells.iter().all(|c| c.effect.is_none() && c.error.is_some()));
        assert!(report.to_csv().lines().count() == 11);
    }
}
