use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{AssociationRecord, DefinitionRecord, IngestError, Relation, RelationRecord, Vocabulary};
use crate::graph::{largest_connected_component, remove_idiosyncratic_edges, NodeId, WeightedGraph, WordTable};

/// Counts of what each filter removed while building one layer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub records: u64,
    pub self_loops_dropped: u64,
    pub out_of_vocabulary: u64,
    pub multiword_kept: u64,
    pub multiword_skipped: u64,
    pub idiosyncratic_edges_removed: u64,
    pub nodes_outside_lcc: u64,
    pub nodes: u64,
    pub edges: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub relation_counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone)]
pub struct LayerBuild {
    pub graph: WeightedGraph,
    pub report: BuildReport,
    /// Relation types behind each categorical edge. Empty for other layers.
    pub annotations: BTreeMap<(NodeId, NodeId), BTreeSet<Relation>>,
}

/// Lowercase alphabetic runs of `text`, in order, duplicates kept.
pub fn tokenize_definition(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Vocabulary gate shared by the builders. Multiword entries survive only as
/// whole vocabulary phrases.
fn admit(word: &str, vocab: &Vocabulary, report: &mut BuildReport) -> bool {
    let known = vocab.contains(word);
    if word.contains(' ') {
        if known {
            report.multiword_kept += 1;
        } else {
            report.multiword_skipped += 1;
        }
    } else if !known {
        report.out_of_vocabulary += 1;
    }
    known
}

fn finish(
    graph: WeightedGraph,
    mut report: BuildReport,
    layer: &'static str,
) -> Result<(WeightedGraph, BuildReport), IngestError> {
    if graph.edge_count() == 0 {
        return Err(IngestError::EmptyAfterFiltering(layer));
    }
    let before = graph.node_count();
    let lcc = largest_connected_component(&graph).map_err(|_| IngestError::EmptyAfterFiltering(layer))?;
    report.nodes_outside_lcc = (before - lcc.node_count()) as u64;
    report.nodes = lcc.node_count() as u64;
    report.edges = lcc.edge_count() as u64;
    Ok((lcc, report))
}

/// Free-association layer.
///
/// Directed cue→response counts are summed, collapsed to undirected edges
/// keeping the larger direction, restricted to the vocabulary, stripped of
/// weight-1 edges and cut down to the largest component. Vocabulary
/// filtering happens before interning, which yields the same induced
/// subgraph without filling the word table with rejected strings.
pub fn build_association_layer(
    records: &[AssociationRecord],
    vocab: &Vocabulary,
    words: &mut WordTable,
) -> Result<LayerBuild, IngestError> {
    if records.is_empty() {
        return Err(IngestError::NoRecords("associative"));
    }
    let mut report = BuildReport { records: records.len() as u64, ..Default::default() };
    let mut directed: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
    for r in records {
        if r.cue == r.response {
            report.self_loops_dropped += 1;
            continue;
        }
        let cue_ok = admit(&r.cue, vocab, &mut report);
        let resp_ok = admit(&r.response, vocab, &mut report);
        if !(cue_ok && resp_ok) {
            continue;
        }
        let (Some(c), Some(s)) = (words.intern(&r.cue), words.intern(&r.response)) else { continue };
        *directed.entry((c, s)).or_insert(0) += r.count;
    }
    let mut graph = WeightedGraph::new();
    for (&(c, s), &w) in &directed {
        // the graph rejects only non-positive weights, which counts >= 1 never are
        graph.set_edge_max(c, s, w as f64).expect("positive count");
    }
    let before = graph.edge_count();
    let graph = remove_idiosyncratic_edges(&graph, 1.0);
    report.idiosyncratic_edges_removed = (before - graph.edge_count()) as u64;
    let (graph, report) = finish(graph, report, "associative")?;
    Ok(LayerBuild { graph, report, annotations: BTreeMap::new() })
}

/// Definitions layer: each headword linked, unweighted, to every vocabulary
/// token of every one of its senses.
pub fn build_definition_layer(
    defs: &[DefinitionRecord],
    vocab: &Vocabulary,
    words: &mut WordTable,
) -> Result<LayerBuild, IngestError> {
    if defs.is_empty() {
        return Err(IngestError::NoRecords("definitional"));
    }
    let mut report = BuildReport { records: defs.len() as u64, ..Default::default() };
    let mut graph = WeightedGraph::new();
    for d in defs {
        if !admit(&d.headword, vocab, &mut report) {
            continue;
        }
        let Some(head) = words.intern(&d.headword) else { continue };
        for token in tokenize_definition(&d.definition_text) {
            if token == d.headword {
                report.self_loops_dropped += 1;
                continue;
            }
            if !admit(&token, vocab, &mut report) {
                continue;
            }
            let Some(t) = words.intern(&token) else { continue };
            graph.set_edge(head, t, 1.0).expect("unit weight");
        }
    }
    let (graph, report) = finish(graph, report, "definitional")?;
    Ok(LayerBuild { graph, report, annotations: BTreeMap::new() })
}

/// Categorical layer: headword–related edges across all senses and all four
/// relation types, unweighted.
pub fn build_relation_layer(
    rels: &[RelationRecord],
    vocab: &Vocabulary,
    words: &mut WordTable,
) -> Result<LayerBuild, IngestError> {
    if rels.is_empty() {
        return Err(IngestError::NoRecords("categorical"));
    }
    let mut report = BuildReport { records: rels.len() as u64, ..Default::default() };
    let mut graph = WeightedGraph::new();
    let mut annotations: HashMap<(NodeId, NodeId), BTreeSet<Relation>> = HashMap::new();
    for r in rels {
        *report.relation_counts.entry(r.relation.as_str().to_string()).or_insert(0) += 1;
        if r.headword == r.related {
            report.self_loops_dropped += 1;
            continue;
        }
        let head_ok = admit(&r.headword, vocab, &mut report);
        let rel_ok = admit(&r.related, vocab, &mut report);
        if !(head_ok && rel_ok) {
            continue;
        }
        let (Some(h), Some(t)) = (words.intern(&r.headword), words.intern(&r.related)) else { continue };
        graph.set_edge(h, t, 1.0).expect("unit weight");
        annotations.entry(if h < t { (h, t) } else { (t, h) }).or_default().insert(r.relation);
    }
    let (graph, report) = finish(graph, report, "categorical")?;
    let annotations = annotations.into_iter().filter(|((a, b), _)| graph.weight(*a, *b).is_some()).collect();
    Ok(LayerBuild { graph, report, annotations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::from_words(words)
    }

    fn edges(g: &WeightedGraph, t: &WordTable) -> Vec<(String, String, f64)> {
        let mut out: Vec<_> = g
            .edges()
            .map(|(a, b, w)| {
                let (x, y) = (t.word(a).to_string(), t.word(b).to_string());
                if x < y {
                    (x, y, w)
                } else {
                    (y, x, w)
                }
            })
            .collect();
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    fn e(a: &str, b: &str, w: f64) -> (String, String, f64) {
        (a.into(), b.into(), w)
    }

    fn assoc(cue: &str, response: &str, count: u64) -> AssociationRecord {
        AssociationRecord { cue: cue.into(), response: response.into(), count }
    }

    #[test]
    fn tokenizer_splits_on_non_letters() {
        assert_eq!(tokenize_definition("a person licensed to practice medicine"), ["a", "person", "licensed", "to", "practice", "medicine"]);
        assert!(tokenize_definition("").is_empty());
        assert_eq!(tokenize_definition("well-known (informal)"), ["well", "known", "informal"]);
        assert_eq!(tokenize_definition("Sea, sea!"), ["sea", "sea"]);
    }

    #[test]
    fn association_max_rule() {
        let mut t = WordTable::new();
        let recs = [assoc("a", "b", 3), assoc("b", "a", 5), assoc("b", "c", 2)];
        let built = build_association_layer(&recs, &vocab(&["a", "b", "c"]), &mut t).unwrap();
        assert_eq!(edges(&built.graph, &t), vec![e("a", "b", 5.0), e("b", "c", 2.0)]);
    }

    #[test]
    fn association_weight_one_only_is_empty() {
        let mut t = WordTable::new();
        let err = build_association_layer(&[assoc("a", "b", 1)], &vocab(&["a", "b"]), &mut t).unwrap_err();
        assert!(matches!(err, IngestError::EmptyAfterFiltering("associative")));
    }

    #[test]
    fn association_filters_and_reports() {
        let mut t = WordTable::new();
        let recs = [
            assoc("doctor", "nurse", 4),
            assoc("doctor", "doctor", 9),
            assoc("doctor", "zzz", 7),
            assoc("doctor", "police officer", 3),
            assoc("doctor", "ice cream", 3),
            assoc("doctor", "sick", 1),
            assoc("cat", "dog", 5),
        ];
        let v = vocab(&["doctor", "nurse", "police officer", "sick", "cat", "dog"]);
        let built = build_association_layer(&recs, &v, &mut t).unwrap();
        assert_eq!(edges(&built.graph, &t), vec![e("doctor", "nurse", 4.0), e("doctor", "police officer", 3.0)]);
        let r = &built.report;
        assert_eq!(r.self_loops_dropped, 1);
        assert_eq!(r.out_of_vocabulary, 1);
        assert_eq!((r.multiword_kept, r.multiword_skipped), (1, 1));
        assert_eq!(r.idiosyncratic_edges_removed, 1);
        assert_eq!(r.nodes_outside_lcc, 3);
        assert!(built.graph.nodes().all(|n| v.contains(t.word(n))));
    }

    #[test]
    fn definition_layer_worked_example() {
        let mut t = WordTable::new();
        let defs = [
            DefinitionRecord { headword: "doctor".into(), sense_index: 0, definition_text: "a person licensed to practice medicine".into() },
            DefinitionRecord { headword: "doctor".into(), sense_index: 1, definition_text: "a licensed doctor of medicine".into() },
        ];
        let v = vocab(&["doctor", "person", "licensed", "practice", "medicine", "to"]);
        let built = build_definition_layer(&defs, &v, &mut t).unwrap();
        let got = edges(&built.graph, &t);
        assert_eq!(
            got,
            vec![
                e("doctor", "licensed", 1.0),
                e("doctor", "medicine", 1.0),
                e("doctor", "person", 1.0),
                e("doctor", "practice", 1.0),
                e("doctor", "to", 1.0)
            ]
        );
        assert_eq!(built.report.self_loops_dropped, 1);
    }

    #[test]
    fn self_defined_headword_builds_nothing() {
        let mut t = WordTable::new();
        let defs = [DefinitionRecord { headword: "echo".into(), sense_index: 0, definition_text: "echo".into() }];
        assert!(matches!(
            build_definition_layer(&defs, &vocab(&["echo"]), &mut t),
            Err(IngestError::EmptyAfterFiltering(_))
        ));
    }

    #[test]
    fn relation_layer_worked_example() {
        let mut t = WordTable::new();
        let rel = |related: &str, relation| RelationRecord { headword: "doctor".into(), sense_index: 0, relation, related: related.into() };
        let rels = [
            rel("medical professional", Relation::Hypernym),
            rel("physician", Relation::Synonym),
            rel("neurologist", Relation::Hyponym),
            RelationRecord { headword: "physician".into(), sense_index: 0, relation: Relation::Synonym, related: "doctor".into() },
        ];
        let v = vocab(&["doctor", "physician", "neurologist"]);
        let built = build_relation_layer(&rels, &v, &mut t).unwrap();
        assert_eq!(edges(&built.graph, &t), vec![e("doctor", "neurologist", 1.0), e("doctor", "physician", 1.0)]);
        assert_eq!(built.report.multiword_skipped, 1);
        let (d, p) = (t.get("doctor").unwrap(), t.get("physician").unwrap());
        assert_eq!(built.annotations[&(d.min(p), d.max(p))], BTreeSet::from([Relation::Synonym]));
    }

    #[test]
    fn relation_layer_empty_after_vocab() {
        let mut t = WordTable::new();
        let rels = [RelationRecord { headword: "a".into(), sense_index: 0, relation: Relation::Antonym, related: "b".into() }];
        assert!(matches!(build_relation_layer(&rels, &vocab(&["z"]), &mut t), Err(IngestError::EmptyAfterFiltering(_))));
        assert!(matches!(build_relation_layer(&[], &vocab(&["z"]), &mut t), Err(IngestError::NoRecords(_))));
    }
}
