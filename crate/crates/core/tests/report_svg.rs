use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semnet::activation::ActivationMatrix;
use semnet::bias::{wilcoxon_signed_rank, BiasCell, BiasReport, Gender, Topic};
use semnet::graph::{LayerKind, MultilayerNetwork, NodeId, WeightedGraph, WordTable};
use semnet::reducibility::reduce;
use semnet::report::{effect_plot_csv, render_effect_plot, render_heatmap, render_q_curve, EffectMode, HeatmapStyle};
use semnet::spectral::EigenConfig;

fn parse(svg: &str) -> roxmltree::Document<'_> {
    let doc = roxmltree::Document::parse(svg).expect("well-formed svg");
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    let vb: Vec<f64> = root.attribute("viewBox").expect("viewBox").split(' ').map(|v| v.parse().unwrap()).collect();
    assert!(vb.len() == 4 && vb[2] > 0.0 && vb[3] > 0.0);
    doc
}

/// Elements carrying a `<title>` child whose text satisfies `f`.
fn titled<'a>(doc: &'a roxmltree::Document<'a>, f: impl Fn(&str) -> bool) -> Vec<roxmltree::Node<'a, 'a>> {
    doc.descendants()
        .filter(|n| n.children().any(|c| c.has_tag_name("title") && c.text().is_some_and(&f)))
        .collect()
}

fn matrix(rows: usize, cols: usize, seed: u64) -> ActivationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let primes = (0..rows).map(|i| format!("prime{i}")).collect();
    let targets = (0..cols).map(|j| format!("target <{j}>")).collect();
    let values = (0..rows * cols).map(|_| rng.random::<f64>() / rows as f64).collect();
    ActivationMatrix::new(primes, targets, values)
}

fn synthetic_report(agents: &[&str], seed: u64) -> BiasReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::new();
    for agent in agents {
        for layer in LayerKind::ALL {
            for topic in Topic::ALL.map(Some).into_iter().chain([None]) {
                for gender in Gender::ALL {
                    let diffs: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.5)).collect();
                    cells.push(BiasCell {
                        agent: agent.to_string(),
                        layer,
                        topic,
                        gender,
                        n_targets: 12,
                        effect: Some(wilcoxon_signed_rank(&diffs).unwrap()),
                        mean_topic_r: None,
                        error: None,
                    });
                }
            }
        }
    }
    BiasReport { lexicon: "test".into(), layers: vec![], cells }
}

#[test]
fn two_by_two_heatmap_has_four_cells() {
    let m = ActivationMatrix::new(vec!["woman".into(), "man".into()], vec!["nurse".into(), "doctor".into()], vec![0.6, 0.4, 0.4, 0.6]);
    let svg = render_heatmap(&m, &HeatmapStyle { title: "a & b".into(), group_break: Some(1), ..Default::default() }).unwrap();
    let doc = parse(&svg);
    let cells = titled(&doc, |t| t.contains(" / "));
    assert_eq!(cells.len(), 4);
    assert!(cells.iter().all(|n| n.has_tag_name("rect")));
    // higher values never get a lighter ramp colour than lower ones
    let fill = |label: &str| titled(&doc, |t| t.starts_with(label))[0].attribute("fill").unwrap().to_string();
    assert_eq!(fill("woman / nurse"), fill("man / doctor"));
    assert_ne!(fill("woman / nurse"), fill("woman / doctor"));
}

#[test]
fn full_size_heatmap_renders_quickly() {
    let m = matrix(10, 172, 3);
    let start = Instant::now();
    let svg = render_heatmap(&m, &HeatmapStyle { range: Some((0.0, 0.2)), group_break: Some(5), ..Default::default() }).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    let doc = parse(&svg);
    assert_eq!(titled(&doc, |t| t.contains(" / ")).len(), 1720);
    assert_eq!(svg, render_heatmap(&m, &HeatmapStyle { range: Some((0.0, 0.2)), group_break: Some(5), ..Default::default() }).unwrap());
}

#[test]
fn disaggregated_plot_has_one_series_per_agent_and_topic() {
    let report = synthetic_report(&["humans", "mistral", "llama3"], 11);
    let svg = render_effect_plot(&report, EffectMode::Disaggregated).unwrap();
    let doc = parse(&svg);
    // legend entries: one marker per series, titled with the bare label
    let legend = titled(&doc, |t| !t.contains(':'));
    assert_eq!(legend.len(), 12);
    // every series places one point per layer in each of the two panels
    let points = titled(&doc, |t| t.contains(": "));
    assert_eq!(points.len(), 12 * 3 * 2);
    let csv = effect_plot_csv(&report, EffectMode::Disaggregated);
    assert_eq!(csv.lines().count(), 1 + 12 * 3 * 2);
    assert_eq!(svg, render_effect_plot(&report, EffectMode::Disaggregated).unwrap());
}

#[test]
fn aggregated_plot_has_one_series_per_agent() {
    let report = synthetic_report(&["humans", "mistral", "llama3"], 12);
    let svg = render_effect_plot(&report, EffectMode::Aggregated).unwrap();
    let doc = parse(&svg);
    assert_eq!(titled(&doc, |t| !t.contains(':')).len(), 3);
    assert_eq!(titled(&doc, |t| t.contains(": ")).len(), 3 * 3 * 2);
}

#[test]
fn plotted_points_follow_effect_sizes() {
    let report = synthetic_report(&["humans"], 13);
    let svg = render_effect_plot(&report, EffectMode::Aggregated).unwrap();
    let doc = parse(&svg);
    let mut ys: Vec<(f64, f64)> = Vec::new();
    for layer in LayerKind::ALL {
        let r = report.find("humans", layer, None, Gender::Female).unwrap().effect.unwrap().r;
        let node = titled(&doc, |t| t == format!("humans {layer}: {r:.4}"))[0];
        ys.push((r, node.attribute("cy").unwrap().parse().unwrap()));
    }
    ys.sort_by(|a, b| a.0.total_cmp(&b.0));
    // larger r is drawn higher, i.e. smaller y
    assert!(ys.windows(2).all(|w| w[0].1 >= w[1].1));
}

fn small_network(seed: u64) -> MultilayerNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = WordTable::new();
    for i in 0..40 {
        words.intern(&format!("w{i}"));
    }
    let mut m = MultilayerNetwork::new("toy", words);
    for kind in LayerKind::ALL {
        let mut g = WeightedGraph::new();
        for i in 1..40u32 {
            g.set_edge(NodeId(i), NodeId(rng.random_range(0..i)), 1.0).unwrap();
        }
        for _ in 0..30 {
            let (a, b) = (rng.random_range(0..40), rng.random_range(0..40));
            if a != b {
                g.set_edge(NodeId(a), NodeId(b), 1.0).unwrap();
            }
        }
        m.add_layer(kind, g).unwrap();
    }
    m
}

#[test]
fn q_curve_marks_the_optimum() {
    let r = reduce(&small_network(5), &EigenConfig::default()).unwrap();
    let svg = render_q_curve(&r);
    let doc = parse(&svg);
    let points = titled(&doc, |t| t.contains(": q = "));
    assert_eq!(points.len(), 3);
    let opt = titled(&doc, |t| t == "optimum");
    assert_eq!(opt.len(), 1);
    let best = &points[r.optimal_index];
    assert_eq!(opt[0].attribute("cx"), best.attribute("cx"));
    assert_eq!(opt[0].attribute("cy"), best.attribute("cy"));
    let best_q = r.q_curve.iter().map(|p| p.q).fold(f64::NEG_INFINITY, f64::max);
    assert!(r.q_curve[r.optimal_index].q >= best_q - 1e-12);
    assert_eq!(svg, render_q_curve(&r));
}

#[test]
fn labels_are_escaped() {
    let m = matrix(2, 3, 9);
    let svg = render_heatmap(&m, &HeatmapStyle::default()).unwrap();
    let doc = parse(&svg);
    assert!(doc.descendants().any(|n| n.text() == Some("target <2>")));
}
