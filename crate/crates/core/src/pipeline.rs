//! End-to-end commands driven by one JSON run configuration.
//!
//! `build` turns the raw tables into graph files; every later command reads
//! those files back, so its results depend only on what is on disk. Each
//! command writes a manifest listing the configuration, input and output
//! hashes and the parameters actually used. Manifests hold no timestamps,
//! thread counts or output locations, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::activation::{activation_matrix, ActivationError, ActivationMatrix, Coverage, Diameter, DiameterMode, SpreadOverrides, SpreadParams};
use crate::bias::{bias_report, BiasError, BiasReport, Gender, LayerBias, Lexicon};
use crate::graph::{LayerKind, MultilayerNetwork, WeightedGraph, WordTable};
use crate::ingest::{
    build_association_layer, build_definition_layer, build_relation_layer, graph_hash, parse_associations,
    parse_definitions, parse_relations, read_graph, write_graph, BuildReport, FormatDescriptor, IngestError, ParseReport,
    Vocabulary,
};
use crate::reducibility::{reduce, ReduceError, ReductionReport};
use crate::report::{effect_plot_csv, render_effect_plot, render_heatmap, render_q_curve, EffectMode, HeatmapStyle, RenderError};
use crate::spectral::{EigenConfig, SlqConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Data(_) => 3,
            PipelineError::Numeric(_) => 4,
        }
    }
}

impl From<IngestError> for PipelineError {
    fn from(e: IngestError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<ReduceError> for PipelineError {
    fn from(e: ReduceError) -> Self {
        match e {
            ReduceError::Spectral(_) => PipelineError::Numeric(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<ActivationError> for PipelineError {
    fn from(e: ActivationError) -> Self {
        match e {
            ActivationError::InvalidParams(_) => PipelineError::Validation(e.to_string()),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<BiasError> for PipelineError {
    fn from(e: BiasError) -> Self {
        match e {
            BiasError::Lexicon(_) => PipelineError::Validation(e.to_string()),
            BiasError::Activation(a) => a.into(),
            _ => PipelineError::Data(e.to_string()),
        }
    }
}

impl From<RenderError> for PipelineError {
    fn from(e: RenderError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub name: String,
    pub association_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub association_format: Option<FormatDescriptor>,
    pub definitions_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definitions_format: Option<FormatDescriptor>,
    pub relations_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations_format: Option<FormatDescriptor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSettings {
    #[serde(default = "default_exact_max")]
    pub exact_max: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_depth")]
    pub lanczos_depth: usize,
}

fn default_exact_max() -> usize {
    EigenConfig::default().exact_max
}
fn default_probes() -> usize {
    SlqConfig::default().probes
}
fn default_depth() -> usize {
    SlqConfig::default().depth
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_budget() -> usize {
    10_000
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings { exact_max: default_exact_max(), probes: default_probes(), lanczos_depth: default_depth() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub agents: Vec<AgentConfig>,
    pub vocabulary_file: PathBuf,
    #[serde(default)]
    pub spread: SpreadOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub eigen: EigenSettings,
    /// Breadth-first searches allowed when certifying a layer's diameter.
    #[serde(default = "default_budget")]
    pub diameter_bfs_budget: usize,
}

/// Command-line values that replace config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub exact_eigen_max: Option<usize>,
}

/// A validated configuration with paths resolved against its directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    base: PathBuf,
    out: PathBuf,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Run {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Run, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Run::new(config, &base, overrides)
    }

    pub fn new(mut config: RunConfig, base: &Path, overrides: &Overrides) -> Result<Run, PipelineError> {
        if let Some(o) = &overrides.output_dir {
            config.output_dir = o.clone();
        }
        if let Some(s) = overrides.seed {
            config.seed = s;
        }
        if let Some(m) = overrides.exact_eigen_max {
            config.eigen.exact_max = m;
        }
        let out = if config.output_dir.is_absolute() || overrides.output_dir.is_some() {
            config.output_dir.clone()
        } else {
            base.join(&config.output_dir)
        };
        let run = Run { config, base: base.to_path_buf(), out };
        run.validate()?;
        Ok(run)
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Validation(m));
        let c = &self.config;
        if c.agents.is_empty() {
            return bad("agents: at least one agent is required".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, a) in c.agents.iter().enumerate() {
            if !valid_name(&a.name) {
                return bad(format!("agents[{i}].name: {:?} must be non-empty ASCII letters, digits, '-' or '_'", a.name));
            }
            if !names.insert(a.name.as_str()) {
                return bad(format!("agents[{i}].name: duplicate agent {:?}", a.name));
            }
            for (field, p) in [("association_file", &a.association_file), ("definitions_file", &a.definitions_file), ("relations_file", &a.relations_file)] {
                if !self.resolve(p).is_file() {
                    return bad(format!("agents[{i}].{field}: file not found: {}", self.resolve(p).display()));
                }
            }
            for (field, d) in [("association_format", &a.association_format), ("definitions_format", &a.definitions_format), ("relations_format", &a.relations_format)] {
                if d.as_ref().is_some_and(|d| !d.delimiter.is_ascii()) {
                    return bad(format!("agents[{i}].{field}: delimiter must be ASCII"));
                }
            }
        }
        if !self.resolve(&c.vocabulary_file).is_file() {
            return bad(format!("vocabulary_file: file not found: {}", self.resolve(&c.vocabulary_file).display()));
        }
        if let Some(l) = &c.lexicon {
            if !self.resolve(l).is_file() {
                return bad(format!("lexicon: file not found: {}", self.resolve(l).display()));
            }
        }
        if c.eigen.probes == 0 || c.eigen.lanczos_depth == 0 {
            return bad("eigen: probes and lanczos_depth must be positive".into());
        }
        if c.diameter_bfs_budget == 0 {
            return bad("diameter_bfs_budget: must be positive".into());
        }
        let s = &c.spread;
        let probe = SpreadParams {
            initial_activation: s.initial_activation.unwrap_or(1.0),
            time_steps: s.time_steps.unwrap_or(1),
            retention: s.retention.unwrap_or(0.5),
            decay: s.decay.unwrap_or(0.0),
            suppress: s.suppress.unwrap_or(0.0),
        };
        probe.validate().map_err(|e| PipelineError::Validation(format!("spread: {e}")))?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    pub fn eigen_config(&self) -> EigenConfig {
        let e = self.config.eigen;
        EigenConfig { exact_max: e.exact_max, slq: SlqConfig { probes: e.probes, depth: e.lanczos_depth, seed: self.config.seed } }
    }

    pub fn diameter_mode(&self) -> DiameterMode {
        DiameterMode::Approx { max_bfs: self.config.diameter_bfs_budget }
    }

    pub fn lexicon(&self) -> Result<Lexicon, PipelineError> {
        match &self.config.lexicon {
            Some(p) => Ok(Lexicon::load(&self.resolve(p))?),
            None => Ok(Lexicon::default_v1()),
        }
    }

    /// The config as recorded in manifests: without the output location.
    fn config_record(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(&self.config).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("output_dir");
        }
        v
    }

    fn input_hashes(&self) -> Result<BTreeMap<String, String>, PipelineError> {
        let mut paths = vec![self.config.vocabulary_file.clone()];
        for a in &self.config.agents {
            paths.extend([a.association_file.clone(), a.definitions_file.clone(), a.relations_file.clone()]);
        }
        paths.extend(self.config.lexicon.clone());
        let mut out = BTreeMap::new();
        for p in paths {
            let bytes = fs::read(self.resolve(&p)).map_err(|e| PipelineError::Data(format!("{}: {e}", p.display())))?;
            out.insert(p.display().to_string(), sha256_hex(&bytes));
        }
        Ok(out)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects written files so the manifest can list them.
struct Outputs {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl Outputs {
    fn new(root: &Path) -> Outputs {
        Outputs { root: root.to_path_buf(), files: BTreeMap::new() }
    }

    fn put(&mut self, rel: &str, content: &str) -> Result<(), PipelineError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| PipelineError::Data(format!("{}: {e}", dir.display())))?;
        }
        fs::write(&path, content).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
        self.files.insert(rel.to_string(), sha256_hex(content.as_bytes()));
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    graphs: BTreeMap<String, String>,
    parameters: serde_json::Value,
    outputs: BTreeMap<String, String>,
}

fn write_manifest(
    run: &Run,
    mut outputs: Outputs,
    command: &str,
    graphs: BTreeMap<String, String>,
    parameters: serde_json::Value,
) -> Result<Vec<String>, PipelineError> {
    let manifest = Manifest {
        tool: "semnet",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: run.config.seed,
        config: run.config_record(),
        inputs: run.input_hashes()?,
        graphs,
        parameters,
        outputs: outputs.files.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let name = format!("manifest_{command}.json");
    outputs.put(&name, &text)?;
    Ok(outputs.files.into_keys().collect())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn graph_file(agent: &str, layer: LayerKind) -> String {
    format!("graphs/{agent}_{layer}.tsv")
}

/// One row of the network statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub agent: String,
    pub layer: LayerKind,
    pub nodes: usize,
    pub edges: usize,
    pub density: f64,
    pub mean_degree: f64,
}

impl NetworkStats {
    pub fn of(agent: &str, layer: LayerKind, g: &WeightedGraph) -> NetworkStats {
        NetworkStats {
            agent: agent.to_string(),
            layer,
            nodes: g.node_count(),
            edges: g.edge_count(),
            density: g.density(),
            mean_degree: g.mean_degree(),
        }
    }
}

/// Density to four decimals and mean degree to an integer, then the
/// unrounded values.
pub fn stats_csv(rows: &[NetworkStats]) -> String {
    let mut out = String::from("agent,layer,nodes,edges,density,mean_degree,density_exact,mean_degree_exact\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.4},{},{},{}\n",
            r.agent,
            r.layer,
            r.nodes,
            r.edges,
            r.density,
            r.mean_degree.round() as u64,
            r.density,
            r.mean_degree
        ));
    }
    out
}

#[derive(Debug, Serialize)]
struct LayerBuildRecord<'a> {
    agent: &'a str,
    layer: LayerKind,
    input: String,
    parse: &'a ParseReport,
    build: &'a BuildReport,
    graph_hash: String,
}

struct AgentBuild {
    name: String,
    words: WordTable,
    layers: Vec<(LayerKind, String, ParseReport, crate::ingest::LayerBuild)>,
}

fn build_agent(run: &Run, agent: &AgentConfig, vocab: &Vocabulary) -> Result<AgentBuild, PipelineError> {
    let fmt = |d: &Option<FormatDescriptor>| d.clone().unwrap_or_default();
    let mut words = WordTable::new();
    let (assoc, p1) = parse_associations(&run.resolve(&agent.association_file), &fmt(&agent.association_format))?;
    let (defs, p2) = parse_definitions(&run.resolve(&agent.definitions_file), &fmt(&agent.definitions_format))?;
    let (rels, p3) = parse_relations(&run.resolve(&agent.relations_file), &fmt(&agent.relations_format))?;
    let tag = |e: IngestError| PipelineError::Data(format!("agent {}: {e}", agent.name));
    let l1 = build_association_layer(&assoc, vocab, &mut words).map_err(tag)?;
    let l2 = build_definition_layer(&defs, vocab, &mut words).map_err(tag)?;
    let l3 = build_relation_layer(&rels, vocab, &mut words).map_err(tag)?;
    Ok(AgentBuild {
        name: agent.name.clone(),
        words,
        layers: vec![
            (LayerKind::Associative, agent.association_file.display().to_string(), p1, l1),
            (LayerKind::Definitional, agent.definitions_file.display().to_string(), p2, l2),
            (LayerKind::Categorical, agent.relations_file.display().to_string(), p3, l3),
        ],
    })
}

pub struct CommandOutput {
    pub files: Vec<String>,
    pub summary: String,
}

pub fn cmd_build(run: &Run) -> Result<CommandOutput, PipelineError> {
    let vocab = Vocabulary::load(&run.resolve(&run.config.vocabulary_file))?;
    let builds: Vec<AgentBuild> =
        run.config.agents.par_iter().map(|a| build_agent(run, a, &vocab)).collect::<Result<_, _>>()?;
    let mut out = Outputs::new(run.output_dir());
    let mut stats = Vec::new();
    let mut graphs = BTreeMap::new();
    for b in &builds {
        for (kind, input, parse, layer) in &b.layers {
            let text = write_graph(&layer.graph, &b.words);
            let name = graph_file(&b.name, *kind);
            out.put(&name, &text)?;
            let hash = graph_hash(&layer.graph, &b.words);
            let record =
                LayerBuildRecord { agent: &b.name, layer: *kind, input: input.clone(), parse, build: &layer.report, graph_hash: hash.clone() };
            out.put(&format!("graphs/{}_{}.report.json", b.name, kind), &to_json(&record))?;
            graphs.insert(name, hash);
            stats.push(NetworkStats::of(&b.name, *kind, &layer.graph));
        }
    }
    let table = stats_csv(&stats);
    out.put("network_stats.csv", &table)?;
    let params = serde_json::json!({ "idiosyncratic_threshold": 1.0 });
    let files = write_manifest(run, out, "build", graphs, params)?;
    Ok(CommandOutput { files, summary: table })
}

/// Reads every agent's three graph files back into one network per agent.
pub fn load_networks(run: &Run) -> Result<(Vec<MultilayerNetwork>, BTreeMap<String, String>), PipelineError> {
    let mut nets = Vec::new();
    let mut hashes = BTreeMap::new();
    for a in &run.config.agents {
        let mut words = WordTable::new();
        let mut layers = Vec::new();
        for kind in LayerKind::ALL {
            let rel = graph_file(&a.name, kind);
            let path = run.output_dir().join(&rel);
            let text = fs::read_to_string(&path)
                .map_err(|e| PipelineError::Data(format!("{}: {e} (run `semnet build` first)", path.display())))?;
            let g = read_graph(&text, &mut words).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
            hashes.insert(rel, graph_hash(&g, &words));
            layers.push((kind, g));
        }
        let mut m = MultilayerNetwork::new(a.name.clone(), words);
        for (kind, g) in layers {
            m.add_layer(kind, g).map_err(|e| PipelineError::Data(e.to_string()))?;
        }
        nets.push(m);
    }
    Ok((nets, hashes))
}

pub fn cmd_stats(run: &Run) -> Result<CommandOutput, PipelineError> {
    let (nets, hashes) = load_networks(run)?;
    let rows: Vec<NetworkStats> =
        nets.iter().flat_map(|m| m.layers().iter().map(|(k, g)| NetworkStats::of(&m.agent, *k, g))).collect();
    let table = stats_csv(&rows);
    let mut out = Outputs::new(run.output_dir());
    out.put("network_stats.csv", &table)?;
    let files = write_manifest(run, out, "stats", hashes, serde_json::json!({}))?;
    Ok(CommandOutput { files, summary: table })
}

pub fn cmd_reduce(run: &Run) -> Result<CommandOutput, PipelineError> {
    let (nets, hashes) = load_networks(run)?;
    let cfg = run.eigen_config();
    let mut out = Outputs::new(run.output_dir());
    let mut summary = String::new();
    for m in &nets {
        let r = reduce(m, &cfg)?;
        out.put(&format!("reduction_{}.json", m.agent), &to_json(&r))?;
        out.put(&format!("qcurve_{}.csv", m.agent), &r.q_curve_csv())?;
        out.put(&format!("qcurve_{}.svg", m.agent), &render_q_curve(&r))?;
        summary.push_str(&format!(
            "{}: optimal {} (q = {}){}{}\n",
            m.agent,
            r.partition_label(&r.optimal),
            r.q_curve[r.optimal_index].q,
            if r.irreducible { ", irreducible" } else { "" },
            if r.degenerate { ", degenerate" } else { "" }
        ));
    }
    let files = write_manifest(run, out, "reduce", hashes, serde_json::json!({ "eigen": cfg }))?;
    Ok(CommandOutput { files, summary })
}

#[derive(Debug, Serialize)]
struct SpreadRecord {
    agent: String,
    layer: LayerKind,
    params: SpreadParams,
    diameter: Option<Diameter>,
    coverage: Coverage,
}

pub fn cmd_spread(run: &Run) -> Result<CommandOutput, PipelineError> {
    let (nets, hashes) = load_networks(run)?;
    let lex = run.lexicon()?;
    let jobs: Vec<(&MultilayerNetwork, LayerKind, &WeightedGraph)> =
        nets.iter().flat_map(|m| m.layers().iter().map(move |(k, g)| (m, *k, g))).collect();
    let results: Vec<(SpreadRecord, ActivationMatrix)> = jobs
        .par_iter()
        .map(|(m, kind, g)| {
            let tag = |e: ActivationError| PipelineError::from(e).with_context(&format!("{} {}", m.agent, kind));
            let (params, diameter) = run.config.spread.resolve(g, run.diameter_mode()).map_err(tag)?;
            let (matrix, coverage) =
                activation_matrix(g, &m.words, &lex.prime_words(), &lex.target_words(), &params).map_err(tag)?;
            Ok((SpreadRecord { agent: m.agent.clone(), layer: *kind, params, diameter, coverage }, matrix))
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut out = Outputs::new(run.output_dir());
    let mut summary = String::new();
    for (rec, matrix) in &results {
        out.put(&format!("activation/{}_{}.csv", rec.agent, rec.layer), &matrix.to_csv())?;
        summary.push_str(&format!(
            "{} {}: {} primes x {} targets, {} steps\n",
            rec.agent,
            rec.layer,
            matrix.rows(),
            matrix.cols(),
            rec.params.time_steps
        ));
    }
    let records: Vec<&SpreadRecord> = results.iter().map(|(r, _)| r).collect();
    let files = write_manifest(run, out, "spread", hashes, serde_json::json!({ "lexicon": lex.name, "layers": records }))?;
    Ok(CommandOutput { files, summary })
}

impl PipelineError {
    fn with_context(self, ctx: &str) -> PipelineError {
        match self {
            PipelineError::Validation(m) => PipelineError::Validation(format!("{ctx}: {m}")),
            PipelineError::Data(m) => PipelineError::Data(format!("{ctx}: {m}")),
            PipelineError::Numeric(m) => PipelineError::Numeric(format!("{ctx}: {m}")),
        }
    }
}

fn side_matrix(normalized: &ActivationMatrix, lex: &Lexicon, gender: Gender) -> ActivationMatrix {
    let targets: Vec<String> = lex.targets.iter().filter(|t| t.gender == gender).map(|t| t.word.clone()).collect();
    normalized.select_columns(&targets)
}

fn female_rows(m: &ActivationMatrix, lex: &Lexicon) -> usize {
    m.primes.iter().filter(|p| lex.prime_pairs.iter().any(|pair| &pair.female == *p)).count()
}

fn heatmap_files(out: &mut Outputs, agent: &str, layer: LayerKind, m: &ActivationMatrix, lex: &Lexicon) -> Result<(), PipelineError> {
    for gender in Gender::ALL {
        let side = side_matrix(m, lex, gender);
        let stem = format!("heatmap_{agent}_{layer}_{gender}");
        out.put(&format!("{stem}.csv"), &side.to_csv())?;
        if side.cols() > 0 {
            out.put(&format!("{stem}.svg"), &render_heatmap(&side, &heatmap_style(agent, layer, gender, &side, lex))?)?;
        }
    }
    Ok(())
}

fn heatmap_style(agent: &str, layer: LayerKind, gender: Gender, m: &ActivationMatrix, lex: &Lexicon) -> HeatmapStyle {
    HeatmapStyle {
        title: format!("Normalized activation, {agent} {layer} layer, {gender}-stereotyped targets"),
        range: Some((0.0, 1.0 / m.rows().max(1) as f64 * 2.0)),
        group_break: Some(female_rows(m, lex)),
        ..Default::default()
    }
}

fn effect_files(out: &mut Outputs, report: &BiasReport) -> Result<(), PipelineError> {
    for mode in [EffectMode::Disaggregated, EffectMode::Aggregated] {
        out.put(&format!("effects_{}.csv", mode.as_str()), &effect_plot_csv(report, mode))?;
        match render_effect_plot(report, mode) {
            Ok(svg) => out.put(&format!("effects_{}.svg", mode.as_str()), &svg)?,
            Err(RenderError::EmptyReport) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

pub fn cmd_bias(run: &Run) -> Result<CommandOutput, PipelineError> {
    let (nets, hashes) = load_networks(run)?;
    let lex = run.lexicon()?;
    let refs: Vec<&MultilayerNetwork> = nets.iter().collect();
    let (report, layers) = bias_report(&refs, &lex, &run.config.spread, run.diameter_mode());
    let mut out = Outputs::new(run.output_dir());
    out.put("bias_report.json", &report.to_json())?;
    out.put("bias_report.csv", &report.to_csv())?;
    for lb in &layers {
        heatmap_files(&mut out, &lb.agent, lb.layer, &lb.normalized, &lex)?;
    }
    effect_files(&mut out, &report)?;
    let summary = bias_summary(&report, &layers);
    let files = write_manifest(run, out, "bias", hashes, serde_json::json!({ "lexicon": lex.name, "layers": report.layers }))?;
    Ok(CommandOutput { files, summary })
}

fn bias_summary(report: &BiasReport, layers: &[LayerBias]) -> String {
    let mut s = String::new();
    for lb in layers {
        for c in lb.cells.iter().filter(|c| c.topic.is_none()) {
            match &c.effect {
                Some(e) => s.push_str(&format!("{} {} {}: r = {:.4}, p = {:.4}, n = {}\n", c.agent, c.layer, c.gender, e.r, e.p_value, e.n_pairs)),
                None => s.push_str(&format!("{} {} {}: {}\n", c.agent, c.layer, c.gender, c.error.as_deref().unwrap_or("missing"))),
            }
        }
    }
    let failed = report.cells.iter().filter(|c| c.effect.is_none()).count();
    if failed > 0 {
        s.push_str(&format!("{failed} cells without an effect size\n"));
    }
    s
}

/// Redraws every figure from the JSON and CSV files already in the output.
pub fn cmd_render(run: &Run) -> Result<CommandOutput, PipelineError> {
    let root = run.output_dir();
    let read = |rel: &str| fs::read_to_string(root.join(rel)).map_err(|e| PipelineError::Data(format!("{}: {e}", root.join(rel).display())));
    let lex = run.lexicon()?;
    let mut out = Outputs::new(root);
    let mut rendered = 0;
    for a in &run.config.agents {
        let rel = format!("reduction_{}.json", a.name);
        if root.join(&rel).is_file() {
            let r: ReductionReport = serde_json::from_str(&read(&rel)?).map_err(|e| PipelineError::Data(format!("{rel}: {e}")))?;
            out.put(&format!("qcurve_{}.svg", a.name), &render_q_curve(&r))?;
            rendered += 1;
        }
        for layer in LayerKind::ALL {
            for gender in Gender::ALL {
                let stem = format!("heatmap_{}_{}_{}", a.name, layer, gender);
                if !root.join(format!("{stem}.csv")).is_file() {
                    continue;
                }
                let m = ActivationMatrix::from_csv(&read(&format!("{stem}.csv"))?, true).map_err(|e| PipelineError::Data(format!("{stem}.csv: {e}")))?;
                if m.cols() > 0 {
                    out.put(&format!("{stem}.svg"), &render_heatmap(&m, &heatmap_style(&a.name, layer, gender, &m, &lex))?)?;
                    rendered += 1;
                }
            }
        }
    }
    if root.join("bias_report.json").is_file() {
        let report: BiasReport =
            serde_json::from_str(&read("bias_report.json")?).map_err(|e| PipelineError::Data(format!("bias_report.json: {e}")))?;
        effect_files(&mut out, &report)?;
        rendered += 2;
    }
    if rendered == 0 {
        return Err(PipelineError::Data(format!("nothing to render in {} (run reduce or bias first)", root.display())));
    }
    let files = write_manifest(run, out, "render", BTreeMap::new(), serde_json::json!({}))?;
    Ok(CommandOutput { files, summary: format!("rendered {rendered} figures\n") })
}
