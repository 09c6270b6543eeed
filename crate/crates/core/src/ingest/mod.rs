//! Readers for free-association, definition and relation tables, and the
//! builders that turn them into layers.
//!
//! All inputs are UTF-8 delimited text with a header row. A
//! [`FormatDescriptor`] maps the logical columns each reader needs onto the
//! file's own header names, so differently shaped releases load through the
//! same code. Rows that cannot be used are skipped and tallied in a
//! [`ParseReport`] rather than failing the whole file.

mod build;
mod graph_io;

pub use build::{
    build_association_layer, build_definition_layer, build_relation_layer, tokenize_definition, BuildReport, LayerBuild,
};
pub use graph_io::{graph_hash, read_graph, write_graph, GraphFormatError};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::normalize_word;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: file is empty")]
    EmptyFile { path: String },
    #[error("{path}: missing columns {missing:?} (header has {header:?})")]
    MissingColumns { path: String, missing: Vec<String>, header: Vec<String> },
    #[error("{path}: line {line}: {message}")]
    Malformed { path: String, line: u64, message: String },
    #[error("{path}: vocabulary is empty")]
    EmptyVocabulary { path: String },
    #[error("{path}: invalid format descriptor: {message}")]
    Descriptor { path: String, message: String },
    #[error("no input records for the {0} layer")]
    NoRecords(&'static str),
    #[error("the {0} layer is empty after filtering")]
    EmptyAfterFiltering(&'static str),
}

/// Column mapping for one input table.
///
/// `columns` maps a logical column name (`cue`, `response`, `count`,
/// `headword`, `sense`, `definition`, `relation`, `related`) to the header
/// name used in the file; unmapped logical names are looked up verbatim.
/// `responses` lists the per-trial response columns of raw association
/// files (SWOW-style `R1`, `R2`, `R3`). Values listed in `missing` are
/// treated like empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatDescriptor {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub columns: BTreeMap<String, String>,
    #[serde(default)]
    pub responses: Vec<String>,
    #[serde(default)]
    pub missing: Vec<String>,
}

fn default_delimiter() -> char {
    '\t'
}

impl Default for FormatDescriptor {
    fn default() -> Self {
        FormatDescriptor { delimiter: '\t', columns: BTreeMap::new(), responses: Vec::new(), missing: Vec::new() }
    }
}

impl FormatDescriptor {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn column<'a>(&'a self, logical: &'a str) -> &'a str {
        self.columns.get(logical).map(String::as_str).unwrap_or(logical)
    }

    fn is_missing(&self, value: &str) -> bool {
        let v = value.trim();
        v.is_empty() || self.missing.iter().any(|m| m == v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AssociationRecord {
    pub cue: String,
    pub response: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DefinitionRecord {
    pub headword: String,
    pub sense_index: u32,
    pub definition_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Synonym,
    Antonym,
    Hyponym,
    Hypernym,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Synonym => "synonym",
            Relation::Antonym => "antonym",
            Relation::Hyponym => "hyponym",
            Relation::Hypernym => "hypernym",
        }
    }

    /// Accepts singular and plural spellings, case-insensitively.
    pub fn parse(s: &str) -> Option<Relation> {
        let s = s.trim().to_lowercase();
        let s = s.strip_suffix('s').unwrap_or(&s);
        match s {
            "synonym" => Some(Relation::Synonym),
            "antonym" => Some(Relation::Antonym),
            "hyponym" => Some(Relation::Hyponym),
            "hypernym" => Some(Relation::Hypernym),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationRecord {
    pub headword: String,
    pub sense_index: u32,
    pub relation: Relation,
    pub related: String,
}

/// Row-level accounting for one parsed file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows: u64,
    pub records: u64,
    pub skipped: BTreeMap<String, u64>,
}

impl ParseReport {
    fn skip(&mut self, reason: &str) {
        *self.skipped.entry(reason.to_string()).or_insert(0) += 1;
    }

    pub fn skipped_total(&self) -> u64 {
        self.skipped.values().sum()
    }
}

/// Lemma inventory, one entry per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: BTreeSet<String>,
}

impl Vocabulary {
    pub fn from_words<I: IntoIterator<Item = S>, S: AsRef<str>>(words: I) -> Self {
        Vocabulary { words: words.into_iter().map(|w| normalize_word(w.as_ref())).filter(|w| !w.is_empty()).collect() }
    }

    pub fn read<R: BufRead>(reader: R, path: &str) -> Result<Self, IngestError> {
        let mut words = BTreeSet::new();
        for line in reader.lines() {
            let line = line.map_err(|source| IngestError::Io { path: path.to_string(), source })?;
            let w = normalize_word(&line);
            if !w.is_empty() {
                words.insert(w);
            }
        }
        if words.is_empty() {
            return Err(IngestError::EmptyVocabulary { path: path.to_string() });
        }
        Ok(Vocabulary { words })
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let name = path.display().to_string();
        let file = File::open(path).map_err(|source| IngestError::Io { path: name.clone(), source })?;
        Self::read(BufReader::new(file), &name)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn words(&self) -> &BTreeSet<String> {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

struct Table {
    header: HashMap<String, usize>,
    header_names: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table<R: Read>(reader: R, desc: &FormatDescriptor, path: &str) -> Result<Table, IngestError> {
    if !desc.delimiter.is_ascii() {
        return Err(IngestError::Descriptor { path: path.to_string(), message: "delimiter must be ASCII".into() });
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(desc.delimiter as u8)
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let header_names: Vec<String> = match records.next() {
        None => return Err(IngestError::EmptyFile { path: path.to_string() }),
        Some(r) => r
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(|s| s.trim().trim_start_matches('\u{feff}').to_string())
            .collect(),
    };
    let header = header_names.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile { path: path.to_string() });
    }
    Ok(Table { header, header_names, rows })
}

fn csv_error(path: &str, e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => IngestError::Io { path: path.to_string(), source },
        other => IngestError::Malformed { path: path.to_string(), line, message: format!("{other:?}") },
    }
}

impl Table {
    fn resolve(&self, names: &[&str], path: &str) -> Result<Vec<usize>, IngestError> {
        let missing: Vec<String> = names.iter().filter(|n| !self.header.contains_key(**n)).map(|n| n.to_string()).collect();
        if !missing.is_empty() {
            return Err(IngestError::MissingColumns {
                path: path.to_string(),
                missing,
                header: self.header_names.clone(),
            });
        }
        Ok(names.iter().map(|n| self.header[*n]).collect())
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// Reads an association table.
///
/// If the descriptor lists `responses` columns, or the header has no count
/// column but has `R1`.., each row is one trial and responses are counted;
/// otherwise each row is an aggregated `(cue, response, count)` triple.
/// Repeated pairs are summed; output keeps first-appearance order.
pub fn read_associations<R: Read>(
    reader: R,
    desc: &FormatDescriptor,
    path: &str,
) -> Result<(Vec<AssociationRecord>, ParseReport), IngestError> {
    let table = read_table(reader, desc, path)?;
    let cue_col = desc.column("cue");
    let mut response_cols: Vec<&str> = desc.responses.iter().map(String::as_str).collect();
    if response_cols.is_empty() && !table.header.contains_key(desc.column("count")) {
        let raw: Vec<&str> = table
            .header_names
            .iter()
            .map(String::as_str)
            .filter(|h| h.len() > 1 && h.starts_with('R') && h[1..].chars().all(|c| c.is_ascii_digit()))
            .collect();
        if !raw.is_empty() {
            response_cols = raw;
        }
    }

    let mut report = ParseReport::default();
    let mut counts: IndexMap<(String, String), u64> = IndexMap::new();

    if response_cols.is_empty() {
        let idx = table.resolve(&[cue_col, desc.column("response"), desc.column("count")], path)?;
        for (_, row) in &table.rows {
            report.rows += 1;
            if row.len() < table.header_names.len() {
                report.skip("short_row");
                continue;
            }
            let (cue, response, count) = (&row[idx[0]], &row[idx[1]], &row[idx[2]]);
            if desc.is_missing(cue) {
                report.skip("empty_cue");
                continue;
            }
            if desc.is_missing(response) {
                report.skip("empty_response");
                continue;
            }
            let count = match count.trim().parse::<u64>() {
                Ok(c) if c >= 1 => c,
                _ => {
                    report.skip("bad_count");
                    continue;
                }
            };
            *counts.entry((normalize_word(cue), normalize_word(response))).or_insert(0) += count;
        }
    } else {
        let mut names = vec![cue_col];
        names.extend(response_cols.iter().copied());
        let idx = table.resolve(&names, path)?;
        for (_, row) in &table.rows {
            report.rows += 1;
            let cue = row.get(idx[0]).map(String::as_str).unwrap_or("");
            if desc.is_missing(cue) {
                report.skip("empty_cue");
                continue;
            }
            let cue = normalize_word(cue);
            for &col in &idx[1..] {
                match row.get(col) {
                    Some(r) if !desc.is_missing(r) => {
                        *counts.entry((cue.clone(), normalize_word(r))).or_insert(0) += 1;
                    }
                    _ => report.skip("empty_response"),
                }
            }
        }
    }

    let records: Vec<AssociationRecord> =
        counts.into_iter().map(|((cue, response), count)| AssociationRecord { cue, response, count }).collect();
    report.records = records.len() as u64;
    Ok((records, report))
}

pub fn parse_associations(
    path: &Path,
    desc: &FormatDescriptor,
) -> Result<(Vec<AssociationRecord>, ParseReport), IngestError> {
    read_associations(open(path)?, desc, &path.display().to_string())
}

/// Reads `(headword, sense, definition)` rows. Repeated `(headword, sense)`
/// keys keep the first row.
pub fn read_definitions<R: Read>(
    reader: R,
    desc: &FormatDescriptor,
    path: &str,
) -> Result<(Vec<DefinitionRecord>, ParseReport), IngestError> {
    let table = read_table(reader, desc, path)?;
    let idx = table.resolve(&[desc.column("headword"), desc.column("sense"), desc.column("definition")], path)?;
    let mut report = ParseReport::default();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (_, row) in &table.rows {
        report.rows += 1;
        if row.len() < table.header_names.len() {
            report.skip("short_row");
            continue;
        }
        if desc.is_missing(&row[idx[0]]) {
            report.skip("empty_headword");
            continue;
        }
        let Ok(sense_index) = row[idx[1]].trim().parse::<u32>() else {
            report.skip("bad_sense");
            continue;
        };
        let headword = normalize_word(&row[idx[0]]);
        if !seen.insert((headword.clone(), sense_index)) {
            report.skip("duplicate_sense");
            continue;
        }
        out.push(DefinitionRecord { headword, sense_index, definition_text: row[idx[2]].trim().to_string() });
    }
    report.records = out.len() as u64;
    Ok((out, report))
}

pub fn parse_definitions(
    path: &Path,
    desc: &FormatDescriptor,
) -> Result<(Vec<DefinitionRecord>, ParseReport), IngestError> {
    read_definitions(open(path)?, desc, &path.display().to_string())
}

/// Reads `(headword, sense, relation, related)` rows.
pub fn read_relations<R: Read>(
    reader: R,
    desc: &FormatDescriptor,
    path: &str,
) -> Result<(Vec<RelationRecord>, ParseReport), IngestError> {
    let table = read_table(reader, desc, path)?;
    let idx = table.resolve(
        &[desc.column("headword"), desc.column("sense"), desc.column("relation"), desc.column("related")],
        path,
    )?;
    let mut report = ParseReport::default();
    let mut out = Vec::new();
    for (_, row) in &table.rows {
        report.rows += 1;
        if row.len() < table.header_names.len() {
            report.skip("short_row");
            continue;
        }
        if desc.is_missing(&row[idx[0]]) {
            report.skip("empty_headword");
            continue;
        }
        if desc.is_missing(&row[idx[3]]) {
            report.skip("empty_related");
            continue;
        }
        let Ok(sense_index) = row[idx[1]].trim().parse::<u32>() else {
            report.skip("bad_sense");
            continue;
        };
        let Some(relation) = Relation::parse(&row[idx[2]]) else {
            report.skip("unknown_relation");
            continue;
        };
        out.push(RelationRecord {
            headword: normalize_word(&row[idx[0]]),
            sense_index,
            relation,
            related: normalize_word(&row[idx[3]]),
        });
    }
    report.records = out.len() as u64;
    Ok((out, report))
}

pub fn parse_relations(
    path: &Path,
    desc: &FormatDescriptor,
) -> Result<(Vec<RelationRecord>, ParseReport), IngestError> {
    read_relations(open(path)?, desc, &path.display().to_string())
}

/// Aggregated `cue\tresponse\tcount` table.
pub fn write_associations<W: Write>(mut w: W, records: &[AssociationRecord]) -> io::Result<()> {
    writeln!(w, "cue\tresponse\tcount")?;
    for r in records {
        writeln!(w, "{}\t{}\t{}", r.cue, r.response, r.count)?;
    }
    Ok(())
}

pub fn write_definitions<W: Write>(mut w: W, records: &[DefinitionRecord]) -> io::Result<()> {
    writeln!(w, "headword\tsense\tdefinition")?;
    for r in records {
        writeln!(w, "{}\t{}\t{}", r.headword, r.sense_index, r.definition_text)?;
    }
    Ok(())
}

pub fn write_relations<W: Write>(mut w: W, records: &[RelationRecord]) -> io::Result<()> {
    writeln!(w, "headword\tsense\trelation\trelated")?;
    for r in records {
        writeln!(w, "{}\t{}\t{}\t{}", r.headword, r.sense_index, r.relation.as_str(), r.related)?;
    }
    Ok(())
}
