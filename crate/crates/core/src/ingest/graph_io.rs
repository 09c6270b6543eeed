//! Edge-list files: a `#nodes N` header, then `word1<TAB>word2<TAB>weight`
//! lines with `word1 < word2`, sorted lexicographically. Isolated nodes, if
//! any, follow as `#isolated word` lines so a graph reads back unchanged.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{NodeId, WeightedGraph, WordTable};

#[derive(Debug, Error, PartialEq)]
pub enum GraphFormatError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing `#nodes N` header")]
    MissingHeader,
    #[error("header declares {declared} nodes but {found} were read")]
    NodeCountMismatch { declared: usize, found: usize },
}

pub fn write_graph(g: &WeightedGraph, words: &WordTable) -> String {
    let mut edges: Vec<(&str, &str, f64)> = g
        .edges()
        .map(|(a, b, w)| {
            let (x, y) = (words.word(a), words.word(b));
            if x < y {
                (x, y, w)
            } else {
                (y, x, w)
            }
        })
        .collect();
    edges.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
    let mut isolated: Vec<&str> = {
        let adj = g.adjacency();
        (0..adj.len()).filter(|&i| adj.degree(i) == 0).map(|i| words.word(adj.node(i))).collect()
    };
    isolated.sort_unstable();

    let mut out = String::new();
    writeln!(out, "#nodes {}", g.node_count()).unwrap();
    for (a, b, w) in edges {
        writeln!(out, "{a}\t{b}\t{w}").unwrap();
    }
    for w in isolated {
        writeln!(out, "#isolated {w}").unwrap();
    }
    out
}

pub fn read_graph(text: &str, words: &mut WordTable) -> Result<WeightedGraph, GraphFormatError> {
    let mut lines = text.lines().enumerate();
    let declared = loop {
        match lines.next() {
            None => return Err(GraphFormatError::MissingHeader),
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => {
                let n = l
                    .strip_prefix("#nodes ")
                    .ok_or(GraphFormatError::MissingHeader)?
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| GraphFormatError::Line { line: i + 1, message: e.to_string() })?;
                break n;
            }
        }
    };
    let mut g = WeightedGraph::new();
    let intern = |words: &mut WordTable, w: &str, line: usize| -> Result<NodeId, GraphFormatError> {
        words.intern(w).ok_or(GraphFormatError::Line { line, message: "empty word".into() })
    };
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(word) = line.strip_prefix("#isolated ") {
            let id = intern(words, word, line_no)?;
            g.add_node(id);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(GraphFormatError::Line { line: line_no, message: format!("expected 3 fields, got {}", fields.len()) });
        }
        let w: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e: std::num::ParseFloatError| GraphFormatError::Line { line: line_no, message: e.to_string() })?;
        let a = intern(words, fields[0], line_no)?;
        let b = intern(words, fields[1], line_no)?;
        match g.set_edge(a, b, w) {
            Ok(true) => {}
            Ok(false) => return Err(GraphFormatError::Line { line: line_no, message: "self-loop".into() }),
            Err(e) => return Err(GraphFormatError::Line { line: line_no, message: e.to_string() }),
        }
    }
    if g.node_count() != declared {
        return Err(GraphFormatError::NodeCountMismatch { declared, found: g.node_count() });
    }
    Ok(g)
}

/// SHA-256 of the canonical edge-list text, hex encoded.
pub fn graph_hash(g: &WeightedGraph, words: &WordTable) -> String {
    hex::encode(Sha256::digest(write_graph(g, words).as_bytes()))
}
