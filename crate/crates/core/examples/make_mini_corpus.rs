//! Writes the synthetic two-agent corpus used by the pipeline tests.
//!
//! Usage: `cargo run --example make_mini_corpus -- <dir>`
//!
//! Words fall into themed clusters; responses, definition tokens and
//! relations are drawn mostly from a word's own cluster. Gender primes lean
//! towards same-gender targets with a per-layer strength, so the layers
//! carry different amounts of stereotype bias.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semnet::bias::{Gender, Lexicon, Topic};

const CLUSTERS: usize = 10;
const FILLERS_PER_CLUSTER: usize = 22;
const STOPWORDS: [&str; 6] = ["a", "the", "of", "to", "for", "with"];

struct World {
    words: Vec<String>,
    cluster: BTreeMap<String, usize>,
    members: Vec<Vec<String>>,
    female_primes: Vec<String>,
    male_primes: Vec<String>,
    female_targets: Vec<String>,
    male_targets: Vec<String>,
}

fn pseudo_words(n: usize) -> Vec<String> {
    let onset = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
    let vowel = ["a", "e", "i", "o", "u"];
    let mut out = Vec::new();
    'outer: for a in onset {
        for b in vowel {
            for c in onset {
                for d in vowel {
                    out.push(format!("{a}{b}{c}{d}x"));
                    if out.len() == n {
                        break 'outer;
                    }
                }
            }
        }
    }
    out
}

fn topic_cluster(topic: Topic, gender: Gender) -> usize {
    2 * (topic as usize) + gender as usize
}

fn world(lex: &Lexicon) -> World {
    let fillers = pseudo_words(CLUSTERS * FILLERS_PER_CLUSTER);
    let mut members = vec![Vec::new(); CLUSTERS];
    let mut cluster = BTreeMap::new();
    for (i, w) in fillers.iter().enumerate() {
        let c = i % CLUSTERS;
        members[c].push(w.clone());
        cluster.insert(w.clone(), c);
    }
    for t in &lex.targets {
        let c = topic_cluster(t.topic, t.gender);
        members[c].push(t.word.clone());
        cluster.insert(t.word.clone(), c);
    }
    for (i, p) in lex.prime_pairs.iter().enumerate() {
        // primes live in the two generic clusters
        cluster.insert(p.female.clone(), 8 + i % 2);
        cluster.insert(p.male.clone(), 8 + (i + 1) % 2);
        members[8 + i % 2].push(p.female.clone());
        members[8 + (i + 1) % 2].push(p.male.clone());
    }
    let mut words: Vec<String> = cluster.keys().cloned().collect();
    words.sort();
    let pick = |g: Gender| lex.targets.iter().filter(|t| t.gender == g).map(|t| t.word.clone()).collect::<Vec<_>>();
    World {
        words,
        cluster,
        members,
        female_primes: lex.prime_pairs.iter().map(|p| p.female.clone()).collect(),
        male_primes: lex.prime_pairs.iter().map(|p| p.male.clone()).collect(),
        female_targets: pick(Gender::Female),
        male_targets: pick(Gender::Male),
    }
}

impl World {
    /// One associate of `cue`. `bias` is the chance that a prime picks a
    /// same-gender target when it picks a target at all.
    fn associate(&self, cue: &str, bias: f64, rng: &mut ChaCha8Rng) -> String {
        let female = self.female_primes.iter().any(|p| p == cue);
        let male = self.male_primes.iter().any(|p| p == cue);
        if (female || male) && rng.random::<f64>() < 0.6 {
            let same = rng.random::<f64>() < bias;
            let pool = if female == same { &self.female_targets } else { &self.male_targets };
            return pool.choose(rng).unwrap().clone();
        }
        if rng.random::<f64>() < 0.15 {
            return self.words.choose(rng).unwrap().clone();
        }
        let c = self.cluster[cue];
        let c = if rng.random::<f64>() < 0.2 { c ^ 1 } else { c };
        self.members[c].choose(rng).unwrap().clone()
    }
}

struct Agent {
    name: &'static str,
    seed: u64,
    assoc_bias: f64,
    def_bias: f64,
    rel_bias: f64,
}

fn associations_raw(w: &World, a: &Agent, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from("participant\tcue\tR1\tR2\tR3\n");
    let mut participant = 0;
    for cue in &w.words {
        for _ in 0..14 {
            participant += 1;
            let mut row = vec![format!("p{participant}"), cue.clone()];
            for _ in 0..3 {
                row.push(if rng.random::<f64>() < 0.08 { "NA".to_string() } else { w.associate(cue, a.assoc_bias, rng) });
            }
            writeln!(out, "{}", row.join("\t")).unwrap();
        }
    }
    out
}

fn associations_counted(w: &World, a: &Agent, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from("source,target,n\n");
    for cue in &w.words {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for _ in 0..40 {
            *counts.entry(w.associate(cue, a.assoc_bias, rng)).or_default() += 1;
        }
        for (resp, n) in counts {
            writeln!(out, "{cue},{resp},{n}").unwrap();
        }
    }
    out
}

fn definitions(w: &World, a: &Agent, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from("headword\tsense\tdefinition\n");
    for head in &w.words {
        let senses = 1 + rng.random_range(0..2);
        for s in 1..=senses {
            let mut tokens = Vec::new();
            for _ in 0..rng.random_range(4..8) {
                if rng.random::<f64>() < 0.3 {
                    tokens.push(STOPWORDS.choose(rng).unwrap().to_string());
                } else {
                    tokens.push(w.associate(head, a.def_bias, rng));
                }
            }
            writeln!(out, "{head}\t{s}\t{}.", tokens.join(" ")).unwrap();
        }
    }
    out
}

fn relations(w: &World, a: &Agent, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from("headword\tsense\trelation\trelated\n");
    let kinds = ["synonym", "antonym", "hyponyms", "hypernym"];
    for head in &w.words {
        let c = w.cluster[head];
        let category = &w.members[c][0];
        if head != category {
            writeln!(out, "{head}\t1\thypernym\t{category}").unwrap();
        }
        for _ in 0..rng.random_range(1..4) {
            let kind = *kinds.choose(rng).unwrap();
            let related = if kind == "antonym" { w.members[c ^ 1].choose(rng).unwrap().clone() } else { w.associate(head, a.rel_bias, rng) };
            writeln!(out, "{head}\t{}\t{kind}\t{related}", 1 + rng.random_range(0..2)).unwrap();
        }
    }
    out
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/fixtures/mini".into()));
    fs::create_dir_all(&dir).expect("create output directory");
    let lex = Lexicon::default_v1();
    let w = world(&lex);
    assert!(w.words.len() <= 500, "{} words", w.words.len());
    fs::write(dir.join("vocabulary.txt"), w.words.join("\n") + "\n").unwrap();
    let agents = [
        Agent { name: "humans", seed: 1, assoc_bias: 0.8, def_bias: 0.6, rel_bias: 0.4 },
        Agent { name: "model", seed: 2, assoc_bias: 0.7, def_bias: 0.55, rel_bias: 0.5 },
    ];
    for a in &agents {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let assoc = if a.name == "humans" { associations_raw(&w, a, &mut rng) } else { associations_counted(&w, a, &mut rng) };
        let ext = if a.name == "humans" { "tsv" } else { "csv" };
        fs::write(dir.join(format!("{}_associations.{ext}", a.name)), assoc).unwrap();
        fs::write(dir.join(format!("{}_definitions.tsv", a.name)), definitions(&w, a, &mut rng)).unwrap();
        fs::write(dir.join(format!("{}_relations.tsv", a.name)), relations(&w, a, &mut rng)).unwrap();
    }
    println!("{} words written to {}", w.words.len(), dir.display());
}
