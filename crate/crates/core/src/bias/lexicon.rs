use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BiasError;
use crate::graph::normalize_word;

const DEFAULT_LEXICON: &str = include_str!("../../assets/lexicon_v1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    Traits,
    HomeCareer,
    ArtScience,
    Professions,
}

impl Topic {
    pub const ALL: [Topic; 4] = [Topic::Traits, Topic::HomeCareer, Topic::ArtScience, Topic::Professions];

    pub fn as_str(self) -> &'static str {
        match self {
            Topic::Traits => "traits",
            Topic::HomeCareer => "home_career",
            Topic::ArtScience => "art_science",
            Topic::Professions => "professions",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Topic::Traits => "Traits",
            Topic::HomeCareer => "Home/Career",
            Topic::ArtScience => "Art/Science",
            Topic::Professions => "Professions",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimePair {
    pub female: String,
    pub male: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub word: String,
    pub topic: Topic,
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexicon {
    pub version: u32,
    pub name: String,
    pub prime_pairs: Vec<PrimePair>,
    pub targets: Vec<Target>,
}

impl Lexicon {
    /// The bundled gender-stereotype lexicon: five prime pairs and 172 targets.
    pub fn default_v1() -> Lexicon {
        Lexicon::from_json(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn from_json(text: &str) -> Result<Lexicon, BiasError> {
        let mut lex: Lexicon = serde_json::from_str(text).map_err(|e| BiasError::Lexicon(e.to_string()))?;
        for p in &mut lex.prime_pairs {
            p.female = normalize_word(&p.female);
            p.male = normalize_word(&p.male);
        }
        for t in &mut lex.targets {
            t.word = normalize_word(&t.word);
        }
        lex.validate()?;
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Lexicon, BiasError> {
        let text = std::fs::read_to_string(path).map_err(|e| BiasError::Lexicon(format!("{}: {e}", path.display())))?;
        Lexicon::from_json(&text)
    }

    fn validate(&self) -> Result<(), BiasError> {
        let bad = |m: String| Err(BiasError::Lexicon(m));
        if self.prime_pairs.is_empty() {
            return bad("no prime pairs".into());
        }
        let mut primes = BTreeSet::new();
        for w in self.primes() {
            if w.is_empty() || !primes.insert(w) {
                return bad(format!("empty or repeated prime {w:?}"));
            }
        }
        let mut targets = BTreeSet::new();
        for t in &self.targets {
            if t.word.is_empty() || !targets.insert(t.word.as_str()) {
                return bad(format!("empty or repeated target {:?}", t.word));
            }
            if primes.contains(t.word.as_str()) {
                return bad(format!("{:?} is both a prime and a target", t.word));
            }
        }
        if self.targets.is_empty() {
            return bad("no targets".into());
        }
        Ok(())
    }

    /// Female primes first, then male primes, each in pair order.
    pub fn primes(&self) -> impl Iterator<Item = &str> {
        self.prime_pairs.iter().map(|p| p.female.as_str()).chain(self.prime_pairs.iter().map(|p| p.male.as_str()))
    }

    pub fn prime_words(&self) -> Vec<String> {
        self.primes().map(str::to_string).collect()
    }

    pub fn target_words(&self) -> Vec<String> {
        self.targets.iter().map(|t| t.word.clone()).collect()
    }

    pub fn targets_of(&self, topic: Topic, gender: Gender) -> impl Iterator<Item = &Target> {
        self.targets.iter().filter(move |t| t.topic == topic && t.gender == gender)
    }

    pub fn prime_target_combinations(&self) -> usize {
        2 * self.prime_pairs.len() * self.targets.len()
    }
}
