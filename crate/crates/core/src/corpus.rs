//! Text corpora over a fixed character alphabet.
//!
//! A corpus file holds one sentence per line, optionally prefixed by an
//! integer class label and a tab (`label<TAB>text`). Text is case-folded on
//! ingestion when the alphabet folds case, so everything downstream
//! (candidate extraction, containment, occlusion) sees the same characters
//! the model sees.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercase letters, digits, space, and the usual character-CNN punctuation.
pub const DEFAULT_CHARACTERS: &str =
    "abcdefghijklmnopqrstuvwxyz0123456789 -,;.!?:'\"()/|_#$%&*~+=<>[]{}";

/// Display character for out-of-alphabet input when decoding.
pub const UNKNOWN_CHAR: char = '\u{fffd}';
/// Display character for occluded positions when decoding.
pub const DUMMY_CHAR: char = '\u{2591}';

/// Serializable description of an [`Alphabet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlphabetSpec {
    pub characters: String,
    pub case_fold: bool,
}

impl Default for AlphabetSpec {
    fn default() -> Self {
        AlphabetSpec {
            characters: DEFAULT_CHARACTERS.to_string(),
            case_fold: true,
        }
    }
}

/// Character-to-index mapping.
///
/// Real characters occupy `0..len()`, followed by `unknown_index` and then
/// `dummy_index`. The dummy index never comes out of [`Alphabet::encode`];
/// only occlusion writes it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "AlphabetSpec", into = "AlphabetSpec")]
pub struct Alphabet {
    characters: Vec<char>,
    index: HashMap<char, usize>,
    case_fold: bool,
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.characters == other.characters && self.case_fold == other.case_fold
    }
}

impl Eq for Alphabet {}

impl From<AlphabetSpec> for Alphabet {
    fn from(spec: AlphabetSpec) -> Self {
        Alphabet::new(&spec)
    }
}

impl From<Alphabet> for AlphabetSpec {
    fn from(alphabet: Alphabet) -> Self {
        alphabet.spec()
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet::new(&AlphabetSpec::default())
    }
}

impl Alphabet {
    /// Builds an alphabet; repeated characters keep their first position.
    pub fn new(spec: &AlphabetSpec) -> Self {
        let mut characters = Vec::new();
        let mut index = HashMap::new();
        for c in spec.characters.chars() {
            let c = if spec.case_fold { fold_char(c) } else { c };
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(c) {
                e.insert(characters.len());
                characters.push(c);
            }
        }
        Alphabet {
            characters,
            index,
            case_fold: spec.case_fold,
        }
    }

    pub fn spec(&self) -> AlphabetSpec {
        AlphabetSpec {
            characters: self.characters.iter().collect(),
            case_fold: self.case_fold,
        }
    }

    /// Number of real characters.
    pub fn len(&self) -> usize {
        self.characters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characters.is_empty()
    }

    pub fn unknown_index(&self) -> usize {
        self.characters.len()
    }

    pub fn dummy_index(&self) -> usize {
        self.characters.len() + 1
    }

    /// Total number of indices, including unknown and dummy.
    pub fn vocab_size(&self) -> usize {
        self.characters.len() + 2
    }

    pub fn case_fold(&self) -> bool {
        self.case_fold
    }

    /// Applies the alphabet's case folding. Character count is preserved.
    pub fn normalize(&self, text: &str) -> String {
        if self.case_fold {
            text.chars().map(fold_char).collect()
        } else {
            text.to_string()
        }
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.chars()
            .map(|c| {
                let c = if self.case_fold { fold_char(c) } else { c };
                self.index.get(&c).copied().unwrap_or(self.unknown_index())
            })
            .collect()
    }

    pub fn decode(&self, encoded: &[usize]) -> String {
        encoded
            .iter()
            .map(|&i| match self.characters.get(i) {
                Some(&c) => c,
                None if i == self.dummy_index() => DUMMY_CHAR,
                None => UNKNOWN_CHAR,
            })
            .collect()
    }
}

/// Lowercases a character when its lowercase form is a single character.
fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: usize,
    pub text: String,
    pub label: Option<usize>,
    pub encoded: Vec<usize>,
}

impl Sentence {
    pub fn new(id: usize, text: impl Into<String>, label: Option<usize>, alphabet: &Alphabet) -> Self {
        let text = text.into();
        let encoded = alphabet.encode(&text);
        Sentence {
            id,
            text,
            label,
            encoded,
        }
    }

    /// Length in characters.
    pub fn len(&self) -> usize {
        self.encoded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encoded.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    alphabet: Alphabet,
    avg_char_length: f64,
    num_classes: usize,
}

impl Corpus {
    /// Builds a corpus from already-encoded sentences.
    ///
    /// Sentence ids are expected to equal their position; labels must be
    /// below `num_classes`.
    pub fn new(sentences: Vec<Sentence>, alphabet: Alphabet, num_classes: usize) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        for (pos, s) in sentences.iter().enumerate() {
            if s.id != pos {
                return Err(Error::InvalidConfig(format!(
                    "sentence at position {pos} has id {}",
                    s.id
                )));
            }
            if s.is_empty() {
                return Err(Error::MalformedLine {
                    line: pos + 1,
                    reason: "empty sentence".into(),
                });
            }
            if let Some(label) = s.label {
                if label >= num_classes {
                    return Err(Error::LabelOutOfRange {
                        line: pos + 1,
                        label,
                        num_classes,
                    });
                }
            }
        }
        let total: usize = sentences.iter().map(Sentence::len).sum();
        let avg_char_length = total as f64 / sentences.len() as f64;
        Ok(Corpus {
            sentences,
            alphabet,
            avg_char_length,
            num_classes,
        })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn sentence(&self, id: usize) -> Option<&Sentence> {
        self.sentences.get(id)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn avg_char_length(&self) -> f64 {
        self.avg_char_length
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Target length for replicated probe sentences: the average sentence
    /// length rounded down, at least 1.
    pub fn replication_length(&self) -> usize {
        (self.avg_char_length.floor() as usize).max(1)
    }

    pub fn is_labeled(&self) -> bool {
        self.sentences.iter().all(|s| s.label.is_some())
    }

    /// Serializes in the corpus file format (`label<TAB>text` or `text`).
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            match s.label {
                Some(label) => writeln!(out, "{label}\t{}", s.text),
                None => writeln!(out, "{}", s.text),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Reads a corpus file.
///
/// `num_classes` declares the label range; when `None` it is inferred as one
/// more than the largest label seen.
pub fn load_corpus(
    path: impl AsRef<Path>,
    alphabet: &AlphabetSpec,
    num_classes: Option<usize>,
) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, alphabet, num_classes)
}

pub fn parse_corpus(
    text: &str,
    alphabet: &AlphabetSpec,
    num_classes: Option<usize>,
) -> Result<Corpus> {
    let alphabet = Alphabet::new(alphabet);
    let mut sentences = Vec::new();
    let mut max_label = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let (label, body) = match line.split_once('\t') {
            Some((label, body)) => {
                let label: usize = label.trim().parse().map_err(|_| Error::MalformedLine {
                    line: line_no,
                    reason: format!("label {label:?} is not a non-negative integer"),
                })?;
                if let Some(n) = num_classes {
                    if label >= n {
                        return Err(Error::LabelOutOfRange {
                            line: line_no,
                            label,
                            num_classes: n,
                        });
                    }
                }
                max_label = max_label.max(Some(label));
                (Some(label), body)
            }
            None => (None, line),
        };
        if body.trim().is_empty() {
            return Err(Error::MalformedLine {
                line: line_no,
                reason: "empty sentence".into(),
            });
        }
        let id = sentences.len();
        sentences.push(Sentence::new(id, alphabet.normalize(body), label, &alphabet));
    }
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let num_classes = num_classes.unwrap_or_else(|| max_label.map_or(0, |l| l + 1));
    Corpus::new(sentences, alphabet, num_classes)
}

/// A class-defining keyword or phrase planted into synthetic sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub text: String,
    pub class: usize,
    /// Probability that a sentence of `class` contains this plant.
    pub probability: f64,
}

/// Declarative description of a planted-concept corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: Vec<String>,
    pub filler: Vec<String>,
    pub plants: Vec<PlantSpec>,
    pub sentences: usize,
    pub min_words: usize,
    pub max_words: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub alphabet: AlphabetSpec,
}

impl SyntheticSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.classes.is_empty() {
            return bad("zero classes".into());
        }
        if self.filler.is_empty() {
            return bad("empty filler vocabulary".into());
        }
        if self.sentences == 0 {
            return bad("zero sentences requested".into());
        }
        if self.min_words > self.max_words {
            return bad(format!(
                "min_words {} exceeds max_words {}",
                self.min_words, self.max_words
            ));
        }
        for plant in &self.plants {
            if plant.class >= self.classes.len() {
                return bad(format!("plant {:?} names unknown class {}", plant.text, plant.class));
            }
            if !(0.0..=1.0).contains(&plant.probability) {
                return bad(format!("plant {:?} probability outside [0, 1]", plant.text));
            }
            if plant.text.split_whitespace().next().is_none() {
                return bad("empty plant text".into());
            }
        }
        for class in 0..self.classes.len() {
            if !self.plants.iter().any(|p| p.class == class) {
                return bad(format!("class {class} has no plants, its label would be undecidable"));
            }
        }
        let plant_words: Vec<&str> = self
            .plants
            .iter()
            .flat_map(|p| p.text.split_whitespace())
            .collect();
        for word in &self.filler {
            if word.split_whitespace().count() != 1 {
                return bad(format!("filler entry {word:?} is not a single word"));
            }
            if plant_words.contains(&word.as_str()) {
                return bad(format!("filler word {word:?} is also a plant word"));
            }
        }
        Ok(())
    }
}

/// A generated corpus plus its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub plants: Vec<PlantSpec>,
    /// Indices into `plants` inserted into each sentence, by sentence id.
    pub occurrences: Vec<Vec<usize>>,
}

/// Generates a labeled corpus with planted class keywords.
///
/// Each sentence draws a class uniformly, a filler length uniformly from
/// `min_words..=max_words`, and includes each plant of its class
/// independently with the plant's probability. A sentence that drew none of
/// its class's plants gets one, chosen in proportion to the probabilities, so
/// every label is decidable from the planted text.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let alphabet = Alphabet::new(&spec.alphabet);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_classes = spec.classes.len();
    let by_class: Vec<Vec<usize>> = (0..num_classes)
        .map(|c| (0..spec.plants.len()).filter(|&i| spec.plants[i].class == c).collect())
        .collect();

    let mut sentences = Vec::with_capacity(spec.sentences);
    let mut occurrences = Vec::with_capacity(spec.sentences);
    for id in 0..spec.sentences {
        let class = rng.random_range(0..num_classes);
        let n_words = rng.random_range(spec.min_words..=spec.max_words);
        let mut words: Vec<&str> = (0..n_words)
            .map(|_| spec.filler.choose(&mut rng).expect("filler is nonempty").as_str())
            .collect();

        let candidates = &by_class[class];
        let mut chosen: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| rng.random_bool(spec.plants[i].probability))
            .collect();
        if chosen.is_empty() {
            chosen.push(weighted_pick(&mut rng, candidates, &spec.plants));
        }
        for &p in &chosen {
            let at = rng.random_range(0..=words.len());
            words.insert(at, spec.plants[p].text.as_str());
        }

        let text = alphabet.normalize(&words.join(" "));
        sentences.push(Sentence::new(id, text, Some(class), &alphabet));
        occurrences.push(chosen);
    }

    Ok(SyntheticCorpus {
        corpus: Corpus::new(sentences, alphabet, num_classes)?,
        plants: spec.plants.clone(),
        occurrences,
    })
}

fn weighted_pick(rng: &mut ChaCha8Rng, candidates: &[usize], plants: &[PlantSpec]) -> usize {
    let total: f64 = candidates.iter().map(|&i| plants[i].probability).sum();
    if total <= 0.0 {
        return *candidates.choose(rng).expect("class has plants");
    }
    let mut x = rng.random_range(0.0..total);
    for &i in candidates {
        x -= plants[i].probability;
        if x < 0.0 {
            return i;
        }
    }
    *candidates.last().expect("class has plants")
}
