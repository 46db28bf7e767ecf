//! Candidate concepts: morphemes, words, and contiguous word N-grams.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Alphabet, Sentence};
use crate::error::{Error, Result};

/// Largest phrase length considered.
pub const MAX_PHRASE_LEN: usize = 5;

/// Built-in English suffixes for the fallback segmenter.
pub const DEFAULT_SUFFIXES: [&str; 8] = ["s", "es", "ed", "ing", "er", "est", "ly", "ion"];

/// A suffix is only stripped when at least this many characters remain.
const MIN_STEM_CHARS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConceptKind {
    Morpheme,
    Word,
    /// Contiguous run of N words, 2 ≤ N ≤ 5.
    Phrase(u8),
}

impl ConceptKind {
    pub fn name(&self) -> String {
        match self {
            ConceptKind::Morpheme => "morpheme".into(),
            ConceptKind::Word => "word".into(),
            ConceptKind::Phrase(n) => format!("phrase{n}"),
        }
    }

    /// Granularity bin: morpheme 0, word 1, phraseN at N.
    pub fn bin(&self) -> usize {
        match self {
            ConceptKind::Morpheme => 0,
            ConceptKind::Word => 1,
            ConceptKind::Phrase(n) => *n as usize,
        }
    }

    pub fn is_morpheme(&self) -> bool {
        matches!(self, ConceptKind::Morpheme)
    }
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl std::str::FromStr for ConceptKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "morpheme" => Ok(ConceptKind::Morpheme),
            "word" => Ok(ConceptKind::Word),
            _ => s
                .strip_prefix("phrase")
                .and_then(|n| n.parse::<u8>().ok())
                .filter(|n| (2..=MAX_PHRASE_LEN as u8).contains(n))
                .map(ConceptKind::Phrase)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown concept kind {s:?}"))),
        }
    }
}

impl Serialize for ConceptKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for ConceptKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A text span tagged with its granularity. Ordered by text, then kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Concept {
    pub text: String,
    pub kind: ConceptKind,
}

impl Concept {
    pub fn new(text: impl Into<String>, kind: ConceptKind) -> Self {
        Concept {
            text: text.into(),
            kind,
        }
    }

    pub fn word(text: impl Into<String>) -> Self {
        Concept::new(text, ConceptKind::Word)
    }

    pub fn morpheme(text: impl Into<String>) -> Self {
        Concept::new(text, ConceptKind::Morpheme)
    }

    /// Builds a word or phrase from whitespace-separated text.
    pub fn span(text: &str) -> Self {
        let words: Vec<&str> = text.split_whitespace().collect();
        match words.len() {
            1 => Concept::word(words[0]),
            n => Concept::new(words.join(" "), ConceptKind::Phrase(n as u8)),
        }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }

    /// Whether the concept occurs in `text`: substring match for
    /// morphemes, whole-token match for words and phrases.
    pub fn occurs_in(&self, text: &str) -> bool {
        if self.kind.is_morpheme() {
            return text.contains(self.text.as_str());
        }
        let needle: Vec<&str> = self.words().collect();
        let tokens: Vec<&str> = text.split_whitespace().collect();
        contains_window(&tokens, &needle)
    }

    /// Character ranges covered by leftmost, non-overlapping occurrences.
    pub fn occurrences(&self, text: &str) -> Vec<std::ops::Range<usize>> {
        if self.kind.is_morpheme() {
            if self.text.is_empty() {
                return Vec::new();
            }
            let mut out = Vec::new();
            let mut chars_before = 0;
            let mut last_byte = 0;
            let width = self.text.chars().count();
            for (byte, _) in text.match_indices(self.text.as_str()) {
                chars_before += text[last_byte..byte].chars().count();
                last_byte = byte;
                out.push(chars_before..chars_before + width);
            }
            return out;
        }
        let needle: Vec<&str> = self.words().collect();
        let tokens = tokens_with_offsets(text);
        let mut out = Vec::new();
        let mut i = 0;
        while !needle.is_empty() && i + needle.len() <= tokens.len() {
            let window = &tokens[i..i + needle.len()];
            if window.iter().zip(&needle).all(|(t, n)| t.text == *n) {
                let last = &window[needle.len() - 1];
                out.push(window[0].start..last.start + last.chars);
                i += needle.len();
            } else {
                i += 1;
            }
        }
        out
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.text, self.kind)
    }
}

fn contains_window(tokens: &[&str], needle: &[&str]) -> bool {
    !needle.is_empty() && tokens.windows(needle.len()).any(|w| w == needle)
}

struct Token<'a> {
    text: &'a str,
    /// Character offset of the first character.
    start: usize,
    chars: usize,
}

fn tokens_with_offsets(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut char_pos = 0;
    for (byte, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some((b, cs)) = start.take() {
                out.push(Token {
                    text: &text[b..byte],
                    start: cs,
                    chars: char_pos - cs,
                });
            }
        } else if start.is_none() {
            start = Some((byte, char_pos));
        }
        char_pos += 1;
    }
    if let Some((b, cs)) = start {
        out.push(Token {
            text: &text[b..],
            start: cs,
            chars: char_pos - cs,
        });
    }
    out
}

/// Splits words into morphemes.
///
/// A user lexicon is consulted first: a word listed in it gets its listed
/// segmentation, otherwise a greedy longest-prefix decomposition over the
/// lexicon's morpheme inventory is tried. Words the lexicon cannot fully
/// cover fall back to stripping the longest matching built-in suffix that
/// leaves a stem of at least three characters.
#[derive(Debug, Clone)]
pub struct Segmenter {
    lexicon: HashMap<String, Vec<String>>,
    inventory: Vec<String>,
    suffixes: Vec<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter::with_suffixes(DEFAULT_SUFFIXES.iter().map(|s| s.to_string()).collect())
    }
}

impl Segmenter {
    pub fn with_suffixes(mut suffixes: Vec<String>) -> Self {
        // Longest first; ties alphabetical for a stable choice.
        suffixes.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
        Segmenter {
            lexicon: HashMap::new(),
            inventory: Vec::new(),
            suffixes,
        }
    }

    /// Adds a lexicon. Entries whose segments do not concatenate to the
    /// word are rejected.
    pub fn with_lexicon(mut self, lexicon: HashMap<String, Vec<String>>) -> Result<Self> {
        let mut inventory = BTreeSet::new();
        for (word, segs) in &lexicon {
            if segs.concat() != *word || segs.iter().any(String::is_empty) {
                return Err(Error::InvalidConfig(format!(
                    "lexicon segments {segs:?} do not spell {word:?}"
                )));
            }
            inventory.extend(segs.iter().cloned());
        }
        let mut inventory: Vec<String> = inventory.into_iter().collect();
        inventory.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        self.lexicon = lexicon;
        self.inventory = inventory;
        Ok(self)
    }

    pub fn segment(&self, word: &str) -> Vec<String> {
        if let Some(segs) = self.lexicon.get(word) {
            return segs.clone();
        }
        if let Some(segs) = self.greedy(word) {
            return segs;
        }
        self.strip_suffix(word)
    }

    fn greedy(&self, word: &str) -> Option<Vec<String>> {
        if self.inventory.is_empty() {
            return None;
        }
        let mut rest = word;
        let mut segs = Vec::new();
        while !rest.is_empty() {
            let piece = self.inventory.iter().find(|m| rest.starts_with(m.as_str()))?;
            segs.push(piece.clone());
            rest = &rest[piece.len()..];
        }
        (segs.len() > 1).then_some(segs)
    }

    fn strip_suffix(&self, word: &str) -> Vec<String> {
        if !word.chars().all(char::is_alphabetic) {
            return vec![word.to_string()];
        }
        let total = word.chars().count();
        for suffix in &self.suffixes {
            let n = suffix.chars().count();
            if word.ends_with(suffix.as_str()) && total >= n + MIN_STEM_CHARS {
                let stem = &word[..word.len() - suffix.len()];
                return vec![stem.to_string(), suffix.clone()];
            }
        }
        vec![word.to_string()]
    }
}

pub fn segment_morphemes(word: &str, segmenter: &Segmenter) -> Vec<String> {
    segmenter.segment(word)
}

/// Reads a lexicon file: `word<TAB>seg1 seg2 …` per line.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<HashMap<String, Vec<String>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(&text)
}

pub fn parse_lexicon(text: &str) -> Result<HashMap<String, Vec<String>>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (word, segs) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
            line: i + 1,
            reason: "expected word<TAB>segments".into(),
        })?;
        let segs: Vec<String> = segs.split_whitespace().map(str::to_string).collect();
        if segs.is_empty() {
            return Err(Error::MalformedLine {
                line: i + 1,
                reason: "no segments".into(),
            });
        }
        out.entry(word.trim().to_string()).or_insert(segs);
    }
    Ok(out)
}

/// The candidate concepts of one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub layer: usize,
    pub unit: usize,
    pub concepts: Vec<Concept>,
}

/// Every word, every contiguous word N-gram with N ≤ `max_n`, and the
/// morphemes of every word that splits, deduplicated and sorted.
pub fn extract_candidates(sentences: &[&Sentence], segmenter: &Segmenter, max_n: usize) -> Vec<Concept> {
    let max_n = max_n.clamp(1, MAX_PHRASE_LEN);
    let mut set = BTreeSet::new();
    for s in sentences {
        let tokens: Vec<&str> = s.text.split_whitespace().collect();
        for n in 1..=max_n.min(tokens.len()) {
            for window in tokens.windows(n) {
                set.insert(Concept::span(&window.join(" ")));
            }
        }
        for word in &tokens {
            let segs = segmenter.segment(word);
            if segs.len() > 1 {
                set.extend(segs.into_iter().map(Concept::morpheme));
            }
        }
    }
    set.into_iter().collect()
}

/// A concept tiled to a target length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicatedSentence {
    pub concept: Concept,
    pub text: String,
    pub encoded: Vec<usize>,
}

impl ReplicatedSentence {
    pub fn new(concept: &Concept, target_chars: usize, alphabet: &Alphabet) -> Self {
        let text = replicate_text(&concept.text, target_chars);
        let encoded = alphabet.encode(&text);
        ReplicatedSentence {
            concept: concept.clone(),
            text,
            encoded,
        }
    }
}

/// Repeats `text` with single-space separators as many whole times as fit in
/// `target_chars`, keeping at least one copy.
pub fn replicate_text(text: &str, target_chars: usize) -> String {
    let len = text.chars().count();
    let copies = ((target_chars + 1) / (len + 1)).max(1);
    vec![text; copies].join(" ")
}

pub fn replicate(concept: &Concept, target_chars: usize, alphabet: &Alphabet) -> ReplicatedSentence {
    ReplicatedSentence::new(concept, target_chars, alphabet)
}
