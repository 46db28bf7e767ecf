//! Concept alignment: top-K retrieval, degree-of-alignment scoring, and
//! top-M selection per unit.
//!
//! The degree of alignment (DoA) of a concept to a unit is the unit's mean
//! activation on a probe sentence made by tiling the concept up to the
//! corpus average length. Two baseline scores (PMI and occlusion) are kept
//! for comparison only.

use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charcnn::Model;
use crate::concepts::{extract_candidates, replicate_text, Concept, Segmenter, MAX_PHRASE_LEN};
use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::evaluation::occlude;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    /// Top sentences retrieved per unit.
    pub k: usize,
    /// Concepts kept per unit.
    pub m: usize,
    /// Longest phrase candidate, in words.
    pub max_n: usize,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig { k: 10, m: 3, max_n: 5 }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::InvalidConfig("k and m must be at least 1".into()));
        }
        if !(1..=MAX_PHRASE_LEN).contains(&self.max_n) {
            return Err(Error::InvalidConfig(format!(
                "max_n {} outside 1..={MAX_PHRASE_LEN}",
                self.max_n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopSentence {
    pub id: usize,
    pub activation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredConcept {
    pub concept: Concept,
    pub doa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitAlignment {
    pub layer: usize,
    pub unit: usize,
    pub top_sentences: Vec<TopSentence>,
    /// Sorted by DoA descending, ties by concept.
    pub aligned: Vec<ScoredConcept>,
}

impl UnitAlignment {
    /// The first `m` aligned concepts.
    pub fn truncated(&self, m: usize) -> UnitAlignment {
        UnitAlignment {
            aligned: self.aligned.iter().take(m).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.aligned.iter().map(|s| &s.concept)
    }

    pub fn contains(&self, concept: &Concept) -> bool {
        self.concepts().any(|c| c == concept)
    }
}

/// Orders by score descending (NaN last), then by concept.
fn by_score_desc(a: &ScoredConcept, b: &ScoredConcept) -> std::cmp::Ordering {
    b.doa
        .total_cmp(&a.doa)
        .then_with(|| a.concept.cmp(&b.concept))
}

/// The `k` largest values with their indices; ties go to the smaller index.
pub fn rank_top_k(values: &[f64], k: usize) -> Vec<TopSentence> {
    let mut ranked: Vec<TopSentence> = values
        .iter()
        .enumerate()
        .map(|(id, &activation)| TopSentence { id, activation })
        .collect();
    ranked.sort_by(|a, b| b.activation.total_cmp(&a.activation).then(a.id.cmp(&b.id)));
    ranked.truncate(k);
    ranked
}

/// `a_u(s)` for every corpus sentence and every unit.
#[derive(Debug, Clone)]
pub struct CorpusActivations {
    /// Per layer, `(sentences, units)`.
    layers: Vec<Array2<f64>>,
}

impl CorpusActivations {
    pub fn compute(model: &Model, corpus: &Corpus) -> Result<Self> {
        if model.alphabet() != corpus.alphabet() {
            return Err(Error::AlphabetMismatch);
        }
        let inputs: Vec<&[usize]> = corpus.sentences().iter().map(|s| s.encoded.as_slice()).collect();
        let rows = mean_activations_of(model, &inputs);
        let layers = (0..model.num_layers())
            .map(|l| {
                let units = model.units(l);
                let mut a = Array2::zeros((rows.len(), units));
                for (i, row) in rows.iter().enumerate() {
                    for (u, &v) in row[l].iter().enumerate() {
                        a[[i, u]] = v;
                    }
                }
                a
            })
            .collect();
        Ok(CorpusActivations { layers })
    }

    pub fn num_sentences(&self) -> usize {
        self.layers.first().map_or(0, |a| a.nrows())
    }

    pub fn get(&self, layer: usize, unit: usize, sentence: usize) -> f64 {
        self.layers[layer][[sentence, unit]]
    }

    pub fn unit(&self, layer: usize, unit: usize) -> Vec<f64> {
        self.layers[layer].column(unit).to_vec()
    }

    pub fn top_k(&self, layer: usize, unit: usize, k: usize) -> Vec<TopSentence> {
        rank_top_k(&self.unit(layer, unit), k)
    }

    pub fn max(&self, layer: usize, unit: usize) -> f64 {
        self.layers[layer]
            .column(unit)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self, layer: usize, unit: usize) -> f64 {
        self.layers[layer]
            .column(unit)
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Mean activations for a batch of encoded inputs, in input order.
pub fn mean_activations_of(model: &Model, inputs: &[&[usize]]) -> Vec<Vec<Vec<f64>>> {
    inputs.par_iter().map(|enc| model.mean_activations(enc)).collect()
}

/// Mean activations on replicated probes, keyed by concept text.
///
/// DoA depends only on the text, so a word and a morpheme with the same
/// spelling share one probe.
#[derive(Debug, Clone, Default)]
pub struct ProbeCache {
    target_chars: usize,
    probes: HashMap<String, Vec<Vec<f64>>>,
}

impl ProbeCache {
    pub fn new(target_chars: usize) -> Self {
        ProbeCache {
            target_chars,
            probes: HashMap::new(),
        }
    }

    pub fn target_chars(&self) -> usize {
        self.target_chars
    }

    /// Computes probes for any texts not yet cached.
    pub fn fill<'a>(&mut self, model: &Model, texts: impl IntoIterator<Item = &'a str>) {
        let missing: BTreeSet<&str> = texts
            .into_iter()
            .filter(|t| !self.probes.contains_key(*t))
            .collect();
        let missing: Vec<&str> = missing.into_iter().collect();
        let target = self.target_chars;
        let computed: Vec<Vec<Vec<f64>>> = missing
            .par_iter()
            .map(|t| model.mean_activations(&model.alphabet().encode(&replicate_text(t, target))))
            .collect();
        for (t, acts) in missing.into_iter().zip(computed) {
            self.probes.insert(t.to_string(), acts);
        }
    }

    pub fn get(&self, text: &str, layer: usize, unit: usize) -> Option<f64> {
        self.probes.get(text).map(|p| p[layer][unit])
    }
}

/// Tokenized corpus for repeated containment queries.
#[derive(Debug, Clone)]
pub struct ContainmentIndex<'a> {
    texts: Vec<&'a str>,
    tokens: Vec<Vec<&'a str>>,
}

impl<'a> ContainmentIndex<'a> {
    pub fn new(corpus: &'a Corpus) -> Self {
        let texts: Vec<&str> = corpus.sentences().iter().map(|s| s.text.as_str()).collect();
        let tokens = texts.iter().map(|t| t.split_whitespace().collect()).collect();
        ContainmentIndex { texts, tokens }
    }

    pub fn contains(&self, sentence: usize, concept: &Concept) -> bool {
        if concept.kind.is_morpheme() {
            return self.texts[sentence].contains(concept.text.as_str());
        }
        let needle: Vec<&str> = concept.words().collect();
        let tokens = &self.tokens[sentence];
        !needle.is_empty() && tokens.windows(needle.len()).any(|w| w == needle.as_slice())
    }

    /// Number of sentences containing the concept.
    pub fn doc_freq(&self, concept: &Concept) -> usize {
        (0..self.texts.len()).filter(|&i| self.contains(i, concept)).count()
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

/// PMI between membership in the unit's top-K set and containing the
/// concept. Returns negative infinity when the concept never occurs in the
/// corpus or in the top-K sentences.
pub fn doa_pmi(top_k_ids: &[usize], corpus: &Corpus, concept: &Concept) -> f64 {
    let index = ContainmentIndex::new(corpus);
    pmi_from_counts(
        corpus.len(),
        top_k_ids.len(),
        index.doc_freq(concept),
        top_k_ids.iter().filter(|&&id| index.contains(id, concept)).count(),
    )
}

/// `ln( p(u,c) / (p(u) p(c)) )` with `p(u) = K/|S|`, `p(c) = df/|S|`,
/// `p(u,c) = df_topK / K`.
pub fn pmi_from_counts(corpus_size: usize, k: usize, doc_freq: usize, top_k_freq: usize) -> f64 {
    if doc_freq == 0 || top_k_freq == 0 || k == 0 {
        return f64::NEG_INFINITY;
    }
    let n = corpus_size as f64;
    let p_u = k as f64 / n;
    let p_c = doc_freq as f64 / n;
    let p_uc = top_k_freq as f64 / k as f64;
    (p_uc / (p_u * p_c)).ln()
}

/// Mean drop in `a_u` when the concept is occluded, over the given top
/// sentences that contain it; 0 when none does.
pub fn doa_occlusion(model: &Model, layer: usize, unit: usize, top_sentences: &[&Sentence], concept: &Concept) -> f64 {
    let alphabet = model.alphabet();
    let mut total = 0.0;
    let mut count = 0usize;
    for s in top_sentences {
        if !concept.occurs_in(&s.text) {
            continue;
        }
        let before = model.mean_activations(&s.encoded)[layer][unit];
        let after = model.mean_activations(&occlude(s, concept, alphabet).encoded)[layer][unit];
        total += before - after;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Mean activation of the unit on the concept's replicated probe.
pub fn doa(model: &Model, layer: usize, unit: usize, concept: &Concept, avg_len: usize) -> f64 {
    let probe = model.alphabet().encode(&replicate_text(&concept.text, avg_len));
    model.mean_activations(&probe)[layer][unit]
}

/// Top-K sentences of one unit, computed from scratch.
pub fn top_k_sentences(model: &Model, corpus: &Corpus, layer: usize, unit: usize, k: usize) -> Result<Vec<TopSentence>> {
    model.check_unit(layer, unit)?;
    if model.alphabet() != corpus.alphabet() {
        return Err(Error::AlphabetMismatch);
    }
    let values: Vec<f64> = corpus
        .sentences()
        .par_iter()
        .map(|s| model.mean_activations(&s.encoded)[layer][unit])
        .collect();
    Ok(rank_top_k(&values, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpretability {
    Interpretable,
    NonInterpretable,
}

impl Interpretability {
    /// Interpretable iff the corpus maximum is strictly below the best
    /// replicated-candidate activation.
    pub fn classify(corpus_max: f64, best_probe: f64) -> Self {
        if corpus_max < best_probe {
            Interpretability::Interpretable
        } else {
            Interpretability::NonInterpretable
        }
    }

    pub fn is_interpretable(self) -> bool {
        self == Interpretability::Interpretable
    }
}

pub fn unit_interpretability(
    model: &Model,
    corpus: &Corpus,
    layer: usize,
    unit: usize,
    candidates: &[Concept],
    avg_len: usize,
) -> Result<Interpretability> {
    model.check_unit(layer, unit)?;
    let corpus_max = top_k_sentences(model, corpus, layer, unit, 1)?
        .first()
        .map_or(f64::NEG_INFINITY, |t| t.activation);
    let best = candidates
        .par_iter()
        .map(|c| doa(model, layer, unit, c, avg_len))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Interpretability::classify(corpus_max, best))
}

/// A unit's top-K sentences and its full candidate list, scored.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitScores {
    pub layer: usize,
    pub unit: usize,
    pub top_sentences: Vec<TopSentence>,
    /// Every candidate, sorted by score descending.
    pub scored: Vec<ScoredConcept>,
}

impl UnitScores {
    pub fn alignment(&self, m: usize) -> UnitAlignment {
        UnitAlignment {
            layer: self.layer,
            unit: self.unit,
            top_sentences: self.top_sentences.clone(),
            aligned: self.scored.iter().take(m).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoaMetric {
    Replication,
    Pmi,
    Occlusion,
}

impl DoaMetric {
    pub fn name(self) -> &'static str {
        match self {
            DoaMetric::Replication => "replication",
            DoaMetric::Pmi => "pmi",
            DoaMetric::Occlusion => "occlusion",
        }
    }
}

/// Shared state for aligning many units of one model over one corpus.
pub struct Aligner<'a> {
    model: &'a Model,
    corpus: &'a Corpus,
    segmenter: &'a Segmenter,
    activations: CorpusActivations,
    index: ContainmentIndex<'a>,
    replication_len: usize,
}

impl<'a> Aligner<'a> {
    pub fn new(model: &'a Model, corpus: &'a Corpus, segmenter: &'a Segmenter) -> Result<Self> {
        Self::with_replication_len(model, corpus, segmenter, corpus.replication_length())
    }

    /// Uses an explicit probe length instead of the corpus average.
    pub fn with_replication_len(
        model: &'a Model,
        corpus: &'a Corpus,
        segmenter: &'a Segmenter,
        replication_len: usize,
    ) -> Result<Self> {
        let activations = CorpusActivations::compute(model, corpus)?;
        Ok(Aligner {
            model,
            corpus,
            segmenter,
            activations,
            index: ContainmentIndex::new(corpus),
            replication_len: replication_len.max(1),
        })
    }

    pub fn model(&self) -> &'a Model {
        self.model
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn activations(&self) -> &CorpusActivations {
        &self.activations
    }

    pub fn index(&self) -> &ContainmentIndex<'a> {
        &self.index
    }

    pub fn replication_len(&self) -> usize {
        self.replication_len
    }

    /// Every (layer, unit) in layer-major order.
    pub fn all_units(&self) -> Vec<(usize, usize)> {
        (0..self.model.num_layers())
            .flat_map(|l| (0..self.model.units(l)).map(move |u| (l, u)))
            .collect()
    }

    pub fn layer_units(&self, layer: usize) -> Vec<(usize, usize)> {
        (0..self.model.units(layer)).map(|u| (layer, u)).collect()
    }

    fn candidates_for(&self, top: &[TopSentence], max_n: usize) -> Vec<Concept> {
        let sentences: Vec<&Sentence> = top
            .iter()
            .map(|t| &self.corpus.sentences()[t.id])
            .collect();
        extract_candidates(&sentences, self.segmenter, max_n)
    }

    fn candidate_sets(&self, units: &[(usize, usize)], cfg: &AlignmentConfig) -> Result<Vec<(Vec<TopSentence>, Vec<Concept>)>> {
        cfg.validate()?;
        for &(l, u) in units {
            self.model.check_unit(l, u)?;
        }
        Ok(units
            .par_iter()
            .map(|&(l, u)| {
                let top = self.activations.top_k(l, u, cfg.k);
                let cands = self.candidates_for(&top, cfg.max_n);
                (top, cands)
            })
            .collect())
    }

    /// Scores every candidate of the given units under `metric`.
    pub fn score_units(
        &self,
        units: &[(usize, usize)],
        cfg: &AlignmentConfig,
        metric: DoaMetric,
    ) -> Result<Vec<UnitScores>> {
        let sets = self.candidate_sets(units, cfg)?;
        let mut probes = ProbeCache::new(self.replication_len);
        if metric == DoaMetric::Replication {
            probes.fill(
                self.model,
                sets.iter().flat_map(|(_, c)| c.iter().map(|c| c.text.as_str())),
            );
        }
        let doc_freq: HashMap<&Concept, usize> = if metric == DoaMetric::Pmi {
            let distinct: BTreeSet<&Concept> = sets.iter().flat_map(|(_, c)| c.iter()).collect();
            let distinct: Vec<&Concept> = distinct.into_iter().collect();
            let counts: Vec<usize> = distinct.par_iter().map(|c| self.index.doc_freq(c)).collect();
            distinct.into_iter().zip(counts).collect()
        } else {
            HashMap::new()
        };

        Ok(units
            .par_iter()
            .zip(sets.par_iter())
            .map(|(&(layer, unit), (top, cands))| {
                let mut scored: Vec<ScoredConcept> = match metric {
                    DoaMetric::Replication => cands
                        .iter()
                        .map(|c| ScoredConcept {
                            concept: c.clone(),
                            doa: probes.get(&c.text, layer, unit).expect("probe filled"),
                        })
                        .collect(),
                    DoaMetric::Pmi => cands
                        .iter()
                        .map(|c| {
                            let in_top = top.iter().filter(|t| self.index.contains(t.id, c)).count();
                            ScoredConcept {
                                concept: c.clone(),
                                doa: pmi_from_counts(self.corpus.len(), top.len(), doc_freq[c], in_top),
                            }
                        })
                        .collect(),
                    DoaMetric::Occlusion => self.occlusion_scores(layer, unit, top, cands),
                };
                scored.sort_by(by_score_desc);
                UnitScores {
                    layer,
                    unit,
                    top_sentences: top.clone(),
                    scored,
                }
            })
            .collect())
    }

    fn occlusion_scores(&self, layer: usize, unit: usize, top: &[TopSentence], cands: &[Concept]) -> Vec<ScoredConcept> {
        let alphabet = self.model.alphabet();
        cands
            .iter()
            .map(|c| {
                let mut total = 0.0;
                let mut count = 0usize;
                for t in top {
                    if !self.index.contains(t.id, c) {
                        continue;
                    }
                    let s = &self.corpus.sentences()[t.id];
                    let occluded = occlude(s, c, alphabet);
                    let after = self.model.mean_activations(&occluded.encoded)[layer][unit];
                    total += self.activations.get(layer, unit, t.id) - after;
                    count += 1;
                }
                ScoredConcept {
                    concept: c.clone(),
                    doa: if count == 0 { 0.0 } else { total / count as f64 },
                }
            })
            .collect()
    }

    pub fn align_units(&self, units: &[(usize, usize)], cfg: &AlignmentConfig) -> Result<Vec<UnitAlignment>> {
        Ok(self
            .score_units(units, cfg, DoaMetric::Replication)?
            .iter()
            .map(|s| s.alignment(cfg.m))
            .collect())
    }

    pub fn align_unit(&self, layer: usize, unit: usize, cfg: &AlignmentConfig) -> Result<UnitAlignment> {
        Ok(self.align_units(&[(layer, unit)], cfg)?.remove(0))
    }

    pub fn align_layer(&self, layer: usize, cfg: &AlignmentConfig) -> Result<Vec<UnitAlignment>> {
        if layer >= self.model.num_layers() {
            return Err(Error::InvalidUnit { layer, unit: 0 });
        }
        self.align_units(&self.layer_units(layer), cfg)
    }

    pub fn align_all(&self, cfg: &AlignmentConfig) -> Result<Vec<UnitAlignment>> {
        self.align_units(&self.all_units(), cfg)
    }

    /// Interpretability from an alignment's recorded maxima: the first top
    /// sentence is the corpus maximum and the first aligned concept has the
    /// largest candidate DoA.
    pub fn interpretability(alignment: &UnitAlignment) -> Interpretability {
        let corpus_max = alignment
            .top_sentences
            .first()
            .map_or(f64::NEG_INFINITY, |t| t.activation);
        let best = alignment.aligned.first().map_or(f64::NEG_INFINITY, |s| s.doa);
        Interpretability::classify(corpus_max, best)
    }
}

pub fn align_unit(
    model: &Model,
    corpus: &Corpus,
    segmenter: &Segmenter,
    layer: usize,
    unit: usize,
    cfg: &AlignmentConfig,
) -> Result<UnitAlignment> {
    Aligner::new(model, corpus, segmenter)?.align_unit(layer, unit, cfg)
}

pub fn align_all(model: &Model, corpus: &Corpus, segmenter: &Segmenter, cfg: &AlignmentConfig) -> Result<Vec<UnitAlignment>> {
    Aligner::new(model, corpus, segmenter)?.align_all(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charcnn::{LayerSpec, ModelConfig, Pooling};
    use crate::corpus::{Alphabet, AlphabetSpec};

    fn ab_alphabet() -> Alphabet {
        Alphabet::new(&AlphabetSpec {
            characters: "abc ".into(),
            case_fold: true,
        })
    }

    /// One unit, width 1, fires on 'a' only.
    fn a_detector() -> Model {
        let cfg = ModelConfig {
            embedding_dim: 2,
            layers: vec![LayerSpec { units: 1, width: 1 }],
            num_classes: 2,
            pooling: Pooling::Mean,
        };
        let mut model = Model::zeros(cfg, ab_alphabet()).unwrap();
        model.embedding_mut()[[0, 0]] = 1.0;
        model.embedding_mut()[[1, 1]] = 1.0;
        model.convs_mut()[0].weight[[0, 0, 0]] = 1.0;
        model
    }

    fn corpus_of(texts: &[&str], alphabet: &Alphabet) -> Corpus {
        let sentences = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Sentence::new(i, *t, None, alphabet))
            .collect();
        Corpus::new(sentences, alphabet.clone(), 0).unwrap()
    }

    #[test]
    fn top_k_orders_by_activation() {
        let model = a_detector();
        let corpus = corpus_of(&["bbbb", "aaaa", "abab"], model.alphabet());
        let top = top_k_sentences(&model, &corpus, 0, 0, 10).unwrap();
        let ids: Vec<usize> = top.iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![1, 2, 0]);
        assert!(matches!(
            top_k_sentences(&model, &corpus, 0, 1, 1),
            Err(Error::InvalidUnit { layer: 0, unit: 1 })
        ));
    }

    #[test]
    fn ties_break_by_sentence_id() {
        let top = rank_top_k(&[1.0, 2.0, 2.0, 1.0], 3);
        let ids: Vec<usize> = top.iter().map(|t| t.id).collect();
        assert_eq!(ids, vec![1, 2, 0]);
    }

    #[test]
    fn detector_doa() {
        let model = a_detector();
        assert!(doa(&model, 0, 0, &Concept::word("a"), 9) > doa(&model, 0, 0, &Concept::word("b"), 9));
        let zero = Model::zeros(model.config().clone(), ab_alphabet()).unwrap();
        assert_eq!(doa(&zero, 0, 0, &Concept::word("a"), 9), 0.0);
    }

    #[test]
    fn pmi_examples() {
        let alphabet = ab_alphabet();
        let corpus = corpus_of(&["a b", "a c", "a b c", "a", "a cc"], &alphabet);
        let everywhere = doa_pmi(&[0, 1], &corpus, &Concept::word("a"));
        assert!((everywhere - (5.0f64 / 2.0).ln()).abs() < 1e-12);
        assert_eq!(doa_pmi(&[0, 3], &corpus, &Concept::word("c")), f64::NEG_INFINITY);
        assert_eq!(doa_pmi(&[0], &corpus, &Concept::word("zzz")), f64::NEG_INFINITY);
    }

    #[test]
    fn occlusion_examples() {
        let model = a_detector();
        let alphabet = model.alphabet().clone();
        let s = Sentence::new(0, "a b", None, &alphabet);
        assert_eq!(doa_occlusion(&model, 0, 0, &[&s], &Concept::word("c")), 0.0);
        let drop = doa_occlusion(&model, 0, 0, &[&s], &Concept::word("a"));
        // "a b" has mean 1/3; occluded it is 0.
        assert!((drop - 1.0 / 3.0).abs() < 1e-12);
        let zero = Model::zeros(model.config().clone(), alphabet).unwrap();
        assert_eq!(doa_occlusion(&zero, 0, 0, &[&s], &Concept::word("a")), 0.0);
    }

    #[test]
    fn interpretability_rules() {
        let model = a_detector();
        let corpus = corpus_of(&["ab", "b a c"], model.alphabet());
        let i = unit_interpretability(&model, &corpus, 0, 0, &[Concept::word("a")], 5).unwrap();
        assert_eq!(i, Interpretability::Interpretable);
        let dead = Model::zeros(model.config().clone(), ab_alphabet()).unwrap();
        let i = unit_interpretability(&dead, &corpus, 0, 0, &[Concept::word("a")], 5).unwrap();
        assert_eq!(i, Interpretability::NonInterpretable);
    }

    #[test]
    fn single_sentence_corpus_aligns_within_closed_set() {
        let model = a_detector();
        let alphabet = model.alphabet().clone();
        let corpus = corpus_of(&["cab"], &alphabet);
        let seg = Segmenter::default();
        let cfg = AlignmentConfig { k: 10, m: 3, max_n: 5 };
        let a = align_unit(&model, &corpus, &seg, 0, 0, &cfg).unwrap();
        assert_eq!(a.aligned.len(), 1);
        assert_eq!(a.aligned[0].concept, Concept::word("cab"));
        let b = align_unit(&model, &corpus, &seg, 0, 0, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(AlignmentConfig { k: 0, m: 3, max_n: 5 }.validate().is_err());
        assert!(AlignmentConfig { k: 1, m: 3, max_n: 6 }.validate().is_err());
        assert!(AlignmentConfig::default().validate().is_ok());
    }
}
