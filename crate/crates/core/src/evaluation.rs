//! Quantitative analyses over alignments: selectivity, occlusion loss
//! deltas, concept distribution and granularity, interpretability, and
//! correlation statistics.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{Aligner, ContainmentIndex, CorpusActivations, UnitAlignment};
use crate::charcnn::{cross_entropy, Model};
use crate::concepts::{replicate_text, Concept, ConceptKind};
use crate::corpus::{Alphabet, Corpus, Sentence};
use crate::error::{Error, Result};

/// Replaces every occurrence of the concept with the dummy index,
/// character for character. Words and phrases match whole tokens; morphemes
/// match substrings, leftmost first and non-overlapping.
pub fn occlude(sentence: &Sentence, concept: &Concept, alphabet: &Alphabet) -> Sentence {
    let ranges = concept.occurrences(&sentence.text);
    if ranges.is_empty() {
        return sentence.clone();
    }
    let mut encoded = sentence.encoded.clone();
    let mut chars: Vec<char> = sentence.text.chars().collect();
    for r in ranges {
        for i in r {
            encoded[i] = alphabet.dummy_index();
            chars[i] = crate::corpus::DUMMY_CHAR;
        }
    }
    Sentence {
        id: sentence.id,
        text: chars.into_iter().collect(),
        label: sentence.label,
        encoded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectivityMode {
    /// Each aligned concept tiled to the replication length.
    Replicate,
    /// Each aligned concept alone.
    OneInstance,
    /// Corpus sentences containing any aligned concept.
    Inclusion,
    /// Uniform sample of corpus sentences, sized like the inclusion set.
    Random,
}

impl SelectivityMode {
    pub const ALL: [SelectivityMode; 4] = [
        SelectivityMode::Replicate,
        SelectivityMode::OneInstance,
        SelectivityMode::Inclusion,
        SelectivityMode::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectivityMode::Replicate => "replicate",
            SelectivityMode::OneInstance => "one_instance",
            SelectivityMode::Inclusion => "inclusion",
            SelectivityMode::Random => "random",
        }
    }
}

impl std::str::FromStr for SelectivityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectivityMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown selectivity mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectivityBreakdown {
    pub layer: usize,
    pub unit: usize,
    pub mode: SelectivityMode,
    pub mu_plus: f64,
    pub mu_minus: f64,
    pub act_max: f64,
    pub act_min: f64,
    pub value: f64,
}

/// Per-unit seed for random-mode sampling, independent of evaluation order.
pub fn derive_seed(seed: u64, layer: usize, unit: usize) -> u64 {
    let mut z = seed
        ^ (layer as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (unit as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mean and population variance of a group of selectivity values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectivityRow {
    pub layer: usize,
    pub mode: SelectivityMode,
    pub m: usize,
    pub mean: f64,
    pub variance: f64,
    pub units: usize,
    /// Units skipped because every corpus sentence contains an aligned
    /// concept.
    pub degenerate: usize,
}

/// Read-only evaluation context for one model and corpus.
pub struct Evaluator<'a> {
    model: &'a Model,
    corpus: &'a Corpus,
    activations: CorpusActivations,
    index: ContainmentIndex<'a>,
    replication_len: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(model: &'a Model, corpus: &'a Corpus) -> Result<Self> {
        let activations = CorpusActivations::compute(model, corpus)?;
        Ok(Self::with_activations(model, corpus, activations))
    }

    pub fn from_aligner(aligner: &Aligner<'a>) -> Self {
        Evaluator {
            model: aligner.model(),
            corpus: aligner.corpus(),
            activations: aligner.activations().clone(),
            index: aligner.index().clone(),
            replication_len: aligner.replication_len(),
        }
    }

    pub fn with_activations(model: &'a Model, corpus: &'a Corpus, activations: CorpusActivations) -> Self {
        Evaluator {
            model,
            corpus,
            activations,
            index: ContainmentIndex::new(corpus),
            replication_len: corpus.replication_length(),
        }
    }

    pub fn activations(&self) -> &CorpusActivations {
        &self.activations
    }

    pub fn index(&self) -> &ContainmentIndex<'a> {
        &self.index
    }

    fn probe(&self, text: &str, layer: usize, unit: usize) -> f64 {
        self.model.mean_activations(&self.model.alphabet().encode(text))[layer][unit]
    }

    /// Selectivity of one unit to its aligned concepts.
    ///
    /// `act_max`/`act_min` range over corpus sentences only, so replicate
    /// and one-instance values can leave `[-1, 1]`.
    pub fn selectivity(&self, alignment: &UnitAlignment, mode: SelectivityMode, seed: u64) -> Result<SelectivityBreakdown> {
        let (layer, unit) = (alignment.layer, alignment.unit);
        self.model.check_unit(layer, unit)?;
        let n = self.corpus.len();
        let concepts: Vec<&Concept> = alignment.concepts().collect();
        let positive: Vec<bool> = (0..n)
            .map(|i| concepts.iter().any(|c| self.index.contains(i, c)))
            .collect();
        let act = |i: usize| self.activations.get(layer, unit, i);

        let act_max = self.activations.max(layer, unit);
        let act_min = self.activations.min(layer, unit);
        let denom = act_max - act_min;

        let negatives: Vec<usize> = (0..n).filter(|&i| !positive[i]).collect();
        let mu_minus = mean((negatives.iter().map(|&i| act(i))).collect());

        let inclusion: Vec<usize> = (0..n).filter(|&i| positive[i]).collect();
        let mu_plus = match mode {
            SelectivityMode::Replicate => mean(
                concepts
                    .iter()
                    .map(|c| self.probe(&replicate_text(&c.text, self.replication_len), layer, unit))
                    .collect(),
            ),
            SelectivityMode::OneInstance => mean(concepts.iter().map(|c| self.probe(&c.text, layer, unit)).collect()),
            SelectivityMode::Inclusion => mean(inclusion.iter().map(|&i| act(i)).collect()),
            SelectivityMode::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, layer, unit));
                let mut sample = rand::seq::index::sample(&mut rng, n, inclusion.len().min(n)).into_vec();
                sample.sort_unstable();
                mean(sample.into_iter().map(act).collect())
            }
        };

        let value = if denom > 0.0 {
            if negatives.is_empty() {
                return Err(Error::DegenerateNegativeSet { layer, unit });
            }
            (mu_plus - mu_minus) / denom
        } else {
            0.0
        };
        Ok(SelectivityBreakdown {
            layer,
            unit,
            mode,
            mu_plus,
            mu_minus,
            act_max,
            act_min,
            value,
        })
    }

    /// Mean and variance of selectivity per (layer, mode, M). Alignments
    /// must hold at least `max(m_values)` concepts where available; each M
    /// uses the first M.
    pub fn selectivity_summary(
        &self,
        alignments: &[UnitAlignment],
        modes: &[SelectivityMode],
        m_values: &[usize],
        seed: u64,
    ) -> Result<Vec<SelectivityRow>> {
        let layers: BTreeSet<usize> = alignments.iter().map(|a| a.layer).collect();
        let mut rows = Vec::new();
        for &layer in &layers {
            let in_layer: Vec<&UnitAlignment> = alignments.iter().filter(|a| a.layer == layer).collect();
            for &mode in modes {
                for &m in m_values {
                    let results: Vec<Result<SelectivityBreakdown>> = in_layer
                        .par_iter()
                        .map(|a| self.selectivity(&a.truncated(m), mode, seed))
                        .collect();
                    let mut values = Vec::new();
                    let mut degenerate = 0;
                    for r in results {
                        match r {
                            Ok(b) => values.push(b.value),
                            Err(Error::DegenerateNegativeSet { .. }) => degenerate += 1,
                            Err(e) => return Err(e),
                        }
                    }
                    let (mean, variance) = mean_and_variance(&values);
                    rows.push(SelectivityRow {
                        layer,
                        mode,
                        m,
                        mean,
                        variance,
                        units: values.len(),
                        degenerate,
                    });
                }
            }
        }
        Ok(rows)
    }

    /// Per-sentence losses of the unmodified corpus.
    pub fn baseline_losses(&self) -> Result<Vec<f64>> {
        self.corpus
            .sentences()
            .par_iter()
            .map(|s| {
                let label = s.label.ok_or(Error::MissingLabel(s.id))?;
                Ok(self.model.loss_encoded(&s.encoded, label))
            })
            .collect()
    }

    /// Increase in mean loss when the concept is occluded everywhere.
    /// Only sentences containing the concept contribute, so an absent
    /// concept gives exactly 0.
    pub fn delta_expected_loss(&self, concept: &Concept, baseline: &[f64]) -> Result<f64> {
        let alphabet = self.model.alphabet();
        let mut total = 0.0;
        for (i, s) in self.corpus.sentences().iter().enumerate() {
            if !self.index.contains(i, concept) {
                continue;
            }
            let label = s.label.ok_or(Error::MissingLabel(s.id))?;
            let occluded = occlude(s, concept, alphabet);
            total += self.model.loss_encoded(&occluded.encoded, label) - baseline[i];
        }
        Ok(total / self.corpus.len() as f64)
    }

    /// Number-of-units vs document frequency (and loss delta, unless
    /// skipped) over every concept aligned in the layer.
    pub fn correlation_report(&self, alignments: &[UnitAlignment], layer: usize, with_del: bool) -> Result<CorrelationReport> {
        let counts = concept_distribution(alignments, layer, usize::MAX);
        if counts.len() < 2 {
            return Err(Error::TooFewConcepts {
                needed: 2,
                found: counts.len(),
            });
        }
        let baseline = if with_del { Some(self.baseline_losses()?) } else { None };
        let rows: Vec<ConceptStats> = counts
            .par_iter()
            .map(|(concept, units)| {
                let del = match &baseline {
                    Some(b) => Some(self.delta_expected_loss(concept, b)?),
                    None => None,
                };
                Ok(ConceptStats {
                    concept: concept.clone(),
                    layer,
                    units_aligned: *units,
                    doc_freq: self.index.doc_freq(concept),
                    del,
                })
            })
            .collect::<Result<_>>()?;
        let units: Vec<f64> = rows.iter().map(|r| r.units_aligned as f64).collect();
        let freq: Vec<f64> = rows.iter().map(|r| r.doc_freq as f64).collect();
        let r_docfreq = defined(pearson(&units, &freq))?;
        let r_del = match with_del {
            true => {
                let dels: Vec<f64> = rows.iter().map(|r| r.del.expect("computed")).collect();
                defined(pearson(&units, &dels))?
            }
            false => None,
        };
        Ok(CorrelationReport {
            layer,
            r_docfreq,
            r_del,
            rows,
        })
    }
}

/// A correlation with a constant input is undefined rather than an error.
fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(r) => Ok(Some(r)),
        Err(Error::ZeroVariance) => Ok(None),
        Err(e) => Err(e),
    }
}

fn mean(values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and population variance; `(0, 0)` when empty.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

pub fn selectivity(
    model: &Model,
    corpus: &Corpus,
    alignment: &UnitAlignment,
    mode: SelectivityMode,
    seed: u64,
) -> Result<SelectivityBreakdown> {
    Evaluator::new(model, corpus)?.selectivity(alignment, mode, seed)
}

pub fn delta_expected_loss(model: &Model, corpus: &Corpus, concept: &Concept) -> Result<f64> {
    let eval = Evaluator::new(model, corpus)?;
    let baseline = eval.baseline_losses()?;
    eval.delta_expected_loss(concept, &baseline)
}

/// Loss of one sentence after occluding a concept, minus the original loss.
pub fn occlusion_loss_delta(model: &Model, sentence: &Sentence, concept: &Concept) -> Result<f64> {
    let label = sentence.label.ok_or(Error::MissingLabel(sentence.id))?;
    let before = cross_entropy(&model.logits(&sentence.encoded), label);
    let after = cross_entropy(&model.logits(&occlude(sentence, concept, model.alphabet()).encoded), label);
    Ok(after - before)
}

/// Concepts aligned in a layer with the number of units holding them,
/// most frequent first (ties by concept), at most `top`.
pub fn concept_distribution(alignments: &[UnitAlignment], layer: usize, top: usize) -> Vec<(Concept, usize)> {
    let mut counts: BTreeMap<&Concept, usize> = BTreeMap::new();
    for a in alignments.iter().filter(|a| a.layer == layer) {
        let distinct: BTreeSet<&Concept> = a.concepts().collect();
        for c in distinct {
            *counts.entry(c).or_default() += 1;
        }
    }
    let mut ranked: Vec<(Concept, usize)> = counts.into_iter().map(|(c, n)| (c.clone(), n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top);
    ranked
}

/// Aligned-concept counts for one layer by granularity:
/// morpheme, word, phrase2, phrase3, phrase4, phrase5.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GranularityCounts(pub [usize; 6]);

impl GranularityCounts {
    pub const LABELS: [&'static str; 6] = ["morpheme", "word", "phrase2", "phrase3", "phrase4", "phrase5"];

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn get(&self, kind: ConceptKind) -> usize {
        self.0[kind.bin()]
    }
}

pub fn granularity_histogram(alignments: &[UnitAlignment], layer: usize) -> GranularityCounts {
    let mut bins = [0usize; 6];
    for a in alignments.iter().filter(|a| a.layer == layer) {
        for c in a.concepts() {
            bins[c.kind.bin()] += 1;
        }
    }
    GranularityCounts(bins)
}

/// Fraction of the layer's units whose best replicated candidate beats the
/// corpus maximum.
pub fn interpretable_ratio(alignments: &[UnitAlignment], layer: usize, units_in_layer: usize) -> f64 {
    if units_in_layer == 0 {
        return 0.0;
    }
    let n = alignments
        .iter()
        .filter(|a| a.layer == layer && Aligner::interpretability(a).is_interpretable())
        .count();
    n as f64 / units_in_layer as f64
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewConcepts {
            needed: 2,
            found: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptStats {
    pub concept: Concept,
    pub layer: usize,
    pub units_aligned: usize,
    pub doc_freq: usize,
    pub del: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub layer: usize,
    /// `None` when either input is constant.
    pub r_docfreq: Option<f64>,
    /// `None` when loss deltas were skipped or either input is constant.
    pub r_del: Option<f64>,
    pub rows: Vec<ConceptStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptOccurrence {
    pub concept: Concept,
    /// Number of layers where the concept is aligned to some unit.
    pub layers: usize,
    /// Total units across layers.
    pub units: usize,
    pub per_layer: Vec<usize>,
}

/// Per-concept occurrence counts across layers, most widespread first.
pub fn occurrence_across_layers(alignments: &[UnitAlignment]) -> Vec<ConceptOccurrence> {
    let num_layers = alignments.iter().map(|a| a.layer + 1).max().unwrap_or(0);
    let mut table: BTreeMap<&Concept, Vec<usize>> = BTreeMap::new();
    for a in alignments {
        let distinct: BTreeSet<&Concept> = a.concepts().collect();
        for c in distinct {
            table.entry(c).or_insert_with(|| vec![0; num_layers])[a.layer] += 1;
        }
    }
    let mut out: Vec<ConceptOccurrence> = table
        .into_iter()
        .map(|(c, per_layer)| ConceptOccurrence {
            concept: c.clone(),
            layers: per_layer.iter().filter(|&&n| n > 0).count(),
            units: per_layer.iter().sum(),
            per_layer,
        })
        .collect();
    out.sort_by(|a, b| {
        b.layers
            .cmp(&a.layers)
            .then(b.units.cmp(&a.units))
            .then_with(|| a.concept.cmp(&b.concept))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{ScoredConcept, TopSentence};
    use crate::corpus::AlphabetSpec;
    use proptest::prelude::*;

    fn alignment(layer: usize, unit: usize, concepts: &[Concept]) -> UnitAlignment {
        UnitAlignment {
            layer,
            unit,
            top_sentences: vec![TopSentence { id: 0, activation: 1.0 }],
            aligned: concepts
                .iter()
                .map(|c| ScoredConcept {
                    concept: c.clone(),
                    doa: 2.0,
                })
                .collect(),
        }
    }

    #[test]
    fn occlude_examples() {
        let ab = Alphabet::default();
        let s = Sentence::new(0, "the cat sat", None, &ab);
        let o = occlude(&s, &Concept::word("cat"), &ab);
        assert_eq!(o.len(), 11);
        for i in 0..11 {
            let expect_dummy = (4..7).contains(&i);
            assert_eq!(o.encoded[i] == ab.dummy_index(), expect_dummy, "position {i}");
        }
        assert_eq!(occlude(&s, &Concept::word("dog"), &ab), s);
        let aaa = Sentence::new(0, "aaa", None, &ab);
        let o = occlude(&aaa, &Concept::morpheme("aa"), &ab);
        assert_eq!(o.encoded, vec![ab.dummy_index(), ab.dummy_index(), ab.encode("a")[0]]);
    }

    #[test]
    fn distribution_and_histogram() {
        let x = Concept::word("x");
        let all: Vec<UnitAlignment> = (0..16).map(|u| alignment(0, u, std::slice::from_ref(&x))).collect();
        let dist = concept_distribution(&all, 0, 30);
        assert_eq!(dist, vec![(x.clone(), 16)]);
        assert!(concept_distribution(&all, 1, 30).is_empty());
        let h = granularity_histogram(&all, 0);
        assert_eq!(h.get(ConceptKind::Word), 16);
        assert_eq!(h.total(), 16);
    }

    #[test]
    fn interpretable_ratio_counts() {
        let mut als: Vec<UnitAlignment> = (0..16).map(|u| alignment(0, u, &[Concept::word("a")])).collect();
        for a in &mut als {
            a.aligned[0].doa = 0.5;
        }
        assert_eq!(interpretable_ratio(&als, 0, 16), 0.0);
        als[3].aligned[0].doa = 1.5;
        assert_eq!(interpretable_ratio(&als, 0, 16), 0.0625);
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&xs, &[1.0; 4]), Err(Error::ZeroVariance)));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn occurrence_counts() {
        let a = Concept::word("a");
        let b = Concept::word("b");
        let als = vec![
            alignment(0, 0, &[a.clone(), b.clone()]),
            alignment(1, 0, std::slice::from_ref(&a)),
            alignment(1, 1, std::slice::from_ref(&a)),
        ];
        let occ = occurrence_across_layers(&als);
        assert_eq!(occ[0].concept, a);
        assert_eq!(occ[0].layers, 2);
        assert_eq!(occ[0].units, 3);
        assert_eq!(occ[0].per_layer, vec![1, 2]);
        assert_eq!(occ[1].layers, 1);
    }

    #[test]
    fn mode_names_parse() {
        for m in SelectivityMode::ALL {
            assert_eq!(m.name().parse::<SelectivityMode>().unwrap(), m);
        }
    }

    #[test]
    fn derived_seeds_differ_per_unit() {
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 0, 1), derive_seed(1, 1, 0));
        assert_eq!(derive_seed(5, 2, 3), derive_seed(5, 2, 3));
    }

    proptest! {
        #[test]
        fn occlusion_preserves_length_and_is_idempotent(
            words in proptest::collection::vec("[a-c]{1,3}", 1..8),
            pick in 0usize..8,
            morpheme in any::<bool>(),
        ) {
            let ab = Alphabet::new(&AlphabetSpec { characters: "abc ".into(), case_fold: true });
            let text = words.join(" ");
            let s = Sentence::new(0, text, None, &ab);
            let w = &words[pick % words.len()];
            let c = if morpheme { Concept::morpheme(w.clone()) } else { Concept::word(w.clone()) };
            let once = occlude(&s, &c, &ab);
            prop_assert_eq!(once.len(), s.len());
            prop_assert_ne!(&once.encoded, &s.encoded);
            let twice = occlude(&once, &c, &ab);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn pearson_symmetric_and_affine_invariant(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..20),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson(&xs, &ys) {
                prop_assert!((r - pearson(&ys, &xs).unwrap()).abs() < 1e-12);
                let xs2: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
                prop_assert!((r - pearson(&xs2, &ys).unwrap()).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }

        #[test]
        fn granularity_conserves_total(kinds in proptest::collection::vec(0usize..6, 0..40)) {
            let concepts: Vec<Concept> = kinds.iter().enumerate().map(|(i, &k)| {
                let kind = match k { 0 => ConceptKind::Morpheme, 1 => ConceptKind::Word, n => ConceptKind::Phrase(n as u8) };
                Concept::new(format!("c{i}"), kind)
            }).collect();
            let als: Vec<UnitAlignment> = concepts.chunks(3).enumerate().map(|(u, c)| alignment(0, u, c)).collect();
            let h = granularity_histogram(&als, 0);
            prop_assert_eq!(h.total(), kinds.len());
        }
    }
}
