//! Concept embeddings, centroid-linkage agglomerative clustering,
//! co-alignment matrices and per-layer distance summaries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::alignment::UnitAlignment;
use crate::concepts::Concept;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::evaluation::concept_distribution;

pub const DEFAULT_TOP_N: usize = 30;
pub const FALLBACK_VOCAB: usize = 1000;
pub const FALLBACK_RANK: usize = 32;
pub const FALLBACK_WINDOW: usize = 2;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            entries: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts unless the word is already present. Returns whether it was
    /// inserted.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dimension {
            return Err(Error::ShapeMismatch(format!(
                "vector for {word:?} has {} components, table has {}",
                vector.len(),
                self.dimension
            )));
        }
        let key = word.to_lowercase();
        if self.entries.contains_key(&key) {
            return Ok(false);
        }
        self.entries.insert(key, vector);
        Ok(true)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }
}

/// Parses `word v1 … vd` lines. Blank lines are skipped, the first
/// occurrence of a duplicate word wins.
pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let vector = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::MalformedLine {
                    line: lineno,
                    reason: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if vector.is_empty() {
            return Err(Error::MalformedLine {
                line: lineno,
                reason: "no vector components".into(),
            });
        }
        let table = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
        if vector.len() != table.dimension {
            return Err(Error::EmbeddingArity {
                line: lineno,
                expected: table.dimension,
                found: vector.len(),
            });
        }
        table.insert(word, vector)?;
    }
    table.ok_or(Error::EmptyEmbeddings)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text)
}

/// Words and phrases average whichever constituent words the table knows;
/// morphemes need their own entry.
pub fn embed_concept(concept: &Concept, table: &EmbeddingTable) -> Result<Vec<f64>> {
    let oov = || Error::OutOfVocabulary(concept.text.clone());
    if concept.kind.is_morpheme() {
        return table.get(&concept.text).map(<[f64]>::to_vec).ok_or_else(oov);
    }
    let mut sum = vec![0.0; table.dimension()];
    let mut found = 0usize;
    for w in concept.words() {
        if let Some(v) = table.get(w) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            found += 1;
        }
    }
    if found == 0 {
        return Err(oov());
    }
    if found > 1 {
        for s in &mut sum {
            *s /= found as f64;
        }
    }
    Ok(sum)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Word embeddings from positive PMI over a ±2 co-occurrence window,
/// truncated to the leading singular directions.
pub fn fallback_embeddings(corpus: &Corpus) -> EmbeddingTable {
    fallback_embeddings_with(corpus, FALLBACK_VOCAB, FALLBACK_RANK, FALLBACK_WINDOW)
}

pub fn fallback_embeddings_with(corpus: &Corpus, max_vocab: usize, rank: usize, window: usize) -> EmbeddingTable {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for s in corpus.sentences() {
        for w in s.text.split_whitespace() {
            *freq.entry(w).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = freq.into_iter().collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    vocab.truncate(max_vocab);
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, (w, _))| (*w, i)).collect();
    let v = vocab.len();

    let mut counts = DMatrix::<f64>::zeros(v, v);
    for s in corpus.sentences() {
        let ids: Vec<Option<usize>> = s.text.split_whitespace().map(|w| index.get(w).copied()).collect();
        for (i, a) in ids.iter().enumerate() {
            let Some(a) = *a else { continue };
            let hi = (i + window + 1).min(ids.len());
            for b in ids[i + 1..hi].iter().flatten() {
                counts[(a, *b)] += 1.0;
                counts[(*b, a)] += 1.0;
            }
        }
    }
    let total: f64 = counts.sum();
    let rank = rank.min(v).max(1);
    let mut table = EmbeddingTable::new(rank);
    if v == 0 {
        return table;
    }
    let row_sums: Vec<f64> = (0..v).map(|i| counts.row(i).sum()).collect();
    let mut ppmi = DMatrix::<f64>::zeros(v, v);
    if total > 0.0 {
        for i in 0..v {
            for j in 0..v {
                let c = counts[(i, j)];
                if c > 0.0 {
                    let pmi = (c * total / (row_sums[i] * row_sums[j])).ln();
                    ppmi[(i, j)] = pmi.max(0.0);
                }
            }
        }
    }
    let svd = ppmi.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut vectors = vec![vec![0.0; rank]; v];
    for (k, &col) in order.iter().take(rank).enumerate() {
        let scale = svd.singular_values[col].sqrt();
        let column = u.column(col);
        // fix the sign so the largest-magnitude component is positive
        let pivot = column.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (i, vec) in vectors.iter_mut().enumerate() {
            vec[k] = sign * column[i] * scale;
        }
    }
    for ((w, _), vec) in vocab.iter().zip(vectors) {
        table.insert(w, vec).expect("dimension matches rank");
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Cluster ids: leaves are `0..n`, the i-th merge creates `n + i`.
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<Concept>,
    pub merges: Vec<Merge>,
    /// Concepts dropped for lack of an embedding.
    pub excluded: Vec<Concept>,
    /// Merges whose distance is below the previous merge's.
    pub inversions: usize,
}

impl Dendrogram {
    /// Leaf indices in left-to-right drawing order.
    pub fn leaf_order(&self) -> Vec<usize> {
        let n = self.leaves.len();
        if self.merges.is_empty() {
            return (0..n).collect();
        }
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![n + self.merges.len() - 1];
        while let Some(id) = stack.pop() {
            if id < n {
                order.push(id);
            } else {
                let m = &self.merges[id - n];
                stack.push(m.b);
                stack.push(m.a);
            }
        }
        order
    }

    pub fn ordered_leaves(&self) -> Vec<&Concept> {
        self.leaf_order().into_iter().map(|i| &self.leaves[i]).collect()
    }
}

/// Centroid-linkage agglomeration of points under Euclidean distance.
/// Equal distances resolve to the lexicographically smallest id pair.
pub fn cluster_points(points: &[Vec<f64>]) -> Result<Vec<Merge>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewConcepts { needed: 2, found: n });
    }
    // (id, centroid, size)
    let mut active: Vec<(usize, Vec<f64>, usize)> = points.iter().cloned().enumerate().map(|(i, p)| (i, p, 1)).collect();
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| euclidean(&points[i], &points[j])).collect())
        .collect();
    let mut merges = Vec::with_capacity(n - 1);
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..active.len() {
            for j in i + 1..active.len() {
                let d = dist[i][j];
                let key = (active[i].0.min(active[j].0), active[i].0.max(active[j].0));
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        let bkey = (active[bi].0.min(active[bj].0), active[bi].0.max(active[bj].0));
                        d < bd || (d == bd && key < bkey)
                    }
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let (d, i, j) = best.expect("at least two active clusters");
        let (id_i, c_i, n_i) = active[i].clone();
        let (id_j, c_j, n_j) = active[j].clone();
        let size = n_i + n_j;
        let centroid: Vec<f64> = c_i
            .iter()
            .zip(&c_j)
            .map(|(x, y)| (n_i as f64 * x + n_j as f64 * y) / size as f64)
            .collect();
        merges.push(Merge {
            a: id_i.min(id_j),
            b: id_i.max(id_j),
            distance: d,
            size,
        });
        // j > i: remove j first so i stays valid, then replace i
        active.remove(j);
        dist.remove(j);
        for row in &mut dist {
            row.remove(j);
        }
        active[i] = (n + merges.len() - 1, centroid, size);
        for k in 0..active.len() {
            let d = if k == i { 0.0 } else { euclidean(&active[i].1, &active[k].1) };
            dist[i][k] = d;
            dist[k][i] = d;
        }
    }
    Ok(merges)
}

pub fn hierarchical_cluster(concepts: &[Concept], table: &EmbeddingTable) -> Result<Dendrogram> {
    let mut leaves = Vec::new();
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for c in concepts {
        match embed_concept(c, table) {
            Ok(v) => {
                leaves.push(c.clone());
                points.push(v);
            }
            Err(Error::OutOfVocabulary(_)) => excluded.push(c.clone()),
            Err(e) => return Err(e),
        }
    }
    let merges = cluster_points(&points)?;
    let inversions = merges.windows(2).filter(|w| w[1].distance < w[0].distance).count();
    Ok(Dendrogram {
        leaves,
        merges,
        excluded,
        inversions,
    })
}

/// Pair counts of concepts aligned to the same unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalignmentMatrix {
    pub concepts: Vec<Concept>,
    pub counts: Vec<Vec<usize>>,
}

impl CoalignmentMatrix {
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Permutes rows and columns; `order[i]` is the old index placed at i.
    pub fn reordered(&self, order: &[usize]) -> CoalignmentMatrix {
        CoalignmentMatrix {
            concepts: order.iter().map(|&i| self.concepts[i].clone()).collect(),
            counts: order
                .iter()
                .map(|&i| order.iter().map(|&j| self.counts[i][j]).collect())
                .collect(),
        }
    }

    /// Dendrogram leaves first in drawing order, then concepts the
    /// dendrogram does not contain in their current order.
    pub fn ordered_by(&self, dendrogram: &Dendrogram) -> CoalignmentMatrix {
        let position: HashMap<&Concept, usize> = self.concepts.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let mut order: Vec<usize> = dendrogram
            .ordered_leaves()
            .into_iter()
            .filter_map(|c| position.get(c).copied())
            .collect();
        let seen: BTreeSet<usize> = order.iter().copied().collect();
        order.extend((0..self.len()).filter(|i| !seen.contains(i)));
        self.reordered(&order)
    }
}

/// Co-alignment counts over the layer's `top_n` most-aligned concepts,
/// rows in distribution rank order. The diagonal is zero.
pub fn coalignment_matrix(alignments: &[UnitAlignment], layer: usize, top_n: usize) -> Result<CoalignmentMatrix> {
    let concepts: Vec<Concept> = concept_distribution(alignments, layer, top_n)
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    if concepts.len() < 2 {
        return Err(Error::TooFewConcepts {
            needed: 2,
            found: concepts.len(),
        });
    }
    let position: HashMap<&Concept, usize> = concepts.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut counts = vec![vec![0usize; concepts.len()]; concepts.len()];
    for a in alignments.iter().filter(|a| a.layer == layer) {
        let ids: BTreeSet<usize> = a.concepts().filter_map(|c| position.get(c).copied()).collect();
        for &i in &ids {
            for &j in &ids {
                if i != j {
                    counts[i][j] += 1;
                }
            }
        }
    }
    Ok(CoalignmentMatrix { concepts, counts })
}

/// Average over units of the mean distance between a unit's embeddable
/// aligned concepts. Units with fewer than two embeddable concepts are
/// skipped.
pub fn mean_pairwise_distance(alignments: &[UnitAlignment], layer: usize, table: &EmbeddingTable) -> Result<f64> {
    let mut per_unit = Vec::new();
    for a in alignments.iter().filter(|a| a.layer == layer) {
        let distinct: BTreeSet<&Concept> = a.concepts().collect();
        let vectors: Vec<Vec<f64>> = distinct.into_iter().filter_map(|c| embed_concept(c, table).ok()).collect();
        if vectors.len() < 2 {
            continue;
        }
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..vectors.len() {
            for j in i + 1..vectors.len() {
                sum += euclidean(&vectors[i], &vectors[j]);
                pairs += 1;
            }
        }
        per_unit.push(sum / pairs as f64);
    }
    if per_unit.is_empty() {
        return Err(Error::NoEligibleUnit(layer));
    }
    Ok(per_unit.iter().sum::<f64>() / per_unit.len() as f64)
}

/// Distinct aligned concepts per layer, indexed by layer.
pub fn unique_concepts_per_layer(alignments: &[UnitAlignment]) -> Vec<usize> {
    let layers = alignments.iter().map(|a| a.layer + 1).max().unwrap_or(0);
    let mut sets: Vec<BTreeSet<&Concept>> = vec![BTreeSet::new(); layers];
    for a in alignments {
        sets[a.layer].extend(a.concepts());
    }
    sets.into_iter().map(|s| s.len()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::{ScoredConcept, TopSentence};
    use crate::corpus::{parse_corpus, AlphabetSpec};
    use proptest::prelude::*;

    fn unit(layer: usize, unit: usize, words: &[&str]) -> UnitAlignment {
        UnitAlignment {
            layer,
            unit,
            top_sentences: vec![TopSentence { id: 0, activation: 0.0 }],
            aligned: words
                .iter()
                .map(|w| ScoredConcept {
                    concept: Concept::span(w),
                    doa: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn parse_small_table() {
        let t = parse_embeddings("a 1 0 0\nB 0 1 0\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dimension(), 3);
        assert_eq!(t.get("b").unwrap(), &[0.0, 1.0, 0.0]);
        assert_eq!(t.get("A").unwrap(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn parse_errors() {
        match parse_embeddings("a 1 2\nb 1 2 3\n") {
            Err(Error::EmbeddingArity { line, expected, found }) => assert_eq!((line, expected, found), (2, 2, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_embeddings("\n \n"), Err(Error::EmptyEmbeddings)));
        assert!(matches!(parse_embeddings("a x\n"), Err(Error::MalformedLine { line: 1, .. })));
    }

    #[test]
    fn duplicates_keep_first() {
        let t = parse_embeddings("a 1\na 2\n").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("a").unwrap(), &[1.0]);
    }

    #[test]
    fn embed_examples() {
        let t = parse_embeddings("a 1 0\nb 0 1\n").unwrap();
        assert_eq!(embed_concept(&Concept::span("a b"), &t).unwrap(), vec![0.5, 0.5]);
        assert_eq!(embed_concept(&Concept::word("a"), &t).unwrap(), vec![1.0, 0.0]);
        assert_eq!(embed_concept(&Concept::span("a zz"), &t).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(embed_concept(&Concept::word("zz"), &t), Err(Error::OutOfVocabulary(_))));
        assert!(embed_concept(&Concept::morpheme("b"), &t).is_ok());
        assert!(embed_concept(&Concept::morpheme("zz"), &t).is_err());
    }

    #[test]
    fn cluster_examples() {
        let merges = cluster_points(&[vec![0.0], vec![1.0], vec![10.0]]).unwrap();
        assert_eq!((merges[0].a, merges[0].b), (0, 1));
        assert_eq!(merges[0].distance, 1.0);
        assert_eq!((merges[1].a, merges[1].b), (2, 3));
        assert_eq!(merges[1].distance, 9.5);

        let merges = cluster_points(&[vec![5.0, 5.0], vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!((merges[0].a, merges[0].b, merges[0].distance), (1, 2, 0.0));

        assert!(cluster_points(&[vec![1.0]]).is_err());
    }

    #[test]
    fn ties_take_smallest_pair() {
        let merges = cluster_points(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!((merges[0].a, merges[0].b), (0, 1));
        assert_eq!((merges[1].a, merges[1].b), (2, 3));
    }

    #[test]
    fn equilateral_triangle_inverts() {
        let h = 3f64.sqrt() / 2.0;
        let t = parse_embeddings(&format!("a 0 0\nb 1 0\nc 0.5 {h}\n")).unwrap();
        let d = hierarchical_cluster(&[Concept::word("a"), Concept::word("b"), Concept::word("c")], &t).unwrap();
        assert_eq!(d.merges.len(), 2);
        assert!((d.merges[1].distance - h).abs() < 1e-12);
        assert_eq!(d.inversions, 1);
    }

    #[test]
    fn excluded_concepts_reported() {
        let t = parse_embeddings("a 0\nb 1\n").unwrap();
        let d = hierarchical_cluster(&[Concept::word("a"), Concept::word("q"), Concept::word("b")], &t).unwrap();
        assert_eq!(d.excluded, vec![Concept::word("q")]);
        assert_eq!(d.leaves.len(), 2);
        assert!(hierarchical_cluster(&[Concept::word("a"), Concept::word("q")], &t).is_err());
    }

    #[test]
    fn coalignment_examples() {
        let mut als = vec![unit(0, 0, &["a", "b"]), unit(0, 1, &["a", "b"]), unit(0, 2, &["a", "b"])];
        als.push(unit(0, 3, &["c"]));
        let m = coalignment_matrix(&als, 0, 30).unwrap();
        let a = m.concepts.iter().position(|c| c.text == "a").unwrap();
        let b = m.concepts.iter().position(|c| c.text == "b").unwrap();
        let c = m.concepts.iter().position(|c| c.text == "c").unwrap();
        assert_eq!(m.counts[a][b], 3);
        assert_eq!(m.counts[b][a], 3);
        assert_eq!(m.counts[a][c], 0);
        assert_eq!(m.counts[a][a], 0);
        assert!(coalignment_matrix(&[unit(0, 0, &["x"])], 0, 30).is_err());
    }

    #[test]
    fn distance_examples() {
        let t = parse_embeddings("a 0 0\nb 3 4\nc 3 4\nd 3 4\n").unwrap();
        assert_eq!(mean_pairwise_distance(&[unit(0, 0, &["a", "b"])], 0, &t).unwrap(), 5.0);
        assert_eq!(mean_pairwise_distance(&[unit(0, 0, &["b", "c", "d"])], 0, &t).unwrap(), 0.0);
        assert!(matches!(
            mean_pairwise_distance(&[unit(0, 0, &["a", "zz"])], 0, &t),
            Err(Error::NoEligibleUnit(0))
        ));
    }

    #[test]
    fn unique_counts() {
        let same: Vec<UnitAlignment> = (0..16).map(|u| unit(0, u, &["x"])).collect();
        assert_eq!(unique_concepts_per_layer(&same), vec![1]);
        let distinct: Vec<UnitAlignment> = (0..16)
            .map(|u| {
                let words: Vec<String> = (0..3).map(|k| format!("w{u}x{k}")).collect();
                let refs: Vec<&str> = words.iter().map(String::as_str).collect();
                unit(1, u, &refs)
            })
            .collect();
        assert_eq!(unique_concepts_per_layer(&distinct), vec![0, 48]);
    }

    #[test]
    fn fallback_covers_vocabulary() {
        let corpus = parse_corpus(
            "0\tthe cat sat on the mat\n1\tthe dog ran in the park\n0\ta cat and a dog\n",
            &AlphabetSpec::default(),
            None,
        )
        .unwrap();
        let t = fallback_embeddings_with(&corpus, 1000, 4, 2);
        assert_eq!(t.dimension(), 4);
        assert_eq!(t.len(), 11);
        assert!(t.get("cat").unwrap().iter().all(|x| x.is_finite()));
        assert_eq!(t, fallback_embeddings_with(&corpus, 1000, 4, 2));
        let capped = fallback_embeddings_with(&corpus, 3, 2, 2);
        assert_eq!(capped.len(), 3);
        assert!(capped.get("the").is_some());
    }

    proptest! {
        #[test]
        fn dendrogram_shape(points in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 2..12)) {
            let merges = cluster_points(&points).unwrap();
            let n = points.len();
            prop_assert_eq!(merges.len(), n - 1);
            prop_assert_eq!(merges.last().unwrap().size, n);
            let mut used = BTreeSet::new();
            for (i, m) in merges.iter().enumerate() {
                prop_assert!(m.a < m.b && m.b < n + i);
                prop_assert!(used.insert(m.a) && used.insert(m.b));
            }
            let d = Dendrogram {
                leaves: (0..n).map(|i| Concept::word(format!("c{i}"))).collect(),
                merges,
                excluded: vec![],
                inversions: 0,
            };
            let mut order = d.leaf_order();
            order.sort_unstable();
            prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn coalignment_symmetric(units in proptest::collection::vec(proptest::collection::btree_set(0usize..6, 1..4), 1..12)) {
            let als: Vec<UnitAlignment> = units.iter().enumerate().map(|(u, set)| {
                let words: Vec<String> = set.iter().map(|i| format!("w{i}")).collect();
                let refs: Vec<&str> = words.iter().map(String::as_str).collect();
                unit(0, u, &refs)
            }).collect();
            if let Ok(m) = coalignment_matrix(&als, 0, 30) {
                for i in 0..m.len() {
                    prop_assert_eq!(m.counts[i][i], 0);
                    for j in 0..m.len() {
                        prop_assert_eq!(m.counts[i][j], m.counts[j][i]);
                    }
                }
            }
        }
    }
}
