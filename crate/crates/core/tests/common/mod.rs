#![allow(dead_code, clippy::needless_range_loop)]

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unitlens::charcnn::train;
use unitlens::corpus::{generate_synthetic, PlantSpec, SyntheticCorpus};
use unitlens::{
    AlignmentConfig, Aligner, Alphabet, AlphabetSpec, Corpus, LayerSpec, Model, ModelConfig, Pooling, Segmenter,
    Sentence, SyntheticSpec, TrainConfig, UnitAlignment,
};

pub const FILLER: [&str; 16] = [
    "food", "place", "table", "menu", "a", "at", "we", "got", "our", "it", "chef", "dish", "soup", "bread", "wine",
    "room",
];

pub fn plant(text: &str, class: usize, probability: f64) -> PlantSpec {
    PlantSpec {
        text: text.into(),
        class,
        probability,
    }
}

/// Two-class reviews where "excellent" and "awful" decide the label.
pub fn review_spec(sentences: usize) -> SyntheticSpec {
    SyntheticSpec {
        classes: vec!["neg".into(), "pos".into()],
        filler: FILLER.iter().map(|s| s.to_string()).collect(),
        plants: vec![
            plant("awful", 0, 0.9),
            plant("very rude", 0, 0.3),
            plant("excellent", 1, 0.9),
            plant("great value", 1, 0.3),
        ],
        sentences,
        min_words: 3,
        max_words: 6,
        seed: None,
        alphabet: AlphabetSpec::default(),
    }
}

pub fn desk_config(num_classes: usize, pooling: Pooling) -> ModelConfig {
    ModelConfig {
        pooling,
        ..ModelConfig::desk(num_classes)
    }
}

pub struct Trained {
    pub synth: SyntheticCorpus,
    pub model: Model,
    pub segmenter: Segmenter,
    pub cfg: AlignmentConfig,
    pub alignments: Vec<UnitAlignment>,
    pub train_accuracy: f64,
}

impl Trained {
    pub fn corpus(&self) -> &Corpus {
        &self.synth.corpus
    }

    pub fn aligner(&self) -> Aligner<'_> {
        Aligner::new(&self.model, &self.synth.corpus, &self.segmenter).unwrap()
    }
}

/// Desk model trained once per test binary on the review corpus.
pub fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let synth = generate_synthetic(&review_spec(400), 5).unwrap();
        let mut model = Model::new(desk_config(2, Pooling::Max), synth.corpus.alphabet().clone(), 5).unwrap();
        let stats = train(
            &mut model,
            &synth.corpus,
            &TrainConfig {
                learning_rate: 0.1,
                epochs: 15,
                seed: 5,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let segmenter = Segmenter::default();
        let cfg = AlignmentConfig::default();
        let alignments = Aligner::new(&model, &synth.corpus, &segmenter)
            .unwrap()
            .align_all(&cfg)
            .unwrap();
        Trained {
            synth,
            model,
            segmenter,
            cfg,
            alignments,
            train_accuracy: stats.last().unwrap().accuracy,
        }
    })
}

pub fn random_model(seed: u64, layers: &[(usize, usize)], num_classes: usize, pooling: Pooling) -> Model {
    let config = ModelConfig {
        embedding_dim: 6,
        layers: layers.iter().map(|&(units, width)| LayerSpec { units, width }).collect(),
        num_classes,
        pooling,
    };
    let mut model = Model::new(config, Alphabet::default(), seed).unwrap();
    // nonzero biases so the ReLU masks are not trivially aligned with zero
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for conv in model.convs_mut() {
        conv.bias.mapv_inplace(|_| rng.random_range(-0.1..0.1));
    }
    model
}

pub fn random_text(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let pool: Vec<char> = "abcdefghij klmnop qrstuvwxyz .,!".chars().collect();
    let len = rng.random_range(min..=max);
    let text: String = (0..len).map(|_| pool[rng.random_range(0..pool.len())]).collect();
    if text.trim().is_empty() {
        "x".into()
    } else {
        text
    }
}

pub fn corpus_of(texts: &[&str], labels: Option<&[usize]>, num_classes: usize) -> Corpus {
    let alphabet = Alphabet::default();
    let sentences = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Sentence::new(i, *t, labels.map(|l| l[i]), &alphabet))
        .collect();
    Corpus::new(sentences, alphabet, num_classes).unwrap()
}

/// Nested-loop same-padded convolution with ReLU; returns each layer as
/// `[position][unit]`.
pub fn oracle_forward(model: &Model, encoded: &[usize]) -> Vec<Vec<Vec<f64>>> {
    let emb = model.embedding();
    let dim = emb.ncols();
    let len = encoded.len();
    let mut x: Vec<Vec<f64>> = encoded.iter().map(|&c| (0..dim).map(|d| emb[[c, d]]).collect()).collect();
    let mut out = Vec::new();
    for conv in model.convs() {
        let (cout, width, cin) = conv.weight.dim();
        let half = (width / 2) as isize;
        let mut y = vec![vec![0.0; cout]; len];
        for (t, row) in y.iter_mut().enumerate() {
            for (o, cell) in row.iter_mut().enumerate() {
                let mut s = conv.bias[o];
                for k in 0..width {
                    let p = t as isize + k as isize - half;
                    if p < 0 || p >= len as isize {
                        continue;
                    }
                    for i in 0..cin {
                        s += conv.weight[[o, k, i]] * x[p as usize][i];
                    }
                }
                *cell = if s > 0.0 { s } else { 0.0 };
            }
        }
        out.push(y.clone());
        x = y;
    }
    out
}

pub fn oracle_mean(acts: &[Vec<f64>], unit: usize) -> f64 {
    acts.iter().map(|row| row[unit]).sum::<f64>() / acts.len() as f64
}

pub fn oracle_unit_activation(model: &Model, text: &str, layer: usize, unit: usize) -> f64 {
    let encoded = model.alphabet().encode(text);
    oracle_mean(&oracle_forward(model, &encoded)[layer], unit)
}

pub fn oracle_logits(model: &Model, encoded: &[usize]) -> Vec<f64> {
    let layers = oracle_forward(model, encoded);
    let last = layers.last().unwrap();
    let units = last[0].len();
    let pooled: Vec<f64> = (0..units)
        .map(|u| match model.config().pooling {
            Pooling::Mean => oracle_mean(last, u),
            Pooling::Max => last.iter().map(|r| r[u]).fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    let w = model.head_weight();
    let b = model.head_bias();
    (0..b.len())
        .map(|c| b[c] + (0..units).map(|u| w[[c, u]] * pooled[u]).sum::<f64>())
        .collect()
}

/// Cross-entropy as `ln(1 + sum_{j != y} exp(z_j - z_y))` with compensated
/// summation.
pub fn oracle_cross_entropy(logits: &[f64], label: usize) -> f64 {
    let zy = logits[label];
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (j, &z) in logits.iter().enumerate() {
        if j == label {
            continue;
        }
        let term = (z - zy).exp();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    (sum + comp).ln_1p()
}

/// Whole-copy replication by direct construction.
pub fn oracle_replicate(text: &str, target: usize) -> String {
    let len = text.chars().count();
    let mut copies = 1;
    while (copies + 1) * len + copies <= target {
        copies += 1;
    }
    vec![text; copies].join(" ")
}
