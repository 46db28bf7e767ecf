use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;
use unitlens::concepts::{load_lexicon, Segmenter};
use unitlens::corpus::{generate_synthetic, load_corpus};
use unitlens::{AlignmentConfig, AlphabetSpec, Corpus, LayerSpec, ModelConfig, Pooling, SelectivityMode, SyntheticSpec, TrainConfig};

pub const OUT_ENV: &str = "UNITLENS_OUT";
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub alignment: AlignmentConfig,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub clustering: ClusteringSection,
    /// Directory the config was read from; relative paths resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    /// Labeled corpus file, `label<TAB>text` per line.
    pub path: Option<PathBuf>,
    /// Synthetic corpus spec, used when `path` is absent.
    pub synthetic: Option<PathBuf>,
    pub num_classes: Option<usize>,
    /// Morpheme lexicon, `word<TAB>seg seg` per line.
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub alphabet: AlphabetSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub embedding_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub pooling: Pooling,
}

impl Default for ModelSection {
    fn default() -> Self {
        let desk = ModelConfig::desk(2);
        ModelSection {
            embedding_dim: desk.embedding_dim,
            layers: desk.layers,
            pooling: desk.pooling,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub m_values: Vec<usize>,
    pub modes: Vec<SelectivityMode>,
    pub skip_del: bool,
    pub top_concepts: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            m_values: vec![1, 3, 5, 10],
            modes: SelectivityMode::ALL.to_vec(),
            skip_del: false,
            top_concepts: 30,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringSection {
    pub embeddings: Option<PathBuf>,
    pub top_n: usize,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        ClusteringSection {
            embeddings: None,
            top_n: unitlens::clustering::DEFAULT_TOP_N,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub skip_del: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> anyhow::Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).context("invalid config")?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base).with_context(|| format!("in {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(t) = o.threads {
            self.threads = Some(t);
        }
        if let Some(k) = o.k {
            self.alignment.k = k;
        }
        if let Some(m) = o.m {
            self.alignment.m = m;
        }
        if o.skip_del {
            self.evaluation.skip_del = true;
        }
        if let Some(out) = &o.out {
            // already relative to the working directory
            self.out_dir = Some(std::path::absolute(out).unwrap_or_else(|_| out.clone()));
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// `--out`, then the config's `out_dir`, then `$UNITLENS_OUT`, then `out`.
    pub fn out_dir(&self) -> PathBuf {
        match &self.out_dir {
            Some(p) => self.resolve(p),
            None => std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        match (&self.corpus.path, &self.corpus.synthetic) {
            (Some(_), Some(_)) => bail!("[corpus] sets both `path` and `synthetic`; choose one"),
            (None, None) => bail!("[corpus] needs `path` (a corpus file) or `synthetic` (a generator spec)"),
            _ => {}
        }
        let files = [
            ("corpus.path", &self.corpus.path),
            ("corpus.synthetic", &self.corpus.synthetic),
            ("corpus.lexicon", &self.corpus.lexicon),
            ("clustering.embeddings", &self.clustering.embeddings),
        ];
        for (key, p) in files {
            if let Some(p) = p {
                let full = self.resolve(p);
                if !full.is_file() {
                    bail!("{key} = {:?}: no such file {}", p, full.display());
                }
            }
        }
        self.alignment.validate()?;
        self.train_config().validate()?;
        if self.model.layers.is_empty() {
            bail!("[model] needs at least one layer");
        }
        if self.evaluation.m_values.contains(&0) {
            bail!("[evaluation] m_values must be positive");
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    pub fn model_config(&self, num_classes: usize) -> ModelConfig {
        ModelConfig {
            embedding_dim: self.model.embedding_dim,
            layers: self.model.layers.clone(),
            num_classes,
            pooling: self.model.pooling,
        }
    }

    pub fn load_corpus(&self) -> anyhow::Result<Corpus> {
        if let Some(p) = &self.corpus.path {
            let p = self.resolve(p);
            return load_corpus(&p, &self.corpus.alphabet, self.corpus.num_classes)
                .with_context(|| format!("loading corpus {}", p.display()));
        }
        let p = self.resolve(self.corpus.synthetic.as_ref().expect("validated"));
        let spec = SyntheticSpec::load(&p).with_context(|| format!("loading synthetic spec {}", p.display()))?;
        let seed = spec.seed.unwrap_or(self.seed);
        Ok(generate_synthetic(&spec, seed)?.corpus)
    }

    pub fn segmenter(&self) -> anyhow::Result<Segmenter> {
        let seg = Segmenter::default();
        match &self.corpus.lexicon {
            Some(p) => {
                let p = self.resolve(p);
                Ok(seg.with_lexicon(load_lexicon(&p)?)?)
            }
            None => Ok(seg),
        }
    }

    /// Alignment settings used when the sweep needs more concepts per unit.
    pub fn sweep_alignment(&self) -> AlignmentConfig {
        let max_m = self.evaluation.m_values.iter().copied().max().unwrap_or(self.alignment.m);
        AlignmentConfig {
            m: max_m.max(self.alignment.m),
            ..self.alignment
        }
    }
}
