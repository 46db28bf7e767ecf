use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use unitlens::alignment::{Aligner, DoaMetric, UnitAlignment};
use unitlens::charcnn::{load_checkpoint_expecting, save_checkpoint, train_with_progress};
use unitlens::clustering::{
    coalignment_matrix, fallback_embeddings, hierarchical_cluster, load_embeddings, mean_pairwise_distance,
    unique_concepts_per_layer,
};
use unitlens::evaluation::{concept_distribution, granularity_histogram, occurrence_across_layers, CorrelationReport};
use unitlens::report::{self, DoaComparisonRow, InterpretabilityRow};
use unitlens::{AlignmentConfig, Corpus, Error, Evaluator, Model, SelectivityMode};

use crate::config::RunConfig;

pub const CHECKPOINT: &str = "model.ckpt";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const ALIGNMENTS: &str = "alignments.json";

/// Contents of `alignments.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentFile {
    pub k: usize,
    pub m: usize,
    pub max_n: usize,
    pub replication_length: usize,
    pub alignments: Vec<UnitAlignment>,
}

impl AlignmentFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("missing alignments {}: run `unitlens align` first", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed alignments {}", path.display()))
    }

    pub fn layers(&self) -> BTreeSet<usize> {
        self.alignments.iter().map(|a| a.layer).collect()
    }
}

/// Reports that could not be produced, with the reason.
#[derive(Debug, Default)]
pub struct Failures(Vec<(String, String)>);

impl Failures {
    fn record(&mut self, name: impl Into<String>, result: anyhow::Result<()>) {
        if let Err(e) = result {
            let name = name.into();
            eprintln!("failed: {name}: {e:#}");
            self.0.push((name, format!("{e:#}")));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_result(self) -> anyhow::Result<()> {
        if self.0.is_empty() {
            return Ok(());
        }
        let list: Vec<String> = self.0.iter().map(|(n, e)| format!("  {n}: {e}")).collect();
        Err(anyhow!("{} report(s) failed:\n{}", self.0.len(), list.join("\n")))
    }
}

fn write(out: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

struct Run {
    cfg: RunConfig,
    corpus: Corpus,
    out: PathBuf,
}

impl Run {
    fn new(cfg: &RunConfig) -> anyhow::Result<Self> {
        cfg.validate()?;
        let corpus = cfg.load_corpus()?;
        let out = cfg.out_dir();
        fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
        Ok(Run {
            cfg: cfg.clone(),
            corpus,
            out,
        })
    }

    fn checkpoint_path(&self, explicit: Option<&Path>) -> PathBuf {
        explicit.map_or_else(|| self.out.join(CHECKPOINT), Path::to_path_buf)
    }

    fn load_model(&self, checkpoint: Option<&Path>) -> anyhow::Result<Model> {
        let path = self.checkpoint_path(checkpoint);
        let expected = self.cfg.model_config(self.corpus.num_classes());
        let model = load_checkpoint_expecting(&path, &expected)
            .with_context(|| format!("checkpoint {} does not match the config", path.display()))?;
        if model.alphabet() != self.corpus.alphabet() {
            bail!("checkpoint {} was trained with a different alphabet", path.display());
        }
        Ok(model)
    }

    fn alignments(&self) -> anyhow::Result<AlignmentFile> {
        AlignmentFile::load(&self.out.join(ALIGNMENTS))
    }
}

pub fn cmd_train(cfg: &RunConfig) -> anyhow::Result<()> {
    let run = Run::new(cfg)?;
    let model_cfg = cfg.model_config(run.corpus.num_classes());
    let mut model = Model::new(model_cfg, run.corpus.alphabet().clone(), cfg.seed)?;
    let stats = train_with_progress(&mut model, &run.corpus, &cfg.train_config(), |s| {
        eprintln!("epoch {:>3}  loss {:.4}  accuracy {:.4}", s.epoch, s.loss, s.accuracy);
    })?;
    let ckpt = run.out.join(CHECKPOINT);
    save_checkpoint(&model, &ckpt)?;
    write(&run.out, TRAIN_LOG, &report::train_log_csv(&stats))?;
    eprintln!("wrote {}", ckpt.display());
    Ok(())
}

pub fn cmd_align(cfg: &RunConfig, checkpoint: Option<&Path>, layer: Option<usize>) -> anyhow::Result<()> {
    let run = Run::new(cfg)?;
    let model = run.load_model(checkpoint)?;
    let segmenter = cfg.segmenter()?;
    let aligner = Aligner::new(&model, &run.corpus, &segmenter)?;
    let units = match layer {
        Some(l) if l >= model.num_layers() => bail!("--layer {l} but the model has {} layers", model.num_layers()),
        Some(l) => aligner.layer_units(l),
        None => aligner.all_units(),
    };
    eprintln!("aligning {} units", units.len());
    let alignments = aligner.align_units(&units, &cfg.alignment)?;
    let file = AlignmentFile {
        k: cfg.alignment.k,
        m: cfg.alignment.m,
        max_n: cfg.alignment.max_n,
        replication_length: aligner.replication_len(),
        alignments,
    };
    write(&run.out, ALIGNMENTS, &report::json(&file))?;
    for l in file.layers() {
        let rows: Vec<UnitAlignment> = file.alignments.iter().filter(|a| a.layer == l).cloned().collect();
        write(&run.out, &format!("alignments_layer{l}.csv"), &report::alignments_csv(&rows))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LayerSummary {
    layer: usize,
    units: usize,
    interpretable_ratio: f64,
    selectivity: Vec<(SelectivityMode, f64)>,
    r_docfreq: Option<f64>,
    r_del: Option<f64>,
    mean_length_replication: Option<f64>,
    mean_length_pmi: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    seed: u64,
    k: usize,
    m: usize,
    sentences: usize,
    replication_length: usize,
    layers: Vec<LayerSummary>,
    failed_reports: Vec<String>,
}

fn mean_text_length(a: &UnitAlignment) -> f64 {
    if a.aligned.is_empty() {
        return 0.0;
    }
    a.aligned.iter().map(|c| c.concept.text.chars().count() as f64).sum::<f64>() / a.aligned.len() as f64
}

pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: Option<&Path>) -> anyhow::Result<()> {
    let run = Run::new(cfg)?;
    let model = run.load_model(checkpoint)?;
    let file = run.alignments()?;
    let segmenter = cfg.segmenter()?;
    let aligner = Aligner::with_replication_len(&model, &run.corpus, &segmenter, file.replication_length)?;
    let evaluator = Evaluator::from_aligner(&aligner);
    let alignments = &file.alignments;
    let layers: Vec<usize> = file.layers().into_iter().collect();
    let units: Vec<(usize, usize)> = alignments.iter().map(|a| (a.layer, a.unit)).collect();
    let align_cfg = AlignmentConfig {
        k: file.k,
        m: file.m,
        max_n: file.max_n,
    };
    let with_del = !cfg.evaluation.skip_del;
    let out = &run.out;
    let mut failures = Failures::default();
    let mut summary = Summary {
        seed: cfg.seed,
        k: file.k,
        m: file.m,
        sentences: run.corpus.len(),
        replication_length: file.replication_length,
        layers: layers
            .iter()
            .map(|&l| LayerSummary {
                layer: l,
                units: model.units(l),
                interpretable_ratio: 0.0,
                selectivity: Vec::new(),
                r_docfreq: None,
                r_del: None,
                mean_length_replication: None,
                mean_length_pmi: None,
            })
            .collect(),
        failed_reports: Vec::new(),
    };

    eprintln!("selectivity");
    failures.record("selectivity.csv", (|| {
        let sweep_cfg = AlignmentConfig {
            m: cfg.sweep_alignment().m.max(file.m),
            ..align_cfg
        };
        let sweep = aligner.align_units(&units, &sweep_cfg)?;
        let mut m_values = cfg.evaluation.m_values.clone();
        if !m_values.contains(&file.m) {
            m_values.push(file.m);
        }
        m_values.sort_unstable();
        m_values.dedup();
        let rows = evaluator.selectivity_summary(&sweep, &cfg.evaluation.modes, &m_values, cfg.seed)?;
        for r in rows.iter().filter(|r| r.m == file.m) {
            if let Some(s) = summary.layers.iter_mut().find(|s| s.layer == r.layer) {
                s.selectivity.push((r.mode, r.mean));
            }
        }
        let rows: Vec<_> = rows.into_iter().filter(|r| cfg.evaluation.m_values.contains(&r.m)).collect();
        write(out, "selectivity.csv", &report::selectivity_csv(&rows))
    })());

    eprintln!("concept statistics");
    let mut reports: Vec<CorrelationReport> = Vec::new();
    let mut correlation_errors = Vec::new();
    for &l in &layers {
        match evaluator.correlation_report(alignments, l, with_del) {
            Ok(r) => {
                if let Some(s) = summary.layers.iter_mut().find(|s| s.layer == l) {
                    s.r_docfreq = r.r_docfreq;
                    s.r_del = r.r_del;
                }
                reports.push(r);
            }
            Err(e) => correlation_errors.push(format!("layer {l}: {e}")),
        }
    }
    let corr_result = || -> anyhow::Result<()> {
        if correlation_errors.is_empty() {
            Ok(())
        } else {
            Err(anyhow!(correlation_errors.join("; ")))
        }
    };
    failures.record(
        "del.csv",
        corr_result().and_then(|_| write(out, "del.csv", &report::concept_stats_csv(&reports, with_del))),
    );
    failures.record(
        "correlation.csv",
        corr_result().and_then(|_| write(out, "correlation.csv", &report::correlation_csv(&reports))),
    );

    for &l in &layers {
        let name = format!("distribution_layer{l}.csv");
        let dist = concept_distribution(alignments, l, cfg.evaluation.top_concepts);
        failures.record(&name, write(out, &name, &report::distribution_csv(&dist)));
    }

    let granularity: Vec<_> = (0..model.num_layers()).map(|l| granularity_histogram(alignments, l)).collect();
    failures.record("granularity.csv", write(out, "granularity.csv", &report::granularity_csv(&granularity)));

    let interp: Vec<InterpretabilityRow> = layers
        .iter()
        .map(|&l| {
            let units = model.units(l);
            let interpretable = alignments
                .iter()
                .filter(|a| a.layer == l && Aligner::interpretability(a).is_interpretable())
                .count();
            InterpretabilityRow {
                layer: l,
                units,
                interpretable,
                ratio: interpretable as f64 / units as f64,
            }
        })
        .collect();
    for r in &interp {
        if let Some(s) = summary.layers.iter_mut().find(|s| s.layer == r.layer) {
            s.interpretable_ratio = r.ratio;
        }
    }
    failures.record("interpretability.csv", write(out, "interpretability.csv", &report::interpretability_csv(&interp)));

    let occurrence = occurrence_across_layers(alignments);
    failures.record("occurrence.csv", write(out, "occurrence.csv", &report::occurrence_csv(&occurrence)));

    eprintln!("doa comparison");
    failures.record("doa_comparison.csv", (|| {
        let mut rows = Vec::new();
        let mut per_metric = Vec::new();
        for metric in [DoaMetric::Replication, DoaMetric::Pmi, DoaMetric::Occlusion] {
            let scored = aligner.score_units(&units, &align_cfg, metric)?;
            per_metric.push((metric, scored.iter().map(|s| s.alignment(file.m)).collect::<Vec<_>>()));
        }
        for i in 0..units.len() {
            for (metric, als) in &per_metric {
                let a = &als[i];
                rows.push(DoaComparisonRow {
                    layer: a.layer,
                    unit: a.unit,
                    metric: metric.name().to_string(),
                    concepts: a.concepts().cloned().collect(),
                    mean_length: mean_text_length(a),
                });
            }
        }
        for s in summary.layers.iter_mut() {
            let mean_for = |metric: &str| {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.layer == s.layer && r.metric == metric)
                    .map(|r| r.mean_length)
                    .collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            s.mean_length_replication = mean_for(DoaMetric::Replication.name());
            s.mean_length_pmi = mean_for(DoaMetric::Pmi.name());
        }
        write(out, "doa_comparison.csv", &report::doa_comparison_csv(&rows))
    })());

    summary.failed_reports = failures.0.iter().map(|(n, _)| n.clone()).collect();
    failures.record("summary.json", write(out, "summary.json", &report::json(&summary)));
    failures.into_result()
}

pub fn cmd_cluster(cfg: &RunConfig) -> anyhow::Result<()> {
    let run = Run::new(cfg)?;
    let file = run.alignments()?;
    let alignments = &file.alignments;
    let (table, source) = match &cfg.clustering.embeddings {
        Some(p) => {
            let full = cfg.resolve(p);
            let name = p.display().to_string();
            (load_embeddings(&full)?, name)
        }
        None => (fallback_embeddings(&run.corpus), "fallback".to_string()),
    };
    let note = if cfg.clustering.embeddings.is_none() {
        format!(
            "embeddings: fallback (positive PMI over corpus co-occurrence, rank {})",
            table.dimension()
        )
    } else {
        format!("embeddings: {source}")
    };
    let out = &run.out;
    let mut failures = Failures::default();
    let mut distances = Vec::new();
    for l in file.layers() {
        let dendro_name = format!("dendrogram_layer{l}.json");
        let matrix_name = format!("coalignment_layer{l}.csv");
        let result = (|| -> anyhow::Result<()> {
            let matrix = coalignment_matrix(alignments, l, cfg.clustering.top_n)?;
            let dendrogram = hierarchical_cluster(&matrix.concepts, &table)?;
            write(out, &dendro_name, &report::dendrogram_json(l, &dendrogram, &source))?;
            let ordered = matrix.ordered_by(&dendrogram);
            write(out, &matrix_name, &report::with_comment(&note, &report::coalignment_csv(&ordered)))
        })();
        failures.record(format!("{dendro_name}, {matrix_name}"), result);
        let d = match mean_pairwise_distance(alignments, l, &table) {
            Ok(d) => Some(d),
            Err(Error::NoEligibleUnit(_)) => None,
            Err(e) => return Err(e.into()),
        };
        distances.push((l, d));
    }
    failures.record(
        "distance.csv",
        write(out, "distance.csv", &report::with_comment(&note, &report::distance_csv(&distances))),
    );
    failures.record(
        "unique_concepts.csv",
        write(out, "unique_concepts.csv", &report::unique_concepts_csv(&unique_concepts_per_layer(alignments))),
    );
    failures.into_result()
}

pub fn cmd_all(cfg: &RunConfig) -> anyhow::Result<()> {
    cmd_train(cfg)?;
    cmd_align(cfg, None, None)?;
    let evaluated = cmd_evaluate(cfg, None);
    let clustered = cmd_cluster(cfg);
    match (evaluated, clustered) {
        (Ok(()), Ok(())) => Ok(()),
        (Err(e), Ok(())) | (Ok(()), Err(e)) => Err(e),
        (Err(a), Err(b)) => Err(anyhow!("{a:#}\n{b:#}")),
    }
}
