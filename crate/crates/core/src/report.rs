//! CSV and JSON renderings of analysis results. Every writer returns the
//! full file contents so callers decide where it goes.

use serde::Serialize;

use crate::alignment::UnitAlignment;
use crate::charcnn::EpochStats;
use crate::clustering::{CoalignmentMatrix, Dendrogram};
use crate::concepts::Concept;
use crate::evaluation::{ConceptOccurrence, CorrelationReport, GranularityCounts, SelectivityRow};

fn table<R: AsRef<[u8]>>(header: &[&str], rows: impl IntoIterator<Item = Vec<R>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

pub fn train_log_csv(stats: &[EpochStats]) -> String {
    table(
        &["epoch", "loss", "accuracy"],
        stats
            .iter()
            .map(|s| vec![s.epoch.to_string(), s.loss.to_string(), s.accuracy.to_string()]),
    )
}

/// One row per (layer, unit, rank).
pub fn alignments_csv(alignments: &[UnitAlignment]) -> String {
    table(
        &["layer", "unit", "rank", "concept", "kind", "doa", "top_ids", "top_activations"],
        alignments.iter().flat_map(|a| {
            let ids = join(a.top_sentences.iter().map(|t| t.id));
            let acts = join(a.top_sentences.iter().map(|t| t.activation));
            a.aligned.iter().enumerate().map(move |(r, sc)| {
                vec![
                    a.layer.to_string(),
                    a.unit.to_string(),
                    (r + 1).to_string(),
                    sc.concept.text.clone(),
                    sc.concept.kind.name(),
                    sc.doa.to_string(),
                    ids.clone(),
                    acts.clone(),
                ]
            })
        }),
    )
}

pub fn selectivity_csv(rows: &[SelectivityRow]) -> String {
    table(
        &["layer", "mode", "m", "mean", "variance", "units", "degenerate"],
        rows.iter().map(|r| {
            vec![
                r.layer.to_string(),
                r.mode.name().to_string(),
                r.m.to_string(),
                r.mean.to_string(),
                r.variance.to_string(),
                r.units.to_string(),
                r.degenerate.to_string(),
            ]
        }),
    )
}

/// Per-concept statistics backing the correlations. The `del` column is
/// left out when loss deltas were not computed.
pub fn concept_stats_csv(reports: &[CorrelationReport], with_del: bool) -> String {
    let mut header = vec!["layer", "concept", "kind", "units_aligned", "doc_freq"];
    if with_del {
        header.push("del");
    }
    table(
        &header,
        reports.iter().flat_map(|r| &r.rows).map(|s| {
            let mut row = vec![
                s.layer.to_string(),
                s.concept.text.clone(),
                s.concept.kind.name(),
                s.units_aligned.to_string(),
                s.doc_freq.to_string(),
            ];
            if with_del {
                row.push(s.del.map(|d| d.to_string()).unwrap_or_default());
            }
            row
        }),
    )
}

pub fn correlation_csv(reports: &[CorrelationReport]) -> String {
    table(
        &["layer", "concepts", "r_docfreq", "r_del"],
        reports.iter().map(|r| {
            vec![
                r.layer.to_string(),
                r.rows.len().to_string(),
                r.r_docfreq.map(|x| x.to_string()).unwrap_or_default(),
                r.r_del.map(|x| x.to_string()).unwrap_or_default(),
            ]
        }),
    )
}

pub fn distribution_csv(distribution: &[(Concept, usize)]) -> String {
    table(
        &["rank", "concept", "kind", "units"],
        distribution
            .iter()
            .enumerate()
            .map(|(i, (c, n))| vec![(i + 1).to_string(), c.text.clone(), c.kind.name(), n.to_string()]),
    )
}

/// Counts and fractions of aligned concepts per granularity and layer.
pub fn granularity_csv(per_layer: &[GranularityCounts]) -> String {
    table(
        &["layer", "granularity", "count", "fraction"],
        per_layer.iter().enumerate().flat_map(|(layer, g)| {
            let total = g.total();
            GranularityCounts::LABELS.iter().enumerate().map(move |(b, label)| {
                let frac = if total == 0 { 0.0 } else { g.0[b] as f64 / total as f64 };
                vec![layer.to_string(), label.to_string(), g.0[b].to_string(), frac.to_string()]
            })
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterpretabilityRow {
    pub layer: usize,
    pub units: usize,
    pub interpretable: usize,
    pub ratio: f64,
}

pub fn interpretability_csv(rows: &[InterpretabilityRow]) -> String {
    table(
        &["layer", "units", "interpretable", "ratio"],
        rows.iter().map(|r| {
            vec![
                r.layer.to_string(),
                r.units.to_string(),
                r.interpretable.to_string(),
                r.ratio.to_string(),
            ]
        }),
    )
}

pub fn occurrence_csv(rows: &[ConceptOccurrence]) -> String {
    let layers = rows.first().map_or(0, |r| r.per_layer.len());
    let mut header = vec!["concept".to_string(), "kind".into(), "layers".into(), "units".into()];
    header.extend((0..layers).map(|l| format!("layer{l}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    table(
        &header,
        rows.iter().map(|r| {
            let mut row = vec![r.concept.text.clone(), r.concept.kind.name(), r.layers.to_string(), r.units.to_string()];
            row.extend(r.per_layer.iter().map(|n| n.to_string()));
            row
        }),
    )
}

/// Aligned concepts of one unit under one scoring metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaComparisonRow {
    pub layer: usize,
    pub unit: usize,
    pub metric: String,
    pub concepts: Vec<Concept>,
    pub mean_length: f64,
}

pub fn doa_comparison_csv(rows: &[DoaComparisonRow]) -> String {
    table(
        &["layer", "unit", "metric", "concepts", "mean_length"],
        rows.iter().map(|r| {
            vec![
                r.layer.to_string(),
                r.unit.to_string(),
                r.metric.clone(),
                join(r.concepts.iter().map(|c| format!("{}/{}", c.text, c.kind.name()))),
                r.mean_length.to_string(),
            ]
        }),
    )
}

/// Square matrix with a header row of concept texts.
pub fn coalignment_csv(matrix: &CoalignmentMatrix) -> String {
    let mut header = vec!["concept".to_string()];
    header.extend(matrix.concepts.iter().map(|c| c.text.clone()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    table(
        &header,
        matrix.concepts.iter().zip(&matrix.counts).map(|(c, row)| {
            let mut out = vec![c.text.clone()];
            out.extend(row.iter().map(|n| n.to_string()));
            out
        }),
    )
}

#[derive(Serialize)]
struct DendrogramJson<'a> {
    layer: usize,
    embeddings: &'a str,
    leaves: Vec<LeafJson<'a>>,
    leaf_order: Vec<usize>,
    merges: &'a [crate::clustering::Merge],
    inversions: usize,
    excluded: Vec<LeafJson<'a>>,
}

#[derive(Serialize)]
struct LeafJson<'a> {
    text: &'a str,
    kind: String,
}

fn leaf(c: &Concept) -> LeafJson<'_> {
    LeafJson {
        text: &c.text,
        kind: c.kind.name(),
    }
}

/// `embeddings` names the source table, e.g. a file name or "fallback".
pub fn dendrogram_json(layer: usize, dendrogram: &Dendrogram, embeddings: &str) -> String {
    json(&DendrogramJson {
        layer,
        embeddings,
        leaves: dendrogram.leaves.iter().map(leaf).collect(),
        leaf_order: dendrogram.leaf_order(),
        merges: &dendrogram.merges,
        inversions: dendrogram.inversions,
        excluded: dendrogram.excluded.iter().map(leaf).collect(),
    })
}

pub fn distance_csv(rows: &[(usize, Option<f64>)]) -> String {
    table(
        &["layer", "mean_pairwise_distance"],
        rows.iter()
            .map(|(l, d)| vec![l.to_string(), d.map(|x| x.to_string()).unwrap_or_default()]),
    )
}

pub fn unique_concepts_csv(counts: &[usize]) -> String {
    table(
        &["layer", "unique_concepts"],
        counts.iter().enumerate().map(|(l, n)| vec![l.to_string(), n.to_string()]),
    )
}

/// Prefixes every line of `note` with `# ` ahead of a CSV body.
pub fn with_comment(note: &str, body: &str) -> String {
    let mut out: String = note.lines().map(|l| format!("# {l}\n")).collect();
    out.push_str(body);
    out
}
