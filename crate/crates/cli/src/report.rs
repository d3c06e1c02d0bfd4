use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pacte::polarization::ScoreReport;
use pacte::topics::{CoherenceScore, TopicKeywords};
use serde_json::json;

use crate::pipeline::{COHERENCE, KEYWORDS, RECALL_JSON, SCORES_DIR};

pub const REPORT_MD: &str = "report.md";
pub const REPORT_JSON: &str = "report.json";

/// Score files in table order; unknown names follow alphabetically.
const METHOD_ORDER: [&str; 5] = [
    "loe",
    "no_finetune",
    "shuffled_labels",
    "pacte",
    "doc_embedding",
];

const KEYWORDS_SHOWN: usize = 5;

fn read_optional<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    match fs::read(path) {
        Ok(bytes) => Ok(Some(
            serde_json::from_slice(&bytes)
                .with_context(|| format!("parsing {}", path.display()))?,
        )),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e).with_context(|| format!("reading {}", path.display())),
    }
}

fn score_files(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let dir = root.join(SCORES_DIR);
    let mut files = Vec::new();
    if let Ok(entries) = fs::read_dir(&dir) {
        for entry in entries {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let stem = path
                    .file_stem()
                    .expect("file")
                    .to_string_lossy()
                    .into_owned();
                files.push((stem, path));
            }
        }
    }
    let rank = |s: &str| {
        METHOD_ORDER
            .iter()
            .position(|m| *m == s)
            .unwrap_or(METHOD_ORDER.len())
    };
    files.sort_by(|a, b| rank(&a.0).cmp(&rank(&b.0)).then(a.0.cmp(&b.0)));
    Ok(files)
}

fn pca_files(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let Ok(variants) = fs::read_dir(root.join("pca")) else {
        return Ok(out);
    };
    for variant in variants {
        let variant = variant?.path();
        if !variant.is_dir() {
            continue;
        }
        for file in fs::read_dir(&variant)? {
            let file = file?.path();
            let rel = file.strip_prefix(root).expect("under root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    out.sort();
    Ok(out)
}

fn keyword_list(keywords: Option<&TopicKeywords>) -> String {
    keywords.map_or_else(String::new, |k| {
        k.tokens()
            .take(KEYWORDS_SHOWN)
            .collect::<Vec<_>>()
            .join(", ")
    })
}

/// Markdown and JSON reports from the artifacts under `root`. With
/// `with_recall` the evaluation output must exist; without it the recall
/// section is left out.
pub fn render_report(root: &Path, with_recall: bool) -> Result<(String, Vec<u8>)> {
    let files = score_files(root)?;
    if files.is_empty() {
        bail!(
            "no rankings under {}: run `pacte rank` and/or `pacte loe` (or `pacte pipeline`) first",
            root.join(SCORES_DIR).display()
        );
    }
    let keywords: Vec<TopicKeywords> = read_optional(&root.join(KEYWORDS))?.unwrap_or_default();
    let coherence: Vec<CoherenceScore> = read_optional(&root.join(COHERENCE))?.unwrap_or_default();
    let recall: Option<serde_json::Value> = if with_recall {
        match read_optional(&root.join(RECALL_JSON))? {
            Some(v) => Some(v),
            None => bail!(
                "annotations are configured but {RECALL_JSON} is missing: run `pacte eval` first"
            ),
        }
    } else {
        None
    };
    let mut methods = Vec::new();
    for (_, path) in &files {
        let reports: Vec<ScoreReport> = read_optional(path)?.expect("listed files exist");
        methods.push(reports);
    }
    let pca = pca_files(root)?;
    let keyword_of = |t: usize| keywords.iter().find(|k| k.topic_id == t);

    let mut md = String::from("# Polarized topics\n\n");
    if recall.is_none() {
        md.push_str("No annotations supplied; the recall section is omitted.\n\n");
    }
    if !keywords.is_empty() {
        let _ = writeln!(md, "## Topics\n\nK = {}.", keywords.len());
        if let Some(c) = coherence.iter().find(|c| c.k == keywords.len()) {
            let _ = writeln!(md, "Mean NPMI coherence {:.4}.", c.value);
        }
        md.push_str("\n| Topic | Top keywords |\n|---|---|\n");
        for k in &keywords {
            let _ = writeln!(md, "| {} | {} |", k.topic_id, keyword_list(Some(k)));
        }
        md.push('\n');
    }
    for reports in &methods {
        for r in reports {
            let _ = writeln!(md, "## {}: {} vs {}\n", r.variant, r.pair[0], r.pair[1]);
            md.push_str("| Rank | Topic | β | Cosine | Top keywords |\n|---|---|---|---|---|\n");
            for (i, &topic) in r.ranking.iter().enumerate() {
                let s = r
                    .scores
                    .iter()
                    .find(|s| s.topic_id == topic)
                    .expect("ranked topics are scored");
                let _ = writeln!(
                    md,
                    "| {} | {} | {:.4} | {:.4} | {} |",
                    i + 1,
                    topic,
                    s.beta,
                    s.cosine,
                    keyword_list(keyword_of(topic))
                );
            }
            md.push('\n');
        }
    }
    if let Some(recall) = &recall {
        md.push_str("## Recall@3\n\n");
        if let Ok(table) =
            serde_json::from_value::<pacte::eval::RecallTable>(recall["table"].clone())
        {
            md.push_str(&table.to_markdown());
        }
        md.push('\n');
    }
    if !pca.is_empty() {
        md.push_str("## PCA projections\n\n");
        for p in &pca {
            let _ = writeln!(md, "- `{p}`");
        }
    }

    let report = json!({
        "annotations": recall.is_some(),
        "topics": keywords,
        "coherence": coherence,
        "methods": methods
            .iter()
            .map(|reports| json!({
                "variant": reports.first().map(|r| r.variant.clone()),
                "pairs": reports,
            }))
            .collect::<Vec<_>>(),
        "recall": recall,
        "pca": pca,
    });
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    Ok((md, bytes))
}

/// Writes `report.md` and `report.json` into `root`, including recall when
/// evaluation output is present.
pub fn emit_report(root: &Path) -> Result<(PathBuf, PathBuf)> {
    let with_recall = root.join(RECALL_JSON).is_file();
    let (md, json) = render_report(root, with_recall)?;
    let md_path = root.join(REPORT_MD);
    let json_path = root.join(REPORT_JSON);
    pacte::io::write_atomic(&md_path, md.as_bytes())?;
    pacte::io::write_atomic(&json_path, &json)?;
    Ok((md_path, json_path))
}
