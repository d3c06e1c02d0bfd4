#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pacte_cli::config::PipelineConfig;
use pacte_cli::CommonArgs;

/// Two topics (the president's briefings, the virus response) covered by
/// three liberal and three conservative articles.
pub const TOY_CORPUS: &[(&str, &str, &str)] = &[
    ("c1", "CNN", "President Trump used the briefing to criticize reporters while the virus spread through hospitals and nurses asked for masks"),
    ("c2", "CNN", "The president attacked reporters at a White House briefing as hospitals ran short of masks and virus tests"),
    ("c3", "CNN", "Nurses and doctors warned the virus would overwhelm hospitals; the president dismissed the briefing questions from reporters"),
    ("f1", "Fox", "President Trump held a strong briefing and praised the task force as the virus response delivered masks to hospitals"),
    ("f2", "Fox", "At the White House briefing the president defended the virus response and announced new tests for hospitals"),
    ("f3", "Fox", "The president thanked nurses and doctors at the briefing and said hospitals had enough masks to beat the virus"),
];

pub fn write_toy(dir: &Path) -> PathBuf {
    let mut lines = String::new();
    for (id, source, text) in TOY_CORPUS {
        lines.push_str(
            &serde_json::json!({"id": id, "source": source, "date": "2020-04-01", "text": text})
                .to_string(),
        );
        lines.push('\n');
    }
    let corpus = dir.join("corpus.jsonl");
    std::fs::write(&corpus, lines).unwrap();
    std::fs::write(dir.join("sources.tsv"), "CNN\tliberal\nFox\tconservative\n").unwrap();
    let config = serde_json::json!({
        "paths": {"corpus": "corpus.jsonl", "source_map": "sources.tsv", "workdir": "work"},
        "preprocess": {"bigrams": false},
        "lda": {"k": 2, "iterations": 200, "seed": 3},
        "top_documents": 3,
        "encoder": {"d_model": 16, "n_heads": 2, "n_layers": 1, "ffn_dim": 32, "max_len": 64},
        "train": {"learning_rate": 0.001, "batch_size": 6, "epochs": 3, "seed": 3},
        "variants": ["pacte", "no_finetune", "shuffled_labels", "doc_embedding"],
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&config).unwrap()).unwrap();
    path
}

pub fn args(config: &Path) -> CommonArgs {
    CommonArgs {
        config: Some(config.to_path_buf()),
        ..CommonArgs::default()
    }
}

pub fn load(config: &Path) -> PipelineConfig {
    PipelineConfig::load(config).unwrap()
}
