use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pacte::corpus::{Side, DEFAULT_MIN_COUNT, DEFAULT_THRESHOLD};
use pacte::encoder::{EncoderConfig, LabelMode, TrainConfig, DEFAULT_TOPICALITY_THRESHOLD};
use pacte::eval::LeaningDenominator;
use pacte::polarization::{
    AggregationSettings, VariantMode, DEFAULT_TOP_DOCUMENTS, DEFAULT_TOP_KEYWORDS,
};
use pacte::topics::LdaConfig;
use serde::{Deserialize, Serialize};

pub const WORKDIR_ENV: &str = "PACTE_WORKDIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Articles, one JSON object per line.
    pub corpus: Option<PathBuf>,
    /// Source→side map file, merged over `sources`.
    pub source_map: Option<PathBuf>,
    /// Replaces the built-in English stopword list.
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    /// `index.json` of an external embedding store. When set, no encoder is
    /// trained and every variant reads its vectors from the store.
    pub embedding_store: Option<PathBuf>,
    pub workdir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: None,
            source_map: None,
            stopwords: None,
            lemmas: None,
            annotations: None,
            embedding_store: None,
            workdir: PathBuf::from("pacte-work"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSettings {
    /// Replaces the default outlet-name list when set.
    pub extra_stopwords: Option<Vec<String>>,
    pub lowercase: bool,
    pub bigrams: bool,
    pub bigram_min_count: usize,
    pub bigram_threshold: f64,
    pub min_df: usize,
    pub max_df_fraction: f64,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        Self {
            extra_stopwords: None,
            lowercase: true,
            bigrams: true,
            bigram_min_count: DEFAULT_MIN_COUNT,
            bigram_threshold: DEFAULT_THRESHOLD,
            min_df: 1,
            max_df_fraction: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSettings {
    /// Used when `k_grid` is unset.
    pub k: usize,
    /// Inclusive `[k_min, k_max]`; the most coherent K wins.
    pub k_grid: Option<[usize; 2]>,
    /// `None` means `50 / K`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub average_last: usize,
    /// Topics left out of every ranking.
    pub exclude_topics: BTreeSet<usize>,
    /// Keywords per topic scored for coherence.
    pub coherence_top_m: usize,
}

impl Default for LdaSettings {
    fn default() -> Self {
        let lda = LdaConfig::default();
        Self {
            k: lda.k,
            k_grid: None,
            alpha: lda.alpha,
            beta: lda.beta,
            iterations: lda.iterations,
            seed: lda.seed,
            average_last: lda.average_last,
            exclude_topics: BTreeSet::new(),
            coherence_top_m: 10,
        }
    }
}

impl LdaSettings {
    pub fn lda_config(&self) -> LdaConfig {
        LdaConfig {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            seed: self.seed,
            average_last: self.average_last,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSettings {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    pub init_std: f64,
}

impl Default for EncoderSettings {
    fn default() -> Self {
        let e = EncoderConfig::default();
        Self {
            d_model: e.d_model,
            n_heads: e.n_heads,
            n_layers: e.n_layers,
            ffn_dim: e.ffn_dim,
            max_len: e.max_len,
            init_std: e.init_std,
        }
    }
}

impl EncoderSettings {
    pub fn encoder_config(&self, vocab_len: usize) -> EncoderConfig {
        let base = EncoderConfig::default();
        EncoderConfig {
            d_model: self.d_model,
            n_heads: self.n_heads,
            n_layers: self.n_layers,
            ffn_dim: self.ffn_dim,
            max_len: self.max_len,
            vocab_size: vocab_len + base.vocab_size,
            init_std: self.init_std,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Also seeds the encoder's initial weights.
    pub seed: u64,
    pub topicality_threshold: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: t.seed,
            topicality_threshold: DEFAULT_TOPICALITY_THRESHOLD,
        }
    }
}

impl TrainSettings {
    pub fn train_config(&self, label_mode: LabelMode) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            label_mode,
        }
    }
}

/// Everything a pipeline run needs. Loaded from JSON; command-line flags
/// override individual fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    /// Source name → side.
    pub sources: BTreeMap<String, Side>,
    pub preprocess: PreprocessSettings,
    pub lda: LdaSettings,
    /// Keywords per topic (m).
    pub top_keywords: usize,
    /// Documents per topic and side (n).
    pub top_documents: usize,
    pub encoder: EncoderSettings,
    pub train: TrainSettings,
    pub variants: Vec<VariantMode>,
    /// Also score topics with the leave-out estimator.
    pub loe: bool,
    /// `[liberal source, conservative source]`. Empty compares the whole
    /// liberal side with the whole conservative side.
    pub pairs: Vec<[String; 2]>,
    pub leaning_denominator: LeaningDenominator,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            sources: BTreeMap::new(),
            preprocess: PreprocessSettings::default(),
            lda: LdaSettings::default(),
            top_keywords: DEFAULT_TOP_KEYWORDS,
            top_documents: DEFAULT_TOP_DOCUMENTS,
            encoder: EncoderSettings::default(),
            train: TrainSettings::default(),
            variants: vec![VariantMode::Pacte],
            loe: true,
            pairs: Vec::new(),
            leaning_denominator: LeaningDenominator::default(),
        }
    }
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl PipelineConfig {
    /// Reads a JSON config. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut config.paths;
        for opt in [
            &mut p.corpus,
            &mut p.source_map,
            &mut p.stopwords,
            &mut p.lemmas,
            &mut p.annotations,
            &mut p.embedding_store,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, opt);
        }
        resolve(base, &mut p.workdir);
        Ok(config)
    }

    pub fn aggregation(&self) -> AggregationSettings {
        AggregationSettings {
            top_keywords: self.top_keywords,
            top_documents: self.top_documents,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_keywords == 0 || self.top_documents == 0 {
            bail!("top_keywords and top_documents must be at least 1");
        }
        if self.variants.is_empty() && !self.loe {
            bail!("nothing to score: no variants and the leave-out estimator disabled");
        }
        if let Some([lo, hi]) = self.lda.k_grid {
            if lo < 2 || lo > hi {
                bail!("lda.k_grid must satisfy 2 <= k_min <= k_max, got [{lo}, {hi}]");
            }
        }
        let p = &self.paths;
        match &p.corpus {
            None => bail!("no corpus given (paths.corpus or --corpus)"),
            Some(c) if !c.is_file() => bail!("corpus {} does not exist", c.display()),
            _ => {}
        }
        for (name, path) in [
            ("source_map", &p.source_map),
            ("stopwords", &p.stopwords),
            ("lemmas", &p.lemmas),
            ("annotations", &p.annotations),
            ("embedding_store", &p.embedding_store),
        ] {
            if let Some(path) = path {
                if !path.is_file() {
                    bail!("{name} file {} does not exist", path.display());
                }
            }
        }
        if p.source_map.is_none() && self.sources.is_empty() {
            bail!("no source→side map (sources or paths.source_map)");
        }
        std::fs::create_dir_all(&p.workdir)
            .with_context(|| format!("workdir {} is not writable", p.workdir.display()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let c: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.top_keywords, 10);
        assert_eq!(c.top_documents, 10);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"typo": 1}"#).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"paths": {"corpus": "a.jsonl", "workdir": "/abs/w"}, "variants": ["pacte", "doc_embedding"]}"#,
        )
        .unwrap();
        let c = PipelineConfig::load(&path).unwrap();
        assert_eq!(c.paths.corpus.unwrap(), dir.path().join("a.jsonl"));
        assert_eq!(c.paths.workdir, PathBuf::from("/abs/w"));
        assert_eq!(c.variants, [VariantMode::Pacte, VariantMode::DocEmbedding]);
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("c.jsonl");
        std::fs::write(&corpus, "").unwrap();
        let mut c = PipelineConfig::default();
        c.paths.workdir = dir.path().join("w");
        assert!(c.validate().is_err());
        c.paths.corpus = Some(corpus);
        c.sources.insert("cnn".into(), Side::Liberal);
        c.validate().unwrap();
        c.top_keywords = 0;
        assert!(c.validate().is_err());
    }
}
