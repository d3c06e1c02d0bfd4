use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ndarray::Array2;
use pacte::corpus::{
    bigram_transform, build_vocabulary, ingest_jsonl, load_lemma_map, load_word_list, preprocess,
    Corpus, PreprocessConfig, Side, SourceMap, Vocabulary,
};
use pacte::encoder::{
    split_by_topicality, train_partisanship, write_embedding_store, ContextEncoder, EmbeddingStore,
    EncoderModel, LabelMode,
};
use pacte::eval::{
    gt_polarization_and_ranking, recall_hits, AnnotationSet, RecallTable, TARGET_SIZE,
};
use pacte::loe::loe_for_topic;
use pacte::polarization::{
    pca_csv, pca_project, rank_topics, run_variant, PcaPoint, PolarizationScore, ScoreReport,
    VariantMode, VariantRun,
};
use pacte::topics::{
    coherence_npmi, select_k, top_keywords, train_lda, LdaModel, TopicKeywords, DEFAULT_EPSILON,
};
use serde::Serialize;
use serde_json::json;

use crate::cache::{file_hash, stage_key, StageOutputs, StageStatus, Workdir};
use crate::config::PipelineConfig;
use crate::report::{render_report, REPORT_JSON, REPORT_MD};

const DOCUMENTS: &str = "corpus/documents.json";
const VOCABULARY: &str = "corpus/vocabulary.json";
pub const TOKENS: &str = "corpus/tokens.jsonl";
const LDA_DIR: &str = "lda";
pub const KEYWORDS: &str = "topics/keywords.json";
pub const COHERENCE: &str = "topics/coherence.json";
pub const SCORES_DIR: &str = "scores";
pub const RECALL_JSON: &str = "eval/recall.json";
const RECALL_MD: &str = "eval/recall.md";

/// Bumped whenever a stage's output format or algorithm changes.
const STAGE_VERSION: u32 = 1;

/// File-name form of a variant, as in its config spelling.
pub fn variant_slug(mode: VariantMode) -> String {
    serde_json::to_value(mode)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .expect("unit variant")
}

fn label_slug(mode: LabelMode) -> &'static str {
    match mode {
        LabelMode::TrueLabels => "true_labels",
        LabelMode::ShuffledLabels => "shuffled_labels",
        LabelMode::None => "untrained",
    }
}

fn path_slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

pub fn pair_slug(left: &str, right: &str) -> String {
    format!("{}__{}", path_slug(left), path_slug(right))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRun {
    pub name: String,
    pub status: StageStatus,
}

/// One liberal-vs-conservative comparison.
struct Pair {
    left: String,
    right: String,
    corpus: Corpus,
}

enum Encoder {
    Model(Box<EncoderModel>),
    Store(EmbeddingStore),
}

impl Encoder {
    fn as_dyn(&self) -> &dyn ContextEncoder {
        match self {
            Encoder::Model(m) => m.as_ref(),
            Encoder::Store(s) => s,
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub struct Pipeline {
    config: PipelineConfig,
    work: Workdir,
    stages: Vec<StageRun>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let work = Workdir::open(&config.paths.workdir)?;
        Ok(Self {
            config,
            work,
            stages: Vec::new(),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn workdir(&self) -> &Path {
        self.work.root()
    }

    /// Stages run so far, in order.
    pub fn stages(&self) -> &[StageRun] {
        &self.stages
    }

    fn stage(
        &mut self,
        name: &str,
        inputs: serde_json::Value,
        compute: impl FnOnce(&mut StageOutputs) -> Result<()>,
    ) -> Result<()> {
        let key = stage_key(name, STAGE_VERSION, &inputs);
        let status = self.work.run_stage(name, &key, compute)?;
        self.stages.push(StageRun {
            name: name.to_string(),
            status,
        });
        Ok(())
    }

    fn upstream(&self, stage: &str) -> Result<String> {
        self.work.digest(stage).ok_or_else(|| {
            anyhow!(
                "stage {stage} has not run in {}",
                self.work.root().display()
            )
        })
    }

    fn source_map(&self) -> Result<SourceMap> {
        let mut map: SourceMap = self
            .config
            .sources
            .iter()
            .map(|(s, side)| (s.as_str(), *side))
            .collect();
        if let Some(path) = &self.config.paths.source_map {
            let file = SourceMap::load(path)?;
            for side in Side::BOTH {
                for source in file.sources(side) {
                    map.insert(source, side);
                }
            }
        }
        Ok(map)
    }

    // ---- stages ----

    pub fn preprocess(&mut self) -> Result<()> {
        let paths = self.config.paths.clone();
        let corpus_path = paths.corpus.clone().expect("validated");
        let map = self.source_map()?;
        let optional_hash = |p: &Option<PathBuf>| p.as_deref().map(file_hash).transpose();
        let inputs = json!({
            "corpus": file_hash(&corpus_path)?,
            "sources": map,
            "stopwords": optional_hash(&paths.stopwords)?,
            "lemmas": optional_hash(&paths.lemmas)?,
            "settings": self.config.preprocess,
        });
        let settings = self.config.preprocess.clone();
        self.stage("preprocess", inputs, |out| {
            let corpus = ingest_jsonl(&corpus_path, &map)?;
            let mut pc = PreprocessConfig::default();
            if let Some(p) = &paths.stopwords {
                pc.stopwords = load_word_list(p)?;
            }
            if let Some(extra) = &settings.extra_stopwords {
                pc.extra_stopwords = extra.iter().map(|w| w.to_lowercase()).collect();
            }
            if let Some(p) = &paths.lemmas {
                pc.lemmas = Some(load_lemma_map(p)?);
            }
            pc.lowercase = settings.lowercase;
            let corpus = preprocess(corpus, &pc);
            let mut corpus = if settings.bigrams {
                let (model, corpus) =
                    bigram_transform(corpus, settings.bigram_min_count, settings.bigram_threshold)?;
                log::info!("{} bigrams merged", model.len());
                out.write_json("corpus/bigrams.json", &model)?;
                corpus
            } else {
                corpus
            };
            let mut dropped = corpus.drop_empty();
            let vocab = build_vocabulary(&corpus, settings.min_df, settings.max_df_fraction)?;
            let before: BTreeSet<String> = corpus.iter().map(|d| d.id.clone()).collect();
            let corpus = corpus.filter(|d| d.tokens.iter().any(|t| vocab.contains(t)));
            let kept: BTreeSet<&str> = corpus.iter().map(|d| d.id.as_str()).collect();
            dropped.extend(
                before
                    .iter()
                    .filter(|id| !kept.contains(id.as_str()))
                    .cloned(),
            );
            if !dropped.is_empty() {
                log::warn!("{} documents dropped with no usable tokens", dropped.len());
            }
            if corpus.is_empty() {
                bail!("no documents left after preprocessing");
            }
            out.write_json(DOCUMENTS, &corpus)?;
            out.write_json(VOCABULARY, &vocab)?;
            out.write_json("corpus/dropped.json", &dropped)?;
            let mut tokens = String::new();
            for d in &corpus {
                tokens.push_str(
                    &json!({"id": d.id, "side": d.side.label(), "tokens": d.tokens}).to_string(),
                );
                tokens.push('\n');
            }
            out.write(TOKENS, tokens.as_bytes())
        })
    }

    fn corpus(&self) -> Result<Corpus> {
        read_json(&self.work.path(DOCUMENTS))
    }

    fn vocabulary(&self) -> Result<Vocabulary> {
        read_json(&self.work.path(VOCABULARY))
    }

    fn lda(&self) -> Result<LdaModel> {
        Ok(LdaModel::load(&self.work.path(LDA_DIR))?)
    }

    /// Copies the exported token lists to `dest`.
    pub fn export_tokens(&self, dest: &Path) -> Result<()> {
        let bytes = fs::read(self.work.path(TOKENS))?;
        pacte::io::write_atomic(dest, &bytes).with_context(|| format!("writing {}", dest.display()))
    }

    pub fn topics(&mut self) -> Result<()> {
        let inputs = json!({"corpus": self.upstream("preprocess")?, "lda": self.config.lda, "m": self.config.top_keywords});
        let corpus = self.corpus()?;
        let vocab = self.vocabulary()?;
        let lda = self.config.lda.clone();
        let m = self.config.top_keywords;
        self.stage("lda", inputs, |out| {
            let base = lda.lda_config();
            let (model, scores) = match lda.k_grid {
                Some([lo, hi]) => select_k(
                    &corpus,
                    &vocab,
                    lo,
                    hi,
                    &base,
                    lda.coherence_top_m,
                    DEFAULT_EPSILON,
                )?,
                None => {
                    let model = train_lda(&corpus, &vocab, &base)?;
                    let score = coherence_npmi(
                        &model,
                        &vocab,
                        &corpus,
                        lda.coherence_top_m.max(2),
                        DEFAULT_EPSILON,
                    )?;
                    (model, vec![score])
                }
            };
            log::info!("K = {}", model.k);
            out.write_dir(LDA_DIR, |dir| Ok(model.save(dir)?))?;
            out.write_json(COHERENCE, &scores)?;
            let keywords = (0..model.k)
                .map(|t| top_keywords(&model, &vocab, t, m.min(vocab.len())))
                .collect::<Result<Vec<TopicKeywords>, _>>()?;
            out.write_json(KEYWORDS, &keywords)
        })
    }

    fn training_modes(&self) -> Vec<LabelMode> {
        let mut modes = Vec::new();
        if self.config.paths.embedding_store.is_some() {
            return modes;
        }
        for v in &self.config.variants {
            let m = v.label_mode();
            if m != LabelMode::None && !modes.contains(&m) {
                modes.push(m);
            }
        }
        modes
    }

    /// Trains one encoder per label mode the variants need. Untrained
    /// variants and external stores skip this stage.
    pub fn train(&mut self) -> Result<()> {
        for mode in self.training_modes() {
            self.train_mode(mode)?;
        }
        Ok(())
    }

    fn train_stage_name(mode: LabelMode) -> String {
        format!("train:{}", label_slug(mode))
    }

    fn train_mode(&mut self, mode: LabelMode) -> Result<()> {
        let name = Self::train_stage_name(mode);
        let inputs = json!({
            "corpus": self.upstream("preprocess")?,
            "lda": self.upstream("lda")?,
            "encoder": self.config.encoder,
            "train": self.config.train,
            "mode": mode,
        });
        let corpus = self.corpus()?;
        let vocab = self.vocabulary()?;
        let lda = self.lda()?;
        let enc = self.config.encoder.encoder_config(vocab.len());
        let train = self.config.train.clone();
        let slug = label_slug(mode);
        self.stage(&name, inputs, |out| {
            let (train_set, validation) =
                split_by_topicality(&corpus, &lda.theta, train.topicality_threshold)?;
            log::info!(
                "training on {} topical documents, validating on {}",
                train_set.len(),
                validation.len()
            );
            let outcome = train_partisanship(
                enc,
                vocab,
                &train_set,
                &validation,
                &train.train_config(mode),
            )?;
            out.write_dir(&format!("encoder/{slug}"), |dir| {
                Ok(outcome.model.save(dir)?)
            })?;
            out.write_json(
                &format!("encoder/{slug}.metrics.json"),
                &json!({
                    "train_documents": train_set.len(),
                    "validation_documents": validation.len(),
                    "best_epoch": outcome.best_epoch,
                    "initial_train_loss": outcome.initial_train_loss,
                    "epochs": outcome.epochs,
                }),
            )
        })
    }

    /// The encoder a variant reads from, and a description for cache keys.
    fn encoder_for(
        &self,
        mode: VariantMode,
        vocab: &Vocabulary,
    ) -> Result<(Encoder, serde_json::Value)> {
        if let Some(index) = &self.config.paths.embedding_store {
            let store = EmbeddingStore::open(index)?;
            let mut hashes = vec![file_hash(index)?];
            let dir = index.parent().unwrap_or(Path::new("."));
            for entry in store.entries() {
                hashes.push(file_hash(&dir.join(&entry.file))?);
            }
            return Ok((Encoder::Store(store), json!({"store": hashes})));
        }
        let label = mode.label_mode();
        if label == LabelMode::None {
            let config = self.config.encoder.encoder_config(vocab.len());
            let model = EncoderModel::new(config, vocab.clone(), self.config.train.seed)?;
            return Ok((
                Encoder::Model(Box::new(model)),
                json!({"untrained": self.config.encoder, "seed": self.config.train.seed}),
            ));
        }
        let name = Self::train_stage_name(label);
        let digest = self.upstream(&name)?;
        let model = EncoderModel::load(&self.work.path(&format!("encoder/{}", label_slug(label))))?;
        Ok((Encoder::Model(Box::new(model)), json!({"trained": digest})))
    }

    fn pairs(&self, corpus: &Corpus) -> Result<Vec<Pair>> {
        if self.config.pairs.is_empty() {
            return Ok(vec![Pair {
                left: Side::Liberal.as_str().into(),
                right: Side::Conservative.as_str().into(),
                corpus: corpus.clone(),
            }]);
        }
        self.config
            .pairs
            .iter()
            .map(|[left, right]| {
                for (source, side) in [(left, Side::Liberal), (right, Side::Conservative)] {
                    let docs: Vec<_> = corpus
                        .iter()
                        .filter(|d| d.source.eq_ignore_ascii_case(source))
                        .collect();
                    if docs.is_empty() {
                        bail!("pair [{left}, {right}]: no documents from {source}");
                    }
                    if let Some(d) = docs.iter().find(|d| d.side != side) {
                        bail!(
                            "pair [{left}, {right}]: {source} is {}, expected {side}",
                            d.side
                        );
                    }
                }
                let pair = corpus.filter(|d| {
                    d.source.eq_ignore_ascii_case(left) || d.source.eq_ignore_ascii_case(right)
                });
                Ok(Pair {
                    left: left.clone(),
                    right: right.clone(),
                    corpus: pair,
                })
            })
            .collect()
    }

    pub fn rank(&mut self) -> Result<()> {
        for mode in self.config.variants.clone() {
            self.rank_variant(mode)?;
        }
        Ok(())
    }

    fn rank_variant(&mut self, mode: VariantMode) -> Result<()> {
        let slug = variant_slug(mode);
        let corpus = self.corpus()?;
        let vocab = self.vocabulary()?;
        let (encoder, encoder_key) = self.encoder_for(mode, &vocab)?;
        let inputs = json!({
            "corpus": self.upstream("preprocess")?,
            "lda": self.upstream("lda")?,
            "encoder": encoder_key,
            "aggregation": self.config.aggregation(),
            "exclude": self.config.lda.exclude_topics,
            "pairs": self.config.pairs,
        });
        let lda = self.lda()?;
        let pairs = self
            .pairs(&corpus)
            .with_context(|| format!("stage rank:{slug} failed"))?;
        let settings = self.config.aggregation();
        let exclude = self.config.lda.exclude_topics.clone();
        self.stage(&format!("rank:{slug}"), inputs, |out| {
            let encoder = encoder.as_dyn();
            let mut reports = Vec::new();
            for pair in &pairs {
                let run = run_variant(mode, &pair.corpus, &lda, &vocab, encoder, &settings)
                    .with_context(|| {
                        format!("{} on [{}, {}]", mode.name(), pair.left, pair.right)
                    })?;
                let ranking = rank_topics(
                    (pair.left.clone(), pair.right.clone()),
                    &run.scores(),
                    &exclude,
                );
                reports.push(ScoreReport::new(mode.name(), &ranking));
                let points = pca_points(&run, &pair.corpus, encoder)?;
                if !points.is_empty() {
                    out.write(
                        &format!("pca/{slug}/{}.csv", pair_slug(&pair.left, &pair.right)),
                        &pca_csv(&points),
                    )?;
                }
            }
            out.write_json(&format!("{SCORES_DIR}/{slug}.json"), &reports)
        })
    }

    pub fn loe(&mut self) -> Result<()> {
        let inputs = json!({
            "corpus": self.upstream("preprocess")?,
            "lda": self.upstream("lda")?,
            "n": self.config.top_documents,
            "exclude": self.config.lda.exclude_topics,
            "pairs": self.config.pairs,
        });
        let corpus = self.corpus()?;
        let lda = self.lda()?;
        let pairs = self.pairs(&corpus).context("stage loe failed")?;
        let n = self.config.top_documents;
        let exclude = self.config.lda.exclude_topics.clone();
        self.stage("loe", inputs, |out| {
            let mut reports = Vec::new();
            for pair in &pairs {
                let scores = (0..lda.k)
                    .map(|t| {
                        let r = loe_for_topic(&lda, &pair.corpus, t, n).with_context(|| {
                            format!("LOE on [{}, {}], topic {t}", pair.left, pair.right)
                        })?;
                        Ok(PolarizationScore {
                            topic_id: t,
                            cosine: 1.0 - 2.0 * r.pi,
                            beta: r.pi,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let ranking =
                    rank_topics((pair.left.clone(), pair.right.clone()), &scores, &exclude);
                reports.push(ScoreReport::new("LOE", &ranking));
            }
            out.write_json(&format!("{SCORES_DIR}/loe.json"), &reports)
        })
    }

    /// Score stages that have run, in report order.
    fn score_stages(&self) -> Vec<(String, String)> {
        let mut stages = Vec::new();
        if self.config.loe {
            stages.push(("loe".to_string(), "loe".to_string()));
        }
        for &mode in &self.config.variants {
            let slug = variant_slug(mode);
            stages.push((format!("rank:{slug}"), slug));
        }
        stages
    }

    /// Recall of every method against the annotations. A no-op without
    /// annotations.
    pub fn eval(&mut self) -> Result<()> {
        let Some(path) = self.config.paths.annotations.clone() else {
            log::info!("no annotations; skipping evaluation");
            return Ok(());
        };
        let mut digests = BTreeMap::new();
        for (stage, _) in self.score_stages() {
            digests.insert(stage.clone(), self.upstream(&stage)?);
        }
        let inputs = json!({
            "annotations": file_hash(&path)?,
            "scores": digests,
            "denominator": self.config.leaning_denominator,
        });
        let slugs: Vec<String> = self.score_stages().into_iter().map(|s| s.1).collect();
        let root = self.work.root().to_path_buf();
        let denominator = self.config.leaning_denominator;
        self.stage("eval", inputs, |out| {
            let annotations = AnnotationSet::load(&path)?;
            let mut table = RecallTable::default();
            let mut truths = Vec::new();
            for slug in &slugs {
                let reports: Vec<ScoreReport> =
                    read_json(&root.join(format!("{SCORES_DIR}/{slug}.json")))?;
                for report in reports {
                    let [left, right] = &report.pair;
                    let truth =
                        gt_polarization_and_ranking(&annotations, (left, right), denominator)?;
                    let hits = recall_hits(&report.ranking, &truth, TARGET_SIZE)
                        .with_context(|| format!("{} on [{left}, {right}]", report.variant))?;
                    table.insert(left, right, &report.variant, hits, TARGET_SIZE);
                    if !truths.contains(&truth) {
                        truths.push(truth);
                    }
                }
            }
            out.write_json(
                RECALL_JSON,
                &json!({"table": table.to_json(), "ground_truth": truths}),
            )?;
            out.write(RECALL_MD, table.to_markdown().as_bytes())
        })
    }

    pub fn report(&mut self) -> Result<()> {
        let mut inputs = BTreeMap::new();
        for stage in ["lda", "eval"]
            .into_iter()
            .map(String::from)
            .chain(self.score_stages().into_iter().map(|s| s.0))
        {
            inputs.insert(stage.clone(), self.work.digest(&stage));
        }
        inputs.insert("pca".into(), None);
        let root = self.work.root().to_path_buf();
        let with_eval = self.config.paths.annotations.is_some();
        self.stage("report", json!(inputs), |out| {
            let (md, json) = render_report(&root, with_eval)?;
            out.write(REPORT_MD, md.as_bytes())?;
            out.write(REPORT_JSON, &json)
        })
    }

    /// Writes an embedding store of every document, encoded as `mode` would
    /// encode it. Returns the index path.
    pub fn embed(&mut self, mode: VariantMode, dest: Option<&Path>) -> Result<PathBuf> {
        let slug = variant_slug(mode);
        let corpus = self.corpus()?;
        let vocab = self.vocabulary()?;
        let (encoder, encoder_key) = self.encoder_for(mode, &vocab)?;
        let inputs = json!({"corpus": self.upstream("preprocess")?, "encoder": encoder_key});
        let rel = format!("embeddings/{slug}");
        let rel_in = rel.clone();
        self.stage(&format!("embed:{slug}"), inputs, |out| {
            let encoder = encoder.as_dyn();
            let encodings = corpus
                .iter()
                .map(|d| encoder.encode(d))
                .collect::<Result<Vec<_>, _>>()?;
            out.write_dir(&rel_in, |dir| {
                write_embedding_store(dir, encoder.name(), encoder.dim(), &encodings)?;
                Ok(())
            })
        })?;
        let src = self.work.path(&rel);
        let Some(dest) = dest else {
            return Ok(src.join(pacte::encoder::INDEX_FILE));
        };
        fs::create_dir_all(dest)?;
        for entry in fs::read_dir(&src)? {
            let path = entry?.path();
            let bytes = fs::read(&path)?;
            pacte::io::write_atomic(&dest.join(path.file_name().expect("file")), &bytes)?;
        }
        Ok(dest.join(pacte::encoder::INDEX_FILE))
    }

    /// Every stage up to the report.
    pub fn run_all(&mut self) -> Result<()> {
        self.preprocess()?;
        self.topics()?;
        self.train()?;
        self.rank()?;
        if self.config.loe {
            self.loe()?;
        }
        self.eval()?;
        self.report()
    }
}

/// DC topic embeddings of the top documents plus each of those documents'
/// pooled vector, projected together onto two components.
fn pca_points(
    run: &VariantRun,
    corpus: &Corpus,
    encoder: &dyn ContextEncoder,
) -> Result<Vec<PcaPoint>> {
    let mut rows = Vec::new();
    let mut meta = Vec::new();
    let mut docs = BTreeMap::new();
    for topic in &run.topics {
        for (side, dc) in &topic.documents {
            rows.push(dc.vector.clone());
            meta.push((dc.doc_id.clone(), Some(dc.topic_id), *side));
            docs.insert(dc.doc_id.clone(), *side);
        }
    }
    for (id, side) in docs {
        let doc = corpus
            .get(&id)
            .expect("top documents come from the pair corpus");
        rows.push(encoder.encode(doc)?.pooled);
        meta.push((id, None, side));
    }
    let dim = rows.first().map_or(0, |r| r.len());
    if rows.len() < 2 || dim < 2 {
        return Ok(Vec::new());
    }
    let matrix = Array2::from_shape_fn((rows.len(), dim), |(i, j)| rows[i][j]);
    let projection = pca_project(&matrix, 2)?;
    Ok(meta
        .into_iter()
        .zip(projection.coordinates.rows())
        .map(|((doc_id, topic_id, side), xy)| PcaPoint {
            doc_id,
            topic_id,
            side,
            x: xy[0],
            y: xy[1],
        })
        .collect())
}
