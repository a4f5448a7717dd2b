//! End-to-end orchestration: ingest, bot filtering, text preparation, the
//! document-term matrix, factor analysis, component reports and geolocation.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::botfilter::{cluster_scores, derive_bot_threshold, filter_bots, ClusterResult, BOT_CLUSTERS};
use crate::config::PipelineConfig;
use crate::dtm::{build_matrix, build_vocab, csv_field, DocTermMatrix};
use crate::error::{Error, Result};
use crate::factor::{correlation_matrix, CorrelationMatrix, FactorMetadata, FactorModel, FactorOptions};
use crate::geoloc::{location_table, resolve_location, Gazetteer};
use crate::ingest::{
    drop_retweets, filter_keywords, parse_archive, rank_users_by_activity, read_bot_scores, restrict_to_users,
    Corpus,
};
use crate::textprep::{prepare, Lexicon, TokenizedDoc};
use crate::themes::{build_reports, comparison_table, label_prefix, write_terms_csv, ComparisonTable, ComponentSet, ReportOptions};

pub const RUN_REPORT: &str = "run_report.txt";
pub const DTM_CSV: &str = "dtm.csv";
pub const DTM_SPARSE: &str = "dtm.bin";
pub const VOCABULARY_CSV: &str = "vocabulary.csv";
pub const LOADINGS_CSV: &str = "loadings.csv";
pub const FACTOR_JSON: &str = "factor.json";
pub const COMPONENTS_CSV: &str = "components.csv";
pub const COMPONENTS_JSON: &str = "components.json";
pub const GEO_CSV: &str = "geo.csv";

const STAGING_DIR: &str = ".partial";

/// Tweet and user counts after one cleaning stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageCount {
    pub name: &'static str,
    pub tweets: usize,
    pub users: usize,
}

impl StageCount {
    fn of(name: &'static str, corpus: &Corpus) -> Self {
        StageCount {
            name,
            tweets: corpus.tweet_count(),
            users: corpus.user_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub language: String,
    /// Total, Without retweets, Most active users, Humans.
    pub stages: Vec<StageCount>,
    pub records_parsed: usize,
    pub malformed_skipped: usize,
    pub keywords: usize,
    pub scored_users: usize,
    pub bot_threshold: Option<f64>,
    pub bot_clusters: Option<ClusterResult>,
    pub documents: usize,
    pub documents_dropped: usize,
    pub vocabulary: usize,
    pub k: usize,
    pub fit: f64,
    pub fit_raw: f64,
    pub variance_share: f64,
    pub varimax_iterations: usize,
    pub varimax_converged: bool,
    /// Components without a single term above the loading threshold.
    pub empty_components: Vec<String>,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("[stages]\n");
        for st in &self.stages {
            writeln!(s, "{}: tweets={} users={}", st.name, st.tweets, st.users).unwrap();
        }
        s.push_str("\n[details]\n");
        let mut kv = |k: &str, v: String| writeln!(s, "{k}: {v}").unwrap();
        kv("language", self.language.clone());
        kv("records_parsed", self.records_parsed.to_string());
        kv("malformed_skipped", self.malformed_skipped.to_string());
        kv("keywords", self.keywords.to_string());
        kv("scored_users", self.scored_users.to_string());
        kv(
            "bot_threshold",
            self.bot_threshold.map_or("none".into(), |t| format!("{t:.4}")),
        );
        if let Some(c) = &self.bot_clusters {
            let bounds: Vec<String> = c
                .bounds()
                .iter()
                .zip(&c.sizes)
                .map(|((lo, hi), n)| format!("[{lo:.4},{hi:.4}]x{n}"))
                .collect();
            kv("bot_clusters", bounds.join(" "));
        }
        kv("documents", self.documents.to_string());
        kv("documents_dropped", self.documents_dropped.to_string());
        kv("vocabulary", self.vocabulary.to_string());
        kv("k", self.k.to_string());
        kv("fit", format!("{:.4}", self.fit));
        if self.fit_raw < 0.0 {
            kv("fit_raw", format!("{:.4}", self.fit_raw));
        }
        kv("variance_share", format!("{:.2}", self.variance_share));
        kv("varimax_iterations", self.varimax_iterations.to_string());
        kv("varimax_converged", self.varimax_converged.to_string());
        kv(
            "empty_components",
            if self.empty_components.is_empty() {
                "none".into()
            } else {
                self.empty_components.join(" ")
            },
        );
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorFile {
    pub language: String,
    pub labels: Vec<String>,
    #[serde(flatten)]
    pub model: FactorMetadata,
}

/// Cleaned corpus and its matrix, before factoring.
pub struct Prepared {
    pub stages: Vec<StageCount>,
    pub records_parsed: usize,
    pub malformed_skipped: usize,
    pub keywords: usize,
    pub scored_users: usize,
    pub bot_clusters: Option<ClusterResult>,
    pub bot_threshold: Option<f64>,
    pub humans: Corpus,
    pub documents: Vec<TokenizedDoc>,
    pub matrix: DocTermMatrix,
}

/// Runs every stage up to and including the document-term matrix.
pub fn prepare_corpus(cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let lexicon = Lexicon::load(cfg.stopwords.as_deref(), cfg.conversions.as_deref(), cfg.lemmas.as_deref())?;
    let keywords = cfg.resolved_keywords()?;
    let sidecar = cfg.bot_scores.as_deref().map(read_bot_scores).transpose()?;

    let parsed = parse_archive(&cfg.input, &cfg.language, cfg.on_malformed)?;
    let records_parsed = parsed.corpus.tweet_count();
    let total = if keywords.is_empty() {
        parsed.corpus
    } else {
        filter_keywords(&parsed.corpus, &keywords)?
    };
    let originals = drop_retweets(&total);
    let active = match cfg.active_users {
        Some(n) => restrict_to_users(&originals, &rank_users_by_activity(&originals, n)?),
        None => originals.clone(),
    };
    let active = match &sidecar {
        Some(scores) => active.with_bot_scores(scores)?,
        None => active,
    };

    let scores: Vec<f64> = active.users().values().filter_map(|u| u.bot_score).collect();
    let (humans, bot_clusters, bot_threshold) = if scores.is_empty() {
        (active.clone(), None, None)
    } else {
        if scores.len() < BOT_CLUSTERS {
            return Err(Error::Data(format!(
                "{} scored users; at least {BOT_CLUSTERS} are needed to derive a bot threshold",
                scores.len()
            )));
        }
        let clusters = cluster_scores(&scores, cfg.bot_k, cfg.bot_dedup)?;
        let threshold = derive_bot_threshold(&clusters)?;
        (filter_bots(&active, &threshold), Some(clusters), Some(threshold.value))
    };
    if humans.is_empty() {
        return Err(Error::Data("no tweets left after cleaning".into()));
    }

    let documents: Vec<TokenizedDoc> = humans
        .tweets()
        .iter()
        .map(|t| prepare(&t.id, &t.text, &lexicon))
        .collect();
    let vocab = build_vocab(&documents, cfg.top_n)?;
    let matrix = build_matrix(&documents, &vocab, cfg.min_terms)?;

    Ok(Prepared {
        stages: vec![
            StageCount::of("Total", &total),
            StageCount::of("Without retweets", &originals),
            StageCount::of("Most active users", &active),
            StageCount::of("Humans", &humans),
        ],
        records_parsed,
        malformed_skipped: parsed.skipped.len(),
        keywords: keywords.len(),
        scored_users: scores.len(),
        bot_clusters,
        bot_threshold,
        humans,
        documents,
        matrix,
    })
}

fn factor_options(cfg: &PipelineConfig) -> FactorOptions {
    FactorOptions {
        tol: cfg.varimax_tol,
        max_iter: cfg.varimax_max_iter,
    }
}

fn fit_model(corr: &CorrelationMatrix, k: usize, cfg: &PipelineConfig) -> Result<FactorModel> {
    if k > corr.dim() {
        return Err(Error::Data(format!(
            "k = {k} exceeds the vocabulary size ({})",
            corr.dim()
        )));
    }
    FactorModel::fit(corr, k, factor_options(cfg))
}

/// All output files of a run, in memory.
pub struct RunOutput {
    pub report: RunReport,
    pub files: Vec<(&'static str, Vec<u8>)>,
}

pub fn execute(cfg: &PipelineConfig) -> Result<RunOutput> {
    let prepared = prepare_corpus(cfg)?;
    let gazetteer = match &cfg.gazetteer {
        Some(p) => Gazetteer::load(p)?,
        None => Gazetteer::default(),
    };

    let corr = correlation_matrix(&prepared.matrix)?;
    let model = fit_model(&corr, cfg.k, cfg)?;
    if !model.converged {
        return Err(Error::NonConvergence(format!(
            "varimax did not converge within {} sweeps",
            cfg.varimax_max_iter
        )));
    }

    let prefix = cfg.label_prefix.clone().unwrap_or_else(|| label_prefix(&cfg.language));
    let labels: Vec<String> = (1..=model.k).map(|i| format!("{prefix}{i}")).collect();
    let texts: HashMap<&str, &str> = prepared
        .humans
        .tweets()
        .iter()
        .map(|t| (t.id.as_str(), t.text.as_str()))
        .collect();
    let reports = build_reports(
        &model,
        &prepared.matrix,
        &texts,
        &ReportOptions {
            prefix: &prefix,
            threshold: cfg.loading_threshold,
            top_docs: cfg.top_docs,
        },
    )?;

    let located = prepared
        .humans
        .with_countries(|u| u.location.as_deref().and_then(|l| resolve_location(l, &gazetteer)).map(str::to_string));
    let geo = location_table(&located, &gazetteer, cfg.geo_top_n)?;

    let report = RunReport {
        language: cfg.language.clone(),
        stages: prepared.stages.clone(),
        records_parsed: prepared.records_parsed,
        malformed_skipped: prepared.malformed_skipped,
        keywords: prepared.keywords,
        scored_users: prepared.scored_users,
        bot_threshold: prepared.bot_threshold,
        bot_clusters: prepared.bot_clusters.clone(),
        documents: prepared.documents.len(),
        documents_dropped: prepared.matrix.dropped(),
        vocabulary: prepared.matrix.n_terms(),
        k: model.k,
        fit: model.fit,
        fit_raw: model.fit_raw,
        variance_share: model.variance_share,
        varimax_iterations: model.iterations,
        varimax_converged: model.converged,
        empty_components: reports
            .iter()
            .filter(|r| r.terms.is_empty())
            .map(|r| r.component_id.clone())
            .collect(),
    };

    let io_err = |e: std::io::Error| Error::io("<memory>", e);
    let mut files: Vec<(&'static str, Vec<u8>)> = Vec::new();
    files.push((RUN_REPORT, report.to_text().into_bytes()));

    let mut buf = Vec::new();
    prepared.matrix.write_csv(&mut buf).map_err(io_err)?;
    files.push((DTM_CSV, buf));
    let mut buf = Vec::new();
    prepared.matrix.write_sparse(&mut buf).map_err(io_err)?;
    files.push((DTM_SPARSE, buf));
    files.push((VOCABULARY_CSV, vocabulary_csv(&prepared.matrix).into_bytes()));

    let mut buf = Vec::new();
    model.write_loadings_csv(&mut buf, &labels).map_err(io_err)?;
    files.push((LOADINGS_CSV, buf));
    let factor_file = FactorFile {
        language: cfg.language.clone(),
        labels,
        model: model.metadata(),
    };
    files.push((FACTOR_JSON, json_bytes(&factor_file)?));

    let mut buf = Vec::new();
    write_terms_csv(&mut buf, &reports).map_err(io_err)?;
    files.push((COMPONENTS_CSV, buf));
    let set = ComponentSet {
        language: cfg.language.clone(),
        loading_threshold: cfg.loading_threshold,
        components: reports,
    };
    files.push((COMPONENTS_JSON, json_bytes(&set)?));

    let mut buf = Vec::new();
    geo.write_csv(&mut buf).map_err(io_err)?;
    files.push((GEO_CSV, buf));

    Ok(RunOutput { report, files })
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| Error::Data(format!("serialising output: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn vocabulary_csv(matrix: &DocTermMatrix) -> String {
    let vocab = matrix.vocabulary();
    let mut s = String::from("term,doc_frequency,retained_doc_frequency\n");
    for ((term, df), rdf) in vocab
        .terms()
        .iter()
        .zip(vocab.doc_frequency())
        .zip(matrix.retained_doc_frequency())
    {
        writeln!(s, "{},{df:.4},{rdf:.4}", csv_field(term)).unwrap();
    }
    s
}

/// Runs the pipeline and writes every artifact into `cfg.out_dir`.
///
/// Files are first written to a staging directory and only moved into place
/// once all of them exist; on failure the staging directory is removed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    let output = execute(cfg)?;
    write_outputs(&cfg.out_dir, &output.files)?;
    Ok(output.report)
}

fn write_outputs(out_dir: &Path, files: &[(&'static str, Vec<u8>)]) -> Result<()> {
    let staging = out_dir.join(STAGING_DIR);
    let attempt = || -> Result<()> {
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        for (name, bytes) in files {
            let path = staging.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        for (name, _) in files {
            let dest = out_dir.join(name);
            fs::rename(staging.join(name), &dest).map_err(|e| Error::io(&dest, e))?;
        }
        fs::remove_dir(&staging).map_err(|e| Error::io(&staging, e))
    };
    let result = attempt();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    /// `None` when `k` exceeds the vocabulary size.
    pub model: Option<FactorMetadata>,
}

/// Fits one model per component count and reports fit and variance share.
pub fn sweep_k(cfg: &PipelineConfig, ks: &[usize]) -> Result<(Prepared, Vec<SweepRow>)> {
    let mut probe = cfg.clone();
    probe.k = 1;
    let prepared = prepare_corpus(&probe)?;
    let corr = correlation_matrix(&prepared.matrix)?;
    let mut rows = Vec::new();
    for &k in ks {
        if k == 0 {
            return Err(Error::Config("sweep values must be at least 1".into()));
        }
        let model = (k <= corr.dim())
            .then(|| fit_model(&corr, k, cfg).map(|m| m.metadata()))
            .transpose()?;
        rows.push(SweepRow { k, model });
    }
    Ok((prepared, rows))
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::from("k,fit,variance_share,iterations,converged\n");
    for row in rows {
        match &row.model {
            Some(m) => writeln!(
                s,
                "{},{:.4},{:.2},{},{}",
                row.k, m.fit, m.variance_share, m.iterations, m.converged
            ),
            None => writeln!(s, "{},,,,skipped (k exceeds vocabulary)", row.k),
        }
        .unwrap();
    }
    s
}

pub fn language_name(code: &str) -> String {
    match code {
        "es" => "Spanish".into(),
        "en" => "English".into(),
        "fr" => "French".into(),
        "de" => "German".into(),
        "pt" => "Portuguese".into(),
        "it" => "Italian".into(),
        other => other.to_string(),
    }
}

fn read_run(dir: &Path) -> Result<ComponentSet> {
    for name in [RUN_REPORT, FACTOR_JSON, COMPONENTS_JSON] {
        if !dir.join(name).is_file() {
            return Err(Error::Data(format!(
                "{} is not a complete run: missing {name}",
                dir.display()
            )));
        }
    }
    let path = dir.join(COMPONENTS_JSON);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Side-by-side table of the components of two completed runs.
pub fn compare(run_a: &Path, run_b: &Path) -> Result<ComparisonTable> {
    let a = read_run(run_a)?;
    let b = read_run(run_b)?;
    comparison_table(
        &language_name(&a.language),
        &a.components,
        &language_name(&b.language),
        &b.components,
    )
}

/// Human-readable clustering of bot scores, with the derived threshold when
/// `k` is five.
pub fn bot_threshold_summary(scores: &[f64], k: usize, dedup: bool) -> Result<String> {
    let clusters = cluster_scores(scores, k, dedup)?;
    let mut s = format!("scores: {}\nk: {k}\nwcss: {:.6}\n", clusters.sorted.len(), clusters.wcss);
    for (i, ((lo, hi), (n, center))) in clusters
        .bounds()
        .iter()
        .zip(clusters.sizes.iter().zip(&clusters.centers))
        .enumerate()
    {
        writeln!(s, "cluster {}: n={n} min={lo:.4} max={hi:.4} mean={center:.4}", i + 1).unwrap();
    }
    if k == BOT_CLUSTERS {
        let t = derive_bot_threshold(&clusters)?;
        writeln!(s, "threshold: {:.4} (scores above are bots)", t.value).unwrap();
    }
    Ok(s)
}

/// Per-user scores taken from an archive, optionally overridden by a sidecar file.
pub fn collect_scores(corpus: &Corpus, sidecar: Option<&BTreeMap<String, f64>>) -> Result<Vec<f64>> {
    let corpus = match sidecar {
        Some(s) => {
            if corpus.is_empty() {
                return Ok(s.values().copied().collect());
            }
            corpus.with_bot_scores(s)?
        }
        None => corpus.clone(),
    };
    Ok(corpus.users().values().filter_map(|u| u.bot_score).collect())
}

/// Lists which expected artifacts exist in a run directory.
pub fn artifact_paths(dir: &Path) -> Vec<PathBuf> {
    [
        RUN_REPORT,
        DTM_CSV,
        DTM_SPARSE,
        VOCABULARY_CSV,
        LOADINGS_CSV,
        FACTOR_JSON,
        COMPONENTS_CSV,
        COMPONENTS_JSON,
        GEO_CSV,
    ]
    .iter()
    .map(|n| dir.join(n))
    .filter(|p| p.is_file())
    .collect()
}
