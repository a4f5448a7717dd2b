//! Pipeline configuration.
//!
//! Config files are plain `key = value` lines; `#` starts a comment. Relative
//! paths are resolved against the directory holding the config file.
//!
//! ```text
//! input = corpus.jsonl
//! lang = es
//! keywords_file = keywords.txt
//! k = 11
//! ```

use std::path::{Path, PathBuf};

use crate::botfilter::BOT_CLUSTERS;
use crate::dtm::{DEFAULT_MIN_TERMS, DEFAULT_TOP_N};
use crate::error::{Error, Result};
use crate::factor::{DEFAULT_K, DEFAULT_LOADING_THRESHOLD, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::geoloc::DEFAULT_GEO_TOP_N;
use crate::ingest::MalformedPolicy;
use crate::themes::DEFAULT_TOP_DOCS;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub language: String,
    /// Inline keywords; merged with `keywords_file`.
    pub keywords: Vec<String>,
    pub keywords_file: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub conversions: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub top_n: usize,
    pub min_terms: usize,
    pub bot_k: usize,
    pub bot_scores: Option<PathBuf>,
    pub bot_dedup: bool,
    /// Size of the most-active-user sample; `None` keeps every user.
    pub active_users: Option<usize>,
    pub k: usize,
    pub loading_threshold: f64,
    pub top_docs: usize,
    pub gazetteer: Option<PathBuf>,
    pub geo_top_n: usize,
    pub out_dir: PathBuf,
    pub on_malformed: MalformedPolicy,
    pub label_prefix: Option<String>,
    pub varimax_tol: f64,
    pub varimax_max_iter: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: PathBuf::new(),
            language: String::new(),
            keywords: Vec::new(),
            keywords_file: None,
            stopwords: None,
            conversions: None,
            lemmas: None,
            top_n: DEFAULT_TOP_N,
            min_terms: DEFAULT_MIN_TERMS,
            bot_k: BOT_CLUSTERS,
            bot_scores: None,
            bot_dedup: false,
            active_users: None,
            k: DEFAULT_K,
            loading_threshold: DEFAULT_LOADING_THRESHOLD,
            top_docs: DEFAULT_TOP_DOCS,
            gazetteer: None,
            geo_top_n: DEFAULT_GEO_TOP_N,
            out_dir: PathBuf::from("out"),
            on_malformed: MalformedPolicy::Skip,
            label_prefix: None,
            varimax_tol: DEFAULT_TOL,
            varimax_max_iter: DEFAULT_MAX_ITER,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
            cfg.set(key.trim(), value.trim(), base)?;
        }
        Ok(cfg)
    }

    /// Sets one option by its config-file key.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || base.join(value);
        let opt_path = || (!value.is_empty()).then(|| base.join(value));
        match key {
            "input" => self.input = path(),
            "lang" | "language" => self.language = value.to_lowercase(),
            "keywords" => {
                self.keywords = value
                    .split(',')
                    .map(str::trim)
                    .filter(|k| !k.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            "keywords_file" => self.keywords_file = opt_path(),
            "stopwords" => self.stopwords = opt_path(),
            "conversions" => self.conversions = opt_path(),
            "lemmas" => self.lemmas = opt_path(),
            "top_n" => self.top_n = parse_num(key, value)?,
            "min_terms" => self.min_terms = parse_num(key, value)?,
            "bot_k" => self.bot_k = parse_num(key, value)?,
            "bot_scores" => self.bot_scores = opt_path(),
            "bot_dedup" => self.bot_dedup = parse_bool(key, value)?,
            "active_users" => {
                self.active_users = match value {
                    "" | "all" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "k" => self.k = parse_num(key, value)?,
            "loading_threshold" => self.loading_threshold = parse_num(key, value)?,
            "top_docs" => self.top_docs = parse_num(key, value)?,
            "gazetteer" => self.gazetteer = opt_path(),
            "geo_top_n" => self.geo_top_n = parse_num(key, value)?,
            "out_dir" => self.out_dir = path(),
            "on_malformed" => self.on_malformed = value.parse()?,
            "label_prefix" => self.label_prefix = (!value.is_empty()).then(|| value.to_string()),
            "varimax_tol" => self.varimax_tol = parse_num(key, value)?,
            "varimax_max_iter" => self.varimax_max_iter = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.input.as_os_str().is_empty() {
            return fail("`input` is required".into());
        }
        if self.language.len() != 2 || !self.language.chars().all(|c| c.is_ascii_lowercase()) {
            return fail(format!("`lang` must be a two-letter code, got `{}`", self.language));
        }
        if self.k == 0 {
            return fail("`k` must be at least 1".into());
        }
        if self.top_n == 0 {
            return fail("`top_n` must be at least 1".into());
        }
        if self.k > self.top_n {
            return fail(format!("`k` ({}) cannot exceed `top_n` ({})", self.k, self.top_n));
        }
        if self.bot_k != BOT_CLUSTERS {
            return fail(format!(
                "`bot_k` must be {BOT_CLUSTERS}: the human/bot split is defined on five clusters"
            ));
        }
        if !(self.loading_threshold >= 0.0) {
            return fail("`loading_threshold` must be non-negative".into());
        }
        if self.top_docs == 0 {
            return fail("`top_docs` must be at least 1".into());
        }
        if self.geo_top_n == 0 {
            return fail("`geo_top_n` must be at least 1".into());
        }
        if self.active_users == Some(0) {
            return fail("`active_users` must be at least 1".into());
        }
        if !(self.varimax_tol > 0.0) || self.varimax_max_iter == 0 {
            return fail("varimax tolerance and iteration limit must be positive".into());
        }
        Ok(())
    }

    pub fn resolved_keywords(&self) -> Result<Vec<String>> {
        let mut keywords = self.keywords.clone();
        if let Some(path) = &self.keywords_file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            keywords.extend(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string),
            );
        }
        Ok(keywords)
    }
}
