use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tweetmem::config::PipelineConfig;
use tweetmem::factor::K_SWEEP;
use tweetmem::ingest::{parse_archive, read_bot_scores, MalformedPolicy};
use tweetmem::pipeline::{bot_threshold_summary, collect_scores, compare, run_pipeline, sweep_k, sweep_table};
use tweetmem::{Error, Result};

#[derive(Parser)]
#[command(name = "tweetmem", version, about = "Meaning-extraction topic analysis for tweet archives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write every artifact to the output directory.
    Run(RunArgs),
    /// Lay the components of two completed runs side by side.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Also write comparison.csv and comparison.txt into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one model per component count and report fit and variance share.
    SweepK {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated component counts.
        #[arg(long, value_delimiter = ',', default_values_t = K_SWEEP)]
        k_sweep: Vec<usize>,
    },
    /// Cluster bot scores and print the derived human/bot threshold.
    BotThreshold {
        /// Archive whose records carry `bot_score`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
        /// Two-column `user_id<TAB>score` file; overrides archive scores.
        #[arg(long)]
        bot_scores: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        bot_k: usize,
        /// Cluster distinct score values only.
        #[arg(long)]
        dedup: bool,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    lang: Option<String>,
    #[arg(long)]
    keywords_file: Option<PathBuf>,
    #[arg(long, value_parser = ["skip", "abort"])]
    on_malformed: Option<String>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    conversions: Option<PathBuf>,
    #[arg(long)]
    lemmas: Option<PathBuf>,
    #[arg(long)]
    bot_scores: Option<PathBuf>,
    #[arg(long)]
    bot_k: Option<usize>,
    #[arg(long)]
    active_users: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    min_terms: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    loading_threshold: Option<f64>,
    #[arg(long)]
    top_docs: Option<usize>,
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "TWEETMEM_OUT_DIR")]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let here = Path::new("");
        macro_rules! set_path {
            ($($field:ident),*) => {$(
                if let Some(p) = self.$field { cfg.$field = Some(p); }
            )*};
        }
        macro_rules! set_value {
            ($($field:ident => $target:ident),*) => {$(
                if let Some(v) = self.$field { cfg.$target = v; }
            )*};
        }
        set_path!(keywords_file, stopwords, conversions, lemmas, bot_scores, gazetteer);
        set_value!(input => input, top_n => top_n, min_terms => min_terms, k => k,
            loading_threshold => loading_threshold, top_docs => top_docs, bot_k => bot_k, out => out_dir);
        if let Some(lang) = self.lang {
            cfg.set("lang", &lang, here)?;
        }
        if let Some(policy) = self.on_malformed {
            cfg.on_malformed = policy.parse::<MalformedPolicy>()?;
        }
        if self.active_users.is_some() {
            cfg.active_users = self.active_users;
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let report = run_pipeline(&cfg)?;
            print!("{}", report.to_text());
            eprintln!("outputs written to {}", cfg.out_dir.display());
        }
        Command::Compare { run_a, run_b, out } => {
            let table = compare(&run_a, &run_b)?;
            print!("{}", table.to_text());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
                for (name, body) in [("comparison.csv", table.to_csv()), ("comparison.txt", table.to_text())] {
                    let path = dir.join(name);
                    std::fs::write(&path, body).map_err(|e| io_error(&path, e))?;
                }
            }
        }
        Command::SweepK { run, k_sweep } => {
            let cfg = run.into_config()?;
            let (_, rows) = sweep_k(&cfg, &k_sweep)?;
            print!("{}", sweep_table(&rows));
        }
        Command::BotThreshold {
            input,
            lang,
            bot_scores,
            bot_k,
            dedup,
        } => {
            let sidecar = bot_scores.as_deref().map(read_bot_scores).transpose()?;
            let corpus = match (&input, &lang) {
                (Some(path), Some(lang)) => parse_archive(path, lang, MalformedPolicy::Skip)?.corpus,
                (Some(_), None) => return Err(Error::Config("--input needs --lang".into())),
                (None, _) if sidecar.is_some() => tweetmem::ingest::Corpus::empty("xx"),
                (None, _) => return Err(Error::Config("give --input/--lang or --bot-scores".into())),
            };
            let scores = collect_scores(&corpus, sidecar.as_ref())?;
            print!("{}", bot_threshold_summary(&scores, bot_k, dedup)?);
        }
    }
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
