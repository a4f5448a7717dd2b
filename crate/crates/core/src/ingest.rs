//! Tweet archive ingestion and population selection.
//!
//! Archives are UTF-8 files with one JSON object per line:
//!
//! ```text
//! {"id":"1","text":"...","lang":"es","author_id":"u1","is_retweet":false,
//!  "created_at":"2018-04-10T12:00:00Z","user_location":"Madrid","bot_score":0.12}
//! ```
//!
//! `user_location` and `bot_score` are optional. A bot score belongs to the
//! author, so every record by the same author must carry the same value (or none).

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    #[serde(rename = "lang")]
    pub language: String,
    pub author_id: String,
    #[serde(default)]
    pub is_retweet: bool,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserProfile {
    pub user_id: String,
    pub tweet_count: usize,
    pub bot_score: Option<f64>,
    /// First non-empty `user_location` seen for this user, in corpus order.
    pub location: Option<String>,
    pub country: Option<String>,
}

impl UserProfile {
    fn new(user_id: &str) -> Self {
        UserProfile {
            user_id: user_id.to_string(),
            tweet_count: 0,
            bot_score: None,
            location: None,
            country: None,
        }
    }
}

/// An immutable, single-language set of tweets plus per-author aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    language: String,
    tweets: Vec<TweetRecord>,
    users: BTreeMap<String, UserProfile>,
}

impl Corpus {
    /// Builds a corpus, deriving user profiles from the tweets. Scores are
    /// attached to users that have at least one tweet.
    pub fn new(
        language: &str,
        tweets: Vec<TweetRecord>,
        bot_scores: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let language = language.to_lowercase();
        let mut seen = HashSet::new();
        for t in &tweets {
            if t.language != language {
                return Err(Error::Data(format!(
                    "tweet {} has language `{}`, corpus is `{}`",
                    t.id, t.language, language
                )));
            }
            if !seen.insert(t.id.as_str()) {
                return Err(Error::Data(format!("duplicate tweet id `{}`", t.id)));
            }
        }
        for (user, score) in bot_scores {
            check_score(user, *score)?;
        }
        let mut corpus = Corpus {
            language,
            tweets,
            users: BTreeMap::new(),
        };
        corpus.users = corpus.derive_users(|id| bot_scores.get(id).copied(), |_| None);
        Ok(corpus)
    }

    pub fn empty(language: &str) -> Self {
        Corpus {
            language: language.to_lowercase(),
            tweets: Vec::new(),
            users: BTreeMap::new(),
        }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn tweets(&self) -> &[TweetRecord] {
        &self.tweets
    }

    pub fn users(&self) -> &BTreeMap<String, UserProfile> {
        &self.users
    }

    pub fn user(&self, user_id: &str) -> Option<&UserProfile> {
        self.users.get(user_id)
    }

    pub fn tweet_count(&self) -> usize {
        self.tweets.len()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    /// Keeps the tweets matching `keep`; users left without tweets disappear and
    /// the remaining counts are recomputed. Scores and countries carry over.
    pub fn retain<F>(&self, mut keep: F) -> Corpus
    where
        F: FnMut(&TweetRecord) -> bool,
    {
        let tweets: Vec<TweetRecord> = self.tweets.iter().filter(|t| keep(t)).cloned().collect();
        let mut out = Corpus {
            language: self.language.clone(),
            tweets,
            users: BTreeMap::new(),
        };
        out.users = out.derive_users(
            |id| self.users.get(id).and_then(|u| u.bot_score),
            |id| self.users.get(id).and_then(|u| u.country.clone()),
        );
        out
    }

    /// Returns a copy with `country` set on every user from `resolve`.
    pub fn with_countries<F>(&self, mut resolve: F) -> Corpus
    where
        F: FnMut(&UserProfile) -> Option<String>,
    {
        let mut out = self.clone();
        for user in out.users.values_mut() {
            user.country = resolve(user);
        }
        out
    }

    /// Returns a copy where scores from `scores` replace those from the archive.
    pub fn with_bot_scores(&self, scores: &BTreeMap<String, f64>) -> Result<Corpus> {
        let mut out = self.clone();
        for (user, score) in scores {
            check_score(user, *score)?;
            if let Some(profile) = out.users.get_mut(user) {
                profile.bot_score = Some(*score);
            }
        }
        Ok(out)
    }

    fn derive_users<S, C>(&self, score: S, country: C) -> BTreeMap<String, UserProfile>
    where
        S: Fn(&str) -> Option<f64>,
        C: Fn(&str) -> Option<String>,
    {
        let mut users: BTreeMap<String, UserProfile> = BTreeMap::new();
        for t in &self.tweets {
            let profile = users.entry(t.author_id.clone()).or_insert_with(|| {
                let mut p = UserProfile::new(&t.author_id);
                p.bot_score = score(&t.author_id);
                p.country = country(&t.author_id);
                p
            });
            profile.tweet_count += 1;
            if profile.location.is_none() {
                profile.location = t
                    .user_location
                    .as_deref()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string);
            }
        }
        users
    }
}

fn check_score(user: &str, score: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Data(format!(
            "bot score {score} for user `{user}` is outside [0, 1]"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MalformedPolicy {
    #[default]
    Skip,
    Abort,
}

impl FromStr for MalformedPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "skip" => Ok(MalformedPolicy::Skip),
            "abort" => Ok(MalformedPolicy::Abort),
            other => Err(Error::Config(format!(
                "on-malformed must be `skip` or `abort`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecord {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ParsedArchive {
    pub corpus: Corpus,
    pub skipped: Vec<SkippedRecord>,
}

#[derive(Deserialize)]
struct RawRecord {
    #[serde(flatten)]
    tweet: TweetRecord,
    #[serde(default)]
    bot_score: Option<f64>,
}

/// Reads the archive at `path` and keeps the records written in `language`.
pub fn parse_archive(path: &Path, language: &str, policy: MalformedPolicy) -> Result<ParsedArchive> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(BufReader::new(file), language, policy).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_reader<R: BufRead>(
    reader: R,
    language: &str,
    policy: MalformedPolicy,
) -> Result<ParsedArchive> {
    let language = language.trim().to_lowercase();
    if language.is_empty() {
        return Err(Error::InvalidArgument("language code is empty".into()));
    }
    let mut tweets = Vec::new();
    let mut ids = HashSet::new();
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    let mut skipped = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, &language, &mut ids, &mut scores) {
            Ok(Some(tweet)) => tweets.push(tweet),
            Ok(None) => {}
            Err(message) => match policy {
                MalformedPolicy::Skip => skipped.push(SkippedRecord {
                    line: line_no,
                    message,
                }),
                MalformedPolicy::Abort => {
                    return Err(Error::Record {
                        line: line_no,
                        message,
                    })
                }
            },
        }
    }

    let corpus = Corpus::new(&language, tweets, &scores)?;
    Ok(ParsedArchive { corpus, skipped })
}

fn parse_line(
    line: &str,
    language: &str,
    ids: &mut HashSet<String>,
    scores: &mut BTreeMap<String, f64>,
) -> std::result::Result<Option<TweetRecord>, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut tweet = raw.tweet;
    tweet.language = tweet.language.trim().to_lowercase();
    if tweet.id.is_empty() {
        return Err("empty id".into());
    }
    if tweet.text.trim().is_empty() {
        return Err(format!("tweet {} has empty text", tweet.id));
    }
    if tweet.author_id.is_empty() {
        return Err(format!("tweet {} has empty author_id", tweet.id));
    }
    if let Some(score) = raw.bot_score {
        if !(0.0..=1.0).contains(&score) {
            return Err(format!("bot_score {score} outside [0, 1]"));
        }
    }
    if tweet.language != language {
        return Ok(None);
    }
    if ids.contains(&tweet.id) {
        return Err(format!("duplicate tweet id `{}`", tweet.id));
    }
    if let Some(score) = raw.bot_score {
        match scores.get(&tweet.author_id) {
            Some(prev) if *prev != score => {
                return Err(format!(
                    "user `{}` has conflicting bot scores {prev} and {score}",
                    tweet.author_id
                ))
            }
            _ => {
                scores.insert(tweet.author_id.clone(), score);
            }
        }
    }
    ids.insert(tweet.id.clone());
    Ok(Some(tweet))
}

/// Reads a two-column `user_id<TAB>score` file. Blank lines and `#` comments are ignored.
pub fn read_bot_scores(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut scores = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(user), Some(score), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Record {
                line: idx + 1,
                message: format!("{}: expected `user_id<TAB>score`", path.display()),
            });
        };
        let score: f64 = score.trim().parse().map_err(|_| Error::Record {
            line: idx + 1,
            message: format!("{}: bad score `{score}`", path.display()),
        })?;
        check_score(user, score)?;
        scores.insert(user.trim().to_string(), score);
    }
    Ok(scores)
}

/// Keeps tweets whose text contains at least one keyword, ignoring case.
pub fn filter_keywords(corpus: &Corpus, keywords: &[String]) -> Result<Corpus> {
    let patterns: Vec<String> = keywords
        .iter()
        .map(|k| k.trim().to_lowercase())
        .filter(|k| !k.is_empty())
        .collect();
    if patterns.is_empty() {
        return Err(Error::InvalidArgument("keyword list is empty".into()));
    }
    Ok(corpus.retain(|t| {
        let text = t.text.to_lowercase();
        patterns.iter().any(|p| text.contains(p.as_str()))
    }))
}

pub fn drop_retweets(corpus: &Corpus) -> Corpus {
    corpus.retain(|t| !t.is_retweet)
}

/// Users by tweet count descending, ties by ascending user id, truncated to `top_k`.
pub fn rank_users_by_activity(corpus: &Corpus, top_k: usize) -> Result<Vec<UserProfile>> {
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be at least 1".into()));
    }
    let mut users: Vec<&UserProfile> = corpus.users.values().collect();
    users.sort_by(|a, b| {
        b.tweet_count
            .cmp(&a.tweet_count)
            .then_with(|| a.user_id.cmp(&b.user_id))
    });
    Ok(users.into_iter().take(top_k).cloned().collect())
}

/// Keeps only tweets written by the given users.
pub fn restrict_to_users(corpus: &Corpus, users: &[UserProfile]) -> Corpus {
    let keep: HashSet<&str> = users.iter().map(|u| u.user_id.as_str()).collect();
    corpus.retain(|t| keep.contains(t.author_id.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, lang: &str, author: &str, rt: bool, text: &str) -> String {
        format!(
            r#"{{"id":"{id}","text":"{text}","lang":"{lang}","author_id":"{author}","is_retweet":{rt},"created_at":"2018-04-10T12:00:00Z"}}"#
        )
    }

    fn corpus_from(lines: &[String]) -> Corpus {
        let input = lines.join("\n");
        parse_reader(input.as_bytes(), "es", MalformedPolicy::Abort)
            .unwrap()
            .corpus
    }

    fn assert_counts_consistent(c: &Corpus) {
        let total: usize = c.users().values().map(|u| u.tweet_count).sum();
        assert_eq!(total, c.tweet_count());
    }

    #[test]
    fn filters_by_language() {
        let input = [
            line("1", "es", "a", false, "hola"),
            line("2", "en", "b", false, "hello"),
            line("3", "ES", "c", false, "datos"),
        ]
        .join("\n");
        let parsed = parse_reader(input.as_bytes(), "es", MalformedPolicy::Skip).unwrap();
        assert_eq!(parsed.corpus.tweet_count(), 2);
        assert_eq!(parsed.corpus.user_count(), 2);
        assert!(parsed.skipped.is_empty());
        assert_counts_consistent(&parsed.corpus);
    }

    #[test]
    fn empty_input() {
        let parsed = parse_reader("".as_bytes(), "es", MalformedPolicy::Skip).unwrap();
        assert_eq!(parsed.corpus.tweet_count(), 0);
        assert_eq!(parsed.corpus.user_count(), 0);
    }

    #[test]
    fn malformed_line_skip_and_abort() {
        let input = [
            line("1", "es", "a", false, "hola"),
            "{not json".to_string(),
            line("3", "es", "c", false, "datos"),
        ]
        .join("\n");
        let parsed = parse_reader(input.as_bytes(), "es", MalformedPolicy::Skip).unwrap();
        assert_eq!(parsed.corpus.tweet_count(), 2);
        assert_eq!(parsed.skipped.len(), 1);
        assert_eq!(parsed.skipped[0].line, 2);

        let err = parse_reader(input.as_bytes(), "es", MalformedPolicy::Abort).unwrap_err();
        assert!(matches!(err, Error::Record { line: 2, .. }));
    }

    #[test]
    fn duplicate_ids_and_empty_text_are_malformed() {
        let input = [
            line("1", "es", "a", false, "hola"),
            line("1", "es", "b", false, "otra"),
            line("2", "es", "b", false, "  "),
        ]
        .join("\n");
        let parsed = parse_reader(input.as_bytes(), "es", MalformedPolicy::Skip).unwrap();
        assert_eq!(parsed.corpus.tweet_count(), 1);
        assert_eq!(parsed.skipped.len(), 2);
    }

    #[test]
    fn bot_scores_attach_to_users() {
        let input = r#"{"id":"1","text":"x","lang":"es","author_id":"a","created_at":"2018-04-10T12:00:00Z","bot_score":0.3}
{"id":"2","text":"y","lang":"es","author_id":"a","created_at":"2018-04-10T12:00:00Z"}
{"id":"3","text":"z","lang":"es","author_id":"b","created_at":"2018-04-10T12:00:00Z","bot_score":0.9,"user_location":"Chile"}
{"id":"4","text":"w","lang":"es","author_id":"b","created_at":"2018-04-10T12:00:00Z","bot_score":0.8}"#;
        let parsed = parse_reader(input.as_bytes(), "es", MalformedPolicy::Skip).unwrap();
        let c = parsed.corpus;
        assert_eq!(c.user("a").unwrap().bot_score, Some(0.3));
        assert_eq!(c.user("a").unwrap().tweet_count, 2);
        assert_eq!(c.user("b").unwrap().bot_score, Some(0.9));
        assert_eq!(c.user("b").unwrap().location.as_deref(), Some("Chile"));
        // conflicting score on line 4
        assert_eq!(parsed.skipped.len(), 1);
        assert_eq!(parsed.skipped[0].line, 4);
    }

    #[test]
    fn keyword_filter() {
        let c = corpus_from(&[
            line("1", "es", "a", false, "Zuckerberg testifies"),
            line("2", "es", "b", false, "weather"),
        ]);
        let out = filter_keywords(&c, &["zuckerberg".into()]).unwrap();
        assert_eq!(out.tweet_count(), 1);
        assert_eq!(out.user_count(), 1);
        assert_counts_consistent(&out);

        let c = corpus_from(&[line("1", "es", "a", false, "el escándalo #cambridgeanalytica")]);
        let out = filter_keywords(&c, &["#CambridgeAnalytica".into()]).unwrap();
        assert_eq!(out.tweet_count(), 1);

        let out = filter_keywords(&c, &["escándalo".into(), "nada".into()]).unwrap();
        assert_eq!(out, c);

        assert!(matches!(
            filter_keywords(&c, &[]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn retweet_removal() {
        let c = corpus_from(&[
            line("1", "es", "a", false, "uno"),
            line("2", "es", "a", true, "dos"),
            line("3", "es", "b", false, "tres"),
        ]);
        let out = drop_retweets(&c);
        assert_eq!(out.tweet_count(), 2);
        assert!(out.tweets().iter().all(|t| !t.is_retweet));
        assert_eq!(drop_retweets(&out), out);

        let all_rt = corpus_from(&[line("1", "es", "a", true, "uno")]);
        let out = drop_retweets(&all_rt);
        assert!(out.is_empty());
        assert_eq!(out.user_count(), 0);
    }

    #[test]
    fn activity_ranking() {
        let mut lines = Vec::new();
        let mut n = 0;
        for (user, count) in [("a", 5), ("b", 9), ("c", 5)] {
            for _ in 0..count {
                n += 1;
                lines.push(line(&n.to_string(), "es", user, false, "texto"));
            }
        }
        let c = corpus_from(&lines);
        let ids = |v: Vec<UserProfile>| v.into_iter().map(|u| u.user_id).collect::<Vec<_>>();
        assert_eq!(ids(rank_users_by_activity(&c, 2).unwrap()), ["b", "a"]);
        assert_eq!(ids(rank_users_by_activity(&c, 10).unwrap()), ["b", "a", "c"]);
        assert!(rank_users_by_activity(&c, 0).is_err());

        let single = corpus_from(&[line("1", "es", "z", false, "x")]);
        assert_eq!(ids(rank_users_by_activity(&single, 3).unwrap()), ["z"]);

        let top = rank_users_by_activity(&c, 2).unwrap();
        let restricted = restrict_to_users(&c, &top);
        assert_eq!(restricted.tweet_count(), 14);
        assert_counts_consistent(&restricted);
    }

    #[test]
    fn policy_parse() {
        assert_eq!("skip".parse::<MalformedPolicy>().unwrap(), MalformedPolicy::Skip);
        assert_eq!("ABORT".parse::<MalformedPolicy>().unwrap(), MalformedPolicy::Abort);
        assert!("maybe".parse::<MalformedPolicy>().is_err());
    }
}
