//! Offline resolution of free-text profile locations to countries.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::dtm::csv_field;
use crate::error::{Error, Result};
use crate::ingest::Corpus;

pub const NOT_FOUND: &str = "not found";
pub const OTHER: &str = "other";
pub const DEFAULT_GEO_TOP_N: usize = 10;

/// Lowercases, folds diacritics, and collapses whitespace.
pub fn normalize_place(raw: &str) -> String {
    let folded: String = raw.nfd().filter(|c| !is_combining_mark(*c)).collect::<String>().to_lowercase();
    let cleaned: String = folded
        .chars()
        .map(|c| if c.is_alphanumeric() || c == ',' { c } else { ' ' })
        .collect();
    cleaned
        .split(',')
        .map(|seg| seg.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(",")
}

/// Something that maps a raw location string to a country label.
pub trait LocationResolver {
    fn resolve(&self, raw: &str) -> Option<&str>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    entries: BTreeMap<String, String>,
}

impl Gazetteer {
    /// Builds a gazetteer from `(alias, country)` pairs. When an alias repeats,
    /// the first pair wins.
    pub fn from_pairs<I, A, C>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, C)>,
        A: AsRef<str>,
        C: AsRef<str>,
    {
        let mut entries = BTreeMap::new();
        for (alias, country) in pairs {
            let key = normalize_place(alias.as_ref()).replace(',', " ");
            let key = key.split_whitespace().collect::<Vec<_>>().join(" ");
            let country = country.as_ref().trim();
            if !key.is_empty() && !country.is_empty() {
                entries.entry(key).or_insert_with(|| country.to_string());
            }
        }
        Gazetteer { entries }
    }

    /// Reads `alias<TAB>country` lines; `#` starts a comment line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((alias, country)) = line.split_once('\t') else {
                return Err(Error::Record {
                    line: idx + 1,
                    message: format!("{}: expected `alias<TAB>country`", path.display()),
                });
            };
            pairs.push((alias.to_string(), country.to_string()));
        }
        Ok(Gazetteer::from_pairs(pairs))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, normalized: &str) -> Option<&str> {
        self.entries.get(normalized).map(String::as_str)
    }
}

impl LocationResolver for Gazetteer {
    fn resolve(&self, raw: &str) -> Option<&str> {
        resolve_location(raw, self)
    }
}

/// Tries the whole string, then its comma-separated segments from right to left.
pub fn resolve_location<'g>(raw: &str, gazetteer: &'g Gazetteer) -> Option<&'g str> {
    let norm = normalize_place(raw);
    let segments: Vec<&str> = norm.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if segments.is_empty() {
        return None;
    }
    let whole = segments.join(" ");
    gazetteer
        .get(&whole)
        .or_else(|| segments.iter().rev().find_map(|s| gazetteer.get(s)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoRow {
    pub country: String,
    pub pct_tweets: f64,
    pub pct_users: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeoTable {
    /// `not found` first, then countries by tweet share, then `other` if the
    /// country list was truncated.
    pub rows: Vec<GeoRow>,
}

/// Tweet and user shares per resolved country across every user of `corpus`.
pub fn location_table<R: LocationResolver + ?Sized>(corpus: &Corpus, resolver: &R, top_n: usize) -> Result<GeoTable> {
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be at least 1".into()));
    }
    let mut per_country: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let (mut missing_tweets, mut missing_users) = (0usize, 0usize);
    for user in corpus.users().values() {
        match user.location.as_deref().and_then(|l| resolver.resolve(l)) {
            Some(country) => {
                let e = per_country.entry(country).or_default();
                e.0 += user.tweet_count;
                e.1 += 1;
            }
            None => {
                missing_tweets += user.tweet_count;
                missing_users += 1;
            }
        }
    }
    let tweets = corpus.tweet_count().max(1) as f64;
    let users = corpus.user_count().max(1) as f64;
    let pct = |(t, u): (usize, usize)| (100.0 * t as f64 / tweets, 100.0 * u as f64 / users);

    let mut countries: Vec<(&str, (usize, usize))> = per_country.into_iter().collect();
    countries.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(b.1 .1.cmp(&a.1 .1)).then(a.0.cmp(b.0)));

    let mut rows = Vec::new();
    let (nt, nu) = pct((missing_tweets, missing_users));
    rows.push(GeoRow {
        country: NOT_FOUND.into(),
        pct_tweets: nt,
        pct_users: nu,
    });
    for (country, counts) in countries.iter().take(top_n) {
        let (t, u) = pct(*counts);
        rows.push(GeoRow {
            country: country.to_string(),
            pct_tweets: t,
            pct_users: u,
        });
    }
    if countries.len() > top_n {
        let rest = countries[top_n..]
            .iter()
            .fold((0, 0), |acc, (_, c)| (acc.0 + c.0, acc.1 + c.1));
        let (t, u) = pct(rest);
        rows.push(GeoRow {
            country: OTHER.into(),
            pct_tweets: t,
            pct_users: u,
        });
    }
    Ok(GeoTable { rows })
}

/// Rounds percentages to one decimal so that they still add up to exactly
/// 100.0 (largest remainder). Inputs summing to zero are rounded plainly.
pub fn round_to_total(values: &[f64]) -> Vec<f64> {
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return values.iter().map(|v| (v * 10.0).round() / 10.0).collect();
    }
    let scaled: Vec<f64> = values.iter().map(|v| v / total * 1000.0).collect();
    let mut tenths: Vec<i64> = scaled.iter().map(|v| v.floor() as i64).collect();
    let short = 1000 - tenths.iter().sum::<i64>();
    let mut by_remainder: Vec<usize> = (0..values.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let (ra, rb) = (scaled[a] - scaled[a].floor(), scaled[b] - scaled[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().take(short.max(0) as usize) {
        tenths[i] += 1;
    }
    tenths.into_iter().map(|t| t as f64 / 10.0).collect()
}

impl GeoTable {
    /// CSV with columns `country`, `% tweets`, `% users`, one decimal each.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let tweets = round_to_total(&self.rows.iter().map(|r| r.pct_tweets).collect::<Vec<_>>());
        let users = round_to_total(&self.rows.iter().map(|r| r.pct_users).collect::<Vec<_>>());
        writeln!(out, "country,% tweets,% users")?;
        for ((row, t), u) in self.rows.iter().zip(tweets).zip(users) {
            writeln!(out, "{},{t:.1},{u:.1}", csv_field(&row.country))?;
        }
        Ok(())
    }
}
