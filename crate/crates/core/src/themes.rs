//! Component reports: representative terms and documents per component, and
//! side-by-side comparison of two corpora.
//!
//! A document's relatedness to a component is the sum of the positive
//! loadings of the vocabulary terms it contains. Negative loadings count as
//! zero.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use nalgebra::DVectorView;
use serde::{Deserialize, Serialize};

use crate::dtm::{csv_field, DocTermMatrix};
use crate::error::{Error, Result};
use crate::factor::{select_terms, FactorModel};

pub const DEFAULT_TOP_DOCS: usize = 30;
/// Words per component in the terms table.
pub const TABLE_WORDS: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermLoading {
    pub term: String,
    pub loading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScore {
    pub doc_id: String,
    pub score: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub component_id: String,
    pub pe: f64,
    pub terms: Vec<TermLoading>,
    pub negative_terms: Vec<TermLoading>,
    pub top_docs: Vec<DocScore>,
}

/// Everything written to `components.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSet {
    pub language: String,
    pub loading_threshold: f64,
    pub components: Vec<ComponentReport>,
}

pub fn score_documents(matrix: &DocTermMatrix, loadings: DVectorView<'_, f64>) -> Result<Vec<f64>> {
    if loadings.len() != matrix.n_terms() {
        return Err(Error::InvalidArgument(format!(
            "component has {} loadings for {} terms",
            loadings.len(),
            matrix.n_terms()
        )));
    }
    Ok(matrix
        .rows()
        .map(|row| row.iter().map(|&c| loadings[c as usize].max(0.0)).sum())
        .collect())
}

/// Indices of the `top_k` highest-scoring documents, ties by ascending doc id.
/// Zero scores never qualify.
pub fn top_documents(doc_ids: &[String], scores: &[f64], top_k: usize) -> Result<Vec<usize>> {
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be at least 1".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > 0.0).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| doc_ids[a].cmp(&doc_ids[b])));
    idx.truncate(top_k);
    Ok(idx)
}

/// Label prefix for a corpus language: the initial of its English name
/// (`es` -> `S`, `en` -> `E`), or the uppercased code initial otherwise.
pub fn label_prefix(language: &str) -> String {
    let name = match language {
        "es" => "Spanish",
        "en" => "English",
        "fr" => "French",
        "de" => "German",
        "pt" => "Portuguese",
        "it" => "Italian",
        "nl" => "Dutch",
        "ja" => "Japanese",
        other => other,
    };
    name.chars().next().map(|c| c.to_uppercase().collect()).unwrap_or_default()
}

pub struct ReportOptions<'a> {
    pub prefix: &'a str,
    pub threshold: f64,
    pub top_docs: usize,
}

pub fn build_reports(
    model: &FactorModel,
    matrix: &DocTermMatrix,
    texts: &HashMap<&str, &str>,
    options: &ReportOptions<'_>,
) -> Result<Vec<ComponentReport>> {
    let selected = select_terms(&model.loadings, &model.terms, options.threshold)?;
    let pairs = |v: &[(String, f64)]| {
        v.iter()
            .map(|(term, loading)| TermLoading {
                term: term.clone(),
                loading: *loading,
            })
            .collect::<Vec<_>>()
    };
    let mut reports = Vec::with_capacity(model.k);
    for (c, terms) in selected.iter().enumerate() {
        let scores = score_documents(matrix, model.loadings.column(c))?;
        let top = top_documents(matrix.doc_ids(), &scores, options.top_docs)?;
        let top_docs = top
            .into_iter()
            .map(|i| {
                let id = &matrix.doc_ids()[i];
                DocScore {
                    doc_id: id.clone(),
                    score: scores[i],
                    text: texts.get(id.as_str()).copied().unwrap_or_default().to_string(),
                }
            })
            .collect();
        reports.push(ComponentReport {
            component_id: format!("{}{}", options.prefix, c + 1),
            pe: model.pe[c],
            terms: pairs(&terms.positive),
            negative_terms: pairs(&terms.negative),
            top_docs,
        });
    }
    Ok(reports)
}

/// Terms table: `id`, `PE (%)`, then up to seven words per component.
pub fn write_terms_csv<W: Write>(mut out: W, reports: &[ComponentReport]) -> io::Result<()> {
    let mut header = String::from("id,PE (%)");
    for i in 1..=TABLE_WORDS {
        write!(header, ",word{i}").unwrap();
    }
    writeln!(out, "{header}")?;
    for r in reports {
        let mut line = format!("{},{:.1}", csv_field(&r.component_id), r.pe);
        for i in 0..TABLE_WORDS {
            line.push(',');
            if let Some(t) = r.terms.get(i) {
                line.push_str(&csv_field(&t.term));
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonCell {
    pub id: String,
    pub pe: String,
    pub terms: String,
}

impl ComparisonCell {
    fn from_report(r: &ComponentReport) -> Self {
        ComparisonCell {
            id: r.component_id.clone(),
            pe: format!("{:.1}", r.pe),
            terms: r
                .terms
                .iter()
                .take(TABLE_WORDS)
                .map(|t| t.term.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    fn blank() -> Self {
        ComparisonCell {
            id: String::new(),
            pe: String::new(),
            terms: String::new(),
        }
    }
}

/// Components of two corpora paired by rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonTable {
    pub left_title: String,
    pub right_title: String,
    pub rows: Vec<(ComparisonCell, ComparisonCell)>,
}

pub fn comparison_table(
    left_title: &str,
    left: &[ComponentReport],
    right_title: &str,
    right: &[ComponentReport],
) -> Result<ComparisonTable> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidArgument("both report lists must be non-empty".into()));
    }
    fn by_pe(reports: &[ComponentReport]) -> Vec<&ComponentReport> {
        let mut v: Vec<&ComponentReport> = reports.iter().collect();
        v.sort_by(|a, b| b.pe.total_cmp(&a.pe));
        v
    }
    let (l, r) = (by_pe(left), by_pe(right));
    let rows = (0..l.len().max(r.len()))
        .map(|i| {
            (
                l.get(i).map_or_else(ComparisonCell::blank, |c| ComparisonCell::from_report(c)),
                r.get(i).map_or_else(ComparisonCell::blank, |c| ComparisonCell::from_report(c)),
            )
        })
        .collect();
    Ok(ComparisonTable {
        left_title: left_title.to_string(),
        right_title: right_title.to_string(),
        rows,
    })
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let (a, b) = (&self.left_title, &self.right_title);
        let mut s = format!(
            "rank,{},{},{},{},{},{}\n",
            csv_field(&format!("{a} id")),
            csv_field(&format!("{a} PE (%)")),
            csv_field(&format!("{a} terms")),
            csv_field(&format!("{b} id")),
            csv_field(&format!("{b} PE (%)")),
            csv_field(&format!("{b} terms")),
        );
        for (i, (l, r)) in self.rows.iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                i + 1,
                csv_field(&l.id),
                l.pe,
                csv_field(&l.terms),
                csv_field(&r.id),
                r.pe,
                csv_field(&r.terms)
            )
            .unwrap();
        }
        s
    }

    /// Fixed-width plain text rendering.
    pub fn to_text(&self) -> String {
        let cell = |c: &ComparisonCell| {
            if c.id.is_empty() {
                String::new()
            } else {
                format!("{} ({}%) {}", c.id, c.pe, c.terms)
            }
        };
        let lefts: Vec<String> = self.rows.iter().map(|(l, _)| cell(l)).collect();
        let width = lefts
            .iter()
            .map(|s| s.chars().count())
            .chain([self.left_title.chars().count()])
            .max()
            .unwrap_or(0);
        let pad = |s: &str| format!("{s}{}", " ".repeat(width - s.chars().count()));
        let mut out = format!("{} | {}\n", pad(&self.left_title), self.right_title);
        out.push_str(&format!("{}-+-{}\n", "-".repeat(width), "-".repeat(self.right_title.chars().count().max(8))));
        for (left, (_, r)) in lefts.iter().zip(&self.rows) {
            out.push_str(format!("{} | {}", pad(left), cell(r)).trim_end());
            out.push('\n');
        }
        out
    }
}
