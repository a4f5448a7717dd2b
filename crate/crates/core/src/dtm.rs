//! Top-N unigram vocabulary and the sparse binary document-term matrix.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::textprep::TokenizedDoc;

pub const DEFAULT_TOP_N: usize = 300;
pub const DEFAULT_MIN_TERMS: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    /// Number of documents containing each term.
    doc_counts: Vec<usize>,
    /// Documents the counts were taken over.
    total_docs: usize,
}

impl Vocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn doc_counts(&self) -> &[usize] {
        &self.doc_counts
    }

    pub fn total_docs(&self) -> usize {
        self.total_docs
    }

    /// Percentage of documents containing each term.
    pub fn doc_frequency(&self) -> Vec<f64> {
        self.doc_counts
            .iter()
            .map(|&c| 100.0 * c as f64 / self.total_docs as f64)
            .collect()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

/// Keeps the `top_n` terms with the highest document frequency; ties go to the
/// lexicographically smaller term.
pub fn build_vocab(docs: &[TokenizedDoc], top_n: usize) -> Result<Vocabulary> {
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *counts.entry(term).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::Data("every document is empty; nothing to model".into()));
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top_n);
    Ok(Vocabulary {
        terms: ranked.iter().map(|(t, _)| t.to_string()).collect(),
        doc_counts: ranked.iter().map(|(_, c)| *c).collect(),
        total_docs: docs.len(),
    })
}

/// Binary presence matrix stored row-wise: for each document, the sorted
/// column indices of the vocabulary terms it contains.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    doc_ids: Vec<String>,
    vocabulary: Vocabulary,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    dropped: usize,
}

impl DocTermMatrix {
    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn terms(&self) -> &[String] {
        self.vocabulary.terms()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocabulary.len()
    }

    /// Documents removed for having fewer than `min_terms` vocabulary terms.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Column indices present in document `row`, ascending.
    pub fn row(&self, row: usize) -> &[u32] {
        &self.cols[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.n_docs()).map(move |r| self.row(r))
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.row(row).binary_search(&(col as u32)).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Number of retained documents containing each term.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_terms()];
        for &c in &self.cols {
            counts[c as usize] += 1;
        }
        counts
    }

    /// Document frequency recomputed on the retained documents.
    pub fn retained_doc_frequency(&self) -> Vec<f64> {
        let n = self.n_docs() as f64;
        self.column_counts()
            .into_iter()
            .map(|c| 100.0 * c as f64 / n)
            .collect()
    }

    /// CSV with a `doc_id` column followed by one 0/1 column per term.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = String::from("doc_id");
        for term in self.terms() {
            header.push(',');
            header.push_str(&csv_field(term));
        }
        header.push('\n');
        out.write_all(header.as_bytes())?;
        let mut line = String::new();
        for (r, id) in self.doc_ids.iter().enumerate() {
            line.clear();
            line.push_str(&csv_field(id));
            let mut present = self.row(r).iter().peekable();
            for c in 0..self.n_terms() as u32 {
                if present.next_if_eq(&&c).is_some() {
                    line.push_str(",1");
                } else {
                    line.push_str(",0");
                }
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Compact sidecar: `DTMB`, then little-endian u32 doc and term counts,
    /// then per document a u32 length followed by its u32 column indices.
    pub fn write_sparse<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(SPARSE_MAGIC)?;
        out.write_all(&(self.n_docs() as u32).to_le_bytes())?;
        out.write_all(&(self.n_terms() as u32).to_le_bytes())?;
        for row in self.rows() {
            out.write_all(&(row.len() as u32).to_le_bytes())?;
            for c in row {
                out.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

const SPARSE_MAGIC: &[u8; 4] = b"DTMB";

/// Rows read back from the sparse sidecar: `(n_terms, rows)`.
pub fn read_sparse<R: Read>(mut input: R) -> Result<(usize, Vec<Vec<u32>>)> {
    let bad = |m: &str| Error::Data(format!("sparse matrix: {m}"));
    let mut word = [0u8; 4];
    let mut next = |input: &mut R| -> Result<u32> {
        input
            .read_exact(&mut word)
            .map_err(|_| bad("truncated input"))?;
        Ok(u32::from_le_bytes(word))
    };
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| bad("truncated header"))?;
    if &magic != SPARSE_MAGIC {
        return Err(bad("bad magic"));
    }
    let n_docs = next(&mut input)? as usize;
    let n_terms = next(&mut input)?;
    let mut rows = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let len = next(&mut input)? as usize;
        let mut row = Vec::with_capacity(len);
        for _ in 0..len {
            let c = next(&mut input)?;
            if c >= n_terms {
                return Err(bad("column index out of range"));
            }
            row.push(c);
        }
        rows.push(row);
    }
    Ok((n_terms as usize, rows))
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Binary presence matrix over `vocab`. Documents with fewer than `min_terms`
/// vocabulary terms are dropped.
pub fn build_matrix(docs: &[TokenizedDoc], vocab: &Vocabulary, min_terms: usize) -> Result<DocTermMatrix> {
    if vocab.is_empty() {
        return Err(Error::InvalidArgument("vocabulary is empty".into()));
    }
    let index: BTreeMap<&str, u32> = vocab
        .terms()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i as u32))
        .collect();

    let mut doc_ids = Vec::new();
    let mut row_ptr = vec![0usize];
    let mut cols = Vec::new();
    let mut dropped = 0;
    let mut row: Vec<u32> = Vec::new();
    for doc in docs {
        row.clear();
        row.extend(doc.tokens.iter().filter_map(|t| index.get(t.as_str()).copied()));
        row.sort_unstable();
        row.dedup();
        if row.len() < min_terms {
            dropped += 1;
            continue;
        }
        doc_ids.push(doc.doc_id.clone());
        cols.extend_from_slice(&row);
        row_ptr.push(cols.len());
    }
    if doc_ids.is_empty() {
        return Err(Error::Data(format!(
            "no document has at least {min_terms} vocabulary terms"
        )));
    }
    Ok(DocTermMatrix {
        doc_ids,
        vocabulary: vocab.clone(),
        row_ptr,
        cols,
        dropped,
    })
}
