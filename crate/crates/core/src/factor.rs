//! Principal-component factor analysis of a binary document-term matrix.
//!
//! The phi-coefficient correlation matrix of the term columns is decomposed
//! with a cyclic Jacobi eigensolver, the leading `k` components are scaled into
//! loadings, and the loadings are varimax-rotated with Kaiser row
//! normalisation. Components are finally re-ordered by their share of the
//! explained variance.

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dtm::{csv_field, DocTermMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 11;
pub const DEFAULT_LOADING_THRESHOLD: f64 = 0.1;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;
/// Component counts tried by the k sweep.
pub const K_SWEEP: [usize; 5] = [5, 8, 11, 30, 100];

const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    terms: Vec<String>,
    values: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Wraps an existing correlation matrix after checking symmetry, the unit
    /// diagonal and the `[-1, 1]` range.
    pub fn from_values(terms: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n || terms.len() != n {
            return Err(Error::InvalidArgument(format!(
                "correlation matrix is {}x{} with {} terms",
                n,
                values.ncols(),
                terms.len()
            )));
        }
        for i in 0..n {
            if (values[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v.abs() > 1.0 + 1e-12 || v != values[(j, i)] {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) = {v} breaks symmetry or range"
                    )));
                }
            }
        }
        Ok(CorrelationMatrix { terms, values })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }
}

/// Pearson correlation between the 0/1 term columns (phi coefficients).
pub fn correlation_matrix(matrix: &DocTermMatrix) -> Result<CorrelationMatrix> {
    let n = matrix.n_docs();
    let p = matrix.n_terms();
    let counts = matrix.column_counts();
    if let Some(j) = counts.iter().position(|&c| c == 0 || c == n) {
        return Err(Error::ConstantColumn {
            term: matrix.terms()[j].clone(),
        });
    }
    let mut co = vec![0u64; p * p];
    for row in matrix.rows() {
        for (a, &i) in row.iter().enumerate() {
            for &j in &row[a + 1..] {
                co[i as usize * p + j as usize] += 1;
            }
        }
    }
    let nf = n as f64;
    let spread: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 * (nf - c as f64)).sqrt())
        .collect();
    let mut values = DMatrix::identity(p, p);
    for i in 0..p {
        for j in i + 1..p {
            let num = nf * co[i * p + j] as f64 - counts[i] as f64 * counts[j] as f64;
            let r = (num / (spread[i] * spread[j])).clamp(-1.0, 1.0);
            values[(i, j)] = r;
            values[(j, i)] = r;
        }
    }
    Ok(CorrelationMatrix {
        terms: matrix.terms().to_vec(),
        values,
    })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as columns.
pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut converged = n <= 1;

    for sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for q in 1..n {
            for p in 0..q {
                off += a[(p, q)].abs();
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        let threshold = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let g = 100.0 * apq.abs();
                let (app, aqq) = (a[(p, p)], a[(q, q)]);
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                if apq.abs() <= threshold || apq == 0.0 {
                    continue;
                }
                let h = aqq - app;
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let shift = t * apq;
                a[(p, p)] = app - shift;
                a[(q, q)] = aqq + shift;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        let new_rp = arp - s * (arq + arp * tau);
                        let new_rq = arq + s * (arp - arq * tau);
                        a[(r, p)] = new_rp;
                        a[(p, r)] = new_rp;
                        a[(r, q)] = new_rq;
                        a[(q, r)] = new_rq;
                    }
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp - s * (vrq + vrp * tau);
                    v[(r, q)] = vrq + s * (vrp - vrq * tau);
                }
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "Jacobi eigensolver exceeded {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Flips each column so that its largest-magnitude entry is positive.
fn orient_columns(m: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.ncols());
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        let sign = if best < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            col.neg_mut();
        }
        signs.push(sign);
    }
    signs
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// `dim x k`: eigenvector `j` scaled by the square root of eigenvalue `j`.
    pub loadings: DMatrix<f64>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// The full spectrum, descending.
    pub all_eigenvalues: Vec<f64>,
}

pub fn extract_components(corr: &CorrelationMatrix, k: usize) -> Result<Extraction> {
    let dim = corr.dim();
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={dim}"
        )));
    }
    let (values, vectors) = symmetric_eigen(corr.values())?;
    let mut loadings = DMatrix::from_fn(dim, k, |r, c| vectors[(r, c)] * values[c].max(0.0).sqrt());
    orient_columns(&mut loadings);
    Ok(Extraction {
        loadings,
        eigenvalues: values[..k].to_vec(),
        all_eigenvalues: values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarimaxOutcome {
    pub loadings: DMatrix<f64>,
    /// Orthogonal `k x k` matrix with `rotated = unrotated * rotation`.
    pub rotation: DMatrix<f64>,
    /// Completed sweeps over all component pairs.
    pub iterations: usize,
    pub converged: bool,
    /// Criterion on the row-normalised loadings: the starting value followed by
    /// the value after every sweep.
    pub criterion: Vec<f64>,
}

/// Varimax criterion: the sum over columns of the variance of squared entries.
pub fn varimax_criterion(loadings: &DMatrix<f64>) -> f64 {
    let p = loadings.nrows() as f64;
    loadings
        .column_iter()
        .map(|col| {
            let (mut s2, mut s4) = (0.0, 0.0);
            for &x in col.iter() {
                let sq = x * x;
                s2 += sq;
                s4 += sq * sq;
            }
            s4 / p - (s2 / p) * (s2 / p)
        })
        .sum()
}

/// Orthogonal varimax rotation with Kaiser normalisation, by successive
/// optimal planar rotations of every component pair.
pub fn varimax(loadings: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<VarimaxOutcome> {
    let (p, k) = loadings.shape();
    if k == 0 {
        return Err(Error::InvalidArgument("varimax needs at least one component".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    if loadings.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("loadings contain non-finite values".into()));
    }

    let norms: Vec<f64> = loadings.row_iter().map(|r| r.norm()).collect();
    let mut a = loadings.clone();
    for (i, &h) in norms.iter().enumerate() {
        if h > 0.0 {
            a.row_mut(i).unscale_mut(h);
        }
    }
    let mut rotation = DMatrix::<f64>::identity(k, k);
    let mut criterion = vec![varimax_criterion(&a)];
    let mut iterations = 0;
    let mut converged = k == 1;

    let pf = p as f64;
    while !converged && iterations < max_iter {
        for i in 0..k - 1 {
            for j in i + 1..k {
                let (mut sa, mut sb, mut sc, mut sd) = (0.0, 0.0, 0.0, 0.0);
                for r in 0..p {
                    let (x, y) = (a[(r, i)], a[(r, j)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    sa += u;
                    sb += v;
                    sc += u * u - v * v;
                    sd += 2.0 * u * v;
                }
                let num = sd - 2.0 * sa * sb / pf;
                let den = sc - (sa * sa - sb * sb) / pf;
                if num == 0.0 && den >= 0.0 {
                    continue;
                }
                let phi = 0.25 * num.atan2(den);
                let (s, c) = phi.sin_cos();
                rotate_columns(&mut a, i, j, c, s);
                rotate_columns(&mut rotation, i, j, c, s);
            }
        }
        iterations += 1;
        let current = varimax_criterion(&a);
        let gain = current - criterion[criterion.len() - 1];
        criterion.push(current);
        if gain < tol {
            converged = true;
        }
    }

    for (i, &h) in norms.iter().enumerate() {
        if h > 0.0 {
            a.row_mut(i).scale_mut(h);
        }
    }
    Ok(VarimaxOutcome {
        loadings: a,
        rotation,
        iterations,
        converged,
        criterion,
    })
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = x * c + y * s;
        m[(r, j)] = y * c - x * s;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explained {
    /// Percentages in descending order.
    pub pe: Vec<f64>,
    /// `order[i]` is the input column that ranks `i`-th.
    pub order: Vec<usize>,
}

/// Each component's share of the variance explained by all retained components.
pub fn proportion_explained(loadings: &DMatrix<f64>) -> Result<Explained> {
    let ss: Vec<f64> = loadings.column_iter().map(|c| c.norm_squared()).collect();
    let total: f64 = ss.iter().sum();
    if ss.is_empty() || total <= 0.0 {
        return Err(Error::InvalidArgument("loadings are all zero".into()));
    }
    let mut order: Vec<usize> = (0..ss.len()).collect();
    order.sort_by(|&a, &b| ss[b].total_cmp(&ss[a]).then(a.cmp(&b)));
    Ok(Explained {
        pe: order.iter().map(|&j| 100.0 * ss[j] / total).collect(),
        order,
    })
}

/// Percentage of the total variance (`dim` for a correlation matrix) carried
/// by the retained eigenvalues.
pub fn total_variance_share(eigenvalues: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || eigenvalues.len() > dim {
        return Err(Error::InvalidArgument(format!(
            "{} eigenvalues for dimension {dim}",
            eigenvalues.len()
        )));
    }
    Ok(100.0 * eigenvalues.iter().sum::<f64>() / dim as f64)
}

/// Off-diagonal fit, unclamped: `1 - sum(residual^2) / sum(corr^2)` over
/// `i != j`, with `residual = corr - L * L^T`.
pub fn fit_statistic_raw(corr: &CorrelationMatrix, loadings: &DMatrix<f64>) -> Result<f64> {
    let dim = corr.dim();
    if loadings.nrows() != dim {
        return Err(Error::InvalidArgument(format!(
            "loadings have {} rows for {dim} terms",
            loadings.nrows()
        )));
    }
    let reproduced = loadings * loadings.transpose();
    let (mut resid, mut mass) = (0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                let r = corr.values()[(i, j)];
                let d = r - reproduced[(i, j)];
                resid += d * d;
                mass += r * r;
            }
        }
    }
    if mass == 0.0 {
        return Err(Error::InvalidArgument(
            "correlation matrix has no off-diagonal mass".into(),
        ));
    }
    Ok(1.0 - resid / mass)
}

/// [`fit_statistic_raw`] clamped to `[0, 1]`.
pub fn fit_statistic(corr: &CorrelationMatrix, loadings: &DMatrix<f64>) -> Result<f64> {
    Ok(fit_statistic_raw(corr, loadings)?.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub terms: Vec<String>,
    /// `terms x k`, rotated, columns ordered by `pe` descending.
    pub loadings: DMatrix<f64>,
    pub rotation: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub pe: Vec<f64>,
    pub fit: f64,
    pub fit_raw: f64,
    pub variance_share: f64,
    pub k: usize,
    pub iterations: usize,
    pub converged: bool,
    pub criterion: Vec<f64>,
}

impl FactorModel {
    pub fn fit(corr: &CorrelationMatrix, k: usize, options: FactorOptions) -> Result<FactorModel> {
        let extraction = extract_components(corr, k)?;
        let rotated = varimax(&extraction.loadings, options.tol, options.max_iter)?;

        let mut loadings = rotated.loadings;
        let signs = orient_columns(&mut loadings);
        let explained = proportion_explained(&loadings)?;
        let order = &explained.order;
        let loadings = DMatrix::from_fn(loadings.nrows(), k, |r, c| loadings[(r, order[c])]);
        let rotation = DMatrix::from_fn(k, k, |r, c| rotated.rotation[(r, order[c])] * signs[order[c]]);

        let fit_raw = fit_statistic_raw(corr, &loadings)?;
        Ok(FactorModel {
            terms: corr.terms().to_vec(),
            variance_share: total_variance_share(&extraction.eigenvalues, corr.dim())?,
            eigenvalues: extraction.eigenvalues,
            pe: explained.pe,
            fit: fit_raw.clamp(0.0, 1.0),
            fit_raw,
            k,
            iterations: rotated.iterations,
            converged: rotated.converged,
            criterion: rotated.criterion,
            loadings,
            rotation,
        })
    }

    pub fn metadata(&self) -> FactorMetadata {
        FactorMetadata {
            k: self.k,
            terms: self.terms.len(),
            eigenvalues: self.eigenvalues.clone(),
            pe: self.pe.clone(),
            fit: self.fit,
            fit_raw: self.fit_raw,
            variance_share: self.variance_share,
            iterations: self.iterations,
            converged: self.converged,
        }
    }

    /// CSV: `term` followed by one column per component label.
    pub fn write_loadings_csv<W: Write>(&self, mut out: W, labels: &[String]) -> io::Result<()> {
        let mut line = String::from("term");
        for label in labels {
            line.push(',');
            line.push_str(&csv_field(label));
        }
        writeln!(out, "{line}")?;
        for (r, term) in self.terms.iter().enumerate() {
            line.clear();
            line.push_str(&csv_field(term));
            for c in 0..self.k {
                line.push_str(&format!(",{:.6}", self.loadings[(r, c)]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FactorMetadata {
    pub k: usize,
    pub terms: usize,
    pub eigenvalues: Vec<f64>,
    pub pe: Vec<f64>,
    pub fit: f64,
    pub fit_raw: f64,
    pub variance_share: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTerms {
    /// Terms loading above the threshold, strongest first.
    pub positive: Vec<(String, f64)>,
    /// Terms loading below minus the threshold, most negative first.
    pub negative: Vec<(String, f64)>,
}

impl ComponentTerms {
    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }
}

pub fn select_terms(loadings: &DMatrix<f64>, terms: &[String], threshold: f64) -> Result<Vec<ComponentTerms>> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "loading threshold {threshold} must be non-negative"
        )));
    }
    if terms.len() != loadings.nrows() {
        return Err(Error::InvalidArgument(format!(
            "{} terms for {} loading rows",
            terms.len(),
            loadings.nrows()
        )));
    }
    let by_loading = |a: &(String, f64), b: &(String, f64)| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0));
    Ok(loadings
        .column_iter()
        .map(|col| {
            let mut positive: Vec<(String, f64)> = Vec::new();
            let mut negative: Vec<(String, f64)> = Vec::new();
            for (term, &x) in terms.iter().zip(col.iter()) {
                if x > threshold {
                    positive.push((term.clone(), x));
                } else if x < -threshold {
                    negative.push((term.clone(), x));
                }
            }
            positive.sort_by(by_loading);
            negative.sort_by(|a, b| by_loading(b, a));
            ComponentTerms { positive, negative }
        })
        .collect())
}
