//! Pairwise kernels and Gram matrices.
//!
//! The entropic kernel sums, over refinement levels, the exponential of the
//! negative Euclidean distance between two graphs' entropy-share vectors;
//! the count-based baseline sums dot products of code histograms. Distances
//! and dot products run over support unions, so codes present in neither
//! graph never contribute.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{CountFeature, EntropicFeature};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Qesk,
    Wlsk,
    WlskNormalized,
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelKind::Qesk => "qesk",
            KernelKind::Wlsk => "wlsk",
            KernelKind::WlskNormalized => "wlsk-normalized",
        })
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qesk" => Ok(KernelKind::Qesk),
            "wlsk" => Ok(KernelKind::Wlsk),
            "wlsk-normalized" => Ok(KernelKind::WlskNormalized),
            other => Err(Error::Config(format!("unknown kernel kind {other:?}"))),
        }
    }
}

/// Symmetric matrix of pairwise kernel values over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    kind: KernelKind,
    i_max: usize,
    values: DMatrix<f64>,
}

impl GramMatrix {
    pub fn new(kind: KernelKind, i_max: usize, values: DMatrix<f64>) -> Self {
        GramMatrix {
            kind,
            i_max,
            values,
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn i_max(&self) -> usize {
        self.i_max
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn entry(&self, p: usize, q: usize) -> f64 {
        self.values[(p, q)]
    }
}

/// Squared Euclidean distance between two sparse vectors over the union of
/// their supports.
fn sq_distance(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let d = match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                i += 1;
                a[i - 1].1
            }
            std::cmp::Ordering::Greater => {
                j += 1;
                b[j - 1].1
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
                a[i - 1].1 - b[j - 1].1
            }
        };
        acc += d * d;
    }
    acc += a[i..].iter().map(|&(_, w)| w * w).sum::<f64>();
    acc += b[j..].iter().map(|&(_, w)| w * w).sum::<f64>();
    acc
}

fn dot_shared(a: &[(u32, u64)], b: &[(u32, u64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 as f64 * b[j].1 as f64;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Entropic kernel value: `Σ_{I=1..i_max} exp(-gamma * ||F_p^I - F_q^I||)`.
///
/// `gamma` is an experimentation hook; 1 is the defining form.
pub fn qesk_pair_with_gamma(
    fp: &EntropicFeature,
    fq: &EntropicFeature,
    i_max: usize,
    gamma: f64,
) -> Result<f64> {
    if fp.iterations() != i_max || fq.iterations() != i_max {
        return Err(Error::Contract(format!(
            "features have {} and {} levels, expected {i_max}",
            fp.iterations(),
            fq.iterations()
        )));
    }
    Ok((1..=i_max)
        .map(|it| (-gamma * sq_distance(fp.level(it), fq.level(it)).sqrt()).exp())
        .sum())
}

/// Entropic kernel value at the defining `gamma = 1`. Lies in `(0, i_max]`.
pub fn qesk_pair(fp: &EntropicFeature, fq: &EntropicFeature, i_max: usize) -> Result<f64> {
    qesk_pair_with_gamma(fp, fq, i_max, 1.0)
}

/// Baseline kernel value: `Σ_I Σ_x N_p(x) N_q(x)` over shared codes.
pub fn wlsk_pair(cp: &CountFeature, cq: &CountFeature, i_max: usize) -> Result<f64> {
    if cp.iterations() != i_max || cq.iterations() != i_max {
        return Err(Error::Contract(format!(
            "features have {} and {} levels, expected {i_max}",
            cp.iterations(),
            cq.iterations()
        )));
    }
    Ok((1..=i_max)
        .map(|it| dot_shared(cp.level(it), cq.level(it)))
        .sum())
}

/// Assemble a symmetric matrix from a pairwise kernel evaluated once per
/// unordered pair. Pairs are computed in parallel with one writer per cell,
/// so the result is identical for any worker count.
fn assemble<F: Fn(usize, usize) -> Result<f64> + Sync>(n: usize, f: F) -> Result<DMatrix<f64>> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|p| (p..n).map(move |q| (p, q)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(p, q)| f(p, q))
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n, n);
    for (&(p, q), &v) in pairs.iter().zip(values.iter()) {
        m[(p, q)] = v;
        m[(q, p)] = v;
    }
    Ok(m)
}

/// Entropic Gram matrix over all unordered pairs.
pub fn gram_qesk(features: &[EntropicFeature], i_max: usize, gamma: f64) -> Result<GramMatrix> {
    let values = assemble(features.len(), |p, q| {
        qesk_pair_with_gamma(&features[p], &features[q], i_max, gamma)
    })?;
    Ok(GramMatrix::new(KernelKind::Qesk, i_max, values))
}

/// Baseline Gram matrix; `normalize` rescales to unit self-similarity,
/// `K'_pq = K_pq / sqrt(K_pp K_qq)`.
pub fn gram_wlsk(features: &[CountFeature], i_max: usize, normalize: bool) -> Result<GramMatrix> {
    let mut values = assemble(features.len(), |p, q| {
        wlsk_pair(&features[p], &features[q], i_max)
    })?;
    let kind = if normalize {
        let n = features.len();
        let diag: Vec<f64> = (0..n).map(|p| values[(p, p)]).collect();
        if let Some(zero) = diag.iter().position(|&d| d <= 0.0) {
            return Err(Error::Numeric(format!(
                "cannot normalize: graph {zero} has zero self-similarity"
            )));
        }
        for p in 0..n {
            for q in 0..n {
                values[(p, q)] /= (diag[p] * diag[q]).sqrt();
            }
        }
        KernelKind::WlskNormalized
    } else {
        KernelKind::Wlsk
    };
    Ok(GramMatrix::new(kind, i_max, values))
}

/// Result of the empirical positive-definiteness check.
#[derive(Debug, Clone, Copy)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub pass: bool,
}

/// Smallest eigenvalue of the Gram matrix; passes when
/// `min_eig >= -tol * max(1, max_eig)`.
pub fn psd_check(k: &GramMatrix, tol: f64) -> Result<PsdReport> {
    let n = k.len();
    if n == 0 {
        return Ok(PsdReport {
            min_eigenvalue: 0.0,
            max_eigenvalue: 0.0,
            pass: true,
        });
    }
    let eig = nalgebra::SymmetricEigen::try_new(k.values().clone(), f64::EPSILON, 200 * n * n + 2000)
        .ok_or_else(|| Error::Numeric(format!("eigensolver did not converge on {n}x{n} gram")))?;
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PsdReport {
        min_eigenvalue,
        max_eigenvalue,
        pass: min_eigenvalue >= -tol * max_eigenvalue.max(1.0),
    })
}

/// Format a float with 17 significant digits (lossless for f64).
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write the matrix as text: a `# kernel=<kind> imax=<I> n=<N>` header,
/// then N comma-separated rows.
pub fn write_gram<W: Write>(k: &GramMatrix, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# kernel={} imax={} n={}", k.kind(), k.i_max(), k.len())?;
    for p in 0..k.len() {
        let row: Vec<String> = (0..k.len()).map(|q| fmt_f64(k.entry(p, q))).collect();
        writeln!(out, "{}", row.join(", "))?;
    }
    Ok(())
}

pub fn write_gram_file(k: &GramMatrix, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_gram(k, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Parse the text form produced by [`write_gram`].
pub fn parse_gram_text(text: &str) -> Result<GramMatrix> {
    let file = "gram";
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::format(file, 1, "empty input"))?;
    let rest = header
        .strip_prefix("# ")
        .ok_or_else(|| Error::format(file, line_no, "missing `# ` header"))?;
    let mut kind = None;
    let mut i_max = None;
    let mut n = None;
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::format(file, line_no, format!("bad header field {field:?}")))?;
        match key {
            "kernel" => kind = Some(value.parse::<KernelKind>()?),
            "imax" => {
                i_max = Some(value.parse::<usize>().map_err(|_| {
                    Error::format(file, line_no, format!("bad imax {value:?}"))
                })?)
            }
            "n" => {
                n = Some(value.parse::<usize>().map_err(|_| {
                    Error::format(file, line_no, format!("bad n {value:?}"))
                })?)
            }
            other => {
                return Err(Error::format(
                    file,
                    line_no,
                    format!("unknown header key {other:?}"),
                ))
            }
        }
    }
    let (kind, i_max, n) = match (kind, i_max, n) {
        (Some(k), Some(i), Some(n)) => (k, i, n),
        _ => return Err(Error::format(file, line_no, "header needs kernel, imax, n")),
    };
    if n > 1 << 20 {
        return Err(Error::format(file, line_no, format!("n={n} too large")));
    }
    let mut values = DMatrix::zeros(n, n);
    let mut row = 0;
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if row >= n {
            return Err(Error::format(file, line_no, format!("more than {n} rows")));
        }
        let mut col = 0;
        for cell in line.split(',') {
            if col >= n {
                return Err(Error::format(
                    file,
                    line_no,
                    format!("more than {n} columns"),
                ));
            }
            let v = cell.trim().parse::<f64>().map_err(|_| {
                Error::format(file, line_no, format!("bad value {:?}", cell.trim()))
            })?;
            values[(row, col)] = v;
            col += 1;
        }
        if col != n {
            return Err(Error::format(
                file,
                line_no,
                format!("{col} columns, expected {n}"),
            ));
        }
        row += 1;
    }
    if row != n {
        return Err(Error::format(file, row + 2, format!("{row} rows, expected {n}")));
    }
    Ok(GramMatrix::new(kind, i_max, values))
}

pub fn load_gram_file(path: &Path) -> Result<GramMatrix> {
    let reader =
        std::io::BufReader::new(std::fs::File::open(path).map_err(|e| Error::io(path, e))?);
    let mut text = String::new();
    for line in reader.lines() {
        text.push_str(&line.map_err(|e| Error::io(path, e))?);
        text.push('\n');
    }
    parse_gram_text(&text)
}
