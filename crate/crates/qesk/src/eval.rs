//! Precomputed-kernel C-SVM under stratified k-fold cross-validation.
//!
//! The dual soft-margin problem is solved by sequential minimal
//! optimization with maximal-violating-pair working-set selection. The
//! evaluation protocol is 10-fold cross-validation repeated ten times with
//! fresh shuffles, the regularization constant picked per outer fold by an
//! inner 9-fold pass on the training portion.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{fmt_f64, GramMatrix, KernelKind};

/// KKT violation threshold at which SMO stops.
pub const DEFAULT_SMO_TOL: f64 = 1e-3;

/// Hard cap on SMO pair updates; hitting it attaches a convergence warning
/// to the model instead of failing.
pub const SMO_MAX_UPDATES: usize = 10_000_000;

/// Default regularization grid `10^-3 ..= 10^3`.
pub fn default_c_grid() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]
}

/// Trained binary C-SVM on a precomputed kernel.
#[derive(Debug, Clone)]
pub struct SvmModel {
    support_indices: Vec<usize>,
    dual_coefficients: Vec<f64>,
    bias: f64,
    c: f64,
    train_size: usize,
    converged: bool,
}

impl SvmModel {
    /// Indices (into the training set) with nonzero multiplier.
    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    /// `alpha_i * y_i` per support vector.
    pub fn dual_coefficients(&self) -> &[f64] {
        &self.dual_coefficients
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn train_size(&self) -> usize {
        self.train_size
    }

    /// False when the update cap was reached before the KKT gap closed.
    pub fn converged(&self) -> bool {
        self.converged
    }
}

struct Solved {
    alpha: Vec<f64>,
    bias: f64,
    converged: bool,
}

/// Core SMO loop. `objective_trace`, when present, records the dual
/// objective (minimization form) after every pair update.
fn smo_solve(
    kernel: &DMatrix<f64>,
    labels: &[f64],
    c: f64,
    tol: f64,
    mut objective_trace: Option<&mut Vec<f64>>,
) -> Solved {
    let n = labels.len();
    let mut alpha = vec![0.0f64; n];
    // gradient of 1/2 a'Qa - e'a at a = 0
    let mut grad = vec![-1.0f64; n];
    let mut converged = false;

    for _ in 0..SMO_MAX_UPDATES {
        // maximal violating pair
        let mut i_up = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        let mut j_low = usize::MAX;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -labels[t] * grad[t];
            let positive = labels[t] > 0.0;
            let in_up = (positive && alpha[t] < c) || (!positive && alpha[t] > 0.0);
            let in_low = (positive && alpha[t] > 0.0) || (!positive && alpha[t] < c);
            if in_up && v > m_up {
                m_up = v;
                i_up = t;
            }
            if in_low && v < m_low {
                m_low = v;
                j_low = t;
            }
        }
        if i_up == usize::MAX || j_low == usize::MAX || m_up - m_low < tol {
            converged = true;
            break;
        }
        let (i, j) = (i_up, j_low);
        let (yi, yj) = (labels[i], labels[j]);
        let old_ai = alpha[i];
        let old_aj = alpha[j];

        let mut quad = kernel[(i, i)] + kernel[(j, j)] - 2.0 * kernel[(i, j)];
        if quad <= 0.0 {
            quad = 1e-12;
        }
        if yi != yj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        if dai == 0.0 && daj == 0.0 {
            // numerically stuck pair; treat the gap as closed
            converged = true;
            break;
        }
        for t in 0..n {
            grad[t] += labels[t]
                * (yi * kernel[(t, i)] * dai + yj * kernel[(t, j)] * daj);
        }
        if let Some(trace) = objective_trace.as_deref_mut() {
            trace.push(dual_objective(kernel, labels, &alpha));
        }
    }

    // bias from free support vectors; fall back to the KKT gap midpoint
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..n {
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += -labels[t] * grad[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -labels[t] * grad[t];
            let positive = labels[t] > 0.0;
            if (positive && alpha[t] < c) || (!positive && alpha[t] > 0.0) {
                m_up = m_up.max(v);
            }
            if (positive && alpha[t] > 0.0) || (!positive && alpha[t] < c) {
                m_low = m_low.min(v);
            }
        }
        (m_up + m_low) / 2.0
    };

    Solved {
        alpha,
        bias,
        converged,
    }
}

/// Dual objective in minimization form: `1/2 a'Qa - e'a` with
/// `Q_ij = y_i y_j K_ij`.
fn dual_objective(kernel: &DMatrix<f64>, labels: &[f64], alpha: &[f64]) -> f64 {
    let n = labels.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * labels[i] * labels[j] * kernel[(i, j)];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Train a binary C-SVM on the training block of a Gram matrix.
///
/// `labels` must be ±1 with both classes present. Stops when the largest
/// KKT violation drops below `tol` or the update cap is reached (the model
/// then carries a convergence warning).
pub fn smo_train(kernel: &DMatrix<f64>, labels: &[f64], c: f64, tol: f64) -> Result<SvmModel> {
    let n = labels.len();
    if kernel.nrows() != n || kernel.ncols() != n {
        return Err(Error::Contract(format!(
            "kernel is {}x{} for {n} labels",
            kernel.nrows(),
            kernel.ncols()
        )));
    }
    if !(c > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Contract("labels must be +1 or -1".into()));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(Error::Config("training set needs both classes".into()));
    }

    let solved = smo_solve(kernel, labels, c, tol, None);
    if !solved.converged {
        log::warn!("SMO hit the update cap of {SMO_MAX_UPDATES}; model may be inexact");
    }
    let mut support_indices = Vec::new();
    let mut dual_coefficients = Vec::new();
    for (t, &a) in solved.alpha.iter().enumerate() {
        if a > 0.0 {
            support_indices.push(t);
            dual_coefficients.push(a * labels[t]);
        }
    }
    Ok(SvmModel {
        support_indices,
        dual_coefficients,
        bias: solved.bias,
        c,
        train_size: n,
        converged: solved.converged,
    })
}

/// Raw decision values `sum_i coef_i K(test, i) + bias`, one per row of
/// `gram_cross` (test rows against all training columns).
pub fn decision_values(model: &SvmModel, gram_cross: &DMatrix<f64>) -> Result<Vec<f64>> {
    if gram_cross.ncols() != model.train_size {
        return Err(Error::Contract(format!(
            "{} kernel columns for a model trained on {} points",
            gram_cross.ncols(),
            model.train_size
        )));
    }
    Ok((0..gram_cross.nrows())
        .map(|r| {
            model
                .support_indices
                .iter()
                .zip(&model.dual_coefficients)
                .map(|(&i, &coef)| coef * gram_cross[(r, i)])
                .sum::<f64>()
                + model.bias
        })
        .collect())
}

/// Predicted ±1 labels; a decision value of exactly zero maps to +1.
pub fn predict(model: &SvmModel, gram_cross: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(decision_values(model, gram_cross)?
        .into_iter()
        .map(|d| if d >= 0.0 { 1.0 } else { -1.0 })
        .collect())
}

struct PairModel {
    class_a: usize,
    class_b: usize,
    subset: Vec<usize>,
    model: SvmModel,
}

/// One-vs-one ensemble over dense class labels `0..class_count`.
pub struct MulticlassModel {
    class_count: usize,
    train_size: usize,
    pairs: Vec<PairModel>,
}

fn subkernel(k: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| k[(rows[r], cols[c])])
}

/// Train one binary model per unordered class pair. Within a pair, the
/// smaller class index maps to +1.
pub fn train_one_vs_one(
    kernel: &DMatrix<f64>,
    dense_labels: &[usize],
    c: f64,
    tol: f64,
) -> Result<MulticlassModel> {
    let n = dense_labels.len();
    let class_count = dense_labels.iter().copied().max().map_or(0, |m| m + 1);
    if class_count < 2 {
        return Err(Error::Config("training set needs at least two classes".into()));
    }
    let mut pairs = Vec::new();
    for a in 0..class_count {
        for b in (a + 1)..class_count {
            let subset: Vec<usize> = (0..n)
                .filter(|&i| dense_labels[i] == a || dense_labels[i] == b)
                .collect();
            let labels: Vec<f64> = subset
                .iter()
                .map(|&i| if dense_labels[i] == a { 1.0 } else { -1.0 })
                .collect();
            let sub = subkernel(kernel, &subset, &subset);
            let model = smo_train(&sub, &labels, c, tol)?;
            pairs.push(PairModel {
                class_a: a,
                class_b: b,
                subset,
                model,
            });
        }
    }
    Ok(MulticlassModel {
        class_count,
        train_size: n,
        pairs,
    })
}

/// Majority vote over the pairwise models; vote ties resolve toward the
/// smaller class index.
pub fn predict_one_vs_one(
    ensemble: &MulticlassModel,
    gram_cross: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    if gram_cross.ncols() != ensemble.train_size {
        return Err(Error::Contract(format!(
            "{} kernel columns for an ensemble trained on {} points",
            gram_cross.ncols(),
            ensemble.train_size
        )));
    }
    let rows = gram_cross.nrows();
    let mut votes = vec![vec![0usize; ensemble.class_count]; rows];
    for pair in &ensemble.pairs {
        let cols: Vec<usize> = (0..rows).collect();
        let cross = subkernel(gram_cross, &cols, &pair.subset);
        let predicted = predict(&pair.model, &cross)?;
        for (r, &p) in predicted.iter().enumerate() {
            let winner = if p > 0.0 { pair.class_a } else { pair.class_b };
            votes[r][winner] += 1;
        }
    }
    Ok(votes
        .into_iter()
        .map(|v| {
            let mut best = 0;
            for (cls, &count) in v.iter().enumerate() {
                if count > v[best] {
                    best = cls;
                }
            }
            best
        })
        .collect())
}

/// Cross-validation settings; `Default` matches the evaluation protocol.
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    pub repetitions: usize,
    pub c_grid: Vec<f64>,
    pub seed: u64,
    pub smo_tol: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            repetitions: 10,
            c_grid: default_c_grid(),
            seed: 0,
            smo_tol: DEFAULT_SMO_TOL,
        }
    }
}

/// Aggregated cross-validation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub dataset: String,
    pub kernel_kind: KernelKind,
    pub i_max: usize,
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Folds are reshuffled for every repetition.
    pub reshuffle_per_repetition: bool,
    /// `[repetition][fold]` test accuracies.
    pub fold_accuracies: Vec<Vec<f64>>,
    /// `[repetition][fold]` selected regularization constants.
    pub chosen_c: Vec<Vec<f64>>,
    pub mean_accuracy: f64,
    pub std_error: f64,
}

impl CvReport {
    pub fn repetition_means(&self) -> Vec<f64> {
        self.fold_accuracies
            .iter()
            .map(|fs| fs.iter().sum::<f64>() / fs.len() as f64)
            .collect()
    }

    /// Deterministic key-value text form.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "dataset: {}", self.dataset)?;
        writeln!(w, "kernel: {}", self.kernel_kind)?;
        writeln!(w, "i_max: {}", self.i_max)?;
        writeln!(w, "folds: {}", self.folds)?;
        writeln!(w, "repetitions: {}", self.repetitions)?;
        writeln!(w, "seed: {}", self.seed)?;
        writeln!(
            w,
            "reshuffle_per_repetition: {}",
            self.reshuffle_per_repetition
        )?;
        writeln!(w, "mean_accuracy: {}", fmt_f64(self.mean_accuracy))?;
        writeln!(w, "std_error: {}", fmt_f64(self.std_error))?;
        let mut histogram: std::collections::BTreeMap<String, usize> = Default::default();
        for c in self.chosen_c.iter().flatten() {
            *histogram.entry(format!("{c}")).or_insert(0) += 1;
        }
        let hist: Vec<String> = {
            let mut entries: Vec<(f64, usize)> = histogram
                .iter()
                .map(|(k, &v)| (k.parse::<f64>().unwrap(), v))
                .collect();
            entries.sort_by(|a, b| a.0.total_cmp(&b.0));
            entries.iter().map(|(c, n)| format!("{c}={n}")).collect()
        };
        writeln!(w, "chosen_c_histogram: {}", hist.join(", "))?;
        for (r, (accs, cs)) in self
            .fold_accuracies
            .iter()
            .zip(self.chosen_c.iter())
            .enumerate()
        {
            let a: Vec<String> = accs.iter().map(|&x| fmt_f64(x)).collect();
            writeln!(w, "repetition {} accuracies: {}", r + 1, a.join(", "))?;
            let c: Vec<String> = cs.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "repetition {} chosen_c: {}", r + 1, c.join(", "))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }
}

fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stratified fold assignment: per class, indices are shuffled and dealt
/// round-robin, carrying the fold cursor across classes so fold sizes stay
/// balanced. Each fold's class share deviates from the global share by at
/// most one sample per class.
pub fn stratified_folds(
    dense_labels: &[usize],
    folds: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let class_count = dense_labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &c) in dense_labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut assignment = vec![Vec::new(); folds];
    let mut slot = 0usize;
    for class in by_class.iter_mut() {
        class.shuffle(rng);
        for &i in class.iter() {
            assignment[slot % folds].push(i);
            slot += 1;
        }
    }
    assignment
}

/// Remap arbitrary integer class labels to dense `0..k` by sorted order.
pub fn dense_class_labels(class_labels: &[i64]) -> (Vec<usize>, Vec<i64>) {
    let mut distinct: Vec<i64> = class_labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let dense = class_labels
        .iter()
        .map(|l| distinct.binary_search(l).unwrap())
        .collect();
    (dense, distinct)
}

/// Pick the grid constant with the best inner-CV accuracy on the training
/// portion; ties go to the smaller constant. Inner folds whose training
/// side is single-class are skipped.
fn select_c(
    kernel: &DMatrix<f64>,
    train: &[usize],
    dense: &[usize],
    cfg: &CvConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let train_labels: Vec<usize> = train.iter().map(|&i| dense[i]).collect();
    let inner_k = train.len().min(9).max(2);
    let inner = stratified_folds(&train_labels, inner_k, rng);

    let mut usable = Vec::new();
    for t in 0..inner_k {
        let test_local: Vec<usize> = {
            let mut v = inner[t].clone();
            v.sort_unstable();
            v
        };
        let train_local: Vec<usize> = {
            let mut v: Vec<usize> = (0..inner_k)
                .filter(|&j| j != t)
                .flat_map(|j| inner[j].iter().copied())
                .collect();
            v.sort_unstable();
            v
        };
        let classes: std::collections::BTreeSet<usize> =
            train_local.iter().map(|&i| train_labels[i]).collect();
        if classes.len() < 2 || test_local.is_empty() {
            continue;
        }
        usable.push((train_local, test_local));
    }
    if usable.is_empty() {
        return Err(Error::Config(
            "every inner model-selection fold is single-class".into(),
        ));
    }

    let mut best_c = None;
    let mut best_score = f64::NEG_INFINITY;
    for &c in &cfg.c_grid {
        let mut fold_scores = Vec::with_capacity(usable.len());
        for (train_local, test_local) in &usable {
            let tr_global: Vec<usize> = train_local.iter().map(|&i| train[i]).collect();
            let te_global: Vec<usize> = test_local.iter().map(|&i| train[i]).collect();
            let sub = subkernel(kernel, &tr_global, &tr_global);
            let sub_labels: Vec<usize> = train_local.iter().map(|&i| train_labels[i]).collect();
            let ensemble = train_one_vs_one(&sub, &sub_labels, c, cfg.smo_tol)?;
            let cross = subkernel(kernel, &te_global, &tr_global);
            let predicted = predict_one_vs_one(&ensemble, &cross)?;
            let correct = predicted
                .iter()
                .enumerate()
                .filter(|&(k, &p)| p == train_labels[test_local[k]])
                .count();
            fold_scores.push(correct as f64 / test_local.len() as f64);
        }
        let score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        if score > best_score {
            best_score = score;
            best_c = Some(c);
        }
    }
    Ok(best_c.expect("nonempty grid"))
}

/// Run the full protocol on a precomputed Gram matrix.
pub fn cross_validate(
    dataset: &str,
    k: &GramMatrix,
    class_labels: &[i64],
    cfg: &CvConfig,
) -> Result<CvReport> {
    let n = k.len();
    if class_labels.len() != n {
        return Err(Error::Config(format!(
            "{} class labels for a {n}x{n} gram matrix",
            class_labels.len()
        )));
    }
    if cfg.folds < 2 {
        return Err(Error::Config("folds must be at least 2".into()));
    }
    if n < cfg.folds {
        return Err(Error::Config(format!(
            "{n} graphs cannot fill {} folds",
            cfg.folds
        )));
    }
    if cfg.c_grid.is_empty() {
        return Err(Error::Config("empty C grid".into()));
    }
    if cfg.repetitions < 1 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let (dense, distinct) = dense_class_labels(class_labels);
    if distinct.len() < 2 {
        return Err(Error::Config("dataset has a single class".into()));
    }

    let values = k.values();
    let per_rep: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut shuffle_rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, rep as u64, 0));
            let folds = stratified_folds(&dense, cfg.folds, &mut shuffle_rng);
            let fold_results: Vec<(f64, f64)> = (0..cfg.folds)
                .into_par_iter()
                .map(|f| {
                    let mut test = folds[f].clone();
                    test.sort_unstable();
                    let mut train: Vec<usize> = (0..cfg.folds)
                        .filter(|&j| j != f)
                        .flat_map(|j| folds[j].iter().copied())
                        .collect();
                    train.sort_unstable();
                    let mut inner_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        cfg.seed,
                        rep as u64,
                        (f + 1) as u64,
                    ));
                    let chosen = select_c(values, &train, &dense, cfg, &mut inner_rng)?;
                    let sub = subkernel(values, &train, &train);
                    let train_labels: Vec<usize> = train.iter().map(|&i| dense[i]).collect();
                    let ensemble = train_one_vs_one(&sub, &train_labels, chosen, cfg.smo_tol)?;
                    let cross = subkernel(values, &test, &train);
                    let predicted = predict_one_vs_one(&ensemble, &cross)?;
                    let correct = predicted
                        .iter()
                        .zip(test.iter())
                        .filter(|&(&p, &i)| p == dense[i])
                        .count();
                    Ok((correct as f64 / test.len() as f64, chosen))
                })
                .collect::<Result<_>>()?;
            let (accs, cs) = fold_results.into_iter().unzip();
            Ok((accs, cs))
        })
        .collect::<Result<_>>()?;

    let (fold_accuracies, chosen_c): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
        per_rep.into_iter().unzip();
    let rep_means: Vec<f64> = fold_accuracies
        .iter()
        .map(|fs| fs.iter().sum::<f64>() / fs.len() as f64)
        .collect();
    let mean_accuracy = rep_means.iter().sum::<f64>() / rep_means.len() as f64;
    let std_error = if rep_means.len() > 1 {
        let var = rep_means
            .iter()
            .map(|m| (m - mean_accuracy).powi(2))
            .sum::<f64>()
            / (rep_means.len() - 1) as f64;
        (var / rep_means.len() as f64).sqrt()
    } else {
        0.0
    };

    Ok(CvReport {
        dataset: dataset.to_string(),
        kernel_kind: k.kind(),
        i_max: k.i_max(),
        folds: cfg.folds,
        repetitions: cfg.repetitions,
        seed: cfg.seed,
        reshuffle_per_repetition: true,
        fold_accuracies,
        chosen_c,
        mean_accuracy,
        std_error,
    })
}
