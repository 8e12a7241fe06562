//! Cross-validation of the full fitting procedure, prediction and summaries.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef};
use ndarray::{Array2, ArrayView2, ShapeBuilder};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decomp::Decomposition;
use crate::design::{Design, DesignView};
use crate::error::{Error, Result};
use crate::path::{fit_view, plmm, FitPath, PathOptions, PrepOptions, SparseColumns, ViewFit};
use crate::resources::{faer_par, Resources};
use crate::store::column_blocks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictionType {
    Linear,
    #[default]
    Blup,
}

impl std::fmt::Display for PredictionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PredictionType::Linear => "linear",
            PredictionType::Blup => "blup",
        })
    }
}

impl std::str::FromStr for PredictionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(PredictionType::Linear),
            "blup" => Ok(PredictionType::Blup),
            _ => Err(Error::Config(format!(
                "unknown prediction type {s:?} (expected linear or blup)"
            ))),
        }
    }
}

/// Balanced fold labels `1..=k`, shuffled deterministically by `seed`.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::Config(format!(
            "need 2 <= folds <= n, got {k} folds for {n} samples"
        )));
    }
    let mut folds: Vec<usize> = (0..n).map(|i| i % k + 1).collect();
    folds.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(folds)
}

/// `intercept + X_new beta` at index `k`, with `x_new` on the original scale
/// and columns in the fit's feature order.
pub fn predict_linear(fit: &FitPath, x_new: ArrayView2<'_, f64>, k: usize) -> Result<Vec<f64>> {
    fit.check_index(k)?;
    if x_new.ncols() != fit.p() {
        return Err(Error::data(format!(
            "new data has {} columns, the fit has {} features",
            x_new.ncols(),
            fit.p()
        )));
    }
    let mut out = vec![fit.intercepts[k]; x_new.nrows()];
    for (j, b) in fit.beta.column(k) {
        for (o, x) in out.iter_mut().zip(x_new.column(j)) {
            *o += b * x;
        }
    }
    Ok(out)
}

/// Linear prediction plus the conditional mean of the random effect,
/// `eta K_cross S^{-1} (y - fitted)`, using the training design and its
/// decomposition.
pub fn predict_blup(
    fit: &FitPath,
    design: &Design,
    decomp: &Decomposition,
    x_new: ArrayView2<'_, f64>,
    k: usize,
    res: &Resources,
) -> Result<Vec<f64>> {
    let linear = predict_linear(fit, x_new, k)?;
    if fit.feature_names != design.feature_names() {
        return Err(Error::data("fit and design have different features"));
    }
    if decomp.n() != design.n() {
        return Err(Error::data(format!(
            "decomposition has size {}, design has {} samples",
            decomp.n(),
            design.n()
        )));
    }
    let view = DesignView::full(design);
    let beta_std = fit.beta.map(|j, b| b * design.scales[j]);
    let a_std = fit.intercepts[k] + fit.beta.column(k).map(|(j, b)| b * design.centers[j]).sum::<f64>();
    let fitted = view_linear(&view, &single_column(&beta_std, k), &[a_std])?;
    let resid: Vec<f64> = design.y.iter().zip(fitted.column(0)).map(|(y, f)| y - f).collect();
    let z_new = design.standardize_rows(x_new)?;
    let test = |r: Range<usize>| Ok(z_new.slice(ndarray::s![.., r]).to_owned());
    let kc = cross_kernel(&view, &test, x_new.nrows(), decomp.p_penalized, res)?;
    let term = random_effect(
        decomp,
        &kc,
        &Array2::from_shape_vec((resid.len(), 1), resid).expect("n x 1"),
    );
    Ok(linear.iter().zip(term.column(0)).map(|(a, b)| a + b).collect())
}

fn single_column(m: &SparseColumns, k: usize) -> SparseColumns {
    let mut out = SparseColumns::new(m.n_rows());
    out.push_column(m.column(k));
    out
}

/// `X_view beta + a` for every column of `beta` (`n_rows x L`).
fn view_linear(view: &DesignView<'_>, beta: &SparseColumns, a: &[f64]) -> Result<Array2<f64>> {
    let (m, l) = (view.n_rows(), beta.n_cols());
    let mut out = Array2::from_shape_fn((m, l).f(), |(_, k)| a[k]);
    for j in beta.ever_nonzero() {
        let col = view.block(j..j + 1)?;
        for k in 0..l {
            let b = beta.get(j, k);
            if b != 0.0 {
                out.column_mut(k).scaled_add(b, &col.column(0));
            }
        }
        view.release(j..j + 1);
    }
    Ok(out)
}

fn as_mat(a: &Array2<f64>) -> MatRef<'_, f64> {
    let (r, c) = a.dim();
    MatRef::from_column_major_slice(a.as_slice_memory_order().expect("contiguous"), r, c)
}

fn as_mat_mut(a: &mut Array2<f64>) -> MatMut<'_, f64> {
    let (r, c) = a.dim();
    MatMut::from_column_major_slice_mut(a.as_slice_memory_order_mut().expect("contiguous"), r, c)
}

fn to_col_major(a: Array2<f64>) -> Array2<f64> {
    if a.t().is_standard_layout() {
        a
    } else {
        let mut out = Array2::zeros(a.dim().f());
        out.assign(&a);
        out
    }
}

/// `(1/p_pen) Z_test[:, pen] Z_train[:, pen]^T`, `m x n_train`.
fn cross_kernel(
    train: &DesignView<'_>,
    test: &dyn Fn(Range<usize>) -> Result<Array2<f64>>,
    m: usize,
    p_pen: usize,
    res: &Resources,
) -> Result<Array2<f64>> {
    let n = train.n_rows();
    res.check("cross-relatedness matrix", 8 * (m as u64) * (n as u64))?;
    let mut kc = Array2::<f64>::zeros((m, n).f());
    let pf = train.penalty_factor();
    for range in column_blocks(train.n_cols(), res.block_width_for(n.max(m))) {
        let pen: Vec<usize> = range
            .clone()
            .filter(|&j| pf[j] > 0.0)
            .map(|j| j - range.start)
            .collect();
        if pen.is_empty() {
            continue;
        }
        let a = to_col_major(train.block(range.clone())?.select(ndarray::Axis(1), &pen));
        let b = to_col_major(test(range.clone())?.select(ndarray::Axis(1), &pen));
        matmul(
            as_mat_mut(&mut kc),
            Accum::Add,
            as_mat(&b),
            as_mat(&a).transpose(),
            1.0,
            faer_par(),
        );
        train.release(range);
    }
    kc.mapv_inplace(|v| v / p_pen.max(1) as f64);
    Ok(kc)
}

/// `eta K_cross S^{-1} R` for residual columns `R` (`n_train x L`).
fn random_effect(decomp: &Decomposition, kc: &Array2<f64>, resid: &Array2<f64>) -> Array2<f64> {
    if decomp.eta == 0.0 {
        return Array2::zeros((kc.nrows(), resid.ncols()));
    }
    let mut t = decomp.u.t().dot(resid);
    for (mut row, w) in t.rows_mut().into_iter().zip(decomp.w.iter()) {
        row.mapv_inplace(|v| v * w * w);
    }
    let s_inv_r = decomp.u.dot(&t);
    kc.dot(&s_inv_r) * decomp.eta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub prediction: PredictionType,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 5,
            seed: 1,
            prediction: PredictionType::Blup,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda: Vec<f64>,
    pub cve: Vec<f64>,
    pub cvse: Vec<f64>,
    /// Zero-based index of the first minimum of `cve`.
    pub lambda_min_index: usize,
    pub folds: Vec<usize>,
    pub prediction: PredictionType,
    /// Held-out predictions, `n x L`.
    pub predictions: Array2<f64>,
    pub fit: FitPath,
}

impl CvResult {
    pub fn lambda_min(&self) -> f64 {
        self.lambda[self.lambda_min_index]
    }
}

/// Fits one training fold on a fixed penalty grid. Every statistic used
/// (standardization, relatedness, eigendecomposition, variance ratio,
/// rotation) comes from `train` rows only.
pub fn fit_fold<'a>(
    design: &'a Design,
    train: &[usize],
    lambdas: &[f64],
    opts: &PathOptions,
    eta: Option<f64>,
    res: &Resources,
    scratch: &Path,
) -> Result<(DesignView<'a>, ViewFit)> {
    let view = DesignView::restandardized(design, train.to_vec(), res.block_width_for(train.len()))?;
    let y: Vec<f64> = train.iter().map(|&i| design.y[i]).collect();
    let prep = PrepOptions {
        eta,
        decomposition: None,
    };
    let vf = fit_view(&view, &y, opts, prep, Some(lambdas), res, scratch)?;
    Ok((view, vf))
}

/// Predicts `test` rows from a fold fit (`|test| x L`).
pub fn predict_fold(
    design: &Design,
    train_view: &DesignView<'_>,
    test: &[usize],
    vf: &ViewFit,
    prediction: PredictionType,
    res: &Resources,
) -> Result<Array2<f64>> {
    let test_view = train_view.with_rows(test.to_vec());
    let linear = view_linear(&test_view, &vf.beta_std, &vf.intercept_std)?;
    if prediction == PredictionType::Linear {
        return Ok(linear);
    }
    let train_rows = train_view
        .rows()
        .map(<[usize]>::to_vec)
        .unwrap_or_else(|| (0..design.n()).collect());
    let fitted = view_linear(train_view, &vf.beta_std, &vf.intercept_std)?;
    let mut resid = -fitted;
    for (mut row, &i) in resid.rows_mut().into_iter().zip(&train_rows) {
        row.mapv_inplace(|v| v + design.y[i]);
    }
    let test_block = |r: Range<usize>| test_view.block(r);
    let kc = cross_kernel(train_view, &test_block, test.len(), vf.decomp.p_penalized, res)?;
    Ok(linear + random_effect(&vf.decomp, &kc, &resid))
}

/// Cross-validates the complete procedure: full-data fit for the shared
/// penalty grid, then per fold a fresh prep and fit on training rows and
/// prediction of the held-out rows.
pub fn cv_plmm(
    design: &Design,
    opts: &PathOptions,
    cv: &CvOptions,
    eta: Option<f64>,
    res: &Resources,
    scratch: &Path,
) -> Result<(CvResult, ViewFit)> {
    let n = design.n();
    if cv.folds > n / 2 {
        return Err(Error::Config(format!(
            "{} folds over {n} samples leaves a fold with fewer than 2 samples",
            cv.folds
        )));
    }
    let folds = assign_folds(n, cv.folds, cv.seed)?;
    cv_with_folds(design, opts, folds, cv.prediction, eta, res, scratch)
}

/// [`cv_plmm`] with caller-supplied fold labels (any distinct values; each
/// fold needs at least 2 samples).
pub fn cv_with_folds(
    design: &Design,
    opts: &PathOptions,
    folds: Vec<usize>,
    prediction: PredictionType,
    eta: Option<f64>,
    res: &Resources,
    scratch: &Path,
) -> Result<(CvResult, ViewFit)> {
    let n = design.n();
    if folds.len() != n {
        return Err(Error::Config(format!("{} fold labels for {n} samples", folds.len())));
    }
    let mut labels = folds.clone();
    labels.sort_unstable();
    labels.dedup();
    if labels.len() < 2 {
        return Err(Error::Config("cross-validation needs at least 2 folds".into()));
    }
    for &f in &labels {
        let size = folds.iter().filter(|&&v| v == f).count();
        if size < 2 {
            return Err(Error::Config(format!(
                "fold {f} has {size} samples, at least 2 are needed"
            )));
        }
    }
    let prep = PrepOptions {
        eta,
        decomposition: None,
    };
    let (fit, full) = plmm(design, opts, prep, res, scratch)?;
    let l = fit.n_lambda();
    let mut predictions = Array2::<f64>::zeros((n, l));
    for (done, &f) in labels.iter().enumerate() {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| folds[i] != f);
        let (view, vf) = fit_fold(design, &train, &fit.lambda, opts, eta, res, scratch)?;
        let pred = predict_fold(design, &view, &test, &vf, prediction, res)?;
        for (r, &i) in test.iter().enumerate() {
            predictions.row_mut(i).assign(&pred.row(r));
        }
        log::info!(
            "fold {}/{}: {} held out, eta {:.4}",
            done + 1,
            labels.len(),
            test.len(),
            vf.decomp.eta
        );
    }
    let (cve, cvse) = cv_error(&predictions, &design.y);
    let lambda_min_index = first_argmin(&cve);
    Ok((
        CvResult {
            lambda: fit.lambda.clone(),
            cve,
            cvse,
            lambda_min_index,
            folds,
            prediction,
            predictions,
            fit,
        },
        full,
    ))
}

/// Mean held-out squared error per column and its standard error.
pub fn cv_error(predictions: &Array2<f64>, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len() as f64;
    predictions
        .columns()
        .into_iter()
        .map(|col| {
            let sq: Vec<f64> = col.iter().zip(y).map(|(p, y)| (y - p).powi(2)).collect();
            let mean = sq.iter().sum::<f64>() / n;
            let var = if n > 1.0 {
                sq.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (mean, (var / n).sqrt())
        })
        .unzip()
}

pub fn first_argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x < v[best] { i } else { best })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Zero-based.
    pub index: usize,
    pub lambda: f64,
    pub n_selected: usize,
    pub selected: Vec<String>,
    pub cv: Option<CvSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvSummary {
    pub cve: f64,
    pub cvse: f64,
    pub lambda_min_index: usize,
    pub lambda_min: f64,
}

pub fn summarize(fit: &FitPath, k: usize) -> Result<Summary> {
    fit.check_index(k)?;
    let selected: Vec<String> = fit
        .selected(k)
        .into_iter()
        .map(|j| fit.feature_names[j].clone())
        .collect();
    Ok(Summary {
        index: k,
        lambda: fit.lambda[k],
        n_selected: selected.len(),
        selected,
        cv: None,
    })
}

/// Summary at index `k` with cross-validation errors attached; the reported
/// minimum is the first argmin of `cve`.
pub fn summarize_cv(fit: &FitPath, cve: &[f64], cvse: &[f64], k: usize) -> Result<Summary> {
    if cve.len() != fit.n_lambda() || cvse.len() != fit.n_lambda() {
        return Err(Error::data(format!(
            "{} cross-validation errors for {} penalty values",
            cve.len(),
            fit.n_lambda()
        )));
    }
    let mut s = summarize(fit, k)?;
    let m = first_argmin(cve);
    s.cv = Some(CvSummary {
        cve: cve[k],
        cvse: cvse[k],
        lambda_min_index: m,
        lambda_min: fit.lambda[m],
    });
    Ok(s)
}

impl CvResult {
    pub fn summary(&self, k: usize) -> Result<Summary> {
        summarize_cv(&self.fit, &self.cve, &self.cvse, k)
    }
}

impl Summary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lambda index: {}", self.index + 1);
        let _ = writeln!(s, "lambda: {:.6e}", self.lambda);
        let _ = writeln!(s, "selected features: {}", self.n_selected);
        if let Some(cv) = &self.cv {
            let _ = writeln!(s, "cve: {:.6e} (se {:.6e})", cv.cve, cv.cvse);
            let marker = if cv.lambda_min_index == self.index {
                " (this index)"
            } else {
                ""
            };
            let _ = writeln!(
                s,
                "lambda_min: {:.6e} at index {}{marker}",
                cv.lambda_min,
                cv.lambda_min_index + 1
            );
        }
        for name in &self.selected {
            let _ = writeln!(s, "  {name}");
        }
        s
    }
}

/// `(lambda, cve, cvse)` columns of `cve.txt`.
pub type CveTable = (Vec<f64>, Vec<f64>, Vec<f64>);

pub const CVE_FILE: &str = "cve.txt";
pub const FOLDS_FILE: &str = "folds.txt";
pub const CVINFO_FILE: &str = "cvinfo.txt";

/// Writes the full-data fit plus `cve.txt`, `folds.txt` and `cvinfo.txt`.
pub fn write_cv(dir: impl AsRef<Path>, cv: &CvResult, sample_ids: &[String], opts: &CvOptions) -> Result<()> {
    let dir = dir.as_ref();
    crate::path::write_fit(dir, &cv.fit)?;
    let put = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    let mut text = String::from("lambda\tcve\tcvse\n");
    for k in 0..cv.lambda.len() {
        let _ = writeln!(text, "{:?}\t{:?}\t{:?}", cv.lambda[k], cv.cve[k], cv.cvse[k]);
    }
    put(CVE_FILE, text)?;
    let mut text = String::new();
    for (id, f) in sample_ids.iter().zip(&cv.folds) {
        let _ = writeln!(text, "{id}\t{f}");
    }
    put(FOLDS_FILE, text)?;
    put(
        CVINFO_FILE,
        format!(
            "prediction\t{}\nfolds\t{}\nseed\t{}\nlambda_min_index\t{}\n",
            cv.prediction,
            opts.folds,
            opts.seed,
            cv.lambda_min_index + 1
        ),
    )
}

/// Parses `cve.txt` into `(lambda, cve, cvse)` columns.
pub fn parse_cve(text: &str, source: &str) -> Result<CveTable> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "lambda\tcve\tcvse" => {}
        _ => return Err(Error::parse(source, 1, "expected header lambda<TAB>cve<TAB>cvse")),
    }
    let (mut l, mut c, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split('\t')
            .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::parse(source, i + 1, "expected three finite numbers"))?;
        let [a, b, d] = vals[..] else {
            return Err(Error::parse(source, i + 1, "expected three fields"));
        };
        l.push(a);
        c.push(b);
        s.push(d);
    }
    if l.is_empty() {
        return Err(Error::parse(source, 0, "no rows"));
    }
    Ok((l, c, s))
}

/// `(lambda, cve, cvse)` from a cross-validation output directory, or `None`
/// for a plain fit directory.
pub fn read_cve(dir: impl AsRef<Path>) -> Result<Option<CveTable>> {
    let path = dir.as_ref().join(CVE_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_cve(&text, &path.display().to_string()).map(Some)
}
