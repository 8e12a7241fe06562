//! Assembling the analysis design: outcome alignment, unpenalized
//! covariates and column standardization.
//!
//! Columns are ordered `[covariates..., penalized features...]`. Every
//! retained column is centered and scaled by its population standard
//! deviation, so `(1/n) * ||x_j||^2 == 1`. The intercept is not a design
//! column; it is added by the rotation step.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::Delimiter;
use crate::store::{column_blocks, ElementKind, FileMatrix, DEFAULT_BLOCK_WIDTH};

/// A delimited table with a header row and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct IdTable {
    pub source: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl IdTable {
    pub fn parse<R: BufRead>(reader: R, delimiter: Delimiter, source: &str) -> Result<Self> {
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = delimiter.split(&line).map(str::to_string).collect();
            match &header {
                None => header = Some(fields),
                Some(h) if h.len() != fields.len() => {
                    return Err(Error::parse(
                        source,
                        i + 1,
                        format!("expected {} fields, found {}", h.len(), fields.len()),
                    ))
                }
                Some(_) => rows.push(fields),
            }
        }
        let header = header.ok_or_else(|| Error::parse(source, 0, "empty table"))?;
        Ok(IdTable {
            source: source.to_string(),
            header,
            rows,
        })
    }

    pub fn read(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file), delimiter, &path.display().to_string())
    }

    /// Two-column table, handy for simulated outcomes.
    pub fn from_pairs(id_col: &str, value_col: &str, ids: &[String], values: &[f64]) -> Self {
        IdTable {
            source: "<memory>".into(),
            header: vec![id_col.into(), value_col.into()],
            rows: ids
                .iter()
                .zip(values)
                .map(|(id, v)| vec![id.clone(), format!("{v:?}")])
                .collect(),
        }
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("{}: no column named {name:?}", self.source)))
    }

    /// Maps id -> row index, rejecting duplicate ids.
    fn index_by(&self, id_col: usize) -> Result<HashMap<&str, usize>> {
        let mut index = HashMap::with_capacity(self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            if index.insert(row[id_col].as_str(), r).is_some() {
                return Err(Error::data(format!("{}: duplicate id {}", self.source, row[id_col])));
            }
        }
        Ok(index)
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | ".")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Predictor rows that have an outcome, in predictor order.
    pub rows: Vec<usize>,
    pub y: Vec<f64>,
    /// Predictor ids dropped for lack of an outcome.
    pub dropped: Vec<String>,
}

pub fn align_outcome(
    predictor_ids: &[String],
    outcome: &IdTable,
    id_col: &str,
    outcome_col: &str,
) -> Result<Alignment> {
    let id_idx = outcome.column(id_col)?;
    let y_idx = outcome.column(outcome_col)?;
    let index = outcome.index_by(id_idx)?;

    let mut seen = HashMap::with_capacity(predictor_ids.len());
    let mut out = Alignment {
        rows: Vec::new(),
        y: Vec::new(),
        dropped: Vec::new(),
    };
    for (r, id) in predictor_ids.iter().enumerate() {
        if seen.insert(id.as_str(), r).is_some() {
            return Err(Error::data(format!("duplicate predictor sample id {id}")));
        }
        let cell = index.get(id.as_str()).map(|&k| outcome.rows[k][y_idx].as_str());
        match cell {
            Some(c) if !is_missing(c) => {
                let v = c
                    .parse::<f64>()
                    .map_err(|_| Error::data(format!("{}: outcome for {id} is not numeric: {c:?}", outcome.source)))?;
                out.rows.push(r);
                out.y.push(v);
            }
            _ => out.dropped.push(id.clone()),
        }
    }
    if out.rows.is_empty() {
        return Err(Error::data(format!(
            "no predictor sample ids match an outcome in {}",
            outcome.source
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub names: Vec<String>,
    /// `n x k`, rows aligned with the sample ids passed to [`add_unpenalized`].
    pub values: Array2<f64>,
}

/// Looks up unpenalized covariates for `sample_ids`, in that order.
pub fn add_unpenalized(sample_ids: &[String], table: &IdTable, id_col: &str, columns: &[String]) -> Result<Covariates> {
    let id_idx = table.column(id_col)?;
    let cols = columns.iter().map(|c| table.column(c)).collect::<Result<Vec<_>>>()?;
    let index = table.index_by(id_idx)?;
    let mut values = Array2::zeros((sample_ids.len(), cols.len()));
    for (i, id) in sample_ids.iter().enumerate() {
        let row = index
            .get(id.as_str())
            .map(|&r| &table.rows[r])
            .ok_or_else(|| Error::data(format!("{}: no covariates for sample {id}", table.source)))?;
        for (k, &c) in cols.iter().enumerate() {
            let cell = &row[c];
            values[[i, k]] = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::data(format!(
                    "{}: covariate {} for sample {id} is {cell:?}",
                    table.source, columns[k]
                ))
            })?;
        }
    }
    Ok(Covariates {
        names: columns.to_vec(),
        values,
    })
}

/// Mean and population standard deviation of one column; `None` when the
/// column is constant.
pub fn column_moments(x: &[f64]) -> Option<(f64, f64)> {
    let first = *x.first()?;
    if x.iter().all(|&v| v == first) {
        return None;
    }
    let n = x.len() as f64;
    let center = x.iter().sum::<f64>() / n;
    let scale = (x.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n).sqrt();
    (scale > 0.0 && scale.is_finite()).then_some((center, scale))
}

#[derive(Debug)]
pub struct Standardized {
    pub matrix: FileMatrix,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    /// Source column index of each retained column.
    pub kept: Vec<usize>,
    pub dropped: Vec<String>,
}

/// Column-standardizes `m` (optionally restricted to `rows`) into a new
/// float64 store, dropping constant columns.
pub fn standardize(
    m: &FileMatrix,
    rows: Option<&[usize]>,
    out: impl AsRef<Path>,
    overwrite: bool,
) -> Result<Standardized> {
    let mut builder = StandardizeJob::new(m, rows, None)?;
    builder.scan()?;
    let (matrix, _) = builder.write(out, overwrite, &[])?;
    Ok(Standardized {
        matrix,
        centers: builder.centers(),
        scales: builder.scales(),
        kept: builder.kept_sources(),
        dropped: builder.dropped_names(),
    })
}

/// Two-pass standardization over an optional in-memory covariate block
/// followed by the columns of a file matrix.
struct StandardizeJob<'a> {
    m: &'a FileMatrix,
    rows: Vec<usize>,
    identity_rows: bool,
    covariates: Option<&'a Covariates>,
    moments: Vec<Option<(f64, f64)>>,
}

impl<'a> StandardizeJob<'a> {
    fn new(m: &'a FileMatrix, rows: Option<&[usize]>, covariates: Option<&'a Covariates>) -> Result<Self> {
        if m.kind() != ElementKind::Float64 {
            return Err(Error::Config("standardization expects a float64 matrix".into()));
        }
        let rows: Vec<usize> = rows.map_or_else(|| (0..m.n_rows()).collect(), <[usize]>::to_vec);
        if let Some(c) = covariates {
            if c.values.nrows() != rows.len() {
                return Err(Error::Config("covariate rows do not match selected samples".into()));
            }
        }
        let identity_rows = rows.len() == m.n_rows() && rows.iter().enumerate().all(|(i, &r)| i == r);
        Ok(StandardizeJob {
            m,
            rows,
            identity_rows,
            covariates,
            moments: Vec::new(),
        })
    }

    fn n_cov(&self) -> usize {
        self.covariates.map_or(0, |c| c.names.len())
    }

    fn name(&self, k: usize) -> &str {
        match self.covariates {
            Some(c) if k < c.names.len() => &c.names[k],
            _ => &self.m.col_names()[k - self.n_cov()],
        }
    }

    fn read_block(&self, range: std::ops::Range<usize>) -> Result<Array2<f64>> {
        if self.identity_rows {
            self.m.read_col_block(range.start, range.len())
        } else {
            self.m.read_col_block_rows(range.start, range.len(), &self.rows)
        }
    }

    fn scan(&mut self) -> Result<()> {
        let mut moments = Vec::with_capacity(self.n_cov() + self.m.n_cols());
        if let Some(c) = self.covariates {
            for col in c.values.columns() {
                moments.push(column_moments(&col.to_vec()));
            }
        }
        for range in column_blocks(self.m.n_cols(), DEFAULT_BLOCK_WIDTH) {
            let block = self.read_block(range.clone())?;
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "{} contains non-finite values; impute before building a design",
                    self.m.path().display()
                )));
            }
            let part: Vec<_> = block
                .axis_iter(ndarray::Axis(1))
                .into_par_iter()
                .map(|col| column_moments(col.as_slice().expect("column-major block")))
                .collect();
            moments.extend(part);
            self.m.release(range.start, range.len());
        }
        self.moments = moments;
        Ok(())
    }

    fn kept(&self) -> Vec<usize> {
        (0..self.moments.len()).filter(|&k| self.moments[k].is_some()).collect()
    }

    fn kept_sources(&self) -> Vec<usize> {
        self.kept()
            .into_iter()
            .filter(|&k| k >= self.n_cov())
            .map(|k| k - self.n_cov())
            .collect()
    }

    fn centers(&self) -> Vec<f64> {
        self.moments.iter().flatten().map(|m| m.0).collect()
    }

    fn scales(&self) -> Vec<f64> {
        self.moments.iter().flatten().map(|m| m.1).collect()
    }

    fn dropped_names(&self) -> Vec<String> {
        (0..self.moments.len())
            .filter(|&k| self.moments[k].is_none())
            .map(|k| self.name(k).to_string())
            .collect()
    }

    /// Writes the standardized retained columns; returns the store and the
    /// number of retained covariate columns.
    fn write(&self, out: impl AsRef<Path>, overwrite: bool, row_ids: &[String]) -> Result<(FileMatrix, usize)> {
        let kept = self.kept();
        if kept.iter().all(|&k| k < self.n_cov()) {
            return Err(Error::data("every predictor column is constant".to_string()));
        }
        let row_ids = if row_ids.is_empty() {
            self.rows.iter().map(|&r| self.m.row_ids()[r].clone()).collect()
        } else {
            row_ids.to_vec()
        };
        let names = kept.iter().map(|&k| self.name(k).to_string()).collect();
        let mut dst = FileMatrix::create_named(out, ElementKind::Float64, row_ids, names, overwrite)?;
        let n_cov = self.n_cov();
        let standardize_col = |col: &mut [f64], (center, scale): (f64, f64)| {
            for v in col.iter_mut() {
                *v = (*v - center) / scale;
            }
        };

        let mut next_out = 0;
        if let Some(c) = self.covariates {
            for k in kept.iter().copied().filter(|&k| k < n_cov) {
                let mut col = c.values.column(k).to_vec();
                standardize_col(&mut col, self.moments[k].expect("kept"));
                dst.write_col(next_out, &col)?;
                next_out += 1;
            }
        }
        for range in column_blocks(self.m.n_cols(), DEFAULT_BLOCK_WIDTH) {
            let keep_here: Vec<usize> = range.clone().filter(|&j| self.moments[n_cov + j].is_some()).collect();
            if keep_here.is_empty() {
                continue;
            }
            let mut block = self.read_block(range.clone())?;
            block
                .axis_iter_mut(ndarray::Axis(1))
                .into_par_iter()
                .enumerate()
                .for_each(|(c, mut col)| {
                    if let Some(mom) = self.moments[n_cov + range.start + c] {
                        standardize_col(col.as_slice_mut().expect("column-major block"), mom);
                    }
                });
            let selected = block.select(
                ndarray::Axis(1),
                &keep_here.iter().map(|j| j - range.start).collect::<Vec<_>>(),
            );
            dst.write_col_block(next_out, selected.view())?;
            dst.release(next_out, selected.ncols());
            self.m.release(range.start, range.len());
            next_out += selected.ncols();
        }
        dst.flush()?;
        let n_cov_kept = kept.iter().filter(|&&k| k < n_cov).count();
        Ok((dst, n_cov_kept))
    }
}

#[derive(Debug)]
pub struct Design {
    /// Standardized `n x p` predictors, covariates first.
    pub x: FileMatrix,
    pub y: Vec<f64>,
    /// 0 for unpenalized covariates, 1 for penalized features.
    pub penalty_factor: Vec<f64>,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    pub dropped_features: Vec<String>,
    pub dropped_samples: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CovariateSpec {
    pub table: IdTable,
    pub id_col: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DesignOptions {
    pub id_col: String,
    pub outcome_col: String,
    pub covariates: Option<CovariateSpec>,
    pub overwrite: bool,
}

pub const DESIGN_FILE: &str = "design.bk";

impl Design {
    pub fn n(&self) -> usize {
        self.x.n_rows()
    }

    pub fn p(&self) -> usize {
        self.x.n_cols()
    }

    pub fn sample_ids(&self) -> &[String] {
        self.x.row_ids()
    }

    pub fn feature_names(&self) -> &[String] {
        self.x.col_names()
    }

    pub fn n_penalized(&self) -> usize {
        self.penalty_factor.iter().filter(|&&f| f > 0.0).count()
    }

    pub fn path(&self) -> &Path {
        self.x.path()
    }

    fn outcome_path(backing: &Path) -> PathBuf {
        backing.with_extension("outcome.txt")
    }

    fn dropped_path(backing: &Path) -> PathBuf {
        backing.with_extension("dropped.txt")
    }

    /// Writes the metadata sections and companion files next to `x`.
    pub fn persist(&mut self) -> Result<()> {
        let (centers, scales, pf) = (self.centers.clone(), self.scales.clone(), self.penalty_factor.clone());
        self.x.update_sidecar(|s| {
            s.set_numeric_section("centers", &centers);
            s.set_numeric_section("scales", &scales);
            s.set_numeric_section("penalty_factor", &pf);
        })?;
        let mut text = String::new();
        for (id, y) in self.sample_ids().iter().zip(&self.y) {
            let _ = writeln!(text, "{id}\t{y:?}");
        }
        let path = Self::outcome_path(self.x.path());
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let mut text = String::new();
        for f in &self.dropped_features {
            let _ = writeln!(text, "feature\t{f}");
        }
        for s in &self.dropped_samples {
            let _ = writeln!(text, "sample\t{s}");
        }
        let path = Self::dropped_path(self.x.path());
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.x.flush()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let x = FileMatrix::open(path)?;
        let section = |name: &str| -> Result<Vec<f64>> {
            x.sidecar().numeric_section(name)?.ok_or_else(|| Error::Corrupt {
                path: path.to_path_buf(),
                reason: format!("design sidecar has no {name} section"),
            })
        };
        let (centers, scales, penalty_factor) = (section("centers")?, section("scales")?, section("penalty_factor")?);

        let outcome_path = Self::outcome_path(path);
        let text = fs::read_to_string(&outcome_path).map_err(|e| Error::io(&outcome_path, e))?;
        let source = outcome_path.display().to_string();
        let mut y = Vec::with_capacity(x.n_rows());
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split('\t');
            let (Some(id), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::parse(&source, i + 1, "expected <id>\\t<value>"));
            };
            if x.row_ids().get(i).map(String::as_str) != Some(id) {
                return Err(Error::parse(&source, i + 1, format!("sample {id} is out of order")));
            }
            y.push(
                v.parse()
                    .map_err(|_| Error::parse(&source, i + 1, "outcome is not numeric"))?,
            );
        }
        if y.len() != x.n_rows() {
            return Err(Error::Corrupt {
                path: outcome_path,
                reason: format!("{} outcomes for {} samples", y.len(), x.n_rows()),
            });
        }

        let (mut dropped_features, mut dropped_samples) = (Vec::new(), Vec::new());
        if let Ok(text) = fs::read_to_string(Self::dropped_path(path)) {
            for line in text.lines() {
                match line.split_once('\t') {
                    Some(("feature", f)) => dropped_features.push(f.to_string()),
                    Some(("sample", s)) => dropped_samples.push(s.to_string()),
                    _ => {}
                }
            }
        }
        Ok(Design {
            x,
            y,
            penalty_factor,
            centers,
            scales,
            dropped_features,
            dropped_samples,
        })
    }

    /// Reads standardized columns `range` for the given rows (all rows when `None`).
    pub fn read_block(&self, range: std::ops::Range<usize>, rows: Option<&[usize]>) -> Result<Array2<f64>> {
        match rows {
            None => self.x.read_col_block(range.start, range.len()),
            Some(r) => self.x.read_col_block_rows(range.start, range.len(), r),
        }
    }

    /// Maps raw predictor values (columns in design order) onto the design scale.
    pub fn standardize_rows(&self, raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if raw.ncols() != self.p() {
            return Err(Error::data(format!(
                "expected {} columns, got {}",
                self.p(),
                raw.ncols()
            )));
        }
        let mut out = raw.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.centers[j]) / self.scales[j]);
        }
        Ok(out)
    }
}

/// `align_outcome -> add_unpenalized -> standardize`, persisted at `out`.
pub fn create_design(
    predictors: &FileMatrix,
    outcome: &IdTable,
    opts: &DesignOptions,
    out: impl AsRef<Path>,
) -> Result<Design> {
    let alignment = align_outcome(predictors.row_ids(), outcome, &opts.id_col, &opts.outcome_col)?;
    if !alignment.dropped.is_empty() {
        log::info!("{} samples without an outcome were dropped", alignment.dropped.len());
    }
    let sample_ids: Vec<String> = alignment
        .rows
        .iter()
        .map(|&r| predictors.row_ids()[r].clone())
        .collect();
    let covariates = opts
        .covariates
        .as_ref()
        .map(|spec| add_unpenalized(&sample_ids, &spec.table, &spec.id_col, &spec.columns))
        .transpose()?;

    let mut job = StandardizeJob::new(predictors, Some(&alignment.rows), covariates.as_ref())?;
    job.scan()?;
    let (x, n_cov_kept) = job.write(out, opts.overwrite, &sample_ids)?;
    let mut penalty_factor = vec![0.0; n_cov_kept];
    penalty_factor.resize(x.n_cols(), 1.0);

    let mut design = Design {
        x,
        y: alignment.y,
        penalty_factor,
        centers: job.centers(),
        scales: job.scales(),
        dropped_features: job.dropped_names(),
        dropped_samples: alignment.dropped,
    };
    design.persist()?;
    Ok(design)
}

/// Read access to a subset of design rows, optionally re-standardized with
/// moments computed from a (possibly different) set of training rows.
///
/// Columns that are constant over the training rows read as all-zero.
#[derive(Debug, Clone)]
pub struct DesignView<'a> {
    x: &'a FileMatrix,
    rows: Option<Vec<usize>>,
    transform: Option<(Vec<f64>, Vec<f64>)>,
    penalty_factor: &'a [f64],
}

impl<'a> DesignView<'a> {
    pub fn full(design: &'a Design) -> Self {
        DesignView {
            x: &design.x,
            rows: None,
            transform: None,
            penalty_factor: &design.penalty_factor,
        }
    }

    /// Rows of `design`, re-standardized using only those rows.
    pub fn restandardized(design: &'a Design, rows: Vec<usize>, block_width: usize) -> Result<Self> {
        let p = design.p();
        let mut centers = vec![0.0; p];
        let mut scales = vec![0.0; p];
        for range in column_blocks(p, block_width) {
            let block = design.read_block(range.clone(), Some(&rows))?;
            let moments: Vec<_> = block
                .axis_iter(ndarray::Axis(1))
                .into_par_iter()
                .map(|col| column_moments(col.as_slice().expect("column-major block")))
                .collect();
            for (k, m) in moments.into_iter().enumerate() {
                if let Some((c, s)) = m {
                    centers[range.start + k] = c;
                    scales[range.start + k] = s;
                }
            }
        }
        Ok(DesignView {
            x: &design.x,
            rows: Some(rows),
            transform: Some((centers, scales)),
            penalty_factor: &design.penalty_factor,
        })
    }

    /// Same columns and transform, different rows.
    pub fn with_rows(&self, rows: Vec<usize>) -> Self {
        DesignView {
            rows: Some(rows),
            ..self.clone()
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.as_ref().map_or(self.x.n_rows(), Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.x.n_cols()
    }

    pub fn rows(&self) -> Option<&[usize]> {
        self.rows.as_deref()
    }

    pub fn penalty_factor(&self) -> &[f64] {
        self.penalty_factor
    }

    /// Per-column (center, scale) applied on top of the design scale, if any.
    pub fn transform(&self) -> Option<(&[f64], &[f64])> {
        self.transform.as_ref().map(|(c, s)| (c.as_slice(), s.as_slice()))
    }

    /// Whether column `j` carries any information in this view.
    pub fn is_live(&self, j: usize) -> bool {
        self.transform.as_ref().is_none_or(|(_, s)| s[j] > 0.0)
    }

    /// Penalized columns that carry information.
    pub fn n_live_penalized(&self) -> usize {
        (0..self.n_cols())
            .filter(|&j| self.penalty_factor[j] > 0.0 && self.is_live(j))
            .count()
    }

    pub fn block(&self, range: std::ops::Range<usize>) -> Result<Array2<f64>> {
        let mut block = match &self.rows {
            None => self.x.read_col_block(range.start, range.len())?,
            Some(r) => self.x.read_col_block_rows(range.start, range.len(), r)?,
        };
        if let Some((centers, scales)) = &self.transform {
            for (k, mut col) in block.columns_mut().into_iter().enumerate() {
                let j = range.start + k;
                if scales[j] > 0.0 {
                    col.mapv_inplace(|v| (v - centers[j]) / scales[j]);
                } else {
                    col.fill(0.0);
                }
            }
        }
        Ok(block)
    }

    pub fn release(&self, range: std::ops::Range<usize>) {
        self.x.release(range.start, range.len());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn table(text: &str) -> IdTable {
        IdTable::parse(text.as_bytes(), Delimiter::Char(','), "t.csv").unwrap()
    }

    #[test]
    fn align_keeps_predictor_order() {
        let pids: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let a = align_outcome(&pids, &table("id,y\nc,3\na,1\n"), "id", "y").unwrap();
        assert_eq!(a.rows, [0, 2]);
        assert_eq!(a.y, [1.0, 3.0]);
        assert_eq!(a.dropped, ["b"]);
    }

    #[test]
    fn align_errors() {
        let pids = ids("s", 2);
        let err = align_outcome(&pids, &table("id,y\ns0,1\ns0,2\n"), "id", "y").unwrap_err();
        assert!(err.to_string().contains("duplicate id s0"), "{err}");
        assert!(align_outcome(&pids, &table("id,y\nq,1\n"), "id", "y").is_err());
        assert!(align_outcome(&pids, &table("id,y\ns0,1\n"), "id", "z").is_err());
        let a = align_outcome(&pids, &table("id,y\ns0,NA\ns1,2\n"), "id", "y").unwrap();
        assert_eq!(a.dropped, ["s0"]);
    }

    #[test]
    fn align_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pids = ids("id", 500);
        let mut shuffled: Vec<usize> = (0..500).collect();
        shuffled.shuffle(&mut rng);
        let with_outcome: Vec<usize> = shuffled[..460].to_vec();
        let values: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let out_ids: Vec<String> = with_outcome.iter().map(|&i| pids[i].clone()).collect();
        let out_vals: Vec<f64> = with_outcome.iter().map(|&i| values[i]).collect();
        let t = IdTable::from_pairs("id", "y", &out_ids, &out_vals);
        let a = align_outcome(&pids, &t, "id", "y").unwrap();

        let (mut rows, mut y) = (Vec::new(), Vec::new());
        for (r, pid) in pids.iter().enumerate() {
            for (oid, &v) in out_ids.iter().zip(&out_vals) {
                if oid == pid {
                    rows.push(r);
                    y.push(v);
                }
            }
        }
        assert_eq!(a.rows, rows);
        assert_eq!(a.y, y);
        assert_eq!(a.dropped.len(), 40);
    }

    #[test]
    fn covariates_lookup_and_missing_sample() {
        let t = table("id,sex,age\ns1,1,40\ns0,0,35\n");
        let c = add_unpenalized(&ids("s", 2), &t, "id", &["sex".into()]).unwrap();
        assert_eq!(c.values, array![[0.0], [1.0]]);
        let err = add_unpenalized(&ids("s", 3), &t, "id", &["sex".into()]).unwrap_err();
        assert!(err.to_string().contains("s2"), "{err}");
    }

    fn store(dir: &Path, name: &str, x: &Array2<f64>, rows: Vec<String>) -> FileMatrix {
        let names = (0..x.ncols()).map(|j| format!("f{j}")).collect();
        FileMatrix::from_array(dir.join(name), x.view(), rows, names).unwrap()
    }

    #[test]
    fn two_point_column_and_constant_column() {
        let dir = tempfile::tempdir().unwrap();
        let m = store(dir.path(), "x.bk", &array![[1.0, 5.0], [3.0, 5.0]], ids("s", 2));
        let s = standardize(&m, None, dir.path().join("s.bk"), false).unwrap();
        assert_eq!(s.centers, [2.0]);
        assert_eq!(s.scales, [1.0]);
        assert_eq!(s.dropped, ["f1"]);
        assert_eq!(s.kept, [0]);
        assert_eq!(&*s.matrix.col_f64(0).unwrap(), &[-1.0, 1.0]);
    }

    #[test]
    fn standardization_reconstructs_input() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((50, 20), |_| rng.random_range(-3.0..7.0));
        let m = store(dir.path(), "x.bk", &x, ids("s", 50));
        let s = standardize(&m, None, dir.path().join("s.bk"), false).unwrap();
        let z = s.matrix.read_col_block(0, 20).unwrap();
        for j in 0..20 {
            let col = z.column(j);
            assert!(col.mean().unwrap().abs() < 1e-12);
            assert!((col.mapv(|v| v * v).mean().unwrap() - 1.0).abs() < 1e-12);
            for i in 0..50 {
                let back = s.centers[j] + s.scales[j] * z[[i, j]];
                assert!((back - x[[i, j]]).abs() <= 1e-12 * x[[i, j]].abs().max(1.0));
            }
        }
    }

    fn opts() -> DesignOptions {
        DesignOptions {
            id_col: "id".into(),
            outcome_col: "y".into(),
            covariates: None,
            overwrite: false,
        }
    }

    #[test]
    fn design_is_permutation_invariant_and_persists() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((30, 6), |(_, j)| if j == 3 { 1.0 } else { rng.random_range(0.0..2.0) });
        let pids = ids("s", 30);
        let m = store(dir.path(), "x.bk", &x, pids.clone());
        let yv: Vec<f64> = (0..30).map(|i| i as f64 * 0.5).collect();
        let sorted = IdTable::from_pairs("id", "y", &pids, &yv);
        let mut perm: Vec<usize> = (0..30).collect();
        perm.shuffle(&mut rng);
        let shuffled = IdTable {
            rows: perm.iter().map(|&i| sorted.rows[i].clone()).collect(),
            ..sorted.clone()
        };
        let a = create_design(&m, &sorted, &opts(), dir.path().join("a.bk")).unwrap();
        let b = create_design(&m, &shuffled, &opts(), dir.path().join("b.bk")).unwrap();
        assert_eq!(a.dropped_features, ["f3"]);
        assert_eq!(a.p(), 5);
        let (za, zb) = (a.x.read_col_block(0, 5).unwrap(), b.x.read_col_block(0, 5).unwrap());
        assert!(za.iter().zip(zb.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
        assert_eq!(a.y, b.y);

        let back = Design::open(a.path()).unwrap();
        assert_eq!(back.y, a.y);
        assert_eq!(back.centers, a.centers);
        assert_eq!(back.scales, a.scales);
        assert_eq!(back.penalty_factor, vec![1.0; 5]);
        assert_eq!(back.dropped_features, ["f3"]);
    }

    #[test]
    fn restandardized_view_uses_only_selected_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((12, 4), |_| rng.random_range(-1.0..1.0));
        let pids = ids("s", 12);
        let m = store(dir.path(), "x.bk", &x, pids.clone());
        let yv = vec![0.0; 12];
        let d = create_design(
            &m,
            &IdTable::from_pairs("id", "y", &pids, &yv),
            &opts(),
            dir.path().join("d.bk"),
        )
        .unwrap();
        let train: Vec<usize> = (0..8).collect();
        let view = DesignView::restandardized(&d, train.clone(), 3).unwrap();
        let b = view.block(0..4).unwrap();
        assert_eq!(b.nrows(), 8);
        for col in b.columns() {
            assert!(col.mean().unwrap().abs() < 1e-12);
            assert!((col.mapv(|v| v * v).mean().unwrap() - 1.0).abs() < 1e-12);
        }
        let held = view.with_rows(vec![8, 9, 10, 11]);
        let h = held.block(1..3).unwrap();
        let (c, s) = view.transform().unwrap();
        let raw = d.read_block(1..3, Some(&[9])).unwrap();
        assert_eq!(h[[1, 0]], (raw[[0, 0]] - c[1]) / s[1]);
        assert_eq!(view.n_live_penalized(), 4);
    }

    #[test]
    fn covariates_come_first_and_are_unpenalized() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40;
        let x = Array2::from_shape_fn((n, 100), |_| rng.random_range(0..3) as f64);
        let pids = ids("s", n);
        let m = store(dir.path(), "x.bk", &x, pids.clone());
        let yv: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let mut cov_text = String::from("id,age,sex\n");
        for (i, id) in pids.iter().enumerate().rev() {
            cov_text.push_str(&format!("{id},{},{}\n", 30 + i, i % 2));
        }
        let spec = CovariateSpec {
            table: table(&cov_text),
            id_col: "id".into(),
            columns: vec!["age".into(), "sex".into()],
        };
        let o = DesignOptions {
            covariates: Some(spec),
            ..opts()
        };
        let d = create_design(
            &m,
            &IdTable::from_pairs("id", "y", &pids, &yv),
            &o,
            dir.path().join("d.bk"),
        )
        .unwrap();
        assert_eq!(&d.feature_names()[..3], ["age", "sex", "f0"]);
        assert_eq!(d.p(), 102);
        assert_eq!(&d.penalty_factor[..3], [0.0, 0.0, 1.0]);
        assert_eq!(d.n_penalized(), 100);
        let sex = d.x.col_f64(1).unwrap();
        assert_eq!(sex[0], -1.0);
        assert_eq!(sex[1], 1.0);
        let f0 = d.x.col_f64(2).unwrap();
        let (c, s) = column_moments(&x.column(0).to_vec()).unwrap();
        assert!((f0[5] - (x[[5, 0]] - c) / s).abs() < 1e-15);
    }
}
