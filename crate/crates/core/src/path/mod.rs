//! Penalized regression paths on the rotated problem.

mod cd;
mod io;
mod penalty;
mod sparse;

use std::path::Path;

pub use cd::{check_lambdas, dot, fit_default_path, fit_path, lambda_grid, Columns, Problem, RawPath};
pub use io::{parse_beta_sparse, parse_fitinfo, parse_lambda, read_fit, write_fit, FitInfo};
pub use penalty::{mcp_update, scad_update, soft_threshold, Penalty};
pub use sparse::SparseColumns;

use crate::decomp::{compute_grm, eigen_sym, estimate_eta, rotate, Decomposition};
use crate::design::{Design, DesignView};
use crate::error::{Error, Result};
use crate::resources::Resources;
use crate::timing::StageTimer;

#[derive(Debug, Clone, PartialEq)]
pub struct PathOptions {
    pub penalty: Penalty,
    /// Concavity; the penalty's default when `None`.
    pub gamma: Option<f64>,
    pub nlambda: usize,
    /// Smallest over largest penalty; 0.001 when n > p, else 0.05.
    pub lambda_min_ratio: Option<f64>,
    /// Convergence threshold on the largest coefficient change per sweep.
    pub tol: f64,
    /// Sweep limit per penalty value.
    pub max_iter: usize,
    /// Explicit decreasing penalty sequence, replacing the computed grid.
    pub lambda: Option<Vec<f64>>,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            penalty: Penalty::Lasso,
            gamma: None,
            nlambda: 100,
            lambda_min_ratio: None,
            tol: 1e-7,
            max_iter: 10_000,
            lambda: None,
        }
    }
}

impl PathOptions {
    pub fn resolved_gamma(&self) -> Result<f64> {
        let gamma = self.gamma.or(self.penalty.default_gamma()).unwrap_or(0.0);
        self.penalty.validate_gamma(gamma)?;
        Ok(gamma)
    }

    pub fn validate(&self) -> Result<()> {
        self.resolved_gamma()?;
        if self.nlambda == 0 {
            return Err(Error::Config("nlambda must be at least 1".into()));
        }
        if let Some(r) = self.lambda_min_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!("lambda_min_ratio {r} must lie in (0, 1)")));
            }
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("tol must be positive and max_iter at least 1".into()));
        }
        if let Some(l) = &self.lambda {
            cd::check_lambdas(l)?;
        }
        Ok(())
    }
}

/// How the rotation is obtained.
#[derive(Debug, Clone, Default)]
pub struct PrepOptions {
    /// Use this variance ratio instead of estimating it.
    pub eta: Option<f64>,
    /// Reuse a saved decomposition instead of recomputing it.
    pub decomposition: Option<Decomposition>,
}

/// A path fitted on one view of a design, on that view's standardized scale.
#[derive(Debug, Clone)]
pub struct ViewFit {
    pub decomp: Decomposition,
    pub lambda: Vec<f64>,
    /// `(p + 1) x L` on the rotated, rescaled column scale; last row is the intercept.
    pub beta_rotated: SparseColumns,
    pub rot_scales: Vec<f64>,
    /// `p x L` on the view's standardized scale.
    pub beta_std: SparseColumns,
    pub intercept_std: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub loss: Vec<f64>,
    pub timings: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitPath {
    pub lambda: Vec<f64>,
    /// Present only for a fit made in this process.
    pub beta_rotated: Option<SparseColumns>,
    /// `p x L`, original data scale.
    pub beta: SparseColumns,
    pub intercepts: Vec<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub loss: Vec<f64>,
    pub eta: f64,
    pub penalty: Penalty,
    pub gamma: Option<f64>,
    pub n: usize,
    pub feature_names: Vec<String>,
    pub penalty_factor: Vec<f64>,
    pub timings: Vec<(String, f64)>,
}

impl FitPath {
    pub fn n_lambda(&self) -> usize {
        self.lambda.len()
    }

    pub fn p(&self) -> usize {
        self.feature_names.len()
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.n_lambda() {
            return Err(Error::Config(format!(
                "lambda index {} is out of range 1..={}",
                k + 1,
                self.n_lambda()
            )));
        }
        Ok(())
    }

    /// Penalized features with a nonzero coefficient at index `k`.
    pub fn selected(&self, k: usize) -> Vec<usize> {
        self.beta
            .column(k)
            .map(|(j, _)| j)
            .filter(|&j| self.penalty_factor[j] > 0.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Untransformed {
    pub beta_std: SparseColumns,
    pub intercept_std: Vec<f64>,
    pub beta: SparseColumns,
    pub intercepts: Vec<f64>,
}

/// Maps rotated-scale coefficients (intercept last) back to the standardized
/// and original data scales.
pub fn untransform(beta_rotated: &SparseColumns, rot_scales: &[f64], centers: &[f64], scales: &[f64]) -> Untransformed {
    let p = beta_rotated.n_rows() - 1;
    assert_eq!(rot_scales.len(), p + 1);
    assert!(centers.len() == p && scales.len() == p);
    let mut beta_std = SparseColumns::new(p);
    let mut beta = SparseColumns::new(p);
    let mut intercept_std = Vec::with_capacity(beta_rotated.n_cols());
    let mut intercepts = Vec::with_capacity(beta_rotated.n_cols());
    for k in 0..beta_rotated.n_cols() {
        let mut a = 0.0;
        let mut std_col = Vec::new();
        for (j, v) in beta_rotated.column(k) {
            if rot_scales[j] == 0.0 {
                continue;
            }
            let b = v / rot_scales[j];
            if j == p {
                a = b;
            } else {
                std_col.push((j, b));
            }
        }
        let mut shift = 0.0;
        let orig: Vec<(usize, f64)> = std_col
            .iter()
            .map(|&(j, b)| {
                shift += b * centers[j] / scales[j];
                (j, b / scales[j])
            })
            .collect();
        beta_std.push_column(std_col);
        beta.push_column(orig);
        intercept_std.push(a);
        intercepts.push(a - shift);
    }
    Untransformed {
        beta_std,
        intercept_std,
        beta,
        intercepts,
    }
}

/// Prep and fit on one view: relatedness, eigendecomposition, variance
/// ratio, rotation into scratch storage under `scratch`, then the path.
pub fn fit_view(
    view: &DesignView<'_>,
    y: &[f64],
    opts: &PathOptions,
    prep: PrepOptions,
    lambdas: Option<&[f64]>,
    res: &Resources,
    scratch: &Path,
) -> Result<ViewFit> {
    opts.validate()?;
    let n = view.n_rows();
    if y.len() != n {
        return Err(Error::Config(format!("{} outcomes for {n} rows", y.len())));
    }
    let mut timer = StageTimer::new();
    let decomp = match prep.decomposition {
        Some(d) => {
            if d.n() != n {
                return Err(Error::Config(format!(
                    "saved decomposition has size {}, design has {n} rows",
                    d.n()
                )));
            }
            match prep.eta {
                Some(eta) => d.with_eta(eta),
                None => d,
            }
        }
        None => {
            let (k, p_pen) = compute_grm(view, res)?;
            timer.lap("relatedness");
            let (u, d) = eigen_sym(&k)?;
            drop(k);
            timer.lap("eigen");
            let eta = match prep.eta {
                Some(e) => e,
                None => estimate_eta(d.as_slice().expect("contiguous"), &u, y),
            };
            timer.lap("eta");
            Decomposition::new(u, d, eta, p_pen)
        }
    };
    if !(0.0..1.0).contains(&decomp.eta) {
        return Err(Error::Config(format!(
            "variance ratio {} must lie in [0, 1)",
            decomp.eta
        )));
    }

    let dir = tempfile::Builder::new()
        .prefix("plmmkit-")
        .tempdir_in(scratch)
        .map_err(|e| Error::io(scratch, e))?;
    let rp = rotate(view, y, &decomp, dir.path().join("rotated.bk"), res)?;
    timer.lap("rotate");

    let live: Vec<bool> = rp.rot_scales.iter().map(|&s| s > 0.0).collect();
    let problem = Problem {
        x: &rp.xr,
        y: &rp.yr,
        penalty_factor: &rp.penalty_factor,
        live: &live,
        block_width: res.block_width_for(n),
    };
    let grid;
    let lambdas = match lambdas.or(opts.lambda.as_deref()) {
        Some(l) => l,
        None => {
            grid = lambda_grid(&problem, opts)?;
            &grid
        }
    };
    let raw = fit_path(&problem, opts, lambdas)?;
    let rot_scales = rp.rot_scales.clone();
    drop(rp);
    drop(dir);
    let p = view.n_cols();
    let un = untransform(&raw.beta, &rot_scales, &vec![0.0; p], &vec![1.0; p]);
    timer.lap("path");
    Ok(ViewFit {
        decomp,
        lambda: raw.lambda,
        beta_rotated: raw.beta,
        rot_scales,
        beta_std: un.beta_std,
        intercept_std: un.intercept_std,
        iterations: raw.iterations,
        converged: raw.converged,
        loss: raw.loss,
        timings: timer.into_stages(),
    })
}

/// Fits the full design and reports coefficients on the original scale.
pub fn plmm(
    design: &Design,
    opts: &PathOptions,
    prep: PrepOptions,
    res: &Resources,
    scratch: &Path,
) -> Result<(FitPath, ViewFit)> {
    let view = DesignView::full(design);
    let vf = fit_view(&view, &design.y, opts, prep, None, res, scratch)?;
    let mut timer = StageTimer::new();
    let un = untransform(&vf.beta_rotated, &vf.rot_scales, &design.centers, &design.scales);
    timer.lap("format");
    let mut timings = vf.timings.clone();
    timings.extend(timer.into_stages());
    let fit = FitPath {
        lambda: vf.lambda.clone(),
        beta_rotated: Some(vf.beta_rotated.clone()),
        beta: un.beta,
        intercepts: un.intercepts,
        iterations: vf.iterations.clone(),
        converged: vf.converged.clone(),
        loss: vf.loss.clone(),
        eta: vf.decomp.eta,
        penalty: opts.penalty,
        gamma: opts.penalty.default_gamma().map(|g| opts.gamma.unwrap_or(g)),
        n: design.n(),
        feature_names: design.feature_names().to_vec(),
        penalty_factor: design.penalty_factor.clone(),
        timings,
    };
    Ok((fit, vf))
}
