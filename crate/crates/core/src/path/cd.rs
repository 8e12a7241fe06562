//! Pathwise coordinate descent over columns scaled to mean square one.

use std::collections::HashMap;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use ndarray::Array2;
use rayon::prelude::*;

use super::penalty::Penalty;
use super::sparse::SparseColumns;
use super::PathOptions;
use crate::error::{Error, Result};
use crate::store::{column_blocks, FileMatrix};

/// Column access used by the solver.
pub trait Columns: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn fetch(&self, j: usize) -> Result<Vec<f64>>;
    /// `out[k] = x[first + k] . v`
    fn cross(&self, first: usize, v: &[f64], out: &mut [f64]) -> Result<()>;
}

impl Columns for FileMatrix {
    fn n_rows(&self) -> usize {
        FileMatrix::n_rows(self)
    }

    fn n_cols(&self) -> usize {
        FileMatrix::n_cols(self)
    }

    fn fetch(&self, j: usize) -> Result<Vec<f64>> {
        let col = self.col_f64(j)?.into_owned();
        self.release(j, 1);
        Ok(col)
    }

    fn cross(&self, first: usize, v: &[f64], out: &mut [f64]) -> Result<()> {
        out.par_iter_mut().enumerate().try_for_each(|(k, o)| -> Result<()> {
            *o = dot(&self.col_f64(first + k)?, v);
            Ok(())
        })?;
        self.release(first, out.len());
        Ok(())
    }
}

impl Columns for Array2<f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }

    fn n_cols(&self) -> usize {
        self.ncols()
    }

    fn fetch(&self, j: usize) -> Result<Vec<f64>> {
        Ok(self.column(j).to_vec())
    }

    fn cross(&self, first: usize, v: &[f64], out: &mut [f64]) -> Result<()> {
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            let col = self.column(first + k);
            *o = match col.as_slice() {
                Some(c) => dot(c, v),
                None => col.iter().zip(v).map(|(a, b)| a * b).sum(),
            };
        });
        Ok(())
    }
}

/// Dot product with a fixed summation order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// A regression problem `y ~ X beta` with per-column penalty weights.
/// Columns flagged dead are never fitted.
pub struct Problem<'a> {
    pub x: &'a dyn Columns,
    pub y: &'a [f64],
    pub penalty_factor: &'a [f64],
    pub live: &'a [bool],
    /// Columns per gradient block.
    pub block_width: usize,
}

impl Problem<'_> {
    fn check(&self) -> Result<()> {
        let (n, p) = (self.x.n_rows(), self.x.n_cols());
        if self.y.len() != n || self.penalty_factor.len() != p || self.live.len() != p {
            return Err(Error::Config(format!(
                "problem dimensions disagree: {n}x{p} design, {} outcomes, {} penalty factors, {} live flags",
                self.y.len(),
                self.penalty_factor.len(),
                self.live.len()
            )));
        }
        if self.penalty_factor.iter().any(|&f| !(f >= 0.0 && f.is_finite())) {
            return Err(Error::Config("penalty factors must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn penalized(&self, j: usize) -> bool {
        self.live[j] && self.penalty_factor[j] > 0.0
    }

    fn unpenalized(&self) -> Vec<usize> {
        (0..self.live.len())
            .filter(|&j| self.live[j] && self.penalty_factor[j] == 0.0)
            .collect()
    }

    /// `X^T v / n`
    fn gradient(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.y.len() as f64;
        for range in column_blocks(out.len(), self.block_width.max(1)) {
            self.x.cross(range.start, v, &mut out[range.clone()])?;
        }
        out.iter_mut().for_each(|g| *g /= n);
        Ok(())
    }
}

/// Least-squares fit on the unpenalized columns alone.
struct Start {
    beta: Vec<f64>,
    residual: Vec<f64>,
    gradient: Vec<f64>,
    lambda_max: f64,
}

fn unpenalized_start(problem: &Problem<'_>) -> Result<Start> {
    problem.check()?;
    let p = problem.x.n_cols();
    let unpen = problem.unpenalized();
    let cols: Vec<Vec<f64>> = unpen.iter().map(|&j| problem.x.fetch(j)).collect::<Result<_>>()?;
    let mut beta = vec![0.0; p];
    let mut residual = problem.y.to_vec();
    if !cols.is_empty() {
        let q = cols.len();
        let gram = Mat::<f64>::from_fn(q, q, |a, b| dot(&cols[a], &cols[b]));
        let mut rhs = Mat::<f64>::from_fn(q, 1, |a, _| dot(&cols[a], problem.y));
        let llt = gram
            .llt(Side::Lower)
            .map_err(|_| Error::data("unpenalized columns are collinear"))?;
        llt.solve_in_place(rhs.as_mut());
        for (k, &j) in unpen.iter().enumerate() {
            beta[j] = rhs[(k, 0)];
            for (r, x) in residual.iter_mut().zip(&cols[k]) {
                *r -= rhs[(k, 0)] * x;
            }
        }
    }
    let mut gradient = vec![0.0; p];
    problem.gradient(&residual, &mut gradient)?;
    let lambda_max = (0..p)
        .filter(|&j| problem.penalized(j))
        .map(|j| gradient[j].abs() / problem.penalty_factor[j])
        .fold(0.0, f64::max);
    Ok(Start {
        beta,
        residual,
        gradient,
        lambda_max,
    })
}

/// Log-spaced grid from the smallest penalty that zeroes every penalized
/// coefficient down to `lambda_min_ratio` times that value.
pub fn lambda_grid(problem: &Problem<'_>, opts: &PathOptions) -> Result<Vec<f64>> {
    let start = unpenalized_start(problem)?;
    Ok(grid_from(&start, problem, opts))
}

fn grid_from(start: &Start, problem: &Problem<'_>, opts: &PathOptions) -> Vec<f64> {
    let n = problem.y.len();
    let rms = (problem.y.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if !(start.lambda_max > 1e-10 * rms) {
        log::warn!(
            "outcome carries no signal along any penalized column (lambda_max = {:e}); using a single-value grid",
            start.lambda_max
        );
        return vec![start.lambda_max.max(0.0)];
    }
    let p_pen = (0..problem.live.len()).filter(|&j| problem.penalized(j)).count();
    let ratio = opts.lambda_min_ratio.unwrap_or(if n > p_pen { 0.001 } else { 0.05 });
    let l = opts.nlambda;
    if l == 1 {
        return vec![start.lambda_max];
    }
    let (hi, lo) = (start.lambda_max.ln(), (start.lambda_max * ratio).ln());
    (0..l)
        .map(|k| {
            if k == 0 {
                start.lambda_max
            } else {
                (hi + (lo - hi) * k as f64 / (l - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawPath {
    pub lambda: Vec<f64>,
    /// `p x L`, on the problem's column scale.
    pub beta: SparseColumns,
    /// Coordinate sweeps used at each penalty.
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Residual sum of squares at each penalty.
    pub loss: Vec<f64>,
}

struct Solver<'a, 'p> {
    problem: &'a Problem<'p>,
    penalty: Penalty,
    gamma: f64,
    tol: f64,
    max_iter: usize,
    beta: Vec<f64>,
    r: Vec<f64>,
    grad: Vec<f64>,
    cache: HashMap<usize, Vec<f64>>,
    strong: Vec<usize>,
}

impl Solver<'_, '_> {
    fn lam_j(&self, lam: f64, j: usize) -> f64 {
        lam * self.problem.penalty_factor[j]
    }

    fn load(&mut self, cols: &[usize]) -> Result<()> {
        for &j in cols {
            if !self.cache.contains_key(&j) {
                let c = self.problem.x.fetch(j)?;
                self.cache.insert(j, c);
            }
        }
        Ok(())
    }

    /// One cyclic pass over `cols`; returns the largest coefficient change.
    fn sweep(&mut self, cols: &[usize], lam: f64) -> f64 {
        let n = self.r.len() as f64;
        let mut max_delta = 0.0f64;
        for &j in cols {
            let x = &self.cache[&j];
            let z = dot(x, &self.r) / n + self.beta[j];
            let pf = self.problem.penalty_factor[j];
            let new = if pf == 0.0 {
                z
            } else {
                self.penalty.threshold(z, lam * pf, self.gamma)
            };
            let delta = new - self.beta[j];
            if delta != 0.0 {
                for (r, xi) in self.r.iter_mut().zip(x) {
                    *r -= delta * xi;
                }
                self.beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }

    /// Coordinate descent restricted to the strong set: full sweeps
    /// alternating with sweeps over the currently nonzero coordinates.
    fn descend(&mut self, lam: f64, iters: &mut usize) -> bool {
        let strong = std::mem::take(&mut self.strong);
        let converged = loop {
            if *iters >= self.max_iter {
                break false;
            }
            *iters += 1;
            if self.sweep(&strong, lam) < self.tol {
                break true;
            }
            let active: Vec<usize> = strong
                .iter()
                .copied()
                .filter(|&j| self.beta[j] != 0.0 || self.problem.penalty_factor[j] == 0.0)
                .collect();
            loop {
                if *iters >= self.max_iter {
                    break;
                }
                *iters += 1;
                if self.sweep(&active, lam) < self.tol {
                    break;
                }
            }
        };
        self.strong = strong;
        converged
    }

    fn solve(&mut self, lam: f64, lam_prev: f64) -> Result<(usize, bool)> {
        let p = self.beta.len();
        let cutoff = 2.0 * lam - lam_prev;
        self.strong = (0..p)
            .filter(|&j| {
                self.problem.live[j]
                    && (self.problem.penalty_factor[j] == 0.0
                        || self.beta[j] != 0.0
                        || self.grad[j].abs() >= cutoff * self.problem.penalty_factor[j])
            })
            .collect();
        let keep: std::collections::HashSet<usize> = self.strong.iter().copied().collect();
        self.cache.retain(|j, _| keep.contains(j));

        let mut iters = 0;
        loop {
            let strong = self.strong.clone();
            self.load(&strong)?;
            let converged = self.descend(lam, &mut iters);
            self.problem.gradient(&self.r, &mut self.grad)?;
            if !converged {
                return Ok((iters, false));
            }
            let mut in_strong = vec![false; p];
            for &j in &self.strong {
                in_strong[j] = true;
            }
            let violators: Vec<usize> = (0..p)
                .filter(|&j| !in_strong[j] && self.problem.penalized(j) && self.grad[j].abs() > self.lam_j(lam, j))
                .collect();
            if violators.is_empty() {
                return Ok((iters, true));
            }
            log::debug!(
                "lambda {lam:e}: {} KKT violations outside the strong set",
                violators.len()
            );
            self.strong.extend(violators);
            self.strong.sort_unstable();
        }
    }
}

/// Fits the penalized path at each value of `lambdas` (decreasing), warm
/// starting from the unpenalized least-squares fit.
pub fn fit_path(problem: &Problem<'_>, opts: &PathOptions, lambdas: &[f64]) -> Result<RawPath> {
    let gamma = opts.resolved_gamma()?;
    check_lambdas(lambdas)?;
    let start = unpenalized_start(problem)?;
    let lam_first = start.lambda_max.max(lambdas[0]);
    let p = problem.x.n_cols();
    let mut solver = Solver {
        problem,
        penalty: opts.penalty,
        gamma,
        tol: opts.tol,
        max_iter: opts.max_iter,
        beta: start.beta,
        r: start.residual,
        grad: start.gradient,
        cache: HashMap::new(),
        strong: Vec::new(),
    };
    let mut out = RawPath {
        lambda: lambdas.to_vec(),
        beta: SparseColumns::new(p),
        iterations: Vec::with_capacity(lambdas.len()),
        converged: Vec::with_capacity(lambdas.len()),
        loss: Vec::with_capacity(lambdas.len()),
    };
    let mut lam_prev = lam_first;
    for (k, &lam) in lambdas.iter().enumerate() {
        let (iters, converged) = solver.solve(lam, lam_prev)?;
        if !converged {
            log::warn!(
                "lambda index {} ({lam:e}) reached the iteration limit without converging",
                k + 1
            );
        }
        out.beta.push_dense(&solver.beta);
        out.iterations.push(iters);
        out.converged.push(converged);
        out.loss.push(dot(&solver.r, &solver.r));
        lam_prev = lam;
    }
    Ok(out)
}

/// Computes the default grid for `problem` and fits along it.
pub fn fit_default_path(problem: &Problem<'_>, opts: &PathOptions) -> Result<RawPath> {
    match &opts.lambda {
        Some(l) => fit_path(problem, opts, l),
        None => {
            let grid = lambda_grid(problem, opts)?;
            fit_path(problem, opts, &grid)
        }
    }
}

pub fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda sequence".into()));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "lambda sequence must be non-negative and strictly decreasing".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, ShapeBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Random design with unit mean-square columns and a trailing column of ones.
    fn random_problem(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::from_shape_fn((n, p + 1).f(), |_| rng.sample::<f64, _>(StandardNormal));
        for mut col in x.columns_mut() {
            let ms = col.mapv(|v| v * v).mean().unwrap();
            col.mapv_inplace(|v| v / ms.sqrt());
        }
        x.column_mut(p).fill(1.0);
        let beta: Array1<f64> = (0..=p).map(|j| if j < 3 { 1.5 - j as f64 } else { 0.0 }).collect();
        let y = x.dot(&beta) + Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal) + 2.0);
        let mut pf = vec![1.0; p + 1];
        pf[p] = 0.0;
        (x, y.to_vec(), pf)
    }

    fn problem<'a>(x: &'a Array2<f64>, y: &'a [f64], pf: &'a [f64], live: &'a [bool]) -> Problem<'a> {
        Problem {
            x,
            y,
            penalty_factor: pf,
            live,
            block_width: 7,
        }
    }

    /// Accelerated proximal gradient on the same objective, as an independent reference.
    fn proximal_lasso(x: &Array2<f64>, y: &[f64], pf: &[f64], lam: f64) -> Vec<f64> {
        let n = x.nrows() as f64;
        let y = Array1::from(y.to_vec());
        let xtx = x.t().dot(x) / n;
        let lip = crate::decomp::eigen_sym(&xtx).unwrap().1[0];
        let step = 1.0 / lip;
        let p = x.ncols();
        let mut b = Array1::<f64>::zeros(p);
        let mut z = b.clone();
        let mut t = 1.0f64;
        for _ in 0..200_000 {
            let grad = x.t().dot(&(x.dot(&z) - &y)) / n;
            let mut next = &z - &(grad * step);
            for j in 0..p {
                next[j] = crate::path::soft_threshold(next[j], step * lam * pf[j]);
            }
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let change = (&next - &b).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            z = &next + &((&next - &b) * ((t - 1.0) / t_next));
            b = next;
            t = t_next;
            if change < 1e-13 {
                break;
            }
        }
        b.to_vec()
    }

    #[test]
    fn lambda_max_formula() {
        let x = ndarray::array![[1.0, 1.0], [-1.0, 1.0], [1.0, 1.0], [-1.0, 1.0]];
        let y = vec![0.8, -0.8, 0.8, -0.8];
        let pf = vec![1.0, 0.0];
        let live = vec![true; 2];
        let grid = lambda_grid(&problem(&x, &y, &pf, &live), &PathOptions::default()).unwrap();
        assert!((grid[0] - 0.8).abs() < 1e-15);
        assert_eq!(grid.len(), 100);
        assert!((grid[99] / grid[0] - 0.001).abs() < 1e-12);
    }

    #[test]
    fn degenerate_grid_has_one_value() {
        let x = ndarray::array![[1.0, 1.0], [-1.0, 1.0]];
        let y = vec![3.0, 3.0];
        let pf = vec![1.0, 0.0];
        let live = vec![true; 2];
        let pr = problem(&x, &y, &pf, &live);
        let grid = lambda_grid(&pr, &PathOptions::default()).unwrap();
        assert_eq!(grid.len(), 1);
        let fit = fit_path(&pr, &PathOptions::default(), &grid).unwrap();
        assert_eq!(fit.beta.get(0, 0), 0.0);
        assert!((fit.beta.get(1, 0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_design_closed_form() {
        // Hadamard columns: X^T X / n = I
        let h = ndarray::array![
            [1.0, 1.0, 1.0, 1.0],
            [1.0, -1.0, 1.0, -1.0],
            [1.0, 1.0, -1.0, -1.0],
            [1.0, -1.0, -1.0, 1.0]
        ];
        let y = vec![2.0, -1.0, 0.5, 3.0];
        let pf = vec![1.0; 4];
        let live = vec![true; 4];
        let pr = problem(&h, &y, &pf, &live);
        let lams = [0.9, 0.4, 0.1];
        let fit = fit_path(&pr, &PathOptions::default(), &lams).unwrap();
        for (k, &lam) in lams.iter().enumerate() {
            for j in 0..4 {
                let z: f64 = (0..4).map(|i| h[[i, j]] * y[i]).sum::<f64>() / 4.0;
                let expect = crate::path::soft_threshold(z, lam);
                assert!((fit.beta.get(j, k) - expect).abs() < 1e-12, "j={j} lam={lam}");
            }
        }
    }

    #[test]
    fn matches_proximal_reference() {
        let (x, y, pf) = random_problem(30, 10, 7);
        let live = vec![true; 11];
        let pr = problem(&x, &y, &pf, &live);
        let grid = lambda_grid(&pr, &PathOptions::default()).unwrap();
        let lam = grid[0] * 0.2;
        let fit = fit_path(&pr, &PathOptions::default(), &[lam]).unwrap();
        let reference = proximal_lasso(&x, &y, &pf, lam);
        for (j, r) in reference.iter().enumerate() {
            assert!((fit.beta.get(j, 0) - r).abs() < 1e-5, "j={j}");
        }
    }

    #[test]
    fn first_lambda_has_empty_active_set() {
        for seed in 0..5 {
            let (x, y, pf) = random_problem(40, 25, seed);
            let live = vec![true; 26];
            let pr = problem(&x, &y, &pf, &live);
            let grid = lambda_grid(&pr, &PathOptions::default()).unwrap();
            let fit = fit_path(&pr, &PathOptions::default(), &[grid[0] * (1.0 + 1e-6), grid[0]]).unwrap();
            for k in 0..2 {
                assert!((0..25).all(|j| fit.beta.get(j, k) == 0.0));
            }
        }
    }

    fn objective(x: &Array2<f64>, y: &[f64], pf: &[f64], beta: &[f64], pen: Penalty, lam: f64, gamma: f64) -> f64 {
        let r = Array1::from(y.to_vec()) - x.dot(&Array1::from(beta.to_vec()));
        let n = y.len() as f64;
        r.dot(&r) / (2.0 * n)
            + beta
                .iter()
                .zip(pf)
                .map(|(b, f)| pen.value(*b, lam * f, gamma))
                .sum::<f64>()
    }

    #[test]
    fn kkt_and_cold_restart_agree() {
        for pen in [Penalty::Lasso, Penalty::Mcp, Penalty::Scad] {
            let (x, y, pf) = random_problem(50, 80, 11);
            let live = vec![true; 81];
            let pr = problem(&x, &y, &pf, &live);
            let opts = PathOptions {
                penalty: pen,
                nlambda: 30,
                ..PathOptions::default()
            };
            let fit = fit_default_path(&pr, &opts).unwrap();
            let gamma = opts.resolved_gamma().unwrap();
            let n = 50.0;
            for k in 0..fit.lambda.len() {
                assert!(fit.converged[k]);
                let lam = fit.lambda[k];
                let b = Array1::from(fit.beta.dense_column(k));
                let r = Array1::from(y.clone()) - x.dot(&b);
                let g = x.t().dot(&r) / n;
                for j in 0..81 {
                    let lj = lam * pf[j];
                    if b[j] != 0.0 {
                        let expect = pen.derivative(b[j].abs(), lj, gamma) * b[j].signum();
                        assert!((g[j] - expect).abs() < 1e-6, "{pen} k={k} j={j}");
                    } else {
                        assert!(g[j].abs() <= lj + 1e-6, "{pen} k={k} j={j}");
                    }
                }
            }
            if pen == Penalty::Lasso {
                let k = 20;
                let cold = fit_path(&pr, &opts, &[fit.lambda[k]]).unwrap();
                for j in 0..81 {
                    assert!((cold.beta.get(j, 0) - fit.beta.get(j, k)).abs() < 1e-6);
                }
            } else {
                // at matched lambda the non-convex fit does no worse than the lasso point
                let lasso = fit_path(&pr, &PathOptions::default(), &fit.lambda).unwrap();
                for k in 0..fit.lambda.len() {
                    let f = |b: &[f64]| objective(&x, &y, &pf, b, pen, fit.lambda[k], gamma);
                    assert!(f(&fit.beta.dense_column(k)) <= f(&lasso.beta.dense_column(k)) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        let (x, y, pf) = random_problem(30, 40, 5);
        let live = vec![true; 41];
        let pr = problem(&x, &y, &pf, &live);
        let grid = lambda_grid(&pr, &PathOptions::default()).unwrap();
        for pen in [Penalty::Lasso, Penalty::Mcp, Penalty::Scad] {
            let lam = grid[0] * 0.1;
            let mut prev = f64::INFINITY;
            for sweeps in 1..25 {
                let opts = PathOptions {
                    penalty: pen,
                    max_iter: sweeps,
                    ..PathOptions::default()
                };
                let gamma = opts.resolved_gamma().unwrap();
                let fit = fit_path(&pr, &opts, &[lam]).unwrap();
                let obj = objective(&x, &y, &pf, &fit.beta.dense_column(0), pen, lam, gamma);
                assert!(
                    obj <= prev + 1e-12,
                    "{pen}: sweep {sweeps} raised objective {prev} -> {obj}"
                );
                prev = obj;
            }
        }
    }

    #[test]
    fn dead_columns_stay_zero() {
        let (mut x, y, pf) = random_problem(20, 6, 3);
        x.column_mut(2).fill(0.0);
        let mut live = vec![true; 7];
        live[2] = false;
        let fit = fit_default_path(&problem(&x, &y, &pf, &live), &PathOptions::default()).unwrap();
        assert!((0..fit.lambda.len()).all(|k| fit.beta.get(2, k) == 0.0));
    }

    #[test]
    fn file_backed_columns_match_memory() {
        let dir = tempfile::tempdir().unwrap();
        let (x, y, pf) = random_problem(25, 12, 9);
        let ids: Vec<String> = (0..25).map(|i| i.to_string()).collect();
        let names: Vec<String> = (0..13).map(|j| format!("c{j}")).collect();
        let m = FileMatrix::from_array(dir.path().join("x.bk"), x.view(), ids, names).unwrap();
        let live = vec![true; 13];
        let a = fit_default_path(&problem(&x, &y, &pf, &live), &PathOptions::default()).unwrap();
        let pr = Problem {
            x: &m,
            y: &y,
            penalty_factor: &pf,
            live: &live,
            block_width: 4,
        };
        let b = fit_default_path(&pr, &PathOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_lambda_sequences() {
        assert!(check_lambdas(&[]).is_err());
        assert!(check_lambdas(&[1.0, 1.0]).is_err());
        assert!(check_lambdas(&[1.0, -0.5]).is_err());
        assert!(check_lambdas(&[1.0, 0.5, 0.0]).is_ok());
    }
}
