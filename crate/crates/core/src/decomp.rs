//! Relatedness, eigendecomposition, variance ratio and rotation.
//!
//! With `K = X_pen X_pen^T / p_pen` and `K = U diag(d) U^T`, the outcome
//! covariance is modelled (up to a positive scalar) as
//! `S = eta K + (1 - eta) I`. Multiplying the regression by
//! `F = diag(w) U^T`, `w_i = (eta d_i + 1 - eta)^(-1/2)`, gives
//! `F S F^T = I`: observations on the rotated scale are uncorrelated.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Side};
use ndarray::{Array1, Array2, ShapeBuilder};
use rayon::prelude::*;

use crate::design::DesignView;
use crate::error::{Error, Result};
use crate::resources::{faer_par, Resources};
use crate::store::{column_blocks, sidecar_path, ElementKind, FileMatrix};

/// Search interval for the variance ratio.
pub const ETA_BOUNDS: (f64, f64) = (0.01, 0.99);
const ETA_TOL: f64 = 1e-6;
const ETA_GRID: usize = 99;

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `n x n` orthonormal eigenvectors, column-major, matching `d`.
    pub u: Array2<f64>,
    /// Eigenvalues of `K`, descending.
    pub d: Array1<f64>,
    pub eta: f64,
    pub w: Array1<f64>,
    /// Number of penalized columns `K` was averaged over.
    pub p_penalized: usize,
}

#[derive(Debug)]
pub struct RotatedProblem {
    /// `n x (p + 1)`: the rotated design columns followed by the rotated
    /// intercept, each rescaled to mean square one.
    pub xr: FileMatrix,
    pub yr: Vec<f64>,
    /// Divisor applied to each rotated column; zero marks a column that
    /// carries no information (excluded from fitting).
    pub rot_scales: Vec<f64>,
    /// Design penalty factors with a trailing 0 for the intercept.
    pub penalty_factor: Vec<f64>,
}

impl RotatedProblem {
    pub fn n(&self) -> usize {
        self.xr.n_rows()
    }

    /// Columns including the intercept.
    pub fn n_cols(&self) -> usize {
        self.xr.n_cols()
    }

    pub fn intercept_col(&self) -> usize {
        self.xr.n_cols() - 1
    }
}

fn mat_ref(a: &Array2<f64>) -> MatRef<'_, f64> {
    let (r, c) = a.dim();
    MatRef::from_column_major_slice(a.as_slice_memory_order().expect("contiguous"), r, c)
}

fn mat_mut(a: &mut Array2<f64>) -> MatMut<'_, f64> {
    assert!(a.t().is_standard_layout() || a.ncols() == 1, "expected column-major");
    let (r, c) = a.dim();
    MatMut::from_column_major_slice_mut(a.as_slice_memory_order_mut().expect("contiguous"), r, c)
}

fn col_major(a: Array2<f64>) -> Array2<f64> {
    if a.t().is_standard_layout() {
        a
    } else {
        let mut out = Array2::zeros(a.dim().f());
        out.assign(&a);
        out
    }
}

/// `K = (1/p_pen) * sum over live penalized columns of x x^T`.
pub fn compute_grm(view: &DesignView<'_>, res: &Resources) -> Result<(Array2<f64>, usize)> {
    let n = view.n_rows();
    let n2 = 8 * (n as u64) * (n as u64);
    res.check("relatedness matrix and eigendecomposition", 4 * n2)?;
    let p_pen = view.n_live_penalized();
    if p_pen == 0 {
        return Err(Error::data(
            "no informative penalized columns to build relatedness from",
        ));
    }
    let pen: Vec<usize> = (0..view.n_cols()).filter(|&j| view.penalty_factor()[j] > 0.0).collect();
    let mut k = Array2::<f64>::zeros((n, n).f());
    let width = res.block_width_for(n);
    for chunk in pen.chunks(width) {
        let (lo, hi) = (chunk[0], chunk[chunk.len() - 1] + 1);
        let block = view.block(lo..hi)?;
        let local: Vec<usize> = chunk.iter().map(|j| j - lo).collect();
        let sel = col_major(block.select(ndarray::Axis(1), &local));
        matmul(
            mat_mut(&mut k),
            Accum::Add,
            mat_ref(&sel),
            mat_ref(&sel).transpose(),
            1.0,
            faer_par(),
        );
        view.release(lo..hi);
    }
    let scale = 1.0 / p_pen as f64;
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (k[[i, j]] + k[[j, i]]) * scale;
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
        k[[i, i]] *= scale;
    }
    Ok((k, p_pen))
}

/// Symmetric eigendecomposition, eigenvalues descending.
pub fn eigen_sym(k: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::Config(format!("expected a square matrix, got {:?}", k.dim())));
    }
    let a = faer::Mat::<f64>::from_fn(n, n, |i, j| k[[i, j]]);
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| Error::NoConvergence)?;
    let (vecs, vals) = (evd.U(), evd.S().column_vector());
    let mut u = Array2::<f64>::zeros((n, n).f());
    let mut d = Array1::<f64>::zeros(n);
    for c in 0..n {
        let src = n - 1 - c;
        d[c] = vals[src];
        for r in 0..n {
            u[[r, c]] = vecs[(r, src)];
        }
    }
    Ok((u, d))
}

/// Profile log-likelihood of the variance ratio for centered `z = U^T y`.
pub fn profile_loglik(eta: f64, d: &[f64], z: &[f64]) -> f64 {
    let n = d.len() as f64;
    let (mut quad, mut logdet) = (0.0, 0.0);
    for (&di, &zi) in d.iter().zip(z) {
        let v = eta * di + (1.0 - eta);
        quad += zi * zi / v;
        logdet += v.ln();
    }
    -0.5 * (n * quad.ln() + logdet)
}

/// `U^T (y - mean(y))`.
pub fn project_centered(u: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let yc = Array1::from_iter(y.iter().map(|v| v - mean));
    u.t().dot(&yc).to_vec()
}

/// Maximizes the profile likelihood over [`ETA_BOUNDS`]: a grid scan to
/// bracket the global maximum, then golden-section refinement. Flat
/// likelihoods resolve to the lower bound.
pub fn estimate_eta(d: &[f64], u: &Array2<f64>, y: &[f64]) -> f64 {
    let z = project_centered(u, y);
    maximize_eta(d, &z)
}

pub(crate) fn maximize_eta(d: &[f64], z: &[f64]) -> f64 {
    let (lo, hi) = ETA_BOUNDS;
    let f = |eta: f64| profile_loglik(eta, d, z);
    if z.iter().all(|&v| v == 0.0) {
        return lo;
    }
    let step = (hi - lo) / ETA_GRID as f64;
    let grid: Vec<f64> = (0..=ETA_GRID).map(|i| (lo + step * i as f64).min(hi)).collect();
    let values: Vec<f64> = grid.iter().map(|&e| f(e)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > values[b] { i } else { b });

    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(ETA_GRID)]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut e = a + ratio * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    while b - a > ETA_TOL {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + ratio * (b - a);
            fe = f(e);
        }
    }
    let mut eta = 0.5 * (a + b);
    let mut f_eta = f(eta);
    if values[best] > f_eta {
        eta = grid[best];
        f_eta = values[best];
    }
    let f_lo = values[0];
    if f_eta - f_lo <= 1e-12 * f_lo.abs().max(1.0) {
        return lo;
    }
    eta.clamp(lo, hi)
}

pub fn rotation_weights(d: &[f64], eta: f64) -> Array1<f64> {
    d.iter()
        .map(|&di| (eta * di.max(0.0) + (1.0 - eta)).powf(-0.5))
        .collect()
}

impl Decomposition {
    pub fn new(u: Array2<f64>, d: Array1<f64>, eta: f64, p_penalized: usize) -> Self {
        let w = rotation_weights(d.as_slice().expect("contiguous"), eta);
        Decomposition {
            u,
            d,
            eta,
            w,
            p_penalized,
        }
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Replaces the variance ratio, recomputing the weights.
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self.w = rotation_weights(self.d.as_slice().expect("contiguous"), eta);
        self
    }

    /// `diag(w) U^T v`
    pub fn rotate_vec(&self, v: &[f64]) -> Vec<f64> {
        let t = self.u.t().dot(&ndarray::ArrayView1::from(v));
        t.iter().zip(self.w.iter()).map(|(a, b)| a * b).collect()
    }

    /// `S^{-1} r = U diag(1 / (eta d + 1 - eta)) U^T r`
    pub fn solve_s(&self, r: &[f64]) -> Vec<f64> {
        let t = self.u.t().dot(&ndarray::ArrayView1::from(r));
        let scaled: Array1<f64> = t.iter().zip(self.w.iter()).map(|(a, w)| a * w * w).collect();
        self.u.dot(&scaled).to_vec()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(8 * (self.n() + self.u.len()));
        for v in self.d.iter().chain(self.u.t().iter()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let meta = sidecar_path(path);
        let mut text = String::new();
        let _ = writeln!(text, "n:{}", self.n());
        let _ = writeln!(text, "eta:{:?}", self.eta);
        let _ = writeln!(text, "p_penalized:{}", self.p_penalized);
        fs::write(&meta, text).map_err(|e| Error::io(&meta, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta = sidecar_path(path);
        let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_parts(&text, &bytes).map_err(|e| Error::Corrupt {
            path: PathBuf::from(path),
            reason: e.to_string(),
        })
    }

    /// Decodes a saved decomposition from its sidecar text and binary body
    /// (eigenvalues, then eigenvectors column-major, little-endian f64).
    pub fn from_parts(meta: &str, bytes: &[u8]) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        for (i, line) in meta.lines().enumerate() {
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| Error::parse("decomposition sidecar", i + 1, "expected key:value"))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::parse("decomposition sidecar", 0, format!("missing {k}")))
        };
        let bad = |k: &str| Error::parse("decomposition sidecar", 0, format!("invalid {k}"));
        let n: usize = get("n")?.parse().map_err(|_| bad("n"))?;
        let eta: f64 = get("eta")?.parse().map_err(|_| bad("eta"))?;
        let p_penalized: usize = get("p_penalized")?.parse().map_err(|_| bad("p_penalized"))?;
        if n == 0 || !(0.0..=1.0).contains(&eta) {
            return Err(bad("n or eta"));
        }
        let expected = n
            .checked_mul(n)
            .and_then(|nn| nn.checked_add(n))
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| bad("n"))?;
        if bytes.len() != expected {
            return Err(Error::data(format!(
                "decomposition body has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let mut values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let d: Array1<f64> = values.by_ref().take(n).collect();
        let u = Array2::from_shape_vec((n, n).f(), values.collect()).expect("n*n values");
        if d.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(Error::data("decomposition contains non-finite values"));
        }
        Ok(Decomposition::new(u, d, eta, p_penalized))
    }
}

/// Rotates the design columns and an appended intercept into a new store at
/// `out`, and the outcome into `yr`.
pub fn rotate(
    view: &DesignView<'_>,
    y: &[f64],
    decomp: &Decomposition,
    out: impl AsRef<Path>,
    res: &Resources,
) -> Result<RotatedProblem> {
    let n = view.n_rows();
    if y.len() != n || decomp.n() != n {
        return Err(Error::Config(format!(
            "rotation dimension mismatch: {n} rows, {} outcomes, decomposition of size {}",
            y.len(),
            decomp.n()
        )));
    }
    let p = view.n_cols();
    let ut = mat_ref(&decomp.u).transpose();
    let w = decomp.w.as_slice().expect("contiguous");

    let names: Vec<String> = (0..=p).map(|j| format!("r{j}")).collect();
    let row_ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let mut xr = FileMatrix::create_named(out, ElementKind::Float64, row_ids, names, true)?;
    let mut rot_scales = vec![0.0; p + 1];

    let finish_block = |rotated: &mut Array2<f64>, scales: &mut [f64], live: &(dyn Fn(usize) -> bool + Sync)| {
        rotated
            .axis_iter_mut(ndarray::Axis(1))
            .into_par_iter()
            .zip(scales.par_iter_mut())
            .enumerate()
            .for_each(|(k, (mut col, scale))| {
                let col = col.as_slice_mut().expect("column-major");
                for (v, wi) in col.iter_mut().zip(w) {
                    *v *= wi;
                }
                let ms = col.iter().map(|v| v * v).sum::<f64>() / n as f64;
                if live(k) && ms > 0.0 {
                    *scale = ms.sqrt();
                    for v in col.iter_mut() {
                        *v /= *scale;
                    }
                } else {
                    *scale = 0.0;
                    col.fill(0.0);
                }
            });
    };

    let width = res.block_width_for(n);
    for range in column_blocks(p, width) {
        let block = col_major(view.block(range.clone())?);
        let mut rotated = Array2::<f64>::zeros((n, range.len()).f());
        matmul(
            mat_mut(&mut rotated),
            Accum::Replace,
            ut,
            mat_ref(&block),
            1.0,
            faer_par(),
        );
        let start = range.start;
        finish_block(&mut rotated, &mut rot_scales[range.clone()], &|k| {
            view.is_live(start + k)
        });
        xr.write_col_block(range.start, rotated.view())?;
        xr.release(range.start, range.len());
        view.release(range);
    }

    let ones = Array2::<f64>::ones((n, 1).f());
    let mut rotated = Array2::<f64>::zeros((n, 1).f());
    matmul(
        mat_mut(&mut rotated),
        Accum::Replace,
        ut,
        mat_ref(&ones),
        1.0,
        faer_par(),
    );
    finish_block(&mut rotated, &mut rot_scales[p..], &|_| true);
    xr.write_col_block(p, rotated.view())?;

    let mut penalty_factor = view.penalty_factor().to_vec();
    penalty_factor.push(0.0);
    Ok(RotatedProblem {
        xr,
        yr: decomp.rotate_vec(y),
        rot_scales,
        penalty_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{create_design, DesignOptions, IdTable};
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn random_psd(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((n, n + 2), |_| rng.sample::<f64, _>(StandardNormal));
        a.dot(&a.t())
    }

    /// Cyclic Jacobi eigenvalue iteration, independent of the library solver.
    fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
        let mut a = a.clone();
        let n = a.nrows();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]].powi(2))
                .sum();
            if off < 1e-22 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[[k, p]], a[[k, q]]);
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
        d.sort_by(|x, y| y.partial_cmp(x).unwrap());
        d
    }

    fn design_from(dir: &Path, x: &Array2<f64>, y: &[f64]) -> crate::design::Design {
        let n = x.nrows();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let names = (0..x.ncols()).map(|j| format!("f{j}")).collect();
        let m = FileMatrix::from_array(dir.join("raw.bk"), x.view(), ids.clone(), names).unwrap();
        let opts = DesignOptions {
            id_col: "id".into(),
            outcome_col: "y".into(),
            covariates: None,
            overwrite: true,
        };
        create_design(&m, &IdTable::from_pairs("id", "y", &ids, y), &opts, dir.join("d.bk")).unwrap()
    }

    #[test]
    fn grm_small_cases() {
        let dir = tempfile::tempdir().unwrap();
        let d = design_from(dir.path(), &array![[1.0, 1.0], [-1.0, -1.0]], &[0.0, 1.0]);
        let (k, p) = compute_grm(&DesignView::full(&d), &Resources::default()).unwrap();
        assert_eq!(p, 2);
        assert_eq!(k, array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn grm_matches_double_loop_and_has_unit_mean_trace() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((8, 30), |_| rng.sample::<f64, _>(StandardNormal));
        let d = design_from(dir.path(), &x, &[0.0; 8]);
        let res = Resources {
            block_width: 7,
            ..Resources::default()
        };
        let (k, _) = compute_grm(&DesignView::full(&d), &res).unwrap();
        let z = d.x.read_col_block(0, 30).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let naive: f64 = (0..30).map(|c| z[[i, c]] * z[[j, c]]).sum::<f64>() / 30.0;
                assert!((k[[i, j]] - naive).abs() < 1e-12);
            }
        }
        let trace: f64 = (0..8).map(|i| k[[i, i]]).sum();
        assert!((trace / 8.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn grm_respects_memory_budget() {
        let dir = tempfile::tempdir().unwrap();
        let d = design_from(dir.path(), &array![[1.0, 2.0], [3.0, 1.0], [0.0, 0.0]], &[0.0; 3]);
        let res = Resources {
            memory_budget: Some(64),
            ..Resources::default()
        };
        assert!(matches!(
            compute_grm(&DesignView::full(&d), &res),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn eigen_simple_cases() {
        let (u, d) = eigen_sym(&Array2::eye(3)).unwrap();
        assert_eq!(d.to_vec(), [1.0, 1.0, 1.0]);
        assert!(max_abs(&(u.t().dot(&u) - Array2::<f64>::eye(3))) < 1e-12);
        let (_, d) = eigen_sym(&array![[1.0, 0.0], [0.0, 3.0]]).unwrap();
        assert_eq!(d.to_vec(), [3.0, 1.0]);
    }

    #[test]
    fn eigen_reconstructs_and_matches_jacobi() {
        let k = random_psd(6, 3);
        let (u, d) = eigen_sym(&k).unwrap();
        let recon = u.dot(&Array2::from_diag(&d)).dot(&u.t());
        assert!(max_abs(&(recon - &k)) < 1e-8);
        assert!(max_abs(&(u.t().dot(&u) - Array2::<f64>::eye(6))) < 1e-8);
        for (a, b) in d.iter().zip(jacobi_eigenvalues(&k)) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert!(d.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }

    #[test]
    fn flat_likelihood_returns_lower_bound() {
        let u = Array2::<f64>::eye(10);
        let d = vec![1.0; 10];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
        assert_eq!(estimate_eta(&d, &u, &y), ETA_BOUNDS.0);
    }

    #[test]
    fn eta_matches_fine_grid_and_is_scale_invariant() {
        for seed in 0..10 {
            let k = random_psd(25, 100 + seed) / 25.0;
            let (u, d) = eigen_sym(&k).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // structured signal plus noise
            let g: Vec<f64> = (0..25).map(|_| rng.sample(StandardNormal)).collect();
            let lk = u.dot(&Array2::from_diag(&d.mapv(f64::sqrt)));
            let mut y = lk.dot(&Array1::from(g)).to_vec();
            for v in &mut y {
                *v += rng.sample::<f64, _>(StandardNormal) * 0.7;
            }
            let eta = estimate_eta(d.as_slice().unwrap(), &u, &y);

            let z = project_centered(&u, &y);
            let ds = d.as_slice().unwrap();
            let mut best = (f64::NEG_INFINITY, 0.0);
            let steps = ((ETA_BOUNDS.1 - ETA_BOUNDS.0) / 1e-4).round() as usize;
            for i in 0..=steps {
                let e = ETA_BOUNDS.0 + i as f64 * 1e-4;
                let v = profile_loglik(e, ds, &z);
                if v > best.0 {
                    best = (v, e);
                }
            }
            assert!((eta - best.1).abs() < 1e-3, "seed {seed}: {eta} vs grid {}", best.1);

            let scaled: Vec<f64> = y.iter().map(|v| v * 37.5).collect();
            assert!((estimate_eta(ds, &u, &scaled) - eta).abs() < 1e-6);
        }
    }

    #[test]
    fn preconditioner_whitens_covariance() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Array2::from_shape_fn((20, 15), |_| rng.random_range(0..3) as f64);
        let y: Vec<f64> = (0..20).map(|_| rng.sample(StandardNormal)).collect();
        let design = design_from(dir.path(), &x, &y);
        let view = DesignView::full(&design);
        let (k, p) = compute_grm(&view, &Resources::default()).unwrap();
        let (u, d) = eigen_sym(&k).unwrap();
        let eta = estimate_eta(d.as_slice().unwrap(), &u, &y);
        let dec = Decomposition::new(u.clone(), d, eta, p);
        let f = Array2::from_diag(&dec.w).dot(&u.t());
        let s = &k * eta + Array2::<f64>::eye(20) * (1.0 - eta);
        assert!(max_abs(&(f.dot(&s).dot(&f.t()) - Array2::<f64>::eye(20))) < 1e-8);

        let rp = rotate(&view, &y, &dec, dir.path().join("rot.bk"), &Resources::default()).unwrap();
        assert_eq!(rp.n_cols(), 16);
        assert_eq!(rp.penalty_factor[15], 0.0);
        let xr = rp.xr.read_col_block(0, 16).unwrap();
        let z = design.x.read_col_block(0, 15).unwrap();
        for j in 0..15 {
            let direct = f.dot(&z.column(j));
            for i in 0..20 {
                assert!((xr[[i, j]] * rp.rot_scales[j] - direct[i]).abs() < 1e-10);
            }
            assert!((xr.column(j).mapv(|v| v * v).mean().unwrap() - 1.0).abs() < 1e-10);
        }
        let yr_direct = f.dot(&Array1::from(y.clone()));
        for i in 0..20 {
            assert!((rp.yr[i] - yr_direct[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_eta_rotation_is_orthogonal_and_linear() {
        let k = random_psd(12, 5);
        let (u, d) = eigen_sym(&k).unwrap();
        let dec = Decomposition::new(u, d, 0.0, 1);
        assert!(dec.w.iter().all(|&w| w == 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y1: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
        let y2: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((norm(&dec.rotate_vec(&y1)) - norm(&y1)).abs() < 1e-12);

        let dec = dec.with_eta(0.4);
        let combo: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let lhs = dec.rotate_vec(&combo);
        let (r1, r2) = (dec.rotate_vec(&y1), dec.rotate_vec(&y2));
        for i in 0..12 {
            assert!((lhs[i] - (2.0 * r1[i] - 0.5 * r2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_kernel_preserves_least_squares_objective() {
        let (u, d) = eigen_sym(&Array2::eye(6)).unwrap();
        let dec = Decomposition::new(u, d, 0.3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((6, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let y: Array1<f64> = (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let beta = array![0.3, -1.0, 2.0];
        let r = &y - &x.dot(&beta);
        let rr = dec.rotate_vec(r.as_slice().unwrap());
        // S = I for K = I, so rotation is orthogonal
        let a: f64 = r.iter().map(|v| v * v).sum();
        let b: f64 = rr.iter().map(|v| v * v).sum();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn save_load_roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let (u, d) = eigen_sym(&random_psd(5, 9)).unwrap();
        let dec = Decomposition::new(u, d, 0.37, 12);
        let path = dir.path().join("decomp.bin");
        dec.save(&path).unwrap();
        assert_eq!(Decomposition::load(&path).unwrap(), dec);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(Decomposition::load(&path), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn solve_s_inverts_covariance() {
        let k = random_psd(7, 21) / 7.0;
        let (u, d) = eigen_sym(&k).unwrap();
        let dec = Decomposition::new(u, d, 0.6, 1);
        let s = &k * 0.6 + Array2::<f64>::eye(7) * 0.4;
        let r: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let x = dec.solve_s(&r);
        let back = s.dot(&Array1::from(x));
        for i in 0..7 {
            assert!((back[i] - r[i]).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weights_whiten_each_eigendirection(
            d in proptest::collection::vec(0.0f64..50.0, 1..40),
            eta in 0.0f64..0.999,
        ) {
            let w = rotation_weights(&d, eta);
            for (wi, di) in w.iter().zip(&d) {
                prop_assert!((wi * wi * (eta * di + 1.0 - eta) - 1.0).abs() < 1e-12);
            }
        }
    }
}
