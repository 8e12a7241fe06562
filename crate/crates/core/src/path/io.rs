//! Text persistence of fitted paths.
//!
//! A fit directory holds `lambda.txt` (one value per line), `beta.sparse`
//! (`feature<TAB>lambda_index<TAB>value` for nonzero coefficients, indices
//! from 1), `intercept.txt`, `features.txt` (`feature<TAB>penalty_factor`)
//! and `fitinfo.txt` (`key<TAB>value` lines).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{FitPath, Penalty, SparseColumns};
use crate::error::{Error, Result};

pub const LAMBDA_FILE: &str = "lambda.txt";
pub const BETA_FILE: &str = "beta.sparse";
pub const INTERCEPT_FILE: &str = "intercept.txt";
pub const FEATURE_FILE: &str = "features.txt";
pub const FITINFO_FILE: &str = "fitinfo.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct FitInfo {
    pub n: usize,
    pub p: usize,
    pub eta: f64,
    pub penalty: Penalty,
    pub gamma: Option<f64>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub loss: Vec<f64>,
    pub timings: Vec<(String, f64)>,
}

fn join<T>(values: &[T], f: impl Fn(&T) -> String) -> String {
    values.iter().map(f).collect::<Vec<_>>().join(",")
}

fn render_info(fit: &FitPath) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n\t{}", fit.n);
    let _ = writeln!(s, "p\t{}", fit.p());
    let _ = writeln!(s, "eta\t{:?}", fit.eta);
    let _ = writeln!(s, "penalty\t{}", fit.penalty);
    let _ = writeln!(s, "gamma\t{}", fit.gamma.map_or("NA".to_string(), |g| format!("{g:?}")));
    let _ = writeln!(s, "iterations\t{}", join(&fit.iterations, |v| v.to_string()));
    let _ = writeln!(s, "converged\t{}", join(&fit.converged, |&c| u8::from(c).to_string()));
    let _ = writeln!(s, "loss\t{}", join(&fit.loss, |v| format!("{v:?}")));
    for (stage, secs) in &fit.timings {
        let _ = writeln!(s, "timing\t{stage}\t{secs:.6}");
    }
    s
}

pub fn write_fit(dir: impl AsRef<Path>, fit: &FitPath) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    put(LAMBDA_FILE, fit.lambda.iter().map(|l| format!("{l:?}\n")).collect())?;
    put(
        INTERCEPT_FILE,
        fit.intercepts.iter().map(|a| format!("{a:?}\n")).collect(),
    )?;
    let mut beta = String::new();
    for k in 0..fit.n_lambda() {
        for (j, v) in fit.beta.column(k) {
            let _ = writeln!(beta, "{}\t{}\t{v:?}", fit.feature_names[j], k + 1);
        }
    }
    put(BETA_FILE, beta)?;
    let mut features = String::new();
    for (name, pf) in fit.feature_names.iter().zip(&fit.penalty_factor) {
        let _ = writeln!(features, "{name}\t{pf:?}");
    }
    put(FEATURE_FILE, features)?;
    put(FITINFO_FILE, render_info(fit))
}

fn parse_f64(s: &str, source: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::parse(source, line, format!("{s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(source, line, "value is not finite"));
    }
    Ok(v)
}

fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// One finite value per non-blank line.
pub fn parse_lambda(text: &str, source: &str) -> Result<Vec<f64>> {
    numbered_lines(text).map(|(i, l)| parse_f64(l, source, i)).collect()
}

/// Rebuilds the `p x n_lambda` coefficient matrix from triplets.
pub fn parse_beta_sparse(text: &str, feature_names: &[String], n_lambda: usize, source: &str) -> Result<SparseColumns> {
    let index: HashMap<&str, usize> = feature_names.iter().enumerate().map(|(j, n)| (n.as_str(), j)).collect();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_lambda];
    for (i, line) in numbered_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        let [name, k, v] = fields[..] else {
            return Err(Error::parse(
                source,
                i,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        };
        let &j = index
            .get(name)
            .ok_or_else(|| Error::parse(source, i, format!("unknown feature {name:?}")))?;
        let k: usize = k
            .trim()
            .parse()
            .ok()
            .filter(|k| (1..=n_lambda).contains(k))
            .ok_or_else(|| Error::parse(source, i, format!("lambda index {k:?} is not in 1..={n_lambda}")))?;
        let v = parse_f64(v, source, i)?;
        if v == 0.0 {
            return Err(Error::parse(source, i, "stored coefficient is zero"));
        }
        cols[k - 1].push((j, v));
    }
    let mut out = SparseColumns::new(feature_names.len());
    for mut col in cols {
        col.sort_by_key(|&(j, _)| j);
        if col.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::parse(source, 0, "duplicate coefficient entry"));
        }
        out.push_column(col);
    }
    Ok(out)
}

pub fn parse_fitinfo(text: &str, source: &str) -> Result<FitInfo> {
    let mut fields: HashMap<&str, (usize, &str)> = HashMap::new();
    let mut timings = Vec::new();
    for (i, line) in numbered_lines(text) {
        let (key, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source, i, "expected key<TAB>value"))?;
        if key == "timing" {
            let (stage, secs) = value
                .split_once('\t')
                .ok_or_else(|| Error::parse(source, i, "expected timing<TAB>stage<TAB>seconds"))?;
            timings.push((stage.to_string(), parse_f64(secs, source, i)?));
        } else if fields.insert(key, (i, value)).is_some() {
            return Err(Error::parse(source, i, format!("duplicate key {key}")));
        }
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| Error::parse(source, 0, format!("missing {k}")))
    };
    let count = |k: &str| -> Result<usize> {
        let (i, v) = get(k)?;
        v.trim()
            .parse()
            .map_err(|_| Error::parse(source, i, format!("invalid {k}")))
    };
    let list = |k: &str| -> Result<Vec<&str>> {
        let (_, v) = get(k)?;
        Ok(if v.trim().is_empty() {
            Vec::new()
        } else {
            v.split(',').collect()
        })
    };
    let (eta_line, eta) = get("eta")?;
    let eta = parse_f64(eta, source, eta_line)?;
    let (pen_line, pen) = get("penalty")?;
    let penalty: Penalty = pen
        .parse()
        .map_err(|_| Error::parse(source, pen_line, "unknown penalty"))?;
    let (g_line, g) = get("gamma")?;
    let gamma = match g.trim() {
        "NA" => None,
        g => Some(parse_f64(g, source, g_line)?),
    };
    let (it_line, _) = get("iterations")?;
    let iterations = list("iterations")?
        .iter()
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::parse(source, it_line, "invalid iteration count"))
        })
        .collect::<Result<Vec<usize>>>()?;
    let (cv_line, _) = get("converged")?;
    let converged = list("converged")?
        .iter()
        .map(|v| match v.trim() {
            "1" => Ok(true),
            "0" => Ok(false),
            _ => Err(Error::parse(source, cv_line, "converged flags must be 0 or 1")),
        })
        .collect::<Result<Vec<bool>>>()?;
    let (loss_line, _) = get("loss")?;
    let loss = list("loss")?
        .iter()
        .map(|v| parse_f64(v, source, loss_line))
        .collect::<Result<Vec<f64>>>()?;
    if iterations.len() != converged.len() || iterations.len() != loss.len() {
        return Err(Error::parse(source, 0, "per-lambda lists differ in length"));
    }
    Ok(FitInfo {
        n: count("n")?,
        p: count("p")?,
        eta,
        penalty,
        gamma,
        iterations,
        converged,
        loss,
        timings,
    })
}

fn parse_features(text: &str, source: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let mut names = Vec::new();
    let mut pf = Vec::new();
    for (i, line) in numbered_lines(text) {
        let (name, f) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source, i, "expected feature<TAB>penalty_factor"))?;
        names.push(name.to_string());
        pf.push(parse_f64(f, source, i)?);
    }
    Ok((names, pf))
}

pub fn read_fit(dir: impl AsRef<Path>) -> Result<FitPath> {
    let dir = dir.as_ref();
    let read = |name: &str| -> Result<(String, String)> {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok((text, path.display().to_string()))
    };
    let (text, src) = read(LAMBDA_FILE)?;
    let lambda = parse_lambda(&text, &src)?;
    let (text, src) = read(INTERCEPT_FILE)?;
    let intercepts = parse_lambda(&text, &src)?;
    let (text, src) = read(FEATURE_FILE)?;
    let (feature_names, penalty_factor) = parse_features(&text, &src)?;
    let (text, src) = read(FITINFO_FILE)?;
    let info = parse_fitinfo(&text, &src)?;
    let (text, src) = read(BETA_FILE)?;
    let beta = parse_beta_sparse(&text, &feature_names, lambda.len(), &src)?;
    if intercepts.len() != lambda.len() || info.loss.len() != lambda.len() || info.p != feature_names.len() {
        return Err(Error::Corrupt {
            path: dir.to_path_buf(),
            reason: "fit files disagree on the number of lambdas or features".into(),
        });
    }
    Ok(FitPath {
        lambda,
        beta_rotated: None,
        beta,
        intercepts,
        iterations: info.iterations,
        converged: info.converged,
        loss: info.loss,
        eta: info.eta,
        penalty: info.penalty,
        gamma: info.gamma,
        n: info.n,
        feature_names,
        penalty_factor,
        timings: info.timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_fit() -> FitPath {
        let mut beta = SparseColumns::new(3);
        beta.push_column([]);
        beta.push_column([(1, 0.1 + 0.2), (2, -1e-9)]);
        FitPath {
            lambda: vec![0.5, 0.05],
            beta_rotated: None,
            beta,
            intercepts: vec![1.0 / 3.0, 2.0],
            iterations: vec![1, 17],
            converged: vec![true, false],
            loss: vec![10.0, 3.25],
            eta: 0.123456789,
            penalty: Penalty::Scad,
            gamma: Some(3.7),
            n: 20,
            feature_names: vec!["age".into(), "rs1".into(), "rs2".into()],
            penalty_factor: vec![0.0, 1.0, 1.0],
            timings: vec![("path".into(), 0.25)],
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let fit = sample_fit();
        write_fit(dir.path(), &fit).unwrap();
        assert_eq!(read_fit(dir.path()).unwrap(), fit);
        let beta = fs::read_to_string(dir.path().join(BETA_FILE)).unwrap();
        assert_eq!(beta.lines().count(), fit.beta.nnz());
        assert!(beta.starts_with("rs1\t2\t"));
    }

    #[test]
    fn beta_sparse_errors() {
        let names = vec!["a".to_string()];
        assert!(parse_beta_sparse("a\t1\t2.0\n", &names, 1, "b").is_ok());
        assert!(parse_beta_sparse("b\t1\t2.0\n", &names, 1, "b").is_err());
        assert!(parse_beta_sparse("a\t2\t2.0\n", &names, 1, "b").is_err());
        assert!(parse_beta_sparse("a\t0\t2.0\n", &names, 1, "b").is_err());
        assert!(parse_beta_sparse("a\t1\tnan\n", &names, 1, "b").is_err());
        assert!(parse_beta_sparse("a\t1\t1\na\t1\t2\n", &names, 1, "b").is_err());
        let err = parse_beta_sparse("a 1 2\n", &names, 1, "beta.sparse").unwrap_err();
        assert!(err.to_string().starts_with("beta.sparse:1:"));
    }

    #[test]
    fn fitinfo_requires_consistent_lists() {
        let text = "n\t2\np\t1\neta\t0.5\npenalty\tlasso\ngamma\tNA\niterations\t1,2\nconverged\t1\nloss\t1,2\n";
        assert!(parse_fitinfo(text, "f").is_err());
    }
}
