#![allow(dead_code)]

use std::path::Path;

use ndarray::Array2;
use plmmkit::design::{create_design, CovariateSpec, Design, DesignOptions, IdTable};
use plmmkit::store::FileMatrix;

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

pub fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("f{}", j + 1)).collect()
}

/// Persists `x` and builds a design with outcome `y` and optional covariates.
pub fn design_from(dir: &Path, x: &Array2<f64>, y: &[f64], covariates: Option<&Array2<f64>>) -> Design {
    let (n, p) = x.dim();
    let raw = FileMatrix::from_array(dir.join("raw.bk"), x.view(), ids(n), names(p)).unwrap();
    let outcome = IdTable::from_pairs("id", "y", &ids(n), y);
    let covariates = covariates.map(|c| {
        let mut text = String::from("id");
        for k in 0..c.ncols() {
            text.push_str(&format!("\tc{}", k + 1));
        }
        text.push('\n');
        for (i, id) in ids(n).iter().enumerate() {
            text.push_str(id);
            for v in c.row(i) {
                text.push_str(&format!("\t{v:?}"));
            }
            text.push('\n');
        }
        let table = IdTable::parse(text.as_bytes(), plmmkit::ingest::Delimiter::Char('\t'), "cov").unwrap();
        CovariateSpec {
            table,
            id_col: "id".into(),
            columns: (1..=c.ncols()).map(|k| format!("c{k}")).collect(),
        }
    });
    let opts = DesignOptions {
        id_col: "id".into(),
        outcome_col: "y".into(),
        covariates,
        overwrite: true,
    };
    create_design(&raw, &outcome, &opts, dir.join("design.bk")).unwrap()
}

/// Standardized design columns as an in-memory matrix.
pub fn z_matrix(design: &Design) -> Array2<f64> {
    design.read_block(0..design.p(), None).unwrap()
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
pub fn inverse(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| m[[i, c]].abs().total_cmp(&m[[j, c]].abs()))
            .unwrap();
        for k in 0..n {
            m.swap([c, k], [piv, k]);
            inv.swap([c, k], [piv, k]);
        }
        let d = m[[c, c]];
        for k in 0..n {
            m[[c, k]] /= d;
            inv[[c, k]] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[[r, c]];
                for k in 0..n {
                    m[[r, k]] -= f * m[[c, k]];
                    inv[[r, k]] -= f * inv[[c, k]];
                }
            }
        }
    }
    inv
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Columns of `x` (named by [`names`]) that survived into `design`.
pub fn retained(design: &Design, x: &Array2<f64>) -> Array2<f64> {
    let all = names(x.ncols());
    let idx: Vec<usize> = design
        .feature_names()
        .iter()
        .map(|f| all.iter().position(|a| a == f).expect("design feature comes from x"))
        .collect();
    x.select(ndarray::Axis(1), &idx)
}
