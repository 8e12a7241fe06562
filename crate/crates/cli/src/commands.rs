use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use plmmkit::decomp::Decomposition;
use plmmkit::design::{create_design, CovariateSpec, Design, DesignOptions, IdTable, DESIGN_FILE};
use plmmkit::inference::{
    cv_plmm, first_argmin, predict_blup, predict_linear, read_cve, summarize, summarize_cv, write_cv, CvOptions,
    PredictionType,
};
use plmmkit::ingest::{
    parse_delimited, process_delimited, process_plink, DelimitedOptions, Delimiter, IngestOptions, GENOTYPE_FILE,
    REPORT_FILE,
};
use plmmkit::path::{plmm, read_fit, write_fit, FitPath, PathOptions, PrepOptions};
use plmmkit::resources::Resources;
use plmmkit::store::FileMatrix;
use plmmkit::timing::StageTimer;
use plmmkit::{Error, Result};

use crate::report::{fit_category, write_timings};
use crate::svg::{cve_svg, paths_svg};
use crate::{Cli, Command, CvArgs, DesignArgs, FitArgs, PathArgs, PredictArgs, ProcessArgs, SummaryArgs};

pub const PATHS_SVG: &str = "paths.svg";
pub const CVE_SVG: &str = "cve.svg";
pub const SCRATCH_ENV: &str = "PLMMKIT_TMPDIR";

pub fn run(cli: &Cli) -> Result<()> {
    if cli.block_width == 0 {
        return Err(Error::Config("--block-width must be at least 1".into()));
    }
    let res = Resources {
        memory_budget: cli.memory_budget,
        block_width: cli.block_width,
    };
    match &cli.command {
        Command::Process(a) => process(a),
        Command::Design(a) => design(a),
        Command::Fit(a) => fit(a, &res),
        Command::Cv(a) => cv(a, &res),
        Command::Predict(a) => predict(a, &res),
        Command::Summary(a) => summary(a),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// A directory argument resolves to the default file inside it.
fn resolve(path: &Path, default_name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(default_name)
    } else {
        path.to_path_buf()
    }
}

fn scratch_dir() -> Result<PathBuf> {
    let dir = std::env::var_os(SCRATCH_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    create_dir(&dir)?;
    Ok(dir)
}

fn delimiter(s: &str) -> Result<Delimiter> {
    s.parse()
}

fn process(a: &ProcessArgs) -> Result<()> {
    let mut timer = StageTimer::new();
    create_dir(&a.out)?;
    let report = if let Some(prefix) = &a.plink {
        if !(0.0..=0.5).contains(&a.maf) {
            return Err(Error::Config(format!("--maf {} must lie in [0, 0.5]", a.maf)));
        }
        let opts = IngestOptions {
            maf_min: a.maf,
            overwrite: a.overwrite,
        };
        let ing = process_plink(prefix, &a.out, &opts)?;
        timer.lap("decode");
        ing.report.render()
    } else {
        let path = a.delimited.as_ref().expect("clap requires one input");
        if a.maf > 0.0 {
            log::warn!("--maf applies to PLINK genotypes only and is ignored for delimited input");
        }
        let opts = DelimitedOptions {
            delimiter: delimiter(&a.delimiter)?,
            has_header: a.header,
            id_column: a.id_column,
        };
        let m = process_delimited(path, a.out.join(GENOTYPE_FILE), opts, a.overwrite)?;
        timer.lap("decode");
        let text = format!("n_samples:{}\nn_columns:{}\n", m.n_rows(), m.n_cols());
        write_file(&a.out.join(REPORT_FILE), &text)?;
        text
    };
    print!("{report}");
    timer.lap("report");
    write_timings(&a.out, timer.stages(), |_| "ingest", timer.elapsed())
}

fn only_other_column(table: &IdTable, id_col: &str, what: &str) -> Result<Vec<String>> {
    table.column(id_col)?;
    Ok(table
        .header
        .iter()
        .filter(|h| *h != id_col)
        .cloned()
        .collect::<Vec<_>>())
    .and_then(|cols| {
        if cols.is_empty() {
            Err(Error::Config(format!("{what} table has no columns besides {id_col}")))
        } else {
            Ok(cols)
        }
    })
}

fn design(a: &DesignArgs) -> Result<()> {
    let mut timer = StageTimer::new();
    let data = resolve(&a.data, GENOTYPE_FILE);
    let predictors = FileMatrix::open(&data)?;
    let delim = delimiter(&a.delimiter)?;
    let outcome = IdTable::read(&a.outcome, delim)?;
    let outcome_col = match &a.outcome_col {
        Some(c) => c.clone(),
        None => {
            let cols = only_other_column(&outcome, &a.id_col, "outcome")?;
            if cols.len() != 1 {
                return Err(Error::Config(format!(
                    "outcome table has {} value columns; choose one with --outcome-col",
                    cols.len()
                )));
            }
            cols[0].clone()
        }
    };
    let covariates = match &a.covariates {
        None => None,
        Some(path) => {
            let table = IdTable::read(path, delim)?;
            let columns = if a.covariate_cols.is_empty() {
                only_other_column(&table, &a.id_col, "covariate")?
            } else {
                a.covariate_cols.clone()
            };
            Some(CovariateSpec {
                table,
                id_col: a.id_col.clone(),
                columns,
            })
        }
    };
    timer.lap("load");
    let out = if a.out.extension().is_some_and(|e| e == "bk") {
        if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        a.out.clone()
    } else {
        create_dir(&a.out)?;
        a.out.join(DESIGN_FILE)
    };
    let opts = DesignOptions {
        id_col: a.id_col.clone(),
        outcome_col,
        covariates,
        overwrite: a.overwrite,
    };
    let d = create_design(&predictors, &outcome, &opts, &out)?;
    timer.lap("standardize");
    let n_cov = d.penalty_factor.iter().filter(|&&v| v == 0.0).count();
    println!("design:{}", out.display());
    println!("n_samples:{}", d.n());
    println!("n_features:{}", d.n_penalized());
    println!("n_covariates:{n_cov}");
    println!("n_samples_dropped:{}", d.dropped_samples.len());
    println!("n_features_dropped:{}", d.dropped_features.len());
    let dir = out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    timer.lap("report");
    write_timings(dir, timer.stages(), |_| "design", timer.elapsed())
}

fn path_options(a: &PathArgs) -> Result<PathOptions> {
    let opts = PathOptions {
        penalty: a.penalty,
        gamma: a.gamma,
        nlambda: a.nlambda,
        lambda_min_ratio: a.lambda_min_ratio,
        tol: a.tol,
        max_iter: a.max_iter,
        lambda: (!a.lambda.is_empty()).then(|| a.lambda.clone()),
    };
    opts.validate()?;
    if let Some(eta) = a.eta {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::Config(format!("--eta {eta} must lie in [0, 1)")));
        }
    }
    Ok(opts)
}

fn write_fit_outputs(out: &Path, fit: &FitPath) -> Result<()> {
    write_file(&out.join(PATHS_SVG), &paths_svg(fit))
}

fn fit(a: &FitArgs, res: &Resources) -> Result<()> {
    let mut timer = StageTimer::new();
    let opts = path_options(&a.path)?;
    let design = Design::open(resolve(&a.design, DESIGN_FILE))?;
    let decomposition = a.load_decomp.as_ref().map(Decomposition::load).transpose()?;
    let scratch = scratch_dir()?;
    create_dir(&a.out)?;
    timer.lap("load");
    let prep = PrepOptions {
        eta: a.path.eta,
        decomposition,
    };
    let (fit, vf) = plmm(&design, &opts, prep, res, &scratch)?;
    timer.lap_split(&fit.timings, "setup");
    if let Some(path) = &a.save_decomp {
        vf.decomp.save(path)?;
        timer.lap("save_decomposition");
    }
    write_fit(&a.out, &fit)?;
    write_fit_outputs(&a.out, &fit)?;
    let last = fit.n_lambda() - 1;
    print!("{}", summarize(&fit, last)?.render());
    println!("eta: {:.6}", fit.eta);
    timer.lap("write");
    write_timings(&a.out, timer.stages(), fit_category, timer.elapsed())
}

fn cv(a: &CvArgs, res: &Resources) -> Result<()> {
    let mut timer = StageTimer::new();
    let opts = path_options(&a.path)?;
    let design = Design::open(resolve(&a.design, DESIGN_FILE))?;
    let scratch = scratch_dir()?;
    create_dir(&a.out)?;
    timer.lap("load");
    let cvo = CvOptions {
        folds: a.nfolds,
        seed: a.seed,
        prediction: a.prediction,
    };
    let (result, full) = cv_plmm(&design, &opts, &cvo, a.path.eta, res, &scratch)?;
    timer.lap_split(&result.fit.timings, "folds");
    if let Some(path) = &a.save_decomp {
        full.decomp.save(path)?;
        timer.lap("save_decomposition");
    }
    write_cv(&a.out, &result, design.sample_ids(), &cvo)?;
    write_fit_outputs(&a.out, &result.fit)?;
    write_file(
        &a.out.join(CVE_SVG),
        &cve_svg(&result.lambda, &result.cve, &result.cvse, result.lambda_min_index),
    )?;
    print!("{}", result.summary(result.lambda_min_index)?.render());
    println!("eta: {:.6}", result.fit.eta);
    timer.lap("write");
    write_timings(&a.out, timer.stages(), fit_category, timer.elapsed())
}

/// `(cve, cvse)` per penalty value.
type CvColumns = (Vec<f64>, Vec<f64>);

/// Zero-based index from a 1-based flag, defaulting to the cross-validated
/// minimum when the directory holds cross-validation output.
fn lambda_index(dir: &Path, index: Option<usize>, fit: &FitPath) -> Result<(usize, Option<CvColumns>)> {
    let cve = read_cve(dir)?;
    if let Some((l, _, _)) = &cve {
        if l.len() != fit.n_lambda() {
            return Err(Error::Corrupt {
                path: dir.to_path_buf(),
                reason: "cve.txt and lambda.txt have different lengths".into(),
            });
        }
    }
    let k = match (index, &cve) {
        (Some(0), _) => return Err(Error::Config("--index counts from 1".into())),
        (Some(i), _) => i - 1,
        (None, Some((_, c, _))) => first_argmin(c),
        (None, None) => {
            return Err(Error::Config(
                "--index is required for a fit without cross-validation".into(),
            ))
        }
    };
    fit.check_index(k)?;
    Ok((k, cve.map(|(_, c, s)| (c, s))))
}

/// Reorders the table's columns to `names`; extra columns are ignored.
fn align_columns(col_names: &[String], values: &Array2<f64>, names: &[String], source: &Path) -> Result<Array2<f64>> {
    let index: HashMap<&str, usize> = col_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let missing: Vec<&str> = names
        .iter()
        .filter(|n| !index.contains_key(n.as_str()))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        let shown = missing.iter().take(5).copied().collect::<Vec<_>>().join(", ");
        return Err(Error::Data(format!(
            "{}: missing {} feature column(s) of the fit: {shown}",
            source.display(),
            missing.len()
        )));
    }
    if col_names.len() > names.len() {
        log::warn!(
            "{}: {} columns not in the fit are ignored",
            source.display(),
            col_names.len() - names.len()
        );
    }
    let cols: Vec<usize> = names.iter().map(|n| index[n.as_str()]).collect();
    Ok(values.select(ndarray::Axis(1), &cols))
}

fn predict(a: &PredictArgs, res: &Resources) -> Result<()> {
    let fit = read_fit(&a.fit)?;
    let (k, _) = lambda_index(&a.fit, a.index, &fit)?;
    let file = fs::File::open(&a.data).map_err(io_err(&a.data))?;
    let opts = DelimitedOptions {
        delimiter: delimiter(&a.delimiter)?,
        has_header: true,
        id_column: true,
    };
    let table = parse_delimited(std::io::BufReader::new(file), opts, &a.data.display().to_string())?;
    let x = align_columns(&table.col_names, &table.values, &fit.feature_names, &a.data)?;
    let yhat = match a.prediction {
        PredictionType::Linear => predict_linear(&fit, x.view(), k)?,
        PredictionType::Blup => {
            let (Some(design_path), Some(decomp_path)) = (&a.design, &a.decomp) else {
                return Err(Error::Config(
                    "blup prediction needs the training design (--design) and its saved decomposition (--decomp); \
                     use --type linear without them"
                        .into(),
                ));
            };
            let design = Design::open(resolve(design_path, DESIGN_FILE))?;
            let decomp = Decomposition::load(decomp_path)?.with_eta(fit.eta);
            predict_blup(&fit, &design, &decomp, x.view(), k, res)?
        }
    };
    let mut text = String::from("id\tprediction\n");
    for (id, v) in table.row_ids.iter().zip(&yhat) {
        let _ = writeln!(text, "{id}\t{v:?}");
    }
    match &a.out {
        Some(path) => write_file(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn summary(a: &SummaryArgs) -> Result<()> {
    let fit = read_fit(&a.fit)?;
    let (k, cve) = lambda_index(&a.fit, a.index, &fit)?;
    let s = match cve {
        Some((c, e)) => summarize_cv(&fit, &c, &e, k)?,
        None => summarize(&fit, k)?,
    };
    print!("{}", s.render());
    Ok(())
}
