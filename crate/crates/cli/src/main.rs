//! `plmmkit`: process genotypes, build a design, fit, cross-validate,
//! predict and summarize.

mod commands;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use plmmkit::inference::PredictionType;
use plmmkit::path::Penalty;
use plmmkit::store::DEFAULT_BLOCK_WIDTH;
use plmmkit::Error;

#[derive(Debug, Parser)]
#[command(
    name = "plmmkit",
    version,
    about = "Penalized linear mixed models on file-backed data"
)]
pub struct Cli {
    /// Worker threads for every parallel section (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Upper bound on in-memory working storage, in bytes; accepts K, M and G suffixes.
    #[arg(long, global = true, value_parser = parse_bytes)]
    pub memory_budget: Option<u64>,
    /// Columns per block when streaming over stored matrices.
    #[arg(long, global = true, default_value_t = DEFAULT_BLOCK_WIDTH)]
    pub block_width: usize,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a PLINK triplet or a delimited file into a backing store.
    Process(ProcessArgs),
    /// Align an outcome, add covariates and standardize into a design.
    Design(DesignArgs),
    /// Fit a regularization path on a design.
    Fit(FitArgs),
    /// Cross-validate the full fitting procedure.
    Cv(CvArgs),
    /// Predict new samples from a fit.
    Predict(PredictArgs),
    /// Summarize a fit or cross-validation at one penalty value.
    Summary(SummaryArgs),
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    /// PLINK prefix (reads PREFIX.bed, PREFIX.bim, PREFIX.fam).
    #[arg(long, conflicts_with = "delimited", required_unless_present = "delimited")]
    pub plink: Option<PathBuf>,
    /// Delimited numeric file, one sample per row.
    #[arg(long)]
    pub delimited: Option<PathBuf>,
    /// Field separator for --delimited: a single character, "tab" or "whitespace".
    #[arg(long, default_value = ",")]
    pub delimiter: String,
    /// The delimited file has a header row.
    #[arg(long)]
    pub header: bool,
    /// The first field of each delimited row is a sample id.
    #[arg(long)]
    pub id_column: bool,
    /// Drop variants with minor allele frequency below this.
    #[arg(long, default_value_t = 0.0)]
    pub maf: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Processed store: a `.bk` file or a `process` output directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Outcome table with a header row.
    #[arg(long)]
    pub outcome: PathBuf,
    #[arg(long, default_value = "id")]
    pub id_col: String,
    /// Outcome column (default: the only non-id column).
    #[arg(long)]
    pub outcome_col: Option<String>,
    /// Covariate table with a header row, keyed by the same id column.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// Covariate columns to use (default: every non-id column).
    #[arg(long, value_delimiter = ',')]
    pub covariate_cols: Vec<String>,
    /// Separator for outcome and covariate tables.
    #[arg(long, default_value = "whitespace")]
    pub delimiter: String,
    /// Output `.bk` path, or a directory to hold `design.bk`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long, default_value = "lasso")]
    pub penalty: Penalty,
    /// Concavity for MCP (default 3) and SCAD (default 3.7).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub nlambda: usize,
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
    /// Explicit decreasing penalty values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Fix the variance ratio instead of estimating it.
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Design `.bk` file or directory holding `design.bk`.
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub path: PathArgs,
    /// Save the eigendecomposition and variance ratio here.
    #[arg(long)]
    pub save_decomp: Option<PathBuf>,
    /// Reuse a saved eigendecomposition.
    #[arg(long)]
    pub load_decomp: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub path: PathArgs,
    #[arg(long, default_value_t = 5)]
    pub nfolds: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "type", default_value = "blup")]
    pub prediction: PredictionType,
    /// Save the full-data eigendecomposition here.
    #[arg(long)]
    pub save_decomp: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Output directory of `fit` or `cv`.
    #[arg(long)]
    pub fit: PathBuf,
    /// New samples: header row, id in the first column, one column per feature.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "whitespace")]
    pub delimiter: String,
    #[arg(long = "type", default_value = "blup")]
    pub prediction: PredictionType,
    /// Penalty index, from 1 (default: the cross-validated choice).
    #[arg(long)]
    pub index: Option<usize>,
    /// Training design, needed for blup.
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Saved decomposition of the training design, needed for blup.
    #[arg(long)]
    pub decomp: Option<PathBuf>,
    /// Write predictions here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummaryArgs {
    #[arg(long)]
    pub fit: PathBuf,
    /// Penalty index, from 1 (default: the cross-validated choice).
    #[arg(long)]
    pub index: Option<usize>,
}

fn parse_bytes(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let (digits, mult) = match s.char_indices().last() {
        Some((i, c)) if c.is_ascii_alphabetic() => {
            let m = match c.to_ascii_uppercase() {
                'K' => 1u64 << 10,
                'M' => 1 << 20,
                'G' => 1 << 30,
                'T' => 1 << 40,
                _ => return Err(format!("unknown size suffix {c:?}")),
            };
            (&s[..i], m)
        }
        _ => (s, 1),
    };
    let v: f64 = digits.parse().map_err(|_| format!("{s:?} is not a size"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("{s:?} is not a positive size"));
    }
    Ok((v * mult as f64) as u64)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Capacity { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_sizes() {
        assert_eq!(parse_bytes("1024"), Ok(1024));
        assert_eq!(parse_bytes("2K"), Ok(2048));
        assert_eq!(parse_bytes("1.5m"), Ok(1_572_864));
        assert_eq!(parse_bytes("1G"), Ok(1 << 30));
        assert!(parse_bytes("0").is_err());
        assert!(parse_bytes("3Q").is_err());
        assert!(parse_bytes("lots").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
