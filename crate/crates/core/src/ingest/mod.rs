//! Getting raw data on disk: PLINK triplets and delimited text become
//! [`FileMatrix`] stores with sample and variant metadata attached.

pub mod delimited;
pub mod plink;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::store::{column_blocks, ElementKind, FileMatrix, DEFAULT_BLOCK_WIDTH, MISSING_DOSAGE};

pub use delimited::{parse_delimited, process_delimited, DelimitedOptions, DelimitedTable, Delimiter};
pub use plink::{
    decode_bed, decode_bed_bytes, parse_bim, parse_fam, read_bim, read_fam, BedReader, BedWriter, Sample, SampleTable,
    Variant, VariantTable,
};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub n_samples: usize,
    pub n_variants_read: usize,
    pub n_variants_dropped_constant: usize,
    pub n_variants_dropped_maf: usize,
    /// Missing calls seen while decoding.
    pub n_missing: u64,
    /// Missing calls replaced in retained columns.
    pub n_missing_imputed: u64,
    /// Per variant read, in input order.
    pub maf: Vec<f64>,
    pub missing_rate: Vec<f64>,
    pub dropped: Vec<String>,
}

impl IngestReport {
    pub fn n_variants_retained(&self) -> usize {
        self.n_variants_read - self.n_variants_dropped_constant - self.n_variants_dropped_maf
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n_samples:{}", self.n_samples);
        let _ = writeln!(out, "n_variants_read:{}", self.n_variants_read);
        let _ = writeln!(out, "n_variants_retained:{}", self.n_variants_retained());
        let _ = writeln!(out, "n_variants_dropped_constant:{}", self.n_variants_dropped_constant);
        let _ = writeln!(out, "n_variants_dropped_maf:{}", self.n_variants_dropped_maf);
        let _ = writeln!(out, "n_missing:{}", self.n_missing);
        let _ = writeln!(out, "n_missing_imputed:{}", self.n_missing_imputed);
        out.push_str("dropped:\n");
        for name in &self.dropped {
            out.push_str(name);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct DosageStats {
    n_missing: usize,
    mean: f64,
    constant: bool,
}

fn dosage_stats(col: &[u8]) -> DosageStats {
    let mut sum = 0u64;
    let mut n_obs = 0usize;
    let (mut lo, mut hi) = (u8::MAX, u8::MIN);
    for &d in col {
        if d != MISSING_DOSAGE {
            sum += u64::from(d);
            n_obs += 1;
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    DosageStats {
        n_missing: col.len() - n_obs,
        mean: if n_obs == 0 {
            f64::NAN
        } else {
            sum as f64 / n_obs as f64
        },
        constant: n_obs == 0 || lo == hi,
    }
}

/// Replaces missing dosages by the observed column mean and drops constant
/// columns and columns whose minor allele frequency is below `maf_min`.
/// Retained columns are written, in input order, to a float64 store at `out`.
pub fn impute_and_filter(
    m: &FileMatrix,
    maf_min: f64,
    out: impl AsRef<Path>,
    overwrite: bool,
) -> Result<(FileMatrix, IngestReport)> {
    if m.kind() != ElementKind::Dosage {
        return Err(Error::Config("impute_and_filter expects a dosage matrix".into()));
    }
    let (n, p) = (m.n_rows(), m.n_cols());
    let mut stats = Vec::with_capacity(p);
    for block in column_blocks(p, DEFAULT_BLOCK_WIDTH) {
        let part: Vec<DosageStats> = block
            .clone()
            .into_par_iter()
            .map(|j| m.dosage_col(j).map(dosage_stats))
            .collect::<Result<_>>()?;
        stats.extend(part);
        m.release(block.start, block.len());
    }

    let mut report = IngestReport {
        n_samples: n,
        n_variants_read: p,
        ..IngestReport::default()
    };
    let mut keep = Vec::new();
    for (j, s) in stats.iter().enumerate() {
        let freq = s.mean / 2.0;
        let maf = if s.mean.is_nan() { 0.0 } else { freq.min(1.0 - freq) };
        report.maf.push(maf);
        report.missing_rate.push(s.n_missing as f64 / n as f64);
        report.n_missing += s.n_missing as u64;
        if s.constant {
            report.n_variants_dropped_constant += 1;
            report.dropped.push(m.col_names()[j].clone());
        } else if maf < maf_min {
            report.n_variants_dropped_maf += 1;
            report.dropped.push(m.col_names()[j].clone());
        } else {
            report.n_missing_imputed += s.n_missing as u64;
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return Err(Error::data(format!(
            "all {p} columns were dropped ({} constant, {} below MAF {maf_min})",
            report.n_variants_dropped_constant, report.n_variants_dropped_maf
        )));
    }

    let names = keep.iter().map(|&j| m.col_names()[j].clone()).collect();
    let mut dst = FileMatrix::create_named(out, ElementKind::Float64, m.row_ids().to_vec(), names, overwrite)?;
    for (k, chunk) in keep.chunks(DEFAULT_BLOCK_WIDTH).enumerate() {
        let mut block = Array2::<f64>::zeros((n, chunk.len()));
        block
            .axis_iter_mut(ndarray::Axis(1))
            .into_par_iter()
            .zip(chunk.par_iter())
            .try_for_each(|(mut dst_col, &j)| -> Result<()> {
                let mean = stats[j].mean;
                for (d, &b) in dst_col.iter_mut().zip(m.dosage_col(j)?) {
                    *d = if b == MISSING_DOSAGE { mean } else { f64::from(b) };
                }
                Ok(())
            })?;
        let first = k * DEFAULT_BLOCK_WIDTH;
        dst.write_col_block(first, block.view())?;
        dst.release(first, chunk.len());
        m.release(chunk[0], chunk[chunk.len() - 1] - chunk[0] + 1);
    }
    dst.flush()?;
    Ok((dst, report))
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub maf_min: f64,
    pub overwrite: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            maf_min: 0.0,
            overwrite: false,
        }
    }
}

/// Output of [`process_plink`].
#[derive(Debug)]
pub struct Ingested {
    pub samples: SampleTable,
    /// Retained variants, aligned with the columns of `matrix`.
    pub variants: VariantTable,
    pub dosage_path: PathBuf,
    pub matrix: FileMatrix,
    pub report: IngestReport,
}

pub const DOSAGE_FILE: &str = "dosage.bk";
pub const GENOTYPE_FILE: &str = "genotypes.bk";
pub const REPORT_FILE: &str = "ingest_report.txt";
pub const VARIANT_FILE: &str = "variants.bim";

/// Reads `<prefix>.fam/.bim/.bed`, writes the raw dosage store and the
/// imputed, filtered float64 store into `out_dir`.
pub fn process_plink(prefix: impl AsRef<Path>, out_dir: impl AsRef<Path>, opts: &IngestOptions) -> Result<Ingested> {
    let prefix = prefix.as_ref();
    let out_dir = out_dir.as_ref();
    let with_ext = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let (fam, bim, bed) = (with_ext(".fam"), with_ext(".bim"), with_ext(".bed"));
    for f in [&fam, &bim, &bed] {
        if !f.is_file() {
            return Err(Error::io(
                f.as_path(),
                std::io::Error::new(std::io::ErrorKind::NotFound, "PLINK input file not found"),
            ));
        }
    }
    let samples = read_fam(&fam)?;
    let variants = read_bim(&bim)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let dosage_path = out_dir.join(DOSAGE_FILE);
    let mut dosage = FileMatrix::create_named(
        &dosage_path,
        ElementKind::Dosage,
        samples.iids(),
        variants.ids(),
        opts.overwrite,
    )?;
    let decoded = decode_bed(&bed, samples.len(), variants.len(), &mut dosage)?;
    dosage.flush()?;

    let (matrix, mut report) = impute_and_filter(&dosage, opts.maf_min, out_dir.join(GENOTYPE_FILE), opts.overwrite)?;
    report.n_missing = decoded.n_missing;

    let retained: std::collections::HashSet<&str> = matrix.col_names().iter().map(String::as_str).collect();
    let variants = VariantTable {
        variants: variants
            .variants
            .into_iter()
            .filter(|v| retained.contains(v.variant_id.as_str()))
            .collect(),
    };
    let bim_out = out_dir.join(VARIANT_FILE);
    plink::write_bim(
        std::io::BufWriter::new(fs::File::create(&bim_out).map_err(|e| Error::io(&bim_out, e))?),
        &variants,
    )
    .map_err(|e| Error::io(&bim_out, e))?;
    let report_path = out_dir.join(REPORT_FILE);
    fs::write(&report_path, report.render()).map_err(|e| Error::io(&report_path, e))?;

    Ok(Ingested {
        samples,
        variants,
        dosage_path,
        matrix,
        report,
    })
}
