//! PLINK 1 binary triplets: `.fam` (samples), `.bim` (variants) and
//! SNP-major `.bed` genotypes.
//!
//! Dosages count copies of allele A1 (the fifth `.bim` field). Each `.bed`
//! byte packs four samples, first sample in the two least-significant bits:
//!
//! | code | genotype        | dosage |
//! |------|-----------------|--------|
//! | 00   | homozygous A1   | 2      |
//! | 01   | missing         | 255    |
//! | 10   | heterozygous    | 1      |
//! | 11   | homozygous A2   | 0      |

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use memmap2::Mmap;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::store::{column_blocks, ElementKind, FileMatrix, DEFAULT_BLOCK_WIDTH, MISSING_DOSAGE};

use super::IngestReport;

pub const BED_MAGIC: [u8; 3] = [0x6C, 0x1B, 0x01];

const CODE_TO_DOSAGE: [u8; 4] = [2, MISSING_DOSAGE, 1, 0];

/// Dosages for all four samples packed in each possible byte value.
static BYTE_TO_DOSAGES: [[u8; 4]; 256] = {
    let mut table = [[0u8; 4]; 256];
    let mut b = 0;
    while b < 256 {
        let mut k = 0;
        while k < 4 {
            table[b][k] = CODE_TO_DOSAGE[(b >> (2 * k)) & 0b11];
            k += 1;
        }
        b += 1;
    }
    table
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub fid: String,
    pub iid: String,
    pub father: String,
    pub mother: String,
    pub sex: String,
    pub phenotype_raw: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleTable {
    pub samples: Vec<Sample>,
}

impl SampleTable {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.iid.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub chrom: String,
    pub variant_id: String,
    pub genetic_dist: f64,
    pub bp_position: i64,
    pub allele1: String,
    pub allele2: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariantTable {
    pub variants: Vec<Variant>,
}

impl VariantTable {
    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.variants.iter().map(|v| v.variant_id.clone()).collect()
    }
}

fn fields_of<'a>(line: &'a str, source: &str, line_no: usize) -> Result<Option<Vec<&'a str>>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    match fields.len() {
        0 => Ok(None),
        n if n < 6 => Err(Error::parse(
            source,
            line_no,
            format!("expected 6 whitespace-delimited fields, found {n}"),
        )),
        _ => Ok(Some(fields)),
    }
}

pub fn parse_fam<R: BufRead>(reader: R, source: &str) -> Result<SampleTable> {
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let Some(f) = fields_of(&line, source, i + 1)? else {
            continue;
        };
        samples.push(Sample {
            fid: f[0].to_string(),
            iid: f[1].to_string(),
            father: f[2].to_string(),
            mother: f[3].to_string(),
            sex: f[4].to_string(),
            phenotype_raw: f[5].to_string(),
        });
    }
    if samples.is_empty() {
        return Err(Error::parse(source, 0, "no samples"));
    }
    Ok(SampleTable { samples })
}

pub fn read_fam(path: impl AsRef<Path>) -> Result<SampleTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_fam(BufReader::new(file), &path.display().to_string())
}

pub fn parse_bim<R: BufRead>(reader: R, source: &str) -> Result<VariantTable> {
    let mut variants = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let Some(f) = fields_of(&line, source, line_no)? else {
            continue;
        };
        let genetic_dist = f[2]
            .parse::<f64>()
            .map_err(|_| Error::parse(source, line_no, format!("genetic distance {:?} is not a number", f[2])))?;
        let bp_position = f[3]
            .parse::<i64>()
            .map_err(|_| Error::parse(source, line_no, format!("position {:?} is not an integer", f[3])))?;
        if !seen.insert(f[1].to_string()) {
            return Err(Error::parse(source, line_no, format!("duplicate variant id {}", f[1])));
        }
        variants.push(Variant {
            chrom: f[0].to_string(),
            variant_id: f[1].to_string(),
            genetic_dist,
            bp_position,
            allele1: f[4].to_string(),
            allele2: f[5].to_string(),
        });
    }
    if variants.is_empty() {
        return Err(Error::parse(source, 0, "no variants"));
    }
    Ok(VariantTable { variants })
}

pub fn read_bim(path: impl AsRef<Path>) -> Result<VariantTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_bim(BufReader::new(file), &path.display().to_string())
}

pub fn bytes_per_variant(n_samples: usize) -> usize {
    n_samples.div_ceil(4)
}

/// Validated view over the bytes of a SNP-major `.bed` file.
#[derive(Debug, Clone, Copy)]
pub struct BedReader<'a> {
    genotypes: &'a [u8],
    n_samples: usize,
    n_variants: usize,
    stride: usize,
}

impl<'a> BedReader<'a> {
    pub fn new(bytes: &'a [u8], n_samples: usize, n_variants: usize) -> Result<Self> {
        if bytes.len() < 3 || bytes[0..2] != BED_MAGIC[0..2] {
            return Err(Error::Bed("missing magic bytes 0x6c 0x1b".into()));
        }
        match bytes[2] {
            0x01 => {}
            0x00 => return Err(Error::Bed("sample-major .bed files are not supported".into())),
            other => return Err(Error::Bed(format!("unknown mode byte {other:#04x}"))),
        }
        if n_samples == 0 || n_variants == 0 {
            return Err(Error::Bed("sample and variant counts must be positive".into()));
        }
        let stride = bytes_per_variant(n_samples);
        let expected = stride
            .checked_mul(n_variants)
            .and_then(|v| v.checked_add(3))
            .ok_or_else(|| Error::Bed("dimensions overflow".into()))?;
        if bytes.len() != expected {
            return Err(Error::Bed(format!(
                "expected {expected} bytes for {n_samples} samples x {n_variants} variants, found {}",
                bytes.len()
            )));
        }
        Ok(BedReader {
            genotypes: &bytes[3..],
            n_samples,
            n_variants,
            stride,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_variants(&self) -> usize {
        self.n_variants
    }

    /// Decodes variant `j` into `out` (length `n_samples`) and returns the
    /// number of missing calls. Padding bits in the final byte are ignored.
    pub fn decode_variant(&self, j: usize, out: &mut [u8]) -> usize {
        assert_eq!(out.len(), self.n_samples, "output length must equal sample count");
        let packed = &self.genotypes[j * self.stride..(j + 1) * self.stride];
        let mut chunks = out.chunks_mut(4);
        for (&byte, chunk) in packed.iter().zip(&mut chunks) {
            let dosages = &BYTE_TO_DOSAGES[byte as usize];
            chunk.copy_from_slice(&dosages[..chunk.len()]);
        }
        out.iter().filter(|&&d| d == MISSING_DOSAGE).count()
    }
}

/// Decodes a `.bed` file into `out`, an `n_samples x n_variants` dosage matrix.
pub fn decode_bed(
    bed_path: impl AsRef<Path>,
    n_samples: usize,
    n_variants: usize,
    out: &mut FileMatrix,
) -> Result<IngestReport> {
    let bed_path = bed_path.as_ref();
    let file = File::open(bed_path).map_err(|e| Error::io(bed_path, e))?;
    // SAFETY: read-only map of an input file we do not mutate.
    let map = unsafe { Mmap::map(&file) }.map_err(|e| Error::io(bed_path, e))?;
    decode_bed_bytes(&map, n_samples, n_variants, out)
}

pub fn decode_bed_bytes(
    bytes: &[u8],
    n_samples: usize,
    n_variants: usize,
    out: &mut FileMatrix,
) -> Result<IngestReport> {
    let reader = BedReader::new(bytes, n_samples, n_variants)?;
    if out.kind() != ElementKind::Dosage || out.n_rows() != n_samples || out.n_cols() != n_variants {
        return Err(Error::Config(format!(
            "output must be a {n_samples}x{n_variants} dosage matrix, got {}x{} {}",
            out.n_rows(),
            out.n_cols(),
            out.kind().tag()
        )));
    }
    let mut n_missing = 0u64;
    for block in column_blocks(n_variants, DEFAULT_BLOCK_WIDTH) {
        let bytes = out.dosage_cols_mut(block.clone())?;
        n_missing += bytes
            .par_chunks_mut(n_samples)
            .enumerate()
            .map(|(k, col)| reader.decode_variant(block.start + k, col) as u64)
            .sum::<u64>();
        out.release(block.start, block.len());
    }
    Ok(IngestReport {
        n_samples,
        n_variants_read: n_variants,
        n_missing,
        ..IngestReport::default()
    })
}

/// Packs one variant's dosages into `.bed` bytes.
pub fn encode_variant(dosages: &[u8], out: &mut [u8]) -> Result<()> {
    if out.len() != bytes_per_variant(dosages.len()) {
        return Err(Error::Config("output buffer has the wrong length".into()));
    }
    out.fill(0);
    for (i, &d) in dosages.iter().enumerate() {
        let code = match d {
            2 => 0b00,
            MISSING_DOSAGE => 0b01,
            1 => 0b10,
            0 => 0b11,
            other => return Err(Error::data(format!("{other} is not a valid dosage"))),
        };
        out[i / 4] |= code << (2 * (i % 4));
    }
    Ok(())
}

/// Streams variants into a `.bed` file.
pub struct BedWriter<W: Write> {
    inner: W,
    n_samples: usize,
    buf: Vec<u8>,
    n_written: usize,
}

impl<W: Write> BedWriter<W> {
    pub fn new(mut inner: W, n_samples: usize) -> std::io::Result<Self> {
        inner.write_all(&BED_MAGIC)?;
        Ok(BedWriter {
            inner,
            n_samples,
            buf: vec![0; bytes_per_variant(n_samples)],
            n_written: 0,
        })
    }

    pub fn write_variant(&mut self, dosages: &[u8]) -> Result<()> {
        if dosages.len() != self.n_samples {
            return Err(Error::Config(format!(
                "variant has {} dosages, expected {}",
                dosages.len(),
                self.n_samples
            )));
        }
        encode_variant(dosages, &mut self.buf)?;
        self.inner
            .write_all(&self.buf)
            .map_err(|e| Error::io("<bed writer>", e))?;
        self.n_written += 1;
        Ok(())
    }

    pub fn n_written(&self) -> usize {
        self.n_written
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn write_fam<W: Write>(mut w: W, samples: &SampleTable) -> std::io::Result<()> {
    for s in &samples.samples {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            s.fid, s.iid, s.father, s.mother, s.sex, s.phenotype_raw
        )?;
    }
    w.flush()
}

pub fn write_bim<W: Write>(mut w: W, variants: &VariantTable) -> std::io::Result<()> {
    for v in &variants.variants {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            v.chrom, v.variant_id, v.genetic_dist, v.bp_position, v.allele1, v.allele2
        )?;
    }
    w.flush()
}
