//! Synthetic genotype and outcome generators, and PLINK fixture writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ShapeBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal};

use crate::decomp::eigen_sym;
use crate::error::{Error, Result};
use crate::ingest::plink::{write_bim, write_fam, BedWriter, Sample, SampleTable, Variant, VariantTable};
use crate::store::MISSING_DOSAGE;

#[derive(Debug, Clone)]
pub struct Simulated {
    /// `n x p` allele dosages.
    pub genotypes: Array2<u8>,
    pub y: Vec<f64>,
    pub causal: Vec<usize>,
    /// Family or population label of each sample.
    pub groups: Vec<usize>,
}

impl Simulated {
    pub fn n(&self) -> usize {
        self.genotypes.nrows()
    }

    pub fn p(&self) -> usize {
        self.genotypes.ncols()
    }

    /// Dosages as a column-major float matrix.
    pub fn x(&self) -> Array2<f64> {
        let mut x = Array2::zeros(self.genotypes.dim().f());
        x.zip_mut_with(&self.genotypes, |a, &g| *a = f64::from(g));
        x
    }

    pub fn sample_ids(&self) -> Vec<String> {
        (0..self.n()).map(|i| format!("s{i}")).collect()
    }

    pub fn variant_ids(&self) -> Vec<String> {
        (0..self.p()).map(variant_id).collect()
    }
}

pub fn variant_id(j: usize) -> String {
    format!("rs{}", j + 1)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn binomial2(rng: &mut ChaCha8Rng, f: f64) -> u8 {
    Binomial::new(2, f).expect("valid frequency").sample(rng) as u8
}

/// Adds `sum_j effect * standardized(x_j)` over `causal` to `y`.
fn add_effects(y: &mut [f64], g: &Array2<u8>, causal: &[usize], effects: &[f64]) {
    for (&j, &b) in causal.iter().zip(effects) {
        let col: Vec<f64> = g.column(j).iter().map(|&v| f64::from(v)).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64).sqrt();
        if sd > 0.0 {
            for (yi, v) in y.iter_mut().zip(&col) {
                *yi += b * (v - mean) / sd;
            }
        }
    }
}

fn rescale_to_variance(v: &mut [f64], target: f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let s = if var > 0.0 { (target / var).sqrt() } else { 0.0 };
    v.iter_mut().for_each(|x| *x = (*x - mean) * s);
}

/// Unrelated samples under Hardy-Weinberg equilibrium, minor allele
/// frequencies uniform on [0.05, 0.5]; the first `n_causal` variants carry
/// `effect` per standard deviation, plus unit-variance noise.
pub fn independent(n: usize, p: usize, n_causal: usize, effect: f64, seed: u64) -> Simulated {
    let mut r = rng(seed);
    let freqs: Vec<f64> = (0..p).map(|_| r.random_range(0.05..0.5)).collect();
    let genotypes = Array2::from_shape_fn((n, p), |(_, j)| binomial2(&mut r, freqs[j]));
    let mut y: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let causal: Vec<usize> = (0..n_causal.min(p)).collect();
    add_effects(&mut y, &genotypes, &causal, &vec![effect; causal.len()]);
    Simulated {
        genotypes,
        y,
        causal,
        groups: vec![0; n],
    }
}

/// Sibships: each family has two unrelated parents and `n / n_families`
/// children who each inherit one random allele from each parent. The outcome
/// is a polygenic score over every variant scaled to variance `h2`, plus
/// noise of variance `1 - h2`.
pub fn family_blocks(n: usize, n_families: usize, p: usize, h2: f64, seed: u64) -> Simulated {
    assert!(
        n_families > 0 && n.is_multiple_of(n_families),
        "n must split evenly into families"
    );
    let mut r = rng(seed);
    let size = n / n_families;
    let freqs: Vec<f64> = (0..p).map(|_| r.random_range(0.1..0.5)).collect();
    let mut genotypes = Array2::<u8>::zeros((n, p));
    let mut groups = Vec::with_capacity(n);
    for fam in 0..n_families {
        // four parental haplotypes per variant
        let parents: Vec<[u8; 4]> = freqs
            .iter()
            .map(|&f| std::array::from_fn(|_| u8::from(r.random_bool(f))))
            .collect();
        for c in 0..size {
            let i = fam * size + c;
            groups.push(fam);
            for (j, h) in parents.iter().enumerate() {
                let a = h[usize::from(r.random_bool(0.5))];
                let b = h[2 + usize::from(r.random_bool(0.5))];
                genotypes[[i, j]] = a + b;
            }
        }
    }
    let causal: Vec<usize> = (0..p).collect();
    let effects: Vec<f64> = (0..p).map(|_| r.sample(StandardNormal)).collect();
    let mut g = vec![0.0; n];
    add_effects(&mut g, &genotypes, &causal, &effects);
    rescale_to_variance(&mut g, h2);
    let mut noise: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    rescale_to_variance(&mut noise, 1.0 - h2);
    let y = g.iter().zip(&noise).map(|(a, b)| a + b).collect();
    Simulated {
        genotypes,
        y,
        causal,
        groups,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TwoPopulations {
    pub n: usize,
    pub p: usize,
    pub n_causal: usize,
    /// Per-standard-deviation effect of each causal variant.
    pub effect: f64,
    /// Outcome mean difference between the populations.
    pub shift: f64,
    /// Balding-Nichols differentiation.
    pub fst: f64,
}

/// Two equal-sized populations whose allele frequencies drift apart from a
/// shared ancestral frequency. The outcome mean differs by population, so
/// differentiated null variants are spuriously associated with it.
pub fn two_populations(cfg: TwoPopulations, seed: u64) -> Simulated {
    let mut r = rng(seed);
    let TwoPopulations { n, p, fst, .. } = cfg;
    let groups: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    let mut genotypes = Array2::<u8>::zeros((n, p));
    for j in 0..p {
        let f: f64 = r.random_range(0.1..0.9);
        let (a, b) = (f * (1.0 - fst) / fst, (1.0 - f) * (1.0 - fst) / fst);
        let beta = Beta::new(a, b).expect("valid shape");
        let pops: [f64; 2] = std::array::from_fn(|_| beta.sample(&mut r).clamp(0.02, 0.98));
        for i in 0..n {
            genotypes[[i, j]] = binomial2(&mut r, pops[groups[i]]);
        }
    }
    let mut y: Vec<f64> = (0..n)
        .map(|i| cfg.shift * groups[i] as f64 + r.sample::<f64, _>(StandardNormal))
        .collect();
    let causal: Vec<usize> = (0..cfg.n_causal.min(p)).collect();
    add_effects(&mut y, &genotypes, &causal, &vec![cfg.effect; causal.len()]);
    Simulated {
        genotypes,
        y,
        causal,
        groups,
    }
}

/// An `n x m(n-1)` matrix whose standardized relatedness matrix is exactly
/// `n/(n-1) (I - 11^T/n)`: every column is centered with the same norm and
/// the rows span the centered subspace isotropically.
pub fn exact_projection_design(n: usize, m: usize, seed: u64) -> Array2<f64> {
    assert!(n >= 3 && m >= 1);
    let k = n - 1;
    // Helmert basis of the centered subspace
    let mut v = Array2::<f64>::zeros((n, k));
    for c in 0..k {
        let norm = ((c + 1) as f64 * (c + 2) as f64).sqrt();
        for i in 0..=c {
            v[[i, c]] = 1.0 / norm;
        }
        v[[c + 1, c]] = -((c + 1) as f64) / norm;
    }
    let mut r = rng(seed);
    let mut x = Array2::<f64>::zeros((n, m * k).f());
    for b in 0..m {
        let a = Array2::from_shape_fn((k, k), |_| r.sample::<f64, _>(StandardNormal));
        let (q, _) = eigen_sym(&(&a + &a.t())).expect("symmetric");
        let block = v.dot(&q.t()) * (k as f64).sqrt();
        x.slice_mut(ndarray::s![.., b * k..(b + 1) * k]).assign(&block);
    }
    x
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Writes `prefix.{bed,bim,fam}` for `n` samples, filling variant `j` via
/// `fill(j, dosages)` (0, 1, 2 or [`MISSING_DOSAGE`]).
pub fn write_plink_with(
    prefix: impl AsRef<Path>,
    sample_ids: &[String],
    n_variants: usize,
    mut fill: impl FnMut(usize, &mut [u8]),
) -> Result<()> {
    let prefix = prefix.as_ref();
    let with_ext = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        std::path::PathBuf::from(s)
    };
    let n = sample_ids.len();
    let fam = with_ext(".fam");
    let samples = SampleTable {
        samples: sample_ids
            .iter()
            .map(|id| Sample {
                fid: id.clone(),
                iid: id.clone(),
                father: "0".into(),
                mother: "0".into(),
                sex: "0".into(),
                phenotype_raw: "-9".into(),
            })
            .collect(),
    };
    write_fam(BufWriter::new(File::create(&fam).map_err(io_err(&fam))?), &samples).map_err(io_err(&fam))?;
    let bim = with_ext(".bim");
    let variants = VariantTable {
        variants: (0..n_variants)
            .map(|j| Variant {
                chrom: "1".into(),
                variant_id: variant_id(j),
                genetic_dist: 0.0,
                bp_position: j as i64 + 1,
                allele1: "A".into(),
                allele2: "C".into(),
            })
            .collect(),
    };
    write_bim(BufWriter::new(File::create(&bim).map_err(io_err(&bim))?), &variants).map_err(io_err(&bim))?;
    let bed = with_ext(".bed");
    let file = BufWriter::new(File::create(&bed).map_err(io_err(&bed))?);
    let mut w = BedWriter::new(file, n).map_err(io_err(&bed))?;
    let mut col = vec![0u8; n];
    for j in 0..n_variants {
        fill(j, &mut col);
        w.write_variant(&col)?;
    }
    w.finish().map_err(io_err(&bed))?.flush().map_err(io_err(&bed))?;
    Ok(())
}

/// Writes the dosages of `sim` as a PLINK triplet.
pub fn write_plink(prefix: impl AsRef<Path>, sim: &Simulated) -> Result<()> {
    write_plink_with(prefix, &sim.sample_ids(), sim.p(), |j, out| {
        for (o, &g) in out.iter_mut().zip(sim.genotypes.column(j)) {
            *o = g;
        }
    })
}

/// Writes an `id<TAB>name` outcome table.
pub fn write_outcome(path: impl AsRef<Path>, ids: &[String], name: &str, y: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let mut body = format!("id\t{name}\n");
    for (id, v) in ids.iter().zip(y) {
        body.push_str(&format!("{id}\t{v:?}\n"));
    }
    w.write_all(body.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Marks roughly `rate` of the entries missing.
pub fn punch_missing(g: &mut Array2<u8>, rate: f64, seed: u64) {
    let mut r = rng(seed);
    g.iter_mut().for_each(|v| {
        if r.random_bool(rate) {
            *v = MISSING_DOSAGE;
        }
    });
}
