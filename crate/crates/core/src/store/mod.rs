//! On-disk column-major matrices accessed through memory maps.
//!
//! A [`FileMatrix`] is a raw backing file with no header plus a `.meta`
//! sidecar that carries the dimensions, element kind and names. Element
//! `(i, j)` lives at byte offset `(j * n_rows + i) * width`. Nothing is read
//! eagerly; callers pull column blocks, and may hand the pages back to the
//! kernel with [`FileMatrix::release`] once a block has been consumed so
//! that resident memory tracks the block width rather than the file size.

mod meta;

use std::borrow::Cow;
use std::fs::{self, File, OpenOptions};
use std::ops::Range;
use std::path::{Path, PathBuf};

use memmap2::{Mmap, MmapMut, MmapOptions, UncheckedAdvice};
use ndarray::{Array2, ArrayView2, ShapeBuilder};

use crate::error::{Error, Result};

pub use meta::{sidecar_path, Sidecar};

/// Stored value reserved for a missing genotype.
pub const MISSING_DOSAGE: u8 = 255;

/// Column width used by blocked traversals unless configured otherwise.
pub const DEFAULT_BLOCK_WIDTH: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    /// Genotype dosages {0, 1, 2} with [`MISSING_DOSAGE`] for missing calls.
    Dosage,
    /// Little-endian IEEE-754 doubles.
    Float64,
}

impl ElementKind {
    pub fn width(self) -> usize {
        match self {
            ElementKind::Dosage => 1,
            ElementKind::Float64 => 8,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ElementKind::Dosage => "uint8",
            ElementKind::Float64 => "float64",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "uint8" => Some(ElementKind::Dosage),
            "float64" => Some(ElementKind::Float64),
            _ => None,
        }
    }
}

enum Map {
    ReadOnly(Mmap),
    Writable(MmapMut),
}

impl Map {
    fn bytes(&self) -> &[u8] {
        match self {
            Map::ReadOnly(m) => m,
            Map::Writable(m) => m,
        }
    }
}

pub struct FileMatrix {
    path: PathBuf,
    meta: Sidecar,
    map: Map,
}

impl std::fmt::Debug for FileMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FileMatrix")
            .field("path", &self.path)
            .field("n_rows", &self.meta.n_rows)
            .field("n_cols", &self.meta.n_cols)
            .field("kind", &self.meta.kind)
            .field("writable", &self.is_writable())
            .finish()
    }
}

impl FileMatrix {
    /// Creates a zero-filled matrix with default names (`V1..`, `1..`).
    pub fn create(path: impl AsRef<Path>, n_rows: usize, n_cols: usize, kind: ElementKind) -> Result<Self> {
        let col_names = (1..=n_cols).map(|j| format!("V{j}")).collect();
        let row_ids = (1..=n_rows).map(|i| i.to_string()).collect();
        Self::create_named(path, kind, row_ids, col_names, false)
    }

    /// Creates a zero-filled matrix whose dimensions come from the name lists.
    pub fn create_named(
        path: impl AsRef<Path>,
        kind: ElementKind,
        row_ids: Vec<String>,
        col_names: Vec<String>,
        overwrite: bool,
    ) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let (n_rows, n_cols) = (row_ids.len(), col_names.len());
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Config(format!(
                "matrix dimensions must be positive, got {n_rows}x{n_cols}"
            )));
        }
        let len = n_rows
            .checked_mul(n_cols)
            .and_then(|c| c.checked_mul(kind.width()))
            .ok_or_else(|| Error::Config(format!("matrix {n_rows}x{n_cols} overflows the address space")))?;
        if !overwrite && path.exists() {
            return Err(Error::AlreadyExists(path));
        }

        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        reserve(&file, len as u64).map_err(|e| Error::io(&path, e))?;

        let meta = Sidecar {
            n_rows,
            n_cols,
            kind,
            col_names,
            row_ids,
            sections: Vec::new(),
        };
        write_sidecar(&path, &meta)?;

        // SAFETY: the file was just created by us and is sized to `len`; other
        // processes mutating it concurrently is outside the supported contract.
        let map = unsafe { MmapMut::map_mut(&file) }.map_err(|e| Error::io(&path, e))?;
        Ok(FileMatrix {
            path,
            meta,
            map: Map::Writable(map),
        })
    }

    /// Copies an in-memory matrix into a new backing file.
    pub fn from_array(
        path: impl AsRef<Path>,
        values: ArrayView2<'_, f64>,
        row_ids: Vec<String>,
        col_names: Vec<String>,
    ) -> Result<Self> {
        if values.dim() != (row_ids.len(), col_names.len()) {
            return Err(Error::Config(format!(
                "array is {:?} but names describe {}x{}",
                values.dim(),
                row_ids.len(),
                col_names.len()
            )));
        }
        let mut m = Self::create_named(path, ElementKind::Float64, row_ids, col_names, true)?;
        m.write_col_block(0, values)?;
        Ok(m)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::open_with(path.as_ref(), false)
    }

    pub fn open_writable(path: impl AsRef<Path>) -> Result<Self> {
        Self::open_with(path.as_ref(), true)
    }

    fn open_with(path: &Path, writable: bool) -> Result<Self> {
        let meta_path = sidecar_path(path);
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta = Sidecar::parse(&text).map_err(|e| Error::Corrupt {
            path: meta_path.clone(),
            reason: e.to_string(),
        })?;
        let file = OpenOptions::new()
            .read(true)
            .write(writable)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let actual = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let expected = (meta.n_rows * meta.n_cols * meta.kind.width()) as u64;
        if actual != expected {
            return Err(Error::Corrupt {
                path: path.to_path_buf(),
                reason: format!(
                    "sidecar describes {}x{} {} ({expected} bytes) but backing file has {actual} bytes",
                    meta.n_rows,
                    meta.n_cols,
                    meta.kind.tag()
                ),
            });
        }
        // SAFETY: size checked against the sidecar above; see `create_named`.
        let map = unsafe {
            if writable {
                Map::Writable(MmapMut::map_mut(&file).map_err(|e| Error::io(path, e))?)
            } else {
                Map::ReadOnly(MmapOptions::new().map(&file).map_err(|e| Error::io(path, e))?)
            }
        };
        Ok(FileMatrix {
            path: path.to_path_buf(),
            meta,
            map,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn n_rows(&self) -> usize {
        self.meta.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.meta.n_cols
    }

    pub fn kind(&self) -> ElementKind {
        self.meta.kind
    }

    pub fn col_names(&self) -> &[String] {
        &self.meta.col_names
    }

    pub fn row_ids(&self) -> &[String] {
        &self.meta.row_ids
    }

    pub fn sidecar(&self) -> &Sidecar {
        &self.meta
    }

    pub fn is_writable(&self) -> bool {
        matches!(self.map, Map::Writable(_))
    }

    /// Edits the sidecar in memory and rewrites it on disk.
    pub fn update_sidecar(&mut self, edit: impl FnOnce(&mut Sidecar)) -> Result<()> {
        let mut meta = self.meta.clone();
        edit(&mut meta);
        if meta.n_rows != self.meta.n_rows
            || meta.n_cols != self.meta.n_cols
            || meta.kind != self.meta.kind
            || meta.col_names.len() != meta.n_cols
            || meta.row_ids.len() != meta.n_rows
            || meta.sections.iter().any(|(_, v)| v.len() != meta.n_cols)
        {
            return Err(Error::Config("sidecar edit changed the matrix shape".into()));
        }
        write_sidecar(&self.path, &meta)?;
        self.meta = meta;
        Ok(())
    }

    fn check_range(&self, first: usize, width: usize) -> Result<()> {
        match first.checked_add(width) {
            Some(end) if end <= self.n_cols() => Ok(()),
            _ => Err(Error::OutOfRange {
                first,
                end: first.saturating_add(width),
                n_cols: self.n_cols(),
            }),
        }
    }

    fn col_byte_range(&self, first: usize, width: usize) -> Range<usize> {
        let stride = self.n_rows() * self.kind().width();
        first * stride..(first + width) * stride
    }

    /// Raw dosage bytes of one column.
    pub fn dosage_col(&self, j: usize) -> Result<&[u8]> {
        self.expect_kind(ElementKind::Dosage)?;
        self.check_range(j, 1)?;
        Ok(&self.map.bytes()[self.col_byte_range(j, 1)])
    }

    pub fn dosage_col_mut(&mut self, j: usize) -> Result<&mut [u8]> {
        self.expect_kind(ElementKind::Dosage)?;
        self.check_range(j, 1)?;
        let range = self.col_byte_range(j, 1);
        Ok(&mut self.writable_bytes()?[range])
    }

    /// Mutable dosage bytes for a contiguous column range, column after column.
    pub fn dosage_cols_mut(&mut self, cols: Range<usize>) -> Result<&mut [u8]> {
        self.expect_kind(ElementKind::Dosage)?;
        self.check_range(cols.start, cols.len())?;
        let range = self.col_byte_range(cols.start, cols.len());
        Ok(&mut self.writable_bytes()?[range])
    }

    /// One float64 column, borrowed straight from the map when the host is
    /// little-endian.
    pub fn col_f64(&self, j: usize) -> Result<Cow<'_, [f64]>> {
        self.expect_kind(ElementKind::Float64)?;
        self.check_range(j, 1)?;
        let bytes = &self.map.bytes()[self.col_byte_range(j, 1)];
        if cfg!(target_endian = "little") {
            if let Ok(values) = bytemuck::try_cast_slice::<u8, f64>(bytes) {
                return Ok(Cow::Borrowed(values));
            }
        }
        Ok(Cow::Owned(decode_f64(bytes).collect()))
    }

    /// Reads columns `first..first + width` as a dense column-major block.
    /// Dosages are widened to f64 with missing calls mapped to NaN.
    pub fn read_col_block(&self, first: usize, width: usize) -> Result<Array2<f64>> {
        self.check_range(first, width)?;
        let bytes = &self.map.bytes()[self.col_byte_range(first, width)];
        let values: Vec<f64> = match self.kind() {
            ElementKind::Float64 => decode_f64(bytes).collect(),
            ElementKind::Dosage => bytes.iter().map(|&b| widen_dosage(b)).collect(),
        };
        Ok(Array2::from_shape_vec((self.n_rows(), width).f(), values).expect("shape matches byte range"))
    }

    /// Like [`read_col_block`](Self::read_col_block) but keeps only `rows`, in
    /// the given order.
    pub fn read_col_block_rows(&self, first: usize, width: usize, rows: &[usize]) -> Result<Array2<f64>> {
        self.check_range(first, width)?;
        let n = self.n_rows();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::Config(format!("row index {bad} out of bounds for {n} rows")));
        }
        let mut out = Array2::<f64>::zeros((rows.len(), width).f());
        for (c, mut dst) in out.columns_mut().into_iter().enumerate() {
            let j = first + c;
            match self.kind() {
                ElementKind::Float64 => {
                    let col = self.col_f64(j)?;
                    for (d, &r) in dst.iter_mut().zip(rows) {
                        *d = col[r];
                    }
                }
                ElementKind::Dosage => {
                    let col = self.dosage_col(j)?;
                    for (d, &r) in dst.iter_mut().zip(rows) {
                        *d = widen_dosage(col[r]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Overwrites columns `first..first + block.ncols()`. For dosage matrices
    /// NaN is stored as [`MISSING_DOSAGE`] and every other value must be 0, 1 or 2.
    pub fn write_col_block(&mut self, first: usize, block: ArrayView2<'_, f64>) -> Result<()> {
        if block.nrows() != self.n_rows() {
            return Err(Error::Config(format!(
                "block has {} rows, matrix has {}",
                block.nrows(),
                self.n_rows()
            )));
        }
        self.check_range(first, block.ncols())?;
        let kind = self.kind();
        let range = self.col_byte_range(first, block.ncols());
        let bytes = &mut self.writable_bytes()?[range];
        match kind {
            ElementKind::Float64 => {
                for (chunk, v) in bytes.chunks_exact_mut(8).zip(block.t().iter()) {
                    chunk.copy_from_slice(&v.to_le_bytes());
                }
            }
            ElementKind::Dosage => {
                for (b, &v) in bytes.iter_mut().zip(block.t().iter()) {
                    *b = narrow_dosage(v)?;
                }
            }
        }
        Ok(())
    }

    /// Overwrites rows `first_row..first_row + rows.nrows()` across every column
    /// of a float64 matrix.
    pub fn write_rows(&mut self, first_row: usize, rows: ArrayView2<'_, f64>) -> Result<()> {
        self.expect_kind(ElementKind::Float64)?;
        let (n, p) = (self.n_rows(), self.n_cols());
        if rows.ncols() != p || first_row + rows.nrows() > n {
            return Err(Error::Config(format!(
                "row block {}x{} at row {first_row} does not fit a {n}x{p} matrix",
                rows.nrows(),
                rows.ncols()
            )));
        }
        let bytes = self.writable_bytes()?;
        for (j, col) in rows.columns().into_iter().enumerate() {
            let start = (j * n + first_row) * 8;
            for (chunk, v) in bytes[start..start + col.len() * 8].chunks_exact_mut(8).zip(col.iter()) {
                chunk.copy_from_slice(&v.to_le_bytes());
            }
        }
        Ok(())
    }

    /// Writes one float64 column from a slice.
    pub fn write_col(&mut self, j: usize, values: &[f64]) -> Result<()> {
        self.expect_kind(ElementKind::Float64)?;
        self.check_range(j, 1)?;
        if values.len() != self.n_rows() {
            return Err(Error::Config(format!(
                "column has {} values, matrix has {} rows",
                values.len(),
                self.n_rows()
            )));
        }
        let range = self.col_byte_range(j, 1);
        let bytes = &mut self.writable_bytes()?[range];
        for (chunk, v) in bytes.chunks_exact_mut(8).zip(values) {
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        Ok(())
    }

    /// Drops the resident pages backing a column range. Contents are kept:
    /// the mapping is shared, so later access refaults from the page cache.
    pub fn release(&self, first: usize, width: usize) {
        if self.check_range(first, width).is_err() || width == 0 {
            return;
        }
        let range = self.col_byte_range(first, width);
        // SAFETY: the mapping is MAP_SHARED and file-backed, so MADV_DONTNEED
        // only discards this process's page table entries; dirty data stays in
        // the page cache and outstanding borrows remain valid.
        let res = unsafe {
            match &self.map {
                Map::ReadOnly(m) => m.unchecked_advise_range(UncheckedAdvice::DontNeed, range.start, range.len()),
                Map::Writable(m) => m.unchecked_advise_range(UncheckedAdvice::DontNeed, range.start, range.len()),
            }
        };
        if let Err(e) = res {
            log::debug!("madvise on {} failed: {e}", self.path.display());
        }
    }

    pub fn flush(&self) -> Result<()> {
        if let Map::Writable(m) = &self.map {
            m.flush().map_err(|e| Error::io(&self.path, e))?;
        }
        Ok(())
    }

    fn expect_kind(&self, kind: ElementKind) -> Result<()> {
        if self.kind() == kind {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{} holds {} elements, expected {}",
                self.path.display(),
                self.kind().tag(),
                kind.tag()
            )))
        }
    }

    fn writable_bytes(&mut self) -> Result<&mut [u8]> {
        match &mut self.map {
            Map::Writable(m) => Ok(m),
            Map::ReadOnly(_) => Err(Error::ReadOnly(self.path.clone())),
        }
    }
}

/// Splits `0..n_cols` into consecutive ranges of at most `width` columns.
pub fn column_blocks(n_cols: usize, width: usize) -> impl Iterator<Item = Range<usize>> {
    let width = width.max(1);
    (0..n_cols)
        .step_by(width)
        .map(move |start| start..(start + width).min(n_cols))
}

pub(crate) fn widen_dosage(b: u8) -> f64 {
    if b == MISSING_DOSAGE {
        f64::NAN
    } else {
        f64::from(b)
    }
}

fn narrow_dosage(v: f64) -> Result<u8> {
    if v.is_nan() {
        return Ok(MISSING_DOSAGE);
    }
    match v {
        0.0 => Ok(0),
        1.0 => Ok(1),
        2.0 => Ok(2),
        other => Err(Error::data(format!("{other} is not a valid dosage"))),
    }
}

fn decode_f64(bytes: &[u8]) -> impl Iterator<Item = f64> + '_ {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
}

fn write_sidecar(path: &Path, meta: &Sidecar) -> Result<()> {
    let meta_path = sidecar_path(path);
    fs::write(&meta_path, meta.render()).map_err(|e| Error::io(&meta_path, e))
}

/// Sizes the file, reserving blocks up front so a full disk surfaces here
/// rather than as a fault on first write through the map.
fn reserve(file: &File, len: u64) -> std::io::Result<()> {
    file.set_len(len)?;
    #[cfg(target_os = "linux")]
    {
        use std::os::unix::io::AsRawFd;
        // SAFETY: plain syscall on an fd we own.
        let rc = unsafe { libc::posix_fallocate(file.as_raw_fd(), 0, len as libc::off_t) };
        if rc != 0 && rc != libc::EOPNOTSUPP && rc != libc::EINVAL {
            return Err(std::io::Error::from_raw_os_error(rc));
        }
    }
    Ok(())
}
