//! Rectangular numeric text tables (CSV, TSV, whitespace).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::store::{ElementKind, FileMatrix};

/// Rows buffered before being scattered into the column-major store.
const ROW_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Char(char),
    /// Any run of spaces or tabs.
    Whitespace,
}

impl Delimiter {
    pub fn split<'a>(self, line: &'a str) -> Box<dyn Iterator<Item = &'a str> + 'a> {
        match self {
            Delimiter::Char(c) => Box::new(line.split(c).map(str::trim)),
            Delimiter::Whitespace => Box::new(line.split_whitespace()),
        }
    }
}

impl std::str::FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tab" | "\\t" | "\t" => Ok(Delimiter::Char('\t')),
            "whitespace" | "space" => Ok(Delimiter::Whitespace),
            s if s.chars().count() == 1 => Ok(Delimiter::Char(s.chars().next().unwrap())),
            other => Err(Error::Config(format!("unrecognized delimiter {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelimitedOptions {
    pub delimiter: Delimiter,
    pub has_header: bool,
    /// First field of every row is a sample id rather than a value.
    pub id_column: bool,
}

impl Default for DelimitedOptions {
    fn default() -> Self {
        DelimitedOptions {
            delimiter: Delimiter::Char(','),
            has_header: false,
            id_column: false,
        }
    }
}

/// A fully parsed table, values row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DelimitedTable {
    pub col_names: Vec<String>,
    pub row_ids: Vec<String>,
    pub values: Array2<f64>,
}

/// Streaming parser shared by the in-memory and file-backed entry points.
struct Records<R> {
    lines: std::iter::Enumerate<std::io::Lines<R>>,
    opts: DelimitedOptions,
    source: String,
    width: Option<usize>,
    col_names: Option<Vec<String>>,
    n_rows: usize,
}

impl<R: BufRead> Records<R> {
    fn new(reader: R, opts: DelimitedOptions, source: &str) -> Result<Self> {
        let mut rec = Records {
            lines: reader.lines().enumerate(),
            opts,
            source: source.to_string(),
            width: None,
            col_names: None,
            n_rows: 0,
        };
        if opts.has_header {
            let (line_no, line) = rec
                .next_line()?
                .ok_or_else(|| Error::parse(source, 0, "empty file, expected a header"))?;
            let mut fields: Vec<String> = opts.delimiter.split(&line).map(str::to_string).collect();
            if opts.id_column {
                if fields.is_empty() {
                    return Err(Error::parse(source, line_no, "header has no id column"));
                }
                fields.remove(0);
            }
            if fields.is_empty() {
                return Err(Error::parse(source, line_no, "header names no value columns"));
            }
            rec.width = Some(fields.len());
            rec.col_names = Some(fields);
        }
        Ok(rec)
    }

    fn next_line(&mut self) -> Result<Option<(usize, String)>> {
        for (i, line) in self.lines.by_ref() {
            let line = line.map_err(|e| Error::io(&self.source, e))?;
            if !line.trim().is_empty() {
                return Ok(Some((i + 1, line)));
            }
        }
        Ok(None)
    }

    /// Parses the next record into `values`, returning its id.
    fn next_record(&mut self, values: &mut Vec<f64>) -> Result<Option<String>> {
        let Some((line_no, line)) = self.next_line()? else {
            return Ok(None);
        };
        values.clear();
        let mut fields = self.opts.delimiter.split(&line);
        self.n_rows += 1;
        let id = if self.opts.id_column {
            match fields.next() {
                Some(id) if !id.is_empty() => id.to_string(),
                _ => return Err(Error::parse(&self.source, line_no, "missing row id")),
            }
        } else {
            self.n_rows.to_string()
        };
        for (k, field) in fields.enumerate() {
            let v = field.parse::<f64>().map_err(|_| {
                Error::parse(
                    &self.source,
                    line_no,
                    format!(
                        "field {} ({field:?}) is not numeric",
                        k + 1 + usize::from(self.opts.id_column)
                    ),
                )
            })?;
            values.push(v);
        }
        match self.width {
            None if values.is_empty() => return Err(Error::parse(&self.source, line_no, "row has no values")),
            None => self.width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::parse(
                    &self.source,
                    line_no,
                    format!("ragged row: {} values, expected {w}", values.len()),
                ))
            }
            Some(_) => {}
        }
        Ok(Some(id))
    }

    fn col_names(&self) -> Vec<String> {
        match &self.col_names {
            Some(names) => names.clone(),
            None => (1..=self.width.unwrap_or(0)).map(|j| format!("V{j}")).collect(),
        }
    }
}

pub fn parse_delimited<R: BufRead>(reader: R, opts: DelimitedOptions, source: &str) -> Result<DelimitedTable> {
    let mut rec = Records::new(reader, opts, source)?;
    let mut flat = Vec::new();
    let mut row_ids = Vec::new();
    let mut row = Vec::new();
    while let Some(id) = rec.next_record(&mut row)? {
        flat.extend_from_slice(&row);
        row_ids.push(id);
    }
    if row_ids.is_empty() {
        return Err(Error::parse(source, 0, "no data rows"));
    }
    let width = rec.width.unwrap_or(0);
    let values = Array2::from_shape_vec((row_ids.len(), width), flat).expect("rows checked rectangular");
    Ok(DelimitedTable {
        col_names: rec.col_names(),
        row_ids,
        values,
    })
}

/// Converts a delimited file into a float64 [`FileMatrix`] at `out`.
///
/// The file is read twice: once to validate and size it, once to fill the
/// store in chunks of rows, so memory stays bounded by the chunk size.
pub fn process_delimited(
    path: impl AsRef<Path>,
    out: impl AsRef<Path>,
    opts: DelimitedOptions,
    overwrite: bool,
) -> Result<FileMatrix> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let open = || -> Result<BufReader<File>> { Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)) };

    let mut rec = Records::new(open()?, opts, &source)?;
    let mut row = Vec::new();
    let mut row_ids = Vec::new();
    while let Some(id) = rec.next_record(&mut row)? {
        row_ids.push(id);
    }
    if row_ids.is_empty() {
        return Err(Error::parse(&source, 0, "no data rows"));
    }
    let width = rec.width.unwrap_or(0);
    let mut m = FileMatrix::create_named(out, ElementKind::Float64, row_ids, rec.col_names(), overwrite)?;

    let mut rec = Records::new(open()?, opts, &source)?;
    let mut chunk = Vec::with_capacity(ROW_CHUNK * width);
    let mut first_row = 0;
    loop {
        let more = rec.next_record(&mut row)?.is_some();
        if more {
            chunk.extend_from_slice(&row);
        }
        let rows_in_chunk = chunk.len() / width.max(1);
        if rows_in_chunk == ROW_CHUNK || (!more && rows_in_chunk > 0) {
            let block = Array2::from_shape_vec((rows_in_chunk, width), std::mem::take(&mut chunk))
                .expect("chunk is rectangular");
            m.write_rows(first_row, block.view())?;
            first_row += rows_in_chunk;
        }
        if !more {
            break;
        }
    }
    if first_row != m.n_rows() {
        return Err(Error::data(format!("{} changed while being read", path.display())));
    }
    Ok(m)
}
