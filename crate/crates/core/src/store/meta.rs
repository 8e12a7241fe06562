//! The `.meta` sidecar that sits next to every backing file.
//!
//! Layout, one item per line:
//!
//! ```text
//! n_rows:<int>
//! n_cols:<int>
//! kind:<uint8|float64>
//! col_names:
//! <n_cols names>
//! row_ids:
//! <n_rows ids>
//! [<section>:
//!  <n_cols values>]...
//! ```
//!
//! Trailing sections (`centers:`, `scales:`, `penalty_factor:`) are optional and
//! always hold exactly one entry per column.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::ElementKind;

const SOURCE: &str = "sidecar";

#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub n_rows: usize,
    pub n_cols: usize,
    pub kind: ElementKind,
    pub col_names: Vec<String>,
    pub row_ids: Vec<String>,
    /// Per-column sections in the order they appear on disk.
    pub sections: Vec<(String, Vec<String>)>,
}

/// `foo.bk` -> `foo.bk.meta`
pub fn sidecar_path(backing: &Path) -> PathBuf {
    let mut s = backing.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

impl Sidecar {
    pub fn section(&self, name: &str) -> Option<&[String]> {
        self.sections.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_slice())
    }

    pub fn numeric_section(&self, name: &str) -> Result<Option<Vec<f64>>> {
        let Some(values) = self.section(name) else {
            return Ok(None);
        };
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(SOURCE, 0, format!("section {name}: entry {i} is not a number: {v:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn set_numeric_section(&mut self, name: &str, values: &[f64]) {
        let values: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
        match self.sections.iter_mut().find(|(k, _)| k == name) {
            Some((_, v)) => *v = values,
            None => self.sections.push((name.to_string(), values)),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n_rows:{}", self.n_rows);
        let _ = writeln!(out, "n_cols:{}", self.n_cols);
        let _ = writeln!(out, "kind:{}", self.kind.tag());
        out.push_str("col_names:\n");
        for name in &self.col_names {
            out.push_str(name);
            out.push('\n');
        }
        out.push_str("row_ids:\n");
        for id in &self.row_ids {
            out.push_str(id);
            out.push('\n');
        }
        for (name, values) in &self.sections {
            let _ = writeln!(out, "{name}:");
            for v in values {
                out.push_str(v);
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Sidecar> {
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(SOURCE, 0, format!("unexpected end of file, expected {what}")))
        };

        let n_rows = scalar(next("n_rows")?, "n_rows")?;
        let n_cols = scalar(next("n_cols")?, "n_cols")?;
        let (line_no, kind_line) = next("kind")?;
        let kind = match kind_line.strip_prefix("kind:") {
            Some(tag) => ElementKind::from_tag(tag.trim())
                .ok_or_else(|| Error::parse(SOURCE, line_no, format!("unknown element kind {tag:?}")))?,
            None => return Err(Error::parse(SOURCE, line_no, "expected kind:<uint8|float64>")),
        };
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::parse(SOURCE, 0, "matrix dimensions must be positive"));
        }
        n_rows
            .checked_mul(n_cols)
            .and_then(|c| c.checked_mul(kind.width()))
            .ok_or_else(|| Error::parse(SOURCE, 0, "matrix dimensions overflow"))?;

        let col_names = list(&mut next, "col_names", n_cols)?;
        let row_ids = list(&mut next, "row_ids", n_rows)?;

        let mut sections = Vec::new();
        while let Some((line_no, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let Some(name) = line.strip_suffix(':') else {
                return Err(Error::parse(
                    SOURCE,
                    line_no,
                    format!("expected a section header, got {line:?}"),
                ));
            };
            if sections.iter().any(|(k, _): &(String, Vec<String>)| k == name) {
                return Err(Error::parse(SOURCE, line_no, format!("duplicate section {name:?}")));
            }
            let name = name.to_string();
            let mut values = Vec::with_capacity(n_cols.min(1 << 20));
            for _ in 0..n_cols {
                match lines.next() {
                    Some((_, v)) => values.push(v.to_string()),
                    None => {
                        return Err(Error::parse(
                            SOURCE,
                            line_no,
                            format!("section {name:?} is shorter than n_cols={n_cols}"),
                        ))
                    }
                }
            }
            sections.push((name, values));
        }

        Ok(Sidecar {
            n_rows,
            n_cols,
            kind,
            col_names,
            row_ids,
            sections,
        })
    }
}

fn scalar((line_no, line): (usize, &str), key: &str) -> Result<usize> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(':'))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::parse(SOURCE, line_no, format!("expected {key}:<int>, got {line:?}")))
}

fn list<'a>(
    next: &mut impl FnMut(&str) -> Result<(usize, &'a str)>,
    header: &str,
    count: usize,
) -> Result<Vec<String>> {
    let (line_no, line) = next(header)?;
    if line.strip_suffix(':') != Some(header) {
        return Err(Error::parse(
            SOURCE,
            line_no,
            format!("expected {header}:, got {line:?}"),
        ));
    }
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        out.push(next(header)?.1.to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Sidecar {
        Sidecar {
            n_rows: 2,
            n_cols: 3,
            kind: ElementKind::Float64,
            col_names: vec!["a".into(), "b".into(), "c:d".into()],
            row_ids: vec!["s1".into(), "s2".into()],
            sections: vec![],
        }
    }

    #[test]
    fn render_parse_roundtrip_with_sections() {
        let mut meta = sample();
        meta.set_numeric_section("centers", &[0.5, -1.25, 1e-300]);
        meta.set_numeric_section("scales", &[1.0, 2.0, 3.0]);
        let parsed = Sidecar::parse(&meta.render()).unwrap();
        assert_eq!(parsed, meta);
        assert_eq!(
            parsed.numeric_section("centers").unwrap().unwrap(),
            vec![0.5, -1.25, 1e-300]
        );
        assert!(parsed.numeric_section("penalty_factor").unwrap().is_none());
    }

    #[test]
    fn names_that_look_like_headers_are_counted_not_matched() {
        let mut meta = sample();
        meta.col_names[1] = "row_ids:".into();
        assert_eq!(Sidecar::parse(&meta.render()).unwrap(), meta);
    }

    #[test]
    fn carriage_returns_in_names_survive() {
        let mut meta = sample();
        meta.col_names[0] = "a\r".into();
        assert_eq!(Sidecar::parse(&meta.render()).unwrap(), meta);
    }

    #[test]
    fn truncated_sidecar_is_rejected() {
        let text = sample().render();
        let cut = &text[..text.len() - 4];
        assert!(Sidecar::parse(cut).is_err());
    }

    #[test]
    fn bad_kind_and_zero_dims() {
        assert!(Sidecar::parse("n_rows:1\nn_cols:1\nkind:int16\ncol_names:\na\nrow_ids:\nr\n").is_err());
        assert!(Sidecar::parse("n_rows:0\nn_cols:1\nkind:uint8\ncol_names:\na\nrow_ids:\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn render_parse_roundtrip(
            names in proptest::collection::vec("[^\n]{0,12}", 1..8),
            ids in proptest::collection::vec("[^\n]{0,12}", 1..8),
            centers in proptest::collection::vec(-1e6f64..1e6, 8),
        ) {
            let mut meta = Sidecar {
                n_rows: ids.len(),
                n_cols: names.len(),
                kind: ElementKind::Float64,
                col_names: names.clone(),
                row_ids: ids,
                sections: vec![],
            };
            meta.set_numeric_section("centers", &centers[..names.len()]);
            prop_assert_eq!(Sidecar::parse(&meta.render()).unwrap(), meta);
        }
    }
}
