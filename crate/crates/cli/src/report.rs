//! `timings.txt`: per-stage wall time, stage category, total and peak memory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use plmmkit::resources::peak_rss_bytes;
use plmmkit::{Error, Result};

pub const TIMINGS_FILE: &str = "timings.txt";

/// Category of a `fit` or `cv` stage.
pub fn fit_category(stage: &str) -> &'static str {
    match stage {
        "relatedness" | "eigen" | "eta" | "rotate" => "decomposition",
        "folds" => "cv",
        _ => "fit",
    }
}

pub fn render_timings(stages: &[(String, f64)], category: impl Fn(&str) -> &'static str, total: f64) -> String {
    let mut s = String::from("stage\tcategory\tseconds\n");
    for (name, secs) in stages {
        let _ = writeln!(s, "{name}\t{}\t{secs:.6}", category(name));
    }
    let _ = writeln!(s, "total\t\t{total:.6}");
    if let Some(rss) = peak_rss_bytes() {
        let _ = writeln!(s, "peak_rss_bytes\t\t{rss}");
    }
    s
}

pub fn write_timings(
    dir: &Path,
    stages: &[(String, f64)],
    category: impl Fn(&str) -> &'static str,
    total: f64,
) -> Result<()> {
    let path = dir.join(TIMINGS_FILE);
    fs::write(&path, render_timings(stages, category, total)).map_err(|e| Error::Io { path, source: e })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories() {
        assert_eq!(fit_category("eigen"), "decomposition");
        assert_eq!(fit_category("path"), "fit");
        assert_eq!(fit_category("folds"), "cv");
    }

    #[test]
    fn rendered_rows() {
        let text = render_timings(&[("load".into(), 0.5), ("eta".into(), 0.25)], fit_category, 0.75);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "load\tfit\t0.500000");
        assert_eq!(lines[2], "eta\tdecomposition\t0.250000");
        assert_eq!(lines[3], "total\t\t0.750000");
    }
}
