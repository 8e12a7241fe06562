//! Static SVG plots on a fixed 800x600 canvas.

use std::fmt::Write as _;

use plmmkit::path::FitPath;

const W: f64 = 800.0;
const H: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Maps data coordinates onto the plotting area. Larger penalties sit on the
/// left, as the path is traversed.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1e-300) {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = 0.5 * lo.abs().max(1.0);
        (lo - pad, hi + pad)
    }
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |v: &mut dyn Iterator<Item = f64>| {
            v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
        };
        let (x0, x1) = range(&mut xs.clone());
        let (y0, y1) = range(&mut ys.clone());
        Frame {
            x: padded(x0, x1),
            y: padded(y0, y1),
        }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (self.x.1 - v) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        TOP + (self.y.1 - v) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn header(s: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 20.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel)
    );
}

fn axes(s: &mut String, f: &Frame) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r##"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" fill="none" stroke="#000000"/>"##
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.x.1 - t * (f.x.1 - f.x.0);
        let px = f.px(xv);
        let _ = writeln!(
            s,
            r##"<path d="M{px:.2} {y1} L{px:.2} {:.2}" stroke="#000000"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{xv:.2}</text>"##,
            y1 + 5.0,
            y1 + 20.0
        );
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let py = f.py(yv);
        let _ = writeln!(
            s,
            r##"<path d="M{:.2} {py:.2} L{x0} {py:.2}" stroke="#000000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn points(f: &Frame, xs: &[f64], ys: &[f64]) -> String {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Coefficient paths against log10(lambda), one polyline per feature that
/// is nonzero somewhere on the path.
pub fn paths_svg(fit: &FitPath) -> String {
    let xs: Vec<f64> = fit.lambda.iter().map(|l| l.max(f64::MIN_POSITIVE).log10()).collect();
    let rows = fit.beta.ever_nonzero();
    let dense: Vec<Vec<f64>> = rows
        .iter()
        .map(|&j| (0..fit.n_lambda()).map(|k| fit.beta.get(j, k)).collect())
        .collect();
    let ys = dense.iter().flatten().copied().chain(std::iter::once(0.0));
    let frame = Frame::new(xs.iter().copied(), ys);
    let mut s = String::new();
    header(&mut s, "Coefficient paths", "log10(lambda)", "coefficient");
    axes(&mut s, &frame);
    let zero = frame.py(0.0);
    let _ = writeln!(
        s,
        r##"<path d="M{LEFT} {zero:.2} L{} {zero:.2}" stroke="#999999" stroke-dasharray="4 3"/>"##,
        W - RIGHT
    );
    for (i, (&j, ys)) in rows.iter().zip(&dense).enumerate() {
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            PALETTE[i % PALETTE.len()],
            points(&frame, &xs, ys),
            escape(&fit.feature_names[j])
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Cross-validation error with one-standard-error bars and the minimum marked.
pub fn cve_svg(lambda: &[f64], cve: &[f64], cvse: &[f64], min_index: usize) -> String {
    let xs: Vec<f64> = lambda.iter().map(|l| l.max(f64::MIN_POSITIVE).log10()).collect();
    let ys = cve.iter().zip(cvse).flat_map(|(c, e)| [c - e, c + e]);
    let frame = Frame::new(xs.iter().copied(), ys);
    let mut s = String::new();
    header(
        &mut s,
        "Cross-validation error",
        "log10(lambda)",
        "mean squared prediction error",
    );
    axes(&mut s, &frame);
    for ((&x, &c), &e) in xs.iter().zip(cve).zip(cvse) {
        let px = frame.px(x);
        let _ = writeln!(
            s,
            r##"<path d="M{px:.2} {:.2} L{px:.2} {:.2}" stroke="#999999"/>"##,
            frame.py(c - e),
            frame.py(c + e)
        );
    }
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#d62728" stroke-width="1.5" points="{}"/>"##,
        points(&frame, &xs, cve)
    );
    if let (Some(&x), Some(&c)) = (xs.get(min_index), cve.get(min_index)) {
        let px = frame.px(x);
        let _ = writeln!(
            s,
            r##"<path d="M{px:.2} {TOP} L{px:.2} {}" stroke="#1f77b4" stroke-dasharray="6 4"/><circle cx="{px:.2}" cy="{:.2}" r="4" fill="#1f77b4"><title>lambda_min</title></circle>"##,
            H - BOTTOM,
            frame.py(c)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use plmmkit::path::{Penalty, SparseColumns};

    fn fit(lambda: Vec<f64>, cols: Vec<Vec<(usize, f64)>>) -> FitPath {
        let mut beta = SparseColumns::new(3);
        for c in cols {
            beta.push_column(c);
        }
        FitPath {
            intercepts: vec![0.0; lambda.len()],
            iterations: vec![1; lambda.len()],
            converged: vec![true; lambda.len()],
            loss: vec![0.0; lambda.len()],
            lambda,
            beta_rotated: None,
            beta,
            eta: 0.3,
            penalty: Penalty::Lasso,
            gamma: None,
            n: 10,
            feature_names: vec!["a".into(), "b<1>".into(), "c".into()],
            penalty_factor: vec![1.0; 3],
            timings: vec![],
        }
    }

    #[test]
    fn one_polyline_per_active_feature() {
        let f = fit(
            vec![1.0, 0.5, 0.1],
            vec![vec![], vec![(1, 0.2)], vec![(1, 0.4), (2, -0.1)]],
        );
        let s = paths_svg(&f);
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("b&lt;1&gt;"));
        assert!(s.contains(r#"viewBox="0 0 800 600""#));
        assert!(!s.contains("NaN") && !s.contains("inf"));
    }

    #[test]
    fn single_lambda_and_empty_path_stay_finite() {
        let s = paths_svg(&fit(vec![0.3], vec![vec![]]));
        assert_eq!(s.matches("<polyline").count(), 0);
        assert!(!s.contains("NaN") && !s.contains("inf"));
        let s = cve_svg(&[0.3], &[1.0], &[0.0], 0);
        assert!(!s.contains("NaN") && !s.contains("inf"));
        assert!(s.ends_with("</svg>\n"));
    }

    #[test]
    fn minimum_marker_present() {
        let s = cve_svg(&[1.0, 0.1, 0.01], &[2.0, 1.0, 1.5], &[0.1, 0.1, 0.2], 1);
        assert_eq!(s.matches("<circle").count(), 1);
        assert_eq!(s.matches("<polyline").count(), 1);
    }
}
