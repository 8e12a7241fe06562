//! Wall-clock stage timing.

use std::time::Instant;

/// Contiguous stage timer: each [`StageTimer::lap`] closes the stage that
/// began at the previous lap, so stage durations sum to the elapsed total.
#[derive(Debug, Clone)]
pub struct StageTimer {
    start: Instant,
    last: Instant,
    stages: Vec<(String, f64)>,
}

impl Default for StageTimer {
    fn default() -> Self {
        Self::new()
    }
}

impl StageTimer {
    pub fn new() -> Self {
        let now = Instant::now();
        StageTimer {
            start: now,
            last: now,
            stages: Vec::new(),
        }
    }

    /// Records the time since the previous lap under `name`.
    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        let secs = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        self.add(name, secs);
    }

    pub fn stages(&self) -> &[(String, f64)] {
        &self.stages
    }

    pub fn into_stages(self) -> Vec<(String, f64)> {
        self.stages
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Closes the current span as the given `stages`, measured by someone
    /// else inside it, plus whatever they did not cover under `rest`.
    pub fn lap_split(&mut self, stages: &[(String, f64)], rest: &str) {
        let now = Instant::now();
        let span = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        let mut covered = 0.0;
        for (name, secs) in stages {
            covered += secs;
            self.add(name, *secs);
        }
        self.add(rest, (span - covered).max(0.0));
    }

    fn add(&mut self, name: &str, secs: f64) {
        match self.stages.iter_mut().find(|(n, _)| n == name) {
            Some((_, s)) => *s += secs,
            None => self.stages.push((name.to_string(), secs)),
        }
    }

    /// Appends stages recorded elsewhere, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, stages: &[(String, f64)]) {
        for (name, secs) in stages {
            self.stages.push((format!("{prefix}{name}"), *secs));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laps_sum_to_elapsed() {
        let mut t = StageTimer::new();
        std::thread::sleep(std::time::Duration::from_millis(5));
        t.lap("a");
        std::thread::sleep(std::time::Duration::from_millis(5));
        t.lap("b");
        t.lap("a");
        assert_eq!(t.stages().len(), 2);
        let sum: f64 = t.stages().iter().map(|(_, s)| s).sum();
        assert!((t.elapsed() - sum).abs() < 1e-3);
    }

    #[test]
    fn split_span_keeps_the_total() {
        let mut t = StageTimer::new();
        std::thread::sleep(std::time::Duration::from_millis(8));
        t.lap_split(&[("inner".into(), 0.003)], "rest");
        let s = t.stages();
        assert_eq!(s[0], ("inner".to_string(), 0.003));
        let sum: f64 = s.iter().map(|(_, v)| v).sum();
        assert!((t.elapsed() - sum).abs() < 1e-3);
        assert!(s[1].1 > 0.004);
    }
}
