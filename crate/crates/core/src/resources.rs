//! Memory budget, block sizing and thread settings shared by every stage.

use crate::error::{Error, Result};
use crate::store::DEFAULT_BLOCK_WIDTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resources {
    /// Upper bound on bytes held in memory by explicit allocations.
    pub memory_budget: Option<u64>,
    pub block_width: usize,
}

impl Default for Resources {
    fn default() -> Self {
        Resources {
            memory_budget: None,
            block_width: DEFAULT_BLOCK_WIDTH,
        }
    }
}

impl Resources {
    pub fn check(&self, what: &str, needed: u64) -> Result<()> {
        match self.memory_budget {
            Some(budget) if needed > budget => Err(Error::Capacity {
                what: what.to_string(),
                needed,
                budget,
            }),
            _ => Ok(()),
        }
    }

    /// Block width for traversals over `n_rows`-tall matrices: the configured
    /// width, narrowed until a few live blocks fit in a quarter of the budget.
    pub fn block_width_for(&self, n_rows: usize) -> usize {
        let width = self.block_width.max(1);
        match self.memory_budget {
            None => width,
            Some(budget) => {
                let live_blocks = 3 * rayon::current_num_threads().max(1) as u64;
                let per_col = 8 * n_rows.max(1) as u64 * live_blocks;
                let fit = (budget / 4 / per_col).max(1);
                width.min(fit as usize)
            }
        }
    }
}

pub(crate) fn faer_par() -> faer::Par {
    match rayon::current_num_threads() {
        0 | 1 => faer::Par::Seq,
        t => faer::Par::rayon(t),
    }
}

/// Peak resident set size of this process, from `/proc/self/status`.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse::<u64>().ok())
        .map(|kb| kb * 1024)
}
