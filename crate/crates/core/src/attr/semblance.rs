//! Zero-dip semblance coherence and its histogram featurization.

use crate::error::Result;
use crate::grid::{mean, Patch, SectionGrid};
use crate::histogram::{bin_counts, normalize_counts, DescriptorId, FeatureHistogram};

/// Half extents (time samples, traces) of the 3x3 analysis window.
pub const DEFAULT_HALF_WINDOW: (usize, usize) = (1, 1);

pub const SEMBLANCE_BINS: usize = 32;

/// Semblance of a window given as `traces[j][t]`:
/// `sum_t (sum_j a)^2 / (J * sum_t sum_j a^2)`, and 1 for an all-zero window.
pub fn semblance(traces: &[&[f64]]) -> f64 {
    let j = traces.len();
    if j == 0 {
        return 1.0;
    }
    let t_len = traces[0].len();
    let mut stacked = 0.0;
    let mut energy = 0.0;
    for t in 0..t_len {
        let mut sum = 0.0;
        for tr in traces {
            let a = tr[t];
            sum += a;
            energy += a * a;
        }
        stacked += sum * sum;
    }
    if energy == 0.0 {
        return 1.0;
    }
    (stacked / (j as f64 * energy)).clamp(0.0, 1.0)
}

/// Per-pixel semblance over a `(2*half.0 + 1)` samples by `(2*half.1 + 1)`
/// traces window. Columns are traces and rows are time samples; the window
/// replicates edge samples past the grid border.
pub fn semblance_map(grid: &SectionGrid, half_window: (usize, usize)) -> SectionGrid {
    let (ht, hj) = (half_window.0 as isize, half_window.1 as isize);
    let rows = grid.rows();
    let cols = grid.cols();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows as isize {
        for c in 0..cols as isize {
            let mut stacked = 0.0;
            let mut energy = 0.0;
            for dt in -ht..=ht {
                let mut sum = 0.0;
                for dj in -hj..=hj {
                    let a = grid.get_clamped(r + dt, c + dj);
                    sum += a;
                    energy += a * a;
                }
                stacked += sum * sum;
            }
            let s = if energy == 0.0 {
                1.0
            } else {
                (stacked / ((2 * hj + 1) as f64 * energy)).clamp(0.0, 1.0)
            };
            out.push(s);
        }
    }
    SectionGrid::new(rows, cols, out).expect("shape preserved")
}

/// 32-bin histogram over [0, 1] of a patch of semblance values.
pub fn semblance_feature(patch: &Patch) -> FeatureHistogram {
    let k = SEMBLANCE_BINS as f64;
    let codes = patch.values().iter().map(|&v| {
        let b = (v * k).floor();
        if b.is_nan() || b <= 0.0 {
            0
        } else {
            (b as usize).min(SEMBLANCE_BINS - 1)
        }
    });
    let counts = bin_counts(codes, SEMBLANCE_BINS).expect("codes clamped into range");
    FeatureHistogram::new(DescriptorId::Semblance, normalize_counts(&counts))
}

/// Semblance descriptor for an amplitude patch: remove the patch mean so
/// amplitudes oscillate about zero, compute the semblance map inside the
/// patch and histogram it.
pub fn semblance_patch_feature(patch: &Patch, half_window: (usize, usize)) -> Result<FeatureHistogram> {
    let mu = mean(patch.values());
    let n = patch.size();
    let centered = SectionGrid::new(n, n, patch.values().iter().map(|&v| v - mu).collect())?;
    let map = semblance_map(&centered, half_window);
    let map_patch = Patch::new(n, map.into_values(), patch.center())?;
    Ok(semblance_feature(&map_patch))
}
