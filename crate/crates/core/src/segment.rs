//! SLIC superpixels over `[l, gx, gy, x, y]` pixel features.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::SectionGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelFeature {
    pub l: f64,
    pub gx: f64,
    pub gy: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    /// Seed spacing S in pixels.
    pub region_size: usize,
    /// Weight m of the spatial term.
    pub compactness: f64,
    pub iterations: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        SlicParams {
            region_size: 25,
            compactness: 0.5,
            iterations: 10,
        }
    }
}

/// A partition of the grid into 4-connected superpixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelMap {
    rows: usize,
    cols: usize,
    assignment: Vec<u32>,
    count: usize,
    centroids: Vec<(usize, usize)>,
}

impl SuperpixelMap {
    /// Build from a per-pixel id map; ids must be dense in `0..count`.
    pub fn from_assignment(rows: usize, cols: usize, assignment: Vec<u32>) -> Result<Self> {
        if assignment.len() != rows * cols || assignment.is_empty() {
            return Err(Error::invalid("assignment does not match grid shape"));
        }
        let count = *assignment.iter().max().expect("non-empty") as usize + 1;
        let mut seen = vec![false; count];
        for &a in &assignment {
            seen[a as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("superpixel ids are not dense"));
        }
        let mut map = SuperpixelMap {
            rows,
            cols,
            assignment,
            count,
            centroids: Vec::new(),
        };
        map.centroids = superpixel_centroids(&map);
        Ok(map)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn centroids(&self) -> &[(usize, usize)] {
        &self.centroids
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &a in &self.assignment {
            sizes[a as usize] += 1;
        }
        sizes
    }

    /// Superpixel ids as a grid, for export.
    pub fn to_grid(&self) -> SectionGrid {
        SectionGrid::new(self.rows, self.cols, self.assignment.iter().map(|&a| a as f64).collect())
            .expect("shape checked at construction")
    }
}

/// Central-difference gradients, one-sided on the border.
pub fn pixel_features(grid: &SectionGrid) -> Vec<PixelFeature> {
    let (rows, cols) = (grid.rows(), grid.cols());
    let diff = |lo: f64, hi: f64, span: usize| if span == 0 { 0.0 } else { (hi - lo) / span as f64 };
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (c0, c1) = (c.saturating_sub(1), (c + 1).min(cols - 1));
            let (r0, r1) = (r.saturating_sub(1), (r + 1).min(rows - 1));
            out.push(PixelFeature {
                l: grid.get(r, c),
                gx: diff(grid.get(r, c0), grid.get(r, c1), c1 - c0),
                gy: diff(grid.get(r0, c), grid.get(r1, c), r1 - r0),
                x: c as f64,
                y: r as f64,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Center {
    l: f64,
    gx: f64,
    gy: f64,
    x: f64,
    y: f64,
}

impl Center {
    fn from_feature(f: &PixelFeature) -> Self {
        Center {
            l: f.l,
            gx: f.gx,
            gy: f.gy,
            x: f.x,
            y: f.y,
        }
    }
}

/// Seed positions on a regular grid of spacing `s`, one per cell.
fn seed_grid(rows: usize, cols: usize, s: usize) -> (Vec<(usize, usize)>, usize, usize) {
    let nr = ((rows as f64 / s as f64).round() as usize).max(1);
    let nc = ((cols as f64 / s as f64).round() as usize).max(1);
    let step_r = rows as f64 / nr as f64;
    let step_c = cols as f64 / nc as f64;
    let mut seeds = Vec::with_capacity(nr * nc);
    for i in 0..nr {
        for j in 0..nc {
            let r = (((i as f64 + 0.5) * step_r) as usize).min(rows - 1);
            let c = (((j as f64 + 0.5) * step_c) as usize).min(cols - 1);
            seeds.push((r, c));
        }
    }
    (seeds, nr, nc)
}

/// Regular seeds with each moved to the lowest-gradient pixel of its 3x3
/// neighborhood; ties keep the seed where it is.
pub fn initial_seeds(grid: &SectionGrid, region_size: usize) -> Vec<(usize, usize)> {
    let feats = pixel_features(grid);
    let (rows, cols) = (grid.rows(), grid.cols());
    let (seeds, _, _) = seed_grid(rows, cols, region_size);
    let mag = |r: usize, c: usize| {
        let f = &feats[r * cols + c];
        f.gx * f.gx + f.gy * f.gy
    };
    seeds
        .into_iter()
        .map(|(r, c)| {
            let mut best = (r, c);
            let mut best_mag = mag(r, c);
            for rr in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
                    let m = mag(rr, cc);
                    if m < best_mag {
                        best_mag = m;
                        best = (rr, cc);
                    }
                }
            }
            best
        })
        .collect()
}

/// Cluster the normalized grid into superpixels.
///
/// Distance is `sqrt(d_feat^2 + (m / S)^2 d_xy^2)` with `d_feat` over
/// `(l, gx, gy)`. Each center only competes for pixels in its 2S x 2S
/// window. After the last iteration every 4-connected fragment smaller than
/// S^2 / 4 is merged into the adjacent superpixel of closest mean intensity.
pub fn slic_segment(grid: &SectionGrid, params: &SlicParams) -> Result<SuperpixelMap> {
    let s = params.region_size;
    let (rows, cols) = (grid.rows(), grid.cols());
    if s < 4 {
        return Err(Error::invalid(format!("region size must be at least 4, got {s}")));
    }
    if s > rows || s > cols {
        return Err(Error::invalid(format!("region size {s} exceeds the {rows}x{cols} grid")));
    }
    if !(params.compactness >= 0.0) || !params.compactness.is_finite() {
        return Err(Error::invalid(format!("compactness must be non-negative, got {}", params.compactness)));
    }

    let feats = pixel_features(grid);
    let seeds = initial_seeds(grid, s);
    let mut centers: Vec<Center> = seeds
        .iter()
        .map(|&(r, c)| Center::from_feature(&feats[r * cols + c]))
        .collect();

    // start from the seed-grid cells so no pixel is ever unassigned
    let (_, nr, nc) = seed_grid(rows, cols, s);
    let mut labels: Vec<u32> = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let gi = (r * nr / rows).min(nr - 1);
            let gj = (c * nc / cols).min(nc - 1);
            (gi * nc + gj) as u32
        })
        .collect();

    let spatial = (params.compactness / s as f64).powi(2);
    let reach = s as f64;
    let mut dist = vec![f64::INFINITY; rows * cols];
    for _ in 0..params.iterations {
        dist.fill(f64::INFINITY);
        let mut next = labels.clone();
        for (k, ctr) in centers.iter().enumerate() {
            let r_lo = (ctr.y - reach).floor().max(0.0) as usize;
            let r_hi = ((ctr.y + reach).ceil() as usize).min(rows - 1);
            let c_lo = (ctr.x - reach).floor().max(0.0) as usize;
            let c_hi = ((ctr.x + reach).ceil() as usize).min(cols - 1);
            for r in r_lo..=r_hi {
                for c in c_lo..=c_hi {
                    let i = r * cols + c;
                    let f = &feats[i];
                    let (dl, dgx, dgy) = (f.l - ctr.l, f.gx - ctr.gx, f.gy - ctr.gy);
                    let (dx, dy) = (f.x - ctr.x, f.y - ctr.y);
                    let d = dl * dl + dgx * dgx + dgy * dgy + spatial * (dx * dx + dy * dy);
                    if d < dist[i] {
                        dist[i] = d;
                        next[i] = k as u32;
                    }
                }
            }
        }
        let changed = next != labels;
        labels = next;

        let mut sums = vec![[0.0f64; 5]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (f, &lab) in feats.iter().zip(&labels) {
            let acc = &mut sums[lab as usize];
            acc[0] += f.l;
            acc[1] += f.gx;
            acc[2] += f.gy;
            acc[3] += f.x;
            acc[4] += f.y;
            counts[lab as usize] += 1;
        }
        for ((ctr, acc), &n) in centers.iter_mut().zip(&sums).zip(&counts) {
            if n > 0 {
                let n = n as f64;
                *ctr = Center {
                    l: acc[0] / n,
                    gx: acc[1] / n,
                    gy: acc[2] / n,
                    x: acc[3] / n,
                    y: acc[4] / n,
                };
            }
        }
        if !changed {
            break;
        }
    }

    let assignment = enforce_connectivity(grid, &labels, (s * s / 4).max(1));
    SuperpixelMap::from_assignment(rows, cols, assignment)
}

struct Components {
    parent: Vec<usize>,
    size: Vec<usize>,
    sum: Vec<f64>,
    adjacent: Vec<BTreeSet<usize>>,
}

impl Components {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn mean(&self, root: usize) -> f64 {
        self.sum[root] / self.size[root] as f64
    }

    /// Merge `small` into `big`; `big` stays the root.
    fn absorb(&mut self, big: usize, small: usize) {
        self.parent[small] = big;
        self.size[big] += self.size[small];
        self.sum[big] += self.sum[small];
        let moved = std::mem::take(&mut self.adjacent[small]);
        self.adjacent[big].extend(moved);
    }
}

/// Split every label into its 4-connected components, then merge
/// components of at most `min_size` pixels into the neighboring component
/// whose mean intensity is closest. Returns dense ids in scan order.
pub fn enforce_connectivity(grid: &SectionGrid, labels: &[u32], min_size: usize) -> Vec<u32> {
    let (rows, cols) = (grid.rows(), grid.cols());
    let n = rows * cols;
    const NONE: usize = usize::MAX;
    let mut comp = vec![NONE; n];
    let mut sizes = Vec::new();
    let mut sums = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != NONE {
            continue;
        }
        let id = sizes.len();
        let lab = labels[start];
        comp[start] = id;
        stack.push(start);
        let (mut size, mut sum) = (0usize, 0.0f64);
        while let Some(i) = stack.pop() {
            size += 1;
            sum += grid.values()[i];
            let (r, c) = (i / cols, i % cols);
            let mut visit = |j: usize| {
                if comp[j] == NONE && labels[j] == lab {
                    comp[j] = id;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - cols);
            }
            if r + 1 < rows {
                visit(i + cols);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < cols {
                visit(i + 1);
            }
        }
        sizes.push(size);
        sums.push(sum);
    }

    let m = sizes.len();
    let mut adjacent = vec![BTreeSet::new(); m];
    for r in 0..rows {
        for c in 0..cols {
            let a = comp[r * cols + c];
            if c + 1 < cols {
                let b = comp[r * cols + c + 1];
                if a != b {
                    adjacent[a].insert(b);
                    adjacent[b].insert(a);
                }
            }
            if r + 1 < rows {
                let b = comp[(r + 1) * cols + c];
                if a != b {
                    adjacent[a].insert(b);
                    adjacent[b].insert(a);
                }
            }
        }
    }
    let mut uf = Components {
        parent: (0..m).collect(),
        size: sizes,
        sum: sums,
        adjacent,
    };

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| (uf.size[i], i));
    for c in order {
        loop {
            let root = uf.find(c);
            if uf.size[root] > min_size {
                break;
            }
            let neighbors: Vec<usize> = uf.adjacent[root].iter().copied().collect();
            let mut roots: Vec<usize> = neighbors.into_iter().map(|x| uf.find(x)).filter(|&x| x != root).collect();
            roots.sort_unstable();
            roots.dedup();
            let my_mean = uf.mean(root);
            let Some(target) = roots
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = (uf.mean(a) - my_mean).abs();
                    let db = (uf.mean(b) - my_mean).abs();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
            else {
                break;
            };
            uf.absorb(target, root);
        }
    }

    let mut dense = vec![NONE; m];
    let mut next = 0u32;
    let mut out = Vec::with_capacity(n);
    for &c in &comp {
        let root = uf.find(c);
        if dense[root] == NONE {
            dense[root] = next as usize;
            next += 1;
        }
        out.push(dense[root] as u32);
    }
    out
}

/// Rounded mean (row, col) of each superpixel.
pub fn superpixel_centroids(map: &SuperpixelMap) -> Vec<(usize, usize)> {
    let mut acc = vec![(0.0f64, 0.0f64, 0usize); map.count];
    for (i, &a) in map.assignment.iter().enumerate() {
        let e = &mut acc[a as usize];
        e.0 += (i / map.cols) as f64;
        e.1 += (i % map.cols) as f64;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(r, c, n)| {
            let n = n.max(1) as f64;
            (
                ((r / n).round() as usize).min(map.rows - 1),
                ((c / n).round() as usize).min(map.cols - 1),
            )
        })
        .collect()
}

/// True when every superpixel id occupies a single 4-connected region.
pub fn is_four_connected(map: &SuperpixelMap) -> bool {
    let (rows, cols) = (map.rows, map.cols);
    let a = &map.assignment;
    let mut seen = vec![false; a.len()];
    let mut started = vec![false; map.count];
    let mut stack = Vec::new();
    for start in 0..a.len() {
        if seen[start] {
            continue;
        }
        let lab = a[start] as usize;
        if started[lab] {
            return false;
        }
        started[lab] = true;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            let mut neighbors = [usize::MAX; 4];
            if r > 0 {
                neighbors[0] = i - cols;
            }
            if r + 1 < rows {
                neighbors[1] = i + cols;
            }
            if c > 0 {
                neighbors[2] = i - 1;
            }
            if c + 1 < cols {
                neighbors[3] = i + 1;
            }
            for j in neighbors.into_iter().filter(|&j| j != usize::MAX) {
                if !seen[j] && a[j] as usize == lab {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(s: usize, m: f64) -> SlicParams {
        SlicParams {
            region_size: s,
            compactness: m,
            iterations: 10,
        }
    }

    #[test]
    fn gradients_use_central_and_one_sided_differences() {
        let g = SectionGrid::from_fn(3, 4, |r, c| (c * c) as f64 + 10.0 * r as f64).unwrap();
        let f = pixel_features(&g);
        assert_eq!(f[1].gx, (4.0 - 0.0) / 2.0);
        assert_eq!(f[0].gx, 1.0);
        assert_eq!(f[3].gx, 9.0 - 4.0);
        assert_eq!(f[5].gy, 10.0);
        assert_eq!((f[6].x, f[6].y), (2.0, 1.0));
    }

    #[test]
    fn constant_grid_tiles_regularly() {
        let g = SectionGrid::filled(100, 100, 0.5).unwrap();
        let map = slic_segment(&g, &params(10, 0.5)).unwrap();
        assert_eq!(map.count(), 100);
        // oracle: plain nearest-seed assignment over the whole grid
        let seeds = initial_seeds(&g, 10);
        let mut sums = vec![(0.0, 0.0, 0.0); seeds.len()];
        for r in 0..100 {
            for c in 0..100 {
                let k = (0..seeds.len())
                    .min_by_key(|&k| {
                        let (sr, sc) = seeds[k];
                        let (dr, dc) = (sr as i64 - r as i64, sc as i64 - c as i64);
                        (dr * dr + dc * dc, k)
                    })
                    .unwrap();
                sums[k].0 += r as f64;
                sums[k].1 += c as f64;
                sums[k].2 += 1.0;
            }
        }
        let mut oracle: Vec<(f64, f64)> = sums.iter().map(|s| (s.0 / s.2, s.1 / s.2)).collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut got: Vec<(usize, usize)> = map.centroids().to_vec();
        got.sort();
        for ((gr, gc), (orr, oc)) in got.iter().zip(&oracle) {
            assert!((*gr as f64 - orr).abs() <= 2.0 && (*gc as f64 - oc).abs() <= 2.0);
        }
        for (&(cr, cc), &(sr, sc)) in map.centroids().iter().zip(&seeds) {
            let near = seeds
                .iter()
                .any(|&(r, c)| (r as i64 - cr as i64).abs() <= 2 && (c as i64 - cc as i64).abs() <= 2);
            assert!(near, "centroid ({cr}, {cc}) drifted from seed grid (first seed {sr}, {sc})");
        }
    }

    #[test]
    fn two_regions_are_not_mixed() {
        let g = SectionGrid::from_fn(60, 80, |_, c| if c < 40 { 0.0 } else { 1.0 }).unwrap();
        for m in [0.0, 0.05, 0.1] {
            let map = slic_segment(&g, &params(10, m)).unwrap();
            let mut side = vec![None; map.count()];
            for (i, &a) in map.assignment().iter().enumerate() {
                let left = i % 80 < 40;
                match side[a as usize] {
                    None => side[a as usize] = Some(left),
                    Some(s) => assert_eq!(s, left, "superpixel {a} straddles the boundary at m = {m}"),
                }
            }
        }
    }

    #[test]
    fn random_grids_are_connected_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let g = SectionGrid::from_fn(48, 64, |_, _| rng.gen()).unwrap();
            let map = slic_segment(&g, &params(8, 0.5)).unwrap();
            assert_eq!(map.sizes().iter().sum::<usize>(), 48 * 64);
            assert!(map.sizes().iter().all(|&s| s > 0));
            assert!(is_four_connected(&map));
        }
    }

    #[test]
    fn segmentation_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = SectionGrid::from_fn(40, 40, |_, _| rng.gen()).unwrap();
        assert_eq!(slic_segment(&g, &params(8, 0.5)).unwrap(), slic_segment(&g, &params(8, 0.5)).unwrap());
    }

    #[test]
    fn centroid_examples() {
        let single = SuperpixelMap::from_assignment(3, 3, vec![0; 9]).unwrap();
        assert_eq!(single.centroids(), &[(1, 1)]);
        let two = SuperpixelMap::from_assignment(1, 3, vec![0, 1, 0]).unwrap();
        assert_eq!(two.centroids()[0], (0, 1));
    }

    #[test]
    fn invalid_sizes() {
        let g = SectionGrid::filled(20, 20, 0.0).unwrap();
        assert!(slic_segment(&g, &params(3, 0.5)).is_err());
        assert!(slic_segment(&g, &params(21, 0.5)).is_err());
        assert!(SuperpixelMap::from_assignment(1, 3, vec![0, 2, 0]).is_err());
    }
}
