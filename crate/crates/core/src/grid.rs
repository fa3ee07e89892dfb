//! Section grids, square patches and the preprocessing applied to them
//! before any descriptor sees the data.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A 2D amplitude section, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionGrid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SectionGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("grid must be non-empty, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "grid {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(SectionGrid { rows, cols, values })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Builds a grid by evaluating `f(row, col)` at every cell.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Sample with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.rows as isize - 1) as usize;
        let c = col.clamp(0, self.cols as isize - 1) as usize;
        self.values[r * self.cols + c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SectionGrid {
        SectionGrid {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Mean and population standard deviation, computed relative to the first
/// sample so that constant inputs give exactly (value, 0).
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let pivot = values[0];
    let n = values.len() as f64;
    let shift = values.iter().map(|&v| v - pivot).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|&v| {
            let d = v - pivot - shift;
            d * d
        })
        .sum::<f64>()
        / n;
    (pivot + shift, var.sqrt())
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let pivot = values[0];
    pivot + values.iter().map(|&v| v - pivot).sum::<f64>() / values.len() as f64
}

/// Z-score the section, clip to +-3 standard deviations and map the result
/// affinely onto [0, 1]. A constant section maps to 0.5 everywhere.
pub fn normalize_section(grid: &SectionGrid) -> SectionGrid {
    const CLIP: f64 = 3.0;
    let (mu, sd) = mean_std(&grid.values);
    if sd == 0.0 || !sd.is_finite() {
        return grid.map(|_| 0.5);
    }
    grid.map(|v| {
        let z = ((v - mu) / sd).clamp(-CLIP, CLIP);
        (z + CLIP) / (2.0 * CLIP)
    })
}

/// A square window of odd side length cut out of a section.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    size: usize,
    values: Vec<f64>,
    center: (usize, usize),
}

impl Patch {
    pub fn new(size: usize, values: Vec<f64>, center: (usize, usize)) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::invalid(format!("patch size must be odd and positive, got {size}")));
        }
        if values.len() != size * size {
            return Err(Error::invalid(format!(
                "patch of side {size} needs {} values, got {}",
                size * size,
                values.len()
            )));
        }
        Ok(Patch { size, values, center })
    }

    /// A patch not tied to any source grid; its center is its own middle pixel.
    pub fn from_values(size: usize, values: Vec<f64>) -> Result<Self> {
        let half = size / 2;
        Self::new(size, values, (half, half))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coordinates of the center pixel in the source grid.
    pub fn center(&self) -> (usize, usize) {
        self.center
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let last = self.size as isize - 1;
        let r = row.clamp(0, last) as usize;
        let c = col.clamp(0, last) as usize;
        self.values[r * self.size + c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Patch {
        Patch {
            size: self.size,
            values: self.values.iter().map(|&v| f(v)).collect(),
            center: self.center,
        }
    }

    pub fn transpose(&self) -> Patch {
        let n = self.size;
        let mut values = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                values[c * n + r] = self.values[r * n + c];
            }
        }
        Patch {
            size: n,
            values,
            center: self.center,
        }
    }

    /// Mirror image across the vertical axis.
    pub fn flip_horizontal(&self) -> Patch {
        let n = self.size;
        let mut values = Vec::with_capacity(n * n);
        for r in 0..n {
            values.extend(self.values[r * n..(r + 1) * n].iter().rev());
        }
        Patch {
            size: n,
            values,
            center: self.center,
        }
    }
}

/// Gray-level codes of a patch, each in `[0, levels)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantPatch {
    size: usize,
    levels: usize,
    codes: Vec<u16>,
}

impl QuantPatch {
    pub fn new(size: usize, levels: usize, codes: Vec<u16>) -> Result<Self> {
        if levels < 2 || levels > u16::MAX as usize + 1 {
            return Err(Error::invalid(format!("gray level count {levels} out of range")));
        }
        if codes.len() != size * size {
            return Err(Error::invalid(format!(
                "quantized patch of side {size} needs {} codes, got {}",
                size * size,
                codes.len()
            )));
        }
        if let Some(bad) = codes.iter().find(|&&c| c as usize >= levels) {
            return Err(Error::invalid(format!("code {bad} not below {levels} levels")));
        }
        Ok(QuantPatch { size, levels, codes })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.codes[row * self.size + col]
    }
}

/// Map [0, 1] amplitudes to `levels` gray levels: `min(floor(v * K), K - 1)`.
/// Values below 0 land in level 0.
pub fn quantize(patch: &Patch, levels: usize) -> Result<QuantPatch> {
    if levels < 2 {
        return Err(Error::invalid(format!("need at least 2 gray levels, got {levels}")));
    }
    if levels > u16::MAX as usize + 1 {
        return Err(Error::invalid(format!("too many gray levels: {levels}")));
    }
    let k = levels as f64;
    let top = levels - 1;
    let codes = patch
        .values
        .iter()
        .map(|&v| {
            let scaled = (v * k).floor();
            if scaled.is_nan() || scaled <= 0.0 {
                0
            } else {
                (scaled as usize).min(top) as u16
            }
        })
        .collect();
    Ok(QuantPatch {
        size: patch.size,
        levels,
        codes,
    })
}

/// Cut a `size`x`size` window centered on `center`. Samples that fall
/// outside the grid replicate the nearest edge pixel.
pub fn extract_patch(grid: &SectionGrid, center: (usize, usize), size: usize) -> Result<Patch> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::invalid(format!("patch size must be odd and positive, got {size}")));
    }
    let (cr, cc) = center;
    if cr >= grid.rows || cc >= grid.cols {
        return Err(Error::invalid(format!(
            "center ({cr}, {cc}) outside {}x{} grid",
            grid.rows, grid.cols
        )));
    }
    let half = (size / 2) as isize;
    let mut values = Vec::with_capacity(size * size);
    for dr in -half..=half {
        for dc in -half..=half {
            values.push(grid.get_clamped(cr as isize + dr, cc as isize + dc));
        }
    }
    Ok(Patch {
        size,
        values,
        center,
    })
}

/// Weight of the centered Gaussian kernel at squared distance `d2`.
#[inline]
pub fn gaussian_weight(d2: f64, sigma: f64) -> f64 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Elementwise product of the patch with a centered Gaussian kernel of the
/// same size. The center pixel keeps its value.
pub fn gaussian_window(patch: &Patch, sigma: f64) -> Result<Patch> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let n = patch.size;
    let mid = (n / 2) as f64;
    let mut values = Vec::with_capacity(n * n);
    for r in 0..n {
        let dy = r as f64 - mid;
        for c in 0..n {
            let dx = c as f64 - mid;
            values.push(patch.values[r * n + c] * gaussian_weight(dx * dx + dy * dy, sigma));
        }
    }
    Ok(Patch {
        size: n,
        values,
        center: patch.center,
    })
}

const SGRID_MAGIC: &str = "SGRID";

/// Encode a grid as `SGRID 1 <rows> <cols>\n` followed by little-endian f32
/// samples. Values are narrowed to f32.
pub fn encode_sgrid(grid: &SectionGrid) -> Vec<u8> {
    let header = format!("{SGRID_MAGIC} 1 {} {}\n", grid.rows, grid.cols);
    let mut out = Vec::with_capacity(header.len() + 4 * grid.values.len());
    out.extend_from_slice(header.as_bytes());
    for &v in &grid.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_sgrid(bytes: &[u8], path: &Path) -> Result<SectionGrid> {
    let bad = |reason: String| Error::format("SGRID", path, reason);
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not ASCII".into()))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 4 || fields[0] != SGRID_MAGIC {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    if fields[1] != "1" {
        return Err(bad(format!("unsupported version {}", fields[1])));
    }
    let rows: usize = fields[2].parse().map_err(|_| bad(format!("bad row count {:?}", fields[2])))?;
    let cols: usize = fields[3].parse().map_err(|_| bad(format!("bad column count {:?}", fields[3])))?;
    let body = &bytes[nl + 1..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(bad(format!("expected {expected} payload bytes, found {}", body.len())));
    }
    let values = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    SectionGrid::new(rows, cols, values).map_err(|e| bad(e.to_string()))
}

pub fn read_sgrid(path: impl AsRef<Path>) -> Result<SectionGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sgrid(&bytes, path)
}

/// Write atomically: the data lands in a sibling temp file that is renamed
/// into place once complete.
pub fn write_sgrid(path: impl AsRef<Path>, grid: &SectionGrid) -> Result<()> {
    write_atomic(path.as_ref(), &encode_sgrid(grid))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid5() -> SectionGrid {
        SectionGrid::from_fn(5, 5, |r, c| (r * 5 + c) as f64).unwrap()
    }

    #[test]
    fn constant_section_normalizes_to_half() {
        let g = SectionGrid::filled(4, 6, 7.3).unwrap();
        assert!(normalize_section(&g).values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn two_valued_section_maps_to_thirds() {
        let g = SectionGrid::new(2, 2, vec![-1.0, 1.0, 1.0, -1.0]).unwrap();
        let n = normalize_section(&g);
        for (&raw, &out) in g.values().iter().zip(n.values()) {
            let want = if raw < 0.0 { 1.0 / 3.0 } else { 2.0 / 3.0 };
            assert_abs_diff_eq!(out, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalized_mean_stays_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = rng.gen_range(1..400);
            // heavy tails push samples past the clip
            let values: Vec<f64> = (0..n)
                .map(|_| {
                    let u: f64 = rng.gen_range(1e-6..1.0);
                    if trial % 2 == 0 { u.powi(-3) } else { rng.gen_range(-5.0..5.0) }
                })
                .collect();
            let g = SectionGrid::new(1, n, values).unwrap();
            let out = normalize_section(&g);
            assert!(out.values().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!((mean(out.values()) - 0.5).abs() <= 0.17);
        }
    }

    #[test]
    fn quantize_boundaries() {
        let p = Patch::from_values(1, vec![0.0]).unwrap();
        assert_eq!(quantize(&p, 64).unwrap().codes(), &[0]);
        let p = Patch::from_values(1, vec![1.0]).unwrap();
        assert_eq!(quantize(&p, 64).unwrap().codes(), &[63]);
        let p = Patch::from_values(1, vec![0.5]).unwrap();
        assert_eq!(quantize(&p, 2).unwrap().codes(), &[1]);
        assert!(matches!(quantize(&p, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn interior_patch_is_verbatim() {
        let p = extract_patch(&grid5(), (2, 2), 3).unwrap();
        assert_eq!(p.values(), &[6.0, 7.0, 8.0, 11.0, 12.0, 13.0, 16.0, 17.0, 18.0]);
        assert_eq!(extract_patch(&grid5(), (2, 2), 5).unwrap().values(), grid5().values());
    }

    #[test]
    fn corner_patch_replicates_edges() {
        let p = extract_patch(&grid5(), (0, 0), 3).unwrap();
        assert_eq!(p.values(), &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0, 6.0]);
    }

    #[test]
    fn patch_errors() {
        assert!(extract_patch(&grid5(), (5, 0), 3).is_err());
        assert!(extract_patch(&grid5(), (1, 1), 4).is_err());
    }

    #[test]
    fn gaussian_weights() {
        let p = Patch::from_values(99, vec![1.0; 99 * 99]).unwrap();
        let w = gaussian_window(&p, 25.0).unwrap();
        assert_eq!(w.get(49, 49), 1.0);
        // distance 25 straight up from the center
        assert_abs_diff_eq!(w.get(24, 49), (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(w.get(24, 49), 0.6065, epsilon = 1e-4);
        assert_abs_diff_eq!(w.get(0, 0), 0.0215, epsilon = 1e-4);
        assert!(gaussian_window(&p, 0.0).is_err());
        assert!(gaussian_window(&p, -1.0).is_err());
    }

    #[test]
    fn sgrid_rejects_truncated_payload() {
        let g = grid5();
        let mut bytes = encode_sgrid(&g);
        bytes.pop();
        assert!(decode_sgrid(&bytes, Path::new("x")).is_err());
        assert!(decode_sgrid(b"SGRID 2 1 1\n\0\0\0\0", Path::new("x")).is_err());
    }

    #[test]
    fn sgrid_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.sgrid");
        write_sgrid(&path, &grid5()).unwrap();
        assert_eq!(read_sgrid(&path).unwrap(), grid5());
    }

    fn small_patch() -> impl Strategy<Value = Patch> {
        (0usize..4).prop_flat_map(|h| {
            let n = 2 * h + 1;
            prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |v| Patch::from_values(n, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn sgrid_bytes_roundtrip(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..rows * cols).map(|_| f32::from_bits(rng.gen::<u32>() & 0x7f7f_ffff) as f64).collect();
            let g = SectionGrid::new(rows, cols, values).unwrap();
            let bytes = encode_sgrid(&g);
            let back = decode_sgrid(&bytes, Path::new("mem")).unwrap();
            prop_assert_eq!(encode_sgrid(&back), bytes);
        }

        #[test]
        fn normalize_is_idempotent_without_clipping(values in prop::collection::vec(-1.0f64..1.0, 2..60)) {
            let n = values.len();
            let g = SectionGrid::new(1, n, values).unwrap();
            let (mu, sd) = mean_std(g.values());
            prop_assume!(sd > 1e-6);
            prop_assume!(g.values().iter().all(|v| ((v - mu) / sd).abs() < 3.0));
            let once = normalize_section(&g);
            let twice = normalize_section(&once);
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn window_commutes_with_transpose(p in small_patch(), sigma in 0.5f64..30.0) {
            let a = gaussian_window(&p.transpose(), sigma).unwrap();
            let b = gaussian_window(&p, sigma).unwrap().transpose();
            prop_assert_eq!(a.values(), b.values());
        }

        #[test]
        fn patch_center_reads_grid(rows in 1usize..12, cols in 1usize..12, h in 0usize..5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = SectionGrid::from_fn(rows, cols, |_, _| rng.gen()).unwrap();
            let center = (rng.gen_range(0..rows), rng.gen_range(0..cols));
            let p = extract_patch(&g, center, 2 * h + 1).unwrap();
            prop_assert_eq!(p.get(h, h), g.get(center.0, center.1));
        }

        #[test]
        fn quantize_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, k in 2usize..300) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let p = Patch::from_values(1, vec![lo]).unwrap();
            let q = Patch::from_values(1, vec![hi]).unwrap();
            let cl = quantize(&p, k).unwrap().codes()[0];
            let ch = quantize(&q, k).unwrap().codes()[0];
            prop_assert!(cl <= ch);
            prop_assert!((ch as usize) < k);
        }
    }
}
