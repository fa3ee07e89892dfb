//! Local binary patterns with the rotation-invariant uniform (riu2) mapping,
//! and the CLBP, M-CLBP, ELBP and CLDP variants built on them.
//!
//! Neighbors are read counterclockwise from angle 0 (the pixel to the right
//! of the center) on a circle of radius `R`, using bilinear interpolation for
//! off-grid positions. Every variant histograms the pixels whose full ring
//! lies inside the patch.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{mean, Patch};
use crate::histogram::{bin_counts, concat_equal_weight, normalize_counts, DescriptorId, FeatureHistogram};

/// Largest supported sample count; codes are held in a `u32`.
pub const MAX_SAMPLES: usize = 31;

/// (P, R) scales combined by M-CLBP.
pub const MULTISCALE: [(usize, f64); 3] = [(8, 1.0), (16, 2.0), (24, 3.0)];

/// Circular neighborhood of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRing {
    pub radius: f64,
    pub samples: Vec<f64>,
    pub center: f64,
}

impl NeighborRing {
    pub fn p(&self) -> usize {
        self.samples.len()
    }
}

#[inline]
fn sign_bit(x: f64) -> u32 {
    (x >= 0.0) as u32
}

/// `sum_p s(g_p - g_c) 2^p` with `s(x) = 1` iff `x >= 0`.
pub fn lbp_code(ring: &NeighborRing) -> u32 {
    assert!(ring.p() <= MAX_SAMPLES, "at most {MAX_SAMPLES} samples");
    ring.samples
        .iter()
        .enumerate()
        .fold(0u32, |code, (p, &g)| code | (sign_bit(g - ring.center) << p))
}

#[inline]
fn mask(p: usize) -> u32 {
    if p >= 32 {
        u32::MAX
    } else {
        (1u32 << p) - 1
    }
}

/// Number of 0/1 changes when the `p` low bits of `code` are walked circularly.
pub fn transitions(code: u32, p: usize) -> u32 {
    let m = mask(p);
    let code = code & m;
    let rotated = ((code << 1) | (code >> (p - 1))) & m;
    (code ^ rotated).count_ones()
}

/// riu2 label: the number of set bits for codes with at most two circular
/// transitions, `p + 1` for every other code.
pub fn riu2(code: u32, p: usize) -> usize {
    if transitions(code, p) <= 2 {
        (code & mask(p)).count_ones() as usize
    } else {
        p + 1
    }
}

/// Smallest value among the circular bit rotations of `code`.
pub fn min_rotation(code: u32, p: usize) -> u32 {
    let m = mask(p);
    let mut c = code & m;
    let mut best = c;
    for _ in 1..p {
        c = ((c >> 1) | (c << (p - 1))) & m;
        best = best.min(c);
    }
    best
}

/// Precomputed riu2 labels for one sample count.
#[derive(Debug)]
pub struct Riu2Map {
    p: usize,
    table: Vec<u8>,
}

/// Table sizes beyond this are computed on the fly instead.
const TABLE_LIMIT: usize = 16;

impl Riu2Map {
    pub fn new(p: usize) -> Self {
        assert!((1..=MAX_SAMPLES).contains(&p), "sample count {p} unsupported");
        let table = if p <= TABLE_LIMIT {
            (0..1u32 << p).map(|c| riu2(c, p) as u8).collect()
        } else {
            Vec::new()
        };
        Riu2Map { p, table }
    }

    /// Process-wide map for `p`, built once.
    pub fn shared(p: usize) -> &'static Riu2Map {
        static MAPS: [OnceLock<Riu2Map>; MAX_SAMPLES + 1] = [const { OnceLock::new() }; MAX_SAMPLES + 1];
        MAPS[p].get_or_init(|| Riu2Map::new(p))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of distinct labels, `P + 2`.
    pub fn label_count(&self) -> usize {
        self.p + 2
    }

    #[inline]
    pub fn label(&self, code: u32) -> usize {
        if self.table.is_empty() {
            riu2(code, self.p)
        } else {
            self.table[code as usize] as usize
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    dr: isize,
    dc: isize,
    fy: f64,
    fx: f64,
}

/// Bilinear sampling offsets for a (P, R) ring.
#[derive(Debug, Clone)]
struct RingSampler {
    taps: Vec<Tap>,
}

impl RingSampler {
    fn new(p: usize, radius: f64) -> Self {
        let snap = |v: f64| {
            let r = v.round();
            if (v - r).abs() < 1e-9 {
                r
            } else {
                v
            }
        };
        let taps = (0..p)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / p as f64;
                // rows grow downward, so counterclockwise means negative row offsets
                let y = snap(-radius * theta.sin());
                let x = snap(radius * theta.cos());
                let (r0, c0) = (y.floor(), x.floor());
                Tap {
                    dr: r0 as isize,
                    dc: c0 as isize,
                    fy: y - r0,
                    fx: x - c0,
                }
            })
            .collect();
        RingSampler { taps }
    }

    /// Fill `out` with the ring around (row, col); the ring must fit the patch.
    #[inline]
    fn sample_into(&self, patch: &Patch, row: usize, col: usize, out: &mut [f64]) {
        let n = patch.size();
        let v = patch.values();
        for (slot, t) in out.iter_mut().zip(&self.taps) {
            let r = (row as isize + t.dr) as usize;
            let c = (col as isize + t.dc) as usize;
            let base = r * n + c;
            let v00 = v[base];
            let top = if t.fx == 0.0 { v00 } else { v00 + t.fx * (v[base + 1] - v00) };
            *slot = if t.fy == 0.0 {
                top
            } else {
                let v10 = v[base + n];
                let bottom = if t.fx == 0.0 { v10 } else { v10 + t.fx * (v[base + n + 1] - v10) };
                top + t.fy * (bottom - top)
            };
        }
    }
}

/// Ring of `p` samples at `radius` around an interior pixel of the patch.
pub fn sample_ring(patch: &Patch, row: usize, col: usize, p: usize, radius: f64) -> Result<NeighborRing> {
    let margin = radius.ceil() as usize;
    let n = patch.size();
    if row < margin || col < margin || row + margin >= n || col + margin >= n {
        return Err(Error::invalid(format!(
            "ring of radius {radius} around ({row}, {col}) leaves the {n}x{n} patch"
        )));
    }
    let mut samples = vec![0.0; p];
    RingSampler::new(p, radius).sample_into(patch, row, col, &mut samples);
    Ok(NeighborRing {
        radius,
        samples,
        center: patch.get(row, col),
    })
}

fn check_params(patch: &Patch, p: usize, radius: f64) -> Result<usize> {
    if !(2..=MAX_SAMPLES).contains(&p) {
        return Err(Error::invalid(format!("sample count must be in 2..={MAX_SAMPLES}, got {p}")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    if (patch.size() as f64) <= 2.0 * radius + 1.0 {
        return Err(Error::invalid(format!(
            "patch side {} too small for radius {radius}",
            patch.size()
        )));
    }
    Ok(radius.ceil() as usize)
}

/// Visit every pixel whose ring fits, handing over the centered differences
/// `g_p - g_c` for the outer ring (and optionally an inner ring).
fn for_each_interior(
    patch: &Patch,
    p: usize,
    radius: f64,
    inner_radius: Option<f64>,
    mut f: impl FnMut(f64, &[f64], &[f64]),
) {
    let margin = radius.ceil() as usize;
    let n = patch.size();
    let outer = RingSampler::new(p, radius);
    let inner = inner_radius.map(|r| RingSampler::new(p, r));
    let mut ring = vec![0.0; p];
    let mut ring_in = vec![0.0; if inner.is_some() { p } else { 0 }];
    for row in margin..n - margin {
        for col in margin..n - margin {
            let gc = patch.get(row, col);
            outer.sample_into(patch, row, col, &mut ring);
            for g in ring.iter_mut() {
                *g -= gc;
            }
            if let Some(s) = &inner {
                s.sample_into(patch, row, col, &mut ring_in);
                for g in ring_in.iter_mut() {
                    *g -= gc;
                }
            }
            f(gc, &ring, &ring_in);
        }
    }
}

#[inline]
fn code_from(diffs: &[f64], mut bit: impl FnMut(f64) -> bool) -> u32 {
    diffs
        .iter()
        .enumerate()
        .fold(0u32, |code, (i, &d)| code | ((bit(d) as u32) << i))
}

/// riu2 LBP histogram, `P + 2` bins.
pub fn lbp_feature(patch: &Patch, p: usize, radius: f64) -> Result<FeatureHistogram> {
    check_params(patch, p, radius)?;
    let map = Riu2Map::shared(p);
    let mut codes = Vec::new();
    for_each_interior(patch, p, radius, None, |_, d, _| {
        codes.push(map.label(code_from(d, |x| x >= 0.0)));
    });
    let counts = bin_counts(codes, map.label_count())?;
    Ok(FeatureHistogram::new(DescriptorId::Lbp, normalize_counts(&counts)))
}

/// Joint (S, M, C) CLBP counts, laid out `(s * (P + 2) + m) * 2 + c`.
fn clbp_counts(patch: &Patch, p: usize, radius: f64) -> Result<Vec<u64>> {
    check_params(patch, p, radius)?;
    let map = Riu2Map::shared(p);
    let labels = map.label_count();
    let patch_mean = mean(patch.values());

    let mut diffs = Vec::new();
    let mut centers = Vec::new();
    for_each_interior(patch, p, radius, None, |gc, d, _| {
        diffs.extend_from_slice(d);
        centers.push(gc);
    });
    // magnitude threshold: mean |g_p - g_c| over the patch
    let c_m = if diffs.is_empty() {
        0.0
    } else {
        diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64
    };
    let codes = diffs.chunks_exact(p).zip(&centers).map(|(d, &gc)| {
        let s = map.label(code_from(d, |x| x >= 0.0));
        let m = map.label(code_from(d, |x| x.abs() - c_m >= 0.0));
        let c = (gc >= patch_mean) as usize;
        (s * labels + m) * 2 + c
    });
    bin_counts(codes, labels * labels * 2)
}

/// CLBP joint S/M/C histogram, `(P + 2)^2 * 2` bins.
pub fn clbp_feature(patch: &Patch, p: usize, radius: f64) -> Result<FeatureHistogram> {
    let counts = clbp_counts(patch, p, radius)?;
    Ok(FeatureHistogram::new(DescriptorId::Clbp, normalize_counts(&counts)))
}

/// CLBP at (8, 1), (16, 2) and (24, 3), each scale weighted 1/3.
pub fn mclbp_feature(patch: &Patch) -> Result<FeatureHistogram> {
    let parts = MULTISCALE
        .iter()
        .map(|&(p, r)| clbp_counts(patch, p, r).map(|c| normalize_counts(&c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureHistogram::new(DescriptorId::Mclbp, concat_equal_weight(&parts)))
}

fn check_inner_ring(radius: f64) -> Result<()> {
    if radius < 2.0 {
        return Err(Error::invalid(format!("radius {radius} leaves no inner ring; need R >= 2")));
    }
    Ok(())
}

/// ELBP joint NI/RD/CI histogram, `(P + 2)^2 * 2` bins.
///
/// NI thresholds each neighbor against the ring mean, RD compares each
/// sample at radius `R` with the matching sample at `R - 1`, CI compares the
/// center with the patch mean.
pub fn elbp_feature(patch: &Patch, p: usize, radius: f64) -> Result<FeatureHistogram> {
    check_params(patch, p, radius)?;
    check_inner_ring(radius)?;
    let map = Riu2Map::shared(p);
    let labels = map.label_count();
    let patch_mean = mean(patch.values());
    let mut codes = Vec::new();
    let mut radial = vec![0.0; p];
    for_each_interior(patch, p, radius, Some(radius - 1.0), |gc, outer, inner| {
        let ring_mean = outer.iter().sum::<f64>() / p as f64;
        let ni = map.label(code_from(outer, |d| d - ring_mean >= 0.0));
        for ((slot, &o), &i) in radial.iter_mut().zip(outer).zip(inner) {
            *slot = o - i;
        }
        let rd = map.label(code_from(&radial, |d| d >= 0.0));
        let ci = (gc >= patch_mean) as usize;
        codes.push((ni * labels + rd) * 2 + ci);
    });
    let counts = bin_counts(codes, labels * labels * 2)?;
    Ok(FeatureHistogram::new(DescriptorId::Elbp, normalize_counts(&counts)))
}

/// CLDP: the CLBP joint histogram concatenated with a radial-difference
/// component, each half weighted 1/2, `(P + 2)^2 * 2 + P + 2` bins.
///
/// The D bit is the sign of `(g_{p,R} - g_c) - (g_{p,R-1} - g_c) * R / (R - 1)`.
pub fn cldp_feature(patch: &Patch, p: usize, radius: f64) -> Result<FeatureHistogram> {
    check_params(patch, p, radius)?;
    check_inner_ring(radius)?;
    let map = Riu2Map::shared(p);
    let scale = radius / (radius - 1.0);
    let mut d_codes = Vec::new();
    let mut second = vec![0.0; p];
    for_each_interior(patch, p, radius, Some(radius - 1.0), |_, outer, inner| {
        for ((slot, &o), &i) in second.iter_mut().zip(outer).zip(inner) {
            *slot = o - i * scale;
        }
        d_codes.push(map.label(code_from(&second, |d| d >= 0.0)));
    });
    let clbp = normalize_counts(&clbp_counts(patch, p, radius)?);
    let d = normalize_counts(&bin_counts(d_codes, map.label_count())?);
    Ok(FeatureHistogram::new(DescriptorId::Cldp, concat_equal_weight(&[clbp, d])))
}
