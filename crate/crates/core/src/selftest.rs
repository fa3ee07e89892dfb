//! Data-free invariant checks shipped with the binary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attr::glcm::{glcm_feature, DEFAULT_OFFSETS};
use crate::attr::lbp::{lbp_code, riu2, NeighborRing, Riu2Map};
use crate::attr::lri::lri_a_code_from;
use crate::attr::semblance::semblance;
use crate::attr::Descriptor;
use crate::classify::{train_binary_svm, SvmParams};
use crate::error::Result;
use crate::eval::{metrics, ConfusionMatrix};
use crate::grid::{decode_sgrid, encode_sgrid, Patch, SectionGrid};
use crate::histogram::DescriptorId;
use crate::segment::{is_four_connected, slic_segment, SlicParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&mut ChaCha8Rng) -> Result<std::result::Result<(), String>>;

const CHECKS: [(&str, Check); 10] = [
    ("riu2 label counts", riu2_counts),
    ("riu2 rotation invariance", rotation_invariance),
    ("histogram shift invariance", shift_invariance),
    ("glcm constant patch", glcm_constant),
    ("metric worked example", metric_example),
    ("lri-a worked codes", lri_codes),
    ("semblance bounds", semblance_bounds),
    ("slic partition", slic_partition),
    ("svm separable set", svm_separable),
    ("sgrid roundtrip", sgrid_roundtrip),
];

/// Run every check with a fixed seed.
pub fn run_all() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57);
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let (passed, detail) = match check(&mut rng) {
                Ok(Ok(())) => (true, String::new()),
                Ok(Err(msg)) => (false, msg),
                Err(e) => (false, e.to_string()),
            };
            CheckResult { name, passed, detail }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn riu2_counts(_: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let ri: std::collections::HashSet<u32> = (0..256u32)
        .map(|c| (0..8).map(|s| ((c >> s) | (c << (8 - s))) & 0xff).min().unwrap())
        .collect();
    let (a, b) = (Riu2Map::new(8).label_count(), Riu2Map::new(16).label_count());
    Ok(ensure(ri.len() == 36 && a == 10 && b == 18, || {
        format!("ri={} riu2(8)={a} riu2(16)={b}", ri.len())
    }))
}

fn rotation_invariance(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    for _ in 0..2000 {
        let p = [8, 16, 24][rng.gen_range(0..3)];
        let samples: Vec<f64> = (0..p).map(|_| rng.gen()).collect();
        let center = rng.gen();
        let base = riu2(lbp_code(&NeighborRing { radius: 1.0, samples: samples.clone(), center }), p);
        for s in 1..p {
            let mut rotated = samples.clone();
            rotated.rotate_left(s);
            let r = riu2(lbp_code(&NeighborRing { radius: 1.0, samples: rotated, center }), p);
            if r != base {
                return Ok(Err(format!("P={p} shift {s}: {base} vs {r}")));
            }
        }
    }
    Ok(Ok(()))
}

fn random_patch(rng: &mut ChaCha8Rng, n: usize) -> Result<Patch> {
    Patch::from_values(n, (0..n * n).map(|_| rng.gen::<f64>()).collect())
}

fn shift_invariance(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let ids = [DescriptorId::Lbp, DescriptorId::Clbp, DescriptorId::Elbp, DescriptorId::Cldp, DescriptorId::Lri];
    for _ in 0..20 {
        let p = random_patch(rng, 33)?;
        let q = p.map(|v| v + 0.375);
        for id in ids {
            let d = Descriptor::new(id);
            if d.featurize(&p)?.bins != d.featurize(&q)?.bins {
                return Ok(Err(format!("{id} changed under a constant shift")));
            }
        }
    }
    Ok(Ok(()))
}

fn glcm_constant(_: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let p = Patch::from_values(9, vec![0.4; 81])?;
    let f = glcm_feature(&p, 64, &DEFAULT_OFFSETS)?;
    let ok = f.bins.chunks(6).all(|a| a == [0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    Ok(ensure(ok, || format!("{:?}", &f.bins[..6])))
}

fn metric_example(_: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let r = metrics(&ConfusionMatrix::from_counts(2, vec![3, 1, 0, 4])?)?;
    Ok(ensure((r.pa, r.mca, r.miu, r.fwiu) == (0.875, 0.875, 0.775, 0.775), || format!("{r:?}")))
}

fn lri_codes(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let cases = [
        (lri_a_code_from(5.0, &[5.0, 5.0, 5.0], 0.5, 3), 0),
        (lri_a_code_from(0.0, &[5.0, 5.0, 0.5], 1.0, 3), 2),
        (lri_a_code_from(0.0, &[-5.0, -5.0, -5.0], 1.0, 3), -3),
    ];
    if let Some((got, want)) = cases.iter().find(|(g, w)| g != w) {
        return Ok(Err(format!("got {got}, want {want}")));
    }
    for _ in 0..1000 {
        let x: f64 = rng.gen_range(-1.0..1.0);
        let nb: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = nb.iter().map(|v| -v).collect();
        if lri_a_code_from(x, &nb, 0.2, 3) != -lri_a_code_from(-x, &neg, 0.2, 3) {
            return Ok(Err("negation antisymmetry broken".into()));
        }
    }
    Ok(Ok(()))
}

fn semblance_bounds(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    for _ in 0..2000 {
        let w: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let refs: Vec<&[f64]> = w.iter().map(Vec::as_slice).collect();
        let s = semblance(&refs);
        if !(0.0..=1.0 + 1e-12).contains(&s) {
            return Ok(Err(format!("semblance {s} out of range")));
        }
    }
    let t = [0.3, -0.7, 1.1];
    let same = semblance(&[&t, &t, &t]);
    let single = semblance(&[&t, &[0.0; 3], &[0.0; 3]]);
    Ok(ensure((same - 1.0).abs() < 1e-12 && (single - 1.0 / 3.0).abs() < 1e-12, || {
        format!("identical {same}, single {single}")
    }))
}

fn slic_partition(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let params = SlicParams {
        region_size: 12,
        ..SlicParams::default()
    };
    for _ in 0..5 {
        let g = SectionGrid::from_fn(64, 64, |_, _| rng.gen())?;
        let map = slic_segment(&g, &params)?;
        let sizes = map.sizes();
        if sizes.iter().sum::<usize>() != 64 * 64 || sizes.contains(&0) || !is_four_connected(&map) {
            return Ok(Err("superpixels do not form a connected partition".into()));
        }
    }
    Ok(Ok(()))
}

fn svm_separable(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let dim = 18;
    let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    while xs.len() < 200 {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.1;
        if s.abs() > 0.1 {
            ys.push(if s > 0.0 { 1 } else { -1 });
            xs.push(x);
        }
    }
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let (model, report) = train_binary_svm(&refs, &ys, &SvmParams::default())?;
    let wrong = refs.iter().zip(&ys).filter(|(x, &y)| model.score(x) * y as f64 <= 0.0).count();
    let monotone = report.objective.windows(2).all(|p| p[1] <= p[0] + 1e-9 * p[0].abs().max(1.0));
    Ok(ensure(wrong == 0 && monotone, || format!("{wrong} misclassified, monotone={monotone}")))
}

fn sgrid_roundtrip(rng: &mut ChaCha8Rng) -> Result<std::result::Result<(), String>> {
    let g = SectionGrid::from_fn(7, 5, |_, _| rng.gen::<f32>() as f64)?;
    let back = decode_sgrid(&encode_sgrid(&g), std::path::Path::new("<memory>"))?;
    Ok(ensure(back == g, || "values changed".into()))
}
