use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seistex::attr::Descriptor;
use seistex::classify::{decode_bundle, encode_bundle, SvmParams};
use seistex::eval::{confusion_matrix, metrics};
use seistex::grid::{extract_patch, normalize_section, SectionGrid};
use seistex::histogram::DescriptorId;
use seistex::labels::{ClassSet, LabelGrid};
use seistex::pipeline::{harvest_patches, label_section, train_from_set, ExemplarSet, HarvestParams, LabelParams};
use seistex::segment::{slic_segment, SlicParams};

fn striped(rows: usize, cols: usize, seed: u64) -> SectionGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SectionGrid::from_fn(rows, cols, |r, c| {
        let n: f64 = rng.gen_range(-0.2..0.2);
        if r < rows / 2 {
            ((c as f64) / 2.0).sin() + n
        } else {
            ((r as f64) / 3.0).cos() + n
        }
    })
    .unwrap()
}

fn trained(id: DescriptorId) -> (SectionGrid, seistex::classify::OvaModel, LabelParams) {
    let grid = normalize_section(&striped(72, 96, 1));
    let ex = |r, c| extract_patch(&grid, (r, c), 17).unwrap();
    let set = ExemplarSet::new(ClassSet::Facies, vec![(0, ex(18, 30)), (1, ex(54, 30)), (2, ex(54, 70))]).unwrap();
    let ts = harvest_patches(std::slice::from_ref(&grid), &set, &HarvestParams { per_class: 10, stride: 4 }).unwrap();
    let (model, _) = train_from_set(std::slice::from_ref(&grid), &ts, &Descriptor::new(id), 25.0, &SvmParams::default()).unwrap();
    let params = LabelParams {
        patch_size: 17,
        sigma: 25.0,
        slic: SlicParams {
            region_size: 12,
            ..SlicParams::default()
        },
    };
    (grid, model, params)
}

#[test]
fn labeling_is_deterministic_and_constant_on_superpixels() {
    let (grid, model, params) = trained(DescriptorId::Clbp);
    let d = Descriptor::new(DescriptorId::Clbp);
    let a = label_section(&grid, &model, &d, &params).unwrap();
    let b = label_section(&grid, &model, &d, &params).unwrap();
    assert_eq!(a, b);
    let map = slic_segment(&grid, &params.slic).unwrap();
    let mut seen = vec![None; map.count()];
    for (&s, &l) in map.assignment().iter().zip(a.labels()) {
        let slot = &mut seen[s as usize];
        assert!(slot.is_none_or(|v| v == l), "superpixel {s} carries two labels");
        *slot = Some(l);
    }
}

#[test]
fn bundle_survives_text_roundtrip() {
    let (_, model, _) = trained(DescriptorId::Glcm);
    let text = encode_bundle(&model);
    let back = decode_bundle(&text, std::path::Path::new("m")).unwrap();
    assert_eq!(back, model);
    assert_eq!(encode_bundle(&back), text);
}

#[test]
fn labels_survive_sgrid_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let g = LabelGrid::new(3, 4, vec![0, 1, 2, 3, 3, 2, 1, 0, 0, 0, 1, 1]).unwrap();
    g.write(dir.path().join("l.sgrid")).unwrap();
    assert_eq!(LabelGrid::read(dir.path().join("l.sgrid")).unwrap(), g);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_stay_in_unit_interval(labels in prop::collection::vec((0u8..4, 0u8..4), 1..300)) {
        let n = labels.len();
        let pred = LabelGrid::new(1, n, labels.iter().map(|p| p.0).collect()).unwrap();
        let truth = LabelGrid::new(1, n, labels.iter().map(|p| p.1).collect()).unwrap();
        let cm = confusion_matrix(&pred, &truth, 4).unwrap();
        let r = metrics(&cm).unwrap();
        for v in [r.pa, r.mca, r.miu, r.fwiu] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(cm.is_diagonal(), r.pa == 1.0);
        if cm.is_diagonal() {
            prop_assert_eq!((r.mca, r.miu, r.fwiu), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn superpixels_partition_any_grid(seed in any::<u64>(), rows in 16usize..60, cols in 16usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = SectionGrid::from_fn(rows, cols, |_, _| rng.gen()).unwrap();
        let map = slic_segment(&grid, &SlicParams { region_size: 8, ..SlicParams::default() }).unwrap();
        prop_assert_eq!(map.sizes().iter().sum::<usize>(), rows * cols);
        prop_assert!(map.sizes().iter().all(|&s| s > 0));
        prop_assert!(seistex::segment::is_four_connected(&map));
    }
}
