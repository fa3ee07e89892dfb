use std::path::Path;
use std::process::{Command, Output};

use seistex::grid::{write_sgrid, SectionGrid};
use seistex::labels::LabelGrid;

fn seistex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seistex"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Flat, checkerboard and striped thirds.
fn bands(rows: usize, cols: usize) -> SectionGrid {
    SectionGrid::from_fn(rows, cols, |r, c| {
        if c < cols / 3 {
            0.2
        } else if c < 2 * cols / 3 {
            if ((r / 2) + (c / 2)) % 2 == 0 { 1.0 } else { -1.0 }
        } else if (r / 3) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
    .unwrap()
}

const CONFIG: &str = "\
descriptor = lbp
classes = facies
patch_size = 15
stride = 5
per_class = 12
slic_region_size = 10
sections = train.sgrid
exemplars = hst:0:30:25, lst:0:30:75, tst:0:30:125
model = model.ova
";

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_sgrid(dir.path().join("train.sgrid"), &bands(60, 150)).unwrap();
    write_sgrid(dir.path().join("s.sgrid"), &bands(45, 90)).unwrap();
    std::fs::write(dir.path().join("c.cfg"), CONFIG).unwrap();
    dir
}

#[test]
fn train_then_label_writes_grid_and_image() {
    let dir = workspace();
    let p = dir.path();
    let out = seistex(p, &["train", "--config", "c.cfg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = std::fs::read(p.join("model.ova")).unwrap();

    let out = seistex(p, &["train", "--config", "c.cfg", "--workers", "1"]);
    assert!(out.status.success());
    assert_eq!(model, std::fs::read(p.join("model.ova")).unwrap());

    let out = seistex(p, &["label", "--config", "c.cfg", "--section", "s.sgrid"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let labels = LabelGrid::read(p.join("s.labels.sgrid")).unwrap();
    assert_eq!((labels.rows(), labels.cols()), (45, 90));
    let ppm = std::fs::read(p.join("s.labels.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n90 45\n255\n"));

    let before = std::fs::read(p.join("s.labels.sgrid")).unwrap();
    assert!(seistex(p, &["label", "--config", "c.cfg", "--section", "s.sgrid"]).status.success());
    assert_eq!(before, std::fs::read(p.join("s.labels.sgrid")).unwrap());
}

#[test]
fn harvest_writes_manifest() {
    let dir = workspace();
    let out = seistex(dir.path(), &["harvest", "--config", "c.cfg", "--out", "h.txt"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("h.txt")).unwrap();
    assert!(text.starts_with("HARVEST 1 facies 15 "));
}

#[test]
fn evaluate_identical_grids_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let g = LabelGrid::new(2, 3, vec![0, 1, 2, 3, 1, 0]).unwrap();
    g.write(dir.path().join("a.sgrid")).unwrap();
    let out = seistex(dir.path(), &["evaluate", "--pred", "a.sgrid", "--truth", "a.sgrid"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "pa = 1.0000\nmca = 1.0000\nmiu = 1.0000\nfwiu = 1.0000\n"
    );
}

#[test]
fn render_uses_the_palette() {
    let dir = tempfile::tempdir().unwrap();
    LabelGrid::new(1, 1, vec![2]).unwrap().write(dir.path().join("l.sgrid")).unwrap();
    let out = seistex(dir.path(), &["render", "--labels", "l.sgrid", "--out", "l.ppm"]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(dir.path().join("l.ppm")).unwrap(), b"P6\n1 1\n255\n\xff\x00\x00");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(seistex(p, &["bogus"]).status.code(), Some(2));
    assert_eq!(seistex(p, &["train", "--config", "missing.cfg"]).status.code(), Some(2));
    let out = seistex(p, &["train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    std::fs::write(p.join("bad.cfg"), "colour = red\n").unwrap();
    assert_eq!(seistex(p, &["train", "--config", "bad.cfg"]).status.code(), Some(2));
    // a runtime failure: the label grid is unreadable
    std::fs::write(p.join("junk.sgrid"), b"not a grid").unwrap();
    assert_eq!(seistex(p, &["render", "--labels", "junk.sgrid"]).status.code(), Some(1));
}

#[test]
fn missing_exemplar_leaves_no_model() {
    let dir = workspace();
    let p = dir.path();
    let cfg = CONFIG.replace("tst:0:30:125", "tst:gone.sgrid");
    std::fs::write(p.join("c.cfg"), cfg).unwrap();
    assert_eq!(seistex(p, &["train", "--config", "c.cfg"]).status.code(), Some(2));
    assert!(!p.join("model.ova").exists());
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = seistex(dir.path(), &["selftest"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")));
}
