use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use naada::io::read_unit;
use tempfile::TempDir;

fn naada(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_naada"))
        .current_dir(dir)
        .args(args)
        .args(["-q"])
        .output()
        .expect("spawn naada")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = naada(dir, args);
    assert!(
        out.status.success(),
        "naada {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    naada(dir, args).status.code().expect("exit code")
}

/// A temp dir with `count` small phantoms in `src/`.
fn corpus(count: usize) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "phantom",
            "--count",
            &count.to_string(),
            "--height",
            "48",
            "--width",
            "80",
            "--out",
            "src",
            "--seed",
            "3",
        ],
    );
    dir
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

const TOY: [&str; 4] = ["--width-mult", "1/16", "--patch", "32"];

#[test]
fn noise_is_byte_identical_for_a_seed() {
    let d = corpus(3);
    ok(d.path(), &["noise", "src", "--seed", "7", "--out", "a"]);
    ok(d.path(), &["noise", "src", "--seed", "7", "--out", "b"]);
    ok(d.path(), &["noise", "src", "--seed", "8", "--out", "c"]);
    let (a, b, c) = (
        files(&d.path().join("a/noisy")),
        files(&d.path().join("b/noisy")),
        files(&d.path().join("c/noisy")),
    );
    assert_eq!(a.len(), 6);
    let mut differs = false;
    for ((x, y), z) in a.iter().zip(&b).zip(&c) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        differs |= fs::read(x).unwrap() != fs::read(z).unwrap();
    }
    assert!(differs);
    assert_eq!(lines(&d.path().join("a/noise_summary.csv")).len(), 4);
}

#[test]
fn snapshot_reproduces_a_run() {
    let d = corpus(2);
    ok(
        d.path(),
        &[
            "noise",
            "src",
            "--seed",
            "5",
            "--sigma-g",
            "0.1",
            "--set",
            "sigma_s=0.2",
            "--out",
            "a",
        ],
    );
    let snap = d.path().join("a/config.resolved");
    let text = fs::read_to_string(&snap).unwrap();
    assert!(text.starts_with("# "));
    assert!(text.contains("sigma_g = 0.1\n") && text.contains("sigma_s = 0.2\n") && text.contains("seed = 5\n"));
    ok(
        d.path(),
        &["noise", "src", "--config", "a/config.resolved", "--out", "b"],
    );
    for (x, y) in files(&d.path().join("a/noisy"))
        .iter()
        .zip(files(&d.path().join("b/noisy")))
    {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    let listing = lines(&d.path().join("a/MANIFEST"));
    assert!(listing.contains(&"noisy/phantom_000.png".to_string()));
    assert!(listing.contains(&"noisy/phantom_001.log".to_string()));
    assert!(listing.contains(&"config.resolved".to_string()));
    for f in &listing {
        assert!(d.path().join("a").join(f).is_file(), "{f}");
    }
}

#[test]
fn flag_and_override_precedence() {
    let d = corpus(1);
    fs::write(d.path().join("cfg"), "seed = 1\nsp_fraction = 0.2\nsigma_s = 0.3\n").unwrap();
    ok(
        d.path(),
        &[
            "noise",
            "src",
            "--config",
            "cfg",
            "--sp-fraction",
            "0.1",
            "--set",
            "sp_fraction=0.01",
            "--out",
            "a",
        ],
    );
    let snap = fs::read_to_string(d.path().join("a/config.resolved")).unwrap();
    assert!(snap.contains("sp_fraction = 0.01\n") && snap.contains("sigma_s = 0.3\n") && snap.contains("seed = 1\n"));
}

#[test]
fn zero_impulse_fraction_leaves_no_impulses() {
    let d = corpus(2);
    let only_impulse = ["--set", "stages=impulse"];
    ok(
        d.path(),
        &[
            &["noise", "src", "--sp-fraction", "0", "--out", "zero"][..],
            &only_impulse,
        ]
        .concat(),
    );
    ok(
        d.path(),
        &[
            &["noise", "src", "--sp-fraction", "0.05", "--out", "five"][..],
            &only_impulse,
        ]
        .concat(),
    );
    for name in ["phantom_000", "phantom_001"] {
        let clean = read_unit(&d.path().join(format!("src/{name}.png"))).unwrap();
        let zero = read_unit(&d.path().join(format!("zero/noisy/{name}.png"))).unwrap();
        let five = read_unit(&d.path().join(format!("five/noisy/{name}.png"))).unwrap();
        let changed = |img: &naada_core::GrayImage| {
            img.values()
                .iter()
                .zip(clean.values())
                .filter(|(a, b)| (*a - *b).abs() > 1e-6)
                .count()
        };
        assert_eq!(changed(&zero), 0);
        let sites = (0.05 * clean.len() as f64).round() as usize;
        assert!(changed(&five) <= sites && changed(&five) > sites / 2);
        assert!(five
            .values()
            .iter()
            .zip(clean.values())
            .all(|(a, b)| a == b || *a == 0.0 || *a == 1.0));
        let log = fs::read_to_string(d.path().join(format!("five/noisy/{name}.log"))).unwrap();
        assert!(log.contains(&format!("impulse_sites = {sites}\n")), "{log}");
    }
}

#[test]
fn dataset_splits_mirrors_and_skips_unreadable() {
    let d = corpus(10);
    fs::write(d.path().join("src/broken.png"), b"not a png").unwrap();
    let out = naada(d.path(), &["build-dataset", "src", "--seed", "4", "--out", "ds"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping"));
    ok(d.path(), &["build-dataset", "src", "--seed", "4", "--out", "ds2"]);

    let m = naada::manifest::read(&d.path().join("ds/manifest.txt")).unwrap();
    assert_eq!(m.len(), 20);
    for pair in m.chunks(2) {
        assert_eq!(pair[0].path, pair[1].path);
        assert_eq!(pair[0].split, pair[1].split);
        assert!(!pair[0].mirror && pair[1].mirror);
        assert!(pair.iter().all(|r| r.sigma_g.is_some()));
    }
    let count = |s: &str| m.iter().filter(|r| r.split.name() == s).count();
    assert_eq!((count("train"), count("val"), count("test")), (14, 4, 2));

    assert_eq!(
        fs::read(d.path().join("ds/manifest.txt")).unwrap(),
        fs::read(d.path().join("ds2/manifest.txt")).unwrap()
    );
    for (x, y) in files(&d.path().join("ds/noisy"))
        .iter()
        .zip(files(&d.path().join("ds2/noisy")))
    {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    let clean = read_unit(&d.path().join("ds/clean/phantom_004.png")).unwrap();
    let mirror = read_unit(&d.path().join("ds/clean/phantom_004_m.png")).unwrap();
    assert_eq!(clean.mirrored(), mirror);
    let src = read_unit(&d.path().join("src/phantom_004.png")).unwrap();
    assert!(clean
        .values()
        .iter()
        .zip(src.values())
        .all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn train_denoise_eval_round_trip() {
    let d = corpus(4);
    ok(d.path(), &["build-dataset", "src", "--seed", "1", "--out", "ds"]);
    let stdout = ok(
        d.path(),
        &[
            &[
                "train",
                "--manifest",
                "ds/manifest.txt",
                "--epochs",
                "2",
                "--out",
                "run",
            ][..],
            &TOY,
        ]
        .concat(),
    );
    assert!(stdout.contains("best epoch"));
    let history = lines(&d.path().join("run/history.csv"));
    assert_eq!(history[0], "epoch,train_loss,val_loss,train_psnr,val_psnr");
    assert_eq!(history.len(), 3);

    ok(
        d.path(),
        &["denoise", "--checkpoint", "run/checkpoint.ckpt", "src", "--out", "den"],
    );
    ok(
        d.path(),
        &[
            "denoise",
            "--checkpoint",
            "run/checkpoint.ckpt",
            "src/phantom_002.png",
            "--out",
            "den2",
        ],
    );
    let a = fs::read(d.path().join("den/denoised/phantom_002.png")).unwrap();
    assert_eq!(a, fs::read(d.path().join("den2/denoised/phantom_002.png")).unwrap());
    let den = read_unit(&d.path().join("den/denoised/phantom_002.png")).unwrap();
    assert_eq!((den.height(), den.width()), (48, 80));
    assert!(den.values().iter().all(|v| (0.0..=1.0).contains(v)));
    let snap = fs::read_to_string(d.path().join("den/config.resolved")).unwrap();
    assert!(snap.contains("patch = 32\n"), "network spec comes from the checkpoint");

    let stdout = ok(d.path(), &["eval", "src", "den/denoised", "--out", "ev"]);
    assert!(stdout.contains(" ± "));
    assert_eq!(lines(&d.path().join("ev/per_image.csv")).len(), 5);
    let agg = lines(&d.path().join("ev/aggregate.csv"));
    assert_eq!(agg.len(), 2);
    assert!(agg[1].starts_with("naada,4,"));
}

#[test]
fn synthetic_training_and_inspection() {
    let d = corpus(1);
    ok(
        d.path(),
        &[
            &[
                "train",
                "--synthetic",
                "10",
                "--epochs",
                "1",
                "--out",
                "run",
                "--mode",
                "ada",
            ][..],
            &TOY,
        ]
        .concat(),
    );
    ok(
        d.path(),
        &[
            "noise-map",
            "src/phantom_000.png",
            "--checkpoint",
            "run/checkpoint.ckpt",
            "--out",
            "nm",
        ],
    );
    let map = read_unit(&d.path().join("nm/noise_map.png")).unwrap();
    assert_eq!((map.height(), map.width()), (8, 8));
    assert_eq!(lines(&d.path().join("nm/noise_map.csv")).len(), 8);

    ok(
        d.path(),
        &[
            &[
                "attention-dump",
                "src/phantom_000.png",
                "--row",
                "0",
                "--col",
                "0",
                "--out",
                "ad",
            ][..],
            &TOY,
        ]
        .concat(),
    );
    for k in 0..8 {
        let rows = lines(&d.path().join(format!("ad/attention/head{k}_weights.csv")));
        assert_eq!(rows.len(), 64);
        for row in &rows {
            let v: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(v.len(), 64);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(d
            .path()
            .join(format!("ad/attention/head{k}_noise_scores.csv"))
            .is_file());
    }
    ok(
        d.path(),
        &[
            "attention-dump",
            "src/phantom_000.png",
            "--checkpoint",
            "run/checkpoint.ckpt",
            "--out",
            "ad2",
        ],
    );
    assert!(!d.path().join("ad2/attention/head0_noise_scores.csv").exists());
}

#[test]
fn eval_of_identical_dirs() {
    let d = corpus(3);
    let stdout = ok(d.path(), &["eval", "src", "src", "--out", "ev", "--method", "same"]);
    assert!(stdout.contains("100.00 ± 0.00"));
    let rows = lines(&d.path().join("ev/per_image.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows[1..] {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!((f[0], f[2], f[3]), ("same", "100.000000", "1.000000"));
    }
}

#[test]
fn full_size_summary() {
    let d = tempfile::tempdir().unwrap();
    let stdout = ok(d.path(), &["summary", "--out", "s"]);
    assert!(stdout.contains("[1, 1024, 32, 32]"));
    assert!(stdout.lines().last().unwrap().ends_with("20200194"));
    assert_eq!(fs::read_to_string(d.path().join("s/summary.txt")).unwrap(), stdout);
    let ada = ok(d.path(), &["summary", "--mode", "ada", "--out", "s2"]);
    assert!(!ada.contains("noise_q"));
}

#[test]
fn exit_codes() {
    let d = corpus(2);
    assert_eq!(code(d.path(), &["--help"]), 0);
    assert_eq!(code(d.path(), &["frobnicate"]), 1);
    assert_eq!(code(d.path(), &["noise", "src", "--set", "colour=blue"]), 1);
    assert_eq!(code(d.path(), &["noise", "src", "--mode", "fast"]), 1);
    assert_eq!(code(d.path(), &["noise", "src", "--sp-fraction", "1.5"]), 1);
    assert_eq!(code(d.path(), &["noise", "src", "--config", "missing.cfg"]), 1);
    assert_eq!(code(d.path(), &["noise", "nowhere"]), 2);
    assert_eq!(
        code(d.path(), &["denoise", "--checkpoint", "src/phantom_000.png", "src"]),
        2
    );
    assert_eq!(code(d.path(), &["eval", "src", "nowhere"]), 2);
    let diverge = [
        &["train", "--synthetic", "6", "--epochs", "2", "--lr", "1e306"][..],
        &TOY,
    ]
    .concat();
    let out = naada(d.path(), &diverge);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}
