//! Determinism acceptance: identical seeds must yield byte-identical
//! numerical outputs, across repeated invocations and across worker counts.
//! Verdict lines print with `--nocapture`, mirroring the core suite.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

fn krausopt(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_krausopt"))
        .args(args)
        .status()
        .expect("spawn krausopt");
    assert!(status.success(), "krausopt {args:?} exited with {status}");
}

/// All numerical output files under `dir`, keyed by path relative to it.
/// Manifests (wall-clock timestamps) and config echoes (worker count) are
/// administrative, not numerical, and are excluded.
fn numeric_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> =
            std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(root, &path, out);
            } else if matches!(
                path.file_name().and_then(|n| n.to_str()),
                Some("report.json" | "trace.csv" | "model.json" | "grid.csv" | "summary.csv")
            ) {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn verdict(part: &str, ok: bool, detail: &str) -> bool {
    println!("criterion {part}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn identical(a: &Path, b: &Path) -> (bool, usize) {
    let (fa, fb) = (numeric_files(a), numeric_files(b));
    let same = !fa.is_empty() && fa == fb;
    (same, fa.len())
}

#[test]
fn criterion_11_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let mut ok = true;

    // Tomography ensemble: one worker vs two, then a repeat of the two-worker
    // invocation.
    let tomo = |out: &str, workers: &str| {
        krausopt(&[
            "tomo", "--qubits", "1", "--target-rank", "2", "--model-kraus", "4", "--shots",
            "2000", "--epochs", "300", "--runs", "4", "--seed", "9", "--workers", workers,
            "--out", out,
        ]);
    };
    let (a, b, c) = (dir("tomo_w1"), dir("tomo_w2"), dir("tomo_w2_again"));
    tomo(&a, "1");
    tomo(&b, "2");
    tomo(&c, "2");
    let (same_workers, n) = identical(Path::new(&a), Path::new(&b));
    ok &= verdict(
        "11 tomo workers",
        same_workers,
        &format!("{n} numerical files byte-identical across --workers 1 vs 2"),
    );
    let (same_repeat, n) = identical(Path::new(&b), Path::new(&c));
    ok &= verdict(
        "11 tomo repeat",
        same_repeat,
        &format!("{n} numerical files byte-identical across repeated runs"),
    );

    // Grid search exercises the per-γ parallel map.
    let grid = |out: &str, workers: &str| {
        krausopt(&[
            "grid-search", "--qubits", "1", "--target-rank", "2", "--model-kraus", "4",
            "--shots", "1000", "--grid-gammas", "0,0.001,0.01", "--epochs", "100", "--runs",
            "1", "--seed", "3", "--workers", workers, "--out", out,
        ]);
    };
    let (ga, gb) = (dir("grid_w1"), dir("grid_w2"));
    grid(&ga, "1");
    grid(&gb, "2");
    let (same_grid, n) = identical(Path::new(&ga), Path::new(&gb));
    ok &= verdict(
        "11 grid workers",
        same_grid,
        &format!("{n} numerical files byte-identical across --workers 1 vs 2"),
    );

    // Classification ensemble over splits.
    let classify = |out: &str, workers: &str| {
        krausopt(&[
            "classify", "--dataset", "iris", "--splits", "3", "--epochs", "80", "--seed",
            "5", "--workers", workers, "--out", out,
        ]);
    };
    let (ca, cb) = (dir("cls_w1"), dir("cls_w2"));
    classify(&ca, "1");
    classify(&cb, "2");
    let (same_cls, n) = identical(Path::new(&ca), Path::new(&cb));
    ok &= verdict(
        "11 classify workers",
        same_cls,
        &format!("{n} numerical files byte-identical across --workers 1 vs 2"),
    );

    assert!(ok, "criterion 11 failed");
}
