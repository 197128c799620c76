mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::reference_scenario_file;
use zimage::io;

fn zimage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zimage"))
        .args(args)
        .env_remove("ZIMAGE_OUT")
        .env_remove("ZIMAGE_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = zimage(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const CSVS: [&str; 4] = [io::IMAGES_CSV, io::COV_RAW_CSV, io::COV_CORRECTED_CSV, io::COV_SE_CSV];

#[test]
fn simulate_writes_reference_tables() {
    let dir = tempfile::tempdir().unwrap();
    let scene = reference_scenario_file(dir.path(), 0.2);
    let out = dir.path().join("stats");
    ok(&["simulate", p(&scene), "--samples", "1000", "--out", p(&out)]);
    let images = std::fs::read_to_string(out.join(io::IMAGES_CSV)).unwrap();
    let mut lines = images.lines();
    assert_eq!(lines.next(), Some("index,mean,variance,z,mean_se,variance_se,z_se"));
    assert_eq!(lines.count(), 128);
    let cov = io::read_covariance(&out.join(io::COV_CORRECTED_CSV)).unwrap();
    assert_eq!(cov.rows(), &[48, 72, 64, 96]);
    let manifest = io::tables::read_key_values(&out.join(io::MANIFEST)).unwrap();
    assert!(manifest.contains(&("samples".into(), "1000".into())));
    assert!(manifest.contains(&("seed".into(), "20211018".into())));
}

#[test]
fn single_sample_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scene = reference_scenario_file(dir.path(), 0.2);
    let out = zimage(&["simulate", p(&scene), "--samples", "1", "--out", p(&dir.path().join("s"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient samples"));
}

#[test]
fn same_seed_same_bytes_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let scene = reference_scenario_file(dir.path(), -0.2);
    let runs: Vec<_> = [("a", "1"), ("b", "2"), ("c", "8"), ("d", "2")]
        .iter()
        .map(|(name, threads)| {
            let out = dir.path().join(name);
            ok(&[
                "simulate", p(&scene), "--samples", "600", "--seed", "99", "--threads", threads, "--out", p(&out),
            ]);
            out
        })
        .collect();
    for name in CSVS {
        let first = read(&runs[0].join(name));
        for r in &runs[1..] {
            assert_eq!(read(&r.join(name)), first, "{name} differs in {}", r.display());
        }
    }
    let other = dir.path().join("e");
    ok(&["simulate", p(&scene), "--samples", "600", "--seed", "100", "--out", p(&other)]);
    assert_ne!(read(&other.join(io::IMAGES_CSV)), read(&runs[0].join(io::IMAGES_CSV)));
}

#[test]
fn rerunning_the_recorded_scenario_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scene = reference_scenario_file(dir.path(), 0.0);
    let first = dir.path().join("first");
    ok(&["simulate", p(&scene), "--samples", "300", "--seed", "5", "--cov", "full", "--out", p(&first)]);
    let second = dir.path().join("second");
    ok(&["simulate", p(&first.join(io::SCENARIO)), "--out", p(&second)]);
    for name in CSVS {
        assert_eq!(read(&first.join(name)), read(&second.join(name)), "{name}");
    }
}

#[test]
fn environment_overrides_output_dir_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let scene = reference_scenario_file(dir.path(), 0.2);
    let out = dir.path().join("from-env");
    let status = Command::new(env!("CARGO_BIN_EXE_zimage"))
        .args(["simulate", p(&scene), "--samples", "50"])
        .env("ZIMAGE_OUT", &out)
        .env("ZIMAGE_THREADS", "3")
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = io::tables::read_key_values(&out.join(io::MANIFEST)).unwrap();
    assert!(manifest.contains(&("threads".into(), "3".into())));
}

#[test]
fn raw_dump_matches_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let scene = reference_scenario_file(dir.path(), 0.2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let dump = dir.path().join("stack.bin");
    ok(&["simulate", p(&scene), "--samples", "40", "--out", p(&a), "--dump-raw", p(&dump)]);
    ok(&["simulate", p(&scene), "--samples", "40", "--out", p(&b), "--threads", "4"]);
    for name in CSVS {
        assert_eq!(read(&a.join(name)), read(&b.join(name)));
    }
    let images = io::read_raw_stack(&dump).unwrap();
    assert_eq!(images.len(), 40);
    let mean0: f64 = images.iter().map(|im| im.counts[64] as f64).sum::<f64>() / 40.0;
    let stats = io::read_stats_dir(&a).unwrap();
    assert!((stats.images.mean[64] - mean0).abs() < 1e-12);
}

#[test]
fn io_and_config_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    assert_eq!(zimage(&["simulate", p(&missing)]).status.code(), Some(3));
    assert_eq!(zimage(&["forward", p(&missing)]).status.code(), Some(3));
    assert_eq!(
        zimage(&["infer", p(dir.path()), "--slice", "3", "--psf-from", "point:1"]).status.code(),
        Some(3)
    );
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "[object]\nlength = 8\npoint 2 5\n").unwrap();
    let out = zimage(&["simulate", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
    assert_eq!(zimage(&["simulate", p(&bad), "--cov", "sometimes"]).status.code(), Some(2));
    assert_eq!(zimage(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn report_writes_well_formed_svg_and_rejects_mismatched_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let scene = reference_scenario_file(dir.path(), 0.2);
    let (stats, fwd, rep) = (dir.path().join("s"), dir.path().join("f"), dir.path().join("r"));
    ok(&["simulate", p(&scene), "--samples", "400", "--out", p(&stats)]);
    ok(&["forward", p(&scene), "--effective", "--out", p(&fwd)]);
    ok(&["report", p(&stats), "--against", p(&fwd), "--out", p(&rep)]);
    for name in ["mean.svg", "variance_z.svg", "slice_A.svg", "slice_B.svg", "slice_C.svg", "slice_D.svg"] {
        let text = std::fs::read_to_string(rep.join(name)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(doc.descendants().any(|n| n.has_tag_name("polyline")));
    }
    let dev = io::read_image_table(&rep.join("deviations.csv")).unwrap();
    assert_eq!(dev.len(), 128);
    assert_eq!(dev.columns, ["mean", "variance", "z"]);

    let small = dir.path().join("small.txt");
    std::fs::write(&small, "[object]\nlength = 20\nbackground 3 0\n[psf]\nsigma = 1\n").unwrap();
    let small_fwd = dir.path().join("f20");
    ok(&["forward", p(&small), "--out", p(&small_fwd)]);
    let out = zimage(&["report", p(&stats), "--against", p(&small_fwd), "--out", p(&rep)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infer_recovers_noiseless_inputs_exactly() {
    use zimage::run::StackSummary;
    use zimage::{CovarianceMode, StatisticalImages};

    let dir = tempfile::tempdir().unwrap();
    let len = 60;
    let mut flux = vec![8.0; len];
    let mut q = vec![0.25; len];
    flux[15] = 300.0;
    q[15] = 0.4;
    let object = zimage::ObjectModel::new(flux, q).unwrap();
    let psf = zimage::make_gaussian_psf(1.2, 5).unwrap();
    let noise = zimage::NoiseModel::flat(len, 4.0, 0.2).unwrap();
    let e = zimage::ideal_forward(&object, &psf, &noise, &CovarianceMode::Slices(vec![15, 42])).unwrap();
    let stats = dir.path().join("stats");
    io::write_stats_dir(
        &stats,
        &StackSummary {
            images: StatisticalImages {
                n: 0,
                mean: e.mean.clone(),
                variance: e.variance.clone(),
                z: e.z.clone(),
                cov_raw: None,
                cov_corrected: e.covariance.clone(),
            },
            batches: 0,
            mean_se: None,
            variance_se: None,
            z_se: None,
            cov_se: None,
        },
    )
    .unwrap();
    let out = dir.path().join("fit");
    ok(&[
        "infer", p(&stats), "--slice", "42", "--psf-from", "point:15", "--half-width", "5", "--noise-mean", "4",
        "--out", p(&out),
    ]);
    let fit = io::tables::parse_fit_report(&io::tables::read_key_values(&out.join("fit.txt")).unwrap()).unwrap();
    assert!((fit.z_b - 2.0).abs() < 1e-12, "{}", fit.z_b);
    assert!((fit.z_n - 0.8).abs() < 1e-12, "{}", fit.z_n);
    assert!((fit.q_b - 0.25).abs() < 1e-12, "{}", fit.q_b);
    let recovered = io::read_image_table(&out.join("psf.csv")).unwrap();
    for (a, b) in recovered.column("p").unwrap().iter().zip(psf.weights()) {
        assert!((a - b).abs() < 1e-12);
    }

    // A known PSF from file gives the same fit.
    let out2 = dir.path().join("fit2");
    ok(&[
        "infer", p(&stats), "--slice", "42", "--psf-from", p(&out.join("psf.csv")), "--noise-mean", "4", "--out",
        p(&out2),
    ]);
    let fit2 = io::tables::parse_fit_report(&io::tables::read_key_values(&out2.join("fit.txt")).unwrap()).unwrap();
    assert!((fit2.q_b - 0.25).abs() < 1e-12);
}

#[test]
fn shipped_reference_scenario_is_current() {
    let shipped = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/reference.txt")).unwrap();
    assert_eq!(shipped, zimage::io::scenario::reference_scenario_text(0.2));
    let parsed = zimage::io::scenario::parse_scenario(&shipped, "reference.txt").unwrap();
    assert_eq!(parsed, zimage::paper_scenario_with(0.2).unwrap());
}
