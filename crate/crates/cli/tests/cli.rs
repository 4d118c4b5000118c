use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use atrt_cli::io::{parse_sinogram_csv, read_image_csv};
use atrt_core::phantom::{default_detector_count, make_geometry, make_phantom, PhantomSpec};
use atrt_core::solver::multibang_proportion;
use atrt_core::{forward, AdmissibleSet, PixelGrid};

fn atrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atrt")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn summary_value(dir: &Path, key: &str) -> Option<f64> {
    let text = fs::read_to_string(dir.join("summary.csv")).unwrap();
    text.lines().find_map(|l| {
        let (k, v) = l.split_once(',')?;
        (k == key).then(|| v.parse().unwrap())
    })
}

#[test]
fn phantom_writes_images_deterministically() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "[phantom]\nname = \"nested_disks\"\n");
    let (o1, o2) = (t.path().join("a"), t.path().join("b"));
    for out in [&o1, &o2] {
        let o = atrt(&["phantom", "--config", &cfg, "--grid", "64", "--seed", "9", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["a.csv", "f.csv", "a.pgm", "f.pgm", "spec.toml", "manifest.toml"] {
        let (x, y) = (fs::read(o1.join(name)).unwrap(), fs::read(o2.join(name)).unwrap());
        if name != "manifest.toml" {
            assert_eq!(x, y, "{name} differs");
        }
    }
    let a = read_image_csv(&o1.join("a.csv"), 2.0).unwrap();
    assert_eq!(a.grid().size(), 64);
    let manifest = fs::read_to_string(o1.join("manifest.toml")).unwrap();
    assert!(manifest.contains("master = 9"));
    assert!(manifest.contains("nested_disks"));
}

#[test]
fn usage_errors_exit_with_2() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(t.path(), "[phantom]\nname = \"walnut\"\n");
    assert_eq!(code(&atrt(&["phantom", "--config", &cfg])), 2);
    assert_eq!(code(&atrt(&["transmogrify"])), 2);
    assert_eq!(code(&atrt(&["phantom", "--grid", "many"])), 2);
}

#[test]
fn validation_errors_exit_with_3() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("o");
    let out = out.to_str().unwrap();
    let cfg = write_config(t.path(), "colour = \"blue\"\n");
    assert_eq!(code(&atrt(&["phantom", "--config", &cfg, "--out", out])), 3);
    let cfg = write_config(t.path(), "[forward]\na = \"missing.csv\"\nf = \"missing.csv\"\n");
    assert_eq!(code(&atrt(&["forward", "--config", &cfg, "--out", out])), 3);
    let cfg = write_config(t.path(), "[solver]\nalpha = 0.2\nstep = 5.0\n");
    assert_eq!(code(&atrt(&["recon", "--config", &cfg, "--out", out])), 3);
}

#[test]
fn forward_matches_library_and_rejects_mismatched_inputs() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("d");
    let o = atrt(&["forward", "--grid", "32", "--projections", "6", "--seed", "4", "--noise", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = parse_sinogram_csv(&fs::read_to_string(out.join("sinogram.csv")).unwrap()).unwrap();
    let grid = PixelGrid::spanning(32, 2.0).unwrap();
    let (a, f) = make_phantom(&PhantomSpec::named("binary_shapes").unwrap(), grid).unwrap();
    let geo = make_geometry(6, default_detector_count(&grid), &grid, 4).unwrap();
    assert_eq!(d, forward(&a, &f, &geo).unwrap());

    // Noisy data are reproducible for a fixed seed.
    let n1 = t.path().join("n1");
    let n2 = t.path().join("n2");
    for n in [&n1, &n2] {
        let o = atrt(&["forward", "--grid", "16", "--noise", "0.05", "--seed", "2", "--out", n.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(n1.join("sinogram.csv")).unwrap(), fs::read(n2.join("sinogram.csv")).unwrap());

    let p8 = t.path().join("p8");
    let p9 = t.path().join("p9");
    atrt(&["phantom", "--grid", "8", "--out", p8.to_str().unwrap()]);
    atrt(&["phantom", "--grid", "9", "--out", p9.to_str().unwrap()]);
    let cfg = write_config(t.path(), "[forward]\na = \"p8/a.csv\"\nf = \"p9/f.csv\"\n");
    let o = atrt(&["forward", "--config", &cfg, "--out", t.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn recon_writes_consistent_artifacts() {
    let t = tempfile::tempdir().unwrap();
    let cfg = write_config(
        t.path(),
        "seed = 5\n[recon]\ngrid = 16\ndata_grid = 24\n[geometry]\nprojections = 6\n\
         [solver]\nalpha = 0.01\nstep = 10.0\nlambda = 0.001\neta = 0.001\nmax_outer = 3\n",
    );
    let out = t.path().join("r");
    let o = atrt(&["recon", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["a.csv", "f.csv", "a.pgm", "f.pgm", "history.csv", "summary.csv", "confusion.csv", "manifest.toml"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let a = read_image_csv(&out.join("a.csv"), 2.0).unwrap();
    let set = AdmissibleSet::new(vec![0.0, 1.0]).unwrap();
    assert_eq!(summary_value(&out, "mb_proportion"), Some(multibang_proportion(&a, &set, 1e-6)));
    assert!(summary_value(&out, "misclassification").is_some());
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);
    let confusion = fs::read_to_string(out.join("confusion.csv")).unwrap();
    let total: usize = confusion.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 256);

    // Feeding the written data back with an explicit ground truth.
    let fwd = t.path().join("fwd");
    atrt(&["forward", "--grid", "16", "--projections", "6", "--out", fwd.to_str().unwrap()]);
    let ph = t.path().join("ph");
    atrt(&["phantom", "--grid", "16", "--out", ph.to_str().unwrap()]);
    let cfg = write_config(
        t.path(),
        "[recon]\ngrid = 16\ndata = \"fwd/sinogram.csv\"\ntruth = \"ph/a.csv\"\n\
         [solver]\nalpha = 0.01\nstep = 10.0\nmax_outer = 2\n",
    );
    let out2 = t.path().join("r2");
    let o = atrt(&["recon", "--config", &cfg, "--out", out2.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out2.join("confusion.csv").is_file());
}

#[test]
fn singscan_reports_order_and_jump_ratio() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("s");
    let o = atrt(&["singscan", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("check,measured,predicted,ratio,pass"));
    let mut seen = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 5);
        match f[0] {
            "tangent_exponent" => {
                let p: f64 = f[1].parse().unwrap();
                assert!((-0.55..=-0.45).contains(&p));
                seen += 1;
            }
            c if c.starts_with("corner_jump") => {
                let r: f64 = f[3].parse().unwrap();
                assert!((0.98..=1.02).contains(&r));
                seen += 1;
            }
            _ => {}
        }
    }
    assert!(seen >= 2);
    let scan = fs::read_to_string(out.join("tangent_scan.csv")).unwrap();
    assert!(scan.starts_with("offset,value\n"));
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS") || l.starts_with("FAIL")));
    assert!(fs::read_to_string(out.join("boundaries.csv")).unwrap().starts_with("set_index,x,y\n"));
}

#[test]
fn verify_passes() {
    let t = tempfile::tempdir().unwrap();
    let o = atrt(&["verify", "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).lines().all(|l| l.starts_with("PASS")));
}
