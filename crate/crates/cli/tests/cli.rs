use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warpframe"))
        .current_dir(dir)
        .env_remove("WARPFRAME_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn warp_info_gabor_reports_unit_weight() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["warp-info", "--preset", "gabor:2", "--out", "info.json"]);
    assert_eq!(code(&o), 0);
    let v = read_json(&dir.path().join("info.json"));
    assert_eq!(v["d"], 2);
    for p in v["probes"].as_array().unwrap() {
        assert_eq!(p["w"].as_f64().unwrap(), 1.0);
    }
}

#[test]
fn warp_info_wavelet_weight_is_exponential_beyond_the_transition() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["warp-info", "--preset", "wavelet1d", "--out", "info.json"]);
    assert_eq!(code(&o), 0);
    let v = read_json(&dir.path().join("info.json"));
    let mut seen = 0;
    for p in v["probes"].as_array().unwrap() {
        let t = p["tau"][0].as_f64().unwrap();
        let w = p["w"].as_f64().unwrap();
        assert!(p["roundtrip_residual"].as_f64().unwrap() < 1e-10);
        if t.abs() >= 2.0 {
            assert!((w - t.abs().exp()).abs() <= 1e-10 * w, "w({t}) = {w}");
            seen += 1;
        }
    }
    assert_eq!(seen, 4);
}

#[test]
fn malformed_descriptor_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("w.json"), "{ nope").unwrap();
    let o = run(dir.path(), &["warp-info", "--warp", "w.json"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    assert_eq!(code(&run(dir.path(), &["warp-info", "--preset", "mystery"])), 2);
    assert_eq!(code(&run(dir.path(), &["warp-info"])), 2);
    assert_eq!(code(&run(dir.path(), &["frame-bounds", "--preset", "gabor", "--delta-list", "0.5,1"])), 2);
    assert_eq!(code(&run(dir.path(), &["warp-info", "--preset", "gabor", "--threads", "0"])), 2);
    assert_eq!(code(&run(dir.path(), &["no-such-command"])), 2);
}

#[test]
fn descriptor_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["warp-info", "--preset", "alpha", "--out", "a.json"])), 0);
    let v = read_json(&dir.path().join("a.json"));
    std::fs::write(dir.path().join("desc.json"), v["descriptor"].to_string()).unwrap();
    assert_eq!(code(&run(dir.path(), &["warp-info", "--warp", "desc.json", "--out", "b.json"])), 0);
    let w = read_json(&dir.path().join("b.json"));
    assert_eq!(w["probes"], v["probes"]);
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["check", "--preset", "gabor", "--out", "r.json"]);
    assert_eq!(code(&o), 0);
    let v = read_json(&dir.path().join("r.json"));
    assert!(v["reports"].as_array().unwrap().iter().all(|r| r["pass"] == true));
    assert_eq!(code(&run(dir.path(), &["check", "--preset", "wavelet1d"])), 0);
    assert_eq!(code(&run(dir.path(), &["check", "--preset", "gabor", "--v0", "const:0.5"])), 1);
    assert_eq!(code(&run(dir.path(), &["check", "--preset", "gabor", "--v0", "half"])), 2);
}

#[test]
fn zero_signal_gives_zero_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen-signal", "zero", "--preset", "gabor", "--n", "65", "--out", "z.csv"])), 0);
    assert_eq!(code(&run(d, &["analyze", "z.csv", "--preset", "gabor", "--out", "c.csv"])), 0);
    let rows = csv_rows(&d.join("c.csv"));
    assert!(!rows.is_empty());
    for r in rows {
        let n = r.len();
        assert_eq!(r[n - 2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[n - 1].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn chirp_roundtrip_on_wavelet1d() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let g = run(d, &["gen-signal", "chirp:0.3", "--preset", "wavelet1d", "--box=-12:12", "--n", "801", "--delta", "0.25", "--out", "s.csv"]);
    assert_eq!(code(&g), 0);
    let o = run(d, &["roundtrip", "s.csv", "--preset", "wavelet1d", "--delta", "0.25"]);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert!(v["relative_error"].as_f64().unwrap() <= 1e-6, "{v}");
    assert!(o.stderr.is_empty(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn analyze_then_synthesize_recovers_the_signal() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen-signal", "random", "--preset", "gabor", "--n", "129", "--seed", "5", "--out", "s.bin"])), 0);
    assert_eq!(code(&run(d, &["analyze", "s.bin", "--preset", "gabor", "--out", "c.csv"])), 0);
    assert_eq!(code(&run(d, &["synthesize", "c.csv", "--out", "r.csv"])), 0);
    let bytes = std::fs::read(d.join("s.bin")).unwrap();
    let orig: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let rec: Vec<f64> = csv_rows(&d.join("r.csv")).iter().flat_map(|r| [r[1].parse::<f64>().unwrap(), r[2].parse::<f64>().unwrap()]).collect();
    assert_eq!(orig.len(), rec.len());
    let scale = orig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let err = orig.iter().zip(&rec).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 1e-8 * scale, "{err}");
}

#[test]
fn edge_band_signal_warns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut s = String::from("xi_1,re,im\n");
    for j in 0..65 {
        s.push_str(&format!("{},1,0\n", -4.0 + 8.0 * j as f64 / 64.0));
    }
    std::fs::write(d.join("flat.csv"), s).unwrap();
    let o = run(d, &["analyze", "flat.csv", "--preset", "gabor", "--box=-4:4", "--out", "c.csv"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("edge channels"));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["analyze", "nope.csv", "--preset", "gabor", "--out", "c.csv"])), 3);
    assert_eq!(code(&run(dir.path(), &["gen-signal", "zero", "--preset", "gabor", "--out", "no/dir/z.csv"])), 3);
}

#[test]
fn norms_match_a_direct_sum() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["gen-signal", "random", "--preset", "gabor", "--n", "65", "--out", "s.csv"])), 0);
    assert_eq!(code(&run(d, &["analyze", "s.csv", "--preset", "gabor", "--out", "c.csv"])), 0);
    let v = stdout_json(&run(d, &["norms", "c.csv", "--p", "2", "--q", "2"]));
    let direct: f64 = csv_rows(&d.join("c.csv"))
        .iter()
        .map(|r| {
            let (a, b) = (r[4].parse::<f64>().unwrap(), r[5].parse::<f64>().unwrap());
            a * a + b * b
        })
        .sum::<f64>()
        .sqrt();
    let got = v["norm"].as_f64().unwrap();
    assert!((got - direct).abs() <= 1e-12 * direct, "{got} vs {direct}");
    let sup = stdout_json(&run(d, &["norms", "c.csv", "--p", "inf", "--q", "inf"]))["norm"].as_f64().unwrap();
    assert!(sup <= got);
}

#[test]
fn identity_covering_cell_count() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["covering-export", "--preset", "gabor", "--delta", "1", "--box=-4:4", "--time-extent=-3:3", "--out", "cov.csv"]);
    assert_eq!(code(&o), 0);
    // Channels k with |k| < 5 meet [-4, 4]; unit time cells (ℓ−1, ℓ+1) meet [-3, 3] for |ℓ| ≤ 3.
    assert_eq!(stdout_json(&o)["cells"], 9 * 7);
    assert_eq!(csv_rows(&dir.path().join("cov.csv")).len(), 63);
    let meta = read_json(&dir.path().join("cov.csv.json"));
    assert_eq!(meta["records"].as_array().unwrap().len(), 63);
}

#[test]
fn frame_bound_ratio_decreases_with_delta() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["frame-bounds", "--preset", "wavelet1d", "--box=-40:40", "--n", "801", "--out", "fb.csv"]);
    assert_eq!(code(&o), 0);
    let ratios: Vec<f64> = csv_rows(&dir.path().join("fb.csv")).iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(ratios.len(), 3);
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
}

#[test]
fn kernel_decay_contraction_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["kernel-decay", "--preset", "wavelet1d", "--out", "k.csv"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert!(text.starts_with("delta,osc_bm,gram_bm,contraction,converged\n"));
    let c: Vec<f64> = csv_rows(&dir.path().join("k.csv")).iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(c.windows(2).all(|w| w[1] < w[0]), "{c:?}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        assert_eq!(code(&run(d, &["gen-signal", "random", "--preset", "alpha", "--n", "257", "--seed", "9", "--out", "s.csv"])), 0);
        assert_eq!(code(&run(d, &["analyze", "s.csv", "--preset", "alpha", "--out", "c.csv"])), 0);
    }
    for f in ["s.csv", "s.csv.json", "c.csv", "c.csv.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
