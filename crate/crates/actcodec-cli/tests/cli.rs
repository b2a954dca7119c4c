//! CLI behaviors beyond the acceptance sweep: estimator/coder agreement
//! surfaced through the tool, transform fitting on decorrelated data, the
//! energy report path and mismatched-transform decoding.

use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use actcodec::tensor::{self, Tensor};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_actcodec"))
}

fn stdout_of(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn actcodec");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing {key} in '{line}'"))
        .parse()
        .unwrap()
}

fn write_tensor(dir: &Path, name: &str, t: &Tensor<f32>) -> PathBuf {
    let path = dir.join(name);
    tensor::write_tensor(t, &path).unwrap();
    path
}

#[test]
fn symeg_estimate_matches_compressed_payload_bits() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let t = Tensor::from_fn((3, 10, 10), |_, _, _| rng.random_range(-1.0..1.0f32)).unwrap();
    let input = write_tensor(dir.path(), "t.atns", &t);
    let packed = dir.path().join("t.actc");

    let est_line = stdout_of(bin().args(["estimate", input.to_str().unwrap(), "--coder", "symeg"]));
    let est_bits = field(&est_line, "total_bits");

    let comp_line = stdout_of(bin().args([
        "compress",
        input.to_str().unwrap(),
        packed.to_str().unwrap(),
        "--coder",
        "symeg",
    ]));
    let out_bytes = field(&comp_line, "out_bytes") as u64;
    // out_bytes = 34 fixed + 4*C overhead + byte-padded payload
    let payload_bits = (out_bytes - 34 - 4 * 3) * 8;
    let est_bits = est_bits as u64;
    assert!(est_bits <= payload_bits && payload_bits - est_bits < 8);
}

#[test]
fn fit_transform_on_decorrelated_samples_is_near_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let sample_dir = dir.path().join("samples");
    std::fs::create_dir(&sample_dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for i in 0..3 {
        // independent channels with distinct variances
        let t = Tensor::from_fn((4, 1, 2000), |c, _, _| {
            (1.0 + 0.4 * c as f32) * rng.random_range(-1.0..1.0f32)
        })
        .unwrap();
        write_tensor(&sample_dir, &format!("s{i}.atns"), &t);
    }
    let prefix = dir.path().join("pca").to_str().unwrap().to_string();
    let line = stdout_of(bin().args(["fit-transform", sample_dir.to_str().unwrap(), &prefix]));
    assert!(line.contains("channels=4"));

    let matrix = tensor::read_tensor(format!("{prefix}.fwd.atns"))
        .unwrap()
        .into_f32()
        .unwrap();
    assert_eq!(matrix.dims(), (4, 4, 1));
    for row in 0..4 {
        let mut magnitudes: Vec<f32> = (0..4).map(|col| matrix.get(row, col, 0).abs()).collect();
        magnitudes.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(magnitudes[0] > 0.95, "row {row} not near-permutation");
        assert!(magnitudes[1] < 0.3, "row {row} not near-permutation");
    }
}

#[test]
fn stats_energy_report_uses_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let t = Tensor::filled((2, 16, 16), 3.0f32).unwrap();
    let input = write_tensor(dir.path(), "x.atns", &t);
    let packed = dir.path().join("x.actc");
    stdout_of(bin().args(["compress", input.to_str().unwrap(), packed.to_str().unwrap()]));

    let energy_cfg = dir.path().join("energy.cfg");
    std::fs::write(&energy_cfg, "dram_pj_per_byte = 2.0\nmac_pj_fp32 = 0\nmac_pj_int8 = 0\n").unwrap();
    let out = stdout_of(bin().args([
        "stats",
        input.to_str().unwrap(),
        packed.to_str().unwrap(),
        "--energy-config",
        energy_cfg.to_str().unwrap(),
    ]));
    let energy_line = out
        .lines()
        .find(|l| l.starts_with("energy_baseline_pj="))
        .expect("energy line");
    let ratio_line = out.lines().find(|l| l.starts_with("layer=0")).unwrap();
    // traffic-only model: energy ratio equals the bandwidth ratio
    let bw_ratio = field(ratio_line, "ratio");
    let e_ratio = field(energy_line, "energy_ratio");
    assert!((bw_ratio - e_ratio).abs() < 1e-6);
    assert!(out.lines().any(|l| l.starts_with("energy_model dram_pj_per_byte=2")));
}

#[test]
fn stats_rejects_odd_file_list() {
    let dir = tempfile::tempdir().unwrap();
    let t = Tensor::filled((1, 2, 2), 0.0f32).unwrap();
    let input = write_tensor(dir.path(), "x.atns", &t);
    let code = bin()
        .args(["stats", input.to_str().unwrap()])
        .output()
        .unwrap()
        .status
        .code()
        .unwrap();
    assert_eq!(code, 1);
}

#[test]
fn decompress_with_wrong_transform_breaks_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    let t = Tensor::from_fn((2, 8, 8), |_, _, _| rng.random_range(-1.0..1.0f32)).unwrap();
    let input = write_tensor(dir.path(), "x.atns", &t);

    // a deliberately wrong (non-identity) transform for the decoder
    let wrong = Tensor::new((2, 2, 1), vec![0.0, 2.0, 2.0, 0.0]).unwrap();
    let prefix = dir.path().join("wrong").to_str().unwrap().to_string();
    tensor::write_tensor(&wrong, format!("{prefix}.fwd.atns")).unwrap();

    let packed = dir.path().join("x.actc");
    stdout_of(bin().args(["compress", input.to_str().unwrap(), packed.to_str().unwrap()]));
    let restored_path = dir.path().join("x.out.atns");
    stdout_of(bin().args([
        "decompress",
        packed.to_str().unwrap(),
        restored_path.to_str().unwrap(),
        "--transform",
        &prefix,
    ]));
    let restored = tensor::read_tensor(&restored_path).unwrap().into_f32().unwrap();
    let max_err = t
        .data()
        .iter()
        .zip(restored.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    // far beyond the half-step bound the correct transform would give
    assert!(max_err > 0.1, "wrong transform went undetected, max err {max_err}");
}

#[test]
fn compress_rejects_non_f32_input() {
    let dir = tempfile::tempdir().unwrap();
    let t = Tensor::new((1, 2, 2), vec![1u8, 2, 3, 4]).unwrap();
    let path = dir.path().join("u8.atns");
    tensor::write_tensor(&t, &path).unwrap();
    let code = bin()
        .args([
            "compress",
            path.to_str().unwrap(),
            dir.path().join("o.actc").to_str().unwrap(),
        ])
        .output()
        .unwrap()
        .status
        .code()
        .unwrap();
    assert_eq!(code, 3);
}
