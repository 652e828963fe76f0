use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const W: usize = 32;
const H: usize = 32;

fn wz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wz"))
        .args(["--threads", "1"])
        .args(args)
        .output()
        .expect("run wz")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// Luma-only clip of a smooth pattern drifting one pixel per frame.
fn write_clip(p: &str, frames: usize) {
    let mut bytes = Vec::with_capacity(W * H * frames);
    for t in 0..frames {
        for y in 0..H {
            for x in 0..W {
                let u = x as f64 - t as f64;
                let v = 128.0 + 50.0 * (0.2 * u + 0.07 * y as f64).sin() + 30.0 * (0.05 * u - 0.2 * y as f64).cos();
                bytes.push(v.round() as u8);
            }
        }
    }
    std::fs::write(p, bytes).unwrap();
}

fn dims() -> [&'static str; 6] {
    ["--width", "32", "--height", "32", "--layout", "y"]
}

fn encode(dir: &TempDir, q: &str) -> String {
    let input = path(dir, "in.y");
    write_clip(&input, 4);
    let out = path(dir, "clip.wzc");
    let o = wz(&[&["encode", "--input", &input], &dims()[..], &["--q", q, "--out", &out]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn encode_decode_round_trip() {
    let dir = TempDir::new().unwrap();
    let clip = encode(&dir, "6");
    let rec = path(&dir, "rec.y");
    let stats = path(&dir, "stats.csv");
    let o = wz(&["decode", "--in", &clip, "--out", &rec, "--stats", &stats, "--layout", "y"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::metadata(&rec).unwrap().len() as usize, 4 * W * H);
    let csv = std::fs::read_to_string(&stats).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("frame,type,band,plane,chunks_consumed,crc_ok,bits"));
    assert!(lines.clone().any(|l| l.starts_with("0,key,")));
    assert!(lines.any(|l| l.starts_with("1,wz,0,0,")));

    let o = wz(&[&["psnr", "--a", &path(&dir, "in.y"), "--b", &rec], &dims()[..]].concat());
    let o = String::from_utf8(o.stdout).unwrap();
    assert_ne!(o.trim(), "inf");
    assert!(o.trim().parse::<f64>().unwrap() > 30.0);
}

#[test]
fn yuv420_output_has_chroma() {
    let dir = TempDir::new().unwrap();
    let clip = encode(&dir, "3");
    let rec = path(&dir, "rec.yuv");
    assert!(wz(&["decode", "--in", &clip, "--out", &rec]).status.success());
    assert_eq!(std::fs::metadata(&rec).unwrap().len() as usize, 4 * W * H * 3 / 2);
}

#[test]
fn psnr_identical_prints_inf() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "a.y");
    write_clip(&a, 2);
    let o = wz(&[&["psnr", "--a", &a, "--b", &a], &dims()[..]].concat());
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "inf");
}

#[test]
fn deterministic_outputs() {
    let dir = TempDir::new().unwrap();
    let clip = encode(&dir, "5");
    let first = std::fs::read(&clip).unwrap();
    let clip = encode(&dir, "5");
    assert_eq!(first, std::fs::read(&clip).unwrap());
    let mut outs = Vec::new();
    for i in 0..2 {
        let rec = path(&dir, &format!("rec{i}.y"));
        let stats = path(&dir, &format!("stats{i}.csv"));
        assert!(wz(&["decode", "--in", &clip, "--out", &rec, "--stats", &stats, "--layout", "y"]).status.success());
        outs.push((std::fs::read(&rec).unwrap(), std::fs::read(&stats).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn rd_sweep_writes_one_row_per_matrix() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "in.y");
    write_clip(&input, 3);
    let csv = path(&dir, "rd.csv");
    let o = wz(&[&["rd", "--input", &input], &dims()[..], &["--sweep", "1..8", "--csv", &csv]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "q,kbps_total,kbps_key,kbps_wz,psnr_mean");
    assert_eq!(lines.len(), 9);
    assert!(lines[8].starts_with("8,"));
}

#[test]
fn si_eval_writes_csv() {
    let dir = TempDir::new().unwrap();
    let input = path(&dir, "in.y");
    write_clip(&input, 5);
    let csv = path(&dir, "si.csv");
    let o = wz(&[&["si-eval", "--input", &input], &dims()[..], &["--gop", "2", "--csv", &csv]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("frame,tau,psnr_si,psnr_average"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert!(!wz(&["frobnicate"]).status.success());
    assert_eq!(wz(&["encode"]).status.code(), Some(2));

    // truncated raw input
    let bad = path(&dir, "bad.y");
    std::fs::write(&bad, vec![0u8; W * H + 7]).unwrap();
    let o = wz(&[&["encode", "--input", &bad], &dims()[..], &["--out", &path(&dir, "x.wzc")]].concat());
    assert_eq!(o.status.code(), Some(2));
    // dimensions not a multiple of 16
    let o = wz(&["encode", "--input", &bad, "--width", "20", "--height", "16", "--layout", "y", "--out", &path(&dir, "x.wzc")]);
    assert_eq!(o.status.code(), Some(2));

    let clip = encode(&dir, "4");
    let mut bytes = std::fs::read(&clip).unwrap();
    let rec = path(&dir, "rec.y");
    bytes.truncate(bytes.len() - 3);
    let cut = path(&dir, "cut.wzc");
    std::fs::write(&cut, &bytes).unwrap();
    assert_eq!(wz(&["decode", "--in", &cut, "--out", &rec]).status.code(), Some(3));
    assert!(!Path::new(&rec).exists());
}

#[test]
fn tampered_crc_exits_with_flag_code() {
    let dir = TempDir::new().unwrap();
    let clip = encode(&dir, "1");
    let mut bytes = std::fs::read(&clip).unwrap();
    // first GOP: 29-byte header, size, key length, key payload, then the DC band's first CRC
    let key_len = u32::from_le_bytes(bytes[30..34].try_into().unwrap()) as usize;
    bytes[34 + key_len] ^= 0xa5;
    let bad = path(&dir, "bad.wzc");
    std::fs::write(&bad, &bytes).unwrap();
    let rec = path(&dir, "rec.y");
    let o = wz(&["decode", "--in", &bad, "--out", &rec, "--layout", "y"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(&rec).exists());
}
