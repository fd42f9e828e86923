//! A tiny learnable dataset in the official MNIST file format, and helpers
//! for driving the `kanvision` binary against it.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kanvision::data::{write_idx, IdxArray};
use kanvision::Rng;

/// Each class lights a different 7x7 block of the 28x28 canvas, plus noise.
fn fixture_split(n: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = Rng::new(seed);
    let mut pixels = vec![0u8; n * 784];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 10) as u8;
        labels.push(label);
        let img = &mut pixels[i * 784..(i + 1) * 784];
        for p in img.iter_mut() {
            *p = rng.below(60) as u8;
        }
        let (by, bx) = ((label as usize / 4) * 9 + 1, (label as usize % 4) * 7);
        for y in by..by + 7 {
            for x in bx..bx + 7 {
                img[y * 28 + x] = 200 + rng.below(56) as u8;
            }
        }
    }
    (pixels, labels)
}

/// Writes the four MNIST files for a fixture with `train` and `test` images.
pub fn write_fixture_files(dir: &Path, train: usize, test: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for (prefix, n, seed) in [("train", train, 1), ("t10k", test, 2)] {
        let (pixels, labels) = fixture_split(n, seed);
        let images = write_idx(&IdxArray { dims: vec![n, 28, 28], data: pixels }).unwrap();
        let labels = write_idx(&IdxArray { dims: vec![n], data: labels }).unwrap();
        std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), images).unwrap();
        std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), labels).unwrap();
    }
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_kanvision"))
}

pub fn kanvision(args: &[&str]) -> Output {
    Command::new(bin()).arg("-q").args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// A temp directory holding an imported fixture cache under `data/`.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new(train: usize, test: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("raw");
        write_fixture_files(&raw, train, test);
        let ws = Self { dir };
        let out = kanvision(&["fetch", "mnist", "--from", raw.to_str().unwrap(), "--cache-dir", ws.cache().to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        ws
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn cache(&self) -> PathBuf {
        self.path("data")
    }

    /// Runs a verb with `--cache-dir` and `--out-dir` pointing into the workspace.
    pub fn run(&self, verb: &[&str], out_dir: &str, extra: &[&str]) -> Output {
        let cache = self.cache();
        let out = self.path(out_dir);
        let mut args: Vec<&str> = verb.to_vec();
        args.extend(["--cache-dir", cache.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
        args.extend(extra);
        kanvision(&args)
    }
}
