//! On-disk dataset cache.
//!
//! Layout: `<root>/<dataset>/<split>/` holds the split's files plus a
//! `manifest` with one `filename byte_length sha256` line per file. Files
//! may be stored raw or gzip-compressed (`<name>.gz`).

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use sha2::{Digest, Sha256};

use super::cifar::parse_cifar_batch;
use super::dataset::{Dataset, DatasetName, Split};
use super::idx::parse_idx;
use crate::error::{DataError, Error, Result};

/// Environment variable overriding the default cache directory.
pub const CACHE_ENV: &str = "KANVISION_CACHE";

const MANIFEST: &str = "manifest";

/// An official download with its published MD5 checksum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Source {
    pub file: &'static str,
    pub url: &'static str,
    pub md5: &'static str,
}

const MNIST_SOURCES: &[Source] = &[
    Source {
        file: "train-images-idx3-ubyte.gz",
        url: "https://ossci-datasets.s3.amazonaws.com/mnist/train-images-idx3-ubyte.gz",
        md5: "f68b3c2dcbeaaa9fbdd348bbdeb94873",
    },
    Source {
        file: "train-labels-idx1-ubyte.gz",
        url: "https://ossci-datasets.s3.amazonaws.com/mnist/train-labels-idx1-ubyte.gz",
        md5: "d53e105ee54ea40749a09fcbcd1e9432",
    },
    Source {
        file: "t10k-images-idx3-ubyte.gz",
        url: "https://ossci-datasets.s3.amazonaws.com/mnist/t10k-images-idx3-ubyte.gz",
        md5: "9fb629c4189551a2d022fa330f9573f3",
    },
    Source {
        file: "t10k-labels-idx1-ubyte.gz",
        url: "https://ossci-datasets.s3.amazonaws.com/mnist/t10k-labels-idx1-ubyte.gz",
        md5: "ec29112dd5afa0611ce80d1b7f02629c",
    },
];

const FASHION_SOURCES: &[Source] = &[
    Source {
        file: "train-images-idx3-ubyte.gz",
        url: "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/train-images-idx3-ubyte.gz",
        md5: "8d4fb7e6c68d591d4c3dfef9ec88bf0d",
    },
    Source {
        file: "train-labels-idx1-ubyte.gz",
        url: "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/train-labels-idx1-ubyte.gz",
        md5: "25c81989df183df01b3e8a0aad5dffbe",
    },
    Source {
        file: "t10k-images-idx3-ubyte.gz",
        url: "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/t10k-images-idx3-ubyte.gz",
        md5: "bef4ecab320f06d8554ea6380940ec79",
    },
    Source {
        file: "t10k-labels-idx1-ubyte.gz",
        url: "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/t10k-labels-idx1-ubyte.gz",
        md5: "bb300cfdad3c16e7a12a480ee83cd310",
    },
];

const CIFAR_SOURCES: &[Source] = &[Source {
    file: "cifar-10-binary.tar.gz",
    url: "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz",
    md5: "c32a1d4ab5d03f1284b67883e8d87530",
}];

impl DatasetName {
    pub fn official_sources(self) -> &'static [Source] {
        match self {
            DatasetName::Mnist => MNIST_SOURCES,
            DatasetName::FashionMnist => FASHION_SOURCES,
            DatasetName::Cifar10 => CIFAR_SOURCES,
        }
    }

    /// Uncompressed file names making up a split.
    pub fn split_files(self, split: Split) -> &'static [&'static str] {
        match (self, split) {
            (DatasetName::Cifar10, Split::Train) => &[
                "data_batch_1.bin",
                "data_batch_2.bin",
                "data_batch_3.bin",
                "data_batch_4.bin",
                "data_batch_5.bin",
            ],
            (DatasetName::Cifar10, Split::Test) => &["test_batch.bin"],
            (_, Split::Train) => &["train-images-idx3-ubyte", "train-labels-idx1-ubyte"],
            (_, Split::Test) => &["t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

impl ManifestEntry {
    pub fn for_bytes(file: impl Into<String>, bytes: &[u8]) -> Self {
        Self {
            file: file.into(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestEntry>, DataError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || DataError::Manifest {
            line: i + 1,
            text: line.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [file, bytes, sha] = fields[..] else {
            return Err(bad());
        };
        let bytes = bytes.parse().map_err(|_| bad())?;
        if sha.len() != 64 || !sha.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(bad());
        }
        out.push(ManifestEntry {
            file: file.to_string(),
            bytes,
            sha256: sha.to_ascii_lowercase(),
        });
    }
    Ok(out)
}

pub fn write_manifest(entries: &[ManifestEntry]) -> String {
    let mut s = String::from("# file bytes sha256\n");
    for e in entries {
        s.push_str(&format!("{} {} {}\n", e.file, e.bytes, e.sha256));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataCache {
    root: PathBuf,
}

impl DataCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// `$KANVISION_CACHE` when set, `default` otherwise.
    pub fn from_env_or(default: impl Into<PathBuf>) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(p) if !p.is_empty() => Self::new(p),
            _ => Self::new(default),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn split_dir(&self, name: DatasetName, split: Split) -> PathBuf {
        self.root.join(name.as_str()).join(split.as_str())
    }

    pub fn has(&self, name: DatasetName, split: Split) -> bool {
        let dir = self.split_dir(name, split);
        name.split_files(split)
            .iter()
            .all(|f| dir.join(f).is_file() || dir.join(format!("{f}.gz")).is_file())
    }

    fn read_file(&self, name: DatasetName, split: Split, file: &str) -> Result<Vec<u8>> {
        let dir = self.split_dir(name, split);
        let manifest = read_manifest_file(&dir)?;
        for (stored, gz) in [(file.to_string(), false), (format!("{file}.gz"), true)] {
            let path = dir.join(&stored);
            if !path.is_file() {
                continue;
            }
            let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if let Some(entries) = &manifest {
                verify_entry(entries, &stored, &raw)?;
            }
            return if gz { gunzip(&raw, &path) } else { Ok(raw) };
        }
        Err(DataError::MissingFile {
            path: dir.join(file),
            dataset: name.to_string(),
        }
        .into())
    }

    pub fn load(&self, name: DatasetName, split: Split) -> Result<Dataset> {
        let files = name.split_files(split);
        match name {
            DatasetName::Cifar10 => {
                let mut pixels = Vec::new();
                let mut labels = Vec::new();
                for f in files {
                    let (p, l) = parse_cifar_batch(&self.read_file(name, split, f)?)?;
                    pixels.extend(p);
                    labels.extend(l);
                }
                Dataset::new(name, split, name.image_shape(), pixels, labels)
            }
            DatasetName::Mnist | DatasetName::FashionMnist => {
                let images = parse_idx(&self.read_file(name, split, files[0])?)?;
                let labels = parse_idx(&self.read_file(name, split, files[1])?)?;
                if images.dims.len() != 3 || labels.dims.len() != 1 || images.dims[0] != labels.dims[0] {
                    return Err(DataError::DimensionMismatch(format!(
                        "images {:?} vs labels {:?}",
                        images.dims, labels.dims
                    ))
                    .into());
                }
                let shape = [1, images.dims[1], images.dims[2]];
                Dataset::new(name, split, shape, images.data, labels.data)
            }
        }
    }

    /// Copies a dataset's files from `source` into the cache, decompressing
    /// `.gz` files, and writes a manifest per split. Files are looked up in
    /// `source` and in `source/cifar-10-batches-bin`.
    pub fn import(&self, name: DatasetName, source: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for split in [Split::Train, Split::Test] {
            let dir = self.split_dir(name, split);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut entries = Vec::new();
            for file in name.split_files(split) {
                let bytes = find_source_file(source, file).ok_or_else(|| DataError::MissingFile {
                    path: source.join(file),
                    dataset: name.to_string(),
                })??;
                let dest = dir.join(file);
                fs::write(&dest, &bytes).map_err(|e| Error::io(&dest, e))?;
                entries.push(ManifestEntry::for_bytes(*file, &bytes));
                written.push(dest);
            }
            let mpath = dir.join(MANIFEST);
            fs::write(&mpath, write_manifest(&entries)).map_err(|e| Error::io(&mpath, e))?;
        }
        Ok(written)
    }
}

fn find_source_file(source: &Path, file: &str) -> Option<Result<Vec<u8>>> {
    let dirs = [source.to_path_buf(), source.join("cifar-10-batches-bin")];
    for dir in &dirs {
        let raw = dir.join(file);
        if raw.is_file() {
            return Some(fs::read(&raw).map_err(|e| Error::io(&raw, e)));
        }
        let gz = dir.join(format!("{file}.gz"));
        if gz.is_file() {
            return Some(
                fs::read(&gz)
                    .map_err(|e| Error::io(&gz, e))
                    .and_then(|b| gunzip(&b, &gz)),
            );
        }
    }
    None
}

fn read_manifest_file(dir: &Path) -> Result<Option<Vec<ManifestEntry>>> {
    let path = dir.join(MANIFEST);
    match fs::read_to_string(&path) {
        Ok(text) => Ok(Some(read_manifest(&text)?)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(&path, e)),
    }
}

fn verify_entry(entries: &[ManifestEntry], file: &str, bytes: &[u8]) -> Result<()> {
    let Some(entry) = entries.iter().find(|e| e.file == file) else {
        return Ok(());
    };
    if entry.bytes != bytes.len() as u64 {
        return Err(DataError::Checksum {
            file: file.to_string(),
            expected: format!("{} bytes", entry.bytes),
            actual: format!("{} bytes", bytes.len()),
        }
        .into());
    }
    let actual = sha256_hex(bytes);
    if actual != entry.sha256 {
        return Err(DataError::Checksum {
            file: file.to_string(),
            expected: entry.sha256.clone(),
            actual,
        }
        .into());
    }
    Ok(())
}

pub(crate) fn gunzip(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    GzDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| Error::io(path, e))?;
    Ok(out)
}
