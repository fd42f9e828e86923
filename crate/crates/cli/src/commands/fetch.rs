//! `fetch`: populate the data cache from the official archives or from a
//! local directory that already holds the files.

use std::fs::{self, File};
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use kanvision::data::{DataCache, DatasetName, Source, Split};
use md5::{Digest, Md5};

use crate::error::{CliError, CliResult};

pub fn fetch(dataset: DatasetName, cache_dir: &Path, from: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let cache = DataCache::new(cache_dir);
    let source = match from {
        Some(dir) => dir.to_path_buf(),
        None => download(dataset, cache_dir)?,
    };
    let written = cache.import(dataset, &source)?;
    for split in [Split::Train, Split::Test] {
        let ds = cache.load(dataset, split)?;
        eprintln!("{dataset} {split}: {} images, labels per class {:?}", ds.len(), ds.label_histogram());
    }
    Ok(written)
}

fn md5_hex(path: &Path) -> CliResult<String> {
    let mut file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Md5::new();
    io::copy(&mut file, &mut hasher).map_err(|e| CliError::io(path, e))?;
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn download_one(src: &Source, dest: &Path) -> CliResult<()> {
    if dest.exists() && md5_hex(dest)? == src.md5 {
        return Ok(());
    }
    eprintln!("downloading {}", src.url);
    let response = ureq::get(src.url)
        .call()
        .map_err(|e| CliError::Data(format!("download of {} failed: {e}", src.url)))?;
    let partial = dest.with_extension("part");
    let mut out = File::create(&partial).map_err(|e| CliError::io(&partial, e))?;
    io::copy(&mut response.into_body().into_reader(), &mut out)
        .map_err(|e| CliError::Data(format!("download of {} failed: {e}", src.url)))?;
    let actual = md5_hex(&partial)?;
    if actual != src.md5 {
        let _ = fs::remove_file(&partial);
        return Err(CliError::Data(format!(
            "{}: md5 {actual} does not match the published {}",
            src.file, src.md5
        )));
    }
    fs::rename(&partial, dest).map_err(|e| CliError::io(dest, e))
}

/// Downloads and verifies the official archives, returning a directory
/// from which [`DataCache::import`] can read every split file.
fn download(dataset: DatasetName, cache_dir: &Path) -> CliResult<PathBuf> {
    let dir = cache_dir.join(dataset.as_str()).join("downloads");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for src in dataset.official_sources() {
        download_one(src, &dir.join(src.file))?;
    }
    if dataset == DatasetName::Cifar10 {
        let archive = dir.join(dataset.official_sources()[0].file);
        let file = File::open(&archive).map_err(|e| CliError::io(&archive, e))?;
        let mut tar = tar::Archive::new(GzDecoder::new(BufReader::new(file)));
        let wanted: Vec<&str> = [Split::Train, Split::Test]
            .iter()
            .flat_map(|&s| dataset.split_files(s).iter().copied())
            .collect();
        let entries = tar.entries().map_err(|e| CliError::io(&archive, e))?;
        for entry in entries {
            let mut entry = entry.map_err(|e| CliError::io(&archive, e))?;
            let path = entry.path().map_err(|e| CliError::io(&archive, e))?.into_owned();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if wanted.contains(&name) {
                let dest = dir.join(name);
                entry.unpack(&dest).map_err(|e| CliError::io(&dest, e))?;
            }
        }
    }
    Ok(dir)
}
