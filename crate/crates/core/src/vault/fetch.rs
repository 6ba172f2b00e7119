use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Duration;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use url::Url;

use super::format::{
    read_vault, verify_checksums, CHECKSUM_FILE, DATA_FILE, INDEX_FILE, METADATA_FILE,
};
use crate::error::{Error, Result};
use crate::model::TrajectoryDataset;

const MAX_REDIRECTS: u32 = 5;

/// Packs a vault directory into a gzip-compressed tar archive with a single
/// top-level directory named after the vault. Entry order, timestamps and
/// ownership are fixed so identical vaults produce identical archives.
pub fn pack_vault(vault_dir: impl AsRef<Path>, archive: impl AsRef<Path>) -> Result<()> {
    let dir = vault_dir.as_ref();
    let archive = archive.as_ref();
    let root = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "vault".to_string());
    let out = File::create(archive).map_err(|e| Error::io(archive, e))?;
    let mut tar = tar::Builder::new(GzEncoder::new(BufWriter::new(out), Compression::default()));
    for name in [METADATA_FILE, DATA_FILE, INDEX_FILE, CHECKSUM_FILE] {
        let path = dir.join(name);
        if !path.exists() {
            continue;
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let mut header = tar::Header::new_gnu();
        header.set_size(bytes.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        header.set_entry_type(tar::EntryType::Regular);
        tar.append_data(&mut header, format!("{root}/{name}"), bytes.as_slice())
            .map_err(|e| Error::io(archive, e))?;
    }
    let gz = tar.into_inner().map_err(|e| Error::io(archive, e))?;
    let mut w = gz.finish().map_err(|e| Error::io(archive, e))?;
    io::Write::flush(&mut w).map_err(|e| Error::io(archive, e))?;
    Ok(())
}

/// Downloads a packed vault, verifies its checksums and installs it at
/// `destination`.
///
/// Supported schemes are `http`, `https` and `file`. The archive must contain
/// one vault directory with a `vault.sha256` sidecar. Extraction happens in a
/// temporary directory next to `destination`, which is only renamed into
/// place once the vault has loaded cleanly; on any error `destination` is
/// left as it was.
pub fn fetch_vault(url: &str, destination: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    let dest = destination.as_ref();
    let parsed = Url::parse(url).map_err(|e| Error::InvalidUrl {
        url: url.to_string(),
        reason: e.to_string(),
    })?;
    match parsed.scheme() {
        "http" | "https" | "file" => {}
        other => return Err(Error::UnsupportedScheme(other.to_string())),
    }
    if dest.exists() && !is_empty_dir(dest)? {
        return Err(Error::InvalidArgument(format!(
            "destination {} already exists and is not empty",
            dest.display()
        )));
    }
    let parent = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".trajvault-fetch-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(&parent, e))?;

    let archive_path = staging.path().join("archive.tar.gz");
    match parsed.scheme() {
        "file" => {
            let src = parsed.to_file_path().map_err(|_| Error::InvalidUrl {
                url: url.to_string(),
                reason: "not a local file path".into(),
            })?;
            fs::copy(&src, &archive_path).map_err(|e| Error::io(src, e))?;
        }
        _ => download(url, &archive_path)?,
    }

    let extracted = staging.path().join("extracted");
    fs::create_dir(&extracted).map_err(|e| Error::io(&extracted, e))?;
    unpack(&archive_path, &extracted)?;
    let vault_dir = locate_vault(&extracted)?.ok_or(Error::MissingMetadata)?;
    if !verify_checksums(&vault_dir)? {
        return Err(Error::MissingChecksum(vault_dir));
    }
    let dataset = read_vault(&vault_dir)?;

    if dest.exists() {
        fs::remove_dir(dest).map_err(|e| Error::io(dest, e))?;
    }
    fs::rename(&vault_dir, dest).map_err(|e| Error::io(dest, e))?;
    Ok(dataset)
}

fn is_empty_dir(p: &Path) -> Result<bool> {
    if !p.is_dir() {
        return Ok(false);
    }
    Ok(fs::read_dir(p)
        .map_err(|e| Error::io(p, e))?
        .next()
        .is_none())
}

fn download(url: &str, to: &Path) -> Result<()> {
    let net = |reason: String| Error::Network {
        url: url.to_string(),
        reason,
    };
    let agent = ureq::AgentBuilder::new()
        .redirects(MAX_REDIRECTS)
        .timeout_connect(Duration::from_secs(30))
        .build();
    let response = agent
        .get(url)
        .set("Accept-Encoding", "identity")
        .call()
        .map_err(|e| net(e.to_string()))?;
    let mut out = BufWriter::new(File::create(to).map_err(|e| Error::io(to, e))?);
    io::copy(&mut response.into_reader(), &mut out).map_err(|e| net(e.to_string()))?;
    io::Write::flush(&mut out).map_err(|e| Error::io(to, e))?;
    Ok(())
}

fn unpack(archive: &Path, into: &Path) -> Result<()> {
    let f = File::open(archive).map_err(|e| Error::io(archive, e))?;
    let mut tar = tar::Archive::new(GzDecoder::new(f));
    tar.set_preserve_permissions(false);
    tar.unpack(into)
        .map_err(|e| Error::Format(format!("cannot unpack archive: {e}")))
}

/// Finds the directory holding `metadata.json`, at the archive root or one
/// level down.
fn locate_vault(root: &Path) -> Result<Option<PathBuf>> {
    if root.join(METADATA_FILE).is_file() {
        return Ok(Some(root.to_path_buf()));
    }
    let mut found = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() && path.join(METADATA_FILE).is_file() {
            found.push(path);
        }
    }
    match found.len() {
        0 => Ok(None),
        1 => Ok(found.pop()),
        n => Err(Error::Format(format!(
            "archive holds {n} vaults, expected one"
        ))),
    }
}
