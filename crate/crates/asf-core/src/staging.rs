//! Archive-based data staging.
//!
//! Many small files move badly one by one; a directory is packaged into a
//! single gzip-compressed tar archive with an embedded digest manifest,
//! transferred in one operation, and unpacked with per-file integrity
//! verification at the destination.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::{Component, Path, PathBuf};

use chrono::{DateTime, Utc};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::timefmt;

/// Archive member holding the manifest; always the first entry.
pub const MANIFEST_MEMBER: &str = "_manifest.json";

#[derive(Debug, Error)]
pub enum StagingError {
    #[error("source directory {0} does not exist")]
    MissingSource(PathBuf),
    #[error("archive {0} does not exist")]
    MissingArchive(PathBuf),
    #[error("refusing {kind} at {path}")]
    SpecialFile { kind: &'static str, path: PathBuf },
    #[error("archive member path {0} is not safe")]
    UnsafePath(String),
    #[error("archive has no {MANIFEST_MEMBER} member")]
    MissingManifest,
    #[error("digest mismatch for {path}: expected {expected}, found {found}")]
    DigestMismatch {
        path: String,
        expected: String,
        found: String,
    },
    #[error("file {0} listed in manifest is missing from the archive")]
    MissingMember(String),
    #[error("archive member {0} is not listed in the manifest")]
    UnknownMember(String),
    #[error("archive: {0}")]
    Archive(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-file record in the staging manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the packaged directory, `/`-separated.
    pub path: String,
    pub size: u64,
    pub sha256: String,
}

/// Contents listing with digests embedded in every archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagingManifest {
    pub count: usize,
    pub total_bytes: u64,
    #[serde(with = "timefmt::entry_time")]
    pub created: DateTime<Utc>,
    pub files: Vec<FileDigest>,
}

/// Receipt for one archive transfer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferReceipt {
    pub bytes_moved: u64,
    /// Always 1: the whole archive moves as a single operation.
    pub operations_count: u64,
}

/// Manifest plus transfer receipt for a completed staging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub manifest: StagingManifest,
    pub receipt: TransferReceipt,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

fn sha256_file(path: &Path) -> Result<(String, u64), StagingError> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    let mut size = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        size += n as u64;
        hasher.update(&buf[..n]);
    }
    Ok((hex_string(&hasher.finalize()), size))
}

fn hex_string(digest: &[u8]) -> String {
    let mut out = String::with_capacity(digest.len() * 2);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Collect regular files under `dir`, sorted by relative path. Symlinks
/// and special files are rejected rather than followed.
fn collect_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, StagingError> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in fs::read_dir(&current)? {
            let entry = entry?;
            let path = entry.path();
            let file_type = entry.file_type()?;
            if file_type.is_symlink() {
                return Err(StagingError::SpecialFile {
                    kind: "symlink",
                    path,
                });
            }
            if file_type.is_dir() {
                stack.push(path);
            } else if file_type.is_file() {
                let relative = path
                    .strip_prefix(dir)
                    .expect("walk stays under dir")
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join("/");
                files.push((relative, path));
            } else {
                return Err(StagingError::SpecialFile {
                    kind: "special file",
                    path,
                });
            }
        }
    }
    files.sort();
    Ok(files)
}

fn safe_relative(path: &str) -> Result<PathBuf, StagingError> {
    let rel = Path::new(path);
    if rel.is_absolute() {
        return Err(StagingError::UnsafePath(path.to_string()));
    }
    for component in rel.components() {
        match component {
            Component::Normal(_) => {}
            _ => return Err(StagingError::UnsafePath(path.to_string())),
        }
    }
    Ok(rel.to_path_buf())
}

/// Package every regular file under `dir` into a gzip'd tar at `archive`,
/// with the manifest as the first member. Member order is the sorted
/// relative path order, so the manifest is deterministic for a given tree.
pub fn package(dir: &Path, archive: &Path) -> Result<StagingManifest, StagingError> {
    package_at(dir, archive, timefmt::now_utc())
}

/// `package` with an explicit manifest timestamp.
pub fn package_at(
    dir: &Path,
    archive: &Path,
    created: DateTime<Utc>,
) -> Result<StagingManifest, StagingError> {
    if !dir.is_dir() {
        return Err(StagingError::MissingSource(dir.to_path_buf()));
    }
    let files = collect_files(dir)?;

    let mut digests = Vec::with_capacity(files.len());
    let mut total_bytes = 0u64;
    for (relative, path) in &files {
        safe_relative(relative)?;
        let (sha256, size) = sha256_file(path)?;
        total_bytes += size;
        digests.push(FileDigest {
            path: relative.clone(),
            size,
            sha256,
        });
    }
    let manifest = StagingManifest {
        count: digests.len(),
        total_bytes,
        created,
        files: digests,
    };

    if let Some(parent) = archive.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let out = File::create(archive)?;
    let encoder = GzEncoder::new(out, Compression::default());
    let mut builder = tar::Builder::new(encoder);

    let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let mut header = tar::Header::new_gnu();
    header.set_size(manifest_bytes.len() as u64);
    header.set_mode(0o644);
    header.set_cksum();
    builder
        .append_data(&mut header, MANIFEST_MEMBER, manifest_bytes.as_slice())
        .map_err(|e| StagingError::Archive(e.to_string()))?;

    for (relative, path) in &files {
        let mut file = File::open(path)?;
        builder
            .append_file(relative, &mut file)
            .map_err(|e| StagingError::Archive(e.to_string()))?;
    }
    builder
        .into_inner()
        .map_err(|e| StagingError::Archive(e.to_string()))?
        .finish()?;
    Ok(manifest)
}

/// Copy the archive to `destination` as one operation.
pub fn transfer(archive: &Path, destination: &Path) -> Result<TransferReceipt, StagingError> {
    if !archive.is_file() {
        return Err(StagingError::MissingArchive(archive.to_path_buf()));
    }
    let destination = if destination.is_dir() {
        destination.join(archive.file_name().expect("archive has a name"))
    } else {
        destination.to_path_buf()
    };
    if let Some(parent) = destination.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let bytes_moved = fs::copy(archive, &destination)?;
    Ok(TransferReceipt {
        bytes_moved,
        operations_count: 1,
    })
}

/// Unpack an archive into `dest_dir`, verifying every member against the
/// embedded manifest. Any mismatch aborts and removes what was created.
pub fn unpack(archive: &Path, dest_dir: &Path) -> Result<StagingManifest, StagingError> {
    if !archive.is_file() {
        return Err(StagingError::MissingArchive(archive.to_path_buf()));
    }
    let created_dest = !dest_dir.exists();
    fs::create_dir_all(dest_dir)?;

    let result = unpack_inner(archive, dest_dir);
    if result.is_err() && created_dest {
        let _ = fs::remove_dir_all(dest_dir);
    }
    result
}

fn unpack_inner(archive: &Path, dest_dir: &Path) -> Result<StagingManifest, StagingError> {
    let file = File::open(archive)?;
    let decoder = GzDecoder::new(file);
    let mut reader = tar::Archive::new(decoder);

    let mut manifest: Option<StagingManifest> = None;
    let mut expected: BTreeMap<String, FileDigest> = BTreeMap::new();
    let mut seen = 0usize;
    let mut written: Vec<PathBuf> = Vec::new();

    let entries = reader
        .entries()
        .map_err(|e| StagingError::Archive(e.to_string()))?;
    for entry in entries {
        let mut entry = entry.map_err(|e| StagingError::Archive(e.to_string()))?;
        let member_path = entry
            .path()
            .map_err(|e| StagingError::Archive(e.to_string()))?
            .to_string_lossy()
            .into_owned();

        if manifest.is_none() {
            if member_path != MANIFEST_MEMBER {
                return Err(StagingError::MissingManifest);
            }
            let mut bytes = Vec::new();
            entry
                .read_to_end(&mut bytes)
                .map_err(|e| StagingError::Archive(e.to_string()))?;
            let parsed: StagingManifest = serde_json::from_slice(&bytes)
                .map_err(|e| StagingError::Archive(format!("manifest: {e}")))?;
            for file in &parsed.files {
                expected.insert(file.path.clone(), file.clone());
            }
            manifest = Some(parsed);
            continue;
        }

        let relative = safe_relative(&member_path)?;
        let digest = expected
            .get(&member_path)
            .ok_or_else(|| StagingError::UnknownMember(member_path.clone()))?
            .clone();

        let mut bytes = Vec::new();
        entry
            .read_to_end(&mut bytes)
            .map_err(|e| StagingError::Archive(e.to_string()))?;
        let found = sha256_hex(&bytes);
        if found != digest.sha256 || bytes.len() as u64 != digest.size {
            cleanup(&written);
            return Err(StagingError::DigestMismatch {
                path: member_path,
                expected: digest.sha256,
                found,
            });
        }

        let target = dest_dir.join(&relative);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = File::create(&target)?;
        out.write_all(&bytes)?;
        written.push(target);
        seen += 1;
    }

    let manifest = manifest.ok_or(StagingError::MissingManifest)?;
    if seen != manifest.count {
        let missing = expected
            .keys()
            .find(|path| !written.iter().any(|w| w.ends_with(path)))
            .cloned()
            .unwrap_or_default();
        cleanup(&written);
        return Err(StagingError::MissingMember(missing));
    }
    Ok(manifest)
}

fn cleanup(written: &[PathBuf]) {
    for path in written {
        let _ = fs::remove_file(path);
    }
}

/// Package, transfer, and unpack in one step: after staging, the
/// destination directory holds a content-identical copy of `dir`. A
/// failed staging leaves no partial destination behind.
pub fn stage(dir: &Path, destination_dir: &Path) -> Result<StageReport, StagingError> {
    let scratch = tempfile::Builder::new().prefix("asf-stage-").tempdir()?;
    let archive = scratch.path().join("payload.tar.gz");
    package(dir, &archive)?;

    let transferred = scratch.path().join("transferred.tar.gz");
    let receipt = transfer(&archive, &transferred)?;

    let created_dest = !destination_dir.exists();
    let manifest = match unpack(&transferred, destination_dir) {
        Ok(manifest) => manifest,
        Err(e) => {
            if created_dest {
                let _ = fs::remove_dir_all(destination_dir);
            }
            return Err(e);
        }
    };
    Ok(StageReport { manifest, receipt })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tree(root: &Path, files: &[(&str, &[u8])]) {
        for (path, contents) in files {
            let full = root.join(path);
            fs::create_dir_all(full.parent().unwrap()).unwrap();
            fs::write(full, contents).unwrap();
        }
    }

    #[test]
    fn package_lists_every_file_with_digests() {
        let src = tempfile::tempdir().unwrap();
        write_tree(
            src.path(),
            &[
                ("a.txt", b"alpha"),
                ("sub/b.txt", b"beta"),
                ("sub/deeper/c.txt", b"gamma"),
            ],
        );
        let out = tempfile::tempdir().unwrap();
        let archive = out.path().join("x.tar.gz");
        let manifest = package(src.path(), &archive).unwrap();
        assert_eq!(manifest.count, 3);
        assert_eq!(manifest.total_bytes, 14);
        let paths: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["a.txt", "sub/b.txt", "sub/deeper/c.txt"]);
        assert_eq!(manifest.files[0].sha256, sha256_hex(b"alpha"));
    }

    #[test]
    fn empty_directory_packages_to_zero_members() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let archive = out.path().join("empty.tar.gz");
        let manifest = package(src.path(), &archive).unwrap();
        assert_eq!(manifest.count, 0);
        assert_eq!(manifest.total_bytes, 0);

        let dest = out.path().join("restored");
        let unpacked = unpack(&archive, &dest).unwrap();
        assert_eq!(unpacked.count, 0);
        assert!(dest.is_dir());
    }

    #[cfg(unix)]
    #[test]
    fn symlinks_are_rejected() {
        let src = tempfile::tempdir().unwrap();
        write_tree(src.path(), &[("a.txt", b"alpha")]);
        std::os::unix::fs::symlink("/etc/passwd", src.path().join("escape")).unwrap();
        let out = tempfile::tempdir().unwrap();
        let archive = out.path().join("x.tar.gz");
        assert!(matches!(
            package(src.path(), &archive),
            Err(StagingError::SpecialFile { kind: "symlink", .. })
        ));
    }

    #[test]
    fn unpack_restores_identical_digests() {
        let src = tempfile::tempdir().unwrap();
        write_tree(src.path(), &[("a.txt", b"alpha"), ("b/c.txt", b"see")]);
        let out = tempfile::tempdir().unwrap();
        let archive = out.path().join("x.tar.gz");
        let packed = package(src.path(), &archive).unwrap();
        let dest = out.path().join("restored");
        let unpacked = unpack(&archive, &dest).unwrap();
        assert_eq!(packed, unpacked);
        for file in &packed.files {
            let (sha256, size) = sha256_file(&dest.join(&file.path)).unwrap();
            assert_eq!(sha256, file.sha256);
            assert_eq!(size, file.size);
        }
    }

    #[test]
    fn corrupted_archive_byte_aborts_unpack() {
        let src = tempfile::tempdir().unwrap();
        // An incompressible payload so a mid-archive flip lands in member
        // data rather than in compressed trailing padding.
        let mut state = 0x2545f4914f6cdd1du64;
        let payload: Vec<u8> = (0..32768)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 32) as u8
            })
            .collect();
        write_tree(src.path(), &[("blob.bin", payload.as_slice())]);
        let out = tempfile::tempdir().unwrap();
        let archive = out.path().join("x.tar.gz");
        package(src.path(), &archive).unwrap();

        let mut bytes = fs::read(&archive).unwrap();
        let flip = bytes.len() / 2;
        bytes[flip] ^= 0x01;
        fs::write(&archive, &bytes).unwrap();

        let dest = out.path().join("restored");
        let err = unpack(&archive, &dest);
        assert!(err.is_err(), "corrupted archive must not unpack");
        assert!(!dest.exists(), "no partial destination after abort");
    }

    #[test]
    fn traversal_member_is_rejected() {
        // Hand-build an archive whose member path escapes the target.
        let out = tempfile::tempdir().unwrap();
        let archive = out.path().join("evil.tar.gz");
        let file = File::create(&archive).unwrap();
        let encoder = GzEncoder::new(file, Compression::default());
        let mut builder = tar::Builder::new(encoder);

        let manifest = StagingManifest {
            count: 1,
            total_bytes: 4,
            created: timefmt::now_utc(),
            files: vec![FileDigest {
                path: "../x".into(),
                size: 4,
                sha256: sha256_hex(b"evil"),
            }],
        };
        let manifest_bytes = serde_json::to_vec(&manifest).unwrap();
        let mut header = tar::Header::new_gnu();
        header.set_size(manifest_bytes.len() as u64);
        header.set_mode(0o644);
        header.set_cksum();
        builder
            .append_data(&mut header, MANIFEST_MEMBER, manifest_bytes.as_slice())
            .unwrap();
        // append_data refuses `..`, so write the member name bytes raw.
        let mut header = tar::Header::new_gnu();
        header.as_gnu_mut().unwrap().name[..4].copy_from_slice(b"../x");
        header.set_size(4);
        header.set_mode(0o644);
        header.set_cksum();
        builder.append(&header, &b"evil"[..]).unwrap();
        builder.into_inner().unwrap().finish().unwrap();

        let dest = out.path().join("restored");
        assert!(matches!(
            unpack(&archive, &dest),
            Err(StagingError::UnsafePath(_))
        ));
    }

    #[test]
    fn transfer_is_one_operation_and_overwrites() {
        let src = tempfile::tempdir().unwrap();
        write_tree(src.path(), &[("a.txt", b"alpha")]);
        let out = tempfile::tempdir().unwrap();
        let archive = out.path().join("x.tar.gz");
        package(src.path(), &archive).unwrap();

        let dest = out.path().join("moved.tar.gz");
        let first = transfer(&archive, &dest).unwrap();
        assert_eq!(first.operations_count, 1);
        let second = transfer(&archive, &dest).unwrap();
        assert_eq!(second.operations_count, 1);
        assert_eq!(first.bytes_moved, second.bytes_moved);

        assert!(matches!(
            transfer(&out.path().join("missing.tar.gz"), &dest),
            Err(StagingError::MissingArchive(_))
        ));
    }

    #[test]
    fn stage_reproduces_the_tree_in_one_transfer() {
        let src = tempfile::tempdir().unwrap();
        write_tree(
            src.path(),
            &[("a.txt", b"alpha"), ("b.txt", b"beta"), ("c/d.txt", b"dee")],
        );
        let out = tempfile::tempdir().unwrap();
        let dest = out.path().join("dest");
        let report = stage(src.path(), &dest).unwrap();
        assert_eq!(report.receipt.operations_count, 1);
        assert_eq!(report.manifest.count, 3);
        for file in &report.manifest.files {
            assert_eq!(
                fs::read(dest.join(&file.path)).unwrap(),
                fs::read(src.path().join(&file.path)).unwrap()
            );
        }
    }

    #[test]
    fn stage_of_empty_dir_creates_empty_destination() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let dest = out.path().join("dest");
        let report = stage(src.path(), &dest).unwrap();
        assert_eq!(report.manifest.count, 0);
        assert!(dest.is_dir());
        assert_eq!(fs::read_dir(&dest).unwrap().count(), 0);
    }

    #[test]
    fn stage_into_unwritable_destination_fails_without_partial_tree() {
        let src = tempfile::tempdir().unwrap();
        write_tree(src.path(), &[("a.txt", b"alpha")]);
        let out = tempfile::tempdir().unwrap();
        // A regular file where a parent directory is needed blocks the
        // destination regardless of process privileges.
        let blocker = out.path().join("blocker");
        fs::write(&blocker, b"in the way").unwrap();

        let dest = blocker.join("dest");
        let result = stage(src.path(), &dest);
        assert!(result.is_err());
        assert!(!dest.exists());
        assert_eq!(fs::read(&blocker).unwrap(), b"in the way");
    }

    #[test]
    fn manifest_is_deterministic_for_a_tree() {
        let src = tempfile::tempdir().unwrap();
        write_tree(src.path(), &[("a.txt", b"alpha"), ("b.txt", b"beta")]);
        let out = tempfile::tempdir().unwrap();
        let created = timefmt::parse_entry_time("2024-01-01T00:00:00Z").unwrap();
        let m1 = package_at(src.path(), &out.path().join("1.tar.gz"), created).unwrap();
        let m2 = package_at(src.path(), &out.path().join("2.tar.gz"), created).unwrap();
        assert_eq!(
            serde_json::to_string(&m1).unwrap(),
            serde_json::to_string(&m2).unwrap()
        );
    }
}
