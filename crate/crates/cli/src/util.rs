//! Shared CLI plumbing: value parsers, entropy/clock wiring, the stderr
//! logger and the directory-tree loader.

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::RngCore;
use stashkit::archive::ArchiveEntry;
use stashkit::stash::Keystream;

use crate::CliError;

// Entropy derived from --seed must not replay the payload keystream, so
// the seed is salted before it becomes an RNG state.
const ENTROPY_SALT: u64 = 0xD6E8_FEB8_6659_FD93;

/// Parse `--seed` values: hex with or without 0x.
pub fn parse_seed(value: &str) -> Result<u64, CliError> {
    let raw = value
        .strip_prefix("0x")
        .or_else(|| value.strip_prefix("0X"))
        .unwrap_or(value);
    u64::from_str_radix(raw, 16)
        .map_err(|_| CliError::Usage(format!("--seed {value:?} is not a hex u64")))
}

/// Sizes like 1048576, 64K, 32M, 2G.
pub fn parse_size(value: &str) -> Result<u64, CliError> {
    let bad = || CliError::Usage(format!("--size {value:?} is not a byte size"));
    let (digits, shift) = match value.chars().last() {
        Some('k') | Some('K') => (&value[..value.len() - 1], 10),
        Some('m') | Some('M') => (&value[..value.len() - 1], 20),
        Some('g') | Some('G') => (&value[..value.len() - 1], 30),
        _ => (value, 0),
    };
    let n: u64 = digits.trim().parse().map_err(|_| bad())?;
    n.checked_shl(shift).ok_or_else(bad)
}

/// Patterns like gzip=1f8b. Empty byte strings pass through so the
/// scanner itself reports them.
pub fn parse_pattern(value: &str) -> Result<(String, Vec<u8>), CliError> {
    let bad = || CliError::Usage(format!("--pattern {value:?} is not name=hexbytes"));
    let (name, hex) = value.split_once('=').ok_or_else(bad)?;
    if name.is_empty() || hex.len() % 2 != 0 {
        return Err(bad());
    }
    let mut bytes = Vec::with_capacity(hex.len() / 2);
    for pair in hex.as_bytes().chunks(2) {
        let s = std::str::from_utf8(pair).map_err(|_| bad())?;
        bytes.push(u8::from_str_radix(s, 16).map_err(|_| bad())?);
    }
    Ok((name.to_string(), bytes))
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Entropy source: deterministic when a seed is supplied, system otherwise.
pub fn entropy_from(seed: Option<u64>) -> Box<dyn RngCore> {
    match seed {
        Some(seed) => {
            let derived = seed ^ ENTROPY_SALT;
            let state = if derived == 0 { ENTROPY_SALT } else { derived };
            Box::new(Keystream::new(state).expect("nonzero state"))
        }
        None => Box::new(rand::rng()),
    }
}

// ---------------------------------------------------------------------------
// logging
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LogLevel {
    Quiet,
    Info,
    Debug,
}

/// Resolve STASHKIT_LOG (quiet|info|debug); info when unset or unknown.
pub fn log_level() -> LogLevel {
    match std::env::var("STASHKIT_LOG").as_deref() {
        Ok("quiet") => LogLevel::Quiet,
        Ok("debug") => LogLevel::Debug,
        _ => LogLevel::Info,
    }
}

pub fn info(message: impl AsRef<str>) {
    if log_level() >= LogLevel::Info {
        eprintln!("stashkit: {}", message.as_ref());
    }
}

pub fn debug(message: impl AsRef<str>) {
    if log_level() >= LogLevel::Debug {
        eprintln!("stashkit[debug]: {}", message.as_ref());
    }
}

// ---------------------------------------------------------------------------
// directory trees
// ---------------------------------------------------------------------------

/// Load a directory tree as archive entries, parents first, children
/// sorted by name so output is reproducible. `clock` overrides mtimes.
pub fn load_tree(root: &Path, clock: Option<u64>) -> Result<Vec<ArchiveEntry>, CliError> {
    let mut entries = Vec::new();
    walk(root, root, clock, &mut entries)?;
    Ok(entries)
}

fn walk(
    root: &Path,
    dir: &Path,
    clock: Option<u64>,
    out: &mut Vec<ArchiveEntry>,
) -> Result<(), CliError> {
    let mut children: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::path(dir, e))?
        .collect::<Result<_, io::Error>>()
        .map_err(|e| CliError::path(dir, e))?;
    children.sort_by_key(|c| c.file_name());

    for child in children {
        let path = child.path();
        let meta = fs::symlink_metadata(&path).map_err(|e| CliError::path(&path, e))?;
        let name = path
            .strip_prefix(root)
            .expect("child of root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let mtime = match clock {
            Some(t) => t as u32,
            None => meta
                .modified()
                .ok()
                .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
                .map(|d| d.as_secs() as u32)
                .unwrap_or(0),
        };
        if meta.is_dir() {
            let mut entry = ArchiveEntry::dir(name, perms(&meta));
            entry.mtime = mtime;
            out.push(entry);
            walk(root, &path, clock, out)?;
        } else if meta.is_file() {
            let body = fs::read(&path).map_err(|e| CliError::path(&path, e))?;
            let mut entry = ArchiveEntry::file(name, perms(&meta), body);
            entry.mtime = mtime;
            out.push(entry);
        } else {
            return Err(CliError::Usage(format!(
                "{path:?} is neither a regular file nor a directory"
            )));
        }
    }
    Ok(())
}

#[cfg(unix)]
fn perms(meta: &fs::Metadata) -> u32 {
    use std::os::unix::fs::PermissionsExt;
    meta.permissions().mode() & 0o7777
}

#[cfg(not(unix))]
fn perms(meta: &fs::Metadata) -> u32 {
    if meta.permissions().readonly() {
        0o555
    } else {
        0o755
    }
}
