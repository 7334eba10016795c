//! SVR4 "newc" cpio archives with optional gzip wrapping.
//!
//! This is the container for the hidden Linux sub-system: magic `070701`,
//! 110-byte ASCII-hex headers, names and bodies padded to 4-byte
//! boundaries, terminated by a `TRAILER!!!` record. Only regular files and
//! directories are supported. Output is deterministic: inodes are numbered
//! sequentially from 1, the link count is always written as 1, device
//! fields are zero, and the gzip wrapper carries mtime 0 and OS byte 0xFF.

use std::io::{self, Read, Write};

use flate2::read::GzDecoder;
use flate2::{Compression, GzBuilder};
use thiserror::Error;

const MAGIC: &[u8; 6] = b"070701";
const HEADER_LEN: usize = 110;
const TRAILER: &str = "TRAILER!!!";

/// File-type bits within the mode field.
pub const MODE_TYPE_MASK: u32 = 0o170000;
/// Regular-file type bits.
pub const MODE_FILE: u32 = 0o100000;
/// Directory type bits.
pub const MODE_DIR: u32 = 0o040000;

/// gzip magic, also used by the stash scanner.
pub const GZIP_MAGIC: [u8; 2] = [0x1F, 0x8B];

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("duplicate entry name {0:?}")]
    DuplicateName(String),
    #[error("invalid entry name {0:?}")]
    InvalidName(String),
    #[error("entry {0:?} body exceeds the 32-bit newc size limit")]
    BodyTooLarge(String),
    #[error("directory entry {0:?} has a non-empty body")]
    DirectoryWithBody(String),
    #[error("entry {name:?} has unsupported file type bits {mode:#o}")]
    UnsupportedEntryType { name: String, mode: u32 },
    #[error("stream is neither a newc archive nor gzip data")]
    BadMagic,
    #[error("stream ends inside a record")]
    TruncatedStream,
    #[error("header field is not ASCII hex")]
    HeaderFieldNotHex,
    #[error("stream ends without a trailer record")]
    MissingTrailer,
    #[error("invalid gzip stream: {0}")]
    InvalidGzip(String),
    #[error("read error: {0}")]
    Io(#[from] io::Error),
}

/// gzip compression level, 0..=9.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GzipLevel(u32);

impl GzipLevel {
    /// Default level 6: the usual size/speed balance.
    pub const DEFAULT: GzipLevel = GzipLevel(6);

    pub fn new(level: u32) -> Option<Self> {
        (level <= 9).then_some(GzipLevel(level))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl Default for GzipLevel {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// One archive member: a regular file or a directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveEntry {
    /// Path relative to the tree root, no leading `/`.
    pub name: String,
    /// File-type bits plus permissions.
    pub mode: u32,
    pub uid: u32,
    pub gid: u32,
    /// Unix seconds.
    pub mtime: u32,
    /// Empty for directories.
    pub body: Vec<u8>,
}

impl ArchiveEntry {
    pub fn file(name: impl Into<String>, perms: u32, body: Vec<u8>) -> Self {
        ArchiveEntry {
            name: name.into(),
            mode: MODE_FILE | (perms & 0o7777),
            uid: 0,
            gid: 0,
            mtime: 0,
            body,
        }
    }

    pub fn dir(name: impl Into<String>, perms: u32) -> Self {
        ArchiveEntry {
            name: name.into(),
            mode: MODE_DIR | (perms & 0o7777),
            uid: 0,
            gid: 0,
            mtime: 0,
            body: Vec::new(),
        }
    }

    pub fn is_dir(&self) -> bool {
        self.mode & MODE_TYPE_MASK == MODE_DIR
    }

    /// Check the per-entry invariants enforced by `pack`.
    pub fn validate(&self) -> Result<(), ArchiveError> {
        if self.name.is_empty()
            || self.name.contains('\0')
            || self.name.starts_with('/')
            || self.name == TRAILER
        {
            return Err(ArchiveError::InvalidName(self.name.clone()));
        }
        match self.mode & MODE_TYPE_MASK {
            MODE_FILE => {}
            MODE_DIR => {
                if !self.body.is_empty() {
                    return Err(ArchiveError::DirectoryWithBody(self.name.clone()));
                }
            }
            _ => {
                return Err(ArchiveError::UnsupportedEntryType {
                    name: self.name.clone(),
                    mode: self.mode,
                })
            }
        }
        if self.body.len() > u32::MAX as usize {
            return Err(ArchiveError::BodyTooLarge(self.name.clone()));
        }
        Ok(())
    }
}

/// Listing line: metadata without the body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListEntry {
    pub name: String,
    pub size: u64,
    pub mode: u32,
}

/// Serialize entries to a newc stream, optionally gzip-wrapped.
///
/// Entries must have unique, valid names and be ordered parents-first;
/// name uniqueness and per-entry invariants are checked here, parent
/// ordering is the caller's contract.
pub fn pack(
    entries: &[ArchiveEntry],
    compression: Option<GzipLevel>,
) -> Result<Vec<u8>, ArchiveError> {
    for (i, entry) in entries.iter().enumerate() {
        entry.validate()?;
        if entries[..i].iter().any(|e| e.name == entry.name) {
            return Err(ArchiveError::DuplicateName(entry.name.clone()));
        }
    }

    let mut out = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        write_record(
            &mut out,
            &entry.name,
            i as u32 + 1,
            entry.mode,
            entry.uid,
            entry.gid,
            entry.mtime,
            &entry.body,
        );
    }
    write_record(&mut out, TRAILER, 0, 0, 0, 0, 0, &[]);

    match compression {
        None => Ok(out),
        Some(level) => {
            let mut encoder = GzBuilder::new()
                .mtime(0)
                .operating_system(0xFF)
                .write(Vec::new(), Compression::new(level.get()));
            encoder.write_all(&out)?;
            Ok(encoder.finish()?)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn write_record(
    out: &mut Vec<u8>,
    name: &str,
    ino: u32,
    mode: u32,
    uid: u32,
    gid: u32,
    mtime: u32,
    body: &[u8],
) {
    let namesize = name.len() as u32 + 1;
    let nlink = 1u32;
    out.extend_from_slice(MAGIC);
    for field in [
        ino,
        mode,
        uid,
        gid,
        nlink,
        mtime,
        body.len() as u32,
        0, // devmajor
        0, // devminor
        0, // rdevmajor
        0, // rdevminor
        namesize,
        0, // check (always 0 in the 070701 flavor)
    ] {
        let mut buf = [0u8; 8];
        write!(&mut buf[..], "{field:08x}").expect("8-char hex field");
        out.extend_from_slice(&buf);
    }
    out.extend_from_slice(name.as_bytes());
    out.push(0);
    pad_to_4(out);
    out.extend_from_slice(body);
    pad_to_4(out);
}

fn pad_to_4(out: &mut Vec<u8>) {
    while out.len() % 4 != 0 {
        out.push(0);
    }
}

/// Deserialize a newc stream (gzip-wrapped streams are detected by their
/// 1F 8B prefix). Returns entries in archive order, trailer excluded;
/// anything after the trailer is ignored.
pub fn unpack(stream: &[u8]) -> Result<Vec<ArchiveEntry>, ArchiveError> {
    if stream.starts_with(&GZIP_MAGIC) {
        let mut plain = Vec::new();
        GzDecoder::new(stream)
            .read_to_end(&mut plain)
            .map_err(gzip_error)?;
        let raw = parse_records(&mut plain.as_slice(), true)?;
        return Ok(raw.into_iter().map(RawRecord::into_entry).collect());
    }
    let raw = parse_records(&mut { stream }, true)?;
    Ok(raw.into_iter().map(RawRecord::into_entry).collect())
}

/// Same metadata as `unpack` without materializing bodies; reads the
/// stream incrementally so payloads larger than memory can be listed.
pub fn list<R: Read>(mut reader: R) -> Result<Vec<ListEntry>, ArchiveError> {
    let mut prefix = [0u8; 2];
    let n = read_up_to(&mut reader, &mut prefix)?;
    if n == 2 && prefix == GZIP_MAGIC {
        let mut decoder = GzDecoder::new(prefix.as_slice().chain(reader));
        return list_plain(&mut decoder).map_err(|e| match e {
            ArchiveError::Io(err) => gzip_error(err),
            other => other,
        });
    }
    list_plain(&mut prefix[..n].chain(reader))
}

fn list_plain<R: Read>(reader: &mut R) -> Result<Vec<ListEntry>, ArchiveError> {
    let raw = parse_records(reader, false)?;
    Ok(raw
        .into_iter()
        .map(|r| ListEntry {
            name: r.name,
            size: r.size,
            mode: r.mode,
        })
        .collect())
}

fn gzip_error(err: io::Error) -> ArchiveError {
    if err.kind() == io::ErrorKind::UnexpectedEof {
        ArchiveError::TruncatedStream
    } else {
        ArchiveError::InvalidGzip(err.to_string())
    }
}

struct RawRecord {
    name: String,
    mode: u32,
    uid: u32,
    gid: u32,
    mtime: u32,
    size: u64,
    body: Vec<u8>,
}

impl RawRecord {
    fn into_entry(self) -> ArchiveEntry {
        ArchiveEntry {
            name: self.name,
            mode: self.mode,
            uid: self.uid,
            gid: self.gid,
            mtime: self.mtime,
            body: self.body,
        }
    }
}

/// Walk records until the trailer. With `keep_bodies` unset, file data is
/// skipped and only header metadata is returned.
fn parse_records<R: Read>(
    reader: &mut R,
    keep_bodies: bool,
) -> Result<Vec<RawRecord>, ArchiveError> {
    let mut records = Vec::new();
    loop {
        let mut header = [0u8; HEADER_LEN];
        let got = read_up_to(reader, &mut header)?;
        if got == 0 {
            // Clean end at a record boundary mid-archive means the trailer
            // never showed up; an empty stream is no archive at all.
            return Err(if records.is_empty() {
                ArchiveError::BadMagic
            } else {
                ArchiveError::MissingTrailer
            });
        }
        if header[..got.min(6)] != MAGIC[..got.min(6)] {
            return Err(ArchiveError::BadMagic);
        }
        if got < HEADER_LEN {
            return Err(ArchiveError::TruncatedStream);
        }
        let field = |i: usize| parse_hex_field(&header[6 + 8 * i..14 + 8 * i]);
        let mode = field(1)?;
        let uid = field(2)?;
        let gid = field(3)?;
        let mtime = field(5)?;
        let filesize = field(6)?;
        let namesize = field(11)?;
        if namesize == 0 {
            return Err(ArchiveError::InvalidName(String::new()));
        }

        let mut name_buf = vec![0u8; namesize as usize];
        read_exact_or_truncated(reader, &mut name_buf)?;
        skip(reader, pad4_len(HEADER_LEN as u64 + namesize as u64))?;
        let name_end = name_buf.iter().position(|&b| b == 0).unwrap_or(name_buf.len());
        let name = std::str::from_utf8(&name_buf[..name_end])
            .map_err(|_| ArchiveError::InvalidName(String::from_utf8_lossy(&name_buf).into()))?
            .to_string();

        if name == TRAILER {
            return Ok(records);
        }

        let body = if keep_bodies {
            let mut body = vec![0u8; filesize as usize];
            read_exact_or_truncated(reader, &mut body)?;
            body
        } else {
            skip(reader, filesize as u64)?;
            Vec::new()
        };
        skip(reader, pad4_len(filesize as u64))?;

        match mode & MODE_TYPE_MASK {
            MODE_FILE | MODE_DIR => {}
            _ => return Err(ArchiveError::UnsupportedEntryType { name, mode }),
        }
        records.push(RawRecord {
            name,
            mode,
            uid,
            gid,
            mtime,
            size: filesize as u64,
            body,
        });
    }
}

fn parse_hex_field(bytes: &[u8]) -> Result<u32, ArchiveError> {
    if !bytes.iter().all(u8::is_ascii_hexdigit) {
        return Err(ArchiveError::HeaderFieldNotHex);
    }
    let s = std::str::from_utf8(bytes).expect("hex digits are ASCII");
    u32::from_str_radix(s, 16).map_err(|_| ArchiveError::HeaderFieldNotHex)
}

fn pad4_len(len: u64) -> u64 {
    (4 - len % 4) % 4
}

/// Read as many bytes as available up to `buf.len()`; short only at EOF.
fn read_up_to<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize, ArchiveError> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(ArchiveError::Io(e)),
        }
    }
    Ok(filled)
}

fn read_exact_or_truncated<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<(), ArchiveError> {
    if read_up_to(reader, buf)? < buf.len() {
        return Err(ArchiveError::TruncatedStream);
    }
    Ok(())
}

fn skip<R: Read>(reader: &mut R, mut count: u64) -> Result<(), ArchiveError> {
    let mut scratch = [0u8; 4096];
    while count > 0 {
        let chunk = count.min(scratch.len() as u64) as usize;
        read_exact_or_truncated(reader, &mut scratch[..chunk])?;
        count -= chunk as u64;
    }
    Ok(())
}
