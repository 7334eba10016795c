//! Hide, locate, refresh and forensically perturb a payload at the tail of
//! a user-data partition image.
//!
//! The payload always sits flush against the end of the image (or against
//! the optional 64-byte index footer), with a nonce region directly below
//! it whose only job is to make successive whole-image digests differ.
//! Payload bytes can be whitened with an xorshift64* keystream so that no
//! carvable magic survives in the image. Where the stash lives is recorded
//! off-device in a `key = value` manifest; nothing on the image points at
//! it unless the indexed footer is explicitly requested.
//!
//! Operations on distinct images are freely concurrent. A single image
//! admits one writer at a time; there is no internal locking, callers
//! serialize mutations.

use std::io;

use rand::RngCore;
use thiserror::Error;

use crate::archive::{self, ArchiveEntry, ArchiveError, GzipLevel, GZIP_MAGIC};
use crate::store::ByteStore;

/// Nonce region size used when the caller does not pick one: a single
/// flash-page-sized block directly below the payload.
pub const DEFAULT_NONCE_LEN: u64 = 4096;
/// Stand-in for the free-space check a real dd run would need.
pub const DEFAULT_SAFETY_MARGIN: u64 = 1024 * 1024;
/// Size of the optional index footer at the image tail.
pub const FOOTER_LEN: u64 = 64;

const FOOTER_MAGIC: &[u8; 8] = b"CHRSTASH";
const FOOTER_VERSION: u16 = 1;
// Salt decorrelating the vacated-region fill stream from the payload
// keystream when both derive from the same seed.
const FILL_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum StashError {
    #[error("payload needs {needed} bytes of tail space but the image has {available}")]
    PayloadTooLarge { needed: u64, available: u64 },
    #[error("keystream seed must be nonzero")]
    ZeroSeed,
    #[error("payload crc32 mismatch: manifest says {expected:#010x}, image has {actual:#010x}")]
    CrcMismatch { expected: u32, actual: u32 },
    #[error("region out of bounds: {0}")]
    OutOfBounds(String),
    #[error("scan pattern {0:?} is empty")]
    EmptyPattern(String),
    #[error("scan pattern {name:?} is {len} bytes, limit is 64")]
    PatternTooLong { name: String, len: usize },
    #[error("manifest parse error: {0}")]
    ManifestParse(String),
    #[error("index footer invalid: {0}")]
    FooterInvalid(String),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error("image i/o error: {0}")]
    Io(#[from] io::Error),
}

/// IEEE-reflected CRC32 (polynomial 0xEDB88320) over `data`.
pub fn crc32(data: &[u8]) -> u32 {
    crc32fast::hash(data)
}

// ---------------------------------------------------------------------------
// keystream
// ---------------------------------------------------------------------------

/// xorshift64* generator emitting the byte stream used for whitening.
///
/// Each step: `s ^= s >> 12; s ^= s << 25; s ^= s >> 27;` then emit
/// `s * 0x2545F4914F6CDD1D` as 8 little-endian bytes.
#[derive(Debug, Clone)]
pub struct Keystream {
    state: u64,
}

impl Keystream {
    pub fn new(seed: u64) -> Result<Self, StashError> {
        if seed == 0 {
            return Err(StashError::ZeroSeed);
        }
        Ok(Keystream { state: seed })
    }

    fn next_word(&mut self) -> u64 {
        let mut s = self.state;
        s ^= s >> 12;
        s ^= s << 25;
        s ^= s >> 27;
        self.state = s;
        s.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }
}

impl RngCore for Keystream {
    fn next_u32(&mut self) -> u32 {
        self.next_word() as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let word = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }
}

/// First `length` bytes of the keystream for `seed`.
pub fn keystream(seed: u64, length: usize) -> Result<Vec<u8>, StashError> {
    let mut ks = Keystream::new(seed)?;
    let mut out = vec![0u8; length];
    ks.fill_bytes(&mut out);
    Ok(out)
}

/// XOR `data` in place with the keystream for `seed`. Applying it twice
/// restores the input.
pub fn apply_keystream(data: &mut [u8], seed: u64) -> Result<(), StashError> {
    let mut ks = Keystream::new(seed)?;
    for chunk in data.chunks_mut(8) {
        let word = ks.next_word().to_le_bytes();
        for (b, k) in chunk.iter_mut().zip(word.iter()) {
            *b ^= k;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

/// Off-device record of where the payload sits and how to verify it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StashManifest {
    pub image_size: u64,
    pub payload_offset: u64,
    pub payload_len: u64,
    pub payload_crc32: u32,
    pub obfuscated: bool,
    /// Present iff `obfuscated`; never zero.
    pub seed: Option<u64>,
    pub nonce_offset: u64,
    pub nonce_len: u64,
    pub created_unix: u64,
}

impl StashManifest {
    /// Internal-consistency checks; geometry against a concrete image is
    /// checked by the operations themselves.
    pub fn validate(&self) -> Result<(), StashError> {
        let payload_end = self
            .payload_offset
            .checked_add(self.payload_len)
            .ok_or_else(|| StashError::OutOfBounds("payload range overflows".into()))?;
        if payload_end > self.image_size {
            return Err(StashError::OutOfBounds(format!(
                "payload [{}, {}) exceeds image size {}",
                self.payload_offset, payload_end, self.image_size
            )));
        }
        let nonce_end = self
            .nonce_offset
            .checked_add(self.nonce_len)
            .ok_or_else(|| StashError::OutOfBounds("nonce range overflows".into()))?;
        if nonce_end > self.image_size {
            return Err(StashError::OutOfBounds(format!(
                "nonce [{}, {}) exceeds image size {}",
                self.nonce_offset, nonce_end, self.image_size
            )));
        }
        let disjoint = nonce_end <= self.payload_offset || self.nonce_offset >= payload_end;
        if self.nonce_len > 0 && self.payload_len > 0 && !disjoint {
            return Err(StashError::OutOfBounds(
                "nonce region overlaps payload region".into(),
            ));
        }
        if self.obfuscated && self.seed.unwrap_or(0) == 0 {
            return Err(StashError::ZeroSeed);
        }
        Ok(())
    }

    /// Render as the line-oriented `key = value` text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("image_size = {}\n", self.image_size));
        out.push_str(&format!("payload_offset = {}\n", self.payload_offset));
        out.push_str(&format!("payload_len = {}\n", self.payload_len));
        out.push_str(&format!("payload_crc32 = {:#010x}\n", self.payload_crc32));
        out.push_str(&format!("obfuscated = {}\n", self.obfuscated));
        if self.obfuscated {
            if let Some(seed) = self.seed {
                out.push_str(&format!("seed = {seed:#018x}\n"));
            }
        }
        out.push_str(&format!("nonce_offset = {}\n", self.nonce_offset));
        out.push_str(&format!("nonce_len = {}\n", self.nonce_len));
        out.push_str(&format!("created_unix = {}\n", self.created_unix));
        out
    }

    pub fn from_text(text: &str) -> Result<Self, StashError> {
        let mut image_size = None;
        let mut payload_offset = None;
        let mut payload_len = None;
        let mut payload_crc32 = None;
        let mut obfuscated = None;
        let mut seed = None;
        let mut nonce_offset = None;
        let mut nonce_len = None;
        let mut created_unix = None;

        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                StashError::ManifestParse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                StashError::ManifestParse(format!("line {}: bad {what}: {value:?}", lineno + 1))
            };
            match key {
                "image_size" => image_size = Some(parse_u64(value).ok_or_else(|| bad("integer"))?),
                "payload_offset" => {
                    payload_offset = Some(parse_u64(value).ok_or_else(|| bad("integer"))?)
                }
                "payload_len" => payload_len = Some(parse_u64(value).ok_or_else(|| bad("integer"))?),
                "payload_crc32" => {
                    let v = parse_u64(value).ok_or_else(|| bad("checksum"))?;
                    payload_crc32 =
                        Some(u32::try_from(v).map_err(|_| bad("32-bit checksum"))?);
                }
                "obfuscated" => {
                    obfuscated = Some(match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(bad("boolean")),
                    })
                }
                "seed" => seed = Some(parse_u64(value).ok_or_else(|| bad("seed"))?),
                "nonce_offset" => {
                    nonce_offset = Some(parse_u64(value).ok_or_else(|| bad("integer"))?)
                }
                "nonce_len" => nonce_len = Some(parse_u64(value).ok_or_else(|| bad("integer"))?),
                "created_unix" => {
                    created_unix = Some(parse_u64(value).ok_or_else(|| bad("integer"))?)
                }
                other => {
                    return Err(StashError::ManifestParse(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }

        let require = |field: Option<u64>, name: &str| {
            field.ok_or_else(|| StashError::ManifestParse(format!("missing key {name:?}")))
        };
        let manifest = StashManifest {
            image_size: require(image_size, "image_size")?,
            payload_offset: require(payload_offset, "payload_offset")?,
            payload_len: require(payload_len, "payload_len")?,
            payload_crc32: payload_crc32
                .ok_or_else(|| StashError::ManifestParse("missing key \"payload_crc32\"".into()))?,
            obfuscated: obfuscated
                .ok_or_else(|| StashError::ManifestParse("missing key \"obfuscated\"".into()))?,
            seed,
            nonce_offset: require(nonce_offset, "nonce_offset")?,
            nonce_len: require(nonce_len, "nonce_len")?,
            created_unix: require(created_unix, "created_unix")?,
        };
        manifest.validate()?;
        Ok(manifest)
    }
}

fn parse_u64(value: &str) -> Option<u64> {
    if let Some(hex) = value.strip_prefix("0x").or_else(|| value.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        value.parse().ok()
    }
}

// ---------------------------------------------------------------------------
// embed / extract / scramble
// ---------------------------------------------------------------------------

/// Knobs for `embed`. `created_unix` is stamped into the manifest as-is so
/// callers control clock determinism.
#[derive(Debug, Clone)]
pub struct EmbedConfig {
    pub obfuscate: bool,
    pub seed: u64,
    pub nonce_len: u64,
    pub safety_margin: u64,
    /// Also write the 64-byte index footer at the image tail.
    pub indexed: bool,
    pub created_unix: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            obfuscate: false,
            seed: 0,
            nonce_len: DEFAULT_NONCE_LEN,
            safety_margin: DEFAULT_SAFETY_MARGIN,
            indexed: false,
            created_unix: 0,
        }
    }
}

/// Write `payload` at the image tail (below the footer in indexed mode),
/// initialize the nonce region directly before it, and return the manifest
/// that `extract` needs. Bytes outside the nonce+payload(+footer) regions
/// are untouched.
pub fn embed<S: ByteStore, R: RngCore + ?Sized>(
    image: &mut S,
    payload: &[u8],
    cfg: &EmbedConfig,
    rng: &mut R,
) -> Result<StashManifest, StashError> {
    if cfg.obfuscate && cfg.seed == 0 {
        return Err(StashError::ZeroSeed);
    }
    let image_size = image.size()?;
    let reserved = if cfg.indexed { FOOTER_LEN } else { 0 };
    let payload_len = payload.len() as u64;
    let needed = payload_len
        .checked_add(cfg.nonce_len)
        .and_then(|n| n.checked_add(cfg.safety_margin))
        .and_then(|n| n.checked_add(reserved))
        .ok_or(StashError::PayloadTooLarge {
            needed: u64::MAX,
            available: image_size,
        })?;
    if needed > image_size {
        return Err(StashError::PayloadTooLarge {
            needed,
            available: image_size,
        });
    }

    let payload_offset = image_size - reserved - payload_len;
    let nonce_offset = payload_offset - cfg.nonce_len;

    if cfg.nonce_len > 0 {
        let mut nonce = vec![0u8; cfg.nonce_len as usize];
        rng.fill_bytes(&mut nonce);
        image.write_at(nonce_offset, &nonce)?;
    }

    if cfg.obfuscate {
        let mut masked = payload.to_vec();
        apply_keystream(&mut masked, cfg.seed)?;
        image.write_at(payload_offset, &masked)?;
    } else {
        image.write_at(payload_offset, payload)?;
    }

    let manifest = StashManifest {
        image_size,
        payload_offset,
        payload_len,
        payload_crc32: crc32(payload),
        obfuscated: cfg.obfuscate,
        seed: cfg.obfuscate.then_some(cfg.seed),
        nonce_offset,
        nonce_len: cfg.nonce_len,
        created_unix: cfg.created_unix,
    };
    if cfg.indexed {
        write_footer(image, &manifest)?;
    }
    Ok(manifest)
}

/// Read back and de-obfuscate the payload, verifying its checksum.
pub fn extract<S: ByteStore>(
    image: &mut S,
    manifest: &StashManifest,
) -> Result<Vec<u8>, StashError> {
    manifest.validate()?;
    let actual_size = image.size()?;
    let payload_end = manifest.payload_offset + manifest.payload_len;
    if payload_end > actual_size || manifest.payload_offset > actual_size {
        return Err(StashError::OutOfBounds(format!(
            "payload [{}, {}) exceeds actual image size {}",
            manifest.payload_offset, payload_end, actual_size
        )));
    }

    let mut payload = vec![0u8; manifest.payload_len as usize];
    image.read_at(manifest.payload_offset, &mut payload)?;
    if manifest.obfuscated {
        apply_keystream(&mut payload, manifest.seed.ok_or(StashError::ZeroSeed)?)?;
    }

    let actual = crc32(&payload);
    if actual != manifest.payload_crc32 {
        return Err(StashError::CrcMismatch {
            expected: manifest.payload_crc32,
            actual,
        });
    }
    Ok(payload)
}

/// Overwrite the nonce region with fresh entropy so the whole-image digest
/// changes while the payload stays bit-identical. A zero-length nonce
/// region makes this a no-op.
pub fn scramble<S: ByteStore, R: RngCore + ?Sized>(
    image: &mut S,
    manifest: &StashManifest,
    rng: &mut R,
) -> Result<StashManifest, StashError> {
    manifest.validate()?;
    let actual_size = image.size()?;
    if manifest.nonce_offset + manifest.nonce_len > actual_size {
        return Err(StashError::OutOfBounds(format!(
            "nonce region [{}, {}) exceeds actual image size {}",
            manifest.nonce_offset,
            manifest.nonce_offset + manifest.nonce_len,
            actual_size
        )));
    }
    if manifest.nonce_len > 0 {
        let mut nonce = vec![0u8; manifest.nonce_len as usize];
        rng.fill_bytes(&mut nonce);
        image.write_at(manifest.nonce_offset, &nonce)?;
    }
    Ok(manifest.clone())
}

// ---------------------------------------------------------------------------
// signature scan
// ---------------------------------------------------------------------------

/// A named magic-byte pattern for the carving oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub pattern: Vec<u8>,
}

impl Signature {
    pub fn new(name: impl Into<String>, pattern: impl Into<Vec<u8>>) -> Self {
        Signature {
            name: name.into(),
            pattern: pattern.into(),
        }
    }
}

/// The magics a desk-scale carver would look for first.
pub fn default_signatures() -> Vec<Signature> {
    vec![
        Signature::new("gzip", vec![0x1F, 0x8B]),
        Signature::new("png", vec![0x89, 0x50, 0x4E, 0x47]),
        Signature::new("elf", vec![0x7F, 0x45, 0x4C, 0x46]),
        Signature::new("jpeg", vec![0xFF, 0xD8, 0xFF]),
        Signature::new("zip", vec![0x50, 0x4B, 0x03, 0x04]),
    ]
}

/// One pattern occurrence found by `scan`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureHit {
    pub signature_name: String,
    pub offset: u64,
}

const SCAN_CHUNK: usize = 1 << 20;

/// Report every occurrence of every pattern in ascending offset order
/// (ties in signature list order). Overlapping matches are all counted.
/// The image is streamed in chunks, so it never has to fit in memory.
pub fn scan<S: ByteStore>(
    image: &mut S,
    signatures: &[Signature],
) -> Result<Vec<SignatureHit>, StashError> {
    let mut max_len = 0usize;
    for sig in signatures {
        if sig.pattern.is_empty() {
            return Err(StashError::EmptyPattern(sig.name.clone()));
        }
        if sig.pattern.len() > 64 {
            return Err(StashError::PatternTooLong {
                name: sig.name.clone(),
                len: sig.pattern.len(),
            });
        }
        max_len = max_len.max(sig.pattern.len());
    }
    let image_size = image.size()?;
    let mut hits = Vec::new();
    if signatures.is_empty() || image_size == 0 {
        return Ok(hits);
    }

    // First-byte dispatch keeps the per-position work tiny.
    let mut by_first: [Vec<usize>; 256] = std::array::from_fn(|_| Vec::new());
    for (i, sig) in signatures.iter().enumerate() {
        by_first[sig.pattern[0] as usize].push(i);
    }

    let overlap = max_len - 1;
    let mut buf: Vec<u8> = Vec::with_capacity(SCAN_CHUNK + overlap);
    let mut buf_base = 0u64; // image offset of buf[0]
    let mut pos = 0u64; // next unread image offset

    while pos < image_size {
        let take = SCAN_CHUNK.min((image_size - pos) as usize);
        let old_len = buf.len();
        buf.resize(old_len + take, 0);
        image.read_at(pos, &mut buf[old_len..])?;
        pos += take as u64;
        let final_chunk = pos == image_size;

        // Positions in the trailing `overlap` bytes may match patterns that
        // extend into the next chunk; defer them unless this is the end.
        let scan_end = if final_chunk {
            buf.len()
        } else {
            buf.len().saturating_sub(overlap)
        };
        for at in 0..scan_end {
            let rest = &buf[at..];
            for &i in &by_first[rest[0] as usize] {
                let pattern = &signatures[i].pattern;
                if rest.len() >= pattern.len() && &rest[..pattern.len()] == pattern {
                    hits.push(SignatureHit {
                        signature_name: signatures[i].name.clone(),
                        offset: buf_base + at as u64,
                    });
                }
            }
        }

        if !final_chunk {
            let keep_from = scan_end;
            buf.drain(..keep_from);
            buf_base += keep_from as u64;
        }
    }
    Ok(hits)
}

// ---------------------------------------------------------------------------
// update
// ---------------------------------------------------------------------------

/// Re-open the stashed archive, overlay entries by name (replace in place,
/// append new ones), repack with the original compression setting and
/// re-embed. The old stash footprint is overwritten first so no stale
/// payload bytes survive outside the new regions.
pub fn update<S: ByteStore, R: RngCore + ?Sized>(
    image: &mut S,
    manifest: &StashManifest,
    overlay: &[ArchiveEntry],
    rng: &mut R,
) -> Result<StashManifest, StashError> {
    let payload = extract(image, manifest)?;
    let compressed = payload.starts_with(&GZIP_MAGIC);
    let mut entries = archive::unpack(&payload)?;
    for patch in overlay {
        match entries.iter_mut().find(|e| e.name == patch.name) {
            Some(existing) => *existing = patch.clone(),
            None => entries.push(patch.clone()),
        }
    }
    let new_payload = archive::pack(&entries, compressed.then(GzipLevel::default))?;

    // Detect an index footer: a valid one whose geometry matches the
    // manifest means the stash was embedded in indexed mode.
    let indexed = matches!(
        read_footer(image),
        Ok(f) if f.payload_offset == manifest.payload_offset
            && f.payload_len == manifest.payload_len
    );

    // Blank the whole old footprint (nonce through image end) before
    // re-embedding: keystream fill under the manifest seed when obfuscated,
    // caller entropy otherwise.
    let fill_len = (manifest.image_size - manifest.nonce_offset) as usize;
    let mut fill = vec![0u8; fill_len];
    match manifest.seed {
        Some(seed) if manifest.obfuscated => {
            let derived = seed ^ FILL_SEED_SALT;
            let mut ks = Keystream::new(if derived == 0 { FILL_SEED_SALT } else { derived })?;
            ks.fill_bytes(&mut fill);
        }
        _ => rng.fill_bytes(&mut fill),
    }
    image.write_at(manifest.nonce_offset, &fill)?;

    let cfg = EmbedConfig {
        obfuscate: manifest.obfuscated,
        seed: manifest.seed.unwrap_or(0),
        nonce_len: manifest.nonce_len,
        safety_margin: DEFAULT_SAFETY_MARGIN,
        indexed,
        created_unix: manifest.created_unix,
    };
    embed(image, &new_payload, &cfg, rng)
}

// ---------------------------------------------------------------------------
// index footer
// ---------------------------------------------------------------------------

/// Serialize the 64-byte footer for `manifest` and write it at the image
/// tail. Layout (little-endian): magic `CHRSTASH`, version u16, flags u16
/// (bit 0 = obfuscated), payload_len u64, payload_crc32 u32, seed u64,
/// nonce_offset u64, nonce_len u32, zero padding to byte 60, crc32 of the
/// first 60 bytes.
pub fn write_footer<S: ByteStore>(
    image: &mut S,
    manifest: &StashManifest,
) -> Result<(), StashError> {
    let image_size = image.size()?;
    if image_size < FOOTER_LEN {
        return Err(StashError::OutOfBounds(
            "image smaller than the footer".into(),
        ));
    }
    let nonce_len = u32::try_from(manifest.nonce_len)
        .map_err(|_| StashError::FooterInvalid("nonce_len exceeds 32 bits".into()))?;

    let mut footer = [0u8; FOOTER_LEN as usize];
    footer[0..8].copy_from_slice(FOOTER_MAGIC);
    footer[8..10].copy_from_slice(&FOOTER_VERSION.to_le_bytes());
    let flags: u16 = manifest.obfuscated as u16;
    footer[10..12].copy_from_slice(&flags.to_le_bytes());
    footer[12..20].copy_from_slice(&manifest.payload_len.to_le_bytes());
    footer[20..24].copy_from_slice(&manifest.payload_crc32.to_le_bytes());
    footer[24..32].copy_from_slice(&manifest.seed.unwrap_or(0).to_le_bytes());
    footer[32..40].copy_from_slice(&manifest.nonce_offset.to_le_bytes());
    footer[40..44].copy_from_slice(&nonce_len.to_le_bytes());
    let crc = crc32(&footer[..60]);
    footer[60..64].copy_from_slice(&crc.to_le_bytes());
    image.write_at(image_size - FOOTER_LEN, &footer)?;
    Ok(())
}

/// Read and verify the footer, reconstructing a manifest for the image.
/// `created_unix` is not stored in the footer and comes back as 0.
pub fn read_footer<S: ByteStore>(image: &mut S) -> Result<StashManifest, StashError> {
    let image_size = image.size()?;
    if image_size < FOOTER_LEN {
        return Err(StashError::FooterInvalid("image too small".into()));
    }
    let mut footer = [0u8; FOOTER_LEN as usize];
    image.read_at(image_size - FOOTER_LEN, &mut footer)?;
    if &footer[0..8] != FOOTER_MAGIC {
        return Err(StashError::FooterInvalid("magic not found".into()));
    }
    let stored_crc = u32::from_le_bytes(footer[60..64].try_into().unwrap());
    if stored_crc != crc32(&footer[..60]) {
        return Err(StashError::FooterInvalid("checksum mismatch".into()));
    }
    let version = u16::from_le_bytes(footer[8..10].try_into().unwrap());
    if version != FOOTER_VERSION {
        return Err(StashError::FooterInvalid(format!(
            "unsupported version {version}"
        )));
    }
    let flags = u16::from_le_bytes(footer[10..12].try_into().unwrap());
    let payload_len = u64::from_le_bytes(footer[12..20].try_into().unwrap());
    let payload_crc32 = u32::from_le_bytes(footer[20..24].try_into().unwrap());
    let seed = u64::from_le_bytes(footer[24..32].try_into().unwrap());
    let nonce_offset = u64::from_le_bytes(footer[32..40].try_into().unwrap());
    let nonce_len = u32::from_le_bytes(footer[40..44].try_into().unwrap());
    let obfuscated = flags & 1 != 0;

    if payload_len > image_size - FOOTER_LEN {
        return Err(StashError::FooterInvalid("payload length impossible".into()));
    }
    let manifest = StashManifest {
        image_size,
        payload_offset: image_size - FOOTER_LEN - payload_len,
        payload_len,
        payload_crc32,
        obfuscated,
        seed: (seed != 0).then_some(seed),
        nonce_offset,
        nonce_len: nonce_len as u64,
        created_unix: 0,
    };
    manifest.validate()?;
    Ok(manifest)
}
