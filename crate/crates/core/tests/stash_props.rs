//! Stash properties: keystream vectors against an independent
//! implementation, CRC oracle, carving resistance, digest disruption, and
//! the tail-placement/disjointness contracts.

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use stashkit::archive::{pack, ArchiveEntry, GzipLevel};
use stashkit::stash::{
    crc32, default_signatures, embed, extract, keystream, scan, scramble, update, EmbedConfig,
    Keystream, Signature, StashError,
};

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    fs::read(&path).unwrap_or_else(|e| panic!("fixture {path:?}: {e}"))
}

// ---------------------------------------------------------------------------
// independent oracles
// ---------------------------------------------------------------------------

/// Bit-at-a-time CRC32 (reflected, poly 0xEDB88320), written straight from
/// the definition as a second route beside the table-driven crate.
fn crc32_oracle(data: &[u8]) -> u32 {
    let mut crc: u32 = 0xFFFF_FFFF;
    for &byte in data {
        crc ^= byte as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ 0xEDB8_8320
            } else {
                crc >> 1
            };
        }
    }
    crc ^ 0xFFFF_FFFF
}

/// Second implementation of the xorshift64* byte stream, structured as an
/// explicit word loop rather than a generator type.
fn keystream_oracle(seed: u64, length: usize) -> Vec<u8> {
    assert_ne!(seed, 0);
    let mut out = Vec::with_capacity(length + 8);
    let mut state = seed;
    while out.len() < length {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        let word = (state as u128 * 0x2545_F491_4F6C_DD1D_u128) as u64;
        out.extend_from_slice(&word.to_le_bytes());
    }
    out.truncate(length);
    out
}

#[test]
fn crc32_standard_check_value() {
    assert_eq!(crc32(b"123456789"), 0xCBF43926);
    assert_eq!(crc32_oracle(b"123456789"), 0xCBF43926);
}

#[test]
fn keystream_matches_frozen_vectors() {
    assert_eq!(keystream(1, 8).unwrap(), fixture("keystream_seed1_8.bin"));
    assert_eq!(keystream(1, 64).unwrap(), fixture("keystream_seed1_64.bin"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn crc32_agrees_with_bitwise_oracle(data in proptest::collection::vec(any::<u8>(), 0..4096)) {
        prop_assert_eq!(crc32(&data), crc32_oracle(&data));
    }

    #[test]
    fn keystream_agrees_with_oracle(seed in 1u64.., len in 0usize..material_limit()) {
        prop_assert_eq!(keystream(seed, len).unwrap(), keystream_oracle(seed, len));
    }

    #[test]
    fn embed_extract_round_trip(
        payload in proptest::collection::vec(any::<u8>(), 0..32_768),
        obfuscate in any::<bool>(),
        seed in 1u64..,
        nonce_len in 0u64..8192,
    ) {
        let mut image = vec![0u8; 1 << 20];
        let cfg = EmbedConfig {
            obfuscate,
            seed,
            nonce_len,
            safety_margin: 64 << 10,
            ..EmbedConfig::default()
        };
        let manifest = embed(&mut image, &payload, &cfg, &mut rng(7)).unwrap();
        // tail placement
        prop_assert_eq!(manifest.payload_offset, (1 << 20) - payload.len() as u64);
        prop_assert_eq!(manifest.nonce_offset, manifest.payload_offset - nonce_len);
        prop_assert_eq!(extract(&mut image, &manifest).unwrap(), payload);
    }

    #[test]
    fn embed_and_scramble_stay_inside_their_regions(
        payload in proptest::collection::vec(any::<u8>(), 1..4096),
        nonce_len in 1u64..4096,
    ) {
        let mut image = vec![0x5Au8; 256 << 10];
        let before = image.clone();
        let cfg = EmbedConfig {
            nonce_len,
            safety_margin: 16 << 10,
            ..EmbedConfig::default()
        };
        let manifest = embed(&mut image, &payload, &cfg, &mut rng(11)).unwrap();
        scramble(&mut image, &manifest, &mut rng(13)).unwrap();
        let start = manifest.nonce_offset as usize;
        prop_assert_eq!(&image[..start], &before[..start]);
    }
}

const fn material_limit() -> usize {
    4096
}

fn rng(seed: u64) -> Keystream {
    Keystream::new(seed).unwrap()
}

// ---------------------------------------------------------------------------
// carving and digest disruption
// ---------------------------------------------------------------------------

/// A payload bristling with carvable magics: a real gzip stream plus PNG
/// and ELF prefixes inside file bodies.
fn magic_laden_payload() -> Vec<u8> {
    let tree = vec![
        ArchiveEntry::dir("opt", 0o755),
        ArchiveEntry::file(
            "opt/shot.png",
            0o644,
            [&[0x89u8, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A][..], &[7u8; 300][..]].concat(),
        ),
        ArchiveEntry::file(
            "opt/tool",
            0o755,
            [&[0x7Fu8, 0x45, 0x4C, 0x46, 2, 1, 1, 0][..], &[9u8; 500][..]].concat(),
        ),
    ];
    // gzip wrapping makes the payload itself start with 1F 8B
    pack(&tree, Some(GzipLevel::default())).unwrap()
}

#[test]
fn obfuscated_stash_defeats_signature_carving() {
    let payload = magic_laden_payload();
    assert_eq!(payload[..2], [0x1F, 0x8B]);

    let mut image = vec![0u8; 8 << 20];
    let cfg = EmbedConfig {
        obfuscate: true,
        seed: 0x00D1_5EA5_E0DD_BA11,
        ..EmbedConfig::default()
    };
    let manifest = embed(&mut image, &payload, &cfg, &mut rng(17)).unwrap();

    let sigs = vec![
        Signature::new("gzip", vec![0x1F, 0x8B]),
        Signature::new("png", vec![0x89, 0x50, 0x4E, 0x47]),
        Signature::new("elf", vec![0x7F, 0x45, 0x4C, 0x46]),
    ];
    let hits = scan(&mut image, &sigs).unwrap();
    assert_eq!(hits, Vec::new(), "whitened image must carry no magics");

    // Round trip still intact.
    assert_eq!(extract(&mut image, &manifest).unwrap(), payload);
}

#[test]
fn plain_stash_is_trivially_carvable() {
    let payload = magic_laden_payload();
    let mut image = vec![0u8; 8 << 20];
    let manifest = embed(&mut image, &payload, &EmbedConfig::default(), &mut rng(19)).unwrap();
    let hits = scan(&mut image, &[Signature::new("gzip", vec![0x1F, 0x8B])]).unwrap();
    assert!(hits.iter().any(|h| h.offset == manifest.payload_offset));
}

#[test]
fn default_signature_set_is_wellformed() {
    let sigs = default_signatures();
    assert!(sigs.iter().any(|s| s.name == "gzip"));
    let mut image = vec![0u8; 1024];
    scan(&mut image, &sigs).unwrap();
}

#[test]
fn twenty_scrambles_twenty_distinct_digests() {
    let payload = b"constant payload under scrutiny".to_vec();
    let mut image = vec![0u8; 4 << 20];
    let cfg = EmbedConfig {
        nonce_len: 16, // smallest region that keeps collision odds negligible
        ..EmbedConfig::default()
    };
    let manifest = embed(&mut image, &payload, &cfg, &mut rng(23)).unwrap();

    let mut digests = vec![crc32(&image)];
    let payload_digest = crc32(&extract(&mut image, &manifest).unwrap());
    for i in 0..20u64 {
        scramble(&mut image, &manifest, &mut rng(1000 + i)).unwrap();
        digests.push(crc32(&image));
        assert_eq!(crc32(&extract(&mut image, &manifest).unwrap()), payload_digest);
    }
    for (i, a) in digests.iter().enumerate() {
        for b in &digests[i + 1..] {
            assert_ne!(a, b, "digests must be pairwise distinct");
        }
    }
}

#[test]
fn update_shrink_leaves_no_carvable_tail() {
    let tree = vec![
        ArchiveEntry::dir("srv", 0o755),
        ArchiveEntry::file("srv/blob", 0o644, vec![0xABu8; 2000]),
    ];
    let payload = pack(&tree, Some(GzipLevel::default())).unwrap();
    let mut image = vec![0u8; 4 << 20];
    let cfg = EmbedConfig {
        obfuscate: true,
        seed: 31337,
        ..EmbedConfig::default()
    };
    let manifest = embed(&mut image, &payload, &cfg, &mut rng(29)).unwrap();

    let overlay = vec![ArchiveEntry::file("srv/blob", 0o644, b"tiny".to_vec())];
    let updated = update(&mut image, &manifest, &overlay, &mut rng(31)).unwrap();
    assert!(updated.payload_len < manifest.payload_len);

    // Scan the whole image: the only gzip magic allowed is none at all
    // (obfuscated payload), and in particular nothing in the vacated span.
    let hits = scan(&mut image, &[Signature::new("gzip", vec![0x1F, 0x8B])]).unwrap();
    assert_eq!(hits, Vec::new());

    let entries = stashkit::archive::unpack(&extract(&mut image, &updated).unwrap()).unwrap();
    assert_eq!(entries[1].body, b"tiny");
}

#[test]
fn extract_rejects_wrong_manifest() {
    let mut image = vec![0u8; 2 << 20];
    let good = embed(&mut image, b"payload", &EmbedConfig::default(), &mut rng(37)).unwrap();
    let mut wrong = good.clone();
    wrong.payload_crc32 ^= 1;
    assert!(matches!(
        extract(&mut image, &wrong),
        Err(StashError::CrcMismatch { .. })
    ));
}

#[test]
fn thirty_two_mib_payload_lands_at_the_midpoint_of_a_64_mib_image() {
    const MIB: usize = 1 << 20;
    let mut image = vec![0u8; 64 * MIB];
    let payload = vec![0xA7u8; 32 * MIB];
    let manifest = embed(&mut image, &payload, &EmbedConfig::default(), &mut rng(41)).unwrap();
    assert_eq!(manifest.payload_offset, (64 * MIB - 32 * MIB) as u64);
    assert_eq!(extract(&mut image, &manifest).unwrap(), payload);
}
