//! Archive properties: round-trips over randomized trees and byte-exact
//! agreement with the reference fixtures under tests/fixtures/.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use stashkit::archive::{list, pack, unpack, ArchiveEntry, GzipLevel, MODE_DIR, MODE_FILE};

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    fs::read(&path).unwrap_or_else(|e| panic!("fixture {path:?}: {e}"))
}

/// The tree make_fixtures.py packed into golden_pack.cpio.
fn golden_tree() -> Vec<ArchiveEntry> {
    let mut etc = ArchiveEntry::dir("etc", 0o755);
    etc.mtime = 1_600_000_000;
    let mut hostname = ArchiveEntry::file("etc/hostname", 0o644, b"tinybox\n".to_vec());
    hostname.mtime = 1_600_000_001;
    let mut init = ArchiveEntry::file(
        "init",
        0o755,
        b"#!/bin/sh\nexec /sbin/real-init\n".to_vec(),
    );
    init.mtime = 1_600_000_002;
    vec![etc, hostname, init]
}

#[test]
fn empty_archive_matches_reference_bytes() {
    assert_eq!(pack(&[], None).unwrap(), fixture("empty.cpio"));
}

#[test]
fn pack_output_is_byte_identical_to_reference_writer() {
    assert_eq!(pack(&golden_tree(), None).unwrap(), fixture("golden_pack.cpio"));
}

#[test]
fn reference_archive_unpacks_with_exact_metadata() {
    // GNU-style fixture: foreign inode/nlink/dev fields and 512-byte block
    // padding must all be tolerated.
    let entries = unpack(&fixture("ref_tree.cpio")).unwrap();
    assert_eq!(entries.len(), 2);

    assert_eq!(entries[0].name, "d");
    assert_eq!(entries[0].mode, MODE_DIR | 0o755);
    assert_eq!(entries[0].mtime, 1_500_000_000);
    assert!(entries[0].body.is_empty());

    assert_eq!(entries[1].name, "d/f");
    assert_eq!(entries[1].mode, MODE_FILE | 0o644);
    assert_eq!(entries[1].uid, 1000);
    assert_eq!(entries[1].gid, 1000);
    assert_eq!(entries[1].mtime, 1_500_000_001);
    assert_eq!(entries[1].body, b"hello from the reference tree\n");
}

#[test]
fn gnu_gzip_wrapped_reference_unpacks_identically() {
    let plain = unpack(&fixture("ref_tree.cpio")).unwrap();
    let wrapped = unpack(&fixture("ref_tree.cpio.gz")).unwrap();
    assert_eq!(plain, wrapped);
}

#[test]
fn list_streams_reference_archive() {
    let listed = list(fixture("ref_tree.cpio").as_slice()).unwrap();
    assert_eq!(listed.len(), 2);
    assert_eq!(listed[0].name, "d");
    assert_eq!(listed[1].size, b"hello from the reference tree\n".len() as u64);
}

// ---------------------------------------------------------------------------
// randomized properties
// ---------------------------------------------------------------------------

/// Random tree generator: unique paths, parents emitted first.
fn tree_strategy() -> impl Strategy<Value = Vec<ArchiveEntry>> {
    let segment = "[a-z]{1,8}";
    let path = proptest::collection::vec(segment, 1..4usize);
    let file = (
        path,
        proptest::collection::vec(any::<u8>(), 0..2048usize),
        0u32..0o1000,
        0u32..2_000_000_000,
    );
    proptest::collection::vec(file, 0..25usize).prop_map(|files| {
        let mut by_name: BTreeMap<String, ArchiveEntry> = BTreeMap::new();
        for (segments, body, perm, mtime) in files {
            let name = segments.join("/");
            for (i, _) in segments.iter().enumerate().skip(1) {
                let dir_name = segments[..i].join("/");
                by_name
                    .entry(dir_name.clone())
                    .or_insert_with(|| ArchiveEntry::dir(dir_name, 0o755));
            }
            // Last segment may collide with an existing dir; skip those.
            if !by_name.contains_key(&name) {
                let mut entry = ArchiveEntry::file(name, perm, body);
                entry.mtime = mtime;
                entry.uid = perm % 3;
                entry.gid = perm % 5;
                by_name.insert(entry.name.clone(), entry);
            }
        }
        // BTreeMap order is ascending by path, which puts every directory
        // before anything inside it.
        by_name.into_values().collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_identity(tree in tree_strategy(), compress in any::<bool>()) {
        let compression = compress.then(GzipLevel::default);
        let bytes = pack(&tree, compression).unwrap();
        prop_assert_eq!(unpack(&bytes).unwrap(), tree);
    }

    #[test]
    fn compression_idempotence(tree in tree_strategy()) {
        let plain = pack(&tree, None).unwrap();
        let wrapped = pack(&tree, Some(GzipLevel::default())).unwrap();
        prop_assert_eq!(unpack(&plain).unwrap(), unpack(&wrapped).unwrap());
    }

    #[test]
    fn list_agrees_with_unpack(tree in tree_strategy(), compress in any::<bool>()) {
        let bytes = pack(&tree, compress.then(GzipLevel::default)).unwrap();
        let entries = unpack(&bytes).unwrap();
        let listed = list(bytes.as_slice()).unwrap();
        prop_assert_eq!(listed.len(), entries.len());
        for (l, e) in listed.iter().zip(&entries) {
            prop_assert_eq!(&l.name, &e.name);
            prop_assert_eq!(l.size, e.body.len() as u64);
            prop_assert_eq!(l.mode, e.mode);
        }
    }

    #[test]
    fn pack_is_deterministic(tree in tree_strategy()) {
        let a = pack(&tree, Some(GzipLevel::default())).unwrap();
        let b = pack(&tree, Some(GzipLevel::default())).unwrap();
        prop_assert_eq!(a, b);
    }
}
