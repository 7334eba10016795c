//! pack / unpack / list / embed / extract / update / scramble / scan / boot

use std::fs::{self, File, OpenOptions};
use std::io::Write;

use stashkit::archive::{self, ArchiveEntry, GzipLevel};
use stashkit::bootsim::{self, BootConfig, BootReport, SePolicyMode, StepOutcome};
use stashkit::stash::{self, EmbedConfig, Signature, StashManifest};

use crate::args::*;
use crate::util;
use crate::CliError;

pub fn pack(args: PackArgs) -> Result<i32, CliError> {
    let mut entries = match &args.input {
        Some(dir) => util::load_tree(dir, args.clock)?,
        None => Vec::new(),
    };
    for pair in &args.entries {
        let (name, path) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--entry {pair:?} is not name=path")))?;
        let body = fs::read(path).map_err(|e| CliError::path(path.as_ref(), e))?;
        let mut entry = ArchiveEntry::file(name, 0o644, body);
        entry.mtime = args.clock.unwrap_or(0) as u32;
        entries.push(entry);
    }

    let compression = if args.gzip {
        Some(
            GzipLevel::new(args.level)
                .ok_or_else(|| CliError::Usage(format!("--level {} is not 0..=9", args.level)))?,
        )
    } else {
        None
    };
    let bytes = archive::pack(&entries, compression)?;
    fs::write(&args.out, &bytes).map_err(|e| CliError::path(&args.out, e))?;
    util::info(format!(
        "packed {} entries into {:?} ({} bytes)",
        entries.len(),
        args.out,
        bytes.len()
    ));
    Ok(0)
}

pub fn unpack(args: UnpackArgs) -> Result<i32, CliError> {
    let bytes = fs::read(&args.input).map_err(|e| CliError::path(&args.input, e))?;
    let entries = archive::unpack(&bytes)?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::path(&args.out, e))?;
    bootsim::materialize(&entries, &args.out).map_err(|e| CliError::path(&args.out, e))?;
    util::info(format!("unpacked {} entries into {:?}", entries.len(), args.out));
    Ok(0)
}

pub fn list(args: ListArgs) -> Result<i32, CliError> {
    let file = File::open(&args.input).map_err(|e| CliError::path(&args.input, e))?;
    let entries = archive::list(file)?;
    let mut out = std::io::stdout().lock();
    for entry in &entries {
        writeln!(out, "{:06o} {} {}", entry.mode, entry.size, entry.name)
            .map_err(CliError::stdout)?;
    }
    Ok(0)
}

fn open_rw(path: &std::path::Path) -> Result<File, CliError> {
    OpenOptions::new()
        .read(true)
        .write(true)
        .open(path)
        .map_err(|e| CliError::path(path, e))
}

fn load_manifest(path: &std::path::Path) -> Result<StashManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::path(path, e))?;
    Ok(StashManifest::from_text(&text)?)
}

pub fn embed(args: EmbedArgs) -> Result<i32, CliError> {
    if let Some(size) = &args.size {
        let size = util::parse_size(size)?;
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(false)
            .open(&args.image)
            .map_err(|e| CliError::path(&args.image, e))?;
        file.set_len(size).map_err(|e| CliError::path(&args.image, e))?;
        util::debug(format!("image {:?} sized to {size} bytes", args.image));
    }
    let payload = fs::read(&args.payload).map_err(|e| CliError::path(&args.payload, e))?;

    let seed = args.seed.as_deref().map(util::parse_seed).transpose()?;
    let mut entropy = util::entropy_from(seed);
    let seed = match (args.obfuscate, seed) {
        (true, None) => {
            // No seed supplied: draw one and let the manifest carry it.
            let drawn = loop {
                let s = entropy.next_u64();
                if s != 0 {
                    break s;
                }
            };
            util::info(format!("drew keystream seed {drawn:#018x}"));
            drawn
        }
        (_, seed) => seed.unwrap_or(0),
    };

    let cfg = EmbedConfig {
        obfuscate: args.obfuscate,
        seed,
        nonce_len: args.nonce_len,
        safety_margin: args.margin,
        indexed: args.indexed,
        created_unix: args.clock.unwrap_or_else(util::unix_now),
    };
    let mut image = open_rw(&args.image)?;
    let manifest = stash::embed(&mut image, &payload, &cfg, entropy.as_mut())?;

    let text = manifest.to_text();
    match &args.manifest {
        Some(path) => fs::write(path, &text).map_err(|e| CliError::path(path, e))?,
        None => print!("{text}"),
    }
    util::info(format!(
        "embedded {} bytes at offset {} of {:?}",
        manifest.payload_len, manifest.payload_offset, args.image
    ));
    Ok(0)
}

pub fn extract(args: ExtractArgs) -> Result<i32, CliError> {
    let mut image = File::open(&args.image).map_err(|e| CliError::path(&args.image, e))?;
    let manifest = match (&args.manifest, args.indexed) {
        (Some(path), false) => load_manifest(path)?,
        (None, true) => stash::read_footer(&mut image)?,
        _ => {
            return Err(CliError::Usage(
                "pass exactly one of --manifest <file> or --indexed".into(),
            ))
        }
    };
    let payload = stash::extract(&mut image, &manifest)?;
    match &args.out {
        Some(path) => fs::write(path, &payload).map_err(|e| CliError::path(path, e))?,
        None => std::io::stdout()
            .lock()
            .write_all(&payload)
            .map_err(CliError::stdout)?,
    }
    util::info(format!("extracted {} bytes, checksum ok", payload.len()));
    Ok(0)
}

pub fn update(args: UpdateArgs) -> Result<i32, CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let overlay = util::load_tree(&args.overlay, args.clock)?;
    let seed = args.seed.as_deref().map(util::parse_seed).transpose()?;
    let mut entropy = util::entropy_from(seed);
    let mut image = open_rw(&args.image)?;
    let updated = stash::update(&mut image, &manifest, &overlay, entropy.as_mut())?;
    let out_path = args.manifest_out.as_ref().unwrap_or(&args.manifest);
    fs::write(out_path, updated.to_text()).map_err(|e| CliError::path(out_path, e))?;
    util::info(format!(
        "updated stash: payload now {} bytes at offset {}",
        updated.payload_len, updated.payload_offset
    ));
    Ok(0)
}

pub fn scramble(args: ScrambleArgs) -> Result<i32, CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let seed = args.seed.as_deref().map(util::parse_seed).transpose()?;
    let mut entropy = util::entropy_from(seed);
    let mut image = open_rw(&args.image)?;
    stash::scramble(&mut image, &manifest, entropy.as_mut())?;
    util::info(format!(
        "scrambled {} nonce bytes at offset {}",
        manifest.nonce_len, manifest.nonce_offset
    ));
    Ok(0)
}

pub fn scan(args: ScanArgs) -> Result<i32, CliError> {
    let signatures = if args.patterns.is_empty() {
        stash::default_signatures()
    } else {
        args.patterns
            .iter()
            .map(|p| util::parse_pattern(p).map(|(name, bytes)| Signature::new(name, bytes)))
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut image = File::open(&args.image).map_err(|e| CliError::path(&args.image, e))?;
    let hits = stash::scan(&mut image, &signatures)?;
    let mut out = std::io::stdout().lock();
    for hit in &hits {
        writeln!(out, "{} {}", hit.offset, hit.signature_name).map_err(CliError::stdout)?;
    }
    util::info(format!("{} hits", hits.len()));
    Ok(0)
}

pub fn boot(args: BootArgs) -> Result<i32, CliError> {
    let manifest = load_manifest(&args.manifest)?;
    let mode: SePolicyMode = args.mode.parse().map_err(CliError::Usage)?;
    let seed = args.seed.as_deref().map(util::parse_seed).transpose()?;
    let mut entropy = util::entropy_from(seed);
    let cfg = BootConfig {
        ui_gate_delay_ms: args.ui_delay_ms,
        base_unix_ms: args.clock.map(|s| s * 1000).unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0)
        }),
    };
    let mut image = open_rw(&args.image)?;
    let report = bootsim::boot(
        &mut image,
        &manifest,
        mode,
        &args.staging,
        &cfg,
        entropy.as_mut(),
    )?;

    let text = report.to_text();
    print!("{text}");
    if let Some(path) = &args.report {
        fs::write(path, &text).map_err(|e| CliError::path(path, e))?;
    }
    Ok(boot_exit_code(&report))
}

fn boot_exit_code(report: &BootReport) -> i32 {
    if report.succeeded {
        return 0;
    }
    if report
        .events
        .iter()
        .any(|e| e.outcome == StepOutcome::Denied)
    {
        return 4;
    }
    match &report.failure {
        Some(failure) => crate::boot_failure_code(failure),
        None => 2,
    }
}
