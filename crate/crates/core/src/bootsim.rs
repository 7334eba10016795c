//! Simulated userinit boot chain: SELinux gate, memory-only staging,
//! stash extraction, chroot activation, integrity scramble, ADB lockdown.
//!
//! Nothing here needs elevated rights: the "memory-only filesystem" is a
//! staging directory, the chroot is path rebinding inside the process, and
//! the ADB state is a flag set in the report. What the simulator pins down
//! is the contract: event ordering, denial behavior and the final flags.

use std::fs;
use std::io::{self, Write};
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

use rand::RngCore;
use thiserror::Error;

use crate::archive::{self, ArchiveEntry, ArchiveError};
use crate::stash::{self, StashError, StashManifest};
use crate::store::ByteStore;

/// SELinux operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SePolicyMode {
    /// Policy is enforced: disallowed actions are denied.
    Enforcing,
    /// Policy is not enforced: disallowed actions proceed but are logged.
    Permissive,
}

impl FromStr for SePolicyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "enforcing" => Ok(SePolicyMode::Enforcing),
            "permissive" => Ok(SePolicyMode::Permissive),
            other => Err(format!("unknown SELinux mode {other:?}")),
        }
    }
}

/// Outcome of checking one action against the policy table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Allowed,
    Denied,
    /// Permissive mode: allowed, but a would-deny record is logged.
    AllowedLogged,
}

/// Actions the policy table disallows by default. Everything else is
/// allowed in both modes.
const DISALLOWED_ACTIONS: [&str; 2] = ["chroot_activate", "mount_tmpfs"];

/// Total policy function over (mode, action).
pub fn policy_check(mode: SePolicyMode, action: &str) -> Decision {
    let disallowed = DISALLOWED_ACTIONS.contains(&action);
    match (mode, disallowed) {
        (_, false) => Decision::Allowed,
        (SePolicyMode::Enforcing, true) => Decision::Denied,
        (SePolicyMode::Permissive, true) => Decision::AllowedLogged,
    }
}

/// Steps of the simulated boot, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootStep {
    PolicyChecked,
    TmpfsCreated,
    StashExtracted,
    ArchiveUnpacked,
    ChrootActivated,
    NonceScrambled,
    AdbDisabled,
    UiGate,
}

impl BootStep {
    pub fn as_str(self) -> &'static str {
        match self {
            BootStep::PolicyChecked => "policy_checked",
            BootStep::TmpfsCreated => "tmpfs_created",
            BootStep::StashExtracted => "stash_extracted",
            BootStep::ArchiveUnpacked => "archive_unpacked",
            BootStep::ChrootActivated => "chroot_activated",
            BootStep::NonceScrambled => "nonce_scrambled",
            BootStep::AdbDisabled => "adb_disabled",
            BootStep::UiGate => "ui_gate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Ok,
    Denied,
    Failed,
}

impl StepOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            StepOutcome::Ok => "ok",
            StepOutcome::Denied => "denied",
            StepOutcome::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootEvent {
    pub step: BootStep,
    pub unix_millis: u64,
    pub outcome: StepOutcome,
}

/// Device-level flags after the boot attempt. Stock state is everything
/// on; a successful covert boot forces the ADB pair off while the GUI
/// keeps claiming ADB is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceFlags {
    pub adb_enabled: bool,
    pub adb_root: bool,
    pub gui_shows_adb: bool,
}

impl DeviceFlags {
    fn stock() -> Self {
        DeviceFlags {
            adb_enabled: true,
            adb_root: true,
            gui_shows_adb: true,
        }
    }
}

/// Why a step failed, preserving the source error for exit-code mapping.
#[derive(Debug, Error)]
pub enum BootFailure {
    #[error(transparent)]
    Stash(#[from] StashError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error("staging i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Ordered, auditable record of one boot attempt.
#[derive(Debug)]
pub struct BootReport {
    pub events: Vec<BootEvent>,
    pub final_flags: DeviceFlags,
    pub succeeded: bool,
    /// Set when a step after the policy gate failed.
    pub failure: Option<BootFailure>,
}

impl BootReport {
    pub fn event_index(&self, step: BootStep) -> Option<usize> {
        self.events.iter().position(|e| e.step == step)
    }

    /// `key = value` rendering, same line format as the stash manifest.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("succeeded = {}\n", self.succeeded));
        out.push_str(&format!("adb_enabled = {}\n", self.final_flags.adb_enabled));
        out.push_str(&format!("adb_root = {}\n", self.final_flags.adb_root));
        out.push_str(&format!(
            "gui_shows_adb = {}\n",
            self.final_flags.gui_shows_adb
        ));
        if let Some(failure) = &self.failure {
            out.push_str(&format!("failure = {failure}\n"));
        }
        for (i, event) in self.events.iter().enumerate() {
            out.push_str(&format!(
                "event.{i} = {} {} {}\n",
                event.step.as_str(),
                event.unix_millis,
                event.outcome.as_str()
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum BootError {
    #[error("staging directory {0:?} is not empty")]
    StagingNotEmpty(PathBuf),
    #[error("staging setup failed: {0}")]
    Io(#[from] io::Error),
}

/// Boot knobs. `base_unix_ms` seeds the event timestamps so reports are
/// byte-stable under a fixed clock; the ui_gate delay is modeled as
/// timestamp arithmetic, not a wall-clock sleep.
#[derive(Debug, Clone, Default)]
pub struct BootConfig {
    pub ui_gate_delay_ms: u64,
    pub base_unix_ms: u64,
}

/// Root-directory rebinding: path resolution for the rest of the run goes
/// through here, never above `root`.
#[derive(Debug, Clone)]
pub struct Chroot {
    root: PathBuf,
}

impl Chroot {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Chroot { root: root.into() }
    }

    /// Rebind `path` under the chroot root. Returns `None` when the path
    /// would escape (any `..` component).
    pub fn resolve(&self, path: &str) -> Option<PathBuf> {
        let mut out = self.root.clone();
        for component in Path::new(path).components() {
            match component {
                Component::Normal(c) => out.push(c),
                Component::RootDir | Component::CurDir => {}
                Component::ParentDir | Component::Prefix(_) => return None,
            }
        }
        Some(out)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

/// Conventional entry points probed when recording the chroot activation.
const ENTRY_POINTS: [&str; 4] = ["init", "sbin/init", "etc/init", "userinit.sh"];
/// Sentinel file written through the chroot once it is active.
pub const ACTIVATED_SENTINEL: &str = ".activated";

/// Run one simulated boot.
///
/// Permissive mode walks the full chain and returns a succeeded report;
/// Enforcing mode stops at the policy gate with a single Denied event and
/// touches neither the image nor the staging directory. Step failures
/// after the gate are recorded in the report (`succeeded = false`,
/// `failure` set) rather than returned as errors.
pub fn boot<S: ByteStore, R: RngCore + ?Sized>(
    image: &mut S,
    manifest: &StashManifest,
    mode: SePolicyMode,
    staging_dir: &Path,
    cfg: &BootConfig,
    rng: &mut R,
) -> Result<BootReport, BootError> {
    let mut now = cfg.base_unix_ms;
    let mut tick = move || {
        let t = now;
        now += 1;
        t
    };
    let mut report = BootReport {
        events: Vec::new(),
        final_flags: DeviceFlags::stock(),
        succeeded: false,
        failure: None,
    };

    // Step 1: policy gate over the actions the chain needs.
    let decisions: Vec<(&str, Decision)> = ["mount_tmpfs", "chroot_activate"]
        .into_iter()
        .map(|action| (action, policy_check(mode, action)))
        .collect();
    if decisions.iter().any(|(_, d)| *d == Decision::Denied) {
        report.events.push(BootEvent {
            step: BootStep::PolicyChecked,
            unix_millis: tick(),
            outcome: StepOutcome::Denied,
        });
        return Ok(report);
    }
    let policy_ts = tick();
    report.events.push(BootEvent {
        step: BootStep::PolicyChecked,
        unix_millis: policy_ts,
        outcome: StepOutcome::Ok,
    });
    write_avc_log(staging_dir, policy_ts, &decisions)?;

    // Step 2: the memory-only filesystem, modeled as a staging directory.
    if staging_dir.exists() {
        if !staging_dir.is_dir() || fs::read_dir(staging_dir)?.next().is_some() {
            return Err(BootError::StagingNotEmpty(staging_dir.to_path_buf()));
        }
    } else {
        fs::create_dir_all(staging_dir)?;
    }
    report.events.push(BootEvent {
        step: BootStep::TmpfsCreated,
        unix_millis: tick(),
        outcome: StepOutcome::Ok,
    });

    fn fail(report: &mut BootReport, step: BootStep, ts: u64, failure: BootFailure) {
        report.events.push(BootEvent {
            step,
            unix_millis: ts,
            outcome: StepOutcome::Failed,
        });
        report.failure = Some(failure);
    }

    // Step 3: pull the payload out of the image tail.
    let payload = match stash::extract(image, manifest) {
        Ok(p) => p,
        Err(e) => {
            fail(&mut report, BootStep::StashExtracted, tick(), e.into());
            return Ok(report);
        }
    };
    report.events.push(BootEvent {
        step: BootStep::StashExtracted,
        unix_millis: tick(),
        outcome: StepOutcome::Ok,
    });

    // Step 4: unpack the sub-system into staging.
    let entries = match archive::unpack(&payload) {
        Ok(e) => e,
        Err(e) => {
            fail(&mut report, BootStep::ArchiveUnpacked, tick(), e.into());
            return Ok(report);
        }
    };
    if let Err(e) = materialize(&entries, staging_dir) {
        fail(&mut report, BootStep::ArchiveUnpacked, tick(), e.into());
        return Ok(report);
    }
    report.events.push(BootEvent {
        step: BootStep::ArchiveUnpacked,
        unix_millis: tick(),
        outcome: StepOutcome::Ok,
    });

    // Step 5: activate the chroot and record the entry point.
    let chroot = Chroot::new(staging_dir);
    let entry_point = ENTRY_POINTS
        .iter()
        .find(|ep| entries.iter().any(|e| e.name == **ep))
        .copied()
        .unwrap_or("/");
    let sentinel = chroot
        .resolve(ACTIVATED_SENTINEL)
        .expect("sentinel path cannot escape");
    if let Err(e) = fs::write(&sentinel, format!("{entry_point}\n")) {
        fail(&mut report, BootStep::ChrootActivated, tick(), e.into());
        return Ok(report);
    }
    report.events.push(BootEvent {
        step: BootStep::ChrootActivated,
        unix_millis: tick(),
        outcome: StepOutcome::Ok,
    });

    // Step 6: integrity disruption.
    if let Err(e) = stash::scramble(image, manifest, rng) {
        fail(&mut report, BootStep::NonceScrambled, tick(), e.into());
        return Ok(report);
    }
    report.events.push(BootEvent {
        step: BootStep::NonceScrambled,
        unix_millis: tick(),
        outcome: StepOutcome::Ok,
    });

    // Step 7: ADB lockdown. The GUI keeps claiming ADB is on.
    report.final_flags.adb_enabled = false;
    report.final_flags.adb_root = false;
    report.final_flags.gui_shows_adb = true;
    report.events.push(BootEvent {
        step: BootStep::AdbDisabled,
        unix_millis: tick(),
        outcome: StepOutcome::Ok,
    });

    // Step 8: the Android UI comes up strictly after the chain.
    let ui_ts = tick() + cfg.ui_gate_delay_ms;
    report.events.push(BootEvent {
        step: BootStep::UiGate,
        unix_millis: ui_ts,
        outcome: StepOutcome::Ok,
    });
    report.succeeded = true;
    Ok(report)
}

fn write_avc_log(
    staging_dir: &Path,
    ts: u64,
    decisions: &[(&str, Decision)],
) -> Result<(), BootError> {
    let parent = staging_dir.parent().filter(|p| !p.as_os_str().is_empty());
    let parent = parent.unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)?;
    let mut log = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(parent.join("boot.log"))?;
    for (action, decision) in decisions {
        if *decision == Decision::AllowedLogged {
            writeln!(log, "{ts} AVC would-deny {action}")?;
        }
    }
    Ok(())
}

/// Write an entry tree under `staging_dir`, refusing names that would
/// escape it.
pub fn materialize(entries: &[ArchiveEntry], staging_dir: &Path) -> io::Result<()> {
    let chroot = Chroot::new(staging_dir);
    for entry in entries {
        let path = chroot.resolve(&entry.name).ok_or_else(|| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("entry {:?} escapes the staging tree", entry.name),
            )
        })?;
        if entry.is_dir() {
            fs::create_dir_all(&path)?;
        } else {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, &entry.body)?;
        }
    }
    Ok(())
}
