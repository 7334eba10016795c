//! stashkit: covert-payload tooling at desk scale, on ordinary files.
//!
//! The pipeline, end to end:
//!
//! 1. [`archive`] packs a Linux sub-system tree into a newc cpio stream,
//!    optionally gzip-wrapped.
//! 2. [`stash`] hides that payload at the tail of a user-data partition
//!    image, whitened against signature carvers, with an off-device
//!    manifest (or an opt-in on-image footer) recording where it lives,
//!    plus a nonce region that makes every forensic image hash differently.
//! 3. [`bootsim`] replays the boot-time sequence: SELinux gate, staging,
//!    extract, chroot, scramble, ADB lockdown, all before the UI gate.
//! 4. [`gesture`] decodes raw input events and turns a threshold swipe
//!    into a deterministic camera capture.
//! 5. [`tether`] models the USB covert channel: bring-up/tear-down plans,
//!    the tunnel lifecycle, and the framed remote photo trigger.
//!
//! Everything operates on plain files and in-memory buffers; nothing here
//! touches real block devices, kernels or radios.

pub mod archive;
pub mod bootsim;
pub mod gesture;
pub mod stash;
pub mod store;
pub mod tether;

pub use archive::{ArchiveEntry, ArchiveError, GzipLevel};
pub use bootsim::{BootConfig, BootError, BootReport, SePolicyMode};
pub use gesture::{Camera, Gesture, GestureConfig, GestureError, InputEvent};
pub use stash::{EmbedConfig, Keystream, Signature, SignatureHit, StashError, StashManifest};
pub use store::ByteStore;
pub use tether::{ActionPlan, TetherConfig, TetherError, TunnelSession};
