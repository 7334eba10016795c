//! Command-line surface. Subcommands cover every pipeline stage; the
//! deterministic-mode flags `--seed` and `--clock` appear on everything
//! that consumes randomness or time.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "stashkit",
    version,
    about = "Pack, hide, verify, boot-simulate and trigger a covert sub-system on ordinary files"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pack a directory tree into a newc cpio stream
    Pack(PackArgs),
    /// Unpack a (possibly gzipped) cpio stream into a directory
    Unpack(UnpackArgs),
    /// List archive members without materializing bodies
    List(ListArgs),
    /// Hide a payload at the tail of an image
    Embed(EmbedArgs),
    /// Recover and verify a hidden payload
    Extract(ExtractArgs),
    /// Overlay entries onto the stashed archive and re-embed it
    Update(UpdateArgs),
    /// Refresh the nonce region so the image hashes differently
    Scramble(ScrambleArgs),
    /// Run the signature carver over an image
    Scan(ScanArgs),
    /// Simulate one boot of the hidden sub-system
    Boot(BootArgs),
    /// Input-event tooling
    #[command(subcommand)]
    Gestures(GesturesCommand),
    /// Produce one deterministic camera frame
    Photo(PhotoArgs),
    /// Tether plans and lifecycle tooling
    #[command(subcommand)]
    Tether(TetherCommand),
    /// Serve the remote photo trigger over TCP (one connection)
    Serve(ServeArgs),
    /// Fire the remote trigger against a serving endpoint
    Trigger(TriggerArgs),
}

#[derive(Args, Debug)]
pub struct PackArgs {
    /// Directory tree to pack
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Extra entries as name=path (repeatable)
    #[arg(long = "entry")]
    pub entries: Vec<String>,
    /// Output stream path
    #[arg(long)]
    pub out: PathBuf,
    /// gzip-wrap the stream
    #[arg(long)]
    pub gzip: bool,
    /// gzip level 0-9
    #[arg(long, default_value_t = 6)]
    pub level: u32,
    /// Stamp every entry with this mtime (unix seconds) for reproducible output
    #[arg(long)]
    pub clock: Option<u64>,
}

#[derive(Args, Debug)]
pub struct UnpackArgs {
    /// Archive stream to unpack
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Directory to write the tree into
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ListArgs {
    /// Archive stream to list
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// User-data partition image
    #[arg(long)]
    pub image: PathBuf,
    /// Create/resize the image to this size first (e.g. 64M)
    #[arg(long)]
    pub size: Option<String>,
    /// Payload file to hide
    #[arg(long)]
    pub payload: PathBuf,
    /// Where to write the manifest (stdout when omitted)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Whiten the payload with the keystream
    #[arg(long)]
    pub obfuscate: bool,
    /// Keystream seed, hex u64
    #[arg(long)]
    pub seed: Option<String>,
    /// Nonce region size in bytes
    #[arg(long, default_value_t = stashkit::stash::DEFAULT_NONCE_LEN)]
    pub nonce_len: u64,
    /// Safety margin below the nonce region
    #[arg(long, default_value_t = stashkit::stash::DEFAULT_SAFETY_MARGIN)]
    pub margin: u64,
    /// Also write the discoverable 64-byte index footer
    #[arg(long)]
    pub indexed: bool,
    /// Fixed creation timestamp (unix seconds)
    #[arg(long)]
    pub clock: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Manifest path; use --indexed to read the on-image footer instead
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Locate the stash via the index footer
    #[arg(long)]
    pub indexed: bool,
    /// Output payload path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct UpdateArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of entries to insert/replace by name
    #[arg(long)]
    pub overlay: PathBuf,
    /// Where to write the refreshed manifest (defaults to --manifest)
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
    /// Entropy seed for the fill/nonce, hex u64
    #[arg(long)]
    pub seed: Option<String>,
    /// Stamp overlay entries with this mtime
    #[arg(long)]
    pub clock: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ScrambleArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Entropy seed, hex u64 (system entropy when omitted)
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Patterns as name=hexbytes (repeatable); default carver set when omitted
    #[arg(long = "pattern")]
    pub patterns: Vec<String>,
}

#[derive(Args, Debug)]
pub struct BootArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// enforcing | permissive
    #[arg(long)]
    pub mode: String,
    /// Staging directory for the extracted tree
    #[arg(long)]
    pub staging: PathBuf,
    /// Modeled delay before the ui_gate event
    #[arg(long, default_value_t = 0)]
    pub ui_delay_ms: u64,
    /// Fixed boot clock (unix seconds)
    #[arg(long)]
    pub clock: Option<u64>,
    /// Entropy seed for the scramble step, hex u64
    #[arg(long)]
    pub seed: Option<String>,
    /// Also write the report here
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum GesturesCommand {
    /// Print every record in a packed event stream
    Decode(GestureInArgs),
    /// Detect swipes in a recorded stream
    Detect(GestureDetectArgs),
    /// Follow a stream (file or pipe), reporting swipes as they complete
    Watch(GestureWatchArgs),
}

#[derive(Args, Debug)]
pub struct GestureInArgs {
    /// Packed 16-byte-record stream
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct GestureDetectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Displacement threshold in axis units
    #[arg(long, default_value_t = 120)]
    pub threshold: i32,
    /// Detection window in milliseconds
    #[arg(long, default_value_t = 400)]
    pub window_ms: u64,
    /// Axis code to watch (default ABS_MT_POSITION_X, auto-falls back to ABS_X)
    #[arg(long)]
    pub axis: Option<String>,
}

#[derive(Args, Debug)]
pub struct GestureWatchArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 120)]
    pub threshold: i32,
    #[arg(long, default_value_t = 400)]
    pub window_ms: u64,
    #[arg(long)]
    pub axis: Option<String>,
    /// Capture a photo into this directory on every swipe
    #[arg(long)]
    pub photo_dir: Option<PathBuf>,
    /// back | front
    #[arg(long, default_value = "back")]
    pub camera: String,
    /// Fixed capture clock (unix seconds)
    #[arg(long)]
    pub clock: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PhotoArgs {
    /// back | front
    #[arg(long, default_value = "back")]
    pub camera: String,
    /// Capture clock (unix seconds, defaults to now)
    #[arg(long)]
    pub clock: Option<u64>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum TetherCommand {
    /// Print the bring-up action plan
    PlanUp(TetherPlanUpArgs),
    /// Print the tear-down action plan
    PlanDown(TetherPlanDownArgs),
    /// Replay a lifecycle event sequence
    Sim(TetherSimArgs),
}

#[derive(Args, Debug)]
pub struct TetherPlanUpArgs {
    #[arg(long, default_value = "rndis0")]
    pub iface: String,
    #[arg(long, default_value = "192.168.42.129/24")]
    pub cidr: String,
    #[arg(long, default_value = "192.168.42.1:22")]
    pub endpoint: String,
}

#[derive(Args, Debug)]
pub struct TetherPlanDownArgs {
    /// Session state to tear down from: tunnel_up | active | error | down | iface_up
    #[arg(long, default_value = "active")]
    pub state: String,
    #[arg(long, default_value = "rndis0")]
    pub iface: String,
}

#[derive(Args, Debug)]
pub struct TetherSimArgs {
    /// Comma-separated events: up_cmd,iface_ok,tunnel_ok,data,down_cmd,fail
    #[arg(long)]
    pub events: String,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Bind address, host:port (port 0 picks one)
    #[arg(long, default_value = "127.0.0.1:7569")]
    pub endpoint: String,
    /// Fixed capture clock for served photos
    #[arg(long)]
    pub clock: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TriggerArgs {
    /// Server address, host:port
    #[arg(long)]
    pub endpoint: String,
    /// back | front
    #[arg(long, default_value = "back")]
    pub camera: String,
    /// Send a liveness ping instead of a photo request
    #[arg(long)]
    pub ping: bool,
    #[arg(long, default_value_t = 5_000)]
    pub timeout_ms: u64,
    /// Photo output path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}
