//! stashkit command-line front end.
//!
//! Every subcommand terminates with one of six exit codes:
//!
//! | code | meaning              |
//! |------|----------------------|
//! | 0    | success              |
//! | 1    | usage error          |
//! | 2    | format/parse error   |
//! | 3    | integrity mismatch   |
//! | 4    | policy denied        |
//! | 5    | transport error      |
//!
//! Diagnostics go to stderr (gated by `STASHKIT_LOG=quiet|info|debug`);
//! machine output goes to stdout.

use std::ffi::OsString;
use std::fmt;
use std::io;
use std::path::Path;

use clap::Parser;

use stashkit::archive::ArchiveError;
use stashkit::bootsim::{BootError, BootFailure};
use stashkit::gesture::GestureError;
use stashkit::stash::StashError;
use stashkit::tether::TetherError;

pub mod args;
mod cmd_image;
mod cmd_trigger;
pub mod util;

use args::{Cli, Command, GesturesCommand, TetherCommand};

/// Anything a command can fail with, unified for exit-code mapping.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io { context: String, source: io::Error },
    Archive(ArchiveError),
    Stash(StashError),
    Gesture(GestureError),
    Tether(TetherError),
    Boot(BootError),
}

impl CliError {
    fn path(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            context: format!("{}", path.display()),
            source,
        }
    }

    fn stdout(source: io::Error) -> Self {
        CliError::Io {
            context: "stdout".to_string(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io { context, source } => write!(f, "{context}: {source}"),
            CliError::Archive(e) => write!(f, "{e}"),
            CliError::Stash(e) => write!(f, "{e}"),
            CliError::Gesture(e) => write!(f, "{e}"),
            CliError::Tether(e) => write!(f, "{e}"),
            CliError::Boot(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ArchiveError> for CliError {
    fn from(e: ArchiveError) -> Self {
        CliError::Archive(e)
    }
}

impl From<StashError> for CliError {
    fn from(e: StashError) -> Self {
        CliError::Stash(e)
    }
}

impl From<GestureError> for CliError {
    fn from(e: GestureError) -> Self {
        CliError::Gesture(e)
    }
}

impl From<TetherError> for CliError {
    fn from(e: TetherError) -> Self {
        CliError::Tether(e)
    }
}

impl From<BootError> for CliError {
    fn from(e: BootError) -> Self {
        CliError::Boot(e)
    }
}

// ---------------------------------------------------------------------------
// exit-code table: every module error constructor maps here, with no
// wildcard arms so a new variant forces a decision.
// ---------------------------------------------------------------------------

pub fn exit_code_for(err: &CliError) -> i32 {
    match err {
        CliError::Usage(_) => 1,
        CliError::Io { .. } => 1,
        CliError::Archive(e) => archive_code(e),
        CliError::Stash(e) => stash_code(e),
        CliError::Gesture(e) => gesture_code(e),
        CliError::Tether(e) => tether_code(e),
        CliError::Boot(e) => boot_code(e),
    }
}

fn archive_code(err: &ArchiveError) -> i32 {
    match err {
        ArchiveError::DuplicateName(_) => 1,
        ArchiveError::Io(_) => 1,
        ArchiveError::InvalidName(_)
        | ArchiveError::BodyTooLarge(_)
        | ArchiveError::DirectoryWithBody(_)
        | ArchiveError::UnsupportedEntryType { .. }
        | ArchiveError::BadMagic
        | ArchiveError::TruncatedStream
        | ArchiveError::HeaderFieldNotHex
        | ArchiveError::MissingTrailer
        | ArchiveError::InvalidGzip(_) => 2,
    }
}

fn stash_code(err: &StashError) -> i32 {
    match err {
        StashError::PayloadTooLarge { .. }
        | StashError::ZeroSeed
        | StashError::EmptyPattern(_)
        | StashError::PatternTooLong { .. }
        | StashError::Io(_) => 1,
        StashError::ManifestParse(_) | StashError::FooterInvalid(_) => 2,
        StashError::CrcMismatch { .. } | StashError::OutOfBounds(_) => 3,
        StashError::Archive(e) => archive_code(e),
    }
}

fn gesture_code(err: &GestureError) -> i32 {
    match err {
        GestureError::TruncatedRecord(_) | GestureError::UnorderedEvents(_) => 2,
    }
}

fn tether_code(err: &TetherError) -> i32 {
    match err {
        TetherError::BadEndpoint(_)
        | TetherError::BadCidr(_)
        | TetherError::NotUp(_)
        | TetherError::InvalidTransition { .. } => 1,
        TetherError::MalformedRequest(_) => 2,
        TetherError::FrameTooLarge(_)
        | TetherError::Truncated
        | TetherError::TransportClosed
        | TetherError::Timeout
        | TetherError::RemoteError(_)
        | TetherError::Io(_) => 5,
    }
}

fn boot_code(err: &BootError) -> i32 {
    match err {
        BootError::StagingNotEmpty(_) => 1,
        BootError::Io(_) => 1,
    }
}

/// Exit code for a failure recorded inside a boot report.
pub fn boot_failure_code(failure: &BootFailure) -> i32 {
    match failure {
        BootFailure::Stash(e) => stash_code(e),
        BootFailure::Archive(e) => archive_code(e),
        BootFailure::Io(_) => 1,
    }
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

/// Parse and run; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };

    match dispatch(cli.command) {
        Ok(code) => code,
        // A reader that stopped consuming stdout is not our error.
        Err(CliError::Io { context, source })
            if context == "stdout" && source.kind() == io::ErrorKind::BrokenPipe =>
        {
            0
        }
        Err(err) => {
            eprintln!("stashkit: error: {err}");
            exit_code_for(&err)
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Pack(args) => cmd_image::pack(args),
        Command::Unpack(args) => cmd_image::unpack(args),
        Command::List(args) => cmd_image::list(args),
        Command::Embed(args) => cmd_image::embed(args),
        Command::Extract(args) => cmd_image::extract(args),
        Command::Update(args) => cmd_image::update(args),
        Command::Scramble(args) => cmd_image::scramble(args),
        Command::Scan(args) => cmd_image::scan(args),
        Command::Boot(args) => cmd_image::boot(args),
        Command::Gestures(GesturesCommand::Decode(args)) => cmd_trigger::gestures_decode(args),
        Command::Gestures(GesturesCommand::Detect(args)) => cmd_trigger::gestures_detect(args),
        Command::Gestures(GesturesCommand::Watch(args)) => cmd_trigger::gestures_watch(args),
        Command::Photo(args) => cmd_trigger::photo(args),
        Command::Tether(TetherCommand::PlanUp(args)) => cmd_trigger::tether_plan_up(args),
        Command::Tether(TetherCommand::PlanDown(args)) => cmd_trigger::tether_plan_down(args),
        Command::Tether(TetherCommand::Sim(args)) => cmd_trigger::tether_sim(args),
        Command::Serve(args) => cmd_trigger::serve(args),
        Command::Trigger(args) => cmd_trigger::trigger(args),
    }
}
