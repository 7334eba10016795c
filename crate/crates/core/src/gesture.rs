//! Linux input-event decoding, swipe detection and the photo trigger.
//!
//! Events are the kernel's packed 16-byte records (32-bit timeval, the
//! handset ABI): `tv_sec u32, tv_usec u32, type u16, code u16, value s32`,
//! all little-endian. Detection watches one absolute axis and fires when
//! the finger moves at least `threshold` units within `window_ms`.

use std::str::FromStr;

use thiserror::Error;

pub const EV_SYN: u16 = 0x00;
pub const EV_KEY: u16 = 0x01;
pub const EV_ABS: u16 = 0x03;
pub const ABS_X: u16 = 0x00;
pub const ABS_MT_POSITION_X: u16 = 0x35;

/// Packed size of one record.
pub const EVENT_SIZE: usize = 16;

#[derive(Debug, Error)]
pub enum GestureError {
    #[error("stream length {0} is not a multiple of 16")]
    TruncatedRecord(usize),
    #[error("events out of order at index {0}")]
    UnorderedEvents(usize),
}

/// One decoded input record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputEvent {
    pub tv_sec: u32,
    pub tv_usec: u32,
    pub etype: u16,
    pub code: u16,
    pub value: i32,
}

impl InputEvent {
    pub fn from_bytes(bytes: &[u8; EVENT_SIZE]) -> Self {
        InputEvent {
            tv_sec: u32::from_le_bytes(bytes[0..4].try_into().unwrap()),
            tv_usec: u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
            etype: u16::from_le_bytes(bytes[8..10].try_into().unwrap()),
            code: u16::from_le_bytes(bytes[10..12].try_into().unwrap()),
            value: i32::from_le_bytes(bytes[12..16].try_into().unwrap()),
        }
    }

    pub fn to_bytes(&self) -> [u8; EVENT_SIZE] {
        let mut out = [0u8; EVENT_SIZE];
        out[0..4].copy_from_slice(&self.tv_sec.to_le_bytes());
        out[4..8].copy_from_slice(&self.tv_usec.to_le_bytes());
        out[8..10].copy_from_slice(&self.etype.to_le_bytes());
        out[10..12].copy_from_slice(&self.code.to_le_bytes());
        out[12..16].copy_from_slice(&self.value.to_le_bytes());
        out
    }

    pub fn timestamp_ms(&self) -> u64 {
        self.tv_sec as u64 * 1000 + self.tv_usec as u64 / 1000
    }

    fn timestamp_us(&self) -> u64 {
        self.tv_sec as u64 * 1_000_000 + self.tv_usec as u64
    }
}

/// Decode a packed stream; the length must be a whole number of records.
pub fn decode_events(stream: &[u8]) -> Result<Vec<InputEvent>, GestureError> {
    if stream.len() % EVENT_SIZE != 0 {
        return Err(GestureError::TruncatedRecord(stream.len()));
    }
    Ok(stream
        .chunks_exact(EVENT_SIZE)
        .map(|chunk| InputEvent::from_bytes(chunk.try_into().expect("16-byte chunk")))
        .collect())
}

/// Pack events back into the wire form.
pub fn encode_events(events: &[InputEvent]) -> Vec<u8> {
    let mut out = Vec::with_capacity(events.len() * EVENT_SIZE);
    for event in events {
        out.extend_from_slice(&event.to_bytes());
    }
    out
}

/// Detection knobs. Defaults: multitouch X axis, 120 units within 400 ms.
#[derive(Debug, Clone)]
pub struct GestureConfig {
    pub axis_code: u16,
    pub threshold: i32,
    pub window_ms: u64,
}

impl Default for GestureConfig {
    fn default() -> Self {
        GestureConfig {
            axis_code: ABS_MT_POSITION_X,
            threshold: 120,
            window_ms: 400,
        }
    }
}

impl GestureConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.threshold <= 0 {
            return Err("threshold must be positive".into());
        }
        if self.window_ms == 0 {
            return Err("window_ms must be positive".into());
        }
        Ok(())
    }
}

/// Pick the axis to watch: the configured one if the stream carries it,
/// otherwise fall back to plain ABS_X.
pub fn resolve_axis(events: &[InputEvent], config: &GestureConfig) -> u16 {
    let has = |code: u16| events.iter().any(|e| e.etype == EV_ABS && e.code == code);
    if has(config.axis_code) || !has(ABS_X) {
        config.axis_code
    } else {
        ABS_X
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GestureKind {
    Swipe,
}

/// A recognized swipe: at least `threshold` units of axis movement within
/// the window, direction carried by the displacement sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gesture {
    pub kind: GestureKind,
    pub start_ms: u64,
    pub end_ms: u64,
    pub displacement: i64,
}

/// Incremental single-pass detector; `detect` drives it over a full slice,
/// the CLI watch loop feeds it as records arrive.
#[derive(Debug, Clone)]
pub struct SwipeDetector {
    config: GestureConfig,
    anchor: Option<(u64, i32)>,
    skipping: bool,
    last_us: Option<u64>,
    index: usize,
}

impl SwipeDetector {
    pub fn new(config: GestureConfig) -> Self {
        SwipeDetector {
            config,
            anchor: None,
            skipping: false,
            last_us: None,
            index: 0,
        }
    }

    /// Feed one event; returns a gesture when this event completes one.
    pub fn push(&mut self, event: &InputEvent) -> Result<Option<Gesture>, GestureError> {
        let us = event.timestamp_us();
        if let Some(last) = self.last_us {
            if us < last {
                return Err(GestureError::UnorderedEvents(self.index));
            }
        }
        self.last_us = Some(us);
        self.index += 1;

        if self.skipping {
            if event.etype == EV_SYN {
                self.skipping = false;
            }
            return Ok(None);
        }
        if event.etype != EV_ABS || event.code != self.config.axis_code {
            return Ok(None);
        }

        let t = event.timestamp_ms();
        match self.anchor {
            None => {
                self.anchor = Some((t, event.value));
            }
            Some((t0, v0)) => {
                if t - t0 > self.config.window_ms {
                    // The run's window is exhausted; this sample opens the
                    // next run.
                    self.anchor = Some((t, event.value));
                } else {
                    let displacement = event.value as i64 - v0 as i64;
                    if displacement.abs() >= self.config.threshold as i64 {
                        self.anchor = None;
                        self.skipping = true;
                        return Ok(Some(Gesture {
                            kind: GestureKind::Swipe,
                            start_ms: t0,
                            end_ms: t,
                            displacement,
                        }));
                    }
                }
            }
        }
        Ok(None)
    }
}

/// Scan a time-ordered event slice for swipes on the configured axis.
pub fn detect(events: &[InputEvent], config: &GestureConfig) -> Result<Vec<Gesture>, GestureError> {
    let mut detector = SwipeDetector::new(config.clone());
    let mut gestures = Vec::new();
    for event in events {
        if let Some(gesture) = detector.push(event)? {
            gestures.push(gesture);
        }
    }
    Ok(gestures)
}

/// Which camera a trigger fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Camera {
    Back = 0,
    Front = 1,
}

impl Camera {
    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Camera::Back),
            1 => Some(Camera::Front),
            _ => None,
        }
    }
}

impl FromStr for Camera {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "back" | "0" => Ok(Camera::Back),
            "front" | "1" => Ok(Camera::Front),
            other => Err(format!("unknown camera {other:?}")),
        }
    }
}

const PHOTO_WIDTH: usize = 640;
const PHOTO_HEIGHT: usize = 480;
/// Header plus 640x480 RGB: the exact size of every captured frame.
pub const PHOTO_SIZE: usize = 15 + PHOTO_WIDTH * PHOTO_HEIGHT * 3;

/// Deterministic camera stub: a PPM P6 frame tagged with the camera id and
/// capture time so the remote-trigger path is verifiable end to end.
///
/// Pixel bytes 0..12 carry the tag (camera id, zero, clock as 8 LE bytes,
/// two zeros); every later pixel (x, y) is
/// `(x mod 256, y mod 256, (x + y + camera) mod 256)`.
pub fn capture_photo(camera: Camera, clock_unix: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(PHOTO_SIZE);
    out.extend_from_slice(b"P6\n640 480\n255\n");
    debug_assert_eq!(out.len(), 15);

    let mut pixels = vec![0u8; PHOTO_WIDTH * PHOTO_HEIGHT * 3];
    pixels[0] = camera as u8;
    pixels[2..10].copy_from_slice(&clock_unix.to_le_bytes());
    for p in 4..PHOTO_WIDTH * PHOTO_HEIGHT {
        let x = p % PHOTO_WIDTH;
        let y = p / PHOTO_WIDTH;
        pixels[p * 3] = (x % 256) as u8;
        pixels[p * 3 + 1] = (y % 256) as u8;
        pixels[p * 3 + 2] = ((x + y + camera as usize) % 256) as u8;
    }
    out.extend_from_slice(&pixels);
    out
}
