//! USB-tether covert channel: bring-up/tear-down action plans, the tunnel
//! lifecycle state machine, and the framed photo-trigger protocol.
//!
//! The transport is any duplex byte stream. Tests and the in-process
//! loopback live in [`duplex`]; the CLI wires the same protocol over TCP
//! and leaves encryption to whatever tunnel wraps the stream.

use std::io::{self, Read, Write};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::gesture::Camera;

#[derive(Debug, Error)]
pub enum TetherError {
    #[error("endpoint {0:?} is not host:port")]
    BadEndpoint(String),
    #[error("cidr {0:?} is not a.b.c.d/prefix")]
    BadCidr(String),
    #[error("no tunnel to tear down from state {0:?}")]
    NotUp(TunnelState),
    #[error("event {event:?} is invalid in state {state:?}")]
    InvalidTransition {
        state: TunnelState,
        event: TunnelEvent,
    },
    #[error("frame body of {0} bytes exceeds the u32 length prefix")]
    FrameTooLarge(usize),
    #[error("frame truncated")]
    Truncated,
    #[error("transport closed")]
    TransportClosed,
    #[error("timed out waiting for the remote side")]
    Timeout,
    #[error("remote side answered status {0}")]
    RemoteError(u8),
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("transport error: {0}")]
    Io(#[from] io::Error),
}

// ---------------------------------------------------------------------------
// lifecycle state machine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TunnelState {
    Down,
    IfaceUp,
    TunnelUp,
    Active,
    Error,
}

impl TunnelState {
    pub const ALL: [TunnelState; 5] = [
        TunnelState::Down,
        TunnelState::IfaceUp,
        TunnelState::TunnelUp,
        TunnelState::Active,
        TunnelState::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TunnelState::Down => "down",
            TunnelState::IfaceUp => "iface_up",
            TunnelState::TunnelUp => "tunnel_up",
            TunnelState::Active => "active",
            TunnelState::Error => "error",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TunnelEvent {
    UpCmd,
    IfaceOk,
    TunnelOk,
    Data,
    DownCmd,
    Fail,
}

impl TunnelEvent {
    pub const ALL: [TunnelEvent; 6] = [
        TunnelEvent::UpCmd,
        TunnelEvent::IfaceOk,
        TunnelEvent::TunnelOk,
        TunnelEvent::Data,
        TunnelEvent::DownCmd,
        TunnelEvent::Fail,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TunnelEvent::UpCmd => "up_cmd",
            TunnelEvent::IfaceOk => "iface_ok",
            TunnelEvent::TunnelOk => "tunnel_ok",
            TunnelEvent::Data => "data",
            TunnelEvent::DownCmd => "down_cmd",
            TunnelEvent::Fail => "fail",
        }
    }
}

impl FromStr for TunnelEvent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TunnelEvent::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown tunnel event {s:?}"))
    }
}

/// The transition table. `None` marks a (state, event) pair that is
/// protocol misuse.
pub fn transition_table(state: TunnelState, event: TunnelEvent) -> Option<TunnelState> {
    use TunnelEvent::*;
    use TunnelState::*;
    match (state, event) {
        (_, Fail) => Some(Error),
        (Down, UpCmd) => Some(IfaceUp),
        (IfaceUp, IfaceOk) => Some(IfaceUp),
        (IfaceUp, TunnelOk) => Some(TunnelUp),
        (TunnelUp, Data) => Some(Active),
        (Active, Data) => Some(Active),
        (TunnelUp | Active | Error, DownCmd) => Some(Down),
        _ => None,
    }
}

/// One applied transition, kept so a session log replays to its state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionRecord {
    pub event: TunnelEvent,
    pub from: TunnelState,
    pub to: TunnelState,
}

/// A tunnel lifecycle instance. Transitions return updated sessions; an
/// invalid event leaves the original untouched.
#[derive(Debug, Clone)]
pub struct TunnelSession {
    pub state: TunnelState,
    pub iface_name: String,
    pub remote_endpoint: String,
    pub log: Vec<TransitionRecord>,
}

impl TunnelSession {
    pub fn new(iface_name: impl Into<String>, remote_endpoint: impl Into<String>) -> Self {
        TunnelSession {
            state: TunnelState::Down,
            iface_name: iface_name.into(),
            remote_endpoint: remote_endpoint.into(),
            log: Vec::new(),
        }
    }

    pub fn transition(&self, event: TunnelEvent) -> Result<TunnelSession, TetherError> {
        let to = transition_table(self.state, event).ok_or(TetherError::InvalidTransition {
            state: self.state,
            event,
        })?;
        let mut next = self.clone();
        next.log.push(TransitionRecord {
            event,
            from: self.state,
            to,
        });
        next.state = to;
        Ok(next)
    }

    /// Replay the log from Down and check it lands on the current state.
    pub fn replay_consistent(&self) -> bool {
        let mut state = TunnelState::Down;
        for record in &self.log {
            if record.from != state {
                return false;
            }
            match transition_table(state, record.event) {
                Some(next) if next == record.to => state = next,
                _ => return false,
            }
        }
        state == self.state
    }
}

impl Default for TunnelSession {
    fn default() -> Self {
        let config = TetherConfig::default();
        TunnelSession::new(config.iface, config.endpoint)
    }
}

// ---------------------------------------------------------------------------
// action plans
// ---------------------------------------------------------------------------

/// Abstract system mutations; only an executor performs them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    SetUsbFunction(String),
    IfaceUp(String),
    AssignAddr(String),
    StartTunnel(String),
    StopTunnel,
    IfaceDown(String),
}

impl Action {
    /// The mock-executor log line for this action.
    pub fn log_line(&self) -> String {
        match self {
            Action::SetUsbFunction(name) => format!("ACTION set_usb_function {name}"),
            Action::IfaceUp(iface) => format!("ACTION iface_up {iface}"),
            Action::AssignAddr(cidr) => format!("ACTION assign_addr {cidr}"),
            Action::StartTunnel(endpoint) => format!("ACTION start_tunnel {endpoint}"),
            Action::StopTunnel => "ACTION stop_tunnel".to_string(),
            Action::IfaceDown(iface) => format!("ACTION iface_down {iface}"),
        }
    }
}

/// An ordered plan; a value with no side effects of its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionPlan {
    pub actions: Vec<Action>,
}

/// Tether bring-up parameters. The defaults mirror a stock Android USB
/// tether: rndis0 on 192.168.42.0/24 with the host side at .1.
#[derive(Debug, Clone)]
pub struct TetherConfig {
    pub iface: String,
    pub cidr: String,
    pub endpoint: String,
}

impl Default for TetherConfig {
    fn default() -> Self {
        TetherConfig {
            iface: "rndis0".to_string(),
            cidr: "192.168.42.129/24".to_string(),
            endpoint: "192.168.42.1:22".to_string(),
        }
    }
}

/// Validate `host:port`.
pub fn parse_endpoint(endpoint: &str) -> Result<(String, u16), TetherError> {
    let bad = || TetherError::BadEndpoint(endpoint.to_string());
    let (host, port) = endpoint.rsplit_once(':').ok_or_else(bad)?;
    if host.is_empty() {
        return Err(bad());
    }
    let port: u16 = port.parse().map_err(|_| bad())?;
    Ok((host.to_string(), port))
}

fn check_cidr(cidr: &str) -> Result<(), TetherError> {
    let bad = || TetherError::BadCidr(cidr.to_string());
    let (addr, prefix) = cidr.split_once('/').ok_or_else(bad)?;
    let octets: Vec<&str> = addr.split('.').collect();
    if octets.len() != 4 || octets.iter().any(|o| o.parse::<u8>().is_err()) {
        return Err(bad());
    }
    let prefix: u8 = prefix.parse().map_err(|_| bad())?;
    if prefix > 32 {
        return Err(bad());
    }
    Ok(())
}

/// Plan the bring-up: switch the gadget to rndis, raise the interface,
/// address it, start the tunnel.
pub fn plan_up(config: &TetherConfig) -> Result<ActionPlan, TetherError> {
    if config.iface.is_empty() {
        return Err(TetherError::BadEndpoint(config.endpoint.clone()));
    }
    parse_endpoint(&config.endpoint)?;
    check_cidr(&config.cidr)?;
    Ok(ActionPlan {
        actions: vec![
            Action::SetUsbFunction("rndis".to_string()),
            Action::IfaceUp(config.iface.clone()),
            Action::AssignAddr(config.cidr.clone()),
            Action::StartTunnel(config.endpoint.clone()),
        ],
    })
}

/// Plan the tear-down, ending with the charging disguise restored.
pub fn plan_down(session: &TunnelSession) -> Result<ActionPlan, TetherError> {
    match session.state {
        TunnelState::TunnelUp | TunnelState::Active | TunnelState::Error => Ok(ActionPlan {
            actions: vec![
                Action::StopTunnel,
                Action::IfaceDown(session.iface_name.clone()),
                Action::SetUsbFunction("charge_only".to_string()),
            ],
        }),
        state => Err(TetherError::NotUp(state)),
    }
}

/// Something that can carry out plan actions against a real or modeled
/// system.
pub trait PlanExecutor {
    fn execute(&mut self, action: &Action) -> io::Result<()>;
}

pub fn execute_plan<E: PlanExecutor + ?Sized>(
    executor: &mut E,
    plan: &ActionPlan,
) -> io::Result<()> {
    for action in &plan.actions {
        executor.execute(action)?;
    }
    Ok(())
}

/// In-memory executor recording one `ACTION ...` line per action and
/// modeling the bits of system state the plans are supposed to manage.
#[derive(Debug, Clone)]
pub struct MockExecutor {
    pub log: Vec<String>,
    pub usb_function: String,
    pub iface_up: bool,
    pub assigned_addr: Option<String>,
    pub tunnel_endpoint: Option<String>,
}

impl Default for MockExecutor {
    fn default() -> Self {
        MockExecutor {
            log: Vec::new(),
            usb_function: "charge_only".to_string(),
            iface_up: false,
            assigned_addr: None,
            tunnel_endpoint: None,
        }
    }
}

impl PlanExecutor for MockExecutor {
    fn execute(&mut self, action: &Action) -> io::Result<()> {
        self.log.push(action.log_line());
        match action {
            Action::SetUsbFunction(name) => self.usb_function = name.clone(),
            Action::IfaceUp(_) => self.iface_up = true,
            Action::AssignAddr(cidr) => self.assigned_addr = Some(cidr.clone()),
            Action::StartTunnel(endpoint) => self.tunnel_endpoint = Some(endpoint.clone()),
            Action::StopTunnel => self.tunnel_endpoint = None,
            Action::IfaceDown(_) => {
                self.iface_up = false;
                self.assigned_addr = None;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// frames
// ---------------------------------------------------------------------------

/// Prefix `body` with its u32 little-endian length.
pub fn encode_frame(body: &[u8]) -> Result<Vec<u8>, TetherError> {
    let len = u32::try_from(body.len()).map_err(|_| TetherError::FrameTooLarge(body.len()))?;
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(body);
    Ok(out)
}

/// Inverse of `encode_frame`; returns the body and the unconsumed rest.
pub fn decode_frame(stream: &[u8]) -> Result<(Vec<u8>, &[u8]), TetherError> {
    if stream.len() < 4 {
        return Err(TetherError::Truncated);
    }
    let len = u32::from_le_bytes(stream[..4].try_into().unwrap()) as usize;
    let end = 4usize.checked_add(len).ok_or(TetherError::Truncated)?;
    if stream.len() < end {
        return Err(TetherError::Truncated);
    }
    Ok((stream[4..end].to_vec(), &stream[end..]))
}

/// Read one frame. `Ok(None)` is a clean close at a frame boundary;
/// `TransportClosed` means the stream died mid-frame.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Vec<u8>>, TetherError> {
    let mut len_buf = [0u8; 4];
    match read_full(reader, &mut len_buf)? {
        0 => return Ok(None),
        4 => {}
        _ => return Err(TetherError::TransportClosed),
    }
    let len = u32::from_le_bytes(len_buf) as usize;
    let mut body = vec![0u8; len];
    if read_full(reader, &mut body)? < len {
        return Err(TetherError::TransportClosed);
    }
    Ok(Some(body))
}

pub fn write_frame<W: Write>(writer: &mut W, body: &[u8]) -> Result<(), TetherError> {
    let frame = encode_frame(body)?;
    writer.write_all(&frame)?;
    writer.flush()?;
    Ok(())
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize, TetherError> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e)
                if e.kind() == io::ErrorKind::WouldBlock || e.kind() == io::ErrorKind::TimedOut =>
            {
                return Err(TetherError::Timeout)
            }
            Err(e) => return Err(TetherError::Io(e)),
        }
    }
    Ok(filled)
}

// ---------------------------------------------------------------------------
// request/response protocol
// ---------------------------------------------------------------------------

pub const PROTOCOL_VERSION: u8 = 1;
pub const OP_PHOTO: u8 = 1;
pub const OP_PING: u8 = 2;
pub const STATUS_OK: u8 = 0;
pub const STATUS_ERROR: u8 = 1;

/// Trigger request body: version, op, camera, reserved zero byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub version: u8,
    pub op: u8,
    pub camera: u8,
    pub reserved: u8,
}

impl Request {
    pub fn photo(camera: Camera) -> Self {
        Request {
            version: PROTOCOL_VERSION,
            op: OP_PHOTO,
            camera: camera as u8,
            reserved: 0,
        }
    }

    pub fn ping() -> Self {
        Request {
            version: PROTOCOL_VERSION,
            op: OP_PING,
            camera: 0,
            reserved: 0,
        }
    }

    pub fn encode(&self) -> [u8; 4] {
        [self.version, self.op, self.camera, self.reserved]
    }

    pub fn decode(body: &[u8]) -> Result<Self, TetherError> {
        if body.len() != 4 {
            return Err(TetherError::MalformedRequest(format!(
                "request body is {} bytes, expected 4",
                body.len()
            )));
        }
        Ok(Request {
            version: body[0],
            op: body[1],
            camera: body[2],
            reserved: body[3],
        })
    }
}

/// Trigger response body: version, status, u32 LE payload length, payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub version: u8,
    pub status: u8,
    pub payload: Vec<u8>,
}

impl Response {
    pub fn ok(payload: Vec<u8>) -> Self {
        Response {
            version: PROTOCOL_VERSION,
            status: STATUS_OK,
            payload,
        }
    }

    pub fn error() -> Self {
        Response {
            version: PROTOCOL_VERSION,
            status: STATUS_ERROR,
            payload: Vec::new(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + self.payload.len());
        out.push(self.version);
        out.push(self.status);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(body: &[u8]) -> Result<Self, TetherError> {
        if body.len() < 6 {
            return Err(TetherError::Truncated);
        }
        let payload_len = u32::from_le_bytes(body[2..6].try_into().unwrap()) as usize;
        if body.len() != 6 + payload_len {
            return Err(TetherError::Truncated);
        }
        Ok(Response {
            version: body[0],
            status: body[1],
            payload: body[6..].to_vec(),
        })
    }
}

/// A duplex byte stream with an optional read deadline.
pub trait Transport: Read + Write {
    fn set_read_timeout(&mut self, timeout: Option<Duration>) -> io::Result<()>;
}

impl Transport for std::net::TcpStream {
    fn set_read_timeout(&mut self, timeout: Option<Duration>) -> io::Result<()> {
        std::net::TcpStream::set_read_timeout(self, timeout)
    }
}

/// Serve trigger requests until the peer goes away; returns how many
/// requests were answered. Malformed or unknown requests get a status-1
/// response and the loop keeps going.
pub fn serve_trigger<T, F>(transport: &mut T, mut photo_fn: F) -> Result<u64, TetherError>
where
    T: Read + Write,
    F: FnMut(Camera) -> Vec<u8>,
{
    let mut served = 0u64;
    loop {
        let body = match read_frame(transport) {
            Ok(Some(body)) => body,
            Ok(None) | Err(TetherError::TransportClosed) => return Ok(served),
            Err(e) => return Err(e),
        };
        let response = match Request::decode(&body) {
            Err(_) => Response::error(),
            Ok(request) if request.version != PROTOCOL_VERSION => Response::error(),
            Ok(request) => match request.op {
                OP_PING => Response::ok(Vec::new()),
                OP_PHOTO => match Camera::from_id(request.camera) {
                    Some(camera) => Response::ok(photo_fn(camera)),
                    None => Response::error(),
                },
                _ => Response::error(),
            },
        };
        write_frame(transport, &response.encode())?;
        served += 1;
    }
}

/// Send one request and wait for its response.
pub fn request<T: Transport>(
    transport: &mut T,
    request: Request,
    timeout_ms: u64,
) -> Result<Response, TetherError> {
    transport.set_read_timeout(Some(Duration::from_millis(timeout_ms.max(1))))?;
    write_frame(transport, &request.encode()).map_err(|e| match e {
        TetherError::Io(err) if err.kind() == io::ErrorKind::BrokenPipe => {
            TetherError::TransportClosed
        }
        other => other,
    })?;
    let body = read_frame(transport)?.ok_or(TetherError::TransportClosed)?;
    Response::decode(&body)
}

/// Remote photo trigger: returns the image payload.
pub fn request_photo<T: Transport>(
    transport: &mut T,
    camera: Camera,
    timeout_ms: u64,
) -> Result<Vec<u8>, TetherError> {
    let response = request(transport, Request::photo(camera), timeout_ms)?;
    match response.status {
        STATUS_OK => Ok(response.payload),
        status => Err(TetherError::RemoteError(status)),
    }
}

/// Liveness probe over the tunnel.
pub fn request_ping<T: Transport>(transport: &mut T, timeout_ms: u64) -> Result<(), TetherError> {
    let response = request(transport, Request::ping(), timeout_ms)?;
    match response.status {
        STATUS_OK => Ok(()),
        status => Err(TetherError::RemoteError(status)),
    }
}

// ---------------------------------------------------------------------------
// in-process loopback transport
// ---------------------------------------------------------------------------

pub mod duplex {
    //! A pair of connected in-process byte streams, one per direction,
    //! built on channels. Dropping an end closes it: the peer reads EOF.

    use std::collections::VecDeque;
    use std::io::{self, Read, Write};
    use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
    use std::time::Duration;

    use super::Transport;

    pub struct DuplexEnd {
        tx: Sender<Vec<u8>>,
        rx: Receiver<Vec<u8>>,
        pending: VecDeque<u8>,
        timeout: Option<Duration>,
    }

    /// Create both ends of a connected duplex stream.
    pub fn pair() -> (DuplexEnd, DuplexEnd) {
        let (tx_a, rx_b) = channel();
        let (tx_b, rx_a) = channel();
        (
            DuplexEnd {
                tx: tx_a,
                rx: rx_a,
                pending: VecDeque::new(),
                timeout: None,
            },
            DuplexEnd {
                tx: tx_b,
                rx: rx_b,
                pending: VecDeque::new(),
                timeout: None,
            },
        )
    }

    impl Read for DuplexEnd {
        fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
            if buf.is_empty() {
                return Ok(0);
            }
            while self.pending.is_empty() {
                let chunk = match self.timeout {
                    Some(timeout) => match self.rx.recv_timeout(timeout) {
                        Ok(chunk) => chunk,
                        Err(RecvTimeoutError::Timeout) => {
                            return Err(io::Error::new(io::ErrorKind::TimedOut, "read timed out"))
                        }
                        Err(RecvTimeoutError::Disconnected) => return Ok(0),
                    },
                    None => match self.rx.recv() {
                        Ok(chunk) => chunk,
                        Err(_) => return Ok(0),
                    },
                };
                self.pending.extend(chunk);
            }
            let n = buf.len().min(self.pending.len());
            for slot in buf.iter_mut().take(n) {
                *slot = self.pending.pop_front().expect("pending not empty");
            }
            Ok(n)
        }
    }

    impl Write for DuplexEnd {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            self.tx
                .send(buf.to_vec())
                .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
            Ok(buf.len())
        }

        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    impl Transport for DuplexEnd {
        fn set_read_timeout(&mut self, timeout: Option<Duration>) -> io::Result<()> {
            self.timeout = timeout;
            Ok(())
        }
    }
}
