//! gestures / photo / tether / serve / trigger

use std::fs::{self, File};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use stashkit::gesture::{
    self, decode_events, detect, Camera, Gesture, GestureConfig, InputEvent, SwipeDetector,
    EVENT_SIZE,
};
use stashkit::tether::{
    self, plan_down, plan_up, serve_trigger, ActionPlan, TetherConfig, TetherError, TunnelSession,
    TunnelState,
};

use crate::args::*;
use crate::util;
use crate::CliError;

fn parse_axis(value: &str) -> Result<u16, CliError> {
    let bad = || CliError::Usage(format!("--axis {value:?} is not a code"));
    if let Some(hex) = value.strip_prefix("0x").or_else(|| value.strip_prefix("0X")) {
        u16::from_str_radix(hex, 16).map_err(|_| bad())
    } else {
        value.parse().map_err(|_| bad())
    }
}

fn parse_camera(value: &str) -> Result<Camera, CliError> {
    value.parse().map_err(CliError::Usage)
}

fn gesture_line(gesture: &Gesture) -> String {
    format!(
        "swipe start_ms={} end_ms={} displacement={}",
        gesture.start_ms, gesture.end_ms, gesture.displacement
    )
}

pub fn gestures_decode(args: GestureInArgs) -> Result<i32, CliError> {
    let bytes = fs::read(&args.input).map_err(|e| CliError::path(&args.input, e))?;
    let events = decode_events(&bytes)?;
    let mut out = std::io::stdout().lock();
    for event in &events {
        writeln!(
            out,
            "{}.{:06} type=0x{:04x} code=0x{:04x} value={}",
            event.tv_sec, event.tv_usec, event.etype, event.code, event.value
        )
        .map_err(CliError::stdout)?;
    }
    Ok(0)
}

fn config_from(threshold: i32, window_ms: u64, axis: Option<&str>) -> Result<GestureConfig, CliError> {
    let mut config = GestureConfig {
        threshold,
        window_ms,
        ..GestureConfig::default()
    };
    if let Some(axis) = axis {
        config.axis_code = parse_axis(axis)?;
    }
    config.validate().map_err(CliError::Usage)?;
    Ok(config)
}

pub fn gestures_detect(args: GestureDetectArgs) -> Result<i32, CliError> {
    let bytes = fs::read(&args.input).map_err(|e| CliError::path(&args.input, e))?;
    let events = decode_events(&bytes)?;
    let mut config = config_from(args.threshold, args.window_ms, args.axis.as_deref())?;
    if args.axis.is_none() {
        config.axis_code = gesture::resolve_axis(&events, &config);
    }
    let gestures = detect(&events, &config)?;
    let mut out = std::io::stdout().lock();
    for gesture in &gestures {
        writeln!(out, "{}", gesture_line(gesture)).map_err(CliError::stdout)?;
    }
    util::info(format!("{} gestures", gestures.len()));
    Ok(0)
}

pub fn gestures_watch(args: GestureWatchArgs) -> Result<i32, CliError> {
    let config = config_from(args.threshold, args.window_ms, args.axis.as_deref())?;
    let camera = parse_camera(&args.camera)?;
    if let Some(dir) = &args.photo_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::path(dir, e))?;
    }

    let mut stream = File::open(&args.input).map_err(|e| CliError::path(&args.input, e))?;
    let mut detector = SwipeDetector::new(config);
    let mut record = [0u8; EVENT_SIZE];
    let mut shot = 0u64;
    let mut out = std::io::stdout().lock();
    loop {
        match read_record(&mut stream, &mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(CliError::path(&args.input, e)),
        }
        let event = InputEvent::from_bytes(&record);
        if let Some(gesture) = detector.push(&event)? {
            writeln!(out, "{}", gesture_line(&gesture)).map_err(CliError::stdout)?;
            if let Some(dir) = &args.photo_dir {
                let clock = args.clock.unwrap_or_else(util::unix_now);
                let photo = gesture::capture_photo(camera, clock);
                let path = dir.join(format!("photo_{shot:04}.ppm"));
                fs::write(&path, &photo).map_err(|e| CliError::path(&path, e))?;
                writeln!(out, "photo {}", path.display()).map_err(CliError::stdout)?;
                shot += 1;
            }
            out.flush().map_err(CliError::stdout)?;
        }
    }
    util::info(format!("stream ended, {shot} photos"));
    Ok(0)
}

/// Read exactly one 16-byte record; Ok(false) on clean end of stream.
fn read_record<R: Read>(reader: &mut R, record: &mut [u8; EVENT_SIZE]) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < EVENT_SIZE {
        match reader.read(&mut record[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::UnexpectedEof,
                    "partial input record",
                ))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

pub fn photo(args: PhotoArgs) -> Result<i32, CliError> {
    let camera = parse_camera(&args.camera)?;
    let clock = args.clock.unwrap_or_else(util::unix_now);
    let bytes = gesture::capture_photo(camera, clock);
    match &args.out {
        Some(path) => fs::write(path, &bytes).map_err(|e| CliError::path(path, e))?,
        None => std::io::stdout()
            .lock()
            .write_all(&bytes)
            .map_err(CliError::stdout)?,
    }
    Ok(0)
}

fn print_plan(plan: &ActionPlan) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    for action in &plan.actions {
        writeln!(out, "{}", action.log_line()).map_err(CliError::stdout)?;
    }
    Ok(())
}

pub fn tether_plan_up(args: TetherPlanUpArgs) -> Result<i32, CliError> {
    let config = TetherConfig {
        iface: args.iface,
        cidr: args.cidr,
        endpoint: args.endpoint,
    };
    print_plan(&plan_up(&config)?)?;
    Ok(0)
}

pub fn tether_plan_down(args: TetherPlanDownArgs) -> Result<i32, CliError> {
    let state = match args.state.as_str() {
        "down" => TunnelState::Down,
        "iface_up" => TunnelState::IfaceUp,
        "tunnel_up" => TunnelState::TunnelUp,
        "active" => TunnelState::Active,
        "error" => TunnelState::Error,
        other => return Err(CliError::Usage(format!("unknown state {other:?}"))),
    };
    let mut session = TunnelSession::new(args.iface, TetherConfig::default().endpoint);
    session.state = state;
    print_plan(&plan_down(&session)?)?;
    Ok(0)
}

pub fn tether_sim(args: TetherSimArgs) -> Result<i32, CliError> {
    let mut session = TunnelSession::default();
    let mut out = std::io::stdout().lock();
    for name in args.events.split(',').filter(|s| !s.is_empty()) {
        let event = name.trim().parse().map_err(CliError::Usage)?;
        let next = session.transition(event)?;
        writeln!(
            out,
            "{} {} -> {}",
            event.as_str(),
            session.state.as_str(),
            next.state.as_str()
        )
        .map_err(CliError::stdout)?;
        session = next;
    }
    debug_assert!(session.replay_consistent());
    Ok(0)
}

pub fn serve(args: ServeArgs) -> Result<i32, CliError> {
    let listener = TcpListener::bind(&args.endpoint).map_err(|e| CliError::Tether(e.into()))?;
    let local = listener.local_addr().map_err(|e| CliError::Tether(e.into()))?;
    println!("listening = {local}");
    std::io::stdout().flush().map_err(CliError::stdout)?;
    util::info(format!("serving one connection on {local}"));

    let (mut stream, peer) = listener.accept().map_err(|e| CliError::Tether(e.into()))?;
    util::debug(format!("connection from {peer}"));
    let clock = args.clock;
    let served = serve_trigger(&mut stream, move |camera| {
        gesture::capture_photo(camera, clock.unwrap_or_else(util::unix_now))
    })?;
    println!("served = {served}");
    Ok(0)
}

pub fn trigger(args: TriggerArgs) -> Result<i32, CliError> {
    let addr = args
        .endpoint
        .to_socket_addrs()
        .map_err(|_| CliError::Usage(format!("--endpoint {:?} does not resolve", args.endpoint)))?
        .next()
        .ok_or_else(|| CliError::Usage(format!("--endpoint {:?} does not resolve", args.endpoint)))?;
    // An absent server surfaces as a timeout, whatever the socket error.
    let mut stream = TcpStream::connect_timeout(&addr, Duration::from_millis(args.timeout_ms))
        .map_err(|_| CliError::Tether(TetherError::Timeout))?;

    if args.ping {
        tether::request_ping(&mut stream, args.timeout_ms)?;
        println!("pong");
        return Ok(0);
    }

    let camera = parse_camera(&args.camera)?;
    let photo = tether::request_photo(&mut stream, camera, args.timeout_ms)?;
    match &args.out {
        Some(path) => fs::write(path, &photo).map_err(|e| CliError::path(path, e))?,
        None => std::io::stdout()
            .lock()
            .write_all(&photo)
            .map_err(CliError::stdout)?,
    }
    util::info(format!("received {} bytes", photo.len()));
    Ok(0)
}
