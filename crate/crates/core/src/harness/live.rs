//! Live viewer bridge. Viewers connect over WebSocket and exchange JSON
//! frames `{"type": ..., "payload": ...}`. The simulation thread stays
//! the only writer of the world; viewer commands are queued and drained
//! at tick boundaries.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{
    self, Receiver, RecvTimeoutError, Sender, SyncSender, TryRecvError, TrySendError,
};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use crate::geometry::{Obstacle, Pose, Target, World};

use super::run::{run_with, LiveAction, LiveControl, Policy, RunMode};
use super::scenario::Scenario;
use super::trace::{TraceRecord, TraceSink};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub scenario: String,
    pub seed: u64,
    pub cycle: u32,
    pub clock: u64,
    pub paused: bool,
    pub finished: bool,
    pub robot: Pose,
    pub target: Target,
    pub obstacles: Vec<Obstacle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickFrame {
    pub cycle: u32,
    pub clock: u64,
    pub robot: Pose,
}

/// Server → viewer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum LiveFrame {
    Snapshot(Snapshot),
    Record(TraceRecord),
    Tick(TickFrame),
    Status { paused: bool, seed: u64 },
    Error { message: String },
}

/// Viewer → server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    content = "payload",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum LiveCommand {
    PlaceObstacle {
        x: f64,
        y: f64,
        r: f64,
        #[serde(default)]
        tall: bool,
    },
    Pause,
    Resume,
    Reset {
        seed: u64,
    },
}

impl LiveFrame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }
}

impl LiveCommand {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cmd: LiveCommand = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if let LiveCommand::PlaceObstacle { x, y, r, .. } = cmd {
            if !(x.is_finite() && y.is_finite() && r.is_finite() && r > 0.0) {
                return Err("place_obstacle needs finite x, y and a positive r".into());
            }
        }
        Ok(cmd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiveConfig {
    /// Simulation ticks per wall-clock second.
    pub ticks_per_second: f64,
    /// Frames buffered per viewer before that viewer is dropped.
    pub viewer_queue: usize,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            ticks_per_second: 20.0,
            viewer_queue: 1024,
        }
    }
}

struct Hub {
    viewers: Vec<SyncSender<String>>,
    snapshot: Snapshot,
}

impl Hub {
    fn broadcast(&mut self, frame: &LiveFrame) {
        let text = frame.to_json();
        self.viewers.retain(|tx| match tx.try_send(text.clone()) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => false,
        });
    }
}

type SharedHub = Arc<Mutex<Hub>>;

fn lock(hub: &SharedHub) -> std::sync::MutexGuard<'_, Hub> {
    hub.lock().unwrap_or_else(|p| p.into_inner())
}

struct HubSink(SharedHub);

impl TraceSink for HubSink {
    fn record(&mut self, record: &TraceRecord) -> io::Result<()> {
        lock(&self.0).broadcast(&LiveFrame::Record(record.clone()));
        Ok(())
    }
}

struct Control {
    hub: SharedHub,
    commands: Receiver<LiveCommand>,
    shutdown: Arc<AtomicBool>,
    tick_period: Duration,
    next_tick: Instant,
    paused: bool,
    seed: u64,
    reset_to: Option<u64>,
}

impl Control {
    fn set_paused(&mut self, paused: bool) {
        self.paused = paused;
        let mut hub = lock(&self.hub);
        hub.snapshot.paused = paused;
        hub.broadcast(&LiveFrame::Status {
            paused,
            seed: self.seed,
        });
    }

    fn handle(&mut self, cmd: LiveCommand, out: &mut Vec<LiveAction>) {
        match cmd {
            LiveCommand::PlaceObstacle { x, y, r, tall } => {
                out.push(LiveAction::PlaceObstacle(Obstacle::new(x, y, r, tall)))
            }
            LiveCommand::Pause => self.set_paused(true),
            LiveCommand::Resume => self.set_paused(false),
            LiveCommand::Reset { seed } => {
                self.reset_to = Some(seed);
                out.push(LiveAction::Reset(seed));
            }
        }
    }

    fn stopping(&self) -> bool {
        self.shutdown.load(Ordering::Relaxed)
    }
}

impl LiveControl for Control {
    fn tick_boundary(&mut self, world: &World, cycle: u32) -> Vec<LiveAction> {
        let mut out = Vec::new();
        while let Ok(c) = self.commands.try_recv() {
            self.handle(c, &mut out);
        }
        while self.paused && !self.stopping() && self.reset_to.is_none() {
            match self.commands.recv_timeout(Duration::from_millis(50)) {
                Ok(c) => self.handle(c, &mut out),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
        if self.stopping() && self.reset_to.is_none() {
            self.reset_to = Some(self.seed);
            out.push(LiveAction::Reset(self.seed));
        }
        {
            let mut hub = lock(&self.hub);
            hub.snapshot.cycle = cycle;
            hub.snapshot.clock = world.clock;
            hub.snapshot.robot = world.robot;
            hub.snapshot.obstacles.clone_from(&world.obstacles);
            hub.broadcast(&LiveFrame::Tick(TickFrame {
                cycle,
                clock: world.clock,
                robot: world.robot,
            }));
        }
        let now = Instant::now();
        if self.next_tick > now {
            thread::sleep(self.next_tick - now);
        }
        self.next_tick = Instant::max(self.next_tick, now) + self.tick_period;
        out
    }
}

/// Running live session. Dropping the handle does not stop it; call
/// [`LiveHandle::shutdown`].
pub struct LiveHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl LiveHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(self) {
        self.shutdown.store(true, Ordering::Relaxed);
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Blocks until the session stops on its own (it never does unless
    /// shut down from another thread).
    pub fn wait(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

fn snapshot_of(scenario: &Scenario, seed: u64, world: &World) -> Snapshot {
    Snapshot {
        scenario: scenario.name.clone(),
        seed,
        cycle: 0,
        clock: world.clock,
        paused: false,
        finished: false,
        robot: world.robot,
        target: world.target,
        obstacles: world.obstacles.clone(),
    }
}

struct Session {
    scenario: Scenario,
    seed: u64,
    policy: Policy,
    config: LiveConfig,
    trace: Option<Box<dyn TraceSink + Send>>,
}

fn sim_loop(
    session: Session,
    hub: SharedHub,
    commands: Receiver<LiveCommand>,
    shutdown: Arc<AtomicBool>,
) {
    let Session {
        scenario,
        seed,
        policy,
        config,
        trace: mut extra,
    } = session;
    let mut control = Control {
        hub: hub.clone(),
        commands,
        shutdown: shutdown.clone(),
        tick_period: Duration::from_secs_f64(1.0 / config.ticks_per_second),
        next_tick: Instant::now(),
        paused: false,
        seed,
        reset_to: None,
    };
    loop {
        {
            let mut h = lock(&hub);
            h.snapshot = snapshot_of(&scenario, control.seed, &scenario.world(control.seed));
            h.snapshot.paused = control.paused;
            let snap = h.snapshot.clone();
            h.broadcast(&LiveFrame::Snapshot(snap));
        }
        let mut sink = HubSink(hub.clone());
        let result = match extra.as_deref_mut() {
            Some(file) => {
                let mut tee = super::trace::Tee(&mut sink, file);
                run_with(
                    &scenario,
                    control.seed,
                    &RunMode::InProcess,
                    &policy,
                    &mut tee,
                    Some(&mut control),
                )
            }
            None => run_with(
                &scenario,
                control.seed,
                &RunMode::InProcess,
                &policy,
                &mut sink,
                Some(&mut control),
            ),
        };
        if let Err(e) = result {
            lock(&hub).broadcast(&LiveFrame::Error {
                message: e.to_string(),
            });
        }
        lock(&hub).snapshot.finished = true;
        if shutdown.load(Ordering::Relaxed) {
            return;
        }
        // Finished: idle until a reset or shutdown.
        while control.reset_to.is_none() {
            if shutdown.load(Ordering::Relaxed) {
                return;
            }
            match control.commands.recv_timeout(Duration::from_millis(50)) {
                Ok(LiveCommand::Reset { seed }) => control.reset_to = Some(seed),
                Ok(LiveCommand::Pause) => control.set_paused(true),
                Ok(LiveCommand::Resume) => control.set_paused(false),
                Ok(LiveCommand::PlaceObstacle { .. }) => lock(&hub).broadcast(&LiveFrame::Error {
                    message: "run finished; send reset before placing obstacles".into(),
                }),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => return,
            }
        }
        control.seed = control.reset_to.take().expect("checked above");
        control.paused = false;
        control.next_tick = Instant::now();
        let seed = control.seed;
        lock(&hub).broadcast(&LiveFrame::Status {
            paused: false,
            seed,
        });
    }
}

fn send_text(ws: &mut WebSocket<TcpStream>, text: String) -> bool {
    ws.send(Message::text(text)).is_ok()
}

fn viewer_loop(
    mut ws: WebSocket<TcpStream>,
    frames: Receiver<String>,
    commands: Sender<LiveCommand>,
    shutdown: Arc<AtomicBool>,
) {
    loop {
        if shutdown.load(Ordering::Relaxed) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return;
        }
        loop {
            match frames.try_recv() {
                Ok(text) => {
                    if !send_text(&mut ws, text) {
                        return;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    return;
                }
            }
        }
        match ws.read() {
            Ok(Message::Text(t)) => match LiveCommand::parse(t.as_str()) {
                Ok(cmd) => {
                    if commands.send(cmd).is_err() {
                        return;
                    }
                }
                Err(message) => {
                    let frame = LiveFrame::Error {
                        message: format!("rejected command: {message}"),
                    };
                    if !send_text(&mut ws, frame.to_json()) {
                        return;
                    }
                }
            },
            Ok(Message::Close(_)) => return,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) => {}
            Err(_) => return,
        }
    }
}

fn accept_loop(
    listener: TcpListener,
    hub: SharedHub,
    commands: Sender<LiveCommand>,
    shutdown: Arc<AtomicBool>,
    queue: usize,
) {
    let mut viewers = Vec::new();
    while !shutdown.load(Ordering::Relaxed) {
        let stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(20));
                continue;
            }
            Err(_) => continue,
        };
        let setup = stream
            .set_nonblocking(false)
            .and_then(|_| stream.set_read_timeout(Some(Duration::from_secs(5))));
        if setup.is_err() {
            continue;
        }
        let Ok(ws) = tungstenite::accept(stream) else {
            continue;
        };
        if ws
            .get_ref()
            .set_read_timeout(Some(Duration::from_millis(10)))
            .is_err()
        {
            continue;
        }
        let (tx, rx) = mpsc::sync_channel(queue);
        {
            let mut h = lock(&hub);
            let snap = LiveFrame::Snapshot(h.snapshot.clone()).to_json();
            if tx.try_send(snap).is_err() {
                continue;
            }
            h.viewers.push(tx);
        }
        let commands = commands.clone();
        let shutdown = shutdown.clone();
        viewers.push(thread::spawn(move || {
            viewer_loop(ws, rx, commands, shutdown)
        }));
    }
    for v in viewers {
        let _ = v.join();
    }
}

/// Starts a live session on `listener`. Every trace record is broadcast
/// to viewers and, if given, written to `trace`.
pub fn serve_live(
    scenario: Scenario,
    seed: u64,
    policy: Policy,
    listener: TcpListener,
    config: LiveConfig,
    trace: Option<Box<dyn TraceSink + Send>>,
) -> io::Result<LiveHandle> {
    if !(config.ticks_per_second > 0.0 && config.ticks_per_second.is_finite()) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "ticks per second must be positive",
        ));
    }
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let hub = Arc::new(Mutex::new(Hub {
        viewers: Vec::new(),
        snapshot: snapshot_of(&scenario, seed, &scenario.world(seed)),
    }));
    let shutdown = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();
    let acceptor = {
        let (hub, shutdown) = (hub.clone(), shutdown.clone());
        let queue = config.viewer_queue.max(1);
        thread::spawn(move || accept_loop(listener, hub, tx, shutdown, queue))
    };
    let sim = {
        let shutdown = shutdown.clone();
        let session = Session {
            scenario,
            seed,
            policy,
            config,
            trace,
        };
        thread::spawn(move || sim_loop(session, hub, rx, shutdown))
    };
    Ok(LiveHandle {
        addr,
        shutdown,
        threads: vec![sim, acceptor],
    })
}
