//! TCP replay server.
//!
//! Each connection runs on its own thread and handles one request at a time.
//! Requests are cut from the byte stream by the configured framing, answered
//! with `ghost_core::engine::respond`, and written back in the same framing.
//! NO_RESPONSE writes nothing.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use ghost_core::engine::{respond, ServiceModel};

/// Poll interval for accept and reads, so shutdown is noticed promptly.
const POLL: Duration = Duration::from_millis(25);

/// How requests are delimited on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Framing {
    /// One request per connection: everything up to the client's write
    /// shutdown (or the idle timeout); the response is followed by close.
    Conn,
    /// Four-byte big-endian length prefix.
    Len32,
    /// Request terminated by the byte sequence, which is not part of it.
    Delim(Vec<u8>),
}

impl FromStr for Framing {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "conn" => Ok(Framing::Conn),
            "len32" => Ok(Framing::Len32),
            _ => match s.strip_prefix("delim:") {
                Some(h) => {
                    let d = hex::decode(h).with_context(|| format!("delimiter {h:?} is not hex"))?;
                    if d.is_empty() {
                        bail!("delimiter must not be empty");
                    }
                    Ok(Framing::Delim(d))
                }
                None => bail!("unknown framing {s:?}; expected conn, len32 or delim:<hex>"),
            },
        }
    }
}

impl Framing {
    /// Wire form of a response.
    pub fn encode(&self, payload: &[u8]) -> Vec<u8> {
        match self {
            Framing::Conn => payload.to_vec(),
            Framing::Len32 => {
                let mut out = (payload.len() as u32).to_be_bytes().to_vec();
                out.extend_from_slice(payload);
                out
            }
            Framing::Delim(d) => {
                let mut out = payload.to_vec();
                out.extend_from_slice(d);
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: String,
    pub framing: Framing,
    /// A connection with no traffic for this long is closed.
    pub idle_timeout: Duration,
    pub max_message: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:0".into(),
            framing: Framing::Len32,
            idle_timeout: Duration::from_secs(30),
            max_message: 1 << 20,
        }
    }
}

/// Stops a running server; in-flight requests are answered first.
#[derive(Debug, Clone)]
pub struct ShutdownHandle {
    flag: Arc<AtomicBool>,
}

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.flag.store(true, Ordering::SeqCst);
    }

    pub fn is_shutdown(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }
}

/// Counters exposed for diagnostics and tests.
#[derive(Debug, Default)]
pub struct Stats {
    pub connections: AtomicU64,
    pub requests: AtomicU64,
    pub oversize: AtomicU64,
}

pub struct Server {
    listener: TcpListener,
    model: Arc<ServiceModel>,
    cfg: ServerConfig,
    stop: ShutdownHandle,
    stats: Arc<Stats>,
}

impl Server {
    pub fn bind(model: Arc<ServiceModel>, cfg: ServerConfig) -> anyhow::Result<Self> {
        if cfg.max_message == 0 {
            bail!("max message size must be positive");
        }
        let listener = TcpListener::bind(&cfg.listen).with_context(|| format!("cannot listen on {}", cfg.listen))?;
        listener.set_nonblocking(true)?;
        Ok(Self {
            listener,
            model,
            cfg,
            stop: ShutdownHandle { flag: Arc::new(AtomicBool::new(false)) },
            stats: Arc::new(Stats::default()),
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        self.stop.clone()
    }

    pub fn stats(&self) -> Arc<Stats> {
        self.stats.clone()
    }

    /// Serves until shut down, then waits for every connection to finish.
    pub fn run(self) -> anyhow::Result<()> {
        log::info!("listening addr={} framing={:?}", self.local_addr()?, self.cfg.framing);
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        while !self.stop.is_shutdown() {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    self.stats.connections.fetch_add(1, Ordering::Relaxed);
                    let conn = Connection {
                        stream,
                        peer,
                        model: self.model.clone(),
                        cfg: self.cfg.clone(),
                        stop: self.stop.clone(),
                        stats: self.stats.clone(),
                    };
                    workers.push(thread::spawn(move || conn.serve()));
                    workers.retain(|w| !w.is_finished());
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
                Err(e) => log::warn!("accept failed: {e}"),
            }
        }
        log::info!("shutting down, draining {} connection(s)", workers.len());
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }

    /// Runs the server on a background thread.
    pub fn spawn(self) -> (ShutdownHandle, JoinHandle<anyhow::Result<()>>) {
        let stop = self.shutdown_handle();
        (stop, thread::spawn(move || self.run()))
    }
}

struct Connection {
    stream: TcpStream,
    peer: SocketAddr,
    model: Arc<ServiceModel>,
    cfg: ServerConfig,
    stop: ShutdownHandle,
    stats: Arc<Stats>,
}

enum Next {
    Frame(Vec<u8>),
    NeedMore,
    Oversize,
}

impl Connection {
    fn serve(mut self) {
        if let Err(e) = self.run() {
            log::debug!("peer={} connection ended: {e}", self.peer);
        }
        let _ = self.stream.shutdown(Shutdown::Both);
    }

    fn run(&mut self) -> io::Result<()> {
        self.stream.set_nonblocking(false)?;
        self.stream.set_read_timeout(Some(POLL))?;
        self.stream.set_nodelay(true)?;
        let mut buf: Vec<u8> = Vec::new();
        let mut chunk = vec![0u8; 64 * 1024];
        let mut last = Instant::now();
        let mut eof = false;
        loop {
            match self.next_frame(&mut buf, eof) {
                Next::Frame(req) => {
                    self.answer(&req)?;
                    last = Instant::now();
                    if self.cfg.framing == Framing::Conn {
                        return Ok(());
                    }
                    continue;
                }
                Next::Oversize => {
                    self.stats.oversize.fetch_add(1, Ordering::Relaxed);
                    log::warn!("peer={} oversize request, limit {} bytes; closing", self.peer, self.cfg.max_message);
                    return Ok(());
                }
                Next::NeedMore if eof => return Ok(()),
                Next::NeedMore => {}
            }
            // A shutdown waits for one quiet read so that bytes already sent
            // by the client are still answered.
            let stopping = self.stop.is_shutdown();
            let got = match self.stream.read(&mut chunk) {
                Ok(0) => {
                    eof = true;
                    false
                }
                Ok(k) => {
                    buf.extend_from_slice(&chunk[..k]);
                    last = Instant::now();
                    true
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => false,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => false,
                Err(e) => return Err(e),
            };
            if got || eof {
                continue;
            }
            if stopping && buf.is_empty() {
                return Ok(());
            }
            if last.elapsed() >= self.cfg.idle_timeout {
                if self.cfg.framing == Framing::Conn && !buf.is_empty() {
                    eof = true;
                    continue;
                }
                log::debug!("peer={} idle timeout", self.peer);
                return Ok(());
            }
        }
    }

    fn next_frame(&self, buf: &mut Vec<u8>, eof: bool) -> Next {
        let max = self.cfg.max_message;
        match &self.cfg.framing {
            Framing::Conn => {
                if buf.len() > max {
                    Next::Oversize
                } else if eof && !buf.is_empty() {
                    Next::Frame(std::mem::take(buf))
                } else {
                    Next::NeedMore
                }
            }
            Framing::Len32 => {
                if buf.len() < 4 {
                    return Next::NeedMore;
                }
                let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
                if len > max {
                    Next::Oversize
                } else if buf.len() >= 4 + len {
                    let frame = buf[4..4 + len].to_vec();
                    buf.drain(..4 + len);
                    Next::Frame(frame)
                } else {
                    Next::NeedMore
                }
            }
            Framing::Delim(d) => match buf.windows(d.len()).position(|w| w == d.as_slice()) {
                Some(p) if p > max => Next::Oversize,
                Some(p) => {
                    let frame = buf[..p].to_vec();
                    buf.drain(..p + d.len());
                    Next::Frame(frame)
                }
                None if buf.len() > max + d.len() => Next::Oversize,
                None => Next::NeedMore,
            },
        }
    }

    fn answer(&mut self, req: &[u8]) -> io::Result<()> {
        self.stats.requests.fetch_add(1, Ordering::Relaxed);
        if req.is_empty() {
            log::info!("peer={} req_len=0 skipped=empty", self.peer);
            return Ok(());
        }
        let t0 = Instant::now();
        let g = match respond(&self.model, req) {
            Ok(g) => g,
            Err(e) => {
                log::error!("peer={} req_len={} error={e}", self.peer, req.len());
                return Ok(());
            }
        };
        log::info!(
            "peer={} req_len={} cluster={} interaction={} distance={:.4} match_us={} subst_us={} total_us={} resp_len={}",
            self.peer,
            req.len(),
            g.matched.chosen,
            g.interaction,
            g.matched.distance,
            g.match_time.as_micros(),
            g.substitution_time.as_micros(),
            t0.elapsed().as_micros(),
            g.response.as_ref().map_or(-1, |r| r.len() as i64),
        );
        if let Some(resp) = g.response {
            self.stream.write_all(&self.cfg.framing.encode(&resp))?;
            self.stream.flush()?;
        }
        Ok(())
    }
}
