use std::io::{self, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};

pub const DEFAULT_PORT: u16 = 5500;
pub const PORT_ENV: &str = "RNAV_PORT";

/// Read half of an in-memory byte pipe. Reads return 0 once the writer is
/// dropped and everything sent has been consumed.
pub struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    pos: usize,
}

pub struct PipeWriter {
    tx: Sender<Vec<u8>>,
}

pub fn pipe() -> (PipeWriter, PipeReader) {
    let (tx, rx) = channel();
    (
        PipeWriter { tx },
        PipeReader {
            rx,
            buf: Vec::new(),
            pos: 0,
        },
    )
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        while self.pos == self.buf.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.buf = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for PipeWriter {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        if data.is_empty() {
            return Ok(0);
        }
        self.tx
            .send(data.to_vec())
            .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "peer closed"))?;
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// One side of a bidirectional in-memory connection.
pub struct DuplexEnd {
    pub reader: BufReader<PipeReader>,
    pub writer: PipeWriter,
}

pub fn duplex() -> (DuplexEnd, DuplexEnd) {
    let (aw, br) = pipe();
    let (bw, ar) = pipe();
    (
        DuplexEnd {
            reader: BufReader::new(ar),
            writer: aw,
        },
        DuplexEnd {
            reader: BufReader::new(br),
            writer: bw,
        },
    )
}

/// TCP endpoint of the executor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
}

impl Default for Endpoint {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
        }
    }
}

impl Endpoint {
    pub fn new(host: impl Into<String>, port: u16) -> Self {
        Self {
            host: host.into(),
            port,
        }
    }

    /// Port from `RNAV_PORT`, falling back to 5500.
    pub fn from_env() -> io::Result<Self> {
        match std::env::var(PORT_ENV) {
            Ok(v) => Ok(Self::new("127.0.0.1", parse_port(&v)?)),
            Err(_) => Ok(Self::default()),
        }
    }

    pub fn addr(&self) -> io::Result<SocketAddr> {
        (self.host.as_str(), self.port)
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "unresolvable host"))
    }

    pub fn bind(&self) -> io::Result<TcpListener> {
        TcpListener::bind(self.addr()?)
    }

    pub fn connect(&self) -> io::Result<TcpStream> {
        let s = TcpStream::connect(self.addr()?)?;
        s.set_nodelay(true)?;
        Ok(s)
    }
}

pub fn parse_port(v: &str) -> io::Result<u16> {
    v.trim()
        .parse::<u16>()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, format!("bad port `{v}`: {e}")))
}
