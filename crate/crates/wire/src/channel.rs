use std::io::{BufReader, BufWriter, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::error::{Result, WireError};
use crate::frame::Frame;

/// Raw byte counts observed by a transport.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub sent: u64,
    pub received: u64,
}

/// A bidirectional, ordered frame transport.
pub trait Channel {
    fn send_frame(&mut self, frame: &Frame) -> Result<()>;
    fn recv_frame(&mut self) -> Result<Frame>;
    /// Bytes that crossed the transport, independent of any framing logic.
    fn counters(&self) -> Counters;
}

/// In-process transport over a pair of queues.
pub struct Loopback {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    counters: Counters,
}

pub fn loopback_pair() -> (Loopback, Loopback) {
    let (atx, brx) = channel();
    let (btx, arx) = channel();
    (
        Loopback { tx: atx, rx: arx, counters: Counters::default() },
        Loopback { tx: btx, rx: brx, counters: Counters::default() },
    )
}

impl Channel for Loopback {
    fn send_frame(&mut self, frame: &Frame) -> Result<()> {
        let bytes = frame.encode();
        let n = bytes.len() as u64;
        self.tx.send(bytes).map_err(|_| WireError::Disconnected)?;
        self.counters.sent += n;
        Ok(())
    }

    fn recv_frame(&mut self) -> Result<Frame> {
        let bytes = self.rx.recv().map_err(|_| WireError::Disconnected)?;
        self.counters.received += bytes.len() as u64;
        Frame::decode(&bytes)
    }

    fn counters(&self) -> Counters {
        self.counters
    }
}

struct Counting<S> {
    inner: S,
    count: u64,
}

impl<S: Read> Read for Counting<S> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.count += n as u64;
        Ok(n)
    }
}

impl<S: Write> Write for Counting<S> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.count += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// TCP transport. Counters are taken below the buffering layer, at the
/// socket calls themselves.
pub struct TcpChannel {
    reader: BufReader<Counting<TcpStream>>,
    writer: BufWriter<Counting<TcpStream>>,
}

impl TcpChannel {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        let read_half = stream.try_clone()?;
        Ok(Self {
            reader: BufReader::with_capacity(1 << 16, Counting { inner: read_half, count: 0 }),
            writer: BufWriter::with_capacity(1 << 16, Counting { inner: stream, count: 0 }),
        })
    }

    pub fn connect(addr: &str) -> Result<Self> {
        Self::new(TcpStream::connect(addr)?)
    }
}

impl Channel for TcpChannel {
    fn send_frame(&mut self, frame: &Frame) -> Result<()> {
        self.writer.write_all(&frame.encode())?;
        self.writer.flush()?;
        Ok(())
    }

    fn recv_frame(&mut self) -> Result<Frame> {
        Frame::read_from(&mut self.reader)
    }

    fn counters(&self) -> Counters {
        Counters { sent: self.writer.get_ref().count, received: self.reader.get_ref().count }
    }
}
