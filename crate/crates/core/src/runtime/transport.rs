//! Message passing between the master and the nodes, either over in-process
//! channels or over one loopback TCP connection per link.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::stream_model::{Atom, TimePoint};

/// Environment variable naming the host TCP inboxes bind to.
pub const LISTEN_ENV: &str = "LARSTREAM_LISTEN";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransportKind {
    #[default]
    InProc,
    Tcp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Msg {
    /// Tick `t` starts; `released` are the receiver's future inferences due
    /// now.
    Clock { t: TimePoint, released: Vec<Atom> },
    /// Events of tick `t` from node `from` (`None` for the master).
    Data { from: Option<usize>, t: TimePoint, begin: Vec<Atom>, end: Vec<Atom> },
    /// A node finished tick `t`.
    Ack {
        node: usize,
        t: TimePoint,
        future: Vec<(Atom, TimePoint)>,
        inconsistent: bool,
        solved: bool,
        next_due: Option<TimePoint>,
        error: Option<String>,
    },
    Eos,
}

/// Sending half of a link.
pub enum Link {
    Chan(Sender<Msg>),
    Tcp(BufWriter<TcpStream>),
}

impl Link {
    pub fn send(&mut self, msg: &Msg) -> io::Result<()> {
        match self {
            Link::Chan(tx) => tx
                .send(msg.clone())
                .map_err(|_| io::Error::new(io::ErrorKind::BrokenPipe, "receiver gone")),
            Link::Tcp(w) => {
                serde_json::to_writer(&mut *w, msg)?;
                w.write_all(b"\n")?;
                w.flush()
            }
        }
    }
}

/// Receiving end of a node or of the master.
pub struct Inbox {
    pub rx: Receiver<Msg>,
    tx: Sender<Msg>,
    addr: Option<SocketAddr>,
}

impl Inbox {
    /// An inbox expecting `incoming` links. Over TCP it accepts exactly that
    /// many connections, each read by its own thread.
    pub fn new(kind: TransportKind, incoming: usize) -> io::Result<Inbox> {
        let (tx, rx) = mpsc::channel();
        let addr = match kind {
            TransportKind::InProc => None,
            TransportKind::Tcp => {
                let host = std::env::var(LISTEN_ENV).unwrap_or_else(|_| "127.0.0.1".to_string());
                let listener = TcpListener::bind((host.as_str(), 0))?;
                let addr = listener.local_addr()?;
                let tx = tx.clone();
                thread::spawn(move || accept(listener, incoming, tx));
                Some(addr)
            }
        };
        Ok(Inbox { rx, tx, addr })
    }

    pub fn link(&self) -> io::Result<Link> {
        match self.addr {
            None => Ok(Link::Chan(self.tx.clone())),
            Some(addr) => {
                let s = TcpStream::connect(addr)?;
                s.set_nodelay(true)?;
                Ok(Link::Tcp(BufWriter::new(s)))
            }
        }
    }

    /// Drops the inbox's own sender so the receiver sees disconnection once
    /// every link is gone.
    pub fn into_receiver(self) -> Receiver<Msg> {
        self.rx
    }
}

fn accept(listener: TcpListener, incoming: usize, tx: Sender<Msg>) {
    for _ in 0..incoming {
        let stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                return;
            }
        };
        let tx = tx.clone();
        thread::spawn(move || {
            for line in BufReader::new(stream).lines() {
                let Ok(line) = line else { return };
                match serde_json::from_str::<Msg>(&line) {
                    Ok(m) => {
                        if tx.send(m).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        warn!("dropping malformed message: {e}");
                    }
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tcp_link_delivers_in_order() {
        let inbox = Inbox::new(TransportKind::Tcp, 1).unwrap();
        let mut link = inbox.link().unwrap();
        for t in 0..5 {
            link.send(&Msg::Clock { t, released: vec![Atom::prop("x")] }).unwrap();
        }
        link.send(&Msg::Eos).unwrap();
        let got: Vec<Msg> = (0..6).map(|_| inbox.rx.recv().unwrap()).collect();
        assert_eq!(got[4], Msg::Clock { t: 4, released: vec![Atom::prop("x")] });
        assert_eq!(got[5], Msg::Eos);
    }
}
