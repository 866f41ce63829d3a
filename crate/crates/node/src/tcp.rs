//! Socket transport for multi-process runs. Frames are the same bytes the
//! in-process bus checks; each node listens on its configured address and
//! opens one outgoing connection per peer address on first use.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender};
use veriquery::group::Group;
use veriquery::query::Query;

use crate::frame::{Message, MAX_FRAME};
use crate::roles::Role;
use crate::runtime::{host_loop, Envelope, Router, RunStats};
use crate::system::{QueryOutcome, System};
use crate::HarnessError;

/// How long a node keeps retrying to reach a peer that is not up yet.
const CONNECT_PATIENCE: Duration = Duration::from_secs(10);

pub struct TcpRouter {
    hosted: BTreeSet<String>,
    inbox: Sender<Envelope>,
    addrs: BTreeMap<String, String>,
    conns: Mutex<BTreeMap<String, TcpStream>>,
}

impl TcpRouter {
    pub fn new(hosted: BTreeSet<String>, inbox: Sender<Envelope>, addrs: BTreeMap<String, String>) -> Self {
        TcpRouter {
            hosted,
            inbox,
            addrs,
            conns: Mutex::new(BTreeMap::new()),
        }
    }

    fn write(&self, addr: &str, frame: &[u8]) -> io::Result<()> {
        let mut conns = self.conns.lock().expect("connection table");
        if let Some(s) = conns.get_mut(addr) {
            if alive(s) && s.write_all(frame).is_ok() {
                return Ok(());
            }
            conns.remove(addr);
        }
        let mut s = connect(addr)?;
        s.write_all(frame)?;
        conns.insert(addr.to_string(), s);
        Ok(())
    }
}

impl Router for TcpRouter {
    fn route(&self, m: Message) {
        if self.hosted.contains(&m.recipient) {
            let _ = self.inbox.send(Envelope::Msg(m));
            return;
        }
        let Some(addr) = self.addrs.get(&m.recipient) else {
            log::warn!("no address for {}", m.recipient);
            return;
        };
        if let Err(e) = self.write(addr, &m.to_frame()) {
            log::warn!("cannot reach {} at {addr}: {e}", m.recipient);
        }
    }
}

/// Peers never write on connections we opened, so readable means closed.
/// Without this check the first frame to a restarted peer vanishes into the
/// old socket.
fn alive(s: &TcpStream) -> bool {
    if s.set_nonblocking(true).is_err() {
        return false;
    }
    let open = matches!(s.peek(&mut [0u8; 1]), Err(e) if e.kind() == io::ErrorKind::WouldBlock);
    open && s.set_nonblocking(false).is_ok()
}

fn connect(addr: &str) -> io::Result<TcpStream> {
    let deadline = Instant::now() + CONNECT_PATIENCE;
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => {
                s.set_nodelay(true)?;
                return Ok(s);
            }
            Err(e) if Instant::now() >= deadline => return Err(e),
            Err(_) => std::thread::sleep(Duration::from_millis(50)),
        }
    }
}

/// Reads length-prefixed frames until the peer hangs up.
fn read_frames(mut s: TcpStream, inbox: Sender<Envelope>) {
    loop {
        let mut len = [0u8; 4];
        if s.read_exact(&mut len).is_err() {
            return;
        }
        let n = u32::from_le_bytes(len) as usize;
        if n > MAX_FRAME {
            log::warn!("dropping connection: {n}-byte frame");
            return;
        }
        let mut frame = len.to_vec();
        frame.resize(4 + n, 0);
        if s.read_exact(&mut frame[4..]).is_err() {
            return;
        }
        match Message::from_frame(&frame) {
            Ok(m) => {
                if inbox.send(Envelope::Msg(m)).is_err() {
                    return;
                }
            }
            Err(e) => log::warn!("dropping frame: {e}"),
        }
    }
}

/// A bound address; dropping it closes the port and every accepted
/// connection, so peers notice and reconnect to whoever binds next.
pub struct Listener {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accepted: Arc<Mutex<Vec<TcpStream>>>,
    accept: Option<JoinHandle<()>>,
}

impl Listener {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for s in self.accepted.lock().expect("accepted list").drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
        // wake the accept loop so it sees the flag and releases the port
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

/// Accepts connections on `addr` and feeds their frames into `inbox`.
pub fn listen(addr: &str, inbox: Sender<Envelope>) -> io::Result<Listener> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let accepted = Arc::new(Mutex::new(Vec::new()));
    let (flag, list) = (Arc::clone(&stop), Arc::clone(&accepted));
    let accept = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                return;
            }
            match conn {
                Ok(s) => {
                    if let Ok(c) = s.try_clone() {
                        list.lock().expect("accepted list").push(c);
                    }
                    let inbox = inbox.clone();
                    std::thread::spawn(move || read_frames(s, inbox));
                }
                Err(e) => log::warn!("accept on {local}: {e}"),
            }
        }
    });
    Ok(Listener {
        addr: local,
        stop,
        accepted,
        accept: Some(accept),
    })
}

fn addresses(config: &crate::Config) -> BTreeMap<String, String> {
    config
        .addresses()
        .into_iter()
        .filter_map(|(id, a)| Some((id, a?)))
        .collect()
}

/// Binds every distinct address of `ids` and returns the router of a host
/// running them.
struct Bound {
    router: TcpRouter,
    stop: Sender<Envelope>,
    inbox: Receiver<Envelope>,
    listeners: Vec<Listener>,
}

fn bind_host(config: &crate::Config, ids: &BTreeSet<String>) -> Result<Bound, HarnessError> {
    let addrs = addresses(config);
    let (tx, rx) = crossbeam_channel::unbounded();
    let mut bound = BTreeSet::new();
    let mut listeners = Vec::new();
    for id in ids {
        let addr = addrs
            .get(id)
            .ok_or_else(|| HarnessError::Invalid(format!("{id} has no address")))?;
        if bound.insert(addr.clone()) {
            listeners.push(listen(addr, tx.clone())?);
        }
    }
    Ok(Bound {
        router: TcpRouter::new(ids.clone(), tx.clone(), addrs),
        stop: tx,
        inbox: rx,
        listeners,
    })
}

/// A process hosting some nodes of a deployment.
pub struct NodeHost {
    stop: Sender<Envelope>,
    handle: JoinHandle<RunStats>,
    _listeners: Vec<Listener>,
}

impl NodeHost {
    /// Starts the event loop for `ids` of `system` on its own thread.
    pub fn spawn<G: Group>(mut system: System<G>, ids: &[String]) -> Result<Self, HarnessError> {
        let ids: BTreeSet<String> = ids.iter().cloned().collect();
        if let Some(id) = ids.iter().find(|id| system.role(id).is_none()) {
            return Err(HarnessError::Invalid(format!("unknown node {id}")));
        }
        let Bound {
            router,
            stop,
            inbox,
            listeners,
        } = bind_host(system.config(), &ids)?;
        let handle = std::thread::spawn(move || {
            let shared = Arc::clone(system.shared());
            let mut roles = system.roles_mut(&ids);
            host_loop(&mut roles, &shared, &inbox, &router, Vec::new(), None)
        });
        Ok(NodeHost {
            stop,
            handle,
            _listeners: listeners,
        })
    }

    /// Blocks until the host stops; it only stops when told to.
    pub fn wait(self) -> Result<RunStats, HarnessError> {
        let NodeHost { handle, .. } = self;
        handle
            .join()
            .map_err(|_| HarnessError::TransportClosed("host thread panicked".into()))
    }

    pub fn stop(self) -> Result<RunStats, HarnessError> {
        let _ = self.stop.send(Envelope::Stop);
        self.wait()
    }
}

/// Runs `query` from this process as the querier against nodes hosted
/// elsewhere.
pub fn run_remote_query<G: Group>(system: &mut System<G>, query: &Query) -> Result<QueryOutcome, HarnessError> {
    let q = system.config().querier.id.clone();
    let ids = BTreeSet::from([q.clone()]);
    let Bound {
        router,
        stop,
        inbox: rx,
        listeners: _listeners,
    } = bind_host(system.config(), &ids)?;
    let shared = Arc::clone(system.shared());
    let wait = Duration::from_millis(3 * shared.config.timeouts.cn_ms + 4 * shared.config.timeouts.vn_ms);
    let (msgs, timers) = system.start_query(query)?;
    for m in msgs {
        router.route(m);
    }
    let (done_tx, done_rx) = crossbeam_channel::bounded(1);
    let mut roles = system.roles_mut(&ids);
    let stats = std::thread::scope(|s| {
        let h = s.spawn(|| host_loop(&mut roles, &shared, &rx, &router, timers, Some(&done_tx)));
        let finished = done_rx.recv_timeout(wait).is_ok();
        let _ = stop.send(Envelope::Stop);
        let stats = h.join().expect("querier loop");
        finished.then_some(stats)
    });
    let stats = stats.ok_or_else(|| HarnessError::TransportClosed("no answer from the deployment".into()))?;
    let Some(Role::Querier(querier)) = system.role(&q) else {
        unreachable!("the querier is always built");
    };
    let result = querier
        .outcome()
        .ok_or_else(|| HarnessError::TransportClosed("query did not finish".into()))?;
    Ok(QueryOutcome { result, stats })
}
