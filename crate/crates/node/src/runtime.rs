//! Schedulers that deliver messages between roles.
//!
//! The serial scheduler is a discrete-event simulation: every message is
//! delivered after the configured link latency plus its transmission time,
//! links are FIFO, ties break by send order, and the run ends when no event
//! is left. It is fully deterministic. The threaded scheduler runs one event
//! loop per host on its own thread with real-time timers.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};
use serde::{Deserialize, Serialize};
use veriquery::group::Group;

use crate::frame::{Message, Round};
use crate::roles::{Role, Shared};

/// Traffic and timing of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub messages: usize,
    pub bytes: usize,
    pub proof_bundles: usize,
    pub proof_bytes: usize,
    /// Simulated time at which each round was last delivered (serial only).
    pub round_ms: BTreeMap<String, f64>,
    /// CPU time spent in handlers, per role kind.
    pub cpu_ms: BTreeMap<String, f64>,
    pub wall_ms: f64,
}

impl RunStats {
    fn count(&mut self, m: &Message, frame_len: usize) {
        self.messages += 1;
        self.bytes += frame_len;
        if m.round == Round::Proof {
            self.proof_bundles += 1;
            self.proof_bytes += m.payload.len();
        }
    }

    fn merge(&mut self, o: RunStats) {
        self.messages += o.messages;
        self.bytes += o.bytes;
        self.proof_bundles += o.proof_bundles;
        self.proof_bytes += o.proof_bytes;
        for (k, v) in o.cpu_ms {
            *self.cpu_ms.entry(k).or_default() += v;
        }
    }

    /// Simulated time until the querier held the result.
    pub fn result_ms(&self) -> Option<f64> {
        self.round_ms.get("Result").copied()
    }
}

/// Passes a message through the wire format, as a socket would.
fn transmit(m: &Message) -> (Message, usize) {
    let frame = m.to_frame();
    let back = Message::from_frame(&frame).expect("frames we build parse");
    (back, frame.len())
}

fn timed_handle<G: Group>(
    role: &mut Role<G>,
    m: Message,
    shared: &Arc<Shared<G>>,
    stats: &mut RunStats,
) -> (Vec<Message>, Vec<(u64, Message)>) {
    let t = Instant::now();
    let out = role.handle(m, shared);
    *stats.cpu_ms.entry(role.kind().to_string()).or_default() += t.elapsed().as_secs_f64() * 1e3;
    out
}

pub type Outputs = (Vec<Message>, Vec<(u64, Message)>);

/// Runs the discrete-event simulation until no event is left. `tap` sees
/// every delivered message.
pub fn run_serial<G: Group>(
    roles: &mut BTreeMap<String, Role<G>>,
    shared: &Arc<Shared<G>>,
    initial: Outputs,
    mut tap: impl FnMut(&Message),
) -> RunStats {
    let wall = Instant::now();
    let net = shared.config.network;
    let mut stats = RunStats::default();
    let mut queue: BinaryHeap<Reverse<(u64, u64)>> = BinaryHeap::new();
    let mut pending: BTreeMap<u64, Message> = BTreeMap::new();
    let mut link_free: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut seq = 0u64;
    let mut schedule = |now: u64, (msgs, timers): Outputs, queue: &mut BinaryHeap<Reverse<(u64, u64)>>, pending: &mut BTreeMap<u64, Message>| {
        for m in msgs {
            let delay = (net.delay_ms(m.frame_len()) * 1e3).round() as u64;
            let link = link_free.entry((m.sender.clone(), m.recipient.clone())).or_default();
            let at = (now + delay).max(*link);
            *link = at;
            queue.push(Reverse((at, seq)));
            pending.insert(seq, m);
            seq += 1;
        }
        for (delay_ms, m) in timers {
            queue.push(Reverse((now + delay_ms * 1000, seq)));
            pending.insert(seq, m);
            seq += 1;
        }
    };
    schedule(0, initial, &mut queue, &mut pending);
    while let Some(Reverse((now, id))) = queue.pop() {
        let m = pending.remove(&id).expect("scheduled");
        let m = if m.round == Round::Timer {
            m
        } else {
            let (m, len) = transmit(&m);
            stats.count(&m, len);
            stats.round_ms.insert(format!("{:?}", m.round), now as f64 / 1e3);
            tap(&m);
            m
        };
        let Some(role) = roles.get_mut(&m.recipient) else {
            log::warn!("no node {} for {:?}", m.recipient, m.round);
            continue;
        };
        let out = timed_handle(role, m, shared, &mut stats);
        schedule(now, out, &mut queue, &mut pending);
    }
    stats.wall_ms = wall.elapsed().as_secs_f64() * 1e3;
    stats
}

pub enum Envelope {
    Msg(Message),
    Stop,
}

/// Delivers outgoing messages of a host.
pub trait Router: Send + Sync {
    fn route(&self, m: Message);
}

/// Routes to in-process host channels.
pub struct ChannelRouter {
    hosts: BTreeMap<String, usize>,
    senders: Vec<Sender<Envelope>>,
}

impl Router for ChannelRouter {
    fn route(&self, m: Message) {
        match self.hosts.get(&m.recipient) {
            Some(&h) => {
                let (m, _) = transmit(&m);
                let _ = self.senders[h].send(Envelope::Msg(m));
            }
            None => log::warn!("no node {} for {:?}", m.recipient, m.round),
        }
    }
}

#[derive(Default)]
struct TimerQueue {
    heap: BinaryHeap<Reverse<(Instant, u64)>>,
    msgs: BTreeMap<u64, Message>,
    seq: u64,
}

impl TimerQueue {
    fn arm(&mut self, delay_ms: u64, m: Message) {
        self.heap.push(Reverse((Instant::now() + Duration::from_millis(delay_ms), self.seq)));
        self.msgs.insert(self.seq, m);
        self.seq += 1;
    }

    fn next_deadline(&self) -> Option<Instant> {
        self.heap.peek().map(|Reverse((at, _))| *at)
    }

    fn pop_due(&mut self) -> Option<Message> {
        let Reverse((at, id)) = *self.heap.peek()?;
        if at > Instant::now() {
            return None;
        }
        self.heap.pop();
        self.msgs.remove(&id)
    }
}

/// The event loop of one host: several colocated roles sharing an inbox.
/// Returns when told to stop or the inbox closes; signals `done` once the
/// querier (if hosted here) has finished.
pub fn host_loop<G: Group>(
    roles: &mut [&mut Role<G>],
    shared: &Arc<Shared<G>>,
    inbox: &Receiver<Envelope>,
    router: &dyn Router,
    initial_timers: Vec<(u64, Message)>,
    done: Option<&Sender<()>>,
) -> RunStats {
    let mut stats = RunStats::default();
    let mut timers = TimerQueue::default();
    for (delay, m) in initial_timers {
        timers.arm(delay, m);
    }
    let mut signalled = false;
    loop {
        let next = if let Some(m) = timers.pop_due() {
            Some(m)
        } else {
            let received = match timers.next_deadline() {
                Some(at) => inbox.recv_timeout(at.saturating_duration_since(Instant::now())),
                None => inbox.recv().map_err(|_| RecvTimeoutError::Disconnected),
            };
            match received {
                Ok(Envelope::Msg(m)) => Some(m),
                Ok(Envelope::Stop) | Err(RecvTimeoutError::Disconnected) => break,
                Err(RecvTimeoutError::Timeout) => None,
            }
        };
        let Some(m) = next else { continue };
        if m.round != Round::Timer {
            stats.count(&m, m.frame_len());
        }
        let Some(role) = roles.iter_mut().find(|r| r.id() == m.recipient) else {
            log::warn!("host has no node {}", m.recipient);
            continue;
        };
        let (msgs, ts) = timed_handle(role, m, shared, &mut stats);
        for m in msgs {
            router.route(m);
        }
        for (delay, m) in ts {
            timers.arm(delay, m);
        }
        if !signalled && roles.iter().any(|r| r.finished()) {
            signalled = true;
            if let Some(d) = done {
                let _ = d.send(());
            }
        }
    }
    stats
}

/// Runs each host on its own thread until the querier finishes, then stops
/// every host. Roles not named in `hosts` get a host of their own.
pub fn run_threaded<G: Group>(
    roles: &mut BTreeMap<String, Role<G>>,
    hosts: &[Vec<String>],
    shared: &Arc<Shared<G>>,
    initial: Outputs,
) -> RunStats {
    let wall = Instant::now();
    let mut groups: Vec<Vec<String>> = hosts.to_vec();
    for id in roles.keys() {
        if !groups.iter().any(|g| g.contains(id)) {
            groups.push(vec![id.clone()]);
        }
    }
    let host_of: BTreeMap<String, usize> = groups
        .iter()
        .enumerate()
        .flat_map(|(i, g)| g.iter().map(move |id| (id.clone(), i)))
        .collect();
    let (senders, receivers): (Vec<_>, Vec<_>) = groups.iter().map(|_| crossbeam_channel::unbounded()).unzip();
    let router = ChannelRouter {
        hosts: host_of.clone(),
        senders: senders.clone(),
    };
    let mut per_host: Vec<Vec<&mut Role<G>>> = groups.iter().map(|_| Vec::new()).collect();
    for (id, role) in roles.iter_mut() {
        per_host[host_of[id]].push(role);
    }
    let (done_tx, done_rx) = crossbeam_channel::bounded(1);
    let (msgs, timers) = initial;
    let querier = shared.config.querier.id.clone();
    for m in msgs {
        router.route(m);
    }
    // initial timers belong to the querier and are re-armed on its host
    let querier_host = host_of[&querier];
    let mut stats = RunStats::default();
    std::thread::scope(|s| {
        let handles: Vec<_> = per_host
            .into_iter()
            .zip(receivers)
            .enumerate()
            .map(|(i, (mut host_roles, rx))| {
                let router = &router;
                let done = (i == querier_host).then(|| done_tx.clone());
                let shared = Arc::clone(shared);
                let timers = if i == querier_host { timers.clone() } else { Vec::new() };
                s.spawn(move || host_loop(&mut host_roles, &shared, &rx, router, timers, done.as_ref()))
            })
            .collect();
        let _ = done_rx.recv();
        for tx in &senders {
            let _ = tx.send(Envelope::Stop);
        }
        for h in handles {
            stats.merge(h.join().expect("host thread"));
        }
    });
    stats.wall_ms = wall.elapsed().as_secs_f64() * 1e3;
    stats
}
