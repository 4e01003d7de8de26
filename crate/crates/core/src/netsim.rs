//! Deterministic discrete-event datagram fabric with a virtual clock.
//!
//! Nodes register endpoints keyed by (address, port). Datagrams are
//! delivered in (deliver_at, sequence) order, so a fixed configuration and
//! seed always replay the identical event log. Per-link latency is fixed
//! (default 50 ms) with optional uniform jitter drawn from the seeded RNG.
//!
//! The module also renders and parses the `ip -6 route`-style tables that
//! devices consult to locate their IMS interface.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use thiserror::Error;

/// Virtual milliseconds since simulation start.
pub type Millis = u64;

/// Index of a registered node inside a [`Sim`].
pub type NodeId = usize;

pub const DEFAULT_LATENCY_MS: Millis = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("endpoint {0}:{1} is already bound")]
    DuplicateBinding(String, u16),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("route line {line}: {msg}")]
    RouteParse { line: usize, msg: String },
    #[error("routing table must contain exactly one default entry, found {0}")]
    DefaultRouteCount(usize),
}

/// One in-flight datagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Datagram {
    pub src_addr: String,
    pub src_port: u16,
    pub dst_addr: String,
    pub dst_port: u16,
    pub payload: Vec<u8>,
    pub deliver_at: Millis,
    /// Short label recorded in the event log; never interpreted.
    pub tag: String,
}

/// Behaviour attached to an endpoint.
pub trait Node {
    fn on_datagram(&mut self, net: &mut Net, dgram: &Datagram);
    fn on_timer(&mut self, net: &mut Net, token: u64) {
        let _ = (net, token);
    }
}

#[derive(Debug)]
enum EventKind {
    Deliver(Datagram),
    Timer { node: NodeId, token: u64 },
}

#[derive(Debug)]
struct Event {
    at: Millis,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Fabric configuration.
#[derive(Debug, Clone)]
pub struct NetConfig {
    pub latency_ms: Millis,
    pub jitter_ms: Option<Millis>,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { latency_ms: DEFAULT_LATENCY_MS, jitter_ms: None, seed: 0 }
    }
}

/// Shared fabric state handed to node handlers: clock, queue, counters, log.
pub struct Net {
    now: Millis,
    seq: u64,
    queue: BinaryHeap<Reverse<Event>>,
    bindings: BTreeMap<(String, u16), NodeId>,
    latency: Millis,
    jitter: Option<Millis>,
    rng: ChaCha8Rng,
    pub log: Vec<String>,
    sent: u64,
    delivered: u64,
    dropped: u64,
}

impl Net {
    fn new(cfg: &NetConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0xfab);
        Net {
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            bindings: BTreeMap::new(),
            latency: cfg.latency_ms,
            jitter: cfg.jitter_ms,
            rng,
            log: Vec::new(),
            sent: 0,
            delivered: 0,
            dropped: 0,
        }
    }

    pub fn now(&self) -> Millis {
        self.now
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    fn link_delay(&mut self) -> Millis {
        match self.jitter {
            Some(j) if j > 0 => self.latency + self.rng.random_range(0..=j),
            _ => self.latency,
        }
    }

    /// Queues a datagram with fabric-assigned delivery time.
    pub fn send(
        &mut self,
        src_addr: &str,
        src_port: u16,
        dst_addr: &str,
        dst_port: u16,
        payload: Vec<u8>,
        tag: &str,
    ) {
        let deliver_at = self.now + self.link_delay();
        self.send_datagram(Datagram {
            src_addr: src_addr.to_string(),
            src_port,
            dst_addr: dst_addr.to_string(),
            dst_port,
            payload,
            deliver_at,
            tag: tag.to_string(),
        });
    }

    /// Queues a fully-formed datagram. A delivery time in the past is
    /// clamped to the current instant.
    pub fn send_datagram(&mut self, mut d: Datagram) {
        if d.deliver_at < self.now {
            d.deliver_at = self.now;
        }
        self.sent += 1;
        self.seq += 1;
        self.queue.push(Reverse(Event {
            at: d.deliver_at,
            seq: self.seq,
            kind: EventKind::Deliver(d),
        }));
    }

    /// Schedules a timer callback on `node` after `delay`.
    pub fn schedule(&mut self, node: NodeId, delay: Millis, token: u64) {
        self.schedule_at(node, self.now + delay, token);
    }

    /// Schedules a timer callback on `node` at absolute time `at`.
    pub fn schedule_at(&mut self, node: NodeId, at: Millis, token: u64) {
        let at = at.max(self.now);
        self.seq += 1;
        self.queue.push(Reverse(Event { at, seq: self.seq, kind: EventKind::Timer { node, token } }));
    }
}

/// A simulation instance: the fabric plus the nodes it drives.
pub struct Sim<N: Node> {
    pub net: Net,
    nodes: Vec<N>,
}

impl<N: Node> Sim<N> {
    pub fn new(cfg: &NetConfig) -> Self {
        Sim { net: Net::new(cfg), nodes: Vec::new() }
    }

    pub fn add_node(&mut self, node: N) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Binds (addr, port) to an existing node.
    pub fn bind(&mut self, addr: &str, port: u16, node: NodeId) -> Result<(), NetError> {
        if node >= self.nodes.len() {
            return Err(NetError::UnknownNode(node));
        }
        let key = (addr.to_string(), port);
        if self.net.bindings.contains_key(&key) {
            return Err(NetError::DuplicateBinding(addr.to_string(), port));
        }
        self.net.bindings.insert(key, node);
        Ok(())
    }

    /// Adds a node and binds it in one step.
    pub fn register_endpoint(&mut self, addr: &str, port: u16, node: N) -> Result<NodeId, NetError> {
        let key = (addr.to_string(), port);
        if self.net.bindings.contains_key(&key) {
            return Err(NetError::DuplicateBinding(addr.to_string(), port));
        }
        let id = self.add_node(node);
        self.net.bindings.insert(key, id);
        Ok(id)
    }

    pub fn node(&self, id: NodeId) -> &N {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut N {
        &mut self.nodes[id]
    }

    /// Simultaneous access to one node and the fabric, for driving node
    /// methods that schedule or send from outside the event loop.
    pub fn node_and_net(&mut self, id: NodeId) -> (&mut N, &mut Net) {
        (&mut self.nodes[id], &mut self.net)
    }

    pub fn schedule_timer(&mut self, node: NodeId, at: Millis, token: u64) {
        self.net.schedule_at(node, at, token);
    }

    /// Runs events with timestamp <= `t_end`; returns the number processed.
    pub fn run_until(&mut self, t_end: Millis) -> usize {
        let mut count = 0;
        while let Some(Reverse(head)) = self.net.queue.peek() {
            if head.at > t_end {
                break;
            }
            let Reverse(ev) = self.net.queue.pop().unwrap();
            debug_assert!(ev.at >= self.net.now, "clock must not run backwards");
            self.net.now = ev.at;
            count += 1;
            match ev.kind {
                EventKind::Deliver(d) => {
                    let key = (d.dst_addr.clone(), d.dst_port);
                    match self.net.bindings.get(&key).copied() {
                        Some(id) => {
                            self.net.delivered += 1;
                            self.net.log.push(format!(
                                "t={} {}:{} -> {}:{} {} bytes {}",
                                ev.at,
                                d.src_addr,
                                d.src_port,
                                d.dst_addr,
                                d.dst_port,
                                d.payload.len(),
                                d.tag
                            ));
                            self.nodes[id].on_datagram(&mut self.net, &d);
                        }
                        None => {
                            self.net.dropped += 1;
                            self.net.log.push(format!(
                                "t={} {}:{} -> {}:{} {} bytes {} [dropped]",
                                ev.at,
                                d.src_addr,
                                d.src_port,
                                d.dst_addr,
                                d.dst_port,
                                d.payload.len(),
                                d.tag
                            ));
                        }
                    }
                }
                EventKind::Timer { node, token } => {
                    if node < self.nodes.len() {
                        self.nodes[node].on_timer(&mut self.net, token);
                    }
                }
            }
        }
        if self.net.now < t_end {
            self.net.now = t_end;
        }
        count
    }

    /// Runs until the queue drains completely.
    pub fn run_to_idle(&mut self) -> usize {
        let mut count = 0;
        while let Some(Reverse(head)) = self.net.queue.peek() {
            let t = head.at;
            count += self.run_until(t);
        }
        count
    }
}

/// One `ip -6 route`-style table line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteEntry {
    /// `"default"` or an address prefix.
    pub prefix: String,
    pub via: String,
    pub dev: String,
    pub metric: Option<u32>,
}

/// Renders entries, one `<prefix> via <via> dev <dev>[ metric <m>]` line each.
pub fn render_routing_table(entries: &[RouteEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("{} via {} dev {}", e.prefix, e.via, e.dev));
        if let Some(m) = e.metric {
            out.push_str(&format!(" metric {m}"));
        }
        out.push('\n');
    }
    out
}

/// Parses a routing table; requires exactly one default entry.
pub fn parse_routing_table(text: &str) -> Result<Vec<RouteEntry>, NetError> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: &str| NetError::RouteParse { line: line_no, msg: msg.to_string() };
        if tokens.len() < 5 || tokens[1] != "via" || tokens[3] != "dev" {
            return Err(err("expected `<prefix> via <via> dev <dev>[ metric <m>]`"));
        }
        let metric = match tokens.len() {
            5 => None,
            7 if tokens[5] == "metric" => Some(
                tokens[6]
                    .parse::<u32>()
                    .map_err(|_| err("metric is not an integer"))?,
            ),
            _ => return Err(err("trailing tokens after dev")),
        };
        entries.push(RouteEntry {
            prefix: tokens[0].to_string(),
            via: tokens[2].to_string(),
            dev: tokens[4].to_string(),
            metric,
        });
    }
    let defaults = entries.iter().filter(|e| e.prefix == "default").count();
    if defaults != 1 {
        return Err(NetError::DefaultRouteCount(defaults));
    }
    Ok(entries)
}
