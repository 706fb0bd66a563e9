//! Server and client endpoints running over a shared forward/return
//! bottleneck.
//!
//! Every flow is a download: the client opens the connection on the return
//! link, the server sends the file on the forward link. A fresh connection
//! spends `handshake_rtts` round trips before the client sends its request;
//! a resumed one carries the request (and, in `ResumeBdp`, the saved path
//! token) in its first packet.

use std::collections::{BTreeMap, VecDeque};
use std::net::{IpAddr, Ipv4Addr};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::resumption::{
    capture_bdp, check_rtt, policy, precheck, BdpFrame, SeedDecision, SeedOutcome, SeedPolicy,
    TokenMode, TokenRecord, TokenStore,
};
use crate::simnet::{
    Direction, EventQueue, Link, LinkConfig, LinkStats, Packet, PacketKind, TraceEvent, TraceKind,
    TraceLog, TransmitOutcome,
};
use crate::transport::{
    AckSample, CongestionAlgorithm, Connection, OpenInfo, RangeSet, ResumeMode, TransferOutcome,
    TransferResult,
};
use crate::{Micros, HEADER_BYTES, MICROS_PER_SEC, MTU};

pub const HANDSHAKE_BYTES: u32 = 1200;
pub const ACK_BYTES: u32 = 50;
pub const REQUEST_BYTES: u32 = 100;
const CROSS_FLOW_ID: u32 = 0;
const CLIENT_TIMEOUT_US: Micros = 2 * MICROS_PER_SEC;
const MAX_BACKOFF: u32 = 6;

/// Poisson background load on the forward link. Its packets occupy the
/// queue but belong to no flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossTraffic {
    /// Mean offered load as a fraction of the forward rate.
    pub load: f64,
}

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub forward: LinkConfig,
    pub back: LinkConfig,
    pub server_name: String,
    pub token_mode: TokenMode,
    /// Lifetime written into captured frames.
    pub token_lifetime_s: u64,
    /// Lifetime of the session ticket that allows 0-RTT at all.
    pub ticket_lifetime_s: u64,
    pub policy: SeedPolicy,
    /// Wall-clock seconds at simulated time zero.
    pub wall_clock_origin_s: u64,
    pub horizon_us: Micros,
    pub rate_bin_us: Micros,
    pub record_trace: bool,
    pub cross_traffic: Option<CrossTraffic>,
    pub seed: u64,
}

impl WorldConfig {
    pub fn new(forward: LinkConfig, back: LinkConfig) -> Self {
        Self {
            forward,
            back,
            server_name: "server.example".to_string(),
            token_mode: TokenMode::BdpFrame,
            token_lifetime_s: 600,
            ticket_lifetime_s: 7 * 24 * 3600,
            policy: SeedPolicy::default(),
            wall_clock_origin_s: 1_700_000_000,
            horizon_us: 3_600 * MICROS_PER_SEC,
            rate_bin_us: 100_000,
            record_trace: false,
            cross_traffic: None,
            seed: 0,
        }
    }
}

/// Token contents forced onto a resuming client, bypassing its store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresentedToken {
    pub issued_at_s: u64,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct FlowSpec {
    /// Non-zero; 0 is reserved for cross traffic.
    pub flow_id: u32,
    pub start_us: Micros,
    pub size_bytes: u64,
    pub mode: ResumeMode,
    pub algorithm: CongestionAlgorithm,
    pub handshake_rtts: u32,
    pub client_ip: IpAddr,
    /// Source address the server sees, if it differs (NAT rebinding).
    pub observed_ip: Option<IpAddr>,
    /// Send a token and session ticket once the transfer completes.
    pub issue_token: bool,
    pub presented_token: Option<PresentedToken>,
}

impl FlowSpec {
    pub fn new(flow_id: u32, size_bytes: u64) -> Self {
        Self {
            flow_id,
            start_us: 0,
            size_bytes,
            mode: ResumeMode::Fresh,
            algorithm: CongestionAlgorithm::NewReno,
            handshake_rtts: 1,
            client_ip: IpAddr::V4(Ipv4Addr::new(192, 0, 2, flow_id.min(254) as u8)),
            observed_ip: None,
            issue_token: false,
            presented_token: None,
        }
    }

    pub fn starting_at(mut self, start_us: Micros) -> Self {
        self.start_us = start_us;
        self
    }

    pub fn with_mode(mut self, mode: ResumeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_algorithm(mut self, algorithm: CongestionAlgorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_client_ip(mut self, ip: IpAddr) -> Self {
        self.client_ip = ip;
        self
    }

    pub fn issuing_token(mut self) -> Self {
        self.issue_token = true;
        self
    }

    fn observed_ip(&self) -> IpAddr {
        self.observed_ip.unwrap_or(self.client_ip)
    }
}

/// Client and server memory carried from one world into the next.
#[derive(Debug, Clone, Default)]
pub struct ResumptionState {
    pub client_store: TokenStore,
    pub server_store: TokenStore,
    /// Session tickets: (server, client address) -> issue time.
    pub tickets: BTreeMap<(String, IpAddr), u64>,
}

#[derive(Debug, Clone)]
struct ResumeOffer {
    ticket_age_s: u64,
    ticket_ip: IpAddr,
    bdp: bool,
    token: Option<Vec<u8>>,
}

#[derive(Debug, Clone)]
enum Body {
    Hello {
        round: u32,
        offer: Option<ResumeOffer>,
    },
    HelloReply {
        pn: u64,
        round: u32,
        accepted: bool,
    },
    Request,
    Data {
        pn: u64,
        offset: u64,
        len: u64,
    },
    Ack {
        pn: u64,
    },
    Token {
        pn: u64,
        issued_at_s: u64,
        bytes: Option<Vec<u8>>,
    },
    Cross,
}

#[derive(Debug, Clone)]
enum Action {
    ClientStart(usize),
    Deliver {
        dir: Direction,
        packet: Packet,
        body: Body,
    },
    ServerWake(usize),
    ServerTimer {
        flow: usize,
        gen: u64,
    },
    ClientTimer {
        flow: usize,
        gen: u64,
    },
    CrossArrival,
}

#[derive(Debug, Clone)]
enum Sent {
    HelloReply {
        round: u32,
        accepted: bool,
    },
    Data {
        offset: u64,
        len: u64,
    },
    Token {
        issued_at_s: u64,
        bytes: Option<Vec<u8>>,
    },
}

#[derive(Debug, Clone)]
struct SentPacket {
    sent_at: Micros,
    bytes: u64,
    content: Sent,
    delivered_at_send: u64,
    delivered_time_at_send: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ServerPhase {
    Listening,
    Handshaking,
    Sending,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ClientPhase {
    Idle,
    Handshaking(u32),
    AwaitingData,
    Receiving,
    Done,
}

/// One paced data departure, kept when tracing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Departure {
    pub t_us: Micros,
    pub payload_bytes: u64,
    pub pacing_rate_bps: Option<u64>,
}

#[derive(Debug, Clone, Default)]
struct Timer {
    deadline: Option<Micros>,
    event_at: Option<Micros>,
    gen: u64,
    backoff: u32,
}

struct Server {
    conn: Connection,
    phase: ServerPhase,
    sent: BTreeMap<u64, SentPacket>,
    next_offset: u64,
    retx: VecDeque<(u64, u64)>,
    acked: RangeSet,
    pacer_next_ns: u64,
    wake_at: Option<Micros>,
    timer: Timer,
    replied_rounds: u32,
    pending_rtt_check: Option<BdpFrame>,
    decision: Option<SeedDecision>,
    rejected_offer: bool,
    completion_us: Option<Micros>,
    retransmitted_bytes: u64,
    token_outstanding: bool,
    departures: Vec<Departure>,
}

struct Client {
    phase: ClientPhase,
    info: Option<OpenInfo>,
    offer: Option<ResumeOffer>,
    received: RangeSet,
    first_byte_us: Option<Micros>,
    complete_us: Option<Micros>,
    timer_gen: u64,
    backoff: u32,
}

struct Flow {
    spec: FlowSpec,
    server: Server,
    client: Client,
    finished: bool,
}

/// A self-contained simulation instance.
pub struct World {
    cfg: WorldConfig,
    queue: EventQueue<Action>,
    forward: Link,
    back: Link,
    flows: Vec<Flow>,
    state: ResumptionState,
    trace: TraceLog,
    next_packet_id: u64,
    rng: ChaCha8Rng,
    bins: BTreeMap<u32, Vec<u64>>,
    unfinished: usize,
    events: u64,
}

impl World {
    pub fn new(cfg: WorldConfig, flows: Vec<FlowSpec>) -> Self {
        Self::with_state(cfg, flows, ResumptionState::default())
    }

    pub fn with_state(cfg: WorldConfig, specs: Vec<FlowSpec>, state: ResumptionState) -> Self {
        let mut queue = EventQueue::new();
        let flows: Vec<Flow> = specs
            .into_iter()
            .enumerate()
            .map(|(i, spec)| {
                assert_ne!(spec.flow_id, CROSS_FLOW_ID, "flow id 0 is reserved");
                assert!(spec.size_bytes > 0, "file size must be positive");
                queue.schedule_at(spec.start_us, Action::ClientStart(i));
                Flow {
                    server: Server::new(spec.algorithm),
                    client: Client::new(),
                    spec,
                    finished: false,
                }
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        if cfg.cross_traffic.is_some_and(|c| c.load > 0.0) {
            let first = next_cross_gap(&cfg, &mut rng);
            queue.schedule_at(first, Action::CrossArrival);
        }
        Self {
            forward: Link::new(cfg.forward),
            back: Link::new(cfg.back),
            unfinished: flows.len(),
            flows,
            cfg,
            queue,
            state,
            trace: TraceLog::new(),
            next_packet_id: 0,
            rng,
            bins: BTreeMap::new(),
            events: 0,
        }
    }

    pub fn now(&self) -> Micros {
        self.queue.now()
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    fn now_wall_s(&self) -> u64 {
        self.cfg.wall_clock_origin_s + self.now() / MICROS_PER_SEC
    }

    /// Runs until every flow finished or the horizon passed. Returns the
    /// number of events processed.
    pub fn run(&mut self) -> u64 {
        let horizon = self.cfg.horizon_us;
        while self.unfinished > 0 {
            let Some((_, action)) = self.queue.pop_until(horizon) else {
                self.queue.advance_to(horizon);
                break;
            };
            self.events += 1;
            self.dispatch(action);
        }
        self.events
    }

    /// Processes events up to `t_end` regardless of flow state.
    pub fn run_until(&mut self, t_end: Micros) -> u64 {
        let mut n = 0;
        while let Some((_, action)) = self.queue.pop_until(t_end) {
            n += 1;
            self.dispatch(action);
        }
        self.queue.advance_to(t_end);
        self.events += n;
        n
    }

    pub fn trace(&self) -> &TraceLog {
        &self.trace
    }

    pub fn resumption_state(&self) -> &ResumptionState {
        &self.state
    }

    pub fn into_resumption_state(self) -> ResumptionState {
        self.state
    }

    pub fn link_stats(&self) -> (LinkStats, LinkStats) {
        (self.forward.stats(), self.back.stats())
    }

    pub fn departures(&self, flow_id: u32) -> &[Departure] {
        self.flow(flow_id).map_or(&[], |f| &f.server.departures)
    }

    pub fn connection(&self, flow_id: u32) -> Option<&Connection> {
        self.flow(flow_id).map(|f| &f.server.conn)
    }

    fn flow(&self, flow_id: u32) -> Option<&Flow> {
        self.flows.iter().find(|f| f.spec.flow_id == flow_id)
    }

    fn flow_index(&self, flow_id: u32) -> Option<usize> {
        self.flows.iter().position(|f| f.spec.flow_id == flow_id)
    }

    /// Distinct payload bytes received per rate bin.
    pub fn received_bins(&self, flow_id: u32) -> &[u64] {
        self.bins.get(&flow_id).map_or(&[], Vec::as_slice)
    }

    pub fn results(&self) -> Vec<TransferResult> {
        self.flows.iter().map(|f| self.result_of(f)).collect()
    }

    pub fn result(&self, flow_id: u32) -> Option<TransferResult> {
        self.flow(flow_id).map(|f| self.result_of(f))
    }

    fn result_of(&self, f: &Flow) -> TransferResult {
        let s = &f.server;
        let info = f.client.info;
        let completed = s.completion_us.is_some();
        TransferResult {
            flow_id: f.spec.flow_id,
            file_size_bytes: f.spec.size_bytes,
            start_us: f.spec.start_us,
            first_byte_us: f.client.first_byte_us,
            completion_us: s.completion_us.unwrap_or(self.now()),
            client_complete_us: f.client.complete_us,
            delivered_bytes: f.client.received.covered(),
            retransmitted_bytes: s.retransmitted_bytes,
            outcome: if completed {
                TransferOutcome::Completed
            } else {
                TransferOutcome::Timeout
            },
            requested_mode: f.spec.mode,
            effective_mode: s.conn.mode,
            fallback: info.is_some_and(|i| i.fallback) || s.rejected_offer && s.decision.is_none(),
            congestion_events: s.conn.congestion_events(),
            seed_discards: s.conn.seed_discards(),
            decision: s.decision,
        }
    }

    fn dispatch(&mut self, action: Action) {
        match action {
            Action::ClientStart(i) => self.client_start(i),
            Action::Deliver { dir, packet, body } => self.deliver(dir, packet, body),
            Action::ServerWake(i) => {
                self.flows[i].server.wake_at = None;
                self.server_try_send(i);
            }
            Action::ServerTimer { flow, gen } => self.server_timer(flow, gen),
            Action::ClientTimer { flow, gen } => self.client_timer(flow, gen),
            Action::CrossArrival => self.cross_arrival(),
        }
    }

    // ----- packets ------------------------------------------------------

    fn transmit(&mut self, dir: Direction, flow_id: u32, kind: PacketKind, size: u32, body: Body) {
        let now = self.now();
        let mut packet = Packet {
            id: self.next_packet_id,
            flow_id,
            size_bytes: size,
            kind,
            enqueue_time_us: now,
            deliver_time_us: now,
        };
        self.next_packet_id += 1;
        let link = match dir {
            Direction::Forward => &mut self.forward,
            Direction::Return => &mut self.back,
        };
        match link.transmit(&packet, now) {
            TransmitOutcome::Delivered(at) => {
                packet.deliver_time_us = at;
                if self.cfg.record_trace {
                    self.trace
                        .push(TraceEvent::new(now, TraceKind::Enqueue, dir, &packet));
                }
                if !matches!(body, Body::Cross) {
                    self.queue
                        .schedule_at(at, Action::Deliver { dir, packet, body });
                }
            }
            TransmitOutcome::Dropped => {
                if self.cfg.record_trace {
                    self.trace
                        .push(TraceEvent::new(now, TraceKind::Drop, dir, &packet));
                }
            }
        }
    }

    fn deliver(&mut self, dir: Direction, packet: Packet, body: Body) {
        if self.cfg.record_trace {
            self.trace.push(TraceEvent::new(
                self.now(),
                TraceKind::Deliver,
                dir,
                &packet,
            ));
        }
        let Some(i) = self.flow_index(packet.flow_id) else {
            return;
        };
        match dir {
            Direction::Return => self.server_receive(i, body),
            Direction::Forward => self.client_receive(i, body),
        }
    }

    fn cross_arrival(&mut self) {
        if self.unfinished == 0 {
            return;
        }
        self.transmit(
            Direction::Forward,
            CROSS_FLOW_ID,
            PacketKind::Data,
            MTU as u32,
            Body::Cross,
        );
        let gap = next_cross_gap(&self.cfg, &mut self.rng);
        self.queue.schedule(gap, Action::CrossArrival);
    }

    // ----- client -------------------------------------------------------

    fn client_start(&mut self, i: usize) {
        let now_s = self.now_wall_s();
        let spec = self.flows[i].spec.clone();
        let server_name = self.cfg.server_name.clone();

        let ticket = self
            .state
            .tickets
            .get(&(server_name.clone(), spec.client_ip))
            .copied()
            .filter(|&issued| now_s <= issued.saturating_add(self.cfg.ticket_lifetime_s));
        let mut offer = None;
        if let Some(issued) = ticket {
            match spec.mode {
                ResumeMode::Fresh => {}
                ResumeMode::Resume0Rtt => {
                    offer = Some(ResumeOffer {
                        ticket_age_s: now_s.saturating_sub(issued),
                        ticket_ip: spec.client_ip,
                        bdp: false,
                        token: None,
                    })
                }
                ResumeMode::ResumeBdp => {
                    offer = self.bdp_offer(&spec, issued, now_s);
                }
            }
        }
        if let (ResumeMode::ResumeBdp, Some(t)) = (spec.mode, &spec.presented_token) {
            // forced token, used to exercise the server-side checks
            offer = Some(ResumeOffer {
                ticket_age_s: now_s.saturating_sub(t.issued_at_s),
                ticket_ip: spec.client_ip,
                bdp: true,
                token: Some(t.bytes.clone()),
            });
        }

        let (conn, info) = Connection::open(
            spec.mode,
            spec.handshake_rtts,
            offer.is_some(),
            spec.algorithm,
        );
        let flow = &mut self.flows[i];
        flow.server.conn = conn;
        flow.client.info = Some(info);
        flow.client.offer = offer.clone();
        flow.client.phase = if offer.is_some() {
            ClientPhase::AwaitingData
        } else {
            ClientPhase::Handshaking(1)
        };
        self.client_send_hello(i, 1);
        self.client_arm_timer(i);
    }

    fn bdp_offer(&self, spec: &FlowSpec, ticket_issued: u64, now_s: u64) -> Option<ResumeOffer> {
        let token = match self.cfg.token_mode {
            TokenMode::LocalStorage => None,
            mode => {
                let record = self.state.client_store.get_mode(
                    &self.cfg.server_name,
                    spec.client_ip,
                    mode,
                    now_s,
                )?;
                // opaque tokens go back verbatim; readable frames are re-encoded
                Some(match mode {
                    TokenMode::OpaqueToken => record.opaque_bytes.clone()?,
                    _ => crate::encode_frame(&record.frame),
                })
            }
        };
        Some(ResumeOffer {
            ticket_age_s: now_s.saturating_sub(ticket_issued),
            ticket_ip: spec.client_ip,
            bdp: true,
            token,
        })
    }

    fn client_send_hello(&mut self, i: usize, round: u32) {
        let flow = &self.flows[i];
        let offer = if round == 1 {
            flow.client.offer.clone()
        } else {
            None
        };
        let flow_id = flow.spec.flow_id;
        self.transmit(
            Direction::Return,
            flow_id,
            PacketKind::Handshake,
            HANDSHAKE_BYTES,
            Body::Hello { round, offer },
        );
    }

    fn client_arm_timer(&mut self, i: usize) {
        let c = &mut self.flows[i].client;
        c.timer_gen += 1;
        let delay = CLIENT_TIMEOUT_US << c.backoff.min(MAX_BACKOFF);
        let gen = c.timer_gen;
        self.queue
            .schedule(delay, Action::ClientTimer { flow: i, gen });
    }

    fn client_timer(&mut self, i: usize, gen: u64) {
        let c = &mut self.flows[i].client;
        if gen != c.timer_gen {
            return;
        }
        c.backoff += 1;
        match c.phase {
            ClientPhase::Handshaking(round) => self.client_send_hello(i, round),
            ClientPhase::AwaitingData => {
                if self.flows[i].client.offer.is_some() {
                    self.client_send_hello(i, 1);
                } else {
                    self.client_send(i, PacketKind::Data, REQUEST_BYTES, Body::Request);
                }
            }
            _ => return,
        }
        self.client_arm_timer(i);
    }

    fn client_send(&mut self, i: usize, kind: PacketKind, size: u32, body: Body) {
        let flow_id = self.flows[i].spec.flow_id;
        self.transmit(Direction::Return, flow_id, kind, size, body);
    }

    fn client_ack(&mut self, i: usize, pn: u64) {
        self.client_send(i, PacketKind::Ack, ACK_BYTES, Body::Ack { pn });
    }

    fn client_receive(&mut self, i: usize, body: Body) {
        let now = self.now();
        match body {
            Body::HelloReply {
                pn,
                round,
                accepted,
            } => {
                self.client_ack(i, pn);
                let (phase, handshake_rtts) = {
                    let f = &self.flows[i];
                    (f.client.phase, f.spec.handshake_rtts.max(1))
                };
                let round_done = match phase {
                    ClientPhase::Handshaking(r) if r == round => Some(r),
                    ClientPhase::AwaitingData
                        if round == 1 && !accepted && self.flows[i].client.offer.is_some() =>
                    {
                        // 0-RTT refused: continue as a full handshake
                        self.flows[i].client.offer = None;
                        Some(1)
                    }
                    _ => None,
                };
                if let Some(r) = round_done {
                    self.flows[i].client.backoff = 0;
                    if r < handshake_rtts {
                        self.flows[i].client.phase = ClientPhase::Handshaking(r + 1);
                        self.client_send_hello(i, r + 1);
                    } else {
                        self.flows[i].client.phase = ClientPhase::AwaitingData;
                        self.client_send(i, PacketKind::Data, REQUEST_BYTES, Body::Request);
                    }
                    self.client_arm_timer(i);
                }
            }
            Body::Data { pn, offset, len } => {
                self.client_ack(i, pn);
                let bin_us = self.cfg.rate_bin_us.max(1);
                let flow = &mut self.flows[i];
                let fresh = flow.client.received.insert(offset, offset + len);
                if flow.client.first_byte_us.is_none() {
                    flow.client.first_byte_us = Some(now);
                }
                if matches!(
                    flow.client.phase,
                    ClientPhase::AwaitingData | ClientPhase::Handshaking(_)
                ) {
                    flow.client.phase = ClientPhase::Receiving;
                    flow.client.timer_gen += 1;
                }
                if fresh > 0 {
                    let bins = self.bins.entry(flow.spec.flow_id).or_default();
                    let bin = (now / bin_us) as usize;
                    if bins.len() <= bin {
                        bins.resize(bin + 1, 0);
                    }
                    bins[bin] += fresh;
                }
                if flow.client.received.covered() == flow.spec.size_bytes
                    && flow.client.complete_us.is_none()
                {
                    flow.client.complete_us = Some(now);
                    flow.client.phase = ClientPhase::Done;
                }
            }
            Body::Token {
                pn,
                issued_at_s,
                bytes,
            } => {
                self.client_ack(i, pn);
                self.client_store_token(i, issued_at_s, bytes);
            }
            _ => {}
        }
    }

    fn client_store_token(&mut self, i: usize, issued_at_s: u64, bytes: Option<Vec<u8>>) {
        let ip = self.flows[i].spec.client_ip;
        let server_name = self.cfg.server_name.clone();
        self.state
            .tickets
            .insert((server_name.clone(), ip), issued_at_s);
        let mode = self.cfg.token_mode;
        let Some(bytes) = bytes else {
            return;
        };
        if let Ok(record) = TokenRecord::from_wire(server_name, mode, issued_at_s, &bytes) {
            // in-memory store: put cannot fail on I/O
            let _ = self.state.client_store.put(record);
        }
    }

    // ----- server -------------------------------------------------------

    fn server_receive(&mut self, i: usize, body: Body) {
        match body {
            Body::Hello { round, offer } => self.server_on_hello(i, round, offer),
            Body::Request => {
                let s = &mut self.flows[i].server;
                if s.phase == ServerPhase::Handshaking {
                    s.phase = ServerPhase::Sending;
                    s.conn.establish();
                    self.server_try_send(i);
                }
            }
            Body::Ack { pn } => self.server_on_ack(i, pn),
            _ => {}
        }
    }

    fn server_on_hello(&mut self, i: usize, round: u32, offer: Option<ResumeOffer>) {
        let phase = self.flows[i].server.phase;
        match phase {
            ServerPhase::Listening => {
                let accepted = match offer {
                    Some(offer) => self.server_evaluate_offer(i, &offer),
                    None => false,
                };
                let s = &mut self.flows[i].server;
                s.replied_rounds = 1;
                if accepted {
                    s.phase = ServerPhase::Sending;
                    s.conn.establish();
                } else {
                    s.phase = ServerPhase::Handshaking;
                    s.conn.mode = ResumeMode::Fresh;
                }
                self.server_send_control(i, Sent::HelloReply { round: 1, accepted });
                if accepted {
                    self.server_try_send(i);
                }
            }
            ServerPhase::Handshaking if round == self.flows[i].server.replied_rounds + 1 => {
                self.flows[i].server.replied_rounds = round;
                self.server_send_control(
                    i,
                    Sent::HelloReply {
                        round,
                        accepted: false,
                    },
                );
            }
            _ => {}
        }
    }

    /// Early checks on a resumption offer. Returns whether 0-RTT is
    /// accepted; a refused offer turns the connection into a fresh one.
    fn server_evaluate_offer(&mut self, i: usize, offer: &ResumeOffer) -> bool {
        if !offer.bdp {
            return true;
        }
        let now_s = self.now_wall_s();
        let issued_at_s = now_s.saturating_sub(offer.ticket_age_s);
        let mode = self.cfg.token_mode;
        let record = match (&offer.token, mode) {
            (_, TokenMode::LocalStorage) => self
                .state
                .server_store
                .records()
                .into_iter()
                .rfind(|r| {
                    r.server_name == self.cfg.server_name
                        && r.client_ip() == offer.ticket_ip
                        && r.mode == TokenMode::LocalStorage
                })
                .cloned()
                .ok_or(None),
            (Some(bytes), mode) => {
                TokenRecord::from_wire(self.cfg.server_name.clone(), mode, issued_at_s, bytes)
                    .map_err(|_| Some(SeedOutcome::RejectedMalformed))
            }
            (None, _) => Err(None),
        };
        let observed = self.flows[i].spec.observed_ip();
        let result =
            record.and_then(|r| precheck(&r, observed, now_s, &self.cfg.policy).map_err(Some));
        let s = &mut self.flows[i].server;
        match result {
            Ok(frame) => {
                s.pending_rtt_check = Some(frame);
                true
            }
            Err(outcome) => {
                s.decision = outcome.map(SeedDecision::rejected);
                s.rejected_offer = true;
                false
            }
        }
    }

    fn server_send_control(&mut self, i: usize, content: Sent) {
        let now = self.now();
        let flow_id = self.flows[i].spec.flow_id;
        let size = match &content {
            Sent::HelloReply { .. } => HANDSHAKE_BYTES,
            Sent::Token { bytes, .. } => {
                (HEADER_BYTES as usize + 8 + bytes.as_ref().map_or(0, Vec::len)) as u32
            }
            Sent::Data { .. } => unreachable!("data goes through server_try_send"),
        };
        let s = &mut self.flows[i].server;
        let pn = s.conn.on_packet_sent(u64::from(size));
        let (kind, body) = match &content {
            Sent::HelloReply { round, accepted } => (
                PacketKind::Handshake,
                Body::HelloReply {
                    pn,
                    round: *round,
                    accepted: *accepted,
                },
            ),
            Sent::Token { issued_at_s, bytes } => (
                PacketKind::Token,
                Body::Token {
                    pn,
                    issued_at_s: *issued_at_s,
                    bytes: bytes.clone(),
                },
            ),
            Sent::Data { .. } => unreachable!(),
        };
        let delivered = s.conn.delivered();
        s.sent.insert(
            pn,
            SentPacket {
                sent_at: now,
                bytes: u64::from(size),
                content,
                delivered_at_send: delivered,
                delivered_time_at_send: if delivered == 0 {
                    now
                } else {
                    s.conn.delivered_time()
                },
            },
        );
        self.server_arm_timer_if_idle(i);
        self.transmit(Direction::Forward, flow_id, kind, size, body);
    }

    fn server_try_send(&mut self, i: usize) {
        loop {
            let now = self.now();
            let now_ns = now * 1000;
            let flow = &mut self.flows[i];
            let s = &mut flow.server;
            if s.phase != ServerPhase::Sending {
                return;
            }
            while let Some(&(off, len)) = s.retx.front() {
                if s.acked.contains_range(off, off + len) {
                    s.retx.pop_front();
                } else {
                    break;
                }
            }
            let (offset, len, is_retx) = match s.retx.front() {
                Some(&(off, len)) => (off, len, true),
                None if s.next_offset < flow.spec.size_bytes => {
                    let len = crate::MSS.min(flow.spec.size_bytes - s.next_offset);
                    (s.next_offset, len, false)
                }
                None => return,
            };
            if !s.conn.can_send() {
                return;
            }
            let rate = s.conn.pacing_rate_bps();
            if rate.is_some() && now_ns < s.pacer_next_ns {
                let wake = s.pacer_next_ns.div_ceil(1000);
                if s.wake_at.is_none_or(|w| w > wake) {
                    s.wake_at = Some(wake);
                    self.queue.schedule_at(wake, Action::ServerWake(i));
                }
                return;
            }
            if is_retx {
                s.retx.pop_front();
                s.retransmitted_bytes += len;
            } else {
                s.next_offset += len;
            }
            if let Some(rate) = rate {
                let spacing = len * 8 * 1_000_000_000 / rate.max(1);
                let base = s.pacer_next_ns.max(now_ns.saturating_sub(999));
                s.pacer_next_ns = base + spacing;
            }
            if self.cfg.record_trace {
                s.departures.push(Departure {
                    t_us: now,
                    payload_bytes: len,
                    pacing_rate_bps: rate,
                });
            }
            let pn = s.conn.on_packet_sent(len);
            let delivered = s.conn.delivered();
            s.sent.insert(
                pn,
                SentPacket {
                    sent_at: now,
                    bytes: len,
                    content: Sent::Data { offset, len },
                    delivered_at_send: delivered,
                    delivered_time_at_send: if delivered == 0 {
                        now
                    } else {
                        s.conn.delivered_time()
                    },
                },
            );
            let flow_id = flow.spec.flow_id;
            self.server_arm_timer_if_idle(i);
            self.transmit(
                Direction::Forward,
                flow_id,
                PacketKind::Data,
                (len + HEADER_BYTES) as u32,
                Body::Data { pn, offset, len },
            );
        }
    }

    fn server_on_ack(&mut self, i: usize, pn: u64) {
        let now = self.now();
        let s = &mut self.flows[i].server;
        let Some(sp) = s.sent.remove(&pn) else {
            return;
        };
        let sample = now - sp.sent_at;
        s.conn.on_ack(&AckSample {
            now,
            pn,
            acked_bytes: sp.bytes,
            sent_at: sp.sent_at,
            rtt_sample_us: Some(sample),
            delivered_at_send: sp.delivered_at_send,
            delivered_time_at_send: sp.delivered_time_at_send,
        });
        if let Some(frame) = s.pending_rtt_check.take() {
            let decision = if check_rtt(&frame, sample, &self.cfg.policy) {
                policy::apply(&mut s.conn, &frame, &self.cfg.policy, now)
            } else {
                SeedDecision::rejected(SeedOutcome::RejectedRttMismatch)
            };
            s.decision = Some(decision);
        }
        match sp.content {
            Sent::Data { offset, len } => {
                s.acked.insert(offset, offset + len);
            }
            Sent::Token { .. } => s.token_outstanding = false,
            Sent::HelloReply { .. } => {}
        }
        s.timer.backoff = 0;
        if s.sent.is_empty() {
            s.timer.deadline = None;
        } else {
            let rto = s.conn.rtt().rto();
            self.server_set_timer(i, now + rto);
        }

        let s = &mut self.flows[i].server;
        if let Some(largest) = s.conn.highest_acked {
            if largest >= 3 {
                let lost: Vec<u64> = s.sent.range(..=largest - 3).map(|(&pn, _)| pn).collect();
                if !lost.is_empty() {
                    self.server_on_lost(i, lost);
                }
            }
        }
        self.server_check_complete(i);
        self.server_try_send(i);
    }

    fn server_on_lost(&mut self, i: usize, lost: Vec<u64>) {
        let now = self.now();
        let s = &mut self.flows[i].server;
        let mut lost_bytes = 0;
        let mut last_sent_at = 0;
        let mut controls = Vec::new();
        for pn in lost {
            let Some(sp) = s.sent.remove(&pn) else {
                continue;
            };
            lost_bytes += sp.bytes;
            last_sent_at = last_sent_at.max(sp.sent_at);
            match sp.content {
                Sent::Data { offset, len } => s.retx.push_back((offset, len)),
                other => controls.push(other),
            }
        }
        if s.conn.rtt().samples() == 0 {
            s.conn.on_bytes_abandoned(lost_bytes);
        } else {
            s.conn.on_loss_detected(now, lost_bytes, last_sent_at);
        }
        for content in controls {
            if let Sent::Token { .. } | Sent::HelloReply { .. } = content {
                self.server_send_control(i, content);
            }
        }
    }

    fn server_check_complete(&mut self, i: usize) {
        let now = self.now();
        let now_s = self.now_wall_s();
        let flow = &mut self.flows[i];
        let s = &mut flow.server;
        if s.phase == ServerPhase::Sending && s.acked.covered() == flow.spec.size_bytes {
            s.phase = ServerPhase::Done;
            s.completion_us = Some(now);
            let mut token = None;
            if flow.spec.issue_token {
                if let Ok(frame) =
                    capture_bdp(&s.conn, flow.spec.observed_ip(), self.cfg.token_lifetime_s)
                {
                    let record = TokenRecord::new(
                        self.cfg.server_name.clone(),
                        self.cfg.token_mode,
                        now_s,
                        frame,
                    );
                    let bytes = match self.cfg.token_mode {
                        TokenMode::LocalStorage => {
                            let _ = self.state.server_store.put(record);
                            None
                        }
                        _ => Some(record.wire_bytes()),
                    };
                    token = Some(Sent::Token {
                        issued_at_s: now_s,
                        bytes,
                    });
                }
            }
            s.conn.close();
            match token {
                Some(content) => {
                    s.token_outstanding = true;
                    self.server_send_control(i, content);
                }
                None => self.finish(i),
            }
        } else if s.phase == ServerPhase::Done && !s.token_outstanding && !flow.finished {
            self.finish(i);
        }
    }

    fn finish(&mut self, i: usize) {
        let f = &mut self.flows[i];
        if !f.finished {
            f.finished = true;
            f.server.timer.deadline = None;
            self.unfinished -= 1;
        }
    }

    fn server_arm_timer_if_idle(&mut self, i: usize) {
        let now = self.now();
        let s = &self.flows[i].server;
        if s.timer.deadline.is_none() {
            let rto = s.conn.rtt().rto() << s.timer.backoff.min(MAX_BACKOFF);
            self.server_set_timer(i, now + rto);
        }
    }

    fn server_set_timer(&mut self, i: usize, deadline: Micros) {
        let t = &mut self.flows[i].server.timer;
        t.deadline = Some(deadline);
        if t.event_at.is_none_or(|at| at > deadline) {
            t.gen += 1;
            t.event_at = Some(deadline);
            let gen = t.gen;
            self.queue
                .schedule_at(deadline, Action::ServerTimer { flow: i, gen });
        }
    }

    fn server_timer(&mut self, i: usize, gen: u64) {
        let now = self.now();
        let t = &mut self.flows[i].server.timer;
        if gen != t.gen {
            return;
        }
        t.event_at = None;
        let Some(deadline) = t.deadline else { return };
        if now < deadline {
            self.server_set_timer(i, deadline);
            return;
        }
        let s = &mut self.flows[i].server;
        let rto = s.conn.rtt().rto() << s.timer.backoff.min(MAX_BACKOFF);
        let lost: Vec<u64> = s
            .sent
            .iter()
            .filter(|(_, sp)| sp.sent_at + rto <= now)
            .map(|(&pn, _)| pn)
            .collect();
        s.timer.deadline = None;
        if lost.is_empty() {
            if let Some(earliest) = s.sent.values().map(|sp| sp.sent_at).min() {
                self.server_set_timer(i, earliest + rto);
            }
            return;
        }
        s.timer.backoff += 1;
        self.server_on_lost(i, lost);
        let s = &self.flows[i].server;
        if !s.sent.is_empty() && s.timer.deadline.is_none() {
            let rto = s.conn.rtt().rto() << s.timer.backoff.min(MAX_BACKOFF);
            self.server_set_timer(i, now + rto);
        }
        self.server_check_complete(i);
        self.server_try_send(i);
    }
}

impl Server {
    fn new(algorithm: CongestionAlgorithm) -> Self {
        Self {
            conn: Connection::new(algorithm),
            phase: ServerPhase::Listening,
            sent: BTreeMap::new(),
            next_offset: 0,
            retx: VecDeque::new(),
            acked: RangeSet::new(),
            pacer_next_ns: 0,
            wake_at: None,
            timer: Timer::default(),
            replied_rounds: 0,
            pending_rtt_check: None,
            decision: None,
            rejected_offer: false,
            completion_us: None,
            retransmitted_bytes: 0,
            token_outstanding: false,
            departures: Vec::new(),
        }
    }
}

impl Client {
    fn new() -> Self {
        Self {
            phase: ClientPhase::Idle,
            info: None,
            offer: None,
            received: RangeSet::new(),
            first_byte_us: None,
            complete_us: None,
            timer_gen: 0,
            backoff: 0,
        }
    }
}

fn next_cross_gap(cfg: &WorldConfig, rng: &mut ChaCha8Rng) -> Micros {
    let load = cfg.cross_traffic.map_or(0.0, |c| c.load);
    let pkts_per_s = load * cfg.forward.rate_bps as f64 / (MTU as f64 * 8.0);
    let exp = Exp::new(pkts_per_s.max(1e-9)).expect("positive rate");
    let gap_s: f64 = exp.sample(rng);
    // keep the stream strictly moving forward
    ((gap_s * MICROS_PER_SEC as f64) as Micros).max(1)
}
