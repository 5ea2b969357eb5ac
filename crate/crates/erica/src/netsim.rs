//! Deterministic cell-level network simulator.
//!
//! Every link is two directed wires; every wire's sending side is an output
//! port with a FIFO per traffic class, strict VBR-over-ABR priority, and its
//! own [`PortController`]. Sources pace cells at their allowed rate, mark
//! every 32nd cell as a forward RM cell, and adjust to the explicit rate
//! carried home by backward RM cells, which each output port along the
//! forward path stamps down as they pass back.
//!
//! All state advances through one event heap ordered by `(time, insertion
//! sequence)`, so a scenario and seed fix the entire run: same inputs, same
//! outputs, byte for byte.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::controller::{Direction, PortController, RmCellView, VcId};
use crate::scenario::{ParseError, Scenario, SourceModel, VbrProfile};
use crate::units::mbps_to_cells;

/// Data cells between consecutive forward RM cells (the RM cell itself is the
/// first of each block).
const RM_SPACING: u64 = 32;

/// An idle source (explicit rate zero) still probes with a forward RM cell
/// this often, so feedback can revive it.
const KEEPALIVE_PERIOD: f64 = 0.1;

/// Window growth stops here; by then a burst outlasts any round trip and the
/// source is purely rate-limited.
const MAX_WINDOW: u64 = 1 << 30;

#[derive(Debug, Clone, Copy)]
enum Cell {
    Data { vc: usize, hop: usize },
    /// Forward RM cell; `ccr` is the source rate when it was emitted, `er`
    /// starts at the source's peak rate.
    Frm { vc: usize, hop: usize, ccr: f64, er: f64 },
    /// Backward RM cell riding reverse wires; `rev_hop` is the index of the
    /// forward route link whose reverse wire it is on (or about to leave).
    Brm { vc: usize, rev_hop: usize, ccr: f64, er: f64 },
    Vbr { stream: usize, hop: usize },
}

impl Cell {
    fn is_vbr(&self) -> bool {
        matches!(self, Cell::Vbr { .. })
    }
}

#[derive(Debug)]
enum Event {
    SourceSend { src: usize, generation: u64 },
    VbrSend { stream: usize, generation: u64 },
    VbrRateChange { stream: usize },
    TxDone { port: usize },
    /// A cell reaching the far end of its current wire; where it lands next
    /// is fully determined by its own hop index.
    Deliver { cell: Cell },
    Turnaround { vc: usize, ccr: f64, er: f64 },
    CloseInterval { port: usize },
    Sample,
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed on purpose: BinaryHeap is a max-heap and we pop earliest first,
    // ties broken by insertion order.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Port {
    id: String,
    cell_time: f64,
    prop_delay: f64,
    interval: f64,
    controller: PortController,
    abr_q: VecDeque<Cell>,
    vbr_q: VecDeque<Cell>,
    in_service: Option<Cell>,
    busy_time: f64,
    abr_tx: u64,
    vbr_tx: u64,
}

struct Source {
    pcr: f64,
    acr: f64,
    model: SourceModel,
    start_time: f64,
    generation: u64,
    total_sent: u64,
    last_send: f64,
    /// Burst discipline: no data cell before this time (windowed sources
    /// waiting out a round trip). Never blocks persistent sources.
    burst_gate: f64,
    /// Cells left in the current burst; `u64::MAX` for persistent sources.
    remaining: u64,
    window: u64,
    /// When the burst in progress started (actual time of its first cell).
    burst_anchor: f64,
}

struct VbrSource {
    profile: VbrProfile,
    generation: u64,
    /// Index of the current square-wave half-period. Boundary times are
    /// derived from this integer, never from dividing the clock back out:
    /// at `t = k * half_period` the division can round below `k`, which
    /// would make "the next boundary" equal to `t` itself.
    sq_phase: u64,
}

impl VbrSource {
    fn rate_at(&self, t: f64) -> f64 {
        match &self.profile {
            VbrProfile::Square { amplitude_mbps, half_period } => {
                let phase = (t / half_period).floor() as i64;
                if phase % 2 == 0 {
                    mbps_to_cells(*amplitude_mbps)
                } else {
                    0.0
                }
            }
            VbrProfile::Trace(steps) => {
                let mut rate = 0.0;
                for &(step_t, mbps) in steps {
                    if step_t <= t {
                        rate = mbps_to_cells(mbps);
                    } else {
                        break;
                    }
                }
                rate
            }
        }
    }

    /// The next profile change strictly after `t`, if any.
    fn next_change_after(&self, t: f64) -> Option<f64> {
        match &self.profile {
            VbrProfile::Square { half_period, .. } => {
                let k = (t / half_period).floor();
                let next = (k + 1.0) * half_period;
                // The division can round below the true multiple when `t`
                // sits exactly on a boundary; step once more to stay strict.
                Some(if next > t { next } else { (k + 2.0) * half_period })
            }
            VbrProfile::Trace(steps) => {
                steps.iter().map(|&(st, _)| st).find(|&st| st > t)
            }
        }
    }
}

/// Time series sampled at `k * sample_period` for `k = 1..=K`, plus the
/// identifiers naming the rows. Per-port series are indexed like `port_ids`;
/// forward ports carry their link's id and reverse ports append `.rev`.
pub struct SimOutput {
    pub times: Vec<f64>,
    pub vc_ids: Vec<String>,
    pub port_ids: Vec<String>,
    /// Source allowed rate in cells/s, per VC per sample.
    pub acr: Vec<Vec<f64>>,
    /// ABR cells waiting at the port (in-service cell excluded).
    pub queue: Vec<Vec<u64>>,
    /// Fraction of the sample window the port spent transmitting (any class).
    pub util: Vec<Vec<f64>>,
    /// Cumulative ABR cells transmitted by the port, at each sample.
    pub abr_tx: Vec<Vec<u64>>,
    /// Cumulative VBR cells transmitted by the port, at each sample.
    pub vbr_tx: Vec<Vec<u64>>,
    /// Each port's line rate in cells/s (for turning cell counts back into
    /// exact utilization over any sample span).
    pub port_rate: Vec<f64>,
}

impl SimOutput {
    pub fn acr_csv(&self) -> String {
        let mut out = String::from("time_s,vc_id,acr_cells_per_s\n");
        for (k, &t) in self.times.iter().enumerate() {
            for (v, id) in self.vc_ids.iter().enumerate() {
                let _ = writeln!(out, "{t:.6},{id},{:.6}", self.acr[v][k]);
            }
        }
        out
    }

    pub fn queue_csv(&self) -> String {
        let mut out = String::from("time_s,port_id,queue_cells\n");
        for (k, &t) in self.times.iter().enumerate() {
            for (p, id) in self.port_ids.iter().enumerate() {
                let _ = writeln!(out, "{t:.6},{id},{}", self.queue[p][k]);
            }
        }
        out
    }

    pub fn util_csv(&self) -> String {
        let mut out = String::from("time_s,port_id,utilization\n");
        for (k, &t) in self.times.iter().enumerate() {
            for (p, id) in self.port_ids.iter().enumerate() {
                let _ = writeln!(out, "{t:.6},{id},{:.6}", self.util[p][k]);
            }
        }
        out
    }
}

struct Sim {
    ports: Vec<Port>,
    sources: Vec<Source>,
    vbr: Vec<VbrSource>,
    /// Scenario link indices along each VC's route; forward port of link `l`
    /// is `2 * l`, reverse port `2 * l + 1`.
    vc_links: Vec<Vec<usize>>,
    vbr_links: Vec<Vec<usize>>,
    turnaround_delay: f64,
    sample_period: f64,
    samples_total: u64,
    samples_done: u64,
    /// Per-port busy time as of the previous sample.
    last_busy: Vec<f64>,
    events: BinaryHeap<Scheduled>,
    seq: u64,
    now: f64,
    // Cell accounting, checked at every sample: what went in is either out,
    // queued, in service, or on a wire.
    injected_abr: u64,
    consumed_abr: u64,
    wire_abr: u64,
    injected_vbr: u64,
    consumed_vbr: u64,
    wire_vbr: u64,
    out: SimOutput,
}

/// Run a scenario to its configured duration. Validation failures are
/// reported the same way `scenario::parse` reports them.
pub fn run(scenario: &Scenario) -> Result<SimOutput, Vec<ParseError>> {
    scenario.validate()?;
    let mut sim = Sim::build(scenario);
    sim.run_loop(scenario.run.duration);
    Ok(sim.out)
}

impl Sim {
    fn build(scenario: &Scenario) -> Sim {
        let link_index: std::collections::BTreeMap<&str, usize> = scenario
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.as_str(), i))
            .collect();
        let mut ports = Vec::with_capacity(scenario.links.len() * 2);
        for l in &scenario.links {
            let rate = mbps_to_cells(l.rate_mbps);
            for (suffix, node) in [("", &l.from), (".rev", &l.to)] {
                let params = scenario.node_params(node);
                ports.push(Port {
                    id: format!("{}{suffix}", l.id),
                    cell_time: 1.0 / rate,
                    prop_delay: l.prop_delay,
                    interval: params.averaging_interval,
                    controller: PortController::new(params, rate)
                        .expect("scenario validation checked the parameters"),
                    abr_q: VecDeque::new(),
                    vbr_q: VecDeque::new(),
                    in_service: None,
                    busy_time: 0.0,
                    abr_tx: 0,
                    vbr_tx: 0,
                });
            }
        }
        let vc_links: Vec<Vec<usize>> = scenario
            .vcs
            .iter()
            .map(|vc| vc.route.iter().map(|id| link_index[id.as_str()]).collect())
            .collect();
        let vbr_links: Vec<Vec<usize>> = scenario
            .vbr
            .iter()
            .map(|s| s.route.iter().map(|id| link_index[id.as_str()]).collect())
            .collect();

        // The run's only randomness: each source's initial rate, drawn in VC
        // declaration order from (0, cap].
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.run.seed);
        let sources: Vec<Source> = scenario
            .vcs
            .iter()
            .map(|vc| {
                let pcr = mbps_to_cells(vc.pcr_mbps);
                let cap = mbps_to_cells(vc.initial_acr_cap_mbps.unwrap_or(vc.pcr_mbps)).min(pcr);
                let acr = cap * (1.0 - rng.gen::<f64>());
                let window = match vc.model {
                    SourceModel::Persistent => 0,
                    SourceModel::Windowed { window0, .. } => window0,
                };
                Source {
                    pcr,
                    acr,
                    model: vc.model,
                    start_time: vc.start_time,
                    generation: 0,
                    total_sent: 0,
                    last_send: f64::NEG_INFINITY,
                    burst_gate: 0.0,
                    remaining: match vc.model {
                        SourceModel::Persistent => u64::MAX,
                        SourceModel::Windowed { .. } => window,
                    },
                    window,
                    burst_anchor: vc.start_time,
                }
            })
            .collect();
        let vbr: Vec<VbrSource> = scenario
            .vbr
            .iter()
            .map(|s| VbrSource { profile: s.profile.clone(), generation: 0, sq_phase: 0 })
            .collect();

        let sample_period = scenario.run.sample_period;
        let samples_total = (scenario.run.duration / sample_period + 1e-9).floor() as u64;
        let out = SimOutput {
            times: Vec::new(),
            vc_ids: scenario.vcs.iter().map(|vc| vc.id.clone()).collect(),
            port_ids: ports.iter().map(|p| p.id.clone()).collect(),
            acr: vec![Vec::new(); scenario.vcs.len()],
            queue: vec![Vec::new(); ports.len()],
            util: vec![Vec::new(); ports.len()],
            abr_tx: vec![Vec::new(); ports.len()],
            vbr_tx: vec![Vec::new(); ports.len()],
            port_rate: ports.iter().map(|p| 1.0 / p.cell_time).collect(),
        };
        let n_ports = ports.len();
        let mut sim = Sim {
            ports,
            sources,
            vbr,
            vc_links,
            vbr_links,
            turnaround_delay: scenario.run.turnaround_delay,
            sample_period,
            samples_total,
            samples_done: 0,
            last_busy: vec![0.0; n_ports],
            events: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            injected_abr: 0,
            consumed_abr: 0,
            wire_abr: 0,
            injected_vbr: 0,
            consumed_vbr: 0,
            wire_vbr: 0,
            out,
        };
        for i in 0..sim.sources.len() {
            let t = sim.sources[i].start_time;
            sim.schedule(t, Event::SourceSend { src: i, generation: 0 });
        }
        for i in 0..sim.vbr.len() {
            let r = sim.vbr[i].rate_at(0.0);
            if r > 0.0 {
                sim.schedule(1.0 / r, Event::VbrSend { stream: i, generation: 0 });
            }
            if let Some(t) = sim.vbr[i].next_change_after(0.0) {
                sim.schedule(t, Event::VbrRateChange { stream: i });
            }
        }
        for p in 0..sim.ports.len() {
            let interval = sim.ports[p].interval;
            // Ports run on independent clocks; a golden-ratio phase spread keeps
            // interval closes from landing in lockstep across the network.
            let phase = interval * (p as f64 * 0.618_033_988_749_894_9).fract();
            sim.schedule(interval + phase, Event::CloseInterval { port: p });
        }
        if samples_total > 0 {
            sim.schedule(sample_period, Event::Sample);
        }
        sim
    }

    fn schedule(&mut self, time: f64, event: Event) {
        debug_assert!(time.is_finite() && time >= self.now);
        self.events.push(Scheduled { time, seq: self.seq, event });
        self.seq += 1;
    }

    fn run_loop(&mut self, duration: f64) {
        let horizon = duration + 1e-9;
        while let Some(next) = self.events.pop() {
            if next.time > horizon {
                break;
            }
            self.now = next.time;
            match next.event {
                Event::SourceSend { src, generation } => self.source_send(src, generation),
                Event::VbrSend { stream, generation } => self.vbr_send(stream, generation),
                Event::VbrRateChange { stream } => self.vbr_rate_change(stream),
                Event::TxDone { port } => self.tx_done(port),
                Event::Deliver { cell } => self.deliver(cell),
                Event::Turnaround { vc, ccr, er } => self.turnaround(vc, ccr, er),
                Event::CloseInterval { port } => {
                    let queue = self.ports[port].abr_q.len() as f64;
                    self.ports[port].controller.close_interval(queue);
                    let interval = self.ports[port].interval;
                    self.schedule(self.now + interval, Event::CloseInterval { port });
                }
                Event::Sample => self.sample(),
            }
        }
    }

    // ---- traffic entry ----------------------------------------------------

    fn source_send(&mut self, src: usize, generation: u64) {
        if self.sources[src].generation != generation {
            return;
        }
        let now = self.now;
        let vc = src;
        let entry_port = 2 * self.vc_links[vc][0];
        if self.sources[src].acr <= 0.0 {
            // Out-of-rate probe; does not advance the data pacing clock.
            let cell = Cell::Frm { vc, hop: 0, ccr: 0.0, er: self.sources[src].pcr };
            self.injected_abr += 1;
            self.enqueue_abr(entry_port, cell);
            self.schedule(now + KEEPALIVE_PERIOD, Event::SourceSend { src, generation });
            return;
        }
        let s = &mut self.sources[src];
        let kind_rm = s.total_sent % RM_SPACING == 0;
        let (acr, pcr) = (s.acr, s.pcr);
        s.total_sent += 1;
        s.last_send = now;
        let cell = if kind_rm {
            Cell::Frm { vc, hop: 0, ccr: acr, er: pcr }
        } else {
            Cell::Data { vc, hop: 0 }
        };
        let mut next = now + 1.0 / acr;
        if let SourceModel::Windowed { burst_rtt, .. } = s.model {
            s.remaining -= 1;
            if s.remaining == 0 {
                s.window = (s.window * 2).min(MAX_WINDOW);
                s.remaining = s.window;
                let gate = s.burst_anchor + burst_rtt;
                s.burst_gate = gate;
                next = next.max(gate);
                s.burst_anchor = next;
            }
        }
        self.injected_abr += 1;
        self.enqueue_abr(entry_port, cell);
        self.schedule(next, Event::SourceSend { src, generation });
    }

    /// New explicit rate arrived at the source. Increases take effect at
    /// once (respecting the pacing and burst clocks); decreases wait for the
    /// already-scheduled send, a one-cell tolerance.
    fn deliver_er(&mut self, src: usize, er: f64) {
        let now = self.now;
        let s = &mut self.sources[src];
        let new = er.min(s.pcr).max(0.0);
        let old = s.acr;
        s.acr = new;
        if new > old {
            s.generation += 1;
            let generation = s.generation;
            let t = (s.last_send + 1.0 / new).max(s.burst_gate).max(now);
            self.schedule(t, Event::SourceSend { src, generation });
        }
    }

    fn vbr_send(&mut self, stream: usize, generation: u64) {
        if self.vbr[stream].generation != generation {
            return;
        }
        let rate = self.vbr[stream].rate_at(self.now);
        if rate <= 0.0 {
            return;
        }
        let port = 2 * self.vbr_links[stream][0];
        self.injected_vbr += 1;
        self.enqueue_vbr(port, Cell::Vbr { stream, hop: 0 });
        self.schedule(self.now + 1.0 / rate, Event::VbrSend { stream, generation });
    }

    fn vbr_rate_change(&mut self, stream: usize) {
        let v = &mut self.vbr[stream];
        v.generation += 1;
        let generation = v.generation;
        let (rate, next_change) = match &v.profile {
            VbrProfile::Square { amplitude_mbps, half_period } => {
                v.sq_phase += 1;
                let rate = if v.sq_phase % 2 == 0 { mbps_to_cells(*amplitude_mbps) } else { 0.0 };
                (rate, Some((v.sq_phase + 1) as f64 * half_period))
            }
            VbrProfile::Trace(_) => (v.rate_at(self.now), v.next_change_after(self.now)),
        };
        if let Some(t) = next_change {
            self.schedule(t, Event::VbrRateChange { stream });
        }
        if rate > 0.0 {
            self.schedule(self.now + 1.0 / rate, Event::VbrSend { stream, generation });
        }
    }

    // ---- ports -------------------------------------------------------------

    fn enqueue_abr(&mut self, port: usize, cell: Cell) {
        {
            let p = &mut self.ports[port];
            match &cell {
                Cell::Data { vc, .. } => p.controller.observe_cell(*vc as VcId, Direction::Forward),
                Cell::Frm { vc, ccr, er, .. } => p.controller.on_forward_rm(&RmCellView {
                    vc: *vc as VcId,
                    direction: Direction::Forward,
                    ccr: *ccr,
                    er: *er,
                }),
                // A backward RM riding this (reverse) port is part of its
                // transmit load like any other cell.
                Cell::Brm { vc, .. } => p.controller.observe_cell(*vc as VcId, Direction::Forward),
                Cell::Vbr { .. } => unreachable!("VBR cells use enqueue_vbr"),
            }
            p.abr_q.push_back(cell);
        }
        self.try_start_service(port);
    }

    fn enqueue_vbr(&mut self, port: usize, cell: Cell) {
        self.ports[port].vbr_q.push_back(cell);
        self.try_start_service(port);
    }

    fn try_start_service(&mut self, port: usize) {
        let p = &mut self.ports[port];
        if p.in_service.is_some() {
            return;
        }
        let cell = if let Some(c) = p.vbr_q.pop_front() {
            p.controller.observe_vbr_service(1);
            c
        } else if let Some(c) = p.abr_q.pop_front() {
            c
        } else {
            return;
        };
        p.in_service = Some(cell);
        let t = self.now + p.cell_time;
        self.schedule(t, Event::TxDone { port });
    }

    fn tx_done(&mut self, port: usize) {
        let p = &mut self.ports[port];
        let cell = p.in_service.take().expect("TxDone without a cell in service");
        p.busy_time += p.cell_time;
        if cell.is_vbr() {
            p.vbr_tx += 1;
            self.wire_vbr += 1;
        } else {
            p.abr_tx += 1;
            self.wire_abr += 1;
        }
        let t = self.now + p.prop_delay;
        self.schedule(t, Event::Deliver { cell });
        self.try_start_service(port);
    }

    fn deliver(&mut self, cell: Cell) {
        match cell {
            Cell::Data { vc, hop } => {
                self.wire_abr -= 1;
                if hop + 1 < self.vc_links[vc].len() {
                    let next = 2 * self.vc_links[vc][hop + 1];
                    self.enqueue_abr(next, Cell::Data { vc, hop: hop + 1 });
                } else {
                    self.consumed_abr += 1;
                }
            }
            Cell::Frm { vc, hop, ccr, er } => {
                self.wire_abr -= 1;
                if hop + 1 < self.vc_links[vc].len() {
                    let next = 2 * self.vc_links[vc][hop + 1];
                    self.enqueue_abr(next, Cell::Frm { vc, hop: hop + 1, ccr, er });
                } else {
                    // Destination turns the forward RM cell around.
                    self.consumed_abr += 1;
                    let t = self.now + self.turnaround_delay;
                    self.schedule(t, Event::Turnaround { vc, ccr, er });
                }
            }
            Cell::Brm { vc, rev_hop, ccr, er } => {
                self.wire_abr -= 1;
                // Arriving at the upstream end of route link `rev_hop`: the
                // VC's forward output port here is that link's forward port.
                let fwd_port = 2 * self.vc_links[vc][rev_hop];
                let view = RmCellView {
                    vc: vc as VcId,
                    direction: Direction::Backward,
                    ccr,
                    er,
                };
                let stamped = self.ports[fwd_port].controller.on_backward_rm(&view);
                if rev_hop == 0 {
                    self.consumed_abr += 1;
                    self.deliver_er(vc, stamped.er);
                } else {
                    let rev_port = 2 * self.vc_links[vc][rev_hop - 1] + 1;
                    self.enqueue_abr(
                        rev_port,
                        Cell::Brm { vc, rev_hop: rev_hop - 1, ccr, er: stamped.er },
                    );
                }
            }
            Cell::Vbr { stream, hop } => {
                self.wire_vbr -= 1;
                if hop + 1 < self.vbr_links[stream].len() {
                    let next = 2 * self.vbr_links[stream][hop + 1];
                    self.enqueue_vbr(next, Cell::Vbr { stream, hop: hop + 1 });
                } else {
                    self.consumed_vbr += 1;
                }
            }
        }
    }

    fn turnaround(&mut self, vc: usize, ccr: f64, er: f64) {
        let last = *self.vc_links[vc].last().expect("routes are nonempty");
        let rev_port = 2 * last + 1;
        self.injected_abr += 1;
        self.enqueue_abr(rev_port, Cell::Brm { vc, rev_hop: self.vc_links[vc].len() - 1, ccr, er });
    }

    // ---- metrics ------------------------------------------------------------

    fn sample(&mut self) {
        self.samples_done += 1;
        self.out.times.push(self.samples_done as f64 * self.sample_period);
        for (v, s) in self.sources.iter().enumerate() {
            self.out.acr[v].push(s.acr);
        }
        let window = self.sample_period;
        for (i, p) in self.ports.iter().enumerate() {
            self.out.queue[i].push(p.abr_q.len() as u64);
            let delta = p.busy_time - self.last_busy[i];
            self.last_busy[i] = p.busy_time;
            self.out.util[i].push((delta / window).clamp(0.0, 1.0));
            self.out.abr_tx[i].push(p.abr_tx);
            self.out.vbr_tx[i].push(p.vbr_tx);
        }
        self.audit();
        if self.samples_done < self.samples_total {
            self.schedule(self.now + self.sample_period, Event::Sample);
        }
    }

    fn audit(&self) {
        if cfg!(debug_assertions) {
            let mut queued_abr = 0u64;
            let mut queued_vbr = 0u64;
            for p in &self.ports {
                queued_abr += p.abr_q.len() as u64;
                queued_vbr += p.vbr_q.len() as u64;
                if let Some(c) = &p.in_service {
                    if c.is_vbr() {
                        queued_vbr += 1;
                    } else {
                        queued_abr += 1;
                    }
                }
            }
            debug_assert_eq!(
                self.injected_abr,
                self.consumed_abr + queued_abr + self.wire_abr,
                "ABR cells leaked at t={}",
                self.now
            );
            debug_assert_eq!(
                self.injected_vbr,
                self.consumed_vbr + queued_vbr + self.wire_vbr,
                "VBR cells leaked at t={}",
                self.now
            );
        }
    }
}
