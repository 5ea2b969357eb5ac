//! Declarative scenario format: topology, sources, controller parameters,
//! and run controls, plus builders for the two bundled experiments.
//!
//! # Grammar
//!
//! Line-oriented sections of `key = value` pairs; `#` starts a comment. The
//! first significant line must be `format_version = 1`. Sections `[link]`,
//! `[switch]`, `[vc]` and `[vbr]` may repeat (each opens a new definition);
//! `[erica]` and `[run]` appear at most once. Unknown keys are errors.
//!
//! Units are uniform: rates in Mbps, times in seconds, queue lengths and
//! windows in cells. Internally the simulator converts Mbps to cells/second.
//!
//! ```text
//! format_version = 1
//!
//! [erica]                 # optional global controller parameters
//! delta = 0.1             # load band half-width
//! target_delay_t0 = 0.0015
//! averaging_interval = 0.005
//!
//! [link]
//! id = L1
//! from = sw1
//! to = sw2
//! rate = 155              # Mbps
//! prop_delay = 0.005      # s
//!
//! [switch]                # optional per-node parameter overrides
//! id = sw1
//! delta = 0.05
//!
//! [vc]
//! id = A1
//! route = e1 L1 x1        # links in traversal order (from -> to each)
//! model = persistent      # or windowed (+ window0, burst_rtt)
//! pcr = 150               # Mbps
//! start_time = 0
//! initial_acr_cap = 10    # Mbps cap on the randomly drawn initial rate
//!
//! [vbr]
//! id = bg
//! route = ev BTL xv
//! square_amplitude = 93   # Mbps; alternates with silence...
//! square_half_period = 0.05  # ...every half period
//! # trace = 0:0 0.5:93 1:40   # alternative: piecewise-constant time:mbps
//!
//! [run]
//! duration = 2.0
//! sample_period = 0.001
//! seed = 1
//! turnaround_delay = 0
//! max_queue = 30000       # optional acceptance thresholds, see RunDef
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use crate::maxmin::{LinkSpec, MaxMinProblem, VcSpec};
use crate::params::EricaParams;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDef {
    pub id: String,
    pub from: String,
    pub to: String,
    pub rate_mbps: f64,
    pub prop_delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchDef {
    pub id: String,
    /// Raw `key = value` overrides applied on top of the global parameters.
    pub overrides: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceModel {
    Persistent,
    /// Bursts of a growing window of cells, one burst per round trip, until
    /// the window outgrows the round trip and the source turns rate-limited.
    Windowed { window0: u64, burst_rtt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcDef {
    pub id: String,
    pub route: Vec<String>,
    pub model: SourceModel,
    pub pcr_mbps: f64,
    pub start_time: f64,
    /// Upper bound on the randomly drawn initial rate (defaults to the PCR).
    pub initial_acr_cap_mbps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VbrProfile {
    /// Alternates between `amplitude_mbps` and silence each half period,
    /// starting loud at t = 0.
    Square { amplitude_mbps: f64, half_period: f64 },
    /// Piecewise-constant `(time, mbps)` steps; rate is 0 before the first.
    Trace(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VbrDef {
    pub id: String,
    pub route: Vec<String>,
    pub profile: VbrProfile,
}

/// Run controls. The optional fields are acceptance thresholds: each one that
/// is set becomes a pass/fail check in the run report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDef {
    pub duration: f64,
    pub sample_period: f64,
    pub seed: u64,
    pub turnaround_delay: f64,
    /// Every VC's rate must stay within `converge_tol` of its max-min rate
    /// from this time on.
    pub converge_by: Option<f64>,
    pub converge_tol: Option<f64>,
    /// No port's ABR queue may ever exceed this many cells.
    pub max_queue: Option<f64>,
    /// Every port's ABR queue must stay below `drain_below` from this time on.
    pub drain_by: Option<f64>,
    pub drain_below: Option<f64>,
    /// Mean utilization of each max-min-saturated link from `util_from` to the
    /// end must reach `min_util`.
    pub min_util: Option<f64>,
    pub util_from: Option<f64>,
    /// Like `min_util`, but normalized to the capacity left over by VBR.
    pub min_abr_util: Option<f64>,
    /// Fairness index over max-min-normalized per-VC mean rates in the
    /// trailing `fairness_window` seconds must reach `min_fairness`.
    pub min_fairness: Option<f64>,
    pub fairness_window: Option<f64>,
}

impl Default for RunDef {
    fn default() -> Self {
        RunDef {
            duration: 1.0,
            sample_period: 0.001,
            seed: 1,
            turnaround_delay: 0.0,
            converge_by: None,
            converge_tol: None,
            max_queue: None,
            drain_by: None,
            drain_below: None,
            min_util: None,
            util_from: None,
            min_abr_util: None,
            min_fairness: None,
            fairness_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub erica: EricaParams,
    pub links: Vec<LinkDef>,
    pub switches: Vec<SwitchDef>,
    pub vcs: Vec<VcDef>,
    pub vbr: Vec<VbrDef>,
    pub run: RunDef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

impl std::error::Error for ParseError {}

const ERICA_KEYS: &[&str] = &[
    "delta",
    "target_delay_t0",
    "hyper_a",
    "hyper_b",
    "qdlf",
    "decay_factor",
    "alpha",
    "averaging_interval",
    "activity_floor",
    "use_queue_control",
    "target_utilization",
];

const RUN_KEYS: &[&str] = &[
    "duration",
    "sample_period",
    "seed",
    "turnaround_delay",
    "converge_by",
    "converge_tol",
    "max_queue",
    "drain_by",
    "drain_below",
    "min_util",
    "util_from",
    "min_abr_util",
    "min_fairness",
    "fairness_window",
];

fn parse_f64(value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| format!("expected a number, got `{value}`"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{value}`")),
    }
}

fn parse_u64(value: &str) -> Result<u64, String> {
    value.parse::<u64>().map_err(|_| format!("expected a nonnegative integer, got `{value}`"))
}

/// Set one `[erica]` key. Shared by the section parser, switch override
/// resolution, and CLI `--set erica.key=value`.
pub fn apply_erica_key(p: &mut EricaParams, key: &str, value: &str) -> Result<(), String> {
    match key {
        "delta" => p.delta = parse_f64(value)?,
        "target_delay_t0" => p.target_delay_t0 = parse_f64(value)?,
        "hyper_a" => p.hyper_a = parse_f64(value)?,
        "hyper_b" => p.hyper_b = parse_f64(value)?,
        "qdlf" => p.qdlf = parse_f64(value)?,
        "decay_factor" => p.decay_factor = parse_f64(value)?,
        "alpha" => p.alpha = parse_f64(value)?,
        "averaging_interval" => p.averaging_interval = parse_f64(value)?,
        "activity_floor" => p.activity_floor = parse_f64(value)?,
        "use_queue_control" => p.use_queue_control = parse_bool(value)?,
        "target_utilization" => p.target_utilization = parse_f64(value)?,
        _ => {
            return Err(format!(
                "unknown key `{key}` (valid keys: {})",
                ERICA_KEYS.join(", ")
            ))
        }
    }
    Ok(())
}

/// Set one `[run]` key. Shared by the section parser and `--set run.key=value`.
pub fn apply_run_key(run: &mut RunDef, key: &str, value: &str) -> Result<(), String> {
    match key {
        "duration" => run.duration = parse_f64(value)?,
        "sample_period" => run.sample_period = parse_f64(value)?,
        "seed" => run.seed = parse_u64(value)?,
        "turnaround_delay" => run.turnaround_delay = parse_f64(value)?,
        "converge_by" => run.converge_by = Some(parse_f64(value)?),
        "converge_tol" => run.converge_tol = Some(parse_f64(value)?),
        "max_queue" => run.max_queue = Some(parse_f64(value)?),
        "drain_by" => run.drain_by = Some(parse_f64(value)?),
        "drain_below" => run.drain_below = Some(parse_f64(value)?),
        "min_util" => run.min_util = Some(parse_f64(value)?),
        "util_from" => run.util_from = Some(parse_f64(value)?),
        "min_abr_util" => run.min_abr_util = Some(parse_f64(value)?),
        "min_fairness" => run.min_fairness = Some(parse_f64(value)?),
        "fairness_window" => run.fairness_window = Some(parse_f64(value)?),
        _ => {
            return Err(format!("unknown key `{key}` (valid keys: {})", RUN_KEYS.join(", ")))
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Erica,
    Link,
    Switch,
    Vc,
    Vbr,
    Run,
}

#[derive(Default)]
struct PendingLink {
    line: usize,
    id: Option<String>,
    from: Option<String>,
    to: Option<String>,
    rate: Option<f64>,
    prop_delay: Option<f64>,
}

#[derive(Default)]
struct PendingSwitch {
    line: usize,
    id: Option<String>,
    overrides: Vec<(String, String)>,
}

#[derive(Default)]
struct PendingVc {
    line: usize,
    id: Option<String>,
    route: Option<Vec<String>>,
    model: Option<String>,
    pcr: Option<f64>,
    start_time: Option<f64>,
    initial_acr_cap: Option<f64>,
    window0: Option<u64>,
    burst_rtt: Option<f64>,
}

#[derive(Default)]
struct PendingVbr {
    line: usize,
    id: Option<String>,
    route: Option<Vec<String>>,
    square_amplitude: Option<f64>,
    square_half_period: Option<f64>,
    trace: Option<Vec<(f64, f64)>>,
}

struct Parser {
    errors: Vec<ParseError>,
    erica: EricaParams,
    saw_erica: bool,
    run: RunDef,
    saw_run: bool,
    links: Vec<LinkDef>,
    switches: Vec<SwitchDef>,
    vcs: Vec<VcDef>,
    vbr: Vec<VbrDef>,
    section: Section,
    seen_keys: BTreeSet<String>,
    pending_link: PendingLink,
    pending_switch: PendingSwitch,
    pending_vc: PendingVc,
    pending_vbr: PendingVbr,
}

impl Parser {
    fn err(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(ParseError { line, message: message.into() });
    }

    fn flush_section(&mut self) {
        match self.section {
            Section::None | Section::Erica | Section::Run => {}
            Section::Link => {
                let p = std::mem::take(&mut self.pending_link);
                let mut missing = Vec::new();
                if p.id.is_none() {
                    missing.push("id");
                }
                if p.from.is_none() {
                    missing.push("from");
                }
                if p.to.is_none() {
                    missing.push("to");
                }
                if p.rate.is_none() {
                    missing.push("rate");
                }
                if !missing.is_empty() {
                    self.err(p.line, format!("[link] missing required keys: {}", missing.join(", ")));
                    return;
                }
                self.links.push(LinkDef {
                    id: p.id.unwrap(),
                    from: p.from.unwrap(),
                    to: p.to.unwrap(),
                    rate_mbps: p.rate.unwrap(),
                    prop_delay: p.prop_delay.unwrap_or(0.0),
                });
            }
            Section::Switch => {
                let p = std::mem::take(&mut self.pending_switch);
                match p.id {
                    Some(id) => self.switches.push(SwitchDef { id, overrides: p.overrides }),
                    None => self.err(p.line, "[switch] missing required key: id"),
                }
            }
            Section::Vc => {
                let p = std::mem::take(&mut self.pending_vc);
                let mut missing = Vec::new();
                if p.id.is_none() {
                    missing.push("id");
                }
                if p.route.is_none() {
                    missing.push("route");
                }
                if p.pcr.is_none() {
                    missing.push("pcr");
                }
                if !missing.is_empty() {
                    self.err(p.line, format!("[vc] missing required keys: {}", missing.join(", ")));
                    return;
                }
                let model = match p.model.as_deref().unwrap_or("persistent") {
                    "persistent" => {
                        if p.window0.is_some() || p.burst_rtt.is_some() {
                            self.err(
                                p.line,
                                "[vc] window0/burst_rtt only apply to model = windowed",
                            );
                            return;
                        }
                        SourceModel::Persistent
                    }
                    "windowed" => SourceModel::Windowed {
                        window0: p.window0.unwrap_or(8),
                        burst_rtt: p.burst_rtt.unwrap_or(0.03),
                    },
                    other => {
                        self.err(p.line, format!("[vc] unknown model `{other}` (persistent or windowed)"));
                        return;
                    }
                };
                self.vcs.push(VcDef {
                    id: p.id.unwrap(),
                    route: p.route.unwrap(),
                    model,
                    pcr_mbps: p.pcr.unwrap(),
                    start_time: p.start_time.unwrap_or(0.0),
                    initial_acr_cap_mbps: p.initial_acr_cap,
                });
            }
            Section::Vbr => {
                let p = std::mem::take(&mut self.pending_vbr);
                let mut missing = Vec::new();
                if p.id.is_none() {
                    missing.push("id");
                }
                if p.route.is_none() {
                    missing.push("route");
                }
                if !missing.is_empty() {
                    self.err(p.line, format!("[vbr] missing required keys: {}", missing.join(", ")));
                    return;
                }
                let profile = match (p.square_amplitude, p.square_half_period, p.trace) {
                    (Some(amplitude_mbps), Some(half_period), None) => {
                        VbrProfile::Square { amplitude_mbps, half_period }
                    }
                    (None, None, Some(trace)) => VbrProfile::Trace(trace),
                    (None, None, None) => {
                        self.err(p.line, "[vbr] needs square_amplitude + square_half_period, or trace");
                        return;
                    }
                    _ => {
                        self.err(
                            p.line,
                            "[vbr] square_amplitude/square_half_period and trace are mutually exclusive (and the square keys come in a pair)",
                        );
                        return;
                    }
                };
                self.vbr.push(VbrDef { id: p.id.unwrap(), route: p.route.unwrap(), profile });
            }
        }
    }

    fn open_section(&mut self, name: &str, line: usize) {
        self.flush_section();
        self.seen_keys.clear();
        self.section = match name {
            "erica" => {
                if self.saw_erica {
                    self.err(line, "duplicate [erica] section");
                }
                self.saw_erica = true;
                Section::Erica
            }
            "run" => {
                if self.saw_run {
                    self.err(line, "duplicate [run] section");
                }
                self.saw_run = true;
                Section::Run
            }
            "link" => {
                self.pending_link = PendingLink { line, ..Default::default() };
                Section::Link
            }
            "switch" => {
                self.pending_switch = PendingSwitch { line, ..Default::default() };
                Section::Switch
            }
            "vc" => {
                self.pending_vc = PendingVc { line, ..Default::default() };
                Section::Vc
            }
            "vbr" => {
                self.pending_vbr = PendingVbr { line, ..Default::default() };
                Section::Vbr
            }
            other => {
                self.err(line, format!("unknown section [{other}] (erica, link, switch, vc, vbr, run)"));
                Section::None
            }
        };
    }

    fn key_value(&mut self, key: &str, value: &str, line: usize) {
        if !self.seen_keys.insert(key.to_string()) {
            self.err(line, format!("duplicate key `{key}` in this section"));
            return;
        }
        let result: Result<(), String> = match self.section {
            Section::None => Err("key outside any section".to_string()),
            Section::Erica => apply_erica_key(&mut self.erica, key, value),
            Section::Run => apply_run_key(&mut self.run, key, value),
            Section::Link => {
                let p = &mut self.pending_link;
                match key {
                    "id" => {
                        p.id = Some(value.to_string());
                        Ok(())
                    }
                    "from" => {
                        p.from = Some(value.to_string());
                        Ok(())
                    }
                    "to" => {
                        p.to = Some(value.to_string());
                        Ok(())
                    }
                    "rate" => parse_f64(value).map(|v| p.rate = Some(v)),
                    "prop_delay" => parse_f64(value).map(|v| p.prop_delay = Some(v)),
                    _ => Err(format!("unknown key `{key}` (valid keys: id, from, to, rate, prop_delay)")),
                }
            }
            Section::Switch => {
                if key == "id" {
                    self.pending_switch.id = Some(value.to_string());
                    Ok(())
                } else {
                    // Validate by applying to a scratch copy; keep the raw text.
                    let mut scratch = self.erica;
                    match apply_erica_key(&mut scratch, key, value) {
                        Ok(()) => {
                            self.pending_switch.overrides.push((key.to_string(), value.to_string()));
                            Ok(())
                        }
                        Err(e) => Err(e),
                    }
                }
            }
            Section::Vc => {
                let p = &mut self.pending_vc;
                match key {
                    "id" => {
                        p.id = Some(value.to_string());
                        Ok(())
                    }
                    "route" => {
                        p.route = Some(value.split_whitespace().map(str::to_string).collect());
                        Ok(())
                    }
                    "model" => {
                        p.model = Some(value.to_string());
                        Ok(())
                    }
                    "pcr" => parse_f64(value).map(|v| p.pcr = Some(v)),
                    "start_time" => parse_f64(value).map(|v| p.start_time = Some(v)),
                    "initial_acr_cap" => parse_f64(value).map(|v| p.initial_acr_cap = Some(v)),
                    "window0" => parse_u64(value).map(|v| p.window0 = Some(v)),
                    "burst_rtt" => parse_f64(value).map(|v| p.burst_rtt = Some(v)),
                    _ => Err(format!(
                        "unknown key `{key}` (valid keys: id, route, model, pcr, start_time, initial_acr_cap, window0, burst_rtt)"
                    )),
                }
            }
            Section::Vbr => {
                let p = &mut self.pending_vbr;
                match key {
                    "id" => {
                        p.id = Some(value.to_string());
                        Ok(())
                    }
                    "route" => {
                        p.route = Some(value.split_whitespace().map(str::to_string).collect());
                        Ok(())
                    }
                    "square_amplitude" => parse_f64(value).map(|v| p.square_amplitude = Some(v)),
                    "square_half_period" => parse_f64(value).map(|v| p.square_half_period = Some(v)),
                    "trace" => parse_trace(value).map(|t| p.trace = Some(t)),
                    _ => Err(format!(
                        "unknown key `{key}` (valid keys: id, route, square_amplitude, square_half_period, trace)"
                    )),
                }
            }
        };
        if let Err(message) = result {
            self.err(line, message);
        }
    }
}

fn parse_trace(value: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut steps = Vec::new();
    for token in value.split_whitespace() {
        let (t, r) = token
            .split_once(':')
            .ok_or_else(|| format!("trace step `{token}` is not time:mbps"))?;
        steps.push((parse_f64(t)?, parse_f64(r)?));
    }
    if steps.is_empty() {
        return Err("trace must contain at least one time:mbps step".to_string());
    }
    Ok(steps)
}

pub fn parse(text: &str) -> Result<Scenario, Vec<ParseError>> {
    let mut p = Parser {
        errors: Vec::new(),
        erica: EricaParams::default(),
        saw_erica: false,
        run: RunDef::default(),
        saw_run: false,
        links: Vec::new(),
        switches: Vec::new(),
        vcs: Vec::new(),
        vbr: Vec::new(),
        section: Section::None,
        seen_keys: BTreeSet::new(),
        pending_link: PendingLink::default(),
        pending_switch: PendingSwitch::default(),
        pending_vc: PendingVc::default(),
        pending_vbr: PendingVbr::default(),
    };
    let mut saw_version = false;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !saw_version {
            match content.split_once('=') {
                Some((k, v)) if k.trim() == "format_version" => {
                    saw_version = true;
                    if v.trim() != "1" {
                        p.err(line, format!("unsupported format_version `{}` (expected 1)", v.trim()));
                    }
                    continue;
                }
                _ => {
                    p.err(line, "the first line must be `format_version = 1`");
                    saw_version = true; // report once, keep parsing
                }
            }
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            p.open_section(name.trim(), line);
        } else if let Some((key, value)) = content.split_once('=') {
            p.key_value(key.trim(), value.trim(), line);
        } else {
            p.err(line, format!("expected `key = value` or `[section]`, got `{content}`"));
        }
    }
    if !saw_version {
        p.err(last_line, "missing `format_version = 1`");
    }
    p.flush_section();

    let scenario = Scenario {
        erica: p.erica,
        links: p.links,
        switches: p.switches,
        vcs: p.vcs,
        vbr: p.vbr,
        run: p.run,
    };
    let mut errors = p.errors;
    scenario.validate_into(&mut errors);
    if errors.is_empty() {
        Ok(scenario)
    } else {
        Err(errors)
    }
}

fn push_err(errors: &mut Vec<ParseError>, message: String) {
    errors.push(ParseError { line: 0, message });
}

/// Checks each hop exists, is crossed once, and starts where the previous hop
/// ended. Returns the slowest rate on the route (for VBR admission).
fn validate_route(
    errors: &mut Vec<ParseError>,
    link_to: &BTreeMap<&str, (&str, &str, f64)>,
    owner: &str,
    route: &[String],
) -> f64 {
    let mut min_rate = f64::INFINITY;
    if route.is_empty() {
        push_err(errors, format!("`{owner}` has an empty route"));
        return min_rate;
    }
    let mut prev_to: Option<&str> = None;
    let mut seen = BTreeSet::new();
    for id in route {
        match link_to.get(id.as_str()) {
            None => {
                push_err(errors, format!("`{owner}` routes over undeclared link `{id}`"));
                return min_rate;
            }
            Some(&(from, to, rate)) => {
                if !seen.insert(id.as_str()) {
                    push_err(errors, format!("`{owner}` crosses link `{id}` more than once"));
                }
                if let Some(prev) = prev_to {
                    if prev != from {
                        push_err(errors, format!(
                            "`{owner}` route is disconnected: link `{id}` starts at `{from}` but the previous link ends at `{prev}`"
                        ));
                    }
                }
                prev_to = Some(to);
                min_rate = min_rate.min(rate);
            }
        }
    }
    min_rate
}

impl Scenario {
    fn validate_into(&self, errors: &mut Vec<ParseError>) {
        if let Err(e) = self.erica.validate() {
            push_err(errors, format!("[erica] {e}"));
        }
        let mut link_to: BTreeMap<&str, (&str, &str, f64)> = BTreeMap::new();
        let mut ids = BTreeSet::new();
        for l in &self.links {
            if !ids.insert(l.id.as_str()) {
                push_err(errors, format!("duplicate link id `{}`", l.id));
            }
            if !(l.rate_mbps > 0.0) {
                push_err(errors, format!("link `{}` rate must be > 0, got {}", l.id, l.rate_mbps));
            }
            if !(l.prop_delay >= 0.0) {
                push_err(errors, format!("link `{}` prop_delay must be >= 0, got {}", l.id, l.prop_delay));
            }
            link_to.insert(l.id.as_str(), (l.from.as_str(), l.to.as_str(), l.rate_mbps));
        }
        let nodes: BTreeSet<&str> = self
            .links
            .iter()
            .flat_map(|l| [l.from.as_str(), l.to.as_str()])
            .collect();
        let mut switch_ids = BTreeSet::new();
        for sw in &self.switches {
            if !switch_ids.insert(sw.id.as_str()) {
                push_err(errors, format!("duplicate switch id `{}`", sw.id));
            }
            if !nodes.contains(sw.id.as_str()) {
                push_err(errors, format!("switch `{}` does not appear as a link endpoint", sw.id));
            }
            let mut scratch = self.erica;
            for (k, v) in &sw.overrides {
                if let Err(e) = apply_erica_key(&mut scratch, k, v) {
                    push_err(errors, format!("switch `{}`: {e}", sw.id));
                }
            }
            if let Err(e) = scratch.validate() {
                push_err(errors, format!("switch `{}`: {e}", sw.id));
            }
        }
        let mut vc_ids = BTreeSet::new();
        for vc in &self.vcs {
            if !vc_ids.insert(vc.id.as_str()) {
                push_err(errors, format!("duplicate vc id `{}`", vc.id));
            }
            validate_route(errors, &link_to, &vc.id, &vc.route);
            if !(vc.pcr_mbps > 0.0) {
                push_err(errors, format!("vc `{}` pcr must be > 0, got {}", vc.id, vc.pcr_mbps));
            }
            if !(vc.start_time >= 0.0) {
                push_err(errors, format!("vc `{}` start_time must be >= 0, got {}", vc.id, vc.start_time));
            }
            if let Some(cap) = vc.initial_acr_cap_mbps {
                if !(cap > 0.0) {
                    push_err(errors, format!("vc `{}` initial_acr_cap must be > 0, got {cap}", vc.id));
                }
            }
            if let SourceModel::Windowed { window0, burst_rtt } = vc.model {
                if window0 == 0 {
                    push_err(errors, format!("vc `{}` window0 must be >= 1", vc.id));
                }
                if !(burst_rtt > 0.0) {
                    push_err(errors, format!("vc `{}` burst_rtt must be > 0, got {burst_rtt}", vc.id));
                }
            }
        }
        for vbr in &self.vbr {
            if !vc_ids.insert(vbr.id.as_str()) {
                push_err(errors, format!("vbr id `{}` collides with another vc/vbr id", vbr.id));
            }
            let min_rate = validate_route(errors, &link_to, &vbr.id, &vbr.route);
            let peak = match &vbr.profile {
                VbrProfile::Square { amplitude_mbps, half_period } => {
                    if !(*half_period > 0.0) {
                        push_err(errors, format!("vbr `{}` square_half_period must be > 0", vbr.id));
                    }
                    if !(*amplitude_mbps >= 0.0) {
                        push_err(errors, format!("vbr `{}` square_amplitude must be >= 0", vbr.id));
                    }
                    *amplitude_mbps
                }
                VbrProfile::Trace(steps) => {
                    let mut peak = 0.0f64;
                    let mut prev = f64::NEG_INFINITY;
                    for &(t, r) in steps {
                        if t < 0.0 {
                            push_err(errors, format!("vbr `{}` trace time {t} is negative", vbr.id));
                        }
                        if t <= prev {
                            push_err(errors, format!("vbr `{}` trace times must be strictly increasing", vbr.id));
                        }
                        if r < 0.0 {
                            push_err(errors, format!("vbr `{}` trace rate {r} is negative", vbr.id));
                        }
                        prev = t;
                        peak = peak.max(r);
                    }
                    peak
                }
            };
            if peak > min_rate {
                push_err(errors, format!(
                    "vbr `{}` peak rate {peak} Mbps exceeds the slowest link on its route ({min_rate} Mbps)",
                    vbr.id
                ));
            }
        }
        if !(self.run.sample_period > 0.0) {
            push_err(errors, format!("[run] sample_period must be > 0, got {}", self.run.sample_period));
        }
        if !(self.run.duration > self.run.sample_period) {
            push_err(errors, format!(
                "[run] duration ({}) must exceed sample_period ({})",
                self.run.duration, self.run.sample_period
            ));
        }
        if !(self.run.turnaround_delay >= 0.0) {
            push_err(errors, format!("[run] turnaround_delay must be >= 0, got {}", self.run.turnaround_delay));
        }
        for (name, v) in [
            ("converge_by", self.run.converge_by),
            ("converge_tol", self.run.converge_tol),
            ("max_queue", self.run.max_queue),
            ("drain_by", self.run.drain_by),
            ("drain_below", self.run.drain_below),
            ("min_util", self.run.min_util),
            ("util_from", self.run.util_from),
            ("min_abr_util", self.run.min_abr_util),
            ("min_fairness", self.run.min_fairness),
            ("fairness_window", self.run.fairness_window),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    push_err(errors, format!("[run] {name} must be >= 0, got {v}"));
                }
            }
        }
    }

    /// Validate a scenario built in code the same way `parse` would.
    pub fn validate(&self) -> Result<(), Vec<ParseError>> {
        let mut errors = Vec::new();
        self.validate_into(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Resolved controller parameters for a node: global `[erica]` values with
    /// the node's `[switch]` overrides applied.
    pub fn node_params(&self, node: &str) -> EricaParams {
        let mut params = self.erica;
        if let Some(sw) = self.switches.iter().find(|sw| sw.id == node) {
            for (k, v) in &sw.overrides {
                apply_erica_key(&mut params, k, v).expect("overrides validated with the scenario");
            }
        }
        params
    }

    /// The allocation problem this topology poses, in Mbps. Every VC is
    /// source-capped at its PCR; VBR streams take no part.
    pub fn to_maxmin_problem(&self) -> MaxMinProblem {
        MaxMinProblem {
            links: self
                .links
                .iter()
                .map(|l| LinkSpec { id: l.id.clone(), capacity: l.rate_mbps })
                .collect(),
            vcs: self
                .vcs
                .iter()
                .map(|vc| VcSpec {
                    id: vc.id.clone(),
                    route: vc.route.clone(),
                    cap: Some(vc.pcr_mbps),
                })
                .collect(),
        }
    }

    /// Canonical text form; `parse` returns an equal value.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let p = &self.erica;
        let _ = writeln!(out, "format_version = 1");
        let _ = writeln!(out);
        let _ = writeln!(out, "[erica]");
        let _ = writeln!(out, "delta = {}", p.delta);
        let _ = writeln!(out, "target_delay_t0 = {}", p.target_delay_t0);
        let _ = writeln!(out, "hyper_a = {}", p.hyper_a);
        let _ = writeln!(out, "hyper_b = {}", p.hyper_b);
        let _ = writeln!(out, "qdlf = {}", p.qdlf);
        let _ = writeln!(out, "decay_factor = {}", p.decay_factor);
        let _ = writeln!(out, "alpha = {}", p.alpha);
        let _ = writeln!(out, "averaging_interval = {}", p.averaging_interval);
        let _ = writeln!(out, "activity_floor = {}", p.activity_floor);
        let _ = writeln!(out, "use_queue_control = {}", p.use_queue_control);
        let _ = writeln!(out, "target_utilization = {}", p.target_utilization);
        for l in &self.links {
            let _ = writeln!(out);
            let _ = writeln!(out, "[link]");
            let _ = writeln!(out, "id = {}", l.id);
            let _ = writeln!(out, "from = {}", l.from);
            let _ = writeln!(out, "to = {}", l.to);
            let _ = writeln!(out, "rate = {}", l.rate_mbps);
            let _ = writeln!(out, "prop_delay = {}", l.prop_delay);
        }
        for sw in &self.switches {
            let _ = writeln!(out);
            let _ = writeln!(out, "[switch]");
            let _ = writeln!(out, "id = {}", sw.id);
            for (k, v) in &sw.overrides {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        for vc in &self.vcs {
            let _ = writeln!(out);
            let _ = writeln!(out, "[vc]");
            let _ = writeln!(out, "id = {}", vc.id);
            let _ = writeln!(out, "route = {}", vc.route.join(" "));
            match vc.model {
                SourceModel::Persistent => {
                    let _ = writeln!(out, "model = persistent");
                }
                SourceModel::Windowed { window0, burst_rtt } => {
                    let _ = writeln!(out, "model = windowed");
                    let _ = writeln!(out, "window0 = {window0}");
                    let _ = writeln!(out, "burst_rtt = {burst_rtt}");
                }
            }
            let _ = writeln!(out, "pcr = {}", vc.pcr_mbps);
            let _ = writeln!(out, "start_time = {}", vc.start_time);
            if let Some(cap) = vc.initial_acr_cap_mbps {
                let _ = writeln!(out, "initial_acr_cap = {cap}");
            }
        }
        for vbr in &self.vbr {
            let _ = writeln!(out);
            let _ = writeln!(out, "[vbr]");
            let _ = writeln!(out, "id = {}", vbr.id);
            let _ = writeln!(out, "route = {}", vbr.route.join(" "));
            match &vbr.profile {
                VbrProfile::Square { amplitude_mbps, half_period } => {
                    let _ = writeln!(out, "square_amplitude = {amplitude_mbps}");
                    let _ = writeln!(out, "square_half_period = {half_period}");
                }
                VbrProfile::Trace(steps) => {
                    let steps: Vec<String> =
                        steps.iter().map(|(t, r)| format!("{t}:{r}")).collect();
                    let _ = writeln!(out, "trace = {}", steps.join(" "));
                }
            }
        }
        let r = &self.run;
        let _ = writeln!(out);
        let _ = writeln!(out, "[run]");
        let _ = writeln!(out, "duration = {}", r.duration);
        let _ = writeln!(out, "sample_period = {}", r.sample_period);
        let _ = writeln!(out, "seed = {}", r.seed);
        let _ = writeln!(out, "turnaround_delay = {}", r.turnaround_delay);
        for (name, v) in [
            ("converge_by", r.converge_by),
            ("converge_tol", r.converge_tol),
            ("max_queue", r.max_queue),
            ("drain_by", r.drain_by),
            ("drain_below", r.drain_below),
            ("min_util", r.min_util),
            ("util_from", r.util_from),
            ("min_abr_util", r.min_abr_util),
            ("min_fairness", r.min_fairness),
            ("fairness_window", r.fairness_window),
        ] {
            if let Some(v) = v {
                let _ = writeln!(out, "{name} = {v}");
            }
        }
        out
    }
}

/// The multi-bottleneck fairness benchmark: a chain of twelve switches whose
/// inter-switch links thin out mid-chain, five VC groups pinned to single
/// hops, one group crossing the whole chain, entry/exit links of 150 Mbps and
/// 5 ms propagation everywhere (1000 km), giving the chain-crossing group a
/// 130 ms round trip.
///
/// Expected allocations (Mbps): A=10, B=5, C=35, D=35, E=35, F=10, G=5, H=52.5.
pub fn build_gfc2() -> Scenario {
    let mut links = Vec::new();
    let mut vcs = Vec::new();
    let inter: &[f64] = &[130.0, 130.0, 60.0, 95.0, 65.0, 50.0, 150.0, 150.0, 150.0, 150.0, 150.0];
    for (i, &rate) in inter.iter().enumerate() {
        links.push(LinkDef {
            id: format!("L{}", i + 1),
            from: format!("sw{}", i + 1),
            to: format!("sw{}", i + 2),
            rate_mbps: rate,
            prop_delay: 0.005,
        });
    }
    // (group, member count, first switch on the path, links crossed)
    let groups: &[(&str, usize, usize, &[usize])] = &[
        ("H", 2, 1, &[1]),
        ("C", 3, 2, &[2]),
        ("D", 1, 3, &[3]),
        ("E", 2, 4, &[4]),
        ("A", 3, 5, &[5]),
        ("F", 1, 5, &[5]),
        ("B", 5, 6, &[6]),
        ("G", 5, 1, &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]),
    ];
    for &(name, count, entry_sw, backbone) in groups {
        for k in 1..=count {
            let vc = format!("{name}{k}");
            let exit_sw = entry_sw + backbone.len();
            links.push(LinkDef {
                id: format!("e{vc}"),
                from: format!("src{vc}"),
                to: format!("sw{entry_sw}"),
                rate_mbps: 150.0,
                prop_delay: 0.005,
            });
            links.push(LinkDef {
                id: format!("x{vc}"),
                from: format!("sw{exit_sw}"),
                to: format!("dst{vc}"),
                rate_mbps: 150.0,
                prop_delay: 0.005,
            });
            let mut route = vec![format!("e{vc}")];
            route.extend(backbone.iter().map(|l| format!("L{l}")));
            route.push(format!("x{vc}"));
            vcs.push(VcDef {
                id: vc,
                route,
                model: SourceModel::Persistent,
                pcr_mbps: 150.0,
                start_time: 0.0,
                // Start everyone slow: the chain's feedback takes a round trip
                // to arrive, and an unlucky fast draw would flood the thin
                // mid-chain links meanwhile.
                initial_acr_cap_mbps: Some(10.0),
            });
        }
    }
    // The chain is long (G's loop spans ~130 ms) while the control interval
    // is 5 ms, so the tuning leans conservative: smaller overload deadband,
    // tighter queue-delay target, a gentler drain curve, and a high drain
    // floor.  Detuning each switch's interval a few percent keeps the twelve
    // control loops from beating in sync, which otherwise locks the chain
    // into a standing oscillation.
    let mut erica = EricaParams::default();
    erica.delta = 0.05;
    erica.target_delay_t0 = 0.002;
    erica.hyper_a = 1.02;
    erica.qdlf = 0.9;
    let mut switches = Vec::new();
    for k in 1..=12usize {
        let eps = 0.05 * (2.0 * (k as f64 - 0.5) / 12.0 - 1.0);
        let iv = erica.averaging_interval * (1.0 + eps);
        switches.push(SwitchDef {
            id: format!("sw{k}"),
            overrides: vec![("averaging_interval".to_string(), format!("{iv}"))],
        });
    }
    Scenario {
        erica,
        links,
        switches,
        vcs,
        vbr: Vec::new(),
        run: RunDef {
            duration: 2.0,
            sample_period: 0.001,
            seed: 1,
            turnaround_delay: 0.0,
            converge_by: Some(0.4),
            converge_tol: Some(0.10),
            max_queue: Some(30_000.0),
            drain_by: Some(0.8),
            drain_below: Some(2_000.0),
            min_util: Some(0.95),
            util_from: Some(1.0),
            min_abr_util: None,
            min_fairness: None,
            fairness_window: None,
        },
    }
}

/// Load-and-capacity-variation stress test: `n_sources` windowed sources and
/// one VBR stream share a single 155 Mbps bottleneck; the VBR profile
/// modulates the capacity left for the controlled traffic.
pub fn build_varcap(n_sources: usize, vbr_profile: VbrProfile) -> Scenario {
    assert!(n_sources >= 1, "need at least one source");
    let mut links = vec![LinkDef {
        id: "BTL".to_string(),
        from: "swl".to_string(),
        to: "swr".to_string(),
        rate_mbps: 155.0,
        prop_delay: 0.001,
    }];
    let mut vcs = Vec::new();
    for k in 1..=n_sources {
        links.push(LinkDef {
            id: format!("eS{k}"),
            from: format!("srcS{k}"),
            to: "swl".to_string(),
            rate_mbps: 155.0,
            prop_delay: 0.001,
        });
        links.push(LinkDef {
            id: format!("xS{k}"),
            from: "swr".to_string(),
            to: format!("dstS{k}"),
            rate_mbps: 155.0,
            prop_delay: 0.001,
        });
        vcs.push(VcDef {
            id: format!("S{k}"),
            route: vec![format!("eS{k}"), "BTL".to_string(), format!("xS{k}")],
            model: SourceModel::Windowed { window0: 8, burst_rtt: 0.01 },
            pcr_mbps: 155.0,
            start_time: 0.0,
            initial_acr_cap_mbps: None,
        });
    }
    links.push(LinkDef {
        id: "eV".to_string(),
        from: "srcV".to_string(),
        to: "swl".to_string(),
        rate_mbps: 155.0,
        prop_delay: 0.001,
    });
    links.push(LinkDef {
        id: "xV".to_string(),
        from: "swr".to_string(),
        to: "dstV".to_string(),
        rate_mbps: 155.0,
        prop_delay: 0.001,
    });
    let vbr = vec![VbrDef {
        id: "V".to_string(),
        route: vec!["eV".to_string(), "BTL".to_string(), "xV".to_string()],
        profile: vbr_profile,
    }];
    Scenario {
        erica: EricaParams::default(),
        links,
        switches: Vec::new(),
        vcs,
        vbr,
        run: RunDef {
            duration: 5.0,
            sample_period: 0.001,
            seed: 1,
            turnaround_delay: 0.0,
            converge_by: None,
            converge_tol: None,
            max_queue: Some(120_000.0),
            drain_by: None,
            drain_below: None,
            min_util: None,
            util_from: Some(3.0),
            min_abr_util: Some(0.90),
            min_fairness: Some(0.95),
            fairness_window: Some(1.0),
        },
    }
}

/// The default capacity-variation profile: 93 Mbps (60% of the link) on/off
/// square wave, 50 ms half period.
pub fn default_varcap_profile() -> VbrProfile {
    VbrProfile::Square { amplitude_mbps: 93.0, half_period: 0.05 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxmin;

    const MINIMAL: &str = "\
format_version = 1

[link]
id = l1
from = a
to = b
rate = 155
prop_delay = 0.001

[vc]
id = v1
route = l1
pcr = 155

[run]
duration = 1.0
sample_period = 0.01
seed = 7
";

    #[test]
    fn minimal_scenario_fills_defaults() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.erica, EricaParams::default());
        assert_eq!(s.links.len(), 1);
        assert_eq!(s.links[0].rate_mbps, 155.0);
        assert_eq!(s.vcs[0].model, SourceModel::Persistent);
        assert_eq!(s.vcs[0].start_time, 0.0);
        assert_eq!(s.run.seed, 7);
        assert_eq!(s.run.turnaround_delay, 0.0);
    }

    #[test]
    fn unknown_key_is_an_error_with_its_line() {
        let text = MINIMAL.replace("prop_delay = 0.001", "prop_dely = 0.001");
        let errors = parse(&text).unwrap_err();
        assert!(errors.iter().any(|e| e.line == 8 && e.message.contains("prop_dely")),
            "got {errors:?}");
    }

    #[test]
    fn dangling_route_is_an_error() {
        let text = MINIMAL.replace("route = l1", "route = l1 ghost");
        let errors = parse(&text).unwrap_err();
        assert!(errors.iter().any(|e| e.message.contains("ghost")), "got {errors:?}");
    }

    #[test]
    fn disconnected_route_is_an_error() {
        let text = format!(
            "{MINIMAL}\n[link]\nid = l2\nfrom = c\nto = d\nrate = 10\n\n[vc]\nid = v2\nroute = l1 l2\npcr = 1\n"
        );
        let errors = parse(&text).unwrap_err();
        assert!(errors.iter().any(|e| e.message.contains("disconnected")), "got {errors:?}");
    }

    #[test]
    fn missing_version_is_an_error() {
        let errors = parse("[run]\nduration = 1\n").unwrap_err();
        assert!(errors.iter().any(|e| e.message.contains("format_version")));
    }

    #[test]
    fn vbr_peak_above_route_rate_is_an_error() {
        let text = format!(
            "{MINIMAL}\n[vbr]\nid = bg\nroute = l1\nsquare_amplitude = 200\nsquare_half_period = 0.05\n"
        );
        let errors = parse(&text).unwrap_err();
        assert!(errors.iter().any(|e| e.message.contains("exceeds the slowest link")));
    }

    #[test]
    fn switch_override_changes_only_that_node() {
        let text = format!("{MINIMAL}\n[switch]\nid = a\ndelta = 0.05\n");
        let s = parse(&text).unwrap();
        assert_eq!(s.node_params("a").delta, 0.05);
        assert_eq!(s.node_params("b").delta, 0.1);
    }

    #[test]
    fn roundtrip_minimal_and_builders() {
        for s in [
            parse(MINIMAL).unwrap(),
            build_gfc2(),
            build_varcap(10, default_varcap_profile()),
            build_varcap(3, VbrProfile::Trace(vec![(0.0, 0.0), (0.5, 93.0), (1.25, 40.0)])),
        ] {
            let text = s.serialize();
            let back = parse(&text).unwrap_or_else(|e| panic!("reparse failed: {e:?}\n{text}"));
            assert_eq!(back, s);
        }
    }

    #[test]
    fn builders_validate() {
        build_gfc2().validate().unwrap();
        build_varcap(1, default_varcap_profile()).validate().unwrap();
        build_varcap(100, default_varcap_profile()).validate().unwrap();
    }

    #[test]
    fn gfc2_allocations_match_the_benchmark_table() {
        let s = build_gfc2();
        let a = maxmin::solve(&s.to_maxmin_problem()).unwrap();
        let expected: &[(&str, f64)] = &[
            ("A", 10.0),
            ("B", 5.0),
            ("C", 35.0),
            ("D", 35.0),
            ("E", 35.0),
            ("F", 10.0),
            ("G", 5.0),
            ("H", 52.5),
        ];
        for vc in &s.vcs {
            let group = &vc.id[..1];
            let want = expected.iter().find(|(g, _)| *g == group).unwrap().1;
            let got = a.rates[&vc.id];
            assert!(
                (got - want).abs() <= 1e-9 * want,
                "{}: got {got}, want {want}",
                vc.id
            );
        }
    }

    #[test]
    fn gfc2_longest_round_trip_is_130ms() {
        let s = build_gfc2();
        let delay_of = |id: &str| s.links.iter().find(|l| l.id == id).unwrap().prop_delay;
        let max_rtt = s
            .vcs
            .iter()
            .map(|vc| 2.0 * vc.route.iter().map(|l| delay_of(l)).sum::<f64>())
            .fold(0.0f64, f64::max);
        assert!((max_rtt - 0.130).abs() < 1e-12, "max rtt {max_rtt}");
    }

    #[test]
    fn varcap_bottleneck_is_shared_by_all_sources() {
        let s = build_varcap(10, default_varcap_profile());
        assert_eq!(s.vcs.len(), 10);
        for vc in &s.vcs {
            assert!(vc.route.contains(&"BTL".to_string()));
        }
        let a = maxmin::solve(&s.to_maxmin_problem()).unwrap();
        for vc in &s.vcs {
            assert!((a.rates[&vc.id] - 15.5).abs() < 1e-9);
        }
    }
}
