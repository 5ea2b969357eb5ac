//! Synchronous fluid model of a single bottleneck.
//!
//! One cycle = one measurement interval long enough that every source's new
//! rate is visible before the next allocation. Queue control and the
//! low-sender moderation step are deliberately absent here: this model backs
//! the convergence arguments (closure, overload persistence, equalization,
//! logarithmic convergence to the fair share), not the transient behavior.
//!
//! The allocation rule per cycle, with `fs = C/N` and `map` the largest
//! current rate: every source is offered `max(fs, rate/z)` when overloaded
//! beyond `1 + delta`, and `max(fs, map, rate/z)` otherwise; sources with a
//! cap are clipped to it afterwards.

use std::fmt;

use crate::maxmin::{LinkSpec, MaxMinProblem, VcSpec};

pub const BOTTLENECK_LINK: &str = "bottleneck";

#[derive(Debug, Clone, PartialEq)]
pub enum FluidError {
    NoSources,
    NonPositiveCapacity(f64),
    NegativeRate { source: usize, rate: f64 },
    RateAboveCapacity { source: usize, rate: f64 },
    NonPositiveCap { source: usize, cap: f64 },
    RateAboveCap { source: usize, rate: f64, cap: f64 },
    LengthMismatch { rates: usize, caps: usize },
}

impl fmt::Display for FluidError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluidError::NoSources => write!(f, "at least one source is required"),
            FluidError::NonPositiveCapacity(c) => write!(f, "capacity must be > 0, got {c}"),
            FluidError::NegativeRate { source, rate } => {
                write!(f, "source {source} has negative rate {rate}")
            }
            FluidError::RateAboveCapacity { source, rate } => {
                write!(f, "source {source} rate {rate} exceeds the capacity")
            }
            FluidError::NonPositiveCap { source, cap } => {
                write!(f, "source {source} has non-positive cap {cap}")
            }
            FluidError::RateAboveCap { source, rate, cap } => {
                write!(f, "source {source} rate {rate} exceeds its cap {cap}")
            }
            FluidError::LengthMismatch { rates, caps } => {
                write!(f, "{rates} rates but {caps} caps")
            }
        }
    }
}

impl std::error::Error for FluidError {}

/// Rates of all sources at one cycle, with the derived load factor.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub rates: Vec<f64>,
    /// Per-source bottleneck elsewhere; `None` for greedy sources.
    pub caps: Vec<Option<f64>>,
    /// Target capacity of the bottleneck.
    pub capacity: f64,
    /// Load factor of `rates`: their sum over the capacity.
    pub z: f64,
    pub cycle: u64,
}

impl FluidState {
    pub fn new(rates: Vec<f64>, caps: Vec<Option<f64>>, capacity: f64) -> Result<Self, FluidError> {
        if rates.is_empty() {
            return Err(FluidError::NoSources);
        }
        if !(capacity > 0.0) {
            return Err(FluidError::NonPositiveCapacity(capacity));
        }
        if rates.len() != caps.len() {
            return Err(FluidError::LengthMismatch { rates: rates.len(), caps: caps.len() });
        }
        for (i, &r) in rates.iter().enumerate() {
            if r < 0.0 {
                return Err(FluidError::NegativeRate { source: i, rate: r });
            }
            // The closure argument (0 < z < N) relies on no single source
            // exceeding the bottleneck capacity.
            if r > capacity {
                return Err(FluidError::RateAboveCapacity { source: i, rate: r });
            }
            if let Some(cap) = caps[i] {
                if !(cap > 0.0) {
                    return Err(FluidError::NonPositiveCap { source: i, cap });
                }
                if r > cap {
                    return Err(FluidError::RateAboveCap { source: i, rate: r, cap });
                }
            }
        }
        let z = rates.iter().sum::<f64>() / capacity;
        Ok(FluidState { rates, caps, capacity, z, cycle: 0 })
    }

    pub fn uncapped_greedy(rates: Vec<f64>, capacity: f64) -> Result<Self, FluidError> {
        let caps = vec![None; rates.len()];
        FluidState::new(rates, caps, capacity)
    }

    /// The equivalent single-link allocation problem, for oracle comparison.
    pub fn as_problem(&self) -> MaxMinProblem {
        MaxMinProblem {
            links: vec![LinkSpec { id: BOTTLENECK_LINK.to_string(), capacity: self.capacity }],
            vcs: self
                .caps
                .iter()
                .enumerate()
                .map(|(i, cap)| VcSpec {
                    id: format!("s{i}"),
                    route: vec![BOTTLENECK_LINK.to_string()],
                    cap: *cap,
                })
                .collect(),
        }
    }
}

/// Advance one measurement cycle: allocate, clip to caps, recompute the load.
pub fn run_cycle(s: &FluidState, delta: f64) -> Result<FluidState, FluidError> {
    if !(s.capacity > 0.0) {
        return Err(FluidError::NonPositiveCapacity(s.capacity));
    }
    let n = s.rates.len();
    if n == 0 {
        return Err(FluidError::NoSources);
    }
    let fs = s.capacity / n as f64;
    let map = s.rates.iter().cloned().fold(0.0, f64::max);
    let z = s.z;
    let rates: Vec<f64> = s
        .rates
        .iter()
        .zip(&s.caps)
        .map(|(&r, cap)| {
            let vc_share = if z > 0.0 { r / z } else { 0.0 };
            let offered = if z > 1.0 + delta {
                fs.max(vc_share)
            } else {
                fs.max(map).max(vc_share)
            };
            match cap {
                Some(c) => offered.min(*c),
                None => offered,
            }
        })
        .collect();
    let z = rates.iter().sum::<f64>() / s.capacity;
    Ok(FluidState { rates, caps: s.caps.clone(), capacity: s.capacity, z, cycle: s.cycle + 1 })
}

/// The steady operating region: load inside `[1, 1+delta]` and rates at the
/// constrained equal share — every source either sits at its cap or matches
/// the common rate of the contending sources, and no link of `p` is
/// overloaded. With the load allowed to sit anywhere in the band, the common
/// rate can exceed the strict max-min rate by up to `delta * C / (C - B)`.
pub fn in_target_region(s: &FluidState, delta: f64, p: &MaxMinProblem, tol: f64) -> bool {
    let eps = 1e-9;
    if !(s.z >= 1.0 - eps && s.z <= 1.0 + delta + eps) {
        return false;
    }
    let common = s.rates.iter().cloned().fold(0.0, f64::max);
    if !(common > 0.0) {
        return false;
    }
    let all_placed = s.rates.iter().zip(&s.caps).all(|(&r, cap)| {
        let at_common = (r - common).abs() <= tol * common;
        let at_cap = cap.map_or(false, |c| (r - c).abs() <= 1e-6 * c && c <= common * (1.0 + tol));
        at_common || at_cap
    });
    if !all_placed {
        return false;
    }
    // Feasibility against the reference problem, within the load band.
    p.links.iter().all(|l| {
        let load: f64 = p
            .vcs
            .iter()
            .enumerate()
            .filter(|(_, vc)| vc.route.iter().any(|r| r == &l.id))
            .map(|(i, _)| s.rates.get(i).copied().unwrap_or(0.0))
            .sum();
        load <= l.capacity * (1.0 + delta + eps)
    })
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub converged: bool,
    /// Index of the first cycle of the stable pair (0 = initial state).
    pub cycles: u64,
    pub trace: Vec<FluidState>,
}

/// Iterate until the state sits in the target region for two consecutive
/// cycles (ruling out a transit through the band), or give up.
pub fn run_until_converged(
    initial: FluidState,
    delta: f64,
    max_cycles: u64,
) -> Result<ConvergenceRun, FluidError> {
    assert!(max_cycles >= 1, "max_cycles must be at least 1");
    let p = initial.as_problem();
    let tol = 1e-3;
    let mut trace = vec![initial];
    let mut in_region_since: Option<u64> = None;
    for cycle in 1..=max_cycles {
        let next = run_cycle(trace.last().unwrap(), delta)?;
        let in_region = in_target_region(&next, delta, &p, tol);
        trace.push(next);
        match (in_region, in_region_since) {
            (true, Some(first)) => {
                return Ok(ConvergenceRun { converged: true, cycles: first, trace });
            }
            (true, None) => in_region_since = Some(cycle),
            (false, _) => in_region_since = None,
        }
    }
    let cycles = trace.len() as u64 - 1;
    Ok(ConvergenceRun { converged: false, cycles, trace })
}
