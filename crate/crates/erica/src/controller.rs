//! Per-output-port explicit-rate controller.
//!
//! The controller is a sequential state machine driven entirely by the host:
//! it is told about every ABR cell queued at the port ([`PortController::observe_cell`],
//! [`PortController::on_forward_rm`]), every VBR cell the port services
//! ([`PortController::observe_vbr_service`]), and the end of each measurement
//! interval ([`PortController::close_interval`]). In return it stamps explicit
//! rates into backward RM cells ([`PortController::on_backward_rm`]).
//!
//! Rates are cells/second; any consistent unit works as long as `link_rate`
//! and CCR/ER values share it.

use std::collections::{BTreeMap, BTreeSet};

use crate::params::{EricaParams, ParamError};

pub type VcId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// The RM-cell fields the controller reads and writes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmCellView {
    pub vc: VcId,
    pub direction: Direction,
    /// Source current cell rate as stamped by the source.
    pub ccr: f64,
    /// Explicit rate; switches only ever lower it.
    pub er: f64,
}

/// Per-VC state retained across intervals.
#[derive(Debug, Clone)]
pub struct VcRecord {
    /// Last CCR copied from a forward RM cell of this VC.
    pub ccr: f64,
    /// 1 when seen this interval; multiplied by the decay factor per unseen interval.
    pub activity_level: f64,
    /// Feedback already given this interval, if any. At most one new value
    /// per VC per interval: later backward RM cells reuse it.
    pub er_this_interval: Option<f64>,
}

/// Counters reset at every interval boundary.
#[derive(Debug, Clone, Default)]
pub struct IntervalAccumulators {
    pub abr_cells_in: u64,
    pub vbr_cells_out: u64,
    pub seen_forward: BTreeSet<VcId>,
    pub seen_backward: BTreeSet<VcId>,
}

/// The quantities computed at an interval close and used for feedback until
/// the next close.
#[derive(Debug, Clone, Copy)]
pub struct IntervalOutputs {
    pub target_abr_capacity: f64,
    pub load_factor_z: f64,
    pub fair_share: f64,
    pub max_alloc_previous: f64,
    pub effective_n: f64,
}

/// Capacity fraction granted to sources as a function of the queue length.
///
/// Two rectangular hyperbolae meeting at `(q0, 1)`: the `b`-curve fills the
/// queue toward its target below `q0`, the `a`-curve drains it above, never
/// dropping below the drain limit `qdlf`.
pub fn queue_control_fraction(q: f64, q0: f64, params: &EricaParams) -> Result<f64, ParamError> {
    params.validate()?;
    if !(q0 > 0.0) {
        return Err(ParamError {
            field: "q0",
            message: format!("target queue length must be > 0, got {q0}"),
        });
    }
    assert!(q >= 0.0, "queue length must be nonnegative, got {q}");
    let (a, b) = (params.hyper_a, params.hyper_b);
    Ok(if q <= q0 {
        b * q0 / ((b - 1.0) * q + q0)
    } else {
        (a * q0 / ((a - 1.0) * q + q0)).max(params.qdlf)
    })
}

/// Explicit-rate feedback state for one output port.
#[derive(Debug, Clone)]
pub struct PortController {
    params: EricaParams,
    link_rate: f64,
    vcs: BTreeMap<VcId, VcRecord>,
    acc: IntervalAccumulators,
    averaged_abr_capacity: f64,
    averaged_input_rate: f64,
    max_alloc_current: f64,
    current: IntervalOutputs,
}

impl PortController {
    pub fn new(params: EricaParams, link_rate: f64) -> Result<Self, ParamError> {
        params.validate()?;
        if !(link_rate > 0.0) {
            return Err(ParamError {
                field: "link_rate",
                message: format!("must be > 0, got {link_rate}"),
            });
        }
        // Until the first interval closes, assume an idle link with one VC:
        // target = fraction-at-empty-queue x link rate, fair share = target.
        let fraction0 = if params.use_queue_control {
            let q0 = params.target_delay_t0 * link_rate;
            queue_control_fraction(0.0, q0, &params)?
        } else {
            params.target_utilization
        };
        let target0 = fraction0 * link_rate;
        Ok(PortController {
            params,
            link_rate,
            vcs: BTreeMap::new(),
            acc: IntervalAccumulators::default(),
            averaged_abr_capacity: link_rate,
            averaged_input_rate: 0.0,
            max_alloc_current: target0,
            current: IntervalOutputs {
                target_abr_capacity: target0,
                load_factor_z: 1.0,
                fair_share: target0,
                max_alloc_previous: target0,
                effective_n: 1.0,
            },
        })
    }

    pub fn params(&self) -> &EricaParams {
        &self.params
    }

    pub fn link_rate(&self) -> f64 {
        self.link_rate
    }

    /// Outputs of the most recent interval close (or the initial assumption).
    pub fn current(&self) -> &IntervalOutputs {
        &self.current
    }

    fn record_mut(&mut self, vc: VcId) -> &mut VcRecord {
        self.vcs.entry(vc).or_insert(VcRecord {
            ccr: 0.0,
            activity_level: 0.0,
            er_this_interval: None,
        })
    }

    /// Register one ABR cell of `vc` at this port. Forward cells count toward
    /// the measured input rate; a sighting in either direction makes the VC
    /// fully active for the current interval.
    pub fn observe_cell(&mut self, vc: VcId, direction: Direction) {
        self.record_mut(vc).activity_level = 1.0;
        match direction {
            Direction::Forward => {
                self.acc.abr_cells_in += 1;
                self.acc.seen_forward.insert(vc);
            }
            Direction::Backward => {
                self.acc.seen_backward.insert(vc);
            }
        }
    }

    /// Register `cells` VBR cells serviced by this port; they reduce the ABR
    /// capacity measured at the next interval close.
    pub fn observe_vbr_service(&mut self, cells: u64) {
        self.acc.vbr_cells_out += cells;
    }

    /// A forward RM cell both counts as a forward cell and refreshes the
    /// stored CCR of its VC (last write in an interval wins).
    pub fn on_forward_rm(&mut self, cell: &RmCellView) {
        debug_assert_eq!(cell.direction, Direction::Forward);
        self.observe_cell(cell.vc, Direction::Forward);
        self.record_mut(cell.vc).ccr = cell.ccr;
    }

    /// Close the measurement interval: fold the interval's counters into the
    /// long-term averages, derive the target capacity from the queue length,
    /// and roll the allocation maximum. Clears all per-interval state.
    pub fn close_interval(&mut self, queue_length: f64) -> IntervalOutputs {
        assert!(queue_length >= 0.0, "queue length must be nonnegative");
        let dt = self.params.averaging_interval;
        let measured_input = self.acc.abr_cells_in as f64 / dt;
        let vbr_rate = self.acc.vbr_cells_out as f64 / dt;
        let measured_capacity = (self.link_rate - vbr_rate).max(0.0);

        let alpha = self.params.alpha;
        self.averaged_input_rate = alpha * measured_input + (1.0 - alpha) * self.averaged_input_rate;
        self.averaged_abr_capacity =
            alpha * measured_capacity + (1.0 - alpha) * self.averaged_abr_capacity;

        let target = if self.averaged_abr_capacity > 0.0 {
            let fraction = if self.params.use_queue_control {
                let q0 = self.params.target_delay_t0 * self.averaged_abr_capacity;
                queue_control_fraction(queue_length, q0, &self.params)
                    .expect("params validated at construction and q0 > 0")
            } else {
                self.params.target_utilization
            };
            fraction * self.averaged_abr_capacity
        } else {
            0.0
        };

        // z is only meaningful when both sides are positive; the zero cases
        // short-circuit in compute_er, so park z at 1 to keep it finite.
        let z = if target > 0.0 && self.averaged_input_rate > 0.0 {
            self.averaged_input_rate / target
        } else {
            1.0
        };

        // Active-VC count uses this interval's levels, before decay.
        let activity_sum: f64 = self.vcs.values().map(|r| r.activity_level).sum();
        let effective_n = activity_sum.max(self.params.activity_floor);
        let fair_share = target / effective_n;

        let max_alloc_previous = self.max_alloc_current;
        self.max_alloc_current = fair_share;
        self.current = IntervalOutputs {
            target_abr_capacity: target,
            load_factor_z: z,
            fair_share,
            max_alloc_previous,
            effective_n,
        };

        let decay = self.params.decay_factor;
        for (vc, rec) in self.vcs.iter_mut() {
            if !self.acc.seen_forward.contains(vc) && !self.acc.seen_backward.contains(vc) {
                rec.activity_level *= decay;
            }
            rec.er_this_interval = None;
        }
        self.acc = IntervalAccumulators::default();
        self.current
    }

    /// The explicit rate this port grants `vc` for the current interval.
    /// Computed once per VC per interval; repeated calls return the cached
    /// value so every backward RM cell in the interval carries one feedback.
    pub fn compute_er(&mut self, vc: VcId) -> f64 {
        if let Some(er) = self.vcs.get(&vc).and_then(|r| r.er_this_interval) {
            return er;
        }
        let out = self.current;
        let er = if out.target_abr_capacity <= 0.0 {
            // No capacity to grant.
            0.0
        } else if self.averaged_input_rate <= 0.0 {
            // No load measured: offer the fair share.
            out.fair_share
        } else {
            let ccr = self.vcs.get(&vc).map_or(0.0, |r| r.ccr);
            let vc_share = ccr / out.load_factor_z;
            let mut er = if out.load_factor_z > 1.0 + self.params.delta {
                out.fair_share.max(vc_share)
            } else {
                out.max_alloc_previous.max(vc_share)
            };
            // The interval maximum tracks the raw grant, before moderation.
            self.max_alloc_current = self.max_alloc_current.max(er);
            if er > out.fair_share && ccr < out.fair_share {
                er = out.fair_share;
            }
            er
        };
        self.record_mut(vc).er_this_interval = Some(er);
        er
    }

    /// Stamp feedback into a backward RM cell: the ER field becomes the
    /// minimum of its incoming value, this port's grant, and the target
    /// capacity. The sighting also marks the VC active.
    pub fn on_backward_rm(&mut self, cell: &RmCellView) -> RmCellView {
        debug_assert_eq!(cell.direction, Direction::Backward);
        self.observe_cell(cell.vc, Direction::Backward);
        let er = self.compute_er(cell.vc);
        RmCellView {
            er: cell.er.min(er).min(self.current.target_abr_capacity),
            ..*cell
        }
    }

    pub fn activity_level(&self, vc: VcId) -> Option<f64> {
        self.vcs.get(&vc).map(|r| r.activity_level)
    }

    #[cfg(test)]
    fn max_alloc_current(&self) -> f64 {
        self.max_alloc_current
    }

    /// Test hook: pin the interval outputs and averages directly.
    #[cfg(test)]
    fn force_state(
        &mut self,
        outputs: IntervalOutputs,
        averaged_input_rate: f64,
        averaged_abr_capacity: f64,
    ) {
        self.current = outputs;
        self.max_alloc_current = outputs.fair_share;
        self.averaged_input_rate = averaged_input_rate;
        self.averaged_abr_capacity = averaged_abr_capacity;
        for rec in self.vcs.values_mut() {
            rec.er_this_interval = None;
        }
    }
}
