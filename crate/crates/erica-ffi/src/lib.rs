//! C ABI for the per-port explicit-rate controller.
//!
//! The controller lives behind an opaque handle; every call returns a status
//! code and writes results through out-pointers. Rates are cells/second and
//! times are seconds, as in the Rust API. All functions are safe to call
//! from C as long as the handle and pointers are valid; nothing here panics
//! on bad numeric input — it is rejected with a status instead.

use std::os::raw::c_char;

use erica::controller::{self, PortController};
use erica::params;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EricaStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// A controller parameter failed validation.
    InvalidParam = 2,
    /// An argument was out of range (negative or NaN where not allowed,
    /// or a cell travelling the wrong direction).
    InvalidArgument = 3,
}

/// Which way a cell is travelling relative to its source.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EricaDirection {
    Forward = 0,
    Backward = 1,
}

impl From<EricaDirection> for controller::Direction {
    fn from(d: EricaDirection) -> Self {
        match d {
            EricaDirection::Forward => controller::Direction::Forward,
            EricaDirection::Backward => controller::Direction::Backward,
        }
    }
}

/// Controller tunables. Obtain defaults from `erica_params_default` and
/// adjust fields before `erica_controller_new`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EricaParams {
    /// Half-width of the load band treated as unit load.
    pub delta: f64,
    /// Queue drain target in seconds of averaged ABR capacity.
    pub target_delay_t0: f64,
    /// Steepness of the drain hyperbola above the neutral queue point.
    pub hyper_a: f64,
    /// Steepness of the fill hyperbola at or below the neutral point.
    pub hyper_b: f64,
    /// Lower bound on the capacity fraction left to sources while draining.
    pub qdlf: f64,
    /// Per-interval multiplier for the activity of a silent VC.
    pub decay_factor: f64,
    /// Weight of the newest measurement in the exponential averages.
    pub alpha: f64,
    /// Measurement interval length in seconds.
    pub averaging_interval: f64,
    /// Lower bound on the effective VC count.
    pub activity_floor: f64,
    /// When false, `target_utilization` scales capacity and the queue is
    /// ignored.
    pub use_queue_control: bool,
    /// Capacity fraction used when `use_queue_control` is false.
    pub target_utilization: f64,
}

impl From<EricaParams> for params::EricaParams {
    fn from(p: EricaParams) -> Self {
        params::EricaParams {
            delta: p.delta,
            target_delay_t0: p.target_delay_t0,
            hyper_a: p.hyper_a,
            hyper_b: p.hyper_b,
            qdlf: p.qdlf,
            decay_factor: p.decay_factor,
            alpha: p.alpha,
            averaging_interval: p.averaging_interval,
            activity_floor: p.activity_floor,
            use_queue_control: p.use_queue_control,
            target_utilization: p.target_utilization,
        }
    }
}

impl From<params::EricaParams> for EricaParams {
    fn from(p: params::EricaParams) -> Self {
        EricaParams {
            delta: p.delta,
            target_delay_t0: p.target_delay_t0,
            hyper_a: p.hyper_a,
            hyper_b: p.hyper_b,
            qdlf: p.qdlf,
            decay_factor: p.decay_factor,
            alpha: p.alpha,
            averaging_interval: p.averaging_interval,
            activity_floor: p.activity_floor,
            use_queue_control: p.use_queue_control,
            target_utilization: p.target_utilization,
        }
    }
}

/// The RM-cell fields the controller reads and writes.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EricaRmCell {
    /// Virtual circuit identifier.
    pub vc: u32,
    pub direction: EricaDirection,
    /// Source current cell rate, cells/second.
    pub ccr: f64,
    /// Explicit rate, cells/second; switches only ever lower it.
    pub er: f64,
}

/// Quantities computed at an interval close, valid until the next close.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EricaIntervalOutputs {
    /// Capacity offered to ABR traffic, cells/second.
    pub target_abr_capacity: f64,
    /// Averaged input rate over the target capacity.
    pub load_factor_z: f64,
    /// Equal split of the target capacity, cells/second.
    pub fair_share: f64,
    /// Largest grant of the previous interval, cells/second.
    pub max_alloc_previous: f64,
    /// Activity-weighted count of known VCs.
    pub effective_n: f64,
}

/// Opaque per-port controller handle.
pub struct EricaController {
    inner: PortController,
}

/// Default tunables (5 ms interval, queue control on).
#[no_mangle]
pub extern "C" fn erica_params_default() -> EricaParams {
    params::EricaParams::default().into()
}

/// Create a controller for a port of `link_rate` cells/second.
///
/// On success writes the new handle to `out` and returns `Ok`. The handle
/// must be released with `erica_controller_free`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn erica_controller_new(
    params: *const EricaParams,
    link_rate: f64,
    out: *mut *mut EricaController,
) -> EricaStatus {
    if params.is_null() || out.is_null() {
        return EricaStatus::NullPointer;
    }
    let p: params::EricaParams = (*params).into();
    if !(link_rate > 0.0 && link_rate.is_finite()) {
        return EricaStatus::InvalidArgument;
    }
    match PortController::new(p, link_rate) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(EricaController { inner }));
            EricaStatus::Ok
        }
        Err(_) => EricaStatus::InvalidParam,
    }
}

/// Release a controller. A null handle is a no-op.
///
/// # Safety
/// `ctl` must be a handle from `erica_controller_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn erica_controller_free(ctl: *mut EricaController) {
    if !ctl.is_null() {
        drop(Box::from_raw(ctl));
    }
}

/// Register one ABR data cell of `vc` passing the port.
///
/// # Safety
/// `ctl` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn erica_observe_cell(
    ctl: *mut EricaController,
    vc: u32,
    direction: EricaDirection,
) -> EricaStatus {
    let Some(ctl) = ctl.as_mut() else {
        return EricaStatus::NullPointer;
    };
    ctl.inner.observe_cell(vc, direction.into());
    EricaStatus::Ok
}

/// Register `cells` VBR cells serviced by the port since the last call.
///
/// # Safety
/// `ctl` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn erica_observe_vbr_service(
    ctl: *mut EricaController,
    cells: u64,
) -> EricaStatus {
    let Some(ctl) = ctl.as_mut() else {
        return EricaStatus::NullPointer;
    };
    ctl.inner.observe_vbr_service(cells);
    EricaStatus::Ok
}

/// Process a forward RM cell: counts as input and refreshes the VC's CCR.
///
/// # Safety
/// `ctl` must be a valid handle and `cell` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn erica_on_forward_rm(
    ctl: *mut EricaController,
    cell: *const EricaRmCell,
) -> EricaStatus {
    let Some(ctl) = ctl.as_mut() else {
        return EricaStatus::NullPointer;
    };
    if cell.is_null() {
        return EricaStatus::NullPointer;
    }
    let cell = *cell;
    if cell.direction != EricaDirection::Forward || !cell.ccr.is_finite() || cell.ccr < 0.0 {
        return EricaStatus::InvalidArgument;
    }
    ctl.inner.on_forward_rm(&controller::RmCellView {
        vc: cell.vc,
        direction: controller::Direction::Forward,
        ccr: cell.ccr,
        er: cell.er,
    });
    EricaStatus::Ok
}

/// Close the measurement interval with the port's current ABR queue length.
/// Writes the new interval outputs to `out` when it is non-null.
///
/// # Safety
/// `ctl` must be a valid handle; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn erica_close_interval(
    ctl: *mut EricaController,
    queue_length: f64,
    out: *mut EricaIntervalOutputs,
) -> EricaStatus {
    let Some(ctl) = ctl.as_mut() else {
        return EricaStatus::NullPointer;
    };
    if !(queue_length >= 0.0 && queue_length.is_finite()) {
        return EricaStatus::InvalidArgument;
    }
    let o = ctl.inner.close_interval(queue_length);
    if !out.is_null() {
        *out = EricaIntervalOutputs {
            target_abr_capacity: o.target_abr_capacity,
            load_factor_z: o.load_factor_z,
            fair_share: o.fair_share,
            max_alloc_previous: o.max_alloc_previous,
            effective_n: o.effective_n,
        };
    }
    EricaStatus::Ok
}

/// Compute (or recall) this interval's grant for `vc`, cells/second.
///
/// # Safety
/// `ctl` must be a valid handle and `er_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn erica_compute_er(
    ctl: *mut EricaController,
    vc: u32,
    er_out: *mut f64,
) -> EricaStatus {
    let Some(ctl) = ctl.as_mut() else {
        return EricaStatus::NullPointer;
    };
    if er_out.is_null() {
        return EricaStatus::NullPointer;
    }
    *er_out = ctl.inner.compute_er(vc);
    EricaStatus::Ok
}

/// Stamp feedback into a backward RM cell, lowering its ER field in place.
///
/// # Safety
/// `ctl` must be a valid handle and `cell` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn erica_on_backward_rm(
    ctl: *mut EricaController,
    cell: *mut EricaRmCell,
) -> EricaStatus {
    let Some(ctl) = ctl.as_mut() else {
        return EricaStatus::NullPointer;
    };
    if cell.is_null() {
        return EricaStatus::NullPointer;
    }
    let c = *cell;
    if c.direction != EricaDirection::Backward || !c.er.is_finite() || c.er < 0.0 {
        return EricaStatus::InvalidArgument;
    }
    let stamped = ctl.inner.on_backward_rm(&controller::RmCellView {
        vc: c.vc,
        direction: controller::Direction::Backward,
        ccr: c.ccr,
        er: c.er,
    });
    (*cell).er = stamped.er;
    EricaStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn erica_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
