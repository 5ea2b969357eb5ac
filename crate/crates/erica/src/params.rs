//! Controller tuning parameters and their validity rules.

use std::fmt;

/// A parameter (or parameter-dependent input) failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameter `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ParamError {}

fn err(field: &'static str, message: impl Into<String>) -> ParamError {
    ParamError { field, message: message.into() }
}

/// Tunables of one port controller.
///
/// Rates are cells/second and times are seconds throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EricaParams {
    /// Half-width of the load band treated as unit load. Overload feedback
    /// starts above `1 + delta`.
    pub delta: f64,
    /// Queue drain target: the queue length regarded as neutral is the
    /// number of cells the averaged ABR capacity moves in this many seconds.
    pub target_delay_t0: f64,
    /// Steepness of the drain hyperbola applied above the neutral queue point.
    pub hyper_a: f64,
    /// Steepness of the fill hyperbola applied at or below the neutral point.
    pub hyper_b: f64,
    /// Queue drain limit factor: lower bound on the capacity fraction left
    /// to sources while the queue drains.
    pub qdlf: f64,
    /// Per-interval multiplier applied to the activity level of a VC that
    /// sent nothing during the interval.
    pub decay_factor: f64,
    /// Weight of the newest measurement in the exponential averages of
    /// input rate and ABR capacity.
    pub alpha: f64,
    /// Length of the measurement interval in seconds.
    pub averaging_interval: f64,
    /// Lower bound on the effective VC count used for the fair share.
    pub activity_floor: f64,
    /// When false, queue length is ignored and `target_utilization` scales
    /// capacity instead of the queue-control function.
    pub use_queue_control: bool,
    /// Constant capacity fraction used when `use_queue_control` is false.
    pub target_utilization: f64,
}

impl Default for EricaParams {
    fn default() -> Self {
        EricaParams {
            delta: 0.1,
            target_delay_t0: 1.5e-3,
            hyper_a: 1.15,
            hyper_b: 1.0,
            qdlf: 0.5,
            decay_factor: 0.9,
            alpha: 0.8,
            averaging_interval: 5.0e-3,
            activity_floor: 1.0,
            use_queue_control: true,
            target_utilization: 0.95,
        }
    }
}

impl EricaParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.delta > 0.0) {
            return Err(err("delta", format!("must be > 0, got {}", self.delta)));
        }
        if !(self.target_delay_t0 > 0.0) {
            return Err(err("target_delay_t0", format!("must be > 0, got {}", self.target_delay_t0)));
        }
        if !(self.hyper_a > 1.0) {
            return Err(err("hyper_a", format!("must be > 1, got {}", self.hyper_a)));
        }
        if !(self.hyper_b >= 1.0) {
            return Err(err("hyper_b", format!("must be >= 1, got {}", self.hyper_b)));
        }
        if !(self.qdlf > 0.0 && self.qdlf <= 1.0) {
            return Err(err("qdlf", format!("must be in (0, 1], got {}", self.qdlf)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor < 1.0) {
            return Err(err("decay_factor", format!("must be in (0, 1), got {}", self.decay_factor)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(err("alpha", format!("must be in (0, 1], got {}", self.alpha)));
        }
        if !(self.averaging_interval > 0.0) {
            return Err(err("averaging_interval", format!("must be > 0, got {}", self.averaging_interval)));
        }
        if !(self.activity_floor >= 1.0) {
            return Err(err("activity_floor", format!("must be >= 1, got {}", self.activity_floor)));
        }
        if !(self.target_utilization > 0.0 && self.target_utilization <= 1.0) {
            return Err(err(
                "target_utilization",
                format!("must be in (0, 1], got {}", self.target_utilization),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert_eq!(EricaParams::default().validate(), Ok(()));
    }

    #[test]
    fn rejects_out_of_range_fields() {
        let mut p = EricaParams::default();
        p.delta = 0.0;
        assert_eq!(p.validate().unwrap_err().field, "delta");

        let mut p = EricaParams::default();
        p.hyper_a = 1.0;
        assert_eq!(p.validate().unwrap_err().field, "hyper_a");

        let mut p = EricaParams::default();
        p.hyper_b = 0.99;
        assert_eq!(p.validate().unwrap_err().field, "hyper_b");

        let mut p = EricaParams::default();
        p.qdlf = 0.0;
        assert_eq!(p.validate().unwrap_err().field, "qdlf");

        let mut p = EricaParams::default();
        p.decay_factor = 1.0;
        assert_eq!(p.validate().unwrap_err().field, "decay_factor");

        let mut p = EricaParams::default();
        p.alpha = 1.5;
        assert_eq!(p.validate().unwrap_err().field, "alpha");

        let mut p = EricaParams::default();
        p.averaging_interval = 0.0;
        assert_eq!(p.validate().unwrap_err().field, "averaging_interval");

        let mut p = EricaParams::default();
        p.target_utilization = 0.0;
        assert_eq!(p.validate().unwrap_err().field, "target_utilization");
    }
}
