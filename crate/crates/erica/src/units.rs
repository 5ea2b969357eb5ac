//! Rate conversions. The internal rate unit everywhere is cells per second;
//! configuration and reports use Mbps at the line level.

/// Cells per second carried by one Mbps of line rate (53-byte cells).
pub const CELLS_PER_MBPS: f64 = 1.0e6 / (8.0 * 53.0);

/// Payload fraction of a cell: 48 of 53 bytes. Multiplying a line-level
/// rate by this gives the application-visible throughput.
pub const APP_PAYLOAD_FRACTION: f64 = 48.0 / 53.0;

pub fn mbps_to_cells(mbps: f64) -> f64 {
    mbps * CELLS_PER_MBPS
}

pub fn cells_to_mbps(cells_per_s: f64) -> f64 {
    cells_per_s / CELLS_PER_MBPS
}
