//! Post-run analysis of a simulation: per-VC convergence against the max-min
//! oracle, per-port queue and utilization summaries, and pass/fail checks for
//! whatever thresholds the scenario declares.

use std::fmt;
use std::fmt::Write as _;

use crate::maxmin::{self, Bottleneck, ProblemError};
use crate::netsim::SimOutput;
use crate::scenario::Scenario;
use crate::units::cells_to_mbps;

#[derive(Debug, Clone, PartialEq)]
pub enum ReportError {
    /// The topology has no valid max-min allocation to judge against.
    Oracle(ProblemError),
    /// The run produced no samples.
    NoSamples,
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportError::Oracle(e) => write!(f, "max-min oracle failed: {e}"),
            ReportError::NoSamples => f.write_str("simulation produced no samples"),
        }
    }
}

impl std::error::Error for ReportError {}

#[derive(Debug, Clone)]
pub struct VcReport {
    pub id: String,
    /// Max-min fair rate in Mbps.
    pub oracle_mbps: f64,
    /// Mean allowed rate over the trailing fairness window, in Mbps.
    pub mean_mbps: f64,
    /// Earliest time from which every later sample stays within the
    /// convergence tolerance of the oracle rate; `None` if the run ends
    /// outside the band.
    pub convergence_time: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PortReport {
    pub id: String,
    /// Largest ABR queue observed at any sample.
    pub max_queue: u64,
    /// Mean utilization from `util_from` (or the start) to the end.
    pub mean_utilization: f64,
    /// Whether the oracle saturates this port's link.
    pub saturated: bool,
}

/// One declared threshold, the value observed, and the verdict.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub bound: f64,
    pub observed: f64,
    /// `true`: pass iff observed <= bound; `false`: pass iff observed >= bound.
    pub at_most: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub vcs: Vec<VcReport>,
    pub ports: Vec<PortReport>,
    /// Fairness index over per-VC mean rates in the trailing window, each
    /// normalized by the VC's max-min rate (1.0 = every VC at its share).
    pub fairness_index: f64,
    /// Length of that trailing window in seconds.
    pub fairness_window: f64,
    pub checks: Vec<Check>,
}

impl RunReport {
    /// All declared thresholds met (vacuously true if none are declared).
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Human-readable summary table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vc          oracle_mbps    mean_mbps   converged_at_s");
        for vc in &self.vcs {
            let conv = match vc.convergence_time {
                Some(t) => format!("{t:.3}"),
                None => "never".to_string(),
            };
            let _ = writeln!(
                out,
                "{:<12}{:>11.3}{:>13.3}{:>17}",
                vc.id, vc.oracle_mbps, vc.mean_mbps, conv
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "port         max_queue    mean_util  saturated");
        for p in &self.ports {
            let _ = writeln!(
                out,
                "{:<12}{:>10}{:>13.4}{:>11}",
                p.id,
                p.max_queue,
                p.mean_utilization,
                if p.saturated { "yes" } else { "no" }
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "fairness index (share-normalized) over trailing {:.3} s: {:.4}",
            self.fairness_window, self.fairness_index
        );
        if self.checks.is_empty() {
            let _ = writeln!(out, "no thresholds declared");
        } else {
            let _ = writeln!(out);
            let _ = writeln!(out, "check          bound      observed    result");
            for c in &self.checks {
                let _ = writeln!(
                    out,
                    "{:<12}{:>8} {:>13.4}    {}",
                    c.name,
                    format!("{} {}", if c.at_most { "<=" } else { ">=" }, c.bound),
                    c.observed,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            let _ = writeln!(out, "overall: {}", if self.pass() { "PASS" } else { "FAIL" });
        }
        out
    }
}

/// Summarize a finished run against its scenario's oracle and thresholds.
pub fn build(scenario: &Scenario, out: &SimOutput) -> Result<RunReport, ReportError> {
    if out.times.is_empty() {
        return Err(ReportError::NoSamples);
    }
    let problem = scenario.to_maxmin_problem();
    let alloc = maxmin::solve(&problem).map_err(ReportError::Oracle)?;
    let nt = out.times.len();
    let t_end = out.times[nt - 1];
    let run = &scenario.run;

    let fairness_window = run.fairness_window.unwrap_or(run.duration * 0.1);
    let window_from = t_end - fairness_window;
    let tol = run.converge_tol.unwrap_or(0.10);

    let mut vcs = Vec::with_capacity(out.vc_ids.len());
    for (v, id) in out.vc_ids.iter().enumerate() {
        let oracle_mbps = alloc.rates[id];
        let oracle_cells = crate::units::mbps_to_cells(oracle_mbps);
        // Walk back from the end; the trailing in-band run gives the
        // convergence time.
        let mut convergence_time = None;
        for k in (0..nt).rev() {
            let dev = (out.acr[v][k] - oracle_cells).abs() / oracle_cells;
            if dev > tol {
                break;
            }
            convergence_time = Some(out.times[k]);
        }
        let tail: Vec<f64> = (0..nt)
            .filter(|&k| out.times[k] >= window_from)
            .map(|k| out.acr[v][k])
            .collect();
        let mean_mbps = cells_to_mbps(tail.iter().sum::<f64>() / tail.len() as f64);
        vcs.push(VcReport { id: id.clone(), oracle_mbps, mean_mbps, convergence_time });
    }

    let saturated: Vec<&str> = alloc
        .bottleneck
        .values()
        .filter_map(|b| match b {
            Bottleneck::Link(id) => Some(id.as_str()),
            Bottleneck::Source => None,
        })
        .collect();
    let util_from = run.util_from.unwrap_or(0.0);
    let mut ports = Vec::with_capacity(out.port_ids.len());
    for (p, id) in out.port_ids.iter().enumerate() {
        let max_queue = out.queue[p].iter().copied().max().unwrap_or(0);
        let ks: Vec<usize> = (0..nt).filter(|&k| out.times[k] >= util_from).collect();
        let mean_utilization =
            ks.iter().map(|&k| out.util[p][k]).sum::<f64>() / ks.len().max(1) as f64;
        ports.push(PortReport {
            id: id.clone(),
            max_queue,
            mean_utilization,
            saturated: saturated.contains(&id.as_str()),
        });
    }

    // Normalize each VC's rate by its max-min share before taking the index:
    // unequal shares are the correct outcome on asymmetric topologies, and
    // the raw index would flag them.
    let normalized: Vec<f64> = vcs.iter().map(|v| v.mean_mbps / v.oracle_mbps).collect();
    let fairness_index = maxmin::fairness_index(&normalized).unwrap_or(0.0);

    let mut checks = Vec::new();
    if let Some(by) = run.converge_by {
        // Worst convergence time across VCs; a VC that never converges shows
        // as infinity.
        let observed = vcs
            .iter()
            .map(|v| v.convergence_time.unwrap_or(f64::INFINITY))
            .fold(0.0f64, f64::max);
        checks.push(Check {
            name: "convergence",
            bound: by,
            observed,
            at_most: true,
            pass: observed <= by,
        });
    }
    if let Some(limit) = run.max_queue {
        let observed = ports.iter().map(|p| p.max_queue).max().unwrap_or(0) as f64;
        checks.push(Check {
            name: "max_queue",
            bound: limit,
            observed,
            at_most: true,
            pass: observed <= limit,
        });
    }
    if let Some(by) = run.drain_by {
        let below = run.drain_below.unwrap_or(0.0);
        let mut observed = 0.0f64;
        for p in 0..out.port_ids.len() {
            for k in 0..nt {
                if out.times[k] >= by {
                    observed = observed.max(out.queue[p][k] as f64);
                }
            }
        }
        checks.push(Check {
            name: "drained",
            bound: below,
            observed,
            at_most: true,
            pass: observed <= below,
        });
    }
    if let Some(floor) = run.min_util {
        let observed = ports
            .iter()
            .filter(|p| p.saturated)
            .map(|p| p.mean_utilization)
            .fold(f64::INFINITY, f64::min);
        checks.push(Check {
            name: "min_util",
            bound: floor,
            observed,
            at_most: false,
            pass: observed >= floor,
        });
    }
    if let Some(floor) = run.min_abr_util {
        // ABR throughput over the capacity VBR leaves behind, per saturated
        // port, from the cumulative cell counters (exact, not sampled).
        let ks: Vec<usize> = (0..nt).filter(|&k| out.times[k] >= util_from).collect();
        let mut observed = f64::INFINITY;
        if let (Some(&first), Some(&last)) = (ks.first(), ks.last()) {
            let span = out.times[last] - out.times[first];
            for (p, port) in ports.iter().enumerate() {
                if !port.saturated || span <= 0.0 {
                    continue;
                }
                let abr = (out.abr_tx[p][last] - out.abr_tx[p][first]) as f64;
                let vbr = (out.vbr_tx[p][last] - out.vbr_tx[p][first]) as f64;
                let avail = span * out.port_rate[p] - vbr;
                if avail > 0.0 {
                    observed = observed.min(abr / avail);
                }
            }
        }
        checks.push(Check {
            name: "abr_util",
            bound: floor,
            observed,
            at_most: false,
            pass: observed >= floor,
        });
    }
    if let Some(floor) = run.min_fairness {
        checks.push(Check {
            name: "fairness",
            bound: floor,
            observed: fairness_index,
            at_most: false,
            pass: fairness_index >= floor,
        });
    }

    Ok(RunReport { vcs, ports, fairness_index, fairness_window, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim;
    use crate::scenario::{self, LinkDef, RunDef, Scenario, SourceModel, VcDef};
    use crate::units::CELLS_PER_MBPS;

    fn two_source_scenario() -> Scenario {
        let mut links = vec![LinkDef {
            id: "B".into(),
            from: "l".into(),
            to: "r".into(),
            rate_mbps: 100.0,
            prop_delay: 0.001,
        }];
        let mut vcs = Vec::new();
        for k in 1..=2 {
            links.push(LinkDef {
                id: format!("e{k}"),
                from: format!("s{k}"),
                to: "l".into(),
                rate_mbps: 150.0,
                prop_delay: 0.001,
            });
            links.push(LinkDef {
                id: format!("x{k}"),
                from: "r".into(),
                to: format!("d{k}"),
                rate_mbps: 150.0,
                prop_delay: 0.001,
            });
            vcs.push(VcDef {
                id: format!("V{k}"),
                route: vec![format!("e{k}"), "B".into(), format!("x{k}")],
                model: SourceModel::Persistent,
                pcr_mbps: 150.0,
                start_time: 0.0,
                initial_acr_cap_mbps: None,
            });
        }
        Scenario {
            erica: Default::default(),
            links,
            switches: Vec::new(),
            vcs,
            vbr: Vec::new(),
            run: RunDef {
                duration: 0.5,
                sample_period: 0.005,
                seed: 3,
                turnaround_delay: 0.0,
                converge_by: Some(0.3),
                converge_tol: Some(0.10),
                max_queue: Some(10_000.0),
                drain_by: Some(0.4),
                drain_below: Some(1_000.0),
                min_util: Some(0.90),
                util_from: Some(0.3),
                min_abr_util: None,
                min_fairness: Some(0.99),
                fairness_window: Some(0.1),
            },
        }
    }

    #[test]
    fn two_sources_pass_all_declared_checks() {
        let sc = two_source_scenario();
        let out = netsim::run(&sc).unwrap();
        let rep = build(&sc, &out).unwrap();
        assert_eq!(rep.vcs.len(), 2);
        assert_eq!(rep.ports.len(), out.port_ids.len());
        for c in &rep.checks {
            assert!(c.pass, "{} failed: observed {} bound {}", c.name, c.observed, c.bound);
        }
        assert!(rep.pass());
        // Both VCs split the bottleneck evenly.
        for vc in &rep.vcs {
            assert_eq!(vc.oracle_mbps, 50.0);
            assert!((vc.mean_mbps - 50.0).abs() / 50.0 < 0.10, "{}", vc.mean_mbps);
            assert!(vc.convergence_time.is_some());
        }
        // Exactly the declared thresholds appear, in declaration order.
        let names: Vec<&str> = rep.checks.iter().map(|c| c.name).collect();
        assert_eq!(names, ["convergence", "max_queue", "drained", "min_util", "fairness"]);
    }

    #[test]
    fn failing_threshold_is_reported_not_hidden() {
        let mut sc = two_source_scenario();
        sc.run.converge_by = Some(0.001); // no feedback loop settles this fast
        let out = netsim::run(&sc).unwrap();
        let rep = build(&sc, &out).unwrap();
        let conv = rep.checks.iter().find(|c| c.name == "convergence").unwrap();
        assert!(!conv.pass);
        assert!(!rep.pass());
        assert!(rep.render().contains("FAIL"));
    }

    #[test]
    fn report_covers_every_vc_and_port() {
        let sc = scenario::build_gfc2();
        let mut sc = sc;
        sc.run.duration = 0.05; // shape check only
        let out = netsim::run(&sc).unwrap();
        let rep = build(&sc, &out).unwrap();
        assert_eq!(rep.vcs.len(), 22);
        assert_eq!(rep.ports.len(), out.port_ids.len());
        let text = rep.render();
        for id in &out.vc_ids {
            assert!(text.contains(id.as_str()), "missing vc {id}");
        }
        for id in &out.port_ids {
            assert!(text.contains(id.as_str()), "missing port {id}");
        }
    }

    #[test]
    fn saturated_links_follow_the_oracle() {
        let sc = two_source_scenario();
        let out = netsim::run(&sc).unwrap();
        let rep = build(&sc, &out).unwrap();
        for p in &rep.ports {
            assert_eq!(p.saturated, p.id == "B", "{}", p.id);
        }
    }

    #[test]
    fn convergence_time_matches_band_entry() {
        // Synthetic check against a hand-built output: one VC, rate enters
        // the band at the third sample and stays.
        let sc = two_source_scenario();
        let mut out = netsim::run(&sc).unwrap();
        let oracle = 50.0 * CELLS_PER_MBPS;
        out.acr[0] = vec![oracle; out.times.len()];
        out.acr[0][0] = 0.5 * oracle;
        out.acr[0][1] = 0.8 * oracle;
        let rep = build(&sc, &out).unwrap();
        assert_eq!(rep.vcs[0].convergence_time, Some(out.times[2]));
        // A rate that ends out of band never converges.
        let n = out.times.len();
        out.acr[0][n - 1] = 2.0 * oracle;
        let rep = build(&sc, &out).unwrap();
        assert_eq!(rep.vcs[0].convergence_time, None);
    }
}
