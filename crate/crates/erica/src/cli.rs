//! Command-line front end: simulator runs, fluid-model convergence studies,
//! and max-min oracle queries.
//!
//! Exit codes: 0 — success and all declared thresholds met; 1 — the work
//! finished but a threshold failed or a fluid run exceeded its cycle budget;
//! 2 — bad usage, unparseable scenario, or I/O failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fluid::{self, FluidState};
use crate::maxmin;
use crate::netsim;
use crate::report;
use crate::scenario::{self, Scenario};
use crate::units::APP_PAYLOAD_FRACTION;

#[derive(Parser)]
#[command(name = "erica", version, about = "Explicit-rate switch feedback toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the cell-level simulator on a scenario and write CSV logs plus a
    /// summary report.
    Sim {
        /// Scenario file path, or a built-in name: `gfc2`, `varcap`.
        scenario: String,
        /// Directory for acr.csv, queue.csv, util.csv, and report.txt.
        #[arg(long, default_value = ".", env = "ERICA_OUT")]
        out: PathBuf,
        /// Override a scenario value, e.g. `--set erica.delta=0.05` or
        /// `--set run.seed=7`. May be given multiple times.
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        sets: Vec<String>,
        /// Shorthand for `--set run.duration=<s>`.
        #[arg(long)]
        duration: Option<f64>,
        /// Shorthand for `--set run.seed=<n>`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the synchronous fluid model over random initial states and report
    /// cycles-to-convergence per source count.
    Fluid {
        /// Comma-separated source counts.
        #[arg(long, default_value = "2,4,8,16,32,64")]
        n: String,
        /// Random initial states per source count.
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Overload tolerance for the target region.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Bottleneck capacity shared by all sources.
        #[arg(long, default_value_t = 100.0)]
        capacity: f64,
        /// Per-source caps (bottlenecks elsewhere): comma-separated values
        /// with `x` for uncapped, e.g. `15,x,30`. Fixes the source count.
        #[arg(long)]
        caps: Option<String>,
        /// Give up on a run after this many cycles.
        #[arg(long, default_value_t = 64)]
        max_cycles: u64,
        /// Optional directory for fluid_seeds.csv and fluid_medians.csv.
        #[arg(long, env = "ERICA_OUT")]
        out: Option<PathBuf>,
    },
    /// Print the max-min fair allocation for a scenario as CSV.
    Oracle {
        /// Scenario file path, or a built-in name: `gfc2`, `varcap`.
        scenario: String,
    },
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; they are not failures.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.cmd {
        Cmd::Sim { scenario, out, sets, duration, seed } => {
            cmd_sim(&scenario, &out, &sets, duration, seed)
        }
        Cmd::Fluid { n, seeds, delta, capacity, caps, max_cycles, out } => {
            cmd_fluid(&n, seeds, delta, capacity, caps.as_deref(), max_cycles, out.as_deref())
        }
        Cmd::Oracle { scenario } => cmd_oracle(&scenario).map(|()| true),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

/// Write to stdout without panicking when the reader hangs up: dying
/// mid-table under `| head` is the expected outcome there, so exit the way
/// a default SIGPIPE handler would.
#[cfg(not(test))]
fn emit(text: &str) {
    use std::io::Write;
    if let Err(e) = std::io::stdout().write_all(text.as_bytes()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(141); // 128 + SIGPIPE
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(2);
    }
}

/// In-process tests go through the macro so the harness captures the output.
#[cfg(test)]
fn emit(text: &str) {
    print!("{text}");
}

/// Resolve a built-in scenario name or load and parse a file.
fn load_scenario(name: &str) -> Result<Scenario, String> {
    match name {
        "gfc2" => Ok(scenario::build_gfc2()),
        "varcap" => Ok(scenario::build_varcap(10, scenario::default_varcap_profile())),
        path => {
            let text =
                fs::read_to_string(path).map_err(|e| format!("cannot read `{path}`: {e}"))?;
            scenario::parse(&text).map_err(|errs| {
                let lines: Vec<String> = errs.iter().map(|e| format!("{path}: {e}")).collect();
                lines.join("\n")
            })
        }
    }
}

/// Apply one `section.key=value` override.
fn apply_set(sc: &mut Scenario, spec: &str) -> Result<(), String> {
    let (path, value) =
        spec.split_once('=').ok_or_else(|| format!("`{spec}` is not of the form key=value"))?;
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| format!("`{path}` is not of the form section.key"))?;
    match section {
        "erica" => scenario::apply_erica_key(&mut sc.erica, key, value),
        "run" => scenario::apply_run_key(&mut sc.run, key, value),
        _ => Err(format!("unknown section `{section}` (valid sections: erica, run)")),
    }
}

fn cmd_sim(
    name: &str,
    out_dir: &Path,
    sets: &[String],
    duration: Option<f64>,
    seed: Option<u64>,
) -> Result<bool, String> {
    let mut sc = load_scenario(name)?;
    for spec in sets {
        apply_set(&mut sc, spec)?;
    }
    if let Some(d) = duration {
        sc.run.duration = d;
    }
    if let Some(s) = seed {
        sc.run.seed = s;
    }
    let out = netsim::run(&sc).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        lines.join("\n")
    })?;
    let rep = report::build(&sc, &out).map_err(|e| e.to_string())?;
    fs::create_dir_all(out_dir).map_err(|e| format!("cannot create `{}`: {e}", out_dir.display()))?;
    let write = |file: &str, data: String| -> Result<(), String> {
        let path = out_dir.join(file);
        fs::write(&path, data).map_err(|e| format!("cannot write `{}`: {e}", path.display()))
    };
    write("acr.csv", out.acr_csv())?;
    write("queue.csv", out.queue_csv())?;
    write("util.csv", out.util_csv())?;
    let rendered = rep.render();
    write("report.txt", rendered.clone())?;
    emit(&rendered);
    Ok(rep.pass())
}

fn cmd_fluid(
    n_list: &str,
    seeds: u64,
    delta: f64,
    capacity: f64,
    caps_spec: Option<&str>,
    max_cycles: u64,
    out_dir: Option<&Path>,
) -> Result<bool, String> {
    if seeds == 0 {
        return Err("--seeds must be at least 1".to_string());
    }
    let caps: Option<Vec<Option<f64>>> = match caps_spec {
        None => None,
        Some(spec) => Some(
            spec.split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    if tok == "x" {
                        Ok(None)
                    } else {
                        tok.parse::<f64>()
                            .map(Some)
                            .map_err(|_| format!("bad cap `{tok}` (number or `x`)"))
                    }
                })
                .collect::<Result<_, String>>()?,
        ),
    };
    let ns: Vec<usize> = match &caps {
        // A cap list fixes the source count.
        Some(c) => vec![c.len()],
        None => n_list
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<usize>()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| format!("bad source count `{tok}`"))
            })
            .collect::<Result<_, String>>()?,
    };

    let mut seeds_csv = String::from("n,seed,cycles,converged\n");
    let mut medians_csv = String::from("n,median_cycles,max_cycles,converged,seeds\n");
    let mut all_converged = true;
    emit("n      median_cycles   max_cycles   converged\n");
    for &n in &ns {
        let mut cycles = Vec::with_capacity(seeds as usize);
        let mut converged = 0u64;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Separate stream per source count so run sets stay independent.
            rng.set_stream(n as u64);
            let source_caps = caps.clone().unwrap_or_else(|| vec![None; n]);
            let rates: Vec<f64> = source_caps
                .iter()
                .map(|cap| {
                    let r = rng.gen_range(0.0..=capacity);
                    match cap {
                        Some(c) => r.min(*c),
                        None => r,
                    }
                })
                .collect();
            let initial =
                FluidState::new(rates, source_caps, capacity).map_err(|e| e.to_string())?;
            let run =
                fluid::run_until_converged(initial, delta, max_cycles).map_err(|e| e.to_string())?;
            if run.converged {
                converged += 1;
            } else {
                all_converged = false;
                emit(&format!("n={n} seed={seed}: no convergence within {max_cycles} cycles\n"));
            }
            seeds_csv.push_str(&format!("{n},{seed},{},{}\n", run.cycles, run.converged));
            cycles.push(run.cycles);
        }
        cycles.sort_unstable();
        let median = if cycles.len() % 2 == 1 {
            cycles[cycles.len() / 2] as f64
        } else {
            (cycles[cycles.len() / 2 - 1] + cycles[cycles.len() / 2]) as f64 / 2.0
        };
        let max = *cycles.last().unwrap();
        emit(&format!("{n:<10}{median:>8.1}{max:>13}{:>8}/{seeds}\n", converged));
        medians_csv.push_str(&format!("{n},{median},{max},{converged},{seeds}\n"));
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| format!("cannot create `{}`: {e}", dir.display()))?;
        fs::write(dir.join("fluid_seeds.csv"), seeds_csv)
            .map_err(|e| format!("cannot write fluid_seeds.csv: {e}"))?;
        fs::write(dir.join("fluid_medians.csv"), medians_csv)
            .map_err(|e| format!("cannot write fluid_medians.csv: {e}"))?;
    }
    Ok(all_converged)
}

fn cmd_oracle(name: &str) -> Result<(), String> {
    let sc = load_scenario(name)?;
    let alloc = maxmin::solve(&sc.to_maxmin_problem()).map_err(|e| e.to_string())?;
    emit("vc_id,rate_mbps,app_mbps,bottleneck\n");
    // BTreeMap iteration gives a stable, sorted listing.
    for (vc, rate) in &alloc.rates {
        emit(&format!("{vc},{rate},{},{}\n", rate * APP_PAYLOAD_FRACTION, alloc.bottleneck[vc]));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names_resolve_and_files_parse() {
        assert_eq!(load_scenario("gfc2").unwrap().vcs.len(), 22);
        assert_eq!(load_scenario("varcap").unwrap().vcs.len(), 10);
        assert!(load_scenario("no/such/file.cfg").unwrap_err().contains("cannot read"));
    }

    #[test]
    fn set_overrides_erica_and_run_keys() {
        let mut sc = scenario::build_gfc2();
        apply_set(&mut sc, "erica.delta=0.07").unwrap();
        assert_eq!(sc.erica.delta, 0.07);
        apply_set(&mut sc, "run.seed=9").unwrap();
        assert_eq!(sc.run.seed, 9);
        let err = apply_set(&mut sc, "erica.bogus=1").unwrap_err();
        assert!(err.contains("valid keys"), "{err}");
        let err = apply_set(&mut sc, "vbr.rate=1").unwrap_err();
        assert!(err.contains("valid sections"), "{err}");
        let err = apply_set(&mut sc, "no-equals").unwrap_err();
        assert!(err.contains("key=value"), "{err}");
    }

    #[test]
    fn sim_writes_outputs_and_respects_thresholds() {
        let dir = tempfile::tempdir().unwrap();
        // A short run cannot satisfy gfc2's convergence thresholds; the
        // command must still write everything and report failure honestly.
        let pass = cmd_sim(
            "gfc2",
            dir.path(),
            &["run.sample_period=0.01".to_string()],
            Some(0.05),
            None,
        )
        .unwrap();
        assert!(!pass);
        for f in ["acr.csv", "queue.csv", "util.csv", "report.txt"] {
            assert!(dir.path().join(f).exists(), "missing {f}");
        }
        let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(report.contains("overall: FAIL"));
    }

    #[test]
    fn sim_outputs_are_byte_identical_across_runs() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [&a, &b] {
            cmd_sim(
                "varcap",
                dir.path(),
                &["run.sample_period=0.01".to_string()],
                Some(0.1),
                Some(5),
            )
            .unwrap();
        }
        for f in ["acr.csv", "queue.csv", "util.csv", "report.txt"] {
            let left = fs::read(a.path().join(f)).unwrap();
            let right = fs::read(b.path().join(f)).unwrap();
            assert_eq!(left, right, "{f} differs between identical runs");
        }
    }

    #[test]
    fn fluid_single_source_converges_fast() {
        let dir = tempfile::tempdir().unwrap();
        let ok = cmd_fluid("1", 10, 0.1, 100.0, None, 64, Some(dir.path())).unwrap();
        assert!(ok);
        let seeds = fs::read_to_string(dir.path().join("fluid_seeds.csv")).unwrap();
        for line in seeds.lines().skip(1) {
            let cycles: u64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert!(cycles <= 2, "single source took {cycles} cycles");
        }
        assert!(dir.path().join("fluid_medians.csv").exists());
    }

    #[test]
    fn fluid_capped_sources_fix_the_count() {
        let ok = cmd_fluid("ignored", 5, 0.1, 100.0, Some("15,x,30"), 64, None).unwrap();
        assert!(ok);
        let err = cmd_fluid("2", 5, 0.1, 100.0, Some("15,nope"), 64, None).unwrap_err();
        assert!(err.contains("bad cap"), "{err}");
    }

    #[test]
    fn fluid_budget_exhaustion_reports_failure() {
        // One cycle is never enough for two unequal greedy sources.
        let ok = cmd_fluid("2", 5, 0.1, 100.0, None, 1, None).unwrap();
        assert!(!ok);
    }

    #[test]
    fn oracle_lists_every_vc() {
        cmd_oracle("gfc2").unwrap();
        let sc = load_scenario("gfc2").unwrap();
        let alloc = maxmin::solve(&sc.to_maxmin_problem()).unwrap();
        assert_eq!(alloc.rates.len(), 22);
    }

    #[test]
    fn bundled_sample_scenario_parses_and_solves() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/parking_lot.cfg");
        let sc = load_scenario(path).unwrap();
        let alloc = maxmin::solve(&sc.to_maxmin_problem()).unwrap();
        // The rates documented in the file's header comment.
        assert_eq!(alloc.rates["A"], 30.0);
        assert_eq!(alloc.rates["B"], 30.0);
        assert_eq!(alloc.rates["C"], 60.0);
    }
}
