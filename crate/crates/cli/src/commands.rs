use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use pseudomarket_core::ideal::{
    build_ideal_lp, f_to_x, simulate_no_competition, solve_lp, vertex_enumeration_oracle,
};
use pseudomarket_core::simulator::presets::{build_preset, run_experiment, Experiment};
use pseudomarket_core::{StrategySpec, Streams};

use crate::error::CliError;
use crate::file::{strategy_from_parts, ExperimentFile, StrategyParams};
use crate::output::{fmt_g9, summary_json, write_csv};

/// Largest allowed gap between the simplex and the oracle objective.
pub const ORACLE_TOL: f64 = 1e-7;

/// Per-agent ideal utility report.
pub fn cmd_ideal(
    file: &ExperimentFile,
    oracle: bool,
    simulate: Option<usize>,
) -> Result<String, CliError> {
    let config = file.market(None)?;
    let mut report = String::new();
    for (i, agent) in config.agents.iter().enumerate() {
        let ts = &agent.type_space;
        let cap = config.ideal_cap(i);
        let lp = build_ideal_lp(ts, cap)?;
        let solution = solve_lp(&lp)?;
        let policy = f_to_x(&solution, ts)?;
        let s = policy.stats;
        let kappa = if s.kappa_defined {
            fmt_g9(s.kappa)
        } else {
            "undefined".into()
        };
        let request: Vec<String> = policy.request_prob.iter().map(|&p| fmt_g9(p)).collect();
        writeln!(
            report,
            "agent {i}: cap={} v*={} beta={} q={} kappa={kappa} request=[{}]",
            fmt_g9(cap),
            fmt_g9(s.v_star),
            fmt_g9(s.beta),
            fmt_g9(s.q),
            request.join(", ")
        )
        .expect("write to string");
        if oracle {
            let check = vertex_enumeration_oracle(&lp)?;
            let gap = (check.objective_value - solution.objective_value).abs();
            writeln!(
                report,
                "agent {i}: oracle v*={} gap={}",
                fmt_g9(check.objective_value),
                fmt_g9(gap)
            )
            .expect("write to string");
            if gap > ORACLE_TOL {
                return Err(CliError::Solver(format!(
                    "{report}agent {i}: simplex and vertex enumeration disagree by {gap:e}"
                )));
            }
        }
        if let Some(horizon) = simulate {
            let mut rng = Streams::new(config.seed, 0).agent_round(i, 0);
            let (u, b) = simulate_no_competition(&policy, ts, horizon, &mut rng);
            writeln!(
                report,
                "agent {i}: simulated {horizon} rounds utility={} utilization={}",
                fmt_g9(u),
                fmt_g9(b)
            )
            .expect("write to string");
        }
    }
    Ok(report)
}

/// Where the summary of a run written to `out` goes.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

/// Runs `exp`. With `out`, the CSV goes to `out`, the summary to
/// [`summary_path`] and to `stdout`. Without it, the CSV goes to `stdout`
/// and the summary to `stderr`.
pub fn execute(
    exp: &Experiment,
    jobs: Option<usize>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<bool, CliError> {
    let (summary, trials) = run_experiment(exp, jobs)?;
    let doc = serde_json::to_string_pretty(&summary_json(&summary)).expect("json");
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
            write_csv(std::io::BufWriter::new(file), &trials)?;
            let spath = summary_path(path);
            std::fs::write(&spath, format!("{doc}\n"))
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", spath.display())))?;
            writeln!(stdout, "{doc}")?;
        }
        None => {
            write_csv(&mut *stdout, &trials)?;
            writeln!(stderr, "{doc}")?;
        }
    }
    Ok(summary.all_pass())
}

/// Parses `name` or `name:param` (e.g. `blocker:5`, `constant:1.5`).
pub fn parse_strategy(text: &str) -> Result<StrategySpec, String> {
    let (name, arg) = match text.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (text, None),
    };
    let mut params = StrategyParams::default();
    if let Some(arg) = arg {
        match name {
            "blocker" => params.k_max = Some(arg.parse().map_err(|e| format!("{text}: {e}"))?),
            "sniper" | "constant" => {
                params.price = Some(arg.parse().map_err(|e| format!("{text}: {e}"))?)
            }
            _ => return Err(format!("{name} takes no parameter")),
        }
    }
    strategy_from_parts(name, &params)
}

pub fn preset_experiment(
    name: &str,
    params: &pseudomarket_core::PresetParams,
) -> Result<Experiment, CliError> {
    let preset = name.parse()?;
    Ok(build_preset(preset, params)?)
}
