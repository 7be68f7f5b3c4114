//! Result files: per-trial CSV and the JSON summary.

use std::io::Write;

use pseudomarket_core::simulator::ExperimentSummary;
use pseudomarket_core::TrialTotals;
use serde_json::{json, Value};

use crate::error::CliError;

pub const CSV_HEADER: [&str; 6] = [
    "trial",
    "agent",
    "total_utility",
    "total_payment",
    "utilization",
    "blocked_rounds",
];

const SIG_DIGITS: usize = 9;

/// Formats `x` like C's `%.9g`: nine significant digits, trailing zeros
/// removed, exponent form outside `[1e-4, 1e9)`. Always uses `.` as the
/// decimal separator.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // rounding to 9 digits decides the exponent, e.g. 999999999.5 → 1e+09
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes one row per (trial, agent).
pub fn write_csv<W: Write>(out: W, trials: &[TrialTotals]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (trial, totals) in trials.iter().enumerate() {
        for (agent, a) in totals.agents.iter().enumerate() {
            w.write_record([
                trial.to_string(),
                agent.to_string(),
                fmt_g9(a.total_utility),
                fmt_g9(a.total_payment),
                fmt_g9(totals.utilization(agent)),
                a.blocked_rounds.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Summary document: the experiment summary with a `status` of PASS or
/// FAIL on every check and overall.
pub fn summary_json(summary: &ExperimentSummary) -> Value {
    let mut doc = serde_json::to_value(summary).expect("summary is serializable");
    if let Some(checks) = doc.get_mut("checks").and_then(Value::as_array_mut) {
        for check in checks {
            let pass = check.get("pass").and_then(Value::as_bool).unwrap_or(false);
            check["status"] = json!(status(pass));
        }
    }
    doc["status"] = json!(status(summary.all_pass()));
    doc
}

fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
