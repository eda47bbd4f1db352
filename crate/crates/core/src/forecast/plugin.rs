//! External model plug-ins: a subprocess reads a design-matrix CSV on
//! standard input and writes one forecast value per requested week.
//!
//! CSV layout: header `date,y,<exog names...>`, then one row per week.
//! Target cells are blank from the issue week on (the target reports with
//! a one-week delay); exogenous cells are blank strictly after the issue
//! week. The plug-in writes one value per blank-target row, oldest first;
//! the harness uses the last (the `issue + h` week).

use std::io::Write;
use std::process::{Command, Stdio};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::stats::Matrix;

/// How a plug-in wants its history sliced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowPolicy {
    Rolling(usize),
    Expanding { min: usize },
}

/// Builds the design-matrix CSV for one forecast request.
pub fn build_plugin_csv(
    dates: &[NaiveDate],
    target: &[f64],
    exog: Option<(&[String], &Matrix<f64>)>,
    issue: usize,
    horizon: usize,
    policy: WindowPolicy,
) -> Result<String> {
    let start = match policy {
        WindowPolicy::Rolling(w) => {
            if issue < w {
                return Err(Error::input("not enough history for rolling window"));
            }
            issue - w
        }
        WindowPolicy::Expanding { min } => {
            if issue < min {
                return Err(Error::input("not enough history for expanding window"));
            }
            0
        }
    };
    let end = issue + horizon;
    if end >= dates.len() {
        return Err(Error::input("request extends past the known week grid"));
    }
    let mut out = String::from("date,y");
    if let Some((names, _)) = exog {
        for n in names {
            out.push(',');
            // Feature names with commas or quotes would need escaping; the
            // pipeline never produces them.
            out.push_str(n);
        }
    }
    out.push('\n');
    for week in start..=end {
        out.push_str(&dates[week].to_string());
        out.push(',');
        if week < issue {
            out.push_str(&format!("{}", target[week]));
        }
        if let Some((names, x)) = exog {
            for j in 0..names.len() {
                out.push(',');
                if week <= issue {
                    out.push_str(&format!("{}", x.get(week, j)));
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Runs the plug-in once and returns the forecast for the last requested
/// week. Expects exactly `horizon + 1` output lines.
pub fn run_plugin(
    program: &str,
    args: &[String],
    csv_text: &str,
    horizon: usize,
) -> Result<f64> {
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::numerical(format!("plugin spawn failed: {e}")))?;
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(csv_text.as_bytes())?;
    let output = child
        .wait_with_output()
        .map_err(|e| Error::numerical(format!("plugin wait failed: {e}")))?;
    if !output.status.success() {
        return Err(Error::numerical(format!(
            "plugin exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr)
        )));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    let values: Vec<f64> = stdout
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse()
                .map_err(|_| Error::numerical(format!("plugin wrote non-numeric line `{l}`")))
        })
        .collect::<Result<_>>()?;
    if values.len() != horizon + 1 {
        return Err(Error::numerical(format!(
            "plugin wrote {} values, expected {}",
            values.len(),
            horizon + 1
        )));
    }
    Ok(*values.last().unwrap())
}
