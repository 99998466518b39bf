//! CSV reading and writing. Every emitted file starts with one metadata
//! comment line of `key=value` pairs, then a header row. Slots are numbered
//! from 1 in files.

use std::collections::BTreeMap;
use std::path::Path;

use ehsched_core::{Schedule, SlotDecision, Trace};

use crate::error::{CliError, CliResult};

pub const TRACE_COLUMNS: [&str; 4] = ["n", "H", "B", "gamma"];

/// Shortest representation that parses back to the same value.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

/// `# ehsched version=… key=value …` with keys in the given order.
pub fn metadata_line(pairs: &[(&str, String)]) -> String {
    let mut line = format!("# ehsched version={}", env!("CARGO_PKG_VERSION"));
    for (k, v) in pairs {
        line.push(' ');
        line.push_str(k);
        line.push('=');
        line.push_str(v);
    }
    line
}

/// Key-value pairs of the first metadata line of `text`, if any.
pub fn parse_metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .next()
        .and_then(|l| l.strip_prefix("# ehsched"))
        .map(|rest| {
            rest.split_whitespace()
                .filter_map(|kv| kv.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        })
        .unwrap_or_default()
}

/// Metadata line, header row, then `rows`.
pub fn render_csv(meta: &str, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
    format!("{meta}\n{body}")
}

fn parse_err(path: &str, line: u64, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads CSV text whose header must start with `required`; returns one row of
/// floats per record, numbered by file line.
fn read_numeric(text: &str, path: &str, required: &[&str]) -> CliResult<Vec<(u64, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let header_line = reader.position().line().saturating_sub(1).max(1);
    let cols: Vec<usize> = required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| parse_err(path, header_line, format!("missing column '{name}'")))
        })
        .collect::<CliResult<_>>()?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let values = cols
            .iter()
            .zip(required)
            .map(|(&c, name)| {
                let field = record.get(c).unwrap_or("");
                field
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, line, format!("column '{name}': cannot parse '{field}' as a number")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

fn check_slot(path: &str, line: u64, expected: usize, n: f64) -> CliResult<()> {
    if n == expected as f64 {
        Ok(())
    } else {
        Err(parse_err(path, line, format!("slot number {n}, expected {expected}")))
    }
}

/// Parses a trace with columns `n,H,B,gamma`; slots must run 1, 2, ….
pub fn parse_trace(text: &str, path: &str) -> CliResult<Trace> {
    let rows = read_numeric(text, path, &TRACE_COLUMNS)?;
    if rows.is_empty() {
        return Err(parse_err(path, 1, "trace has no slots"));
    }
    let (mut h, mut b, mut g) = (Vec::new(), Vec::new(), Vec::new());
    for (k, (line, v)) in rows.iter().enumerate() {
        check_slot(path, *line, k + 1, v[0])?;
        if !(v[1].is_finite() && v[1] >= 0.0) {
            return Err(parse_err(path, *line, format!("harvest must be finite and non-negative, got {}", v[1])));
        }
        if !(v[2].is_finite() && v[2] >= 0.0) {
            return Err(parse_err(path, *line, format!("arrival must be finite and non-negative, got {}", v[2])));
        }
        if !(v[3].is_finite() && v[3] > 0.0) {
            return Err(parse_err(path, *line, format!("gain must be finite and positive, got {}", v[3])));
        }
        h.push(v[1]);
        b.push(v[2]);
        g.push(v[3]);
    }
    Ok(Trace::new(h, b, g)?)
}

pub fn read_trace(path: &Path) -> CliResult<Trace> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_trace(&text, &path.display().to_string())
}

pub fn trace_rows(trace: &Trace) -> Vec<Vec<String>> {
    (0..trace.n_slots())
        .map(|n| {
            vec![
                (n + 1).to_string(),
                fmt(trace.harvests()[n]),
                fmt(trace.arrivals()[n]),
                fmt(trace.gains()[n]),
            ]
        })
        .collect()
}

pub fn render_trace(meta: &str, trace: &Trace) -> String {
    render_csv(meta, &TRACE_COLUMNS, &trace_rows(trace))
}

/// Trace and schedule from a schedule CSV as written by `offline` or
/// `simulate`.
pub fn parse_schedule(text: &str, path: &str) -> CliResult<(Trace, Schedule)> {
    let trace = parse_trace(text, path)?;
    let rows = read_numeric(text, path, &["w", "power", "rate"])?;
    let decisions = rows
        .iter()
        .map(|(_, v)| SlotDecision {
            water: v[0],
            power: v[1],
            rate: v[2],
        })
        .collect();
    Ok((trace, Schedule::new(decisions)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_round_trip() {
        let line = metadata_line(&[("seed", "3".into()), ("b1", "inf".into())]);
        let text = format!("{line}\nn\n");
        let m = parse_metadata(&text);
        assert_eq!(m["seed"], "3");
        assert_eq!(m["b1"].parse::<f64>().unwrap(), f64::INFINITY);
        assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn trace_round_trip() {
        let t = Trace::new(vec![0.1, 2.0], vec![0.0, 1e-7], vec![1.0 / 3.0, 5.0]).unwrap();
        let text = render_trace("# ehsched", &t);
        assert_eq!(parse_trace(&text, "t.csv").unwrap(), t);
    }

    #[test]
    fn bad_field_reports_line() {
        let text = "# ehsched\nn,H,B,gamma\n1,0,0,1\n2,x,0,1\n";
        match parse_trace(text, "t.csv") {
            Err(CliError::Parse { line, msg, .. }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("'H'"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }
}
