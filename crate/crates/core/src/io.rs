//! File formats: the network text format, CSV logs and DOT export.
//!
//! Network format:
//!
//! ```text
//! DEEP v1 N=<n> P=<p> roles=<I/H/O per neuron>
//! <n lines of n weights; row i holds the outgoing weights of neuron i>
//! <one line of n biases>
//! ```
//!
//! Absent parameters are written as `.`; present ones with 17 significant
//! digits so that a save/load round trip is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::StabilityReport;
use crate::dynamics::PhaseTrajectory;
use crate::error::{DeepError, Result};
use crate::network::{Network, NeuronRole, Source};
use crate::sparsity::PruneEvent;
use crate::training::{EpochStats, RunRecord};

const MAGIC: &str = "DEEP";
const VERSION: &str = "v1";
const ABSENT: &str = ".";

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn network_to_string(net: &Network) -> String {
    let n = net.n_total();
    let roles: String = net.roles().iter().map(|r| r.code()).collect();
    let mut out = format!(
        "{MAGIC} {VERSION} N={n} P={} roles={roles}\n",
        net.n_input()
    );
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| {
                if net.has_connection(i, j) {
                    fmt_value(net.weight(i, j))
                } else {
                    ABSENT.to_string()
                }
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    let biases: Vec<String> = (0..n)
        .map(|j| {
            if net.bias_mask()[j] {
                fmt_value(net.bias()[j])
            } else {
                ABSENT.to_string()
            }
        })
        .collect();
    out.push_str(&biases.join(" "));
    out.push('\n');
    out
}

/// Whitespace-separated tokens of a line with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(k),
            (true, Some(s)) => {
                out.push((s + 1, &line[s..k]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> DeepError {
    DeepError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn header_field<'a>(tok: Option<&(usize, &'a str)>, key: &str) -> Result<&'a str> {
    match tok {
        Some((col, t)) => t
            .strip_prefix(key)
            .ok_or_else(|| parse_err(1, *col, format!("expected `{key}...`, found `{t}`"))),
        None => Err(parse_err(1, 1, format!("header is missing `{key}`"))),
    }
}

pub fn parse_network(text: &str) -> Result<Network> {
    let lines: Vec<&str> = text.lines().collect();
    let header = lines
        .first()
        .ok_or_else(|| parse_err(1, 1, "empty network file"))?;
    let head = tokens(header);
    if head.first().map(|t| t.1) != Some(MAGIC) {
        return Err(parse_err(1, 1, format!("expected `{MAGIC}` magic")));
    }
    if head.get(1).map(|t| t.1) != Some(VERSION) {
        let col = head.get(1).map_or(1, |t| t.0);
        return Err(parse_err(
            1,
            col,
            format!("unsupported version, expected `{VERSION}`"),
        ));
    }
    if head.len() != 5 {
        return Err(parse_err(1, 1, "header must have exactly 5 fields"));
    }
    let n: usize = header_field(head.get(2), "N=")?
        .parse()
        .map_err(|_| parse_err(1, head[2].0, "N must be a non-negative integer"))?;
    let p: usize = header_field(head.get(3), "P=")?
        .parse()
        .map_err(|_| parse_err(1, head[3].0, "P must be a non-negative integer"))?;
    let role_str = header_field(head.get(4), "roles=")?;
    let roles: Vec<NeuronRole> = role_str
        .chars()
        .enumerate()
        .map(|(k, c)| {
            NeuronRole::from_code(c)
                .ok_or_else(|| parse_err(1, head[4].0 + 6 + k, format!("unknown role `{c}`")))
        })
        .collect::<Result<_>>()?;
    if roles.len() != n {
        return Err(parse_err(
            1,
            head[4].0,
            format!("roles has {} entries, N={n}", roles.len()),
        ));
    }
    let mut net = Network::from_roles(roles).map_err(|e| parse_err(1, head[4].0, e.to_string()))?;
    if net.n_input() != p {
        return Err(parse_err(
            1,
            head[3].0,
            format!("P={p} but roles declare {} leading inputs", net.n_input()),
        ));
    }

    let expected_lines = n + 2;
    let body: Vec<&str> = lines
        .iter()
        .copied()
        .take_while(|l| !l.trim().is_empty())
        .collect();
    if body.len() < expected_lines {
        return Err(parse_err(
            body.len() + 1,
            1,
            format!("expected {} weight rows and a bias row", n),
        ));
    }
    if let Some((k, _)) = lines
        .iter()
        .enumerate()
        .skip(expected_lines)
        .find(|(_, l)| !l.trim().is_empty())
    {
        return Err(parse_err(k + 1, 1, "unexpected trailing content"));
    }

    let row_values = |line_no: usize| -> Result<Vec<(usize, Option<f64>)>> {
        let toks = tokens(lines[line_no - 1]);
        if toks.len() != n {
            return Err(parse_err(
                line_no,
                1,
                format!("expected {n} values, found {}", toks.len()),
            ));
        }
        toks.into_iter()
            .map(|(col, t)| {
                if t == ABSENT {
                    Ok((col, None))
                } else {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .map(|v| (col, Some(v)))
                        .ok_or_else(|| parse_err(line_no, col, format!("invalid number `{t}`")))
                }
            })
            .collect()
    };

    for i in 0..n {
        let line_no = i + 2;
        for (j, (col, v)) in row_values(line_no)?.into_iter().enumerate() {
            if let Some(v) = v {
                net.set_weight(i, j, v)
                    .map_err(|e| parse_err(line_no, col, e.to_string()))?;
            }
        }
    }
    let line_no = n + 2;
    for (j, (col, v)) in row_values(line_no)?.into_iter().enumerate() {
        if let Some(v) = v {
            net.set_bias(j, v)
                .map_err(|e| parse_err(line_no, col, e.to_string()))?;
        }
    }
    Ok(net)
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, network_to_string(net)).map_err(|e| DeepError::io(path, e))
}

pub fn load_network(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path).map_err(|e| DeepError::io(path, e))?;
    parse_network(&text)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| DeepError::io(path, e))
}

pub fn trajectory_csv(traj: &PhaseTrajectory) -> String {
    let n = traj.first().len();
    let mut out = String::from("step");
    for k in 0..n {
        let _ = write!(out, ",neuron_{k}");
    }
    out.push('\n');
    for (step, s) in traj.states.iter().enumerate() {
        let _ = write!(out, "{step}");
        for v in s.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub const PRUNE_EVENTS_HEADER: &str = "epoch,example_index,source,target,weight_value,probability";

pub fn prune_events_csv(events: &[PruneEvent]) -> String {
    let mut out = format!("{PRUNE_EVENTS_HEADER}\n");
    for ev in events {
        let source = match ev.source {
            Source::Neuron(i) => i.to_string(),
            Source::Bias => "bias".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            ev.epoch, ev.example_index, source, ev.target, ev.weight_value, ev.probability
        );
    }
    out
}

pub const METRICS_HEADER: &str = "epoch,run_seed,mse,sparsity";

/// Per-epoch metrics of several runs, run by run.
pub fn metrics_csv<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for rec in records {
        for (e, (mse, sp)) in rec.mse.iter().zip(&rec.sparsity).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", e + 1, rec.seed, mse, sp);
        }
    }
    out
}

pub const AGGREGATE_HEADER: &str = "epoch,min,q25,median,q75,max";

pub fn aggregate_csv(stats: &[EpochStats]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for s in stats {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.epoch, s.min, s.q25, s.median, s.q75, s.max
        );
    }
    out
}

pub const STABILITY_HEADER: &str = "neuron,outgoing_sum,incoming_abs_sum,condition_met";

pub fn stability_csv(report: &StabilityReport) -> String {
    let mut out = format!("{STABILITY_HEADER}\n");
    for c in &report.neurons {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.neuron, c.outgoing_sum, c.incoming_abs_sum, c.condition_met
        );
    }
    out
}

/// Aligned text rendering of a stability report with its verdict.
pub fn stability_table(report: &StabilityReport) -> String {
    let mut out = format!(
        "{:>6}  {:>14}  {:>16}  {}\n",
        "neuron", "outgoing_sum", "incoming_abs_sum", "condition_met"
    );
    for c in &report.neurons {
        let _ = writeln!(
            out,
            "{:>6}  {:>14.6}  {:>16.6}  {}",
            c.neuron, c.outgoing_sum, c.incoming_abs_sum, c.condition_met
        );
    }
    out.push_str(if report.overall_certified {
        "CERTIFIED: locally asymptotically stable (sufficient conditions met)\n"
    } else {
        "NOT CERTIFIED (conditions are sufficient, not necessary)\n"
    });
    out
}

/// Alpha assigned to every edge when all parameters are zero (10%).
pub const MIN_ALPHA: u8 = 26;

const POSITIVE_RGB: &str = "1F77B4";
const NEGATIVE_RGB: &str = "D62728";

fn edge_color(value: f64, max_abs: f64) -> String {
    let alpha = if max_abs > 0.0 {
        (255.0 * value.abs() / max_abs).round() as u8
    } else {
        MIN_ALPHA
    };
    let rgb = if value < 0.0 {
        NEGATIVE_RGB
    } else {
        POSITIVE_RGB
    };
    format!("#{rgb}{alpha:02X}")
}

/// Graphviz DOT rendering. Inputs are boxes, hidden neurons circles and
/// outputs double circles. Edge opacity is `|w| / max|w|` over all present
/// parameters; biases are edges from a diamond node labelled `1`.
pub fn network_to_dot(net: &Network) -> String {
    let n = net.n_total();
    let max_abs = (0..n)
        .flat_map(|j| net.incoming(j).into_iter().map(move |s| (s, j)))
        .chain((0..net.n_input()).flat_map(|j| {
            (0..n)
                .filter(move |&i| net.has_connection(i, j))
                .map(move |i| (Source::Neuron(i), j))
        }))
        .map(|(s, j)| net.parameter(s, j).abs())
        .fold(0.0, f64::max);

    let mut out = String::from("digraph deep {\n  rankdir=LR;\n");
    for (k, role) in net.roles().iter().enumerate() {
        let shape = match role {
            NeuronRole::Input => "box",
            NeuronRole::Hidden => "circle",
            NeuronRole::Output => "doublecircle",
        };
        let _ = writeln!(out, "  n{k} [label=\"{k}\", shape={shape}];");
    }
    let has_bias = net.bias_mask().iter().any(|b| *b);
    if has_bias {
        out.push_str("  bias [label=\"1\", shape=diamond];\n");
    }
    for i in 0..n {
        for j in 0..n {
            if net.has_connection(i, j) {
                let w = net.weight(i, j);
                let _ = writeln!(
                    out,
                    "  n{i} -> n{j} [color=\"{}\", tooltip=\"{w}\"];",
                    edge_color(w, max_abs)
                );
            }
        }
    }
    for j in 0..n {
        if net.bias_mask()[j] {
            let b = net.bias()[j];
            let _ = writeln!(
                out,
                "  bias -> n{j} [color=\"{}\", style=dashed, tooltip=\"{b}\"];",
                edge_color(b, max_abs)
            );
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fresh_network_round_trips() {
        let net = Network::new_complete(8, 2, 1, 0.5, 42).unwrap();
        let text = network_to_string(&net);
        assert!(text.starts_with("DEEP v1 N=8 P=2 roles=IIHHHHHO\n"));
        assert_eq!(text.lines().count(), 10);
        assert_eq!(parse_network(&text).unwrap(), net);
    }

    #[test]
    fn absent_entries_are_dots() {
        let mut net = Network::unconnected(3, 1, 1).unwrap();
        net.set_weight(0, 2, 0.0).unwrap();
        net.set_bias(1, -1.5).unwrap();
        let text = network_to_string(&net);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], ". . 0.0000000000000000e0");
        assert_eq!(lines[2], ". . .");
        assert_eq!(lines[4], ". -1.5000000000000000e0 .");
        let back = parse_network(&text).unwrap();
        assert!(back.has_connection(0, 2));
        assert!(!back.has_connection(1, 2));
    }

    #[test]
    fn parse_errors_name_line_and_column() {
        let net = Network::new_complete(3, 1, 1, 0.5, 1).unwrap();
        let text = network_to_string(&net);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2] = lines[2].replacen('.', "abc", 1);
        let err = parse_network(&lines.join("\n")).unwrap_err();
        match err {
            DeepError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column >= 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_headers_and_structure() {
        for (text, line) in [
            ("", 1),
            ("NOPE v1 N=1 P=0 roles=O\n.\n.\n", 1),
            ("DEEP v2 N=1 P=0 roles=O\n.\n.\n", 1),
            ("DEEP v1 N=2 P=0 roles=O\n. .\n. .\n. .\n", 1),
            ("DEEP v1 N=2 P=1 roles=IO\n. 1\n. .\n", 4),
            ("DEEP v1 N=2 P=1 roles=IO\n. 1\n. 2\n. .\n", 3),
            ("DEEP v1 N=2 P=1 roles=IO\n. 1\n. .\n1 .\n", 4),
            ("DEEP v1 N=2 P=1 roles=IO\n. 1\n. .\n. .\nextra\n", 5),
        ] {
            match parse_network(text) {
                Err(DeepError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn dot_has_one_edge_per_parameter() {
        let mut net = Network::unconnected(4, 1, 1).unwrap();
        net.set_weight(0, 1, 0.5).unwrap();
        net.set_weight(1, 3, -1.0).unwrap();
        net.set_weight(2, 3, 0.25).unwrap();
        net.set_bias(3, 0.1).unwrap();
        let dot = network_to_dot(&net);
        let weight_edges = dot
            .lines()
            .filter(|l| l.contains(" -> n") && !l.contains("bias"))
            .count();
        let bias_edges = dot
            .lines()
            .filter(|l| l.trim_start().starts_with("bias ->"))
            .count();
        assert_eq!((weight_edges, bias_edges), (3, 1));
        assert!(dot.contains("n1 -> n3 [color=\"#D62728FF\""));
        assert!(dot.contains("n0 -> n1 [color=\"#1F77B480\""));
        assert!(dot.contains("n0 [label=\"0\", shape=box]"));
        assert!(dot.contains("n3 [label=\"3\", shape=doublecircle]"));
    }

    #[test]
    fn dot_of_all_zero_weights_uses_minimum_alpha() {
        let mut net = Network::unconnected(3, 1, 1).unwrap();
        net.set_weight(0, 2, 0.0).unwrap();
        net.set_weight(1, 2, 0.0).unwrap();
        let dot = network_to_dot(&net);
        assert_eq!(dot.matches("#1F77B41A").count(), 2);
    }

    #[test]
    fn csv_headers_are_fixed() {
        assert_eq!(
            prune_events_csv(&[]),
            "epoch,example_index,source,target,weight_value,probability\n"
        );
        assert_eq!(aggregate_csv(&[]), "epoch,min,q25,median,q75,max\n");
        assert_eq!(
            metrics_csv(std::iter::empty()),
            "epoch,run_seed,mse,sparsity\n"
        );
    }

    proptest! {
        #[test]
        fn save_load_is_exact(seed in any::<u64>(), scale in 1e-6f64..1e6, hidden in 0usize..4, prune in proptest::collection::vec(any::<bool>(), 64)) {
            let mut net = Network::new_complete(3 + hidden, 2, 1, scale, seed).unwrap();
            let n = net.n_total();
            let mut k = 0;
            for j in net.free_indices() {
                for s in net.incoming(j) {
                    if prune[k % prune.len()] {
                        net.remove_parameter(s, j);
                    }
                    k += 1;
                }
            }
            if n > 3 {
                net.set_weight(n - 1, 0, -scale / 3.0).unwrap();
            }
            let back = parse_network(&network_to_string(&net)).unwrap();
            prop_assert_eq!(back, net);
        }
    }
}
