//! Plain-text instance grammar.
//!
//! An instance file declares the six alphabets and then gives probability
//! tables: one per design variable (factored as a chain of conditionals) and
//! one for the channel. `#` starts a comment, blank lines are ignored.
//!
//! ```text
//! # two binary inputs, receiver observations carry two components each
//! alphabet U 2
//! alphabet V 2
//! alphabet X1 2
//! alphabet X2 2
//! alphabet Y1 4
//! alphabet Y2 4
//!
//! table U
//! 0.5 0.5
//!
//! table X1 | U         # one row per conditioning value
//! 0.5 0.5
//! 0.5 0.5
//!
//! table V | U X1       # rows ordered row-major over (U, X1)
//! 0.89 0.11
//! 0.89 0.11
//! 0.11 0.89
//! 0.11 0.89
//!
//! table X2 | V
//! 1 0
//! 0 1
//!
//! table Y1 Y2 | X1 X2  # columns ordered row-major over (Y1, Y2)
//! ...
//! ```
//!
//! Each design variable must be the target of exactly one table, and may only
//! condition on design variables defined by earlier tables, so the product of
//! the tables is always a well-formed joint. The channel table must target
//! exactly `Y1 Y2` given exactly `X1 X2`. Every row must sum to one. The
//! assembled instance then goes through the full structural validation
//! (alphabet primality, Markov chain), so a factorization like
//! `table X2 | V U` parses but is rejected for bypassing V.

use std::collections::BTreeMap;

use crate::dist::{JointDist, Var};
use crate::instance::{ChannelModel, CiccInstance, DESIGN_VARS};
use crate::{Error, Result};

/// How far a table row may drift from summing to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

const ALPHABETS: [&str; 6] = ["U", "V", "X1", "X2", "Y1", "Y2"];

/// Parses the instance grammar and runs the full instance validation.
pub fn parse_instance(text: &str) -> Result<CiccInstance> {
    let lines = tokenize(text);
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    let mut tables: Vec<Table> = Vec::new();

    let mut at = 0usize;
    while at < lines.len() {
        let line = &lines[at];
        let (col0, word) = line.tokens[0];
        match word {
            "alphabet" => {
                if line.tokens.len() != 3 {
                    return Err(err(line.no, col0, "alphabet lines read: alphabet NAME SIZE"));
                }
                let (ncol, name) = line.tokens[1];
                if !ALPHABETS.contains(&name) {
                    return Err(err(
                        line.no,
                        ncol,
                        &format!("unknown alphabet '{name}': expected one of {ALPHABETS:?}"),
                    ));
                }
                if sizes.contains_key(name) {
                    return Err(err(line.no, ncol, &format!("alphabet {name} declared twice")));
                }
                let (scol, stok) = line.tokens[2];
                let size: usize = stok.parse().map_err(|_| {
                    err(line.no, scol, &format!("expected an integer size, found '{stok}'"))
                })?;
                if size == 0 {
                    return Err(err(line.no, scol, "alphabet size must be positive"));
                }
                sizes.insert(
                    match ALPHABETS.iter().find(|a| **a == name) {
                        Some(a) => a,
                        None => unreachable!(),
                    },
                    size,
                );
                at += 1;
            }
            "table" => {
                let header = parse_table_header(line)?;
                for name in header.targets.iter().chain(&header.givens) {
                    if !sizes.contains_key(name.as_str()) {
                        return Err(err(
                            line.no,
                            col0,
                            &format!("table uses {name} before its alphabet is declared"),
                        ));
                    }
                }
                let rows_needed: usize =
                    header.givens.iter().map(|g| sizes[g.as_str()]).product();
                let cols_needed: usize =
                    header.targets.iter().map(|t| sizes[t.as_str()]).product();
                let mut rows: Vec<Vec<f64>> = Vec::with_capacity(rows_needed);
                at += 1;
                while rows.len() < rows_needed {
                    let Some(data) = lines.get(at) else {
                        return Err(err(
                            line.no,
                            col0,
                            &format!(
                                "table {} ends after {} of {rows_needed} rows",
                                header.label(),
                                rows.len()
                            ),
                        ));
                    };
                    if matches!(data.tokens[0].1, "alphabet" | "table") {
                        return Err(err(
                            line.no,
                            col0,
                            &format!(
                                "table {} has {} of {rows_needed} rows before line {}",
                                header.label(),
                                rows.len(),
                                data.no
                            ),
                        ));
                    }
                    rows.push(parse_row(data, cols_needed, &header, rows.len())?);
                    at += 1;
                }
                tables.push(Table { line: line.no, header, rows });
            }
            other => {
                return Err(err(
                    line.no,
                    col0,
                    &format!("expected 'alphabet' or 'table', found '{other}'"),
                ));
            }
        }
    }

    for name in ALPHABETS {
        if !sizes.contains_key(name) {
            return Err(err_line(0, &format!("missing alphabet declaration for {name}")));
        }
    }
    assemble(&sizes, tables)
}

struct TableHeader {
    targets: Vec<String>,
    givens: Vec<String>,
}

impl TableHeader {
    fn label(&self) -> String {
        if self.givens.is_empty() {
            self.targets.join(" ")
        } else {
            format!("{} | {}", self.targets.join(" "), self.givens.join(" "))
        }
    }
}

struct Table {
    line: usize,
    header: TableHeader,
    rows: Vec<Vec<f64>>,
}

fn parse_table_header(line: &Line) -> Result<TableHeader> {
    let mut targets = Vec::new();
    let mut givens = Vec::new();
    let mut past_bar = false;
    for &(col, tok) in &line.tokens[1..] {
        if tok == "|" {
            if past_bar {
                return Err(err(line.no, col, "a table header has at most one '|'"));
            }
            past_bar = true;
        } else if past_bar {
            givens.push(tok.to_string());
        } else {
            targets.push(tok.to_string());
        }
    }
    if targets.is_empty() {
        return Err(err(line.no, line.tokens[0].0, "table header names no target variable"));
    }
    if past_bar && givens.is_empty() {
        return Err(err(line.no, line.tokens[0].0, "'|' with no conditioning variables"));
    }
    Ok(TableHeader { targets, givens })
}

fn parse_row(data: &Line, cols: usize, header: &TableHeader, row_idx: usize) -> Result<Vec<f64>> {
    if data.tokens.len() != cols {
        return Err(err(
            data.no,
            data.tokens[0].0,
            &format!(
                "row {row_idx} of table {} has {} entries, expected {cols}",
                header.label(),
                data.tokens.len()
            ),
        ));
    }
    let mut row = Vec::with_capacity(cols);
    let mut sum = 0.0f64;
    for &(col, tok) in &data.tokens {
        let p: f64 = tok
            .parse()
            .map_err(|_| err(data.no, col, &format!("expected a probability, found '{tok}'")))?;
        if !p.is_finite() || p < 0.0 {
            return Err(err(data.no, col, &format!("probability {p} out of range")));
        }
        sum += p;
        row.push(p);
    }
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(err(
            data.no,
            data.tokens[0].0,
            &format!("row {row_idx} of table {} sums to {sum}, expected 1", header.label()),
        ));
    }
    Ok(row)
}

fn assemble(sizes: &BTreeMap<&str, usize>, tables: Vec<Table>) -> Result<CiccInstance> {
    let mut design: Vec<&Table> = Vec::new();
    let mut channel: Option<&Table> = None;
    let mut defined: Vec<&str> = Vec::new();
    for t in &tables {
        if t.header.targets == ["Y1", "Y2"] {
            if t.header.givens != ["X1", "X2"] {
                return Err(err_line(
                    t.line,
                    &format!(
                        "the channel table must condition on X1 X2, found '{}'",
                        t.header.label()
                    ),
                ));
            }
            if channel.is_some() {
                return Err(err_line(t.line, "the channel table appears twice"));
            }
            channel = Some(t);
            continue;
        }
        if t.header.targets.len() != 1 {
            return Err(err_line(
                t.line,
                &format!(
                    "only the channel table may have two targets, found '{}'",
                    t.header.label()
                ),
            ));
        }
        let target = t.header.targets[0].as_str();
        if !DESIGN_VARS.contains(&target) {
            return Err(err_line(
                t.line,
                &format!("'{target}' is not a design variable; expected one of {DESIGN_VARS:?}"),
            ));
        }
        if defined.contains(&target) {
            return Err(err_line(t.line, &format!("table {target} appears twice")));
        }
        for g in &t.header.givens {
            if !defined.contains(&g.as_str()) {
                return Err(err_line(
                    t.line,
                    &format!(
                        "table {target} conditions on {g}, which has no earlier table; \
                         order the tables as a chain"
                    ),
                ));
            }
        }
        defined.push(match DESIGN_VARS.iter().find(|v| **v == target) {
            Some(v) => v,
            None => unreachable!(),
        });
        design.push(t);
    }
    for v in DESIGN_VARS {
        if !defined.contains(&v) {
            return Err(err_line(0, &format!("missing table for design variable {v}")));
        }
    }
    let Some(channel) = channel else {
        return Err(err_line(0, "missing channel table Y1 Y2 | X1 X2"));
    };

    // Multiply the chain of conditionals into the joint, row-major over the
    // canonical variable order.
    let dims: Vec<usize> = DESIGN_VARS.iter().map(|v| sizes[v]).collect();
    let cells: usize = dims.iter().product();
    let mut probs = Vec::with_capacity(cells);
    let mut assign: BTreeMap<&str, usize> = BTreeMap::new();
    for flat in 0..cells {
        let mut rest = flat;
        for (k, &d) in dims.iter().enumerate().rev() {
            assign.insert(DESIGN_VARS[k], rest % d);
            rest /= d;
        }
        let mut p = 1.0f64;
        for t in &design {
            let row: usize = t
                .header
                .givens
                .iter()
                .fold(0, |acc, g| acc * sizes[g.as_str()] + assign[g.as_str()]);
            let col = assign[t.header.targets[0].as_str()];
            p *= t.rows[row][col];
        }
        probs.push(p);
    }
    let vars: Vec<Var> = DESIGN_VARS.iter().map(|v| Var::new(v, sizes[v])).collect();
    let design_joint = JointDist::new(vars, probs)?;

    let (y1, y2) = (sizes["Y1"], sizes["Y2"]);
    let mut ch = Vec::with_capacity(sizes["X1"] * sizes["X2"] * y1 * y2);
    for row in &channel.rows {
        ch.extend_from_slice(row);
    }
    let channel_model = ChannelModel::new(sizes["X1"], sizes["X2"], y1, y2, ch)?;
    CiccInstance::new(design_joint, channel_model)
}

/// One non-empty line: its 1-based number and `(1-based column, token)` pairs.
struct Line<'a> {
    no: usize,
    tokens: Vec<(usize, &'a str)>,
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        };
        let mut tokens = Vec::new();
        let mut start: Option<usize> = None;
        for (at, c) in body.char_indices().chain([(body.len(), ' ')]) {
            if c.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push((raw[..s].chars().count() + 1, &body[s..at]));
                }
            } else if start.is_none() {
                start = Some(at);
            }
        }
        if !tokens.is_empty() {
            out.push(Line { no: i + 1, tokens });
        }
    }
    out
}

fn err(line: usize, col: usize, msg: &str) -> Error {
    Error::Parse { line, msg: format!("column {col}: {msg}") }
}

fn err_line(line: usize, msg: &str) -> Error {
    Error::Parse { line, msg: msg.to_string() }
}
