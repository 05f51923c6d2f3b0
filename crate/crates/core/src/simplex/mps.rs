//! Fixed-column MPS export and a matching reader.
//!
//! Columns are named `W0nnnnnn` for `μ0` atoms and `W1nnnnnn` for `μ1`
//! atoms, rows by [`RowLabel::mps_name`], the objective row `COST` and the
//! right-hand-side set `RHS`. Values are written in shortest round-trip
//! form, so a field can run past column 36 when a coefficient needs more
//! than twelve characters.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::discretize::{DiscreteLP, Matrix, RowLabel};

#[derive(Debug, thiserror::Error)]
pub enum MpsError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown row `{0}`")]
    UnknownRow(String),
    #[error("unsupported row type `{0}`")]
    RowType(String),
    #[error("column `{0}` is neither a W0 nor a W1 column, or W1 columns precede W0")]
    ColumnName(String),
}

fn column_name(lp: &DiscreteLP, j: usize) -> String {
    if j < lp.n_mu0 {
        format!("W0{j:06}")
    } else {
        format!("W1{:06}", j - lp.n_mu0)
    }
}

fn entry(out: &mut String, first: &str, second: &str, value: f64) {
    writeln!(out, "    {first:<8}  {second:<8}  {value:?}").unwrap();
}

pub fn export_mps(lp: &DiscreteLP, name: &str) -> String {
    let mut out = String::new();
    writeln!(out, "* required_mass {:?}", lp.required_mass).unwrap();
    writeln!(out, "NAME          {name}").unwrap();
    out.push_str("ROWS\n N  COST\n");
    for label in &lp.eq_labels {
        writeln!(out, " E  {}", label.mps_name()).unwrap();
    }
    for label in &lp.ineq_labels {
        writeln!(out, " L  {}", label.mps_name()).unwrap();
    }
    out.push_str("COLUMNS\n");
    for j in 0..lp.n_columns() {
        let col = column_name(lp, j);
        entry(&mut out, &col, "COST", lp.objective[j]);
        for (m, labels) in [(&lp.eq, &lp.eq_labels), (&lp.ineq, &lp.ineq_labels)] {
            for (i, label) in labels.iter().enumerate() {
                let v = m.get(i, j);
                if v != 0.0 {
                    entry(&mut out, &col, &label.mps_name(), v);
                }
            }
        }
    }
    out.push_str("RHS\n");
    for (rhs, labels) in [(&lp.eq_rhs, &lp.eq_labels), (&lp.ineq_rhs, &lp.ineq_labels)] {
        for (v, label) in rhs.iter().zip(labels) {
            if *v != 0.0 {
                entry(&mut out, "RHS", &label.mps_name(), *v);
            }
        }
    }
    out.push_str("BOUNDS\nENDATA\n");
    out
}

#[derive(PartialEq)]
enum Section {
    Start,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

/// Reads a file written by [`export_mps`] (or any MPS file using only `N`,
/// `E` and `L` rows with the same naming) back into a [`DiscreteLP`].
/// Returns the LP and the `NAME` field.
pub fn parse_mps(text: &str) -> Result<(DiscreteLP, String), MpsError> {
    let mut section = Section::Start;
    let mut name = String::new();
    let mut required_mass = f64::NAN;
    let mut eq_labels = Vec::new();
    let mut ineq_labels = Vec::new();
    // Row name -> (is_equality, index); the objective maps to None.
    let mut rows: HashMap<String, Option<(bool, usize)>> = HashMap::new();
    let mut columns: Vec<String> = Vec::new();
    let mut column_index: HashMap<String, usize> = HashMap::new();
    let mut entries: Vec<(usize, Option<(bool, usize)>, f64)> = Vec::new();
    let mut rhs_entries: Vec<((bool, usize), f64)> = Vec::new();

    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let syntax = |message: &str| MpsError::Syntax { line: line_no, message: message.to_string() };
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('*') {
            let mut t = comment.split_whitespace();
            if t.next() == Some("required_mass") {
                required_mass = t.next().and_then(|v| v.parse().ok()).ok_or_else(|| syntax("bad required_mass"))?;
            }
            continue;
        }
        if !line.starts_with(' ') {
            let mut t = line.split_whitespace();
            section = match t.next() {
                Some("NAME") => {
                    name = line[4..].trim().to_string();
                    Section::Start
                }
                Some("ROWS") => Section::Rows,
                Some("COLUMNS") => Section::Columns,
                Some("RHS") => Section::Rhs,
                Some("BOUNDS") => Section::Bounds,
                Some("ENDATA") => Section::End,
                _ => return Err(syntax("unknown section")),
            };
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let value = |s: &str| s.parse::<f64>().map_err(|_| syntax("bad number"));
        match section {
            Section::Rows => {
                let [kind, row] = tokens[..] else { return Err(syntax("expected `type name`")) };
                let slot = match kind {
                    "N" => None,
                    "E" | "L" => {
                        let label = RowLabel::from_mps_name(row).ok_or_else(|| MpsError::UnknownRow(row.into()))?;
                        if kind == "E" {
                            eq_labels.push(label);
                            Some((true, eq_labels.len() - 1))
                        } else {
                            ineq_labels.push(label);
                            Some((false, ineq_labels.len() - 1))
                        }
                    }
                    other => return Err(MpsError::RowType(other.into())),
                };
                rows.insert(row.to_string(), slot);
            }
            Section::Columns => {
                if tokens.len() % 2 != 1 || tokens.len() < 3 {
                    return Err(syntax("expected `column row value [row value]`"));
                }
                let col = tokens[0];
                let j = match column_index.get(col) {
                    Some(j) => *j,
                    None => {
                        let measure1 = col.starts_with("W1");
                        if !(col.starts_with("W0") || measure1) {
                            return Err(MpsError::ColumnName(col.into()));
                        }
                        if !measure1 && columns.iter().any(|c| c.starts_with("W1")) {
                            return Err(MpsError::ColumnName(col.into()));
                        }
                        columns.push(col.to_string());
                        column_index.insert(col.to_string(), columns.len() - 1);
                        columns.len() - 1
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let slot = *rows.get(pair[0]).ok_or_else(|| MpsError::UnknownRow(pair[0].into()))?;
                    entries.push((j, slot, value(pair[1])?));
                }
            }
            Section::Rhs => {
                if tokens.len() % 2 != 1 || tokens.len() < 3 {
                    return Err(syntax("expected `set row value [row value]`"));
                }
                for pair in tokens[1..].chunks(2) {
                    match *rows.get(pair[0]).ok_or_else(|| MpsError::UnknownRow(pair[0].into()))? {
                        Some(slot) => rhs_entries.push((slot, value(pair[1])?)),
                        None => return Err(syntax("objective constant is not supported")),
                    }
                }
            }
            Section::Bounds => return Err(syntax("bounds are not supported")),
            Section::Start | Section::End => return Err(syntax("data outside a section")),
        }
    }
    if section != Section::End {
        return Err(MpsError::Syntax { line: text.lines().count(), message: "missing ENDATA".into() });
    }

    let n = columns.len();
    let n_mu1 = columns.iter().filter(|c| c.starts_with("W1")).count();
    let mut objective = vec![0.0; n];
    let mut eq = Matrix { rows: eq_labels.len(), cols: n, data: vec![0.0; eq_labels.len() * n] };
    let mut ineq = Matrix { rows: ineq_labels.len(), cols: n, data: vec![0.0; ineq_labels.len() * n] };
    for (j, slot, v) in entries {
        match slot {
            None => objective[j] = v,
            Some((true, i)) => eq.data[i * n + j] = v,
            Some((false, i)) => ineq.data[i * n + j] = v,
        }
    }
    let mut eq_rhs = vec![0.0; eq_labels.len()];
    let mut ineq_rhs = vec![0.0; ineq_labels.len()];
    for ((is_eq, i), v) in rhs_entries {
        if is_eq {
            eq_rhs[i] = v;
        } else {
            ineq_rhs[i] = v;
        }
    }
    let lp = DiscreteLP {
        n_mu0: n - n_mu1,
        n_mu1,
        objective,
        eq,
        eq_rhs,
        eq_labels,
        ineq,
        ineq_rhs,
        ineq_labels,
        required_mass,
    };
    Ok((lp, name))
}
