//! CPLEX-style LP text export.
//!
//! Sections are always written in the order `Maximize`, `Subject To`, `Bounds`,
//! `End`. Names are mangled to `[A-Za-z0-9_]`: every other character becomes
//! `_`, names starting with a digit (or empty) get a `v_`/`c_` prefix, and a
//! name that collides with an earlier one gets its index appended. Variables at
//! the default bounds `[0, inf)` are not listed under `Bounds`.

use std::collections::HashSet;
use std::fmt::Write;

use super::{LinearProgram, Relation};

const LINE_WIDTH: usize = 200;

fn mangle(raw: &str, prefix: &str, index: usize, seen: &mut HashSet<String>) -> String {
    let mut name: String = raw
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if name.is_empty() || name.starts_with(|c: char| c.is_ascii_digit()) {
        name = format!("{prefix}{name}");
    }
    if seen.contains(&name) {
        name = format!("{name}_{index}");
    }
    seen.insert(name.clone());
    name
}

/// Appends `terms` after `head`, wrapping onto indented continuation lines.
fn write_wrapped(out: &mut String, head: &str, terms: &[String], tail: &str) {
    let mut line = String::from(head);
    for t in terms
        .iter()
        .map(String::as_str)
        .chain((!tail.is_empty()).then_some(tail))
    {
        if line.len() + t.len() + 1 > LINE_WIDTH && !line.trim().is_empty() {
            out.push_str(&line);
            out.push('\n');
            line = String::from("   ");
        }
        line.push(' ');
        line.push_str(t);
    }
    out.push_str(&line);
    out.push('\n');
}

fn terms(coeffs: impl Iterator<Item = (usize, f64)>, names: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for (v, a) in coeffs {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 { "-" } else { "+" };
        let mag = a.abs();
        let t = if mag == 1.0 {
            format!("{sign} {}", names[v])
        } else {
            format!("{sign} {mag} {}", names[v])
        };
        out.push(t);
    }
    if out.is_empty() && !names.is_empty() {
        out.push(format!("0 {}", names[0]));
    }
    out
}

pub fn export_lp_text(lp: &LinearProgram) -> String {
    let mut seen = HashSet::new();
    let var_names: Vec<String> = lp
        .vars()
        .iter()
        .enumerate()
        .map(|(i, v)| mangle(&v.name, "v_", i, &mut seen))
        .collect();
    let mut out = String::new();

    out.push_str("Maximize\n");
    let obj = terms(lp.objective().iter().copied().enumerate(), &var_names);
    write_wrapped(&mut out, " obj:", &obj, "");

    out.push_str("Subject To\n");
    for (i, c) in lp.constraints().iter().enumerate() {
        let name = mangle(&c.name, "c_", i, &mut seen);
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let row = terms(c.coeffs.iter().copied(), &var_names);
        write_wrapped(
            &mut out,
            &format!(" {name}:"),
            &row,
            &format!("{rel} {}", c.rhs),
        );
    }

    out.push_str("Bounds\n");
    for (v, name) in lp.vars().iter().zip(&var_names) {
        match v.upper {
            None if v.lower == 0.0 => {}
            None => {
                let _ = writeln!(out, " {name} >= {}", v.lower);
            }
            Some(u) => {
                let _ = writeln!(out, " {} <= {name} <= {u}", v.lower);
            }
        }
    }
    out.push_str("End\n");
    out
}
