//! Payoff and violation tables as CSV.
//!
//! ```text
//! # optional comment lines
//! row,col,p1,p2,n_runs
//! A,A,3.12,3.11,5000
//! ...
//! ```
//!
//! Rows are written in profile order and reals in their shortest
//! round-tripping decimal form, so load-then-write is byte-identical for
//! canonical files.

use std::collections::HashMap;

use super::{EgtaError, PayoffTensor, ViolationRow};

pub const PAYOFF_HEADER: [&str; 5] = ["row", "col", "p1", "p2", "n_runs"];
pub const VIOLATION_HEADER: [&str; 4] = ["row", "col", "violation_rate", "n_runs"];

fn comment_block(comments: &[String]) -> String {
    comments.iter().map(|c| format!("# {c}\n")).collect()
}

fn leading_comments(text: &str) -> Vec<String> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.strip_prefix("# ").unwrap_or(&l[1..]).to_string())
        .collect()
}

fn csv_error(e: csv::Error) -> EgtaError {
    let line = e.position().map_or(0, |p| p.line());
    EgtaError::Csv { line, msg: e.to_string() }
}

fn records(text: &str, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>, EgtaError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = reader.headers().map_err(csv_error)?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        let line = found.position().map_or(1, |p| p.line());
        return Err(EgtaError::Csv { line, msg: format!("expected header `{}`", header.join(",")) });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

fn parse_real(field: &str, line: u64, what: &str) -> Result<f64, EgtaError> {
    let v: f64 = field
        .parse()
        .map_err(|_| EgtaError::Csv { line, msg: format!("{what} `{field}` is not a number") })?;
    if !v.is_finite() {
        return Err(EgtaError::Csv { line, msg: format!("{what} must be finite") });
    }
    Ok(v)
}

fn parse_count(field: &str, line: u64) -> Result<u64, EgtaError> {
    field
        .parse()
        .map_err(|_| EgtaError::Csv { line, msg: format!("n_runs `{field}` is not a non-negative integer") })
}

pub fn write_payoff_csv(tensor: &PayoffTensor, comments: &[String]) -> Result<String, EgtaError> {
    if tensor.num_populations() != 2 {
        return Err(EgtaError::NotBimatrix(tensor.num_populations()));
    }
    let mut out = comment_block(comments);
    out.push_str(&PAYOFF_HEADER.join(","));
    out.push('\n');
    for idx in 0..tensor.num_profiles() {
        let names = tensor.profile_names(idx);
        let p = tensor.payoffs(idx);
        out.push_str(&format!("{},{},{},{},{}\n", names[0], names[1], p[0], p[1], tensor.runs(idx)));
    }
    Ok(out)
}

/// Parses a payoff table; returns the tensor and the leading comment lines.
/// Strategy order per population is the order of first appearance.
pub fn read_payoff_csv(text: &str) -> Result<(PayoffTensor, Vec<String>), EgtaError> {
    let comments = leading_comments(text);
    let rows = records(text, &PAYOFF_HEADER)?;
    if rows.is_empty() {
        return Err(EgtaError::Csv { line: 2, msg: "no payoff rows".into() });
    }
    let mut lists: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        let line = *line;
        if fields.len() != 5 {
            return Err(EgtaError::Csv { line, msg: format!("expected 5 fields, found {}", fields.len()) });
        }
        for (k, list) in lists.iter_mut().enumerate() {
            if fields[k].is_empty() {
                return Err(EgtaError::Csv { line, msg: "empty strategy name".into() });
            }
            if !list.contains(&fields[k]) {
                list.push(fields[k].clone());
            }
        }
        let p1 = parse_real(&fields[2], line, "p1")?;
        let p2 = parse_real(&fields[3], line, "p2")?;
        let runs = parse_count(&fields[4], line)?;
        parsed.push((line, fields[0].clone(), fields[1].clone(), p1, p2, runs));
    }
    let index: [HashMap<&str, usize>; 2] =
        [0, 1].map(|k| lists[k].iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect());
    let n2 = lists[1].len();
    let total = lists[0].len() * n2;
    let mut payoffs: Vec<Option<Vec<f64>>> = vec![None; total];
    let mut runs = vec![0u64; total];
    for (line, r, c, p1, p2, n) in parsed {
        let idx = index[0][r.as_str()] * n2 + index[1][c.as_str()];
        if payoffs[idx].is_some() {
            return Err(EgtaError::Csv { line, msg: format!("duplicate profile ({r},{c})") });
        }
        payoffs[idx] = Some(vec![p1, p2]);
        runs[idx] = n;
    }
    if let Some(missing) = payoffs.iter().position(Option::is_none) {
        let (r, c) = (&lists[0][missing / n2], &lists[1][missing % n2]);
        return Err(EgtaError::Invalid(format!("profile ({r},{c}) is missing")));
    }
    let [l0, l1] = lists;
    let tensor = PayoffTensor::new(vec![l0, l1], payoffs.into_iter().map(Option::unwrap).collect(), runs)?;
    Ok((tensor, comments))
}

pub fn write_violation_csv(rows: &[ViolationRow], comments: &[String]) -> String {
    let mut out = comment_block(comments);
    out.push_str(&VIOLATION_HEADER.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.row, r.col, r.violation_rate, r.runs));
    }
    out
}

pub fn read_violation_csv(text: &str) -> Result<Vec<ViolationRow>, EgtaError> {
    records(text, &VIOLATION_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            if f.len() != 4 {
                return Err(EgtaError::Csv { line, msg: format!("expected 4 fields, found {}", f.len()) });
            }
            let rate = parse_real(&f[2], line, "violation_rate")?;
            if !(0.0..=1.0).contains(&rate) {
                return Err(EgtaError::Csv { line, msg: "violation_rate outside [0, 1]".into() });
            }
            Ok(ViolationRow { row: f[0].clone(), col: f[1].clone(), violation_rate: rate, runs: parse_count(&f[3], line)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "# fingerprint: abc\nrow,col,p1,p2,n_runs\na,a,1,2,3\na,b,0.1,-2.5,3\nb,a,3.17,3.22,3\nb,b,0,0,3\n";

    #[test]
    fn canonical_text_round_trips() {
        let (t, comments) = read_payoff_csv(SMALL).unwrap();
        assert_eq!(comments, vec!["fingerprint: abc".to_string()]);
        assert_eq!(t.payoffs(2), &[3.17, 3.22]);
        assert_eq!(write_payoff_csv(&t, &comments).unwrap(), SMALL);
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let bad = SMALL.replace("0.1,-2.5", "0.1,oops");
        match read_payoff_csv(&bad) {
            Err(EgtaError::Csv { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let short = SMALL.replace("b,a,3.17,3.22,3", "b,a,3.17");
        assert!(matches!(read_payoff_csv(&short), Err(EgtaError::Csv { line: 5, .. })));
        let header = SMALL.replace("n_runs", "runs");
        assert!(matches!(read_payoff_csv(&header), Err(EgtaError::Csv { .. })));
    }

    #[test]
    fn incomplete_or_duplicate_profiles() {
        let missing = SMALL.replace("b,b,0,0,3\n", "");
        assert!(matches!(read_payoff_csv(&missing), Err(EgtaError::Invalid(_))));
        let dup = SMALL.replace("b,b,0,0,3", "a,a,0,0,3");
        assert!(read_payoff_csv(&dup).is_err());
    }

    #[test]
    fn violation_table() {
        let rows = vec![ViolationRow { row: "C".into(), col: "C".into(), violation_rate: 0.25, runs: 10 }];
        let text = write_violation_csv(&rows, &[]);
        assert_eq!(read_violation_csv(&text).unwrap(), rows);
    }
}
