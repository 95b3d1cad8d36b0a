use super::{RankResult, SweepPoint};

/// Rounds to two significant digits and prints without trailing noise:
/// `0.01234 -> "0.012"`, `1234.0 -> "1200"`.
pub fn sig2(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32 - 1;
    let scale = 10f64.powi(exp);
    let mut rounded = (x / scale).round() * scale;
    // 9.96 rounds up to 10 and only needs one decimal fewer.
    let decimals = if rounded.abs() >= 10f64.powi(exp + 2) { (-exp - 1).max(0) } else { (-exp).max(0) };
    if decimals == 0 {
        rounded = rounded.round();
    }
    format!("{rounded:.prec$}", prec = decimals as usize)
}

fn finish(writer: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("CSV of UTF-8 fields")
}

/// `rank,profile,mass`, preceded by `# `-comment lines.
pub fn rankings_csv(result: &RankResult, comments: &[String]) -> String {
    let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "profile", "mass"]).expect("in-memory");
    for (rank, &i) in result.ranking.iter().enumerate() {
        w.write_record([(rank + 1).to_string(), result.labels[i].clone(), result.pi[i].to_string()])
            .expect("in-memory");
    }
    out.push_str(&finish(w));
    out
}

/// Long format `alpha,profile,mass`. Failed points appear as comment lines.
pub fn sweep_csv(points: &[SweepPoint], comments: &[String]) -> String {
    let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
    for p in points {
        if let Err(e) = &p.outcome {
            out.push_str(&format!("# alpha {} failed: {e}\n", p.alpha));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "profile", "mass"]).expect("in-memory");
    for p in points {
        if let Ok(r) = &p.outcome {
            for (label, mass) in r.labels.iter().zip(&r.pi) {
                w.write_record([p.alpha.to_string(), label.clone(), mass.to_string()]).expect("in-memory");
            }
        }
    }
    out.push_str(&finish(w));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_significant_digits() {
        assert_eq!(sig2(0.01234), "0.012");
        assert_eq!(sig2(1.0), "1.0");
        assert_eq!(sig2(43.2332), "43");
        assert_eq!(sig2(1234.0), "1200");
        assert_eq!(sig2(9.96), "10");
        assert_eq!(sig2(0.0996), "0.10");
        assert_eq!(sig2(-2.55), "-2.5");
        assert_eq!(sig2(0.0), "0");
    }
}
