//! Library side of the `predint` command: run configuration, result records,
//! the scaling benchmark and exit-status classification.

pub mod bench;
pub mod config;
pub mod exit;
pub mod record;

/// One `value` column, floats in shortest round-trip form.
pub fn series_csv(values: &[f64]) -> String {
    let mut out = String::from("value\n");
    for v in values {
        out.push_str(&format!("{v:?}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips() {
        let values = [0.1, 1.0 / 3.0, -2.5e-9, 7.0];
        let csv = series_csv(&values);
        let back: Vec<f64> = csv.lines().skip(1).map(|l| l.parse().unwrap()).collect();
        assert_eq!(back, values);
    }
}
