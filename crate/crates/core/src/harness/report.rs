//! Per-regime aggregation of run records and the rendered summary table.

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Result};
use crate::games::{Regime, RunRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

/// Summary of the completed seeds of one regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub regime: Regime,
    pub config_hash: String,
    pub n: usize,
    /// Set when the statistics rest on one seed, so `std` carries no information.
    pub single_seed: bool,
    pub train_acc_both: Stat,
    pub test_acc_both: Stat,
    pub test_acc_avg: Stat,
    pub ci: Stat,
    pub topo: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub regime: Regime,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub rows: Vec<RegimeSummary>,
    pub failures: Vec<SeedFailure>,
    /// Seeds never started because the wall-clock budget ran out.
    pub skipped: Vec<(Regime, u64)>,
}

impl AggregateReport {
    /// True when any requested seed is missing from the statistics.
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty() || !self.skipped.is_empty()
    }

    pub fn row(&self, regime: Regime) -> Option<&RegimeSummary> {
        self.rows.iter().find(|r| r.regime == regime)
    }
}

/// Means and sample standard deviations of one regime's records.
pub fn aggregate(records: &[RunRecord]) -> Result<RegimeSummary> {
    let first = records.first().ok_or_else(|| domain_err("cannot aggregate zero records"))?;
    if let Some(r) = records.iter().find(|r| r.regime != first.regime || r.config_hash != first.config_hash) {
        return Err(domain_err(format!(
            "records mix {}/{} with {}/{}",
            first.regime, first.config_hash, r.regime, r.config_hash
        )));
    }
    let stat = |f: fn(&RunRecord) -> f64| Stat::of(&records.iter().map(f).collect::<Vec<_>>());
    Ok(RegimeSummary {
        regime: first.regime,
        config_hash: first.config_hash.clone(),
        n: records.len(),
        single_seed: records.len() == 1,
        train_acc_both: stat(|r| r.final_train_acc_both),
        test_acc_both: stat(|r| r.final_test_acc_both),
        test_acc_avg: stat(|r| r.final_test_acc_avg),
        ci: stat(|r| r.ci),
        topo: stat(|r| r.topo),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(crate::error::Error::Config(format!("unknown report format {s:?}"))),
        }
    }
}

const COLUMNS: [&str; 5] = ["Train (both)", "Test (both)", "Test (avg)", "CI", "Topo"];
const CSV_HEADER: &str = "regime,n,train_both_mean,train_both_std,test_both_mean,test_both_std,test_avg_mean,test_avg_std,ci_mean,ci_std,topo_mean,topo_std";

fn stats(r: &RegimeSummary) -> [Stat; 5] {
    [r.train_acc_both, r.test_acc_both, r.test_acc_avg, r.ci, r.topo]
}

pub fn render_report(report: &AggregateReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => {
            let mut out = format!("| Regime | {} |\n|---|{}\n", COLUMNS.join(" | "), "---|".repeat(COLUMNS.len()));
            for r in &report.rows {
                let cells: Vec<String> = stats(r).iter().map(|s| format!("{:.2} (± {:.2})", s.mean, s.std)).collect();
                let name = if r.single_seed { format!("{} (n=1)", r.regime) } else { r.regime.to_string() };
                out.push_str(&format!("| {name} | {} |\n", cells.join(" | ")));
            }
            if report.is_partial() {
                out.push_str(&format!(
                    "\nincomplete: {} failed, {} skipped\n",
                    report.failures.len(),
                    report.skipped.len()
                ));
            }
            out
        }
        ReportFormat::Csv => {
            let mut out = format!("{CSV_HEADER}\n");
            for r in &report.rows {
                let cells: Vec<String> = stats(r).iter().flat_map(|s| [s.mean.to_string(), s.std.to_string()]).collect();
                out.push_str(&format!("{},{},{}\n", r.regime, r.n, cells.join(",")));
            }
            out
        }
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
    }
}

/// Reads the CSV rendering back as (regime, n, [mean, std] per column).
pub fn parse_report_csv(text: &str) -> Result<Vec<(Regime, usize, [Stat; 5])>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(domain_err("report csv: unexpected header"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 12 {
                return Err(domain_err("report csv: expected 12 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| domain_err(format!("report csv: bad number {s:?}")));
            let mut st = [Stat::default(); 5];
            for (i, s) in st.iter_mut().enumerate() {
                *s = Stat { mean: num(f[2 + 2 * i])?, std: num(f[3 + 2 * i])? };
            }
            let n = f[1].parse().map_err(|_| domain_err("report csv: bad count"))?;
            Ok((f[0].parse()?, n, st))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(regime: Regime, hash: &str, v: f64) -> RunRecord {
        let mut r = RunRecord::new(regime, 0, hash.into());
        r.final_train_acc_both = v;
        r.final_test_acc_both = v / 2.0;
        r.final_test_acc_avg = v / 3.0;
        r.ci = v / 4.0;
        r.topo = v / 5.0;
        r
    }

    #[test]
    fn sample_std_of_two() {
        let s = aggregate(&[rec(Regime::Baseline, "h", 0.2), rec(Regime::Baseline, "h", 0.4)]).unwrap();
        assert!((s.train_acc_both.mean - 0.3).abs() < 1e-12);
        // deviations of 0.1 each: sqrt(0.02 / 1)
        assert!((s.train_acc_both.std - 0.02f64.sqrt()).abs() < 1e-12);
        assert!((s.train_acc_both.std - 0.1414).abs() < 1e-4);
        assert!(!s.single_seed);
    }

    #[test]
    fn single_and_invalid_inputs() {
        let s = aggregate(&[rec(Regime::Random, "h", 0.5)]).unwrap();
        assert!(s.single_seed);
        assert_eq!(s.topo.std, 0.0);
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[rec(Regime::Random, "a", 0.1), rec(Regime::Random, "b", 0.1)]).is_err());
        assert!(aggregate(&[rec(Regime::Random, "a", 0.1), rec(Regime::Obverter, "a", 0.1)]).is_err());
    }

    fn four_rows() -> AggregateReport {
        let rows = Regime::ALL
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                aggregate(&[rec(g, "h", 0.1 * i as f64 + 1.0 / 3.0), rec(g, "h", 0.7 / (i + 1) as f64)]).unwrap()
            })
            .collect();
        AggregateReport { rows, ..AggregateReport::default() }
    }

    #[test]
    fn markdown_shape() {
        let md = render_report(&four_rows(), ReportFormat::Markdown);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 6);
        for l in &lines {
            assert_eq!(l.matches('|').count(), 7, "{l}");
        }
        assert!(lines[2].contains("(± "));
    }

    #[test]
    fn csv_round_trip() {
        let report = four_rows();
        let parsed = parse_report_csv(&render_report(&report, ReportFormat::Csv)).unwrap();
        assert_eq!(parsed.len(), 4);
        for ((regime, n, st), row) in parsed.iter().zip(&report.rows) {
            assert_eq!((*regime, *n), (row.regime, row.n));
            for (a, b) in st.iter().zip(stats(row)) {
                assert!((a.mean - b.mean).abs() < 1e-9 && (a.std - b.std).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn json_schema() {
        let v: serde_json::Value = serde_json::from_str(&render_report(&four_rows(), ReportFormat::Json)).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert!(r["regime"].is_string() && r["config_hash"].is_string());
            assert!(r["n"].is_u64() && r["single_seed"].is_boolean());
            for k in ["train_acc_both", "test_acc_both", "test_acc_avg", "ci", "topo"] {
                assert!(r[k]["mean"].is_f64() && r[k]["std"].is_f64(), "{k}");
            }
        }
        assert!(v["failures"].is_array() && v["skipped"].is_array());
    }
}
