use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricSnapshot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rmse,
    Pdfe,
    DistToMin,
    Regret,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Rmse, Metric::Pdfe, Metric::DistToMin, Metric::Regret];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Pdfe => "pdfe",
            Metric::DistToMin => "dist_to_min",
            Metric::Regret => "regret",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

/// Running minimum; NaN entries carry the previous minimum forward.
pub fn cumulative_min(values: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    values
        .iter()
        .map(|v| {
            if *v < best {
                best = *v;
            }
            best
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

pub fn median_absolute_deviation(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub epoch: usize,
    /// Median of the replicate clocks at this epoch.
    pub clock: f64,
    pub median: f64,
    /// A quarter of the median absolute deviation.
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub metric: Metric,
    pub n_replicates: usize,
    pub rows: Vec<AggregateRow>,
}

impl AggregateSeries {
    pub fn final_median(&self) -> Option<f64> {
        self.rows.last().map(|r| r.median)
    }
}

/// Median and MAD/4 band of the cumulative minimum, epoch by epoch.
///
/// Replicates are aligned by epoch index and truncated to the shortest one.
pub fn aggregate(replicates: &[Vec<MetricSnapshot>], metric: Metric) -> Result<AggregateSeries> {
    if replicates.len() < 2 {
        return Err(Error::Alignment(format!(
            "need at least 2 replicates, got {}",
            replicates.len()
        )));
    }
    let len = replicates.iter().map(Vec::len).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::Alignment("a replicate has no epochs".into()));
    }
    let cums: Vec<Vec<f64>> = replicates
        .iter()
        .map(|r| cumulative_min(&r[..len].iter().map(|s| s.get(metric)).collect::<Vec<_>>()))
        .collect();
    let rows = (0..len)
        .map(|e| {
            let column: Vec<f64> = cums.iter().map(|c| c[e]).collect();
            let clocks: Vec<f64> = replicates.iter().map(|r| r[e].clock).collect();
            AggregateRow {
                epoch: e,
                clock: median(&clocks),
                median: median(&column),
                band: 0.25 * median_absolute_deviation(&column),
            }
        })
        .collect();
    Ok(AggregateSeries {
        metric,
        n_replicates: replicates.len(),
        rows,
    })
}

/// Final cumulative minimum of one metric across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub metric: Metric,
    /// One value per replicate, in input order.
    pub values: Vec<f64>,
    pub median: f64,
    pub band: f64,
}

pub fn final_summary(replicates: &[Vec<MetricSnapshot>], metric: Metric) -> FinalSummary {
    let values: Vec<f64> = replicates
        .iter()
        .map(|r| {
            r.iter()
                .map(|s| s.get(metric))
                .fold(f64::INFINITY, |a, b| if b < a { b } else { a })
        })
        .collect();
    FinalSummary {
        metric,
        median: median(&values),
        band: 0.25 * median_absolute_deviation(&values),
        values,
    }
}

/// Writes `epoch,clock,metric,median,band` rows for every series.
pub fn write_csv<W: Write>(mut out: W, series: &[AggregateSeries]) -> Result<()> {
    writeln!(out, "epoch,clock,metric,median,band")?;
    for s in series {
        for r in &s.rows {
            writeln!(out, "{},{:e},{},{:e},{:e}", r.epoch, r.clock, s.metric, r.median, r.band)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(v: f64, n: usize) -> Vec<MetricSnapshot> {
        (0..n)
            .map(|i| MetricSnapshot {
                clock: i as f64,
                rmse: v,
                pdfe: v,
                dist_to_min: v,
                regret: v,
            })
            .collect()
    }

    #[test]
    fn two_constant_replicates() {
        let s = aggregate(&[constant(1.0, 4), constant(3.0, 6)], Metric::Rmse).unwrap();
        assert_eq!(s.rows.len(), 4);
        for r in &s.rows {
            assert_eq!((r.median, r.band), (2.0, 0.25));
        }
    }

    #[test]
    fn identical_replicates_have_no_band() {
        let mut a = constant(1.0, 5);
        for (i, s) in a.iter_mut().enumerate() {
            s.pdfe = (i as f64 - 2.0).powi(2);
        }
        let s = aggregate(&[a.clone(), a.clone(), a], Metric::Pdfe).unwrap();
        assert!(s.rows.iter().all(|r| r.band == 0.0));
        let m: Vec<f64> = s.rows.iter().map(|r| r.median).collect();
        assert_eq!(m, vec![4.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn alignment_errors() {
        assert!(matches!(aggregate(&[constant(1.0, 3)], Metric::Rmse), Err(Error::Alignment(_))));
        assert!(matches!(
            aggregate(&[constant(1.0, 3), Vec::new()], Metric::Rmse),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let s = aggregate(&[constant(1.0, 2), constant(3.0, 2)], Metric::Regret).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[s]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epoch,clock,metric,median,band");
        assert_eq!(lines[1], "0,0e0,regret,2e0,2.5e-1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
    }
}
