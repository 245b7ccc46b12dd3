//! min/avg/max tables in CSV and JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use layercgh::quality::{MetricsRecord, Summary};
use serde_json::{json, Value};

pub const CSV_HEADER: &str = "method,channel,metric,min,avg,max";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub method: String,
    /// Channel index, or `mean` for the per-sample channel average.
    pub channel: String,
    pub metric: &'static str,
    pub summary: Summary,
}

/// Aggregates per-channel records over samples. For every method there is
/// one row per channel and metric plus a `mean` row built from the
/// per-sample channel averages.
pub fn aggregate(records: &[MetricsRecord]) -> Vec<Row> {
    let mut by_method: BTreeMap<String, Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method.tag().to_string()).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (method, recs) in by_method {
        let mut channels: Vec<usize> = recs.iter().map(|r| r.channel).collect();
        channels.sort_unstable();
        channels.dedup();
        let mut per_sample: BTreeMap<&str, Vec<&MetricsRecord>> = BTreeMap::new();
        for r in &recs {
            per_sample.entry(r.sample_id.as_str()).or_default().push(r);
        }
        for (metric, get) in [("psnr", (|r: &MetricsRecord| r.psnr) as fn(&MetricsRecord) -> f64), ("ssim", |r| r.ssim)] {
            for &c in &channels {
                if let Some(summary) = Summary::of(recs.iter().filter(|r| r.channel == c).map(|r| get(r))) {
                    rows.push(Row {
                        method: method.clone(),
                        channel: c.to_string(),
                        metric,
                        summary,
                    });
                }
            }
            let means = per_sample
                .values()
                .map(|rs| rs.iter().map(|r| get(r)).sum::<f64>() / rs.len() as f64);
            if let Some(summary) = Summary::of(means) {
                rows.push(Row {
                    method: method.clone(),
                    channel: "mean".into(),
                    metric,
                    summary,
                });
            }
        }
    }
    rows
}

pub fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v > 0.0 {
        "inf".into()
    } else if v < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

fn json_value(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(fmt_value(v))
    }
}

/// CSV text; `prefix` adds leading columns (name, value) to every row.
pub fn to_csv(rows: &[Row], prefix: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (name, _) in prefix {
        out.push_str(name);
        out.push(',');
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        for (_, v) in prefix {
            out.push_str(v);
            out.push(',');
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            r.channel,
            r.metric,
            fmt_value(r.summary.min),
            fmt_value(r.summary.avg),
            fmt_value(r.summary.max)
        );
    }
    out
}

pub fn to_json(rows: &[Row], prefix: &[(&str, String)]) -> Vec<Value> {
    rows.iter()
        .map(|r| {
            let mut obj = serde_json::Map::new();
            for (name, v) in prefix {
                obj.insert((*name).to_string(), json!(v));
            }
            obj.insert("method".into(), json!(r.method));
            obj.insert("channel".into(), json!(r.channel));
            obj.insert("metric".into(), json!(r.metric));
            obj.insert("min".into(), json_value(r.summary.min));
            obj.insert("avg".into(), json_value(r.summary.avg));
            obj.insert("max".into(), json_value(r.summary.max));
            obj.insert("count".into(), json!(r.summary.count));
            Value::Object(obj)
        })
        .collect()
}

/// Fixed-width rendering for the terminal.
pub fn render(rows: &[Row]) -> String {
    let mut out = format!("{:<6} {:<7} {:<6} {:>12} {:>12} {:>12}\n", "method", "channel", "metric", "min", "avg", "max");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<6} {:<7} {:<6} {:>12} {:>12} {:>12}",
            r.method,
            r.channel,
            r.metric,
            fmt_value(r.summary.min),
            fmt_value(r.summary.avg),
            fmt_value(r.summary.max)
        );
    }
    out
}
