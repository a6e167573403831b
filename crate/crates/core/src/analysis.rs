//! Statistical analyses joining metric scores to learning curves: Spearman
//! rank correlations per training checkpoint, quartile-binned accuracy
//! curves, top/bottom-50% accuracy deltas, and correlation reports split by
//! final accuracy.
//!
//! Ties take mid-ranks in correlations; quartile and median splits sort
//! descending with lexicographic model-id tie-breaks, and the top group gets
//! the extra row when counts are odd. All outputs are deterministic given the
//! table.

use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Mid-ranks (average ranks for ties), 1-based.
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of mid-ranks.
/// `None` when either argument has zero rank variance or fewer than 2 points.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "length mismatch");
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let rx = midranks(xs);
    let ry = midranks(ys);
    let mean = (n + 1) as f64 / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        cov += (x - mean) * (y - mean);
        var_x += (x - mean) * (x - mean);
        var_y += (y - mean) * (y - mean);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / (var_x * var_y).sqrt())
}

/// Joined scores/curves data: one row per model, metric columns plus an
/// accuracy column per checkpoint.
#[derive(Clone, Debug)]
pub struct ResultsTable {
    /// Sorted, unique model ids.
    pub model_ids: Vec<String>,
    /// Metric name -> per-model value (None where absent).
    pub metrics: BTreeMap<String, Vec<Option<f64>>>,
    /// Sorted checkpoint steps, present for every model.
    pub checkpoints: Vec<usize>,
    /// accuracy[model][checkpoint].
    pub accuracy: Vec<Vec<f64>>,
}

impl ResultsTable {
    /// Join a scores CSV (`model_id,metric,value,...`) with a curves CSV
    /// (`model_id,step,accuracy`).
    ///
    /// Models trained several times produce repeated (model_id, step) curve
    /// rows; by default those are averaged per representation. With
    /// `average = false` every complete repetition becomes its own row keyed
    /// `model_id#run`, sharing the representation's metric scores.
    pub fn from_csv_files<P: AsRef<Path>>(
        scores_path: P,
        curves_path: P,
        average: bool,
    ) -> Result<Self> {
        let mut scores: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        let mut reader = csv::Reader::from_path(scores_path.as_ref())?;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() < 3 {
                return Err(Error::Parse {
                    line,
                    message: "scores row needs model_id,metric,value".into(),
                });
            }
            let value: f64 = record[2].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad value `{}`", &record[2]),
            })?;
            scores
                .entry(record[0].to_string())
                .or_default()
                .insert(record[1].to_string(), value);
        }

        // per model, per step, accuracy of each repetition in file order
        let mut curves: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
        let mut reader = csv::Reader::from_path(curves_path.as_ref())?;
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() < 3 {
                return Err(Error::Parse {
                    line,
                    message: "curves row needs model_id,step,accuracy".into(),
                });
            }
            let step: usize = record[1].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad step `{}`", &record[1]),
            })?;
            let accuracy: f64 = record[2].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad accuracy `{}`", &record[2]),
            })?;
            curves
                .entry(record[0].to_string())
                .or_default()
                .entry(step)
                .or_default()
                .push(accuracy);
        }
        if curves.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "curves file has no data rows".into(),
            });
        }

        // checkpoints present for every model
        let mut checkpoints: Vec<usize> = curves
            .values()
            .next()
            .unwrap()
            .keys()
            .copied()
            .collect();
        checkpoints.retain(|step| curves.values().all(|c| c.contains_key(step)));
        checkpoints.sort_unstable();
        if checkpoints.is_empty() {
            return Err(Error::InvalidParam(
                "no checkpoint step is shared by every model".into(),
            ));
        }

        let mut model_ids = Vec::new();
        let mut accuracy = Vec::new();
        let mut row_repr: Vec<String> = Vec::new();
        for (model, steps) in &curves {
            if average {
                model_ids.push(model.clone());
                row_repr.push(model.clone());
                accuracy.push(
                    checkpoints
                        .iter()
                        .map(|s| {
                            let runs = &steps[s];
                            runs.iter().sum::<f64>() / runs.len() as f64
                        })
                        .collect(),
                );
            } else {
                let runs = checkpoints
                    .iter()
                    .map(|s| steps[s].len())
                    .min()
                    .unwrap_or(0);
                for r in 0..runs {
                    model_ids.push(format!("{model}#{r}"));
                    row_repr.push(model.clone());
                    accuracy.push(checkpoints.iter().map(|s| steps[s][r]).collect());
                }
            }
        }

        let metric_names: Vec<String> = scores
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut metrics = BTreeMap::new();
        for name in metric_names {
            let column: Vec<Option<f64>> = row_repr
                .iter()
                .map(|model| scores.get(model).and_then(|m| m.get(&name)).copied())
                .collect();
            metrics.insert(name, column);
        }
        Ok(ResultsTable {
            model_ids,
            metrics,
            checkpoints,
            accuracy,
        })
    }

    pub fn len(&self) -> usize {
        self.model_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model_ids.is_empty()
    }

    fn checkpoint_pos(&self, step: usize) -> Result<usize> {
        self.checkpoints
            .iter()
            .position(|&s| s == step)
            .ok_or_else(|| Error::InvalidParam(format!("checkpoint {step} absent from table")))
    }

    /// Row order sorted descending by `key` with model-id tie-break.
    fn order_by_desc(&self, key: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            key[b]
                .total_cmp(&key[a])
                .then_with(|| self.model_ids[a].cmp(&self.model_ids[b]))
        });
        order
    }
}

/// Spearman correlation between one metric column and accuracy at every
/// requested checkpoint, over pairwise-complete rows.
pub fn correlate_metric(
    table: &ResultsTable,
    metric: &str,
    checkpoints: &[usize],
) -> Result<Vec<Option<f64>>> {
    let column = table
        .metrics
        .get(metric)
        .ok_or_else(|| Error::InvalidParam(format!("metric column `{metric}` absent")))?;
    let complete: Vec<usize> = (0..table.len()).filter(|&i| column[i].is_some()).collect();
    let xs: Vec<f64> = complete.iter().map(|&i| column[i].unwrap()).collect();
    checkpoints
        .iter()
        .map(|&step| {
            let pos = table.checkpoint_pos(step)?;
            let ys: Vec<f64> = complete.iter().map(|&i| table.accuracy[i][pos]).collect();
            Ok(if xs.len() < 2 {
                None
            } else {
                spearman(&xs, &ys)
            })
        })
        .collect()
}

/// The correlation section: metric x checkpoint matrix of Spearman rho.
pub fn correlate_all(
    table: &ResultsTable,
    metrics: &[String],
    checkpoints: &[usize],
) -> Result<BTreeMap<String, Vec<Option<f64>>>> {
    metrics
        .iter()
        .map(|m| Ok((m.clone(), correlate_metric(table, m, checkpoints)?)))
        .collect()
}

/// Mean-accuracy curves of the four near-equal bins obtained by sorting on a
/// metric (bin 0 = top quartile; earlier bins take the extra rows).
pub fn quartile_curves(
    table: &ResultsTable,
    metric: &str,
    checkpoints: &[usize],
) -> Result<[Vec<f64>; 4]> {
    if table.len() < 4 {
        return Err(Error::InvalidParam(format!(
            "quartile curves need >= 4 rows, have {}",
            table.len()
        )));
    }
    let column = table
        .metrics
        .get(metric)
        .ok_or_else(|| Error::InvalidParam(format!("metric column `{metric}` absent")))?;
    if column.iter().any(|v| v.is_none()) {
        return Err(Error::InvalidParam(format!(
            "metric column `{metric}` incomplete"
        )));
    }
    let key: Vec<f64> = column.iter().map(|v| v.unwrap()).collect();
    let order = table.order_by_desc(&key);
    let n = table.len();
    let base = n / 4;
    let extra = n % 4;
    let mut curves: [Vec<f64>; 4] = Default::default();
    let mut cursor = 0;
    for (q, curve) in curves.iter_mut().enumerate() {
        let size = base + usize::from(q < extra);
        let members = &order[cursor..cursor + size];
        cursor += size;
        *curve = checkpoints
            .iter()
            .map(|&step| {
                let pos = table.checkpoint_pos(step)?;
                Ok(members.iter().map(|&i| table.accuracy[i][pos]).sum::<f64>()
                    / size as f64)
            })
            .collect::<Result<_>>()?;
    }
    Ok(curves)
}

/// Sizes of the four quartile bins for `n` rows (earlier bins get extras).
pub fn quartile_sizes(n: usize) -> [usize; 4] {
    let base = n / 4;
    let extra = n % 4;
    [
        base + usize::from(extra > 0),
        base + usize::from(extra > 1),
        base + usize::from(extra > 2),
        base,
    ]
}

/// Mean accuracy of the top half minus the bottom half per checkpoint
/// (median split on the metric; the top half takes the extra row).
pub fn top_bottom_delta(
    table: &ResultsTable,
    metric: &str,
    checkpoints: &[usize],
) -> Result<Vec<f64>> {
    if table.len() < 2 {
        return Err(Error::InvalidParam("delta needs >= 2 rows".into()));
    }
    let column = table
        .metrics
        .get(metric)
        .ok_or_else(|| Error::InvalidParam(format!("metric column `{metric}` absent")))?;
    if column.iter().any(|v| v.is_none()) {
        return Err(Error::InvalidParam(format!(
            "metric column `{metric}` incomplete"
        )));
    }
    let key: Vec<f64> = column.iter().map(|v| v.unwrap()).collect();
    let order = table.order_by_desc(&key);
    let top_size = table.len().div_ceil(2);
    let (top, bottom) = order.split_at(top_size);
    checkpoints
        .iter()
        .map(|&step| {
            let pos = table.checkpoint_pos(step)?;
            let mean = |rows: &[usize]| {
                rows.iter().map(|&i| table.accuracy[i][pos]).sum::<f64>() / rows.len() as f64
            };
            Ok(mean(top) - mean(bottom))
        })
        .collect()
}

/// Split the table on median final-checkpoint accuracy; the best half takes
/// the extra row. Returns (worst, best).
pub fn split_by_final_accuracy(table: &ResultsTable) -> Result<(ResultsTable, ResultsTable)> {
    let final_pos = table.checkpoints.len() - 1;
    let key: Vec<f64> = table.accuracy.iter().map(|row| row[final_pos]).collect();
    let order = table.order_by_desc(&key);
    let best_size = table.len().div_ceil(2);
    let (best_rows, worst_rows) = order.split_at(best_size);
    let subset = |rows: &[usize]| {
        let mut rows = rows.to_vec();
        rows.sort_by(|&a, &b| table.model_ids[a].cmp(&table.model_ids[b]));
        ResultsTable {
            model_ids: rows.iter().map(|&i| table.model_ids[i].clone()).collect(),
            metrics: table
                .metrics
                .iter()
                .map(|(k, col)| (k.clone(), rows.iter().map(|&i| col[i]).collect()))
                .collect(),
            checkpoints: table.checkpoints.clone(),
            accuracy: rows.iter().map(|&i| table.accuracy[i].clone()).collect(),
        }
    };
    Ok((subset(worst_rows), subset(best_rows)))
}

/// Everything the analysis stage produces, JSON-serializable with stable key
/// order.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelationReport {
    pub models: usize,
    pub checkpoints: Vec<usize>,
    pub correlations: BTreeMap<String, Vec<Option<f64>>>,
    pub quartiles: BTreeMap<String, [Vec<f64>; 4]>,
    pub deltas: BTreeMap<String, Vec<f64>>,
    pub worst_split: SplitSection,
    pub best_split: SplitSection,
}

#[derive(Clone, Debug, Serialize)]
pub struct SplitSection {
    pub models: Vec<String>,
    pub correlations: BTreeMap<String, Vec<Option<f64>>>,
}

/// Run every analysis over all metric columns of the table.
pub fn build_report(table: &ResultsTable) -> Result<CorrelationReport> {
    let metrics: Vec<String> = table.metrics.keys().cloned().collect();
    let checkpoints = table.checkpoints.clone();
    let correlations = correlate_all(table, &metrics, &checkpoints)?;
    let mut quartiles = BTreeMap::new();
    let mut deltas = BTreeMap::new();
    for metric in &metrics {
        let complete = table.metrics[metric].iter().all(|v| v.is_some());
        if complete && table.len() >= 4 {
            quartiles.insert(
                metric.clone(),
                quartile_curves(table, metric, &checkpoints)?,
            );
        }
        if complete && table.len() >= 2 {
            deltas.insert(metric.clone(), top_bottom_delta(table, metric, &checkpoints)?);
        }
    }
    let (worst, best) = split_by_final_accuracy(table)?;
    let split_section = |sub: &ResultsTable| -> Result<SplitSection> {
        Ok(SplitSection {
            models: sub.model_ids.clone(),
            correlations: correlate_all(sub, &metrics, &checkpoints)?,
        })
    };
    let worst_split = split_section(&worst)?;
    let best_split = split_section(&best)?;
    Ok(CorrelationReport {
        models: table.len(),
        checkpoints,
        correlations,
        quartiles,
        deltas,
        worst_split,
        best_split,
    })
}

fn fmt_rho(rho: &Option<f64>) -> String {
    match rho {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

/// Write `report.json` plus one flat CSV per analysis into `dir`.
pub fn write_report<P: AsRef<Path>>(dir: P, report: &CorrelationReport) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("correlations.csv"))?);
    writeln!(out, "metric,step,rho")?;
    for (metric, rhos) in &report.correlations {
        for (step, rho) in report.checkpoints.iter().zip(rhos) {
            writeln!(out, "{metric},{step},{}", fmt_rho(rho))?;
        }
    }
    out.flush()?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("quartiles.csv"))?);
    writeln!(out, "metric,quartile,step,mean_accuracy")?;
    for (metric, curves) in &report.quartiles {
        for (q, curve) in curves.iter().enumerate() {
            for (step, acc) in report.checkpoints.iter().zip(curve) {
                writeln!(out, "{metric},{q},{step},{acc}")?;
            }
        }
    }
    out.flush()?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("deltas.csv"))?);
    writeln!(out, "metric,step,delta")?;
    for (metric, curve) in &report.deltas {
        for (step, delta) in report.checkpoints.iter().zip(curve) {
            writeln!(out, "{metric},{step},{delta}")?;
        }
    }
    out.flush()?;

    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("splits.csv"))?);
    writeln!(out, "split,metric,step,rho")?;
    for (name, section) in [("worst", &report.worst_split), ("best", &report.best_split)] {
        for (metric, rhos) in &section.correlations {
            for (step, rho) in report.checkpoints.iter().zip(rhos) {
                writeln!(out, "{name},{metric},{step},{}", fmt_rho(rho))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
