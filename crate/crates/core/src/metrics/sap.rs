//! Separated attribute predictability: the gap between the two code
//! dimensions that best predict each factor on their own.
//!
//! The per-dimension predictor is a multi-cut threshold rule (an equal-width
//! histogram over the training range with a balanced majority label per bin).
//! Entries are chance-adjusted balanced accuracies, so an uninformative
//! dimension scores 0 regardless of factor cardinality.

use crate::error::Result;
use crate::metrics::{finish, sample_batch, MetricId, MetricParams, MetricScore};
use crate::repr::RepresentationSource;
use crate::rng::SeededRng;

/// Chance-adjusted balanced accuracy of the best single-dimension threshold
/// rule, for every (code dimension, factor) pair.
pub(crate) fn score_matrix(
    source: &RepresentationSource,
    rng: &mut SeededRng,
    params: &MetricParams,
) -> Result<Vec<Vec<f64>>> {
    let space = source.space();
    let cards = space.cardinalities();
    let d = source.code_dim();
    let (train_a, train_z) = sample_batch(source, rng, params.sap_train)?;
    let (test_a, test_z) = sample_batch(source, rng, params.sap_test)?;
    let bins = params.sap_bins;

    let mut matrix = vec![vec![0.0; cards.len()]; d];
    for j in 0..d {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for z in &train_z {
            min = min.min(z[j]);
            max = max.max(z[j]);
        }
        if !(max > min) {
            continue; // constant dimension predicts nothing
        }
        let width = (max - min) / bins as f64;
        let bin_of = |x: f64| -> usize {
            (((x - min) / width).floor() as isize).clamp(0, bins as isize - 1) as usize
        };
        for (k, &card) in cards.iter().enumerate() {
            let mut counts = vec![0u64; bins * card];
            let mut class_totals = vec![0u64; card];
            for (a, z) in train_a.iter().zip(&train_z) {
                let v = a.values[k] as usize;
                counts[bin_of(z[j]) * card + v] += 1;
                class_totals[v] += 1;
            }
            // balanced majority per bin: argmax of count/class_total
            let rule: Vec<usize> = (0..bins)
                .map(|b| {
                    let mut best = 0usize;
                    let mut best_rate = -1.0;
                    for v in 0..card {
                        let rate = if class_totals[v] > 0 {
                            counts[b * card + v] as f64 / class_totals[v] as f64
                        } else {
                            0.0
                        };
                        if rate > best_rate {
                            best_rate = rate;
                            best = v;
                        }
                    }
                    best
                })
                .collect();
            let mut correct = vec![0u64; card];
            let mut totals = vec![0u64; card];
            for (a, z) in test_a.iter().zip(&test_z) {
                let v = a.values[k] as usize;
                totals[v] += 1;
                if rule[bin_of(z[j])] == v {
                    correct[v] += 1;
                }
            }
            let mut recall_sum = 0.0;
            let mut present = 0usize;
            for v in 0..card {
                if totals[v] > 0 {
                    recall_sum += correct[v] as f64 / totals[v] as f64;
                    present += 1;
                }
            }
            if present == 0 {
                continue;
            }
            let balanced = recall_sum / present as f64;
            let chance = 1.0 / card as f64;
            matrix[j][k] = ((balanced - chance) / (1.0 - chance)).max(0.0);
        }
    }
    Ok(matrix)
}

pub fn sap_score(
    source: &RepresentationSource,
    rng: &mut SeededRng,
    params: &MetricParams,
    seed: u64,
) -> Result<MetricScore> {
    let matrix = score_matrix(source, rng, params)?;
    let factor_count = source.space().factor_count();
    let mut gap_sum = 0.0;
    for k in 0..factor_count {
        let mut column: Vec<f64> = matrix.iter().map(|row| row[k]).collect();
        column.sort_by(|a, b| b.total_cmp(a));
        let top1 = column.first().copied().unwrap_or(0.0);
        let top2 = column.get(1).copied().unwrap_or(0.0);
        gap_sum += top1 - top2;
    }
    let value = gap_sum / factor_count as f64;
    Ok(finish(MetricId::Sap, value, params, seed, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{make_space, SpaceId};
    use crate::metrics::test_support::{constant_source, table_source};
    use crate::repr::RepresentationSource;

    #[test]
    fn permuted_scaled_codes_have_perfect_separated_predictors() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = RepresentationSource::permuted_scaled(&space, 4);
        let params = MetricParams::default();
        let mut rng = SeededRng::new(1);
        let matrix = score_matrix(&source, &mut rng, &params).unwrap();
        for k in 0..6 {
            let mut column: Vec<f64> = matrix.iter().map(|row| row[k]).collect();
            column.sort_by(|a, b| b.total_cmp(a));
            assert!(column[0] >= 0.99, "factor {k} top1 {}", column[0]);
            assert!(column[1] <= 0.05, "factor {k} top2 {}", column[1]);
        }
        let score = sap_score(&source, &mut SeededRng::new(1), &params, 1).unwrap();
        assert!(score.value >= 0.75, "sap {}", score.value);
    }

    #[test]
    fn duplicated_informative_dimension_collapses_the_gap() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = table_source(&space, 7, |a| {
            let mut code = vec![a.values[0] as f64, a.values[0] as f64];
            code.extend(a.values[1..].iter().map(|&v| v as f64));
            code
        });
        let params = MetricParams::default();
        let matrix = score_matrix(&source, &mut SeededRng::new(2), &params).unwrap();
        let mut col0: Vec<f64> = matrix.iter().map(|row| row[0]).collect();
        col0.sort_by(|a, b| b.total_cmp(a));
        assert!((col0[0] - col0[1]).abs() <= 0.02, "gap {:?}", &col0[..2]);
        let score = sap_score(&source, &mut SeededRng::new(2), &params, 2).unwrap();
        assert!((score.value - 5.0 / 6.0).abs() <= 0.03, "sap {}", score.value);
    }

    #[test]
    fn constant_codes_score_near_zero() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = constant_source(&space, 6);
        let score =
            sap_score(&source, &mut SeededRng::new(3), &MetricParams::default(), 3).unwrap();
        assert!(score.value <= 0.02, "sap {}", score.value);
    }
}
