//! Random-forest importance matrix and the disentanglement score built on it:
//! one minus the entropy of each code's normalized importance distribution
//! over factors, weighted by the code's share of total importance.

use crate::error::Result;
use crate::metrics::forest::fit_forest;
use crate::metrics::{sample_batch, MetricParams};
use crate::repr::RepresentationSource;
use crate::rng::SeededRng;
use rand::RngCore;

/// code_dim x factor_count matrix of non-negative importances.
#[derive(Clone, Debug)]
pub struct ImportanceMatrix {
    pub r: Vec<Vec<f64>>,
}

/// Fit one forest per factor; column k holds the impurity-decrease
/// importance each code dimension earned predicting factor k.
pub fn dci_importance(
    source: &RepresentationSource,
    rng: &mut SeededRng,
    params: &MetricParams,
) -> Result<(ImportanceMatrix, Vec<String>)> {
    let space = source.space();
    let cards = space.cardinalities();
    let d = source.code_dim();
    let (assignments, codes) = sample_batch(source, rng, params.forest_train)?;

    let mut warnings = Vec::new();
    let mut r = vec![vec![0.0; cards.len()]; d];
    for (k, &card) in cards.iter().enumerate() {
        let labels: Vec<usize> = assignments.iter().map(|a| a.values[k] as usize).collect();
        let mut forest_rng = SeededRng::new(rng.next_u64());
        let forest = fit_forest(
            &codes,
            &labels,
            card,
            params.forest_trees,
            params.forest_depth,
            &mut forest_rng,
        );
        let importances = forest.importances();
        if importances.iter().all(|&v| v == 0.0) {
            warnings.push(format!(
                "factor {k} ({}): degenerate forest, zero importance column",
                space.factors()[k].name
            ));
        }
        for (j, &v) in importances.iter().enumerate() {
            r[j][k] = v;
        }
    }
    Ok((ImportanceMatrix { r }, warnings))
}

/// Weighted per-code disentanglement: rows are normalized to distributions
/// over factors, scored by one minus their entropy in base factor_count, and
/// averaged with weights proportional to row mass. Zero-mass codes are
/// excluded; an all-zero matrix scores 0 with a warning.
pub fn dci_disentanglement(matrix: &ImportanceMatrix) -> (f64, Vec<String>) {
    let factor_count = matrix.r.first().map_or(0, |row| row.len());
    if factor_count < 2 {
        return (0.0, vec!["fewer than two factors".into()]);
    }
    let masses: Vec<f64> = matrix.r.iter().map(|row| row.iter().sum()).collect();
    let total: f64 = masses.iter().sum();
    if total <= 0.0 {
        return (0.0, vec!["all-zero importance matrix".into()]);
    }
    let log_base = (factor_count as f64).ln();
    let mut weighted = 0.0;
    for (row, &mass) in matrix.r.iter().zip(&masses) {
        if mass <= 0.0 {
            continue;
        }
        let entropy: f64 = row
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| {
                let p = v / mass;
                -p * p.ln()
            })
            .sum();
        weighted += mass * (1.0 - entropy / log_base);
    }
    ((weighted / total).clamp(0.0, 1.0), Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{make_space, SpaceId};
    use crate::metrics::test_support::constant_source;
    use crate::repr::RepresentationSource;

    #[test]
    fn ground_truth_codes_concentrate_importance() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = RepresentationSource::gt_integer(&space);
        let (matrix, warnings) =
            dci_importance(&source, &mut SeededRng::new(1), &MetricParams::default()).unwrap();
        assert!(warnings.is_empty());
        for k in 0..6 {
            let column_total: f64 = (0..6).map(|j| matrix.r[j][k]).sum();
            assert!(
                matrix.r[k][k] >= 0.95 * column_total,
                "factor {k}: {} of {}",
                matrix.r[k][k],
                column_total
            );
        }
        let (score, _) = dci_disentanglement(&matrix);
        assert!(score >= 0.95, "dci {score}");
    }

    #[test]
    fn constant_codes_produce_zero_matrix_with_warnings() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = constant_source(&space, 6);
        let (matrix, warnings) =
            dci_importance(&source, &mut SeededRng::new(2), &MetricParams::default()).unwrap();
        assert_eq!(warnings.len(), 6);
        assert!(matrix.r.iter().flatten().all(|&v| v == 0.0));
        let (score, score_warnings) = dci_disentanglement(&matrix);
        assert_eq!(score, 0.0);
        assert!(!score_warnings.is_empty());
    }

    #[test]
    fn permutation_like_matrix_scores_one() {
        let matrix = ImportanceMatrix {
            r: vec![
                vec![0.0, 2.0, 0.0],
                vec![0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        };
        let (score, _) = dci_disentanglement(&matrix);
        assert_eq!(score, 1.0);
    }

    #[test]
    fn uniform_matrix_scores_zero() {
        let matrix = ImportanceMatrix {
            r: vec![vec![0.25; 4]; 3],
        };
        let (score, _) = dci_disentanglement(&matrix);
        assert!(score.abs() < 1e-12);
    }

    #[test]
    fn hand_built_matrix_matches_expanded_formula() {
        // rows: [0.5, 0.5] -> entropy ln2, d = 0, mass 1
        //       [1, 0]     -> d = 1, mass 1
        //       [0, 1]     -> d = 1, mass 1
        // score = (1/3)*0 + (1/3)*1 + (1/3)*1 = 2/3
        let matrix = ImportanceMatrix {
            r: vec![vec![0.5, 0.5], vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let (score, _) = dci_disentanglement(&matrix);
        assert!((score - 2.0 / 3.0).abs() < 1e-12, "{score}");
    }
}
