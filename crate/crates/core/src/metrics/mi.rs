//! Discretized mutual information between code dimensions and factors, and
//! the mutual information gap built on it.
//!
//! Codes are histogram-discretized into equal-width bins over the observed
//! range of each dimension; mutual information and factor entropies are
//! plug-in estimates in nats. The normalized top-two gap cancels the base.

use crate::error::{Error, Result};
use crate::metrics::{finish, full_space, sample_batch, MetricId, MetricParams, MetricScore};
use crate::repr::RepresentationSource;
use crate::rng::SeededRng;

/// Pairwise mutual information (code_dim x factor_count, nats) and factor
/// entropies.
#[derive(Clone, Debug)]
pub struct MiMatrix {
    pub i: Vec<Vec<f64>>,
    pub h: Vec<f64>,
}

/// Equal-width bin index over `[min, max]`, clamped into `0..bins`.
fn bin_of(x: f64, min: f64, width: f64, bins: usize) -> usize {
    (((x - min) / width).floor() as isize).clamp(0, bins as isize - 1) as usize
}

pub fn discretized_mi(
    source: &RepresentationSource,
    rng: &mut SeededRng,
    bins: usize,
    sample_n: usize,
) -> Result<MiMatrix> {
    if bins < 2 {
        return Err(Error::InvalidParam(format!("bins = {bins}, need >= 2")));
    }
    let (assignments, codes) = if sample_n == 0 {
        full_space(source)?
    } else {
        sample_batch(source, rng, sample_n)?
    };
    let n = codes.len();
    let d = source.code_dim();
    let space = source.space();
    let cards = space.cardinalities();

    // factor marginals and entropies
    let mut factor_counts: Vec<Vec<u64>> = cards.iter().map(|&c| vec![0u64; c]).collect();
    for a in &assignments {
        for (k, &v) in a.values.iter().enumerate() {
            factor_counts[k][v as usize] += 1;
        }
    }
    let h: Vec<f64> = factor_counts
        .iter()
        .map(|counts| {
            counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n as f64;
                    -p * p.ln()
                })
                .sum()
        })
        .collect();

    let mut i = vec![vec![0.0; cards.len()]; d];
    for j in 0..d {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for code in &codes {
            min = min.min(code[j]);
            max = max.max(code[j]);
        }
        if !(max > min) {
            continue; // zero-width range: MI row stays 0
        }
        let width = (max - min) / bins as f64;
        let binned: Vec<usize> = codes.iter().map(|c| bin_of(c[j], min, width, bins)).collect();
        let mut bin_counts = vec![0u64; bins];
        for &b in &binned {
            bin_counts[b] += 1;
        }
        for (k, &card) in cards.iter().enumerate() {
            let mut joint = vec![0u64; bins * card];
            for (a, &b) in assignments.iter().zip(&binned) {
                joint[b * card + a.values[k] as usize] += 1;
            }
            let mut mi = 0.0;
            for b in 0..bins {
                for v in 0..card {
                    let c = joint[b * card + v];
                    if c == 0 {
                        continue;
                    }
                    let p = c as f64 / n as f64;
                    let pb = bin_counts[b] as f64 / n as f64;
                    let pv = factor_counts[k][v] as f64 / n as f64;
                    mi += p * (p / (pb * pv)).ln();
                }
            }
            i[j][k] = mi;
        }
    }
    Ok(MiMatrix { i, h })
}

/// Mean over factors of the normalized gap between the two code dimensions
/// with the highest mutual information.
pub fn mig(
    source: &RepresentationSource,
    rng: &mut SeededRng,
    params: &MetricParams,
    seed: u64,
) -> Result<MetricScore> {
    let matrix = discretized_mi(source, rng, params.mi_bins, params.mi_sample)?;
    let mut warnings = Vec::new();
    let mut gaps = Vec::new();
    for (k, &hk) in matrix.h.iter().enumerate() {
        if hk <= 0.0 {
            warnings.push(format!("factor {k} has zero entropy; excluded"));
            continue;
        }
        let mut column: Vec<f64> = matrix.i.iter().map(|row| row[k]).collect();
        column.sort_by(|a, b| b.total_cmp(a));
        let top1 = column.first().copied().unwrap_or(0.0);
        let top2 = column.get(1).copied().unwrap_or(0.0);
        gaps.push((top1 - top2) / hk);
    }
    if gaps.is_empty() {
        warnings.push("no factor with positive entropy".into());
        return Ok(finish(MetricId::Mig, 0.0, params, seed, warnings));
    }
    let value = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(finish(MetricId::Mig, value, params, seed, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{make_space, SpaceId};
    use crate::metrics::test_support::table_source;
    use crate::repr::RepresentationSource;
    use crate::rng::mix64;
    use std::collections::HashMap;

    #[test]
    fn identity_dimension_saturates_factor_entropy() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = table_source(&space, 1, |a| vec![a.values[0] as f64]);
        let m = discretized_mi(&source, &mut SeededRng::new(1), 20, 0).unwrap();
        let ln3 = 3.0f64.ln();
        assert!((m.h[0] - ln3).abs() < 1e-12);
        assert!((m.i[0][0] - ln3).abs() < 1e-12);
        // any unrelated factor carries (exactly) no information
        assert!(m.i[0][1].abs() < 1e-12);
    }

    #[test]
    fn matches_joint_count_enumeration_exactly() {
        // Independent oracle: hash-map joint counting with its own entropy
        // arithmetic, over the full space.
        let space = make_space(SpaceId::DspritesReasoning);
        let source = RepresentationSource::linear_mixed(&space, 0.5, 3).unwrap();
        let m = discretized_mi(&source, &mut SeededRng::new(2), 20, 0).unwrap();

        let codes: Vec<Vec<f64>> = space
            .iter_assignments()
            .map(|a| source.encode(&a).unwrap())
            .collect();
        let n = codes.len() as f64;
        for j in 0..source.code_dim() {
            let min = codes.iter().map(|c| c[j]).fold(f64::INFINITY, f64::min);
            let max = codes.iter().map(|c| c[j]).fold(f64::NEG_INFINITY, f64::max);
            let width = (max - min) / 20.0;
            for (k, f) in space.factors().iter().enumerate() {
                let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
                let mut pb: HashMap<usize, f64> = HashMap::new();
                let mut pv: HashMap<usize, f64> = HashMap::new();
                for (a, c) in space.iter_assignments().zip(&codes) {
                    let b = bin_of(c[j], min, width, 20);
                    let v = a.values[k] as usize;
                    *joint.entry((b, v)).or_default() += 1.0 / n;
                    *pb.entry(b).or_default() += 1.0 / n;
                    *pv.entry(v).or_default() += 1.0 / n;
                }
                let mi: f64 = joint
                    .iter()
                    .map(|(&(b, v), &p)| p * (p / (pb[&b] * pv[&v])).ln())
                    .sum();
                assert!(
                    (m.i[j][k] - mi).abs() < 1e-9,
                    "dim {j} factor {k} ({}): {} vs {}",
                    f.name,
                    m.i[j][k],
                    mi
                );
            }
        }
    }

    #[test]
    fn independent_noise_dimension_carries_almost_no_information() {
        let space = make_space(SpaceId::Shapes3dReasoning);
        let source = table_source(&space, 1, |a| {
            let idx = crate::factor::assignment_index(&space, a).unwrap();
            vec![(mix64(idx, 0x9e) >> 11) as f64 / (1u64 << 53) as f64]
        });
        let m = discretized_mi(&source, &mut SeededRng::new(3), 20, 100_000).unwrap();
        for (k, &mi) in m.i[0].iter().enumerate() {
            assert!(mi <= 0.01, "factor {k}: {mi} nats");
        }
    }

    #[test]
    fn information_bound_holds() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = RepresentationSource::linear_mixed(&space, 0.7, 5).unwrap();
        let m = discretized_mi(&source, &mut SeededRng::new(4), 20, 0).unwrap();
        for row in &m.i {
            for (k, &mi) in row.iter().enumerate() {
                assert!(mi >= 0.0);
                assert!(mi <= m.h[k] + 1e-9);
            }
        }
    }

    #[test]
    fn one_to_one_codes_reach_exactly_one() {
        let space = make_space(SpaceId::DspritesReasoning);
        let params = MetricParams::default();
        for source in [
            RepresentationSource::gt_integer(&space),
            RepresentationSource::permuted_scaled(&space, 9),
        ] {
            let score = mig(&source, &mut SeededRng::new(5), &params, 5).unwrap();
            assert!((score.value - 1.0).abs() < 1e-9, "mig {}", score.value);
        }
    }

    #[test]
    fn duplicated_dimension_zeroes_that_factors_gap() {
        let space = make_space(SpaceId::DspritesReasoning);
        // z0 and z1 both encode factor 0; dims 2..6 encode factors 1..5
        let source = table_source(&space, 7, |a| {
            let mut code = vec![a.values[0] as f64, a.values[0] as f64];
            code.extend(a.values[1..].iter().map(|&v| v as f64));
            code
        });
        let m = discretized_mi(&source, &mut SeededRng::new(6), 20, 0).unwrap();
        let mut col0: Vec<f64> = m.i.iter().map(|row| row[0]).collect();
        col0.sort_by(|a, b| b.total_cmp(a));
        assert!((col0[0] - col0[1]).abs() < 1e-12, "top-two not tied");
        let score = mig(&source, &mut SeededRng::new(6), &MetricParams::default(), 6).unwrap();
        assert!((score.value - 5.0 / 6.0).abs() < 1e-9, "mig {}", score.value);
    }

    #[test]
    fn zero_width_dimension_has_zero_mi_row() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = table_source(&space, 2, |a| vec![0.25, a.values[2] as f64]);
        let m = discretized_mi(&source, &mut SeededRng::new(7), 20, 0).unwrap();
        assert!(m.i[0].iter().all(|&x| x == 0.0));
        assert!(m.i[1][2] > 1.0);
    }

    #[test]
    fn rejects_degenerate_bin_count() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = RepresentationSource::gt_integer(&space);
        assert!(discretized_mi(&source, &mut SeededRng::new(8), 1, 0).is_err());
    }
}
