//! Intervention-based score with a learned classifier: fix one factor, vary
//! all others, and ask a linear classifier to recover which factor was fixed
//! from the mean absolute code difference of a batch of such pairs.

use crate::error::Result;
use crate::factor::sample_assignment;
use crate::metrics::linear::fit_logistic;
use crate::metrics::{finish, MetricId, MetricParams, MetricScore};
use crate::repr::RepresentationSource;
use crate::rng::SeededRng;
use rand::RngCore;

fn difference_point(
    source: &RepresentationSource,
    rng: &mut SeededRng,
    batch: usize,
) -> Result<(Vec<f64>, usize)> {
    let space = source.space();
    let fixed = rng.index(space.factor_count());
    let mut feature = vec![0.0; source.code_dim()];
    for _ in 0..batch {
        let a1 = sample_assignment(space, rng);
        let mut a2 = sample_assignment(space, rng);
        a2.values[fixed] = a1.values[fixed];
        let z1 = source.encode(&a1)?;
        let z2 = source.encode(&a2)?;
        for (f, (x, y)) in feature.iter_mut().zip(z1.iter().zip(&z2)) {
            *f += (x - y).abs();
        }
    }
    for f in &mut feature {
        *f /= batch as f64;
    }
    Ok((feature, fixed))
}

pub fn betavae_score(
    source: &RepresentationSource,
    rng: &mut SeededRng,
    params: &MetricParams,
    seed: u64,
) -> Result<MetricScore> {
    let classes = source.space().factor_count();
    let mut train_x = Vec::with_capacity(params.bv_train_points);
    let mut train_y = Vec::with_capacity(params.bv_train_points);
    for _ in 0..params.bv_train_points {
        let (x, y) = difference_point(source, rng, params.bv_batch)?;
        train_x.push(x);
        train_y.push(y);
    }
    let mut eval_x = Vec::with_capacity(params.bv_eval_points);
    let mut eval_y = Vec::with_capacity(params.bv_eval_points);
    for _ in 0..params.bv_eval_points {
        let (x, y) = difference_point(source, rng, params.bv_batch)?;
        eval_x.push(x);
        eval_y.push(y);
    }
    let model = fit_logistic(&train_x, &train_y, classes, rng.next_u64());
    let value = model.accuracy(&eval_x, &eval_y);
    Ok(finish(MetricId::BetaVae, value, params, seed, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{make_space, SpaceId};
    use crate::metrics::test_support::constant_source;
    use crate::repr::make_entanglement_ladder;

    fn quick_params() -> MetricParams {
        MetricParams {
            bv_train_points: 1500,
            bv_eval_points: 600,
            ..Default::default()
        }
    }

    #[test]
    fn onehot_codes_are_nearly_perfect() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = crate::repr::RepresentationSource::gt_onehot(&space);
        let score =
            betavae_score(&source, &mut SeededRng::new(1), &quick_params(), 1).unwrap();
        assert!(score.value >= 0.99, "betavae {}", score.value);
    }

    #[test]
    fn constant_codes_score_at_chance() {
        let space = make_space(SpaceId::DspritesReasoning);
        let source = constant_source(&space, 6);
        let params = MetricParams {
            bv_train_points: 1500,
            ..Default::default()
        };
        let score = betavae_score(&source, &mut SeededRng::new(2), &params, 2).unwrap();
        assert!(
            (score.value - 1.0 / 6.0).abs() <= 0.02,
            "betavae {}",
            score.value
        );
    }

    #[test]
    fn fully_mixed_codes_score_below_disentangled() {
        let space = make_space(SpaceId::DspritesReasoning);
        let ladder = make_entanglement_ladder(&space, 2, 11).unwrap();
        let p = quick_params();
        let lo = betavae_score(&ladder[0], &mut SeededRng::new(3), &p, 3).unwrap();
        let hi = betavae_score(&ladder[1], &mut SeededRng::new(3), &p, 3).unwrap();
        assert!(lo.value > hi.value, "{} vs {}", lo.value, hi.value);
    }
}
