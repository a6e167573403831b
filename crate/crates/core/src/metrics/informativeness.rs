//! Factor-classification probes on full code vectors: mean held-out accuracy
//! of a logistic regressor or a gradient-boosted tree ensemble across
//! factors.

use crate::error::Result;
use crate::metrics::forest::fit_gbt;
use crate::metrics::linear::fit_logistic;
use crate::metrics::{finish, sample_batch, MetricId, MetricParams, MetricScore};
use crate::repr::RepresentationSource;
use crate::rng::SeededRng;
use rand::RngCore;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeModel {
    Lr,
    Gbt,
}

pub fn informativeness(
    source: &RepresentationSource,
    rng: &mut SeededRng,
    model: ProbeModel,
    params: &MetricParams,
    seed: u64,
) -> Result<MetricScore> {
    let space = source.space();
    let cards = space.cardinalities();
    let (train_a, train_z) = sample_batch(source, rng, params.info_train)?;
    let (test_a, test_z) = sample_batch(source, rng, params.info_test)?;

    let mut accuracy_sum = 0.0;
    for (k, &card) in cards.iter().enumerate() {
        let train_y: Vec<usize> = train_a.iter().map(|a| a.values[k] as usize).collect();
        let test_y: Vec<usize> = test_a.iter().map(|a| a.values[k] as usize).collect();
        let accuracy = match model {
            ProbeModel::Lr => {
                let lr = fit_logistic(&train_z, &train_y, card, rng.next_u64());
                lr.accuracy(&test_z, &test_y)
            }
            ProbeModel::Gbt => {
                let gbt = fit_gbt(
                    &train_z,
                    &train_y,
                    card,
                    params.gbt_rounds,
                    params.gbt_depth,
                    params.gbt_shrinkage,
                );
                let correct = test_z
                    .iter()
                    .zip(&test_y)
                    .filter(|(row, &y)| gbt.predict(row) == y)
                    .count();
                correct as f64 / test_y.len() as f64
            }
        };
        accuracy_sum += accuracy;
    }
    let value = accuracy_sum / cards.len() as f64;
    let metric = match model {
        ProbeModel::Lr => MetricId::LrInformativeness,
        ProbeModel::Gbt => MetricId::GbtInformativeness,
    };
    Ok(finish(metric, value, params, seed, Vec::new()))
}
