//! Disentanglement metrics and factor-classification probes.
//!
//! Five disentanglement scores (intervention-based BetaVAE and FactorVAE
//! scores, mutual-information gap, separated attribute predictability, and
//! random-forest importance disentanglement) plus logistic-regression and
//! gradient-boosted-tree informativeness probes. All metrics operate on a
//! [`RepresentationSource`], return values in [0, 1], and are deterministic
//! given (source, params, seed). Every hyperparameter is carried in
//! [`MetricParams`] and hashed into the score's `params_digest`.

mod betavae;
mod dci;
mod factorvae;
mod forest;
mod informativeness;
mod linear;
mod mi;
mod sap;

pub use betavae::betavae_score;
pub use dci::{dci_disentanglement, dci_importance, ImportanceMatrix};
pub use factorvae::factorvae_score;
pub use informativeness::{informativeness, ProbeModel};
pub use mi::{discretized_mi, mig, MiMatrix};
pub use sap::sap_score;

use crate::error::{Error, Result};
use crate::factor::{sample_assignment, FactorAssignment};
use crate::repr::RepresentationSource;
use crate::rng::{mix64, SeededRng, RNG_ALGORITHM};
use sha2::{Digest, Sha256};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricId {
    BetaVae,
    FactorVae,
    Mig,
    Sap,
    DciDisentanglement,
    LrInformativeness,
    GbtInformativeness,
}

impl MetricId {
    pub const ALL: [MetricId; 7] = [
        MetricId::BetaVae,
        MetricId::FactorVae,
        MetricId::Mig,
        MetricId::Sap,
        MetricId::DciDisentanglement,
        MetricId::LrInformativeness,
        MetricId::GbtInformativeness,
    ];

    /// The five disentanglement metrics proper (probes excluded).
    pub const DISENTANGLEMENT: [MetricId; 5] = [
        MetricId::BetaVae,
        MetricId::FactorVae,
        MetricId::Mig,
        MetricId::Sap,
        MetricId::DciDisentanglement,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricId::BetaVae => "beta_vae",
            MetricId::FactorVae => "factor_vae",
            MetricId::Mig => "mig",
            MetricId::Sap => "sap",
            MetricId::DciDisentanglement => "dci_disentanglement",
            MetricId::LrInformativeness => "lr_informativeness",
            MetricId::GbtInformativeness => "gbt_informativeness",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| Error::InvalidParam(format!("unknown metric `{s}`")))
    }
}

/// A named score in [0, 1] with its parameter digest.
#[derive(Clone, Debug)]
pub struct MetricScore {
    pub metric: MetricId,
    pub value: f64,
    pub params_digest: String,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Every metric hyperparameter, surfaced and digest-hashed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricParams {
    pub bv_train_points: usize,
    pub bv_eval_points: usize,
    pub bv_batch: usize,
    pub fv_train_votes: usize,
    pub fv_eval_votes: usize,
    pub fv_batch: usize,
    pub fv_variance_floor: f64,
    pub mi_bins: usize,
    /// 0 means exhaustive full-space evaluation.
    pub mi_sample: usize,
    pub sap_train: usize,
    pub sap_test: usize,
    pub sap_bins: usize,
    pub forest_trees: usize,
    pub forest_depth: usize,
    pub forest_train: usize,
    pub info_train: usize,
    pub info_test: usize,
    pub gbt_rounds: usize,
    pub gbt_depth: usize,
    pub gbt_shrinkage: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            bv_train_points: 10_000,
            bv_eval_points: 5_000,
            bv_batch: 64,
            fv_train_votes: 10_000,
            fv_eval_votes: 5_000,
            fv_batch: 64,
            fv_variance_floor: 1e-6,
            mi_bins: 20,
            mi_sample: 0,
            sap_train: 10_000,
            sap_test: 5_000,
            sap_bins: 20,
            forest_trees: 10,
            forest_depth: 8,
            forest_train: 8_000,
            info_train: 10_000,
            info_test: 5_000,
            gbt_rounds: 100,
            gbt_depth: 3,
            gbt_shrinkage: 0.1,
        }
    }
}

impl MetricParams {
    /// Scale down every sampling budget; quick pipelines and smoke tests.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |n: usize| ((n as f64 * factor) as usize).max(32);
        MetricParams {
            bv_train_points: s(self.bv_train_points),
            bv_eval_points: s(self.bv_eval_points),
            fv_train_votes: s(self.fv_train_votes),
            fv_eval_votes: s(self.fv_eval_votes),
            sap_train: s(self.sap_train),
            sap_test: s(self.sap_test),
            forest_train: s(self.forest_train),
            info_train: s(self.info_train),
            info_test: s(self.info_test),
            ..*self
        }
    }

    fn relevant_knobs(&self, metric: MetricId) -> String {
        match metric {
            MetricId::BetaVae => format!(
                "train_points={},eval_points={},batch={}",
                self.bv_train_points, self.bv_eval_points, self.bv_batch
            ),
            MetricId::FactorVae => format!(
                "votes={},eval_votes={},batch={},variance_floor={}",
                self.fv_train_votes, self.fv_eval_votes, self.fv_batch, self.fv_variance_floor
            ),
            MetricId::Mig => format!("bins={},sample_n={}", self.mi_bins, self.mi_sample),
            MetricId::Sap => format!(
                "train_n={},test_n={},bins={}",
                self.sap_train, self.sap_test, self.sap_bins
            ),
            MetricId::DciDisentanglement => format!(
                "trees={},max_depth={},train_n={}",
                self.forest_trees, self.forest_depth, self.forest_train
            ),
            MetricId::LrInformativeness => {
                format!("train_n={},test_n={}", self.info_train, self.info_test)
            }
            MetricId::GbtInformativeness => format!(
                "train_n={},test_n={},rounds={},depth={},shrinkage={}",
                self.info_train, self.info_test, self.gbt_rounds, self.gbt_depth,
                self.gbt_shrinkage
            ),
        }
    }

    /// Digest uniquely identifying metric, hyperparameters, and seed.
    pub fn digest(&self, metric: MetricId, seed: u64) -> String {
        let desc = format!(
            "{}|{}|seed={}|{}",
            metric,
            self.relevant_knobs(metric),
            seed,
            RNG_ALGORITHM
        );
        let hash = Sha256::digest(desc.as_bytes());
        hash.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn finish(
    metric: MetricId,
    value: f64,
    params: &MetricParams,
    seed: u64,
    warnings: Vec<String>,
) -> MetricScore {
    MetricScore {
        metric,
        value: value.clamp(0.0, 1.0),
        params_digest: params.digest(metric, seed),
        seed,
        warnings,
    }
}

/// Uniformly sampled assignments with their codes.
pub(crate) fn sample_batch(
    source: &RepresentationSource,
    rng: &mut SeededRng,
    n: usize,
) -> Result<(Vec<FactorAssignment>, Vec<Vec<f64>>)> {
    let mut assignments = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n);
    for _ in 0..n {
        let a = sample_assignment(source.space(), rng);
        codes.push(source.encode(&a)?);
        assignments.push(a);
    }
    Ok((assignments, codes))
}

/// Every assignment of the space, in flat-index order, with codes.
pub(crate) fn full_space(
    source: &RepresentationSource,
) -> Result<(Vec<FactorAssignment>, Vec<Vec<f64>>)> {
    let space = source.space();
    let mut assignments = Vec::with_capacity(space.size() as usize);
    let mut codes = Vec::with_capacity(space.size() as usize);
    for a in space.iter_assignments() {
        codes.push(source.encode(&a)?);
        assignments.push(a);
    }
    Ok((assignments, codes))
}

/// Evaluate one metric. Each metric owns an rng derived from (seed, metric).
pub fn evaluate_metric(
    metric: MetricId,
    source: &RepresentationSource,
    seed: u64,
    params: &MetricParams,
) -> Result<MetricScore> {
    let tag = MetricId::ALL.iter().position(|&m| m == metric).unwrap() as u64;
    let mut rng = SeededRng::new(mix64(seed, 0xe7a1 + tag));
    match metric {
        MetricId::BetaVae => betavae_score(source, &mut rng, params, seed),
        MetricId::FactorVae => factorvae_score(source, &mut rng, params, seed),
        MetricId::Mig => mig(source, &mut rng, params, seed),
        MetricId::Sap => sap_score(source, &mut rng, params, seed),
        MetricId::DciDisentanglement => {
            let (matrix, mut warnings) = dci_importance(source, &mut rng, params)?;
            let (value, more) = dci_disentanglement(&matrix);
            warnings.extend(more);
            Ok(finish(metric, value, params, seed, warnings))
        }
        MetricId::LrInformativeness => {
            informativeness(source, &mut rng, ProbeModel::Lr, params, seed)
        }
        MetricId::GbtInformativeness => {
            informativeness(source, &mut rng, ProbeModel::Gbt, params, seed)
        }
    }
}

/// Evaluate several metrics under one user-facing seed.
pub fn evaluate_metrics(
    metrics: &[MetricId],
    source: &RepresentationSource,
    seed: u64,
    params: &MetricParams,
) -> Result<Vec<MetricScore>> {
    metrics
        .iter()
        .map(|&m| evaluate_metric(m, source, seed, params))
        .collect()
}

/// Append score rows (`model_id,metric,value,params_digest,seed`); writes the
/// header when the file is empty or new.
pub fn write_scores_csv<P: AsRef<Path>>(
    path: P,
    model_id: &str,
    scores: &[MetricScore],
) -> Result<()> {
    let path = path.as_ref();
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let mut out = std::io::BufWriter::new(
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?,
    );
    if fresh {
        writeln!(out, "model_id,metric,value,params_digest,seed")?;
    }
    for s in scores {
        writeln!(
            out,
            "{},{},{},{},{}",
            model_id, s.metric, s.value, s.params_digest, s.seed
        )?;
    }
    out.flush()?;
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_distinguish_metric_params_and_seed() {
        let p = MetricParams::default();
        let a = p.digest(MetricId::Mig, 1);
        let b = p.digest(MetricId::Mig, 2);
        let c = p.digest(MetricId::Sap, 1);
        let mut q = p;
        q.mi_bins = 30;
        let d = q.digest(MetricId::Mig, 1);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_eq!(a, p.digest(MetricId::Mig, 1));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in MetricId::ALL {
            assert_eq!(m.as_str().parse::<MetricId>().unwrap(), m);
        }
        assert!("nope".parse::<MetricId>().is_err());
    }

    #[test]
    fn scores_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let score = MetricScore {
            metric: MetricId::Mig,
            value: 0.5,
            params_digest: "abc123".into(),
            seed: 7,
            warnings: vec![],
        };
        write_scores_csv(&path, "model0", &[score]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "model_id,metric,value,params_digest,seed\nmodel0,mig,0.5,abc123,7\n"
        );
    }
}
