//! Raven-style matrix instance generation.
//!
//! An instance is a 3x3 grid of panels with the bottom-right panel missing
//! plus six candidate answers. The hidden rule is the AND relation: a set of
//! 1-3 factors is held constant within each row (rows may use different
//! values). Generation follows a four-step procedure: sample how many factors
//! are fixed, sample which ones, sample their per-row values, then fill every
//! non-fixed factor with values rejected until they are not constant within
//! both of the first two rows. Distractors start from the correct answer and
//! resample the non-fixed factors plus one uniformly chosen fixed factor
//! until the row-3 relation breaks.

use crate::error::{Error, Result};
use crate::factor::{FactorAssignment, FactorSpace, SpaceId};
use crate::rng::SeededRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

/// Rejection-loop cap for every sampling stage.
pub const REJECTION_CAP: usize = 10_000;

/// The AND relation of one instance: which factors are fixed and the value
/// each takes in each row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSpec {
    /// Fixed factor indices, sorted ascending, 1-3 of them, no duplicates.
    pub fixed_factors: Vec<usize>,
    /// 3 rows x fixed_factors.len() values.
    pub row_values: Vec<Vec<u16>>,
}

impl RelationSpec {
    pub fn validate(&self, space: &FactorSpace) -> Result<()> {
        let k = self.fixed_factors.len();
        if !(1..=3).contains(&k) {
            return Err(Error::InvalidRelation(format!("{k} fixed factors")));
        }
        let distinct: BTreeSet<_> = self.fixed_factors.iter().collect();
        if distinct.len() != k {
            return Err(Error::InvalidRelation("duplicate fixed factor".into()));
        }
        if self.row_values.len() != 3 {
            return Err(Error::InvalidRelation("need 3 rows of values".into()));
        }
        for row in &self.row_values {
            if row.len() != k {
                return Err(Error::InvalidRelation("ragged row values".into()));
            }
            for (&f, &v) in self.fixed_factors.iter().zip(row) {
                let card = space
                    .factors()
                    .get(f)
                    .ok_or_else(|| Error::InvalidRelation(format!("factor index {f}")))?
                    .cardinality;
                if v as usize >= card {
                    return Err(Error::FactorOutOfRange {
                        factor: space.factors()[f].name.clone(),
                        value: v as usize,
                        cardinality: card,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One generated task instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RpmInstance {
    pub space: SpaceId,
    pub seed: u64,
    #[serde(flatten)]
    pub relation: RelationSpec,
    /// 8 context panels, row-major, bottom-right absent.
    pub context: Vec<FactorAssignment>,
    /// 6 candidate answers.
    pub answers: Vec<FactorAssignment>,
    pub correct_index: usize,
}

impl RpmInstance {
    pub fn correct_answer(&self) -> &FactorAssignment {
        &self.answers[self.correct_index]
    }

    /// Structural validity (arity, ranges, counts).
    pub fn validate(&self, space: &FactorSpace) -> Result<()> {
        self.relation.validate(space)?;
        if self.context.len() != 8 {
            return Err(Error::PanelCount {
                expected: 8,
                actual: self.context.len(),
            });
        }
        if self.answers.len() != 6 {
            return Err(Error::PanelCount {
                expected: 6,
                actual: self.answers.len(),
            });
        }
        if self.correct_index >= 6 {
            return Err(Error::InvalidRelation(format!(
                "correct_index {} out of range",
                self.correct_index
            )));
        }
        for a in self.context.iter().chain(&self.answers) {
            space.validate(a)?;
        }
        Ok(())
    }
}

/// Sample the AND relation: |fixed| uniform over {1,2,3}, the factor subset
/// uniform without replacement, each row value uniform per factor per row.
pub fn sample_relation(space: &FactorSpace, rng: &mut SeededRng) -> RelationSpec {
    let size = 1 + rng.index(3);
    let fixed_factors = rng.subset(space.factor_count(), size);
    let row_values = (0..3)
        .map(|_| {
            fixed_factors
                .iter()
                .map(|&f| rng.index(space.factors()[f].cardinality) as u16)
                .collect()
        })
        .collect();
    RelationSpec {
        fixed_factors,
        row_values,
    }
}

fn is_fixed(relation: &RelationSpec, factor: usize) -> Option<usize> {
    relation.fixed_factors.iter().position(|&f| f == factor)
}

/// Fill the full 3x3 solution grid (including the true bottom-right panel).
///
/// Fixed factors take their row values; every non-fixed factor's 9 values are
/// resampled as a set until they are not (constant within row 1 AND constant
/// within row 2).
pub fn sample_solution_grid(
    space: &FactorSpace,
    relation: &RelationSpec,
    rng: &mut SeededRng,
) -> Result<Vec<FactorAssignment>> {
    relation.validate(space)?;
    let k = space.factor_count();
    let mut grid = vec![FactorAssignment::new(vec![0u16; k]); 9];
    for (slot, &f) in relation.fixed_factors.iter().enumerate() {
        for (cell, panel) in grid.iter_mut().enumerate() {
            panel.values[f] = relation.row_values[cell / 3][slot];
        }
    }
    for f in 0..k {
        if is_fixed(relation, f).is_some() {
            continue;
        }
        let card = space.factors()[f].cardinality;
        let mut accepted = false;
        for _ in 0..REJECTION_CAP {
            let vals: Vec<u16> = (0..9).map(|_| rng.index(card) as u16).collect();
            let row1_const = vals[0] == vals[1] && vals[1] == vals[2];
            let row2_const = vals[3] == vals[4] && vals[4] == vals[5];
            if row1_const && row2_const {
                continue;
            }
            for (panel, &v) in grid.iter_mut().zip(&vals) {
                panel.values[f] = v;
            }
            accepted = true;
            break;
        }
        if !accepted {
            return Err(Error::GenerationCap {
                stage: "solution_grid",
                seed: rng.seed(),
            });
        }
    }
    Ok(grid)
}

/// Whether `candidate` keeps every fixed factor at its row-3 value.
fn satisfies_row3(relation: &RelationSpec, candidate: &FactorAssignment) -> bool {
    relation
        .fixed_factors
        .iter()
        .zip(&relation.row_values[2])
        .all(|(&f, &v)| candidate.values[f] == v)
}

/// Sample the 5 distractors. Each starts from the correct answer panel,
/// resamples one uniformly chosen fixed factor and all non-fixed factors,
/// and repeats until the row-3 relation is broken; distractors are pairwise
/// distinct and distinct from the correct answer.
pub fn sample_distractors(
    space: &FactorSpace,
    relation: &RelationSpec,
    solution_grid: &[FactorAssignment],
    rng: &mut SeededRng,
) -> Result<Vec<FactorAssignment>> {
    let correct = &solution_grid[8];
    let mut distractors: Vec<FactorAssignment> = Vec::with_capacity(5);
    while distractors.len() < 5 {
        let mut accepted = false;
        for _ in 0..REJECTION_CAP {
            let mut candidate = correct.clone();
            let slot = rng.index(relation.fixed_factors.len());
            let f = relation.fixed_factors[slot];
            candidate.values[f] = rng.index(space.factors()[f].cardinality) as u16;
            for g in 0..space.factor_count() {
                if is_fixed(relation, g).is_none() {
                    candidate.values[g] = rng.index(space.factors()[g].cardinality) as u16;
                }
            }
            if satisfies_row3(relation, &candidate) {
                continue;
            }
            if candidate == *correct || distractors.contains(&candidate) {
                continue;
            }
            distractors.push(candidate);
            accepted = true;
            break;
        }
        if !accepted {
            return Err(Error::GenerationCap {
                stage: "distractors",
                seed: rng.seed(),
            });
        }
    }
    Ok(distractors)
}

fn assemble(
    space: &FactorSpace,
    relation: &RelationSpec,
    rng: &mut SeededRng,
) -> Result<(Vec<FactorAssignment>, Vec<FactorAssignment>, usize)> {
    let grid = sample_solution_grid(space, relation, rng)?;
    let distractors = sample_distractors(space, relation, &grid, rng)?;
    let correct_index = rng.index(6);
    let mut answers = distractors;
    answers.insert(correct_index, grid[8].clone());
    Ok((grid[..8].to_vec(), answers, correct_index))
}

pub(crate) fn generate_with_relation(
    space: &FactorSpace,
    relation: RelationSpec,
    seed: u64,
    rng: &mut SeededRng,
) -> Result<RpmInstance> {
    let (context, answers, correct_index) = assemble(space, &relation, rng)?;
    Ok(RpmInstance {
        space: space.id(),
        seed,
        relation,
        context,
        answers,
        correct_index,
    })
}

/// Generate one instance from a seed. Pure in (space, seed, strict).
///
/// With `strict` set, the instance is additionally verified to admit exactly
/// one relation-consistent answer under [`check_consistency`] and is
/// regenerated otherwise.
pub fn generate_instance(space: &FactorSpace, seed: u64, strict: bool) -> Result<RpmInstance> {
    let mut rng = SeededRng::new(seed);
    for _ in 0..REJECTION_CAP {
        let relation = sample_relation(space, &mut rng);
        let instance = generate_with_relation(space, relation, seed, &mut rng)?;
        if !strict {
            return Ok(instance);
        }
        let consistent = instance
            .answers
            .iter()
            .filter(|a| check_consistency(space, &instance.context, a).0)
            .count();
        if consistent == 1 {
            return Ok(instance);
        }
    }
    Err(Error::GenerationCap {
        stage: "strict_uniqueness",
        seed,
    })
}

/// Solver-side consistency check.
///
/// Computes the witness set S* of factors constant within row 1 and within
/// row 2 of the context; `candidate` is consistent iff every factor in S* is
/// also constant across (row-3 panel 1, row-3 panel 2, candidate).
pub fn check_consistency(
    space: &FactorSpace,
    context: &[FactorAssignment],
    candidate: &FactorAssignment,
) -> (bool, BTreeSet<usize>) {
    assert_eq!(context.len(), 8, "need 8 context panels");
    let mut witness = BTreeSet::new();
    let mut consistent = true;
    for f in 0..space.factor_count() {
        let row1 = context[0].values[f] == context[1].values[f]
            && context[1].values[f] == context[2].values[f];
        let row2 = context[3].values[f] == context[4].values[f]
            && context[4].values[f] == context[5].values[f];
        if row1 && row2 {
            witness.insert(f);
            let row3 = context[6].values[f] == context[7].values[f]
                && context[7].values[f] == candidate.values[f];
            if !row3 {
                consistent = false;
            }
        }
    }
    (consistent, witness)
}

/// Write instances as JSON lines.
pub fn write_instances_jsonl<P: AsRef<Path>>(path: P, instances: &[RpmInstance]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read instances from JSON lines, with line numbers on parse errors.
pub fn read_instances_jsonl<P: AsRef<Path>>(path: P) -> Result<Vec<RpmInstance>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut instances = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: RpmInstance = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        instances.push(inst);
    }
    Ok(instances)
}
