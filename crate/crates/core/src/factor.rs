//! Factored ground-truth generative spaces and assignments.
//!
//! A [`FactorSpace`] is an ordered list of categorical factors, each with a
//! cardinality and per-value render parameters. The two reasoning spaces are
//! reduced variants of the dSprites and 3dshapes generative models: dSprites
//! drops orientation and gains background shade and object color; both spaces
//! keep only a handful of visually distinguishable values per factor. The
//! `*_full` variants restore the original cardinalities for the factors that
//! were reduced and exist for representation training pipelines that want the
//! denser grid.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Identifier of one of the four shipped factor spaces. These strings appear
/// verbatim in file headers and CLI flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceId {
    #[serde(rename = "dsprites_reasoning")]
    DspritesReasoning,
    #[serde(rename = "dsprites_full")]
    DspritesFull,
    #[serde(rename = "shapes3d_reasoning")]
    Shapes3dReasoning,
    #[serde(rename = "shapes3d_full")]
    Shapes3dFull,
}

impl SpaceId {
    pub const ALL: [SpaceId; 4] = [
        SpaceId::DspritesReasoning,
        SpaceId::DspritesFull,
        SpaceId::Shapes3dReasoning,
        SpaceId::Shapes3dFull,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SpaceId::DspritesReasoning => "dsprites_reasoning",
            SpaceId::DspritesFull => "dsprites_full",
            SpaceId::Shapes3dReasoning => "shapes3d_reasoning",
            SpaceId::Shapes3dFull => "shapes3d_full",
        }
    }

    pub fn is_dsprites(&self) -> bool {
        matches!(self, SpaceId::DspritesReasoning | SpaceId::DspritesFull)
    }
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpaceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dsprites_reasoning" => Ok(SpaceId::DspritesReasoning),
            "dsprites_full" => Ok(SpaceId::DspritesFull),
            "shapes3d_reasoning" => Ok(SpaceId::Shapes3dReasoning),
            "shapes3d_full" => Ok(SpaceId::Shapes3dFull),
            other => Err(Error::UnknownSpace(other.to_string())),
        }
    }
}

/// One categorical factor of variation.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub name: String,
    pub cardinality: usize,
    /// Render parameter per value (shade intensity, hue in degrees, scale, ...).
    pub value_labels: Vec<f64>,
}

impl Factor {
    fn new(name: &str, value_labels: Vec<f64>) -> Self {
        Factor {
            name: name.to_string(),
            cardinality: value_labels.len(),
            value_labels,
        }
    }
}

/// An ordered product of categorical factors.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSpace {
    id: SpaceId,
    factors: Vec<Factor>,
}

/// A point in a factor space: one value index per factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FactorAssignment {
    pub values: Vec<u16>,
}

impl FactorAssignment {
    pub fn new(values: Vec<u16>) -> Self {
        FactorAssignment { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Build one of the four shipped spaces.
pub fn make_space(id: SpaceId) -> FactorSpace {
    // dSprites renders 6 linearly spaced scales on [0.5, 1.0]; the reasoning
    // variant keeps the 3 largest. Positions keep 4 evenly spaced interior
    // values of the unit interval. Background shades pull the endpoints in
    // from pure white/black to preserve object contrast; object hues sit at
    // multiples of 60 degrees.
    let dsprites = |reasoning: bool| {
        vec![
            Factor::new("shape", vec![0.0, 1.0, 2.0]),
            Factor::new(
                "scale",
                if reasoning {
                    vec![0.6, 0.8, 1.0]
                } else {
                    linspace(0.5, 1.0, 6)
                },
            ),
            Factor::new(
                "pos_x",
                if reasoning {
                    vec![0.2, 0.4, 0.6, 0.8]
                } else {
                    linspace(0.0, 1.0, 32)
                },
            ),
            Factor::new(
                "pos_y",
                if reasoning {
                    vec![0.2, 0.4, 0.6, 0.8]
                } else {
                    linspace(0.0, 1.0, 32)
                },
            ),
            Factor::new("bg_shade", vec![0.9, 0.7, 0.5, 0.3, 0.1]),
            Factor::new("obj_color", (0..6).map(|k| 60.0 * k as f64).collect()),
        ]
    };
    // 3dshapes hues cover the circle in 10 steps; 8 original scales on
    // [0.75, 1.25] and 16 azimuths on [-30, 30] degrees, with the reasoning
    // variant keeping every 2nd scale and every 4th azimuth.
    let shapes3d = |reasoning: bool| {
        let hues: Vec<f64> = (0..10).map(|k| 36.0 * k as f64).collect();
        let scale8 = linspace(0.75, 1.25, 8);
        let azimuth16 = linspace(-30.0, 30.0, 16);
        vec![
            Factor::new("floor_hue", hues.clone()),
            Factor::new("wall_hue", hues.clone()),
            Factor::new("obj_hue", hues),
            Factor::new(
                "scale",
                if reasoning {
                    scale8.iter().step_by(2).copied().collect()
                } else {
                    scale8
                },
            ),
            Factor::new("shape", vec![0.0, 1.0, 2.0, 3.0]),
            Factor::new(
                "azimuth",
                if reasoning {
                    azimuth16.iter().step_by(4).copied().collect()
                } else {
                    azimuth16
                },
            ),
        ]
    };
    let factors = match id {
        SpaceId::DspritesReasoning => dsprites(true),
        SpaceId::DspritesFull => dsprites(false),
        SpaceId::Shapes3dReasoning => shapes3d(true),
        SpaceId::Shapes3dFull => shapes3d(false),
    };
    FactorSpace { id, factors }
}

/// Parse a space name and build it; rejects unknown identifiers by name.
pub fn make_space_named(name: &str) -> Result<FactorSpace> {
    Ok(make_space(name.parse()?))
}

impl FactorSpace {
    /// Space with custom factors; tests and synthetic fixtures only.
    #[cfg(test)]
    pub(crate) fn with_factors(id: SpaceId, factors: Vec<Factor>) -> Result<Self> {
        for f in &factors {
            if f.cardinality < 2 {
                return Err(Error::InvalidFactor(format!(
                    "factor `{}` has cardinality {} (need >= 2)",
                    f.name, f.cardinality
                )));
            }
            if f.value_labels.len() != f.cardinality {
                return Err(Error::InvalidFactor(format!(
                    "factor `{}` has {} labels for cardinality {}",
                    f.name,
                    f.value_labels.len(),
                    f.cardinality
                )));
            }
        }
        Ok(FactorSpace { id, factors })
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor_count(&self) -> usize {
        self.factors.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.cardinality).collect()
    }

    /// Number of points in the product space.
    pub fn size(&self) -> u64 {
        self.factors.iter().map(|f| f.cardinality as u64).product()
    }

    pub fn validate(&self, a: &FactorAssignment) -> Result<()> {
        if a.len() != self.factor_count() {
            return Err(Error::ArityMismatch {
                space: self.id.to_string(),
                expected: self.factor_count(),
                actual: a.len(),
            });
        }
        for (f, &v) in self.factors.iter().zip(&a.values) {
            if v as usize >= f.cardinality {
                return Err(Error::FactorOutOfRange {
                    factor: f.name.clone(),
                    value: v as usize,
                    cardinality: f.cardinality,
                });
            }
        }
        Ok(())
    }

    /// Iterate the whole space in flat-index order.
    pub fn iter_assignments(&self) -> impl Iterator<Item = FactorAssignment> + '_ {
        (0..self.size()).map(move |i| assignment_at(self, i).expect("index in range"))
    }
}

/// Draw an assignment with each coordinate independently uniform.
pub fn sample_assignment(space: &FactorSpace, rng: &mut SeededRng) -> FactorAssignment {
    FactorAssignment::new(
        space
            .factors()
            .iter()
            .map(|f| rng.index(f.cardinality) as u16)
            .collect(),
    )
}

/// Mixed-radix flat index, row-major in factor order (first factor is the
/// most significant digit). Bijective onto `[0, space.size())`.
pub fn assignment_index(space: &FactorSpace, a: &FactorAssignment) -> Result<u64> {
    space.validate(a)?;
    let mut idx: u64 = 0;
    for (f, &v) in space.factors().iter().zip(&a.values) {
        idx = idx * f.cardinality as u64 + v as u64;
    }
    Ok(idx)
}

/// Inverse of [`assignment_index`].
pub fn assignment_at(space: &FactorSpace, index: u64) -> Result<FactorAssignment> {
    let size = space.size();
    if index >= size {
        return Err(Error::IndexOutOfRange { index, size });
    }
    let mut values = vec![0u16; space.factor_count()];
    let mut rem = index;
    for (slot, f) in values.iter_mut().zip(space.factors()).rev() {
        let c = f.cardinality as u64;
        *slot = (rem % c) as u16;
        rem /= c;
    }
    Ok(FactorAssignment::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_uniform_ok;

    #[test]
    fn dsprites_reasoning_cardinalities() {
        let s = make_space(SpaceId::DspritesReasoning);
        assert_eq!(s.cardinalities(), vec![3, 3, 4, 4, 5, 6]);
        let names: Vec<_> = s.factors().iter().map(|f| f.name.as_str()).collect();
        assert_eq!(
            names,
            vec!["shape", "scale", "pos_x", "pos_y", "bg_shade", "obj_color"]
        );
        assert!(!names.contains(&"orientation"));
    }

    #[test]
    fn shapes3d_reasoning_cardinalities() {
        let s = make_space(SpaceId::Shapes3dReasoning);
        assert_eq!(s.cardinalities(), vec![10, 10, 10, 4, 4, 4]);
        assert_eq!(s.size(), 64_000);
    }

    #[test]
    fn full_spaces_differ_only_in_listed_factors() {
        let full = make_space(SpaceId::DspritesFull);
        assert_eq!(full.cardinalities(), vec![3, 6, 32, 32, 5, 6]);
        let full3d = make_space(SpaceId::Shapes3dFull);
        assert_eq!(full3d.cardinalities(), vec![10, 10, 10, 8, 4, 16]);
    }

    #[test]
    fn unknown_space_is_rejected_by_name() {
        let err = make_space_named("dsprites").unwrap_err();
        assert!(err.to_string().contains("dsprites"));
    }

    #[test]
    fn zero_rng_samples_all_zero() {
        let s = make_space(SpaceId::DspritesReasoning);
        let a = sample_assignment(&s, &mut SeededRng::zeros());
        assert_eq!(a.values, vec![0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = make_space(SpaceId::DspritesReasoning);
        let a = sample_assignment(&s, &mut SeededRng::new(42));
        let b = sample_assignment(&s, &mut SeededRng::new(42));
        assert_eq!(a, b);
    }

    #[test]
    fn index_of_extremes() {
        let s = make_space(SpaceId::DspritesReasoning);
        let zero = FactorAssignment::new(vec![0; 6]);
        assert_eq!(assignment_index(&s, &zero).unwrap(), 0);
        let last = FactorAssignment::new(vec![2, 2, 3, 3, 4, 5]);
        assert_eq!(assignment_index(&s, &last).unwrap(), 4319);
    }

    #[test]
    fn out_of_range_names_the_factor() {
        let s = make_space(SpaceId::DspritesReasoning);
        let bad = FactorAssignment::new(vec![0, 0, 0, 0, 9, 0]);
        let err = assignment_index(&s, &bad).unwrap_err();
        assert!(err.to_string().contains("bg_shade"), "{err}");
    }

    #[test]
    fn round_trip_random_indices() {
        let s = make_space(SpaceId::Shapes3dReasoning);
        let mut rng = SeededRng::new(11);
        for _ in 0..1000 {
            let idx = rng.gen_range(0..s.size());
            let a = assignment_at(&s, idx).unwrap();
            assert_eq!(assignment_index(&s, &a).unwrap(), idx);
        }
    }

    #[test]
    fn index_is_a_bijection_exhaustively() {
        let s = make_space(SpaceId::DspritesReasoning);
        let mut seen = vec![false; s.size() as usize];
        for a in s.iter_assignments() {
            let idx = assignment_index(&s, &a).unwrap() as usize;
            assert!(!seen[idx]);
            seen[idx] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn marginals_are_uniform() {
        let s = make_space(SpaceId::DspritesReasoning);
        let mut rng = SeededRng::new(2024);
        let n = 100_000;
        let mut counts: Vec<Vec<u64>> =
            s.cardinalities().iter().map(|&c| vec![0u64; c]).collect();
        for _ in 0..n {
            let a = sample_assignment(&s, &mut rng);
            for (k, &v) in a.values.iter().enumerate() {
                counts[k][v as usize] += 1;
            }
        }
        for (k, c) in counts.iter().enumerate() {
            assert!(
                chi_square_uniform_ok(c),
                "factor {k} failed chi-square: {c:?}"
            );
        }
    }

    use rand::Rng;
}
