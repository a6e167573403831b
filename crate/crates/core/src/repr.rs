//! Representation sources: mappings from factor assignments to code vectors.
//!
//! Four oracle families plus ingestion of externally trained codes:
//!
//! * `gt_integer` - factor indices rescaled to [0, 1] per factor;
//! * `gt_onehot` - concatenated one-hot blocks;
//! * `permuted_scaled` - a fixed random permutation and per-dimension nonzero
//!   scale applied to `gt_integer` (still perfectly disentangled);
//! * `linear_mixed(alpha)` - `gt_integer` codes multiplied by the
//!   row-renormalized matrix `(1-alpha) I + alpha Q` for a fixed random
//!   orthogonal `Q`, interpolating from perfectly disentangled (alpha = 0) to
//!   fully linearly mixed (alpha = 1) without losing factor information;
//! * `external` - a table loaded from a CSV keyed by flat assignment index.

use crate::error::{Error, Result};
use crate::factor::{assignment_at, assignment_index, make_space, FactorAssignment, FactorSpace, SpaceId};
use crate::rng::{mix64, SeededRng};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

/// Pearson-correlation ceiling enforced on the fully mixed codes: at
/// alpha = 1 no single code dimension may explain any single factor.
const MIX_CORRELATION_BOUND: f64 = 0.9;

/// A (assignment -> code vector) table keyed by flat index.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationTable {
    pub space: SpaceId,
    pub code_dim: usize,
    rows: BTreeMap<u64, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ExternalManifest {
    space: SpaceId,
    code_dim: usize,
}

impl RepresentationTable {
    pub fn new(space: SpaceId, code_dim: usize) -> Self {
        RepresentationTable {
            space,
            code_dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, index: u64, code: Vec<f64>) -> Result<()> {
        if code.len() != self.code_dim {
            return Err(Error::InvalidParam(format!(
                "code length {} != code_dim {}",
                code.len(),
                self.code_dim
            )));
        }
        self.rows.insert(index, code);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, index: u64) -> Option<&Vec<f64>> {
        self.rows.get(&index)
    }

    /// True when every assignment of the space has a row.
    pub fn covers(&self, space: &FactorSpace) -> bool {
        self.rows.len() as u64 == space.size()
    }

    fn manifest_path(path: &Path) -> PathBuf {
        path.with_extension("manifest.json")
    }

    /// Write the CSV (`f0,...,f{K-1},z0,...,z{d-1}`) plus its sidecar
    /// manifest naming the space.
    pub fn save_external<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let space = make_space(self.space);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (0..space.factor_count())
            .map(|k| format!("f{k}"))
            .chain((0..self.code_dim).map(|d| format!("z{d}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (&index, code) in &self.rows {
            let a = assignment_at(&space, index)?;
            let mut fields: Vec<String> =
                a.values.iter().map(|v| v.to_string()).collect();
            fields.extend(code.iter().map(|z| format!("{z}")));
            writeln!(out, "{}", fields.join(","))?;
        }
        out.flush()?;
        let manifest = ExternalManifest {
            space: self.space,
            code_dim: self.code_dim,
        };
        std::fs::write(
            Self::manifest_path(path),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    /// Load a representation CSV and its sidecar manifest; validates header
    /// arity, factor ranges, and row widths, reporting 1-based line numbers.
    pub fn load_external<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let manifest_bytes = std::fs::read(Self::manifest_path(path))?;
        let manifest: ExternalManifest = serde_json::from_slice(&manifest_bytes)?;
        let space = make_space(manifest.space);
        let k = space.factor_count();

        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty file".into(),
                })
            }
        };
        let expected_header: Vec<String> = (0..k)
            .map(|i| format!("f{i}"))
            .chain((0..manifest.code_dim).map(|d| format!("z{d}")))
            .collect();
        let got: Vec<&str> = header.trim().split(',').collect();
        if got != expected_header {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "bad header: expected `{}`, got `{}`",
                    expected_header.join(","),
                    header.trim()
                ),
            });
        }

        let mut table = RepresentationTable::new(manifest.space, manifest.code_dim);
        let mut rows_seen = 0usize;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != k + manifest.code_dim {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "ragged row: expected {} fields, got {}",
                        k + manifest.code_dim,
                        fields.len()
                    ),
                });
            }
            let mut values = Vec::with_capacity(k);
            for (fi, field) in fields[..k].iter().enumerate() {
                let v: u16 = field.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad integer `{field}` in column f{fi}"),
                })?;
                values.push(v);
            }
            let a = FactorAssignment::new(values);
            space.validate(&a).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let mut code = Vec::with_capacity(manifest.code_dim);
            for field in &fields[k..] {
                let z: f64 = field.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad float `{field}`"),
                })?;
                code.push(z);
            }
            let index = assignment_index(&space, &a)?;
            if table.rows.insert(index, code).is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duplicate row for flat index {index}"),
                });
            }
            rows_seen += 1;
        }
        if rows_seen == 0 {
            return Err(Error::Parse {
                line: 1,
                message: "no data rows".into(),
            });
        }
        Ok(table)
    }
}

#[derive(Clone, Debug)]
enum SourceKind {
    GtInteger,
    GtOnehot {
        offsets: Vec<usize>,
    },
    PermutedScaled {
        seed: u64,
        perm: Vec<usize>,
        scales: Vec<f64>,
    },
    LinearMixed {
        alpha: f64,
        mix_seed: u64,
        /// Row-major code_dim x factor_count mixing matrix.
        matrix: Vec<f64>,
    },
    External {
        table: RepresentationTable,
    },
}

/// Deterministic mapping from factor assignments to code vectors.
#[derive(Clone, Debug)]
pub struct RepresentationSource {
    space: FactorSpace,
    code_dim: usize,
    kind: SourceKind,
}

impl RepresentationSource {
    pub fn gt_integer(space: &FactorSpace) -> Self {
        RepresentationSource {
            space: space.clone(),
            code_dim: space.factor_count(),
            kind: SourceKind::GtInteger,
        }
    }

    pub fn gt_onehot(space: &FactorSpace) -> Self {
        let mut offsets = Vec::with_capacity(space.factor_count());
        let mut acc = 0;
        for f in space.factors() {
            offsets.push(acc);
            acc += f.cardinality;
        }
        RepresentationSource {
            space: space.clone(),
            code_dim: acc,
            kind: SourceKind::GtOnehot { offsets },
        }
    }

    pub fn permuted_scaled(space: &FactorSpace, seed: u64) -> Self {
        let k = space.factor_count();
        let mut rng = SeededRng::new(mix64(seed, 0x5ca1e));
        let mut perm: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            let j = rng.index(i + 1);
            perm.swap(i, j);
        }
        let scales: Vec<f64> = (0..k)
            .map(|_| {
                let magnitude = 0.5 + 1.5 * rand::Rng::gen::<f64>(&mut rng);
                if rand::Rng::gen::<bool>(&mut rng) {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect();
        RepresentationSource {
            space: space.clone(),
            code_dim: k,
            kind: SourceKind::PermutedScaled { seed, perm, scales },
        }
    }

    pub fn linear_mixed(space: &FactorSpace, alpha: f64, mix_seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParam(format!("alpha {alpha} outside [0,1]")));
        }
        let q = draw_mixing_rotation(space, mix_seed);
        Ok(Self::linear_mixed_with(space, alpha, mix_seed, &q))
    }

    fn linear_mixed_with(space: &FactorSpace, alpha: f64, mix_seed: u64, q: &[f64]) -> Self {
        let k = space.factor_count();
        let mut matrix = vec![0.0; k * k];
        for r in 0..k {
            for c in 0..k {
                let identity = if r == c { 1.0 } else { 0.0 };
                matrix[r * k + c] = (1.0 - alpha) * identity + alpha * q[r * k + c];
            }
        }
        for r in 0..k {
            let row = &mut matrix[r * k..(r + 1) * k];
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in row {
                *x /= norm;
            }
        }
        RepresentationSource {
            space: space.clone(),
            code_dim: k,
            kind: SourceKind::LinearMixed {
                alpha,
                mix_seed,
                matrix,
            },
        }
    }

    pub fn external(table: RepresentationTable) -> Self {
        let space = make_space(table.space);
        RepresentationSource {
            space,
            code_dim: table.code_dim,
            kind: SourceKind::External { table },
        }
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    /// Short stable descriptor for digests and default model ids.
    pub fn descriptor(&self) -> String {
        match &self.kind {
            SourceKind::GtInteger => "gt_integer".into(),
            SourceKind::GtOnehot { .. } => "gt_onehot".into(),
            SourceKind::PermutedScaled { seed, .. } => format!("permuted_scaled_s{seed}"),
            SourceKind::LinearMixed {
                alpha, mix_seed, ..
            } => format!("linear_mixed_a{alpha:.2}_m{mix_seed}"),
            SourceKind::External { table } => {
                format!("external_{}_{}rows", table.space, table.len())
            }
        }
    }

    /// Ground-truth integer codes: indices rescaled to [0, 1] per factor.
    fn gt_vector(&self, a: &FactorAssignment) -> Vec<f64> {
        self.space
            .factors()
            .iter()
            .zip(&a.values)
            .map(|(f, &v)| v as f64 / (f.cardinality - 1) as f64)
            .collect()
    }

    /// Encode one assignment. Pure and total on valid assignments.
    pub fn encode(&self, a: &FactorAssignment) -> Result<Vec<f64>> {
        self.space.validate(a)?;
        Ok(match &self.kind {
            SourceKind::GtInteger => self.gt_vector(a),
            SourceKind::GtOnehot { offsets } => {
                let mut code = vec![0.0; self.code_dim];
                for (k, &v) in a.values.iter().enumerate() {
                    code[offsets[k] + v as usize] = 1.0;
                }
                code
            }
            SourceKind::PermutedScaled { perm, scales, .. } => {
                let gt = self.gt_vector(a);
                (0..gt.len()).map(|j| scales[j] * gt[perm[j]]).collect()
            }
            SourceKind::LinearMixed { matrix, .. } => {
                let gt = self.gt_vector(a);
                let k = gt.len();
                (0..k)
                    .map(|r| {
                        let row = &matrix[r * k..(r + 1) * k];
                        row.iter().zip(&gt).map(|(m, z)| m * z).sum()
                    })
                    .collect()
            }
            SourceKind::External { table } => {
                let index = assignment_index(&self.space, a)?;
                table
                    .get(index)
                    .cloned()
                    .ok_or(Error::CoverageMiss { index })?
            }
        })
    }
}

/// Linearly spaced mixing levels `alpha = k/(levels-1)` sharing one rotation.
pub fn make_entanglement_ladder(
    space: &FactorSpace,
    levels: usize,
    mix_seed: u64,
) -> Result<Vec<RepresentationSource>> {
    if levels < 2 {
        return Err(Error::InvalidParam(format!(
            "entanglement ladder needs >= 2 levels, got {levels}"
        )));
    }
    let q = draw_mixing_rotation(space, mix_seed);
    Ok((0..levels)
        .map(|k| {
            let alpha = k as f64 / (levels - 1) as f64;
            RepresentationSource::linear_mixed_with(space, alpha, mix_seed, &q)
        })
        .collect())
}

/// Population standard deviation of each factor's rescaled value grid.
fn factor_stds(space: &FactorSpace) -> Vec<f64> {
    space
        .factors()
        .iter()
        .map(|f| {
            let c = f.cardinality;
            let vals: Vec<f64> = (0..c).map(|v| v as f64 / (c - 1) as f64).collect();
            let mean = vals.iter().sum::<f64>() / c as f64;
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64).sqrt()
        })
        .collect()
}

fn determinant(mut m: Vec<f64>, k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&a, &b| {
                m[a * k + col]
                    .abs()
                    .partial_cmp(&m[b * k + col].abs())
                    .unwrap()
            })
            .unwrap();
        if m[pivot * k + col].abs() < 1e-300 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..k {
                m.swap(col * k + j, pivot * k + j);
            }
            det = -det;
        }
        det *= m[col * k + col];
        for r in col + 1..k {
            let factor = m[r * k + col] / m[col * k + col];
            for j in col..k {
                m[r * k + j] -= factor * m[col * k + j];
            }
        }
    }
    det
}

/// Draw the fixed random rotation used by `linear_mixed`.
///
/// Gram-Schmidt of a Gaussian matrix, det forced to +1, redrawn until the
/// fully mixed codes leave no single dimension with more than 0.9 absolute
/// correlation with any single factor and `(1-alpha) I + alpha Q` stays
/// comfortably invertible across the alpha range.
fn draw_mixing_rotation(space: &FactorSpace, mix_seed: u64) -> Vec<f64> {
    let k = space.factor_count();
    let sigmas = factor_stds(space);
    'attempt: for attempt in 0u64.. {
        let mut rng = SeededRng::new(mix64(mix_seed, 0xB17_0000 + attempt));
        let mut q: Vec<f64> = (0..k * k).map(|_| rng.normal()).collect();
        // Gram-Schmidt on rows.
        for r in 0..k {
            for prev in 0..r {
                let dot: f64 = (0..k).map(|j| q[r * k + j] * q[prev * k + j]).sum();
                for j in 0..k {
                    q[r * k + j] -= dot * q[prev * k + j];
                }
            }
            let norm: f64 = (0..k).map(|j| q[r * k + j] * q[r * k + j]).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue 'attempt;
            }
            for j in 0..k {
                q[r * k + j] /= norm;
            }
        }
        if determinant(q.clone(), k) < 0.0 {
            for j in 0..k {
                q[j] = -q[j];
            }
        }
        // Correlation bound at alpha = 1: corr(z_r, factor c) for independent
        // uniform factors is Q_rc sigma_c / ||Q_r diag(sigma)||.
        for r in 0..k {
            let denom: f64 = (0..k)
                .map(|c| (q[r * k + c] * sigmas[c]).powi(2))
                .sum::<f64>()
                .sqrt();
            for c in 0..k {
                if (q[r * k + c] * sigmas[c] / denom).abs() > MIX_CORRELATION_BOUND {
                    continue 'attempt;
                }
            }
        }
        // Invertibility across the ladder.
        for step in 1..20 {
            let alpha = step as f64 / 20.0;
            let mut m = vec![0.0; k * k];
            for r in 0..k {
                for c in 0..k {
                    let identity = if r == c { 1.0 } else { 0.0 };
                    m[r * k + c] = (1.0 - alpha) * identity + alpha * q[r * k + c];
                }
            }
            if determinant(m, k).abs() < 1e-6 {
                continue 'attempt;
            }
        }
        return q;
    }
    unreachable!("rejection loop is unbounded")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{make_space, sample_assignment, SpaceId};

    fn dsprites() -> FactorSpace {
        make_space(SpaceId::DspritesReasoning)
    }

    #[test]
    fn gt_integer_zero_assignment_is_zero_vector() {
        let s = dsprites();
        let src = RepresentationSource::gt_integer(&s);
        let z = src.encode(&FactorAssignment::new(vec![0; 6])).unwrap();
        assert_eq!(z, vec![0.0; 6]);
        let top = src
            .encode(&FactorAssignment::new(vec![2, 2, 3, 3, 4, 5]))
            .unwrap();
        assert_eq!(top, vec![1.0; 6]);
    }

    #[test]
    fn gt_onehot_blocks() {
        let s = dsprites();
        let src = RepresentationSource::gt_onehot(&s);
        assert_eq!(src.code_dim(), 3 + 3 + 4 + 4 + 5 + 6);
        let z = src
            .encode(&FactorAssignment::new(vec![1, 0, 2, 3, 0, 5]))
            .unwrap();
        assert_eq!(z.iter().sum::<f64>(), 6.0);
        assert_eq!(z[1], 1.0); // shape block
        assert_eq!(z[3], 1.0); // scale block
        assert_eq!(z[8], 1.0); // pos_x block
        assert_eq!(z[24], 1.0); // obj_color block
    }

    #[test]
    fn permuted_scaled_is_a_dimensionwise_bijection() {
        let s = dsprites();
        let src = RepresentationSource::permuted_scaled(&s, 3);
        match &src.kind {
            SourceKind::PermutedScaled { perm, scales, .. } => {
                let mut sorted = perm.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..6).collect::<Vec<_>>());
                assert!(scales.iter().all(|&sc| sc != 0.0 && sc.abs() >= 0.5));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn alpha_zero_equals_gt_integer_exactly() {
        let s = dsprites();
        let gt = RepresentationSource::gt_integer(&s);
        let mixed = RepresentationSource::linear_mixed(&s, 0.0, 7).unwrap();
        let mut rng = SeededRng::new(1);
        for _ in 0..200 {
            let a = sample_assignment(&s, &mut rng);
            assert_eq!(gt.encode(&a).unwrap(), mixed.encode(&a).unwrap());
        }
    }

    #[test]
    fn alpha_one_has_no_dominant_dimension() {
        // Exhaustive correlation oracle over the full 4320-point space.
        let s = dsprites();
        let src = RepresentationSource::linear_mixed(&s, 1.0, 7).unwrap();
        let n = s.size() as f64;
        let k = s.factor_count();
        let codes: Vec<Vec<f64>> = s
            .iter_assignments()
            .map(|a| src.encode(&a).unwrap())
            .collect();
        let factors: Vec<Vec<f64>> = s
            .iter_assignments()
            .map(|a| a.values.iter().map(|&v| v as f64).collect())
            .collect();
        for j in 0..k {
            for f in 0..k {
                let zs: Vec<f64> = codes.iter().map(|c| c[j]).collect();
                let vs: Vec<f64> = factors.iter().map(|c| c[f]).collect();
                let mz = zs.iter().sum::<f64>() / n;
                let mv = vs.iter().sum::<f64>() / n;
                let cov: f64 = zs.iter().zip(&vs).map(|(z, v)| (z - mz) * (v - mv)).sum();
                let sz: f64 = zs.iter().map(|z| (z - mz) * (z - mz)).sum::<f64>().sqrt();
                let sv: f64 = vs.iter().map(|v| (v - mv) * (v - mv)).sum::<f64>().sqrt();
                let corr = cov / (sz * sv);
                assert!(
                    corr.abs() <= 0.9 + 1e-12,
                    "dim {j} vs factor {f}: corr {corr}"
                );
            }
        }
    }

    #[test]
    fn mixing_stays_invertible_below_alpha_one() {
        let s = dsprites();
        for &alpha in &[0.25, 0.5, 0.75] {
            let src = RepresentationSource::linear_mixed(&s, alpha, 7).unwrap();
            let matrix = match &src.kind {
                SourceKind::LinearMixed { matrix, .. } => matrix.clone(),
                _ => unreachable!(),
            };
            // Gauss solve M x = M e_0; recovering e_0 demonstrates a usable
            // condition number.
            let k = 6;
            let mut aug = vec![0.0; k * (k + 1)];
            for r in 0..k {
                for c in 0..k {
                    aug[r * (k + 1) + c] = matrix[r * k + c];
                }
                aug[r * (k + 1) + k] = matrix[r * k]; // M e_0
            }
            for col in 0..k {
                let pivot = (col..k)
                    .max_by(|&a, &b| {
                        aug[a * (k + 1) + col]
                            .abs()
                            .partial_cmp(&aug[b * (k + 1) + col].abs())
                            .unwrap()
                    })
                    .unwrap();
                for j in 0..=k {
                    aug.swap(col * (k + 1) + j, pivot * (k + 1) + j);
                }
                let p = aug[col * (k + 1) + col];
                assert!(p.abs() > 1e-9, "near-singular at alpha {alpha}");
                for r in 0..k {
                    if r != col {
                        let factor = aug[r * (k + 1) + col] / p;
                        for j in col..=k {
                            aug[r * (k + 1) + j] -= factor * aug[col * (k + 1) + j];
                        }
                    }
                }
            }
            for r in 0..k {
                let x = aug[r * (k + 1) + k] / aug[r * (k + 1) + r];
                let expected = if r == 0 { 1.0 } else { 0.0 };
                assert!((x - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ladder_alphas_and_shared_dims() {
        let s = dsprites();
        let two = make_entanglement_ladder(&s, 2, 9).unwrap();
        let alphas: Vec<f64> = two
            .iter()
            .map(|m| match m.kind {
                SourceKind::LinearMixed { alpha, .. } => alpha,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(alphas, vec![0.0, 1.0]);
        let five = make_entanglement_ladder(&s, 5, 9).unwrap();
        let alphas: Vec<f64> = five
            .iter()
            .map(|m| match m.kind {
                SourceKind::LinearMixed { alpha, .. } => alpha,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(alphas, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(five.iter().all(|m| m.code_dim() == 6));
        assert!(make_entanglement_ladder(&s, 1, 9).is_err());
    }

    #[test]
    fn external_round_trip_and_errors() {
        let s = dsprites();
        let dir = tempfile::tempdir().unwrap();

        // 10-dimensional codes over the full space.
        let mut table = RepresentationTable::new(SpaceId::DspritesReasoning, 10);
        let mut rng = SeededRng::new(4);
        for i in 0..s.size() {
            let code: Vec<f64> = (0..10).map(|_| rand::Rng::gen::<f64>(&mut rng) - 0.5).collect();
            table.insert(i, code).unwrap();
        }
        let path = dir.path().join("repr.csv");
        table.save_external(&path).unwrap();

        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("f0,f1,f2,f3,f4,f5,z0,"));

        let loaded = RepresentationTable::load_external(&path).unwrap();
        assert_eq!(loaded.code_dim, 10);
        assert_eq!(loaded.len(), 4320);

        // save(load(p)) reproduces p byte-for-byte.
        let path2 = dir.path().join("repr2.csv");
        loaded.save_external(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );

        // empty file -> parse error at line 1
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        std::fs::write(
            empty.with_extension("manifest.json"),
            r#"{"space":"dsprites_reasoning","code_dim":10}"#,
        )
        .unwrap();
        match RepresentationTable::load_external(&empty).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other}"),
        }

        // ragged row -> parse error with line number
        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "f0,f1,f2,f3,f4,f5,z0\n0,0,0,0,0,0,0.5\n0,0,0,0,0\n").unwrap();
        std::fs::write(
            ragged.with_extension("manifest.json"),
            r#"{"space":"dsprites_reasoning","code_dim":1}"#,
        )
        .unwrap();
        match RepresentationTable::load_external(&ragged).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }

        // out-of-range factor value
        let oor = dir.path().join("oor.csv");
        std::fs::write(&oor, "f0,f1,f2,f3,f4,f5,z0\n9,0,0,0,0,0,0.5\n").unwrap();
        std::fs::write(
            oor.with_extension("manifest.json"),
            r#"{"space":"dsprites_reasoning","code_dim":1}"#,
        )
        .unwrap();
        assert!(RepresentationTable::load_external(&oor).is_err());
    }

    #[test]
    fn external_lookup_miss_names_the_index() {
        let mut table = RepresentationTable::new(SpaceId::DspritesReasoning, 2);
        table.insert(0, vec![0.0, 0.0]).unwrap();
        let src = RepresentationSource::external(table);
        let s = dsprites();
        let a = assignment_at(&s, 17).unwrap();
        match src.encode(&a).unwrap_err() {
            Error::CoverageMiss { index } => assert_eq!(index, 17),
            other => panic!("unexpected error {other}"),
        }
    }
}
