//! Synthetic pedigrees and phenotypes generated under the recursive model:
//! sinks from their own animal models, then intake as the structural sum
//! of sinks plus an RFI term.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{sample_covariance, PhenotypeRecord, StandardizationInfo, DIM_LEVELS};
use crate::dist::{self, ChainRng};
use crate::error::{Error, Result};
use crate::genetics::{self, StructuralMatrix};
use crate::linalg::{dot, Matrix};
use crate::pedigree::{inbreeding_coefficients, mendelian_variance, Pedigree, PedigreeEntry, UNKNOWN};

/// Published phenotypic correlations, trait order intake, MBW, MILKNE, dBW.
pub const PUBLISHED_CORRELATIONS: [f64; 6] = [0.441, 0.556, 0.166, 0.132, 0.193, -0.036];
pub const PUBLISHED_LAMBDA: [f64; 3] = [0.351, 0.514, 0.117];
pub const PUBLISHED_MEANS: [f64; 4] = [28.9, 113.8, 21.1, 0.47];
pub const PUBLISHED_SDS: [f64; 4] = [3.81, 6.71, 2.18, 0.22];
pub const REPLICA_SINK_H2: [f64; 3] = [0.589, 0.190, 0.002];
/// Sink genetic correlations MBW-MILKNE, MBW-dBW, MILKNE-dBW.
pub const REPLICA_SINK_RG: [f64; 3] = [0.145, 0.184, -0.089];
pub const REPLICA_RFI_H2: f64 = 0.240;
pub const REPLICA_SIRES: usize = 125;
pub const REPLICA_DAMS: usize = 477;
pub const REPLICA_COWS: usize = 645;
pub const REPLICA_TEST_WEEKS: usize = 143;

/// The published 4x4 phenotypic correlation matrix.
pub fn published_correlation_matrix() -> Matrix {
    symmetric_from_upper(4, &PUBLISHED_CORRELATIONS)
}

/// Unit-diagonal symmetric matrix from its strict upper triangle, row-wise.
pub fn symmetric_from_upper(k: usize, upper: &[f64]) -> Matrix {
    let mut m = Matrix::identity(k);
    let mut it = upper.iter();
    for i in 0..k {
        for j in i + 1..k {
            let v = *it.next().expect("upper triangle length");
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub lambda: Vec<f64>,
    /// RFI-scale genetic covariance (intake-sink entries zero).
    pub g0: Matrix,
    pub r0: Matrix,
    /// Per equation (RFI, sinks...).
    pub test_week_var: Vec<f64>,
    /// `dim_effects[trait][level]`, system scale.
    pub dim_effects: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl GroundTruth {
    pub fn k(&self) -> usize {
        self.lambda.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.g0.rows() != k || self.r0.rows() != k || self.test_week_var.len() != k {
            return Err(Error::Dimension("truth components do not match lambda".into()));
        }
        for m in [&self.g0, &self.r0] {
            if !genetics::is_constrained(m, 0.0) {
                return Err(Error::Validation("intake-sink covariances must be zero".into()));
            }
            psd_factor(m)?;
        }
        if self.test_week_var.iter().any(|v| *v < 0.0) {
            return Err(Error::Validation("negative test-week variance".into()));
        }
        Ok(())
    }

    /// Phenotypic covariance of the intake-scale traits implied by the truth.
    pub fn phenotypic_covariance(&self) -> Result<Matrix> {
        let total = self.g0.add(&self.r0).add(&Matrix::from_diagonal(&self.test_week_var));
        genetics::transform_covariance(&StructuralMatrix::new(&self.lambda), &total)
    }

    pub fn standardization(&self) -> Result<StandardizationInfo> {
        StandardizationInfo::new(self.means.clone(), self.sds.clone())
    }

    /// Implied heritabilities, intake scale, excluding test-week variance.
    pub fn genetic_parameters(&self) -> Result<genetics::GeneticParameters> {
        genetics::genetic_parameters(&self.lambda, &self.g0, &self.r0)
    }
}

/// Truth calibrated to the published summaries: structural coefficients,
/// sink phenotypic correlations, sink heritabilities and genetic
/// correlations, and RFI heritability. `test_week_var` is carved out of
/// every equation's residual.
pub fn calibrated_truth(test_week_var: f64) -> Result<GroundTruth> {
    let lambda = PUBLISHED_LAMBDA.to_vec();
    let p = published_correlation_matrix();
    let s = [1, 2, 3];
    let v22 = p.submatrix(&s, &s);
    let h = REPLICA_SINK_H2;
    let rg = symmetric_from_upper(3, &REPLICA_SINK_RG);
    // Heritabilities are genetic over genetic plus residual variance.
    let gs = Matrix::from_fn(3, 3, |a, b| rg[(a, b)] * libm::sqrt(h[a] * h[b]) * (1.0 - test_week_var));
    let rs = v22.sub(&gs).sub(&Matrix::identity(3).scale(test_week_var));
    let rfi_total = 1.0 - dot(&lambda, &v22.matvec(&lambda));
    let rfi = rfi_total - test_week_var;
    if rfi <= 0.0 {
        return Err(Error::Validation("test-week variance exceeds the RFI variance".into()));
    }
    let truth = GroundTruth {
        g0: genetics::constrained_covariance(REPLICA_RFI_H2 * rfi, &gs),
        r0: genetics::constrained_covariance((1.0 - REPLICA_RFI_H2) * rfi, &rs),
        lambda,
        test_week_var: vec![test_week_var; 4],
        dim_effects: vec![vec![0.0; DIM_LEVELS.len()]; 4],
        means: PUBLISHED_MEANS.to_vec(),
        sds: PUBLISHED_SDS.to_vec(),
    };
    truth.validate()?;
    Ok(truth)
}

/// Calibrated truth with test-week variance 0.05 per equation.
pub fn paper_replica_truth() -> GroundTruth {
    calibrated_truth(0.05).expect("published summaries give a valid truth")
}

/// Founder sires `1..=n_sires`, founder dams after them, then offspring
/// with uniformly drawn parents.
pub fn simulate_pedigree(n_sires: usize, n_dams: usize, n_offspring: usize, seed: u64) -> Result<Pedigree> {
    if n_sires == 0 || n_dams == 0 {
        return Err(Error::Validation("need at least one sire and one dam".into()));
    }
    let mut rng = dist::stream(seed, 0);
    let mut entries = Vec::with_capacity(n_sires + n_dams + n_offspring);
    let mut id = 0i64;
    let mut next = || {
        id += 1;
        id
    };
    let sires: Vec<i64> = (0..n_sires).map(|_| next()).collect();
    let dams: Vec<i64> = (0..n_dams).map(|_| next()).collect();
    entries.extend(sires.iter().chain(&dams).map(|&a| PedigreeEntry::founder(a)));
    for _ in 0..n_offspring {
        let s = sires[rng.random_range(0..n_sires)];
        let d = dams[rng.random_range(0..n_dams)];
        entries.push(PedigreeEntry::new(next(), s, d));
    }
    Pedigree::new(entries)
}

/// Sizes of the non-genetic factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSizes {
    pub dim_levels: Vec<i64>,
    pub n_test_weeks: usize,
}

impl Default for DesignSizes {
    fn default() -> Self {
        Self { dim_levels: DIM_LEVELS.to_vec(), n_test_weeks: REPLICA_TEST_WEEKS }
    }
}

/// Lower factor of a PSD matrix; zero rows/columns are allowed.
fn psd_factor(m: &Matrix) -> Result<Matrix> {
    let k = m.rows();
    let keep: Vec<usize> = (0..k).filter(|&i| m[(i, i)] != 0.0).collect();
    let mut l = Matrix::zeros(k, k);
    if keep.is_empty() {
        return Ok(l);
    }
    let sub = m.submatrix(&keep, &keep).cholesky()?;
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            l[(i, j)] = sub.l()[(a, b)];
        }
    }
    Ok(l)
}

fn mvn(rng: &mut ChainRng, factor: &Matrix) -> Vec<f64> {
    let z: Vec<f64> = (0..factor.cols()).map(|_| dist::standard_normal(rng)).collect();
    factor.matvec(&z)
}

/// Genetic values for every pedigree member by Mendelian sampling,
/// system scale (RFI, sinks): `pedigree.len() x k`.
pub fn simulate_genetic_values(pedigree: &Pedigree, g0: &Matrix, seed: u64) -> Result<Matrix> {
    let k = g0.rows();
    let lg = psd_factor(g0)?;
    let inbreeding = inbreeding_coefficients(pedigree);
    let mut rng = dist::stream(seed, 1);
    let mut out = Matrix::zeros(pedigree.len(), k);
    for i in 0..pedigree.len() {
        let (s, d) = pedigree.parents(i);
        let var = mendelian_variance(pedigree, &inbreeding, i);
        let m = mvn(&mut rng, &lg);
        let sd = libm::sqrt(var);
        for t in 0..k {
            let pa = s.map_or(0.0, |p| out[(p, t)]);
            let da = d.map_or(0.0, |p| out[(p, t)]);
            out[(i, t)] = 0.5 * (pa + da) + sd * m[t];
        }
    }
    Ok(out)
}

/// Animals with at least one known parent, or everyone if all are founders.
pub fn phenotyped_animals(pedigree: &Pedigree) -> Vec<i64> {
    let e = pedigree.entries();
    let with_parents: Vec<i64> = e
        .iter()
        .filter(|p| p.sire != UNKNOWN || p.dam != UNKNOWN)
        .map(|p| p.animal)
        .collect();
    if with_parents.is_empty() {
        e.iter().map(|p| p.animal).collect()
    } else {
        with_parents
    }
}

/// One record per phenotyped animal on the standardized (system) scale.
pub fn simulate_phenotypes(
    pedigree: &Pedigree,
    truth: &GroundTruth,
    sizes: &DesignSizes,
    seed: u64,
) -> Result<Vec<PhenotypeRecord>> {
    truth.validate()?;
    let k = truth.k();
    if sizes.dim_levels.is_empty() || sizes.n_test_weeks == 0 {
        return Err(Error::Validation("design needs at least one DIM level and test week".into()));
    }
    if truth.dim_effects.len() != k || truth.dim_effects.iter().any(|d| d.len() != sizes.dim_levels.len()) {
        return Err(Error::Dimension("DIM effects do not match the design".into()));
    }
    let animals = phenotyped_animals(pedigree);
    let a = simulate_genetic_values(pedigree, &truth.g0, seed)?;
    let lr = psd_factor(&truth.r0)?;
    let mut rng = dist::stream(seed, 2);
    let tw: Vec<Vec<f64>> = (0..sizes.n_test_weeks)
        .map(|_| {
            truth
                .test_week_var
                .iter()
                .map(|v| libm::sqrt(*v) * dist::standard_normal(&mut rng))
                .collect()
        })
        .collect();
    let mut records = Vec::with_capacity(animals.len());
    for id in animals {
        let j = pedigree.index_of(id).expect("phenotyped animal is in the pedigree");
        let dim = rng.random_range(0..sizes.dim_levels.len());
        let week = rng.random_range(0..sizes.n_test_weeks);
        let e = mvn(&mut rng, &lr);
        let system: Vec<f64> = (0..k)
            .map(|t| truth.dim_effects[t][dim] + tw[week][t] + a[(j, t)] + e[t])
            .collect();
        let mut traits = system.clone();
        traits[0] = system[0] + dot(&truth.lambda, &system[1..]);
        records.push(PhenotypeRecord {
            animal: id,
            dim: sizes.dim_levels[dim],
            test_week: week as i64 + 1,
            traits,
        });
    }
    Ok(records)
}

/// Linear recoloring of the records so that their sample means are zero and
/// their sample covariance equals `target` exactly.
pub fn match_moments(records: &mut [PhenotypeRecord], target: &Matrix) -> Result<()> {
    let n = records.len();
    let k = target.rows();
    if n <= k {
        return Err(Error::Validation("too few records to match moments".into()));
    }
    let y = crate::data::trait_matrix(records);
    let means: Vec<f64> = (0..k).map(|j| y.column(j).iter().sum::<f64>() / n as f64).collect();
    let ls = sample_covariance(&y).cholesky()?;
    let lt = target.cholesky()?;
    for r in records.iter_mut() {
        let c: Vec<f64> = r.traits.iter().zip(&means).map(|(v, m)| v - m).collect();
        let z = ls.solve_lower(&c);
        r.traits = lt.l().matvec(&z);
    }
    Ok(())
}

/// Standardized records mapped to raw units.
pub fn to_raw(records: &[PhenotypeRecord], info: &StandardizationInfo) -> Vec<PhenotypeRecord> {
    records
        .iter()
        .map(|r| PhenotypeRecord { traits: info.to_raw(&r.traits), ..r.clone() })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub pedigree: Pedigree,
    /// Standardized scale.
    pub records: Vec<PhenotypeRecord>,
    pub truth: GroundTruth,
}

/// Replica of the published herd: 125 sires, 477 dams, 645 cows with
/// records, 7 DIM classes and 143 test weeks. With `match_published`, the
/// records are recolored so their sample correlations equal the published
/// ones exactly.
pub fn simulate_replica(truth: &GroundTruth, seed: u64, match_published: bool) -> Result<SimulatedData> {
    let pedigree = simulate_pedigree(REPLICA_SIRES, REPLICA_DAMS, REPLICA_COWS, seed)?;
    let mut records = simulate_phenotypes(&pedigree, truth, &DesignSizes::default(), seed)?;
    if match_published {
        match_moments(&mut records, &published_correlation_matrix())?;
    }
    Ok(SimulatedData { pedigree, records, truth: truth.clone() })
}
