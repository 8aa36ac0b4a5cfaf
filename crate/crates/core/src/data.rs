//! Phenotype records, standardization, model specification and incidence
//! structure shared by every model fit.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pedigree::{relationship_inverse, Pedigree, SparseSymmetric};
use crate::rsem::PriorSpec;

/// Trait order used throughout: intake first, then the energy sinks.
pub const TRAIT_NAMES: [&str; 4] = ["dmi", "mbw", "milkne", "dbw"];

/// Days-in-milk classes present in the reference herd.
pub const DIM_LEVELS: [i64; 7] = [71, 72, 73, 74, 75, 76, 77];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeRecord {
    pub animal: i64,
    pub dim: i64,
    pub test_week: i64,
    /// Trait values in [`TRAIT_NAMES`] order.
    pub traits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationInfo {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl StandardizationInfo {
    pub fn new(means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if means.len() != sds.len() {
            return Err(Error::Dimension("means and SDs differ in length".into()));
        }
        if let Some(j) = sds.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::Degenerate(format!("trait {j} has non-positive SD")));
        }
        Ok(Self { means, sds })
    }

    pub fn to_standard(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn to_raw(&self, standard: &[f64]) -> Vec<f64> {
        standard
            .iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(z, (m, s))| m + s * z)
            .collect()
    }
}

/// Per-trait sample means and SDs (denominator `n - 1`).
pub fn trait_moments(records: &[PhenotypeRecord]) -> Result<StandardizationInfo> {
    let n = records.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 records, got {n}")));
    }
    let k = records[0].traits.len();
    let mut means = vec![0.0; k];
    for r in records {
        if r.traits.len() != k {
            return Err(Error::Dimension(format!("animal {} has {} traits, expected {k}", r.animal, r.traits.len())));
        }
        for (m, x) in means.iter_mut().zip(&r.traits) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut ss = vec![0.0; k];
    for r in records {
        for j in 0..k {
            let d = r.traits[j] - means[j];
            ss[j] += d * d;
        }
    }
    let sds: Vec<f64> = ss.iter().map(|s| libm::sqrt(s / (n - 1) as f64)).collect();
    if let Some(j) = sds.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::Degenerate(format!("trait {j} has zero variance")));
    }
    Ok(StandardizationInfo { means, sds })
}

/// Centers each trait to mean zero and scales to unit sample SD.
pub fn standardize(records: &[PhenotypeRecord]) -> Result<(Vec<PhenotypeRecord>, StandardizationInfo)> {
    let info = trait_moments(records)?;
    let out = records
        .iter()
        .map(|r| PhenotypeRecord {
            traits: info.to_standard(&r.traits),
            ..r.clone()
        })
        .collect();
    Ok((out, info))
}

/// `n x k` matrix of trait values.
pub fn trait_matrix(records: &[PhenotypeRecord]) -> Matrix {
    let k = records.first().map_or(0, |r| r.traits.len());
    let mut m = Matrix::zeros(records.len(), k);
    for (i, r) in records.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&r.traits);
    }
    m
}

/// Sample covariance matrix (denominator `n - 1`) of the columns of `y`.
pub fn sample_covariance(y: &Matrix) -> Matrix {
    let (n, k) = (y.rows(), y.cols());
    let means: Vec<f64> = (0..k).map(|j| y.column(j).iter().sum::<f64>() / n as f64).collect();
    let mut c = Matrix::zeros(k, k);
    for i in 0..n {
        let r = y.row(i);
        for a in 0..k {
            for b in a..k {
                c[(a, b)] += (r[a] - means[a]) * (r[b] - means[b]);
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            c[(a, b)] /= (n - 1) as f64;
            c[(b, a)] = c[(a, b)];
        }
    }
    c
}

pub fn covariance_to_correlation(c: &Matrix) -> Matrix {
    let d: Vec<f64> = c.diagonal().iter().map(|v| libm::sqrt(*v)).collect();
    Matrix::from_fn(c.rows(), c.cols(), |i, j| c[(i, j)] / (d[i] * d[j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Lr1,
    Lr2,
    Lr3,
    Rsem1,
    Rsem2,
    Rsem3,
    St,
    Mt,
    MtChol,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 9] = [
        ModelFamily::Lr1,
        ModelFamily::Lr2,
        ModelFamily::Lr3,
        ModelFamily::Rsem1,
        ModelFamily::Rsem2,
        ModelFamily::Rsem3,
        ModelFamily::St,
        ModelFamily::Mt,
        ModelFamily::MtChol,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Lr1 => "lr1",
            ModelFamily::Lr2 => "lr2",
            ModelFamily::Lr3 => "lr3",
            ModelFamily::Rsem1 => "rsem1",
            ModelFamily::Rsem2 => "rsem2",
            ModelFamily::Rsem3 => "rsem3",
            ModelFamily::St => "st",
            ModelFamily::Mt => "mt",
            ModelFamily::MtChol => "mt_chol",
        }
    }

    /// Effects fitted by default.
    pub fn default_effects(self) -> EffectSet {
        use ModelFamily::*;
        match self {
            Lr1 => EffectSet::NONE,
            Rsem1 => EffectSet { intercept: true, ..EffectSet::NONE },
            Lr2 | Rsem2 => EffectSet { intercept: true, dim_class: true, test_week: false, animal: true },
            Lr3 | Rsem3 | St | Mt | MtChol => EffectSet::FULL,
        }
    }

    /// Families fitted by MCMC (everything except the closed-form stage-one fit).
    pub fn is_mcmc(self) -> bool {
        self != ModelFamily::Lr1
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase().replace('-', "_");
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .ok_or_else(|| Error::Validation(format!("unknown model family '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectSet {
    pub intercept: bool,
    pub dim_class: bool,
    pub test_week: bool,
    pub animal: bool,
}

impl EffectSet {
    pub const NONE: EffectSet = EffectSet { intercept: false, dim_class: false, test_week: false, animal: false };
    pub const FULL: EffectSet = EffectSet { intercept: true, dim_class: true, test_week: true, animal: true };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub n_chains: usize,
    pub chain_length: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub base_seed: u64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            n_chains: 30,
            chain_length: 2200,
            burn_in: 1000,
            thin: 2,
            base_seed: 2021,
        }
    }
}

impl McmcSettings {
    /// Number of states saved per chain.
    pub fn saved_per_chain(&self) -> usize {
        (self.chain_length - self.burn_in) / self.thin
    }

    /// Whether 1-based iteration `iter` is saved.
    pub fn is_saved(&self, iter: usize) -> bool {
        iter > self.burn_in && (iter - self.burn_in) % self.thin == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub effects: EffectSet,
    /// Index of the intake trait.
    pub response_index: usize,
    /// Trait indices acting as energy sinks.
    pub sink_indices: Vec<usize>,
    pub priors: PriorSpec,
    pub mcmc: McmcSettings,
    /// Compute genetic partial regressions per sample instead of from the
    /// posterior-mean genetic covariance.
    pub per_sample_genetic_regression: bool,
}

impl ModelSpec {
    pub fn new(family: ModelFamily) -> Self {
        Self {
            family,
            effects: family.default_effects(),
            response_index: 0,
            sink_indices: vec![1, 2, 3],
            priors: PriorSpec::default(),
            mcmc: McmcSettings::default(),
            per_sample_genetic_regression: false,
        }
    }

    pub fn n_traits(&self) -> usize {
        1 + self.sink_indices.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.mcmc;
        if m.burn_in >= m.chain_length {
            return Err(Error::Validation(format!(
                "burn-in {} must be shorter than chain length {}",
                m.burn_in, m.chain_length
            )));
        }
        if m.thin == 0 {
            return Err(Error::Validation("thin must be at least 1".into()));
        }
        if m.n_chains == 0 {
            return Err(Error::Validation("need at least one chain".into()));
        }
        if self.sink_indices.is_empty() {
            return Err(Error::Validation("at least one energy sink is required".into()));
        }
        if self.sink_indices.contains(&self.response_index) {
            return Err(Error::Validation("sink indices must exclude the intake trait".into()));
        }
        let mut seen = self.sink_indices.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.sink_indices.len() {
            return Err(Error::Validation("duplicate sink index".into()));
        }
        self.priors.validate()
    }

    /// Trait columns in model order: intake first, then sinks.
    pub fn trait_order(&self) -> Vec<usize> {
        let mut v = vec![self.response_index];
        v.extend(&self.sink_indices);
        v
    }
}

/// A categorical factor: the sorted level labels and each record's level.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<i64>,
    pub index: Vec<usize>,
}

impl Factor {
    pub fn from_labels(name: &str, labels: impl Iterator<Item = i64>) -> Self {
        let labels: Vec<i64> = labels.collect();
        let mut levels = labels.clone();
        levels.sort_unstable();
        levels.dedup();
        let pos: BTreeMap<i64, usize> = levels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        let index = labels.iter().map(|l| pos[l]).collect();
        Self { name: name.to_string(), levels, index }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Records grouped by level.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_levels()];
        for (i, &l) in self.index.iter().enumerate() {
            m[l].push(i);
        }
        m
    }

    /// Dense `n x levels` incidence matrix.
    pub fn incidence(&self) -> Matrix {
        let mut x = Matrix::zeros(self.index.len(), self.n_levels());
        for (i, &l) in self.index.iter().enumerate() {
            x[(i, l)] = 1.0;
        }
        x
    }
}

/// Incidence structure for one model fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub n_records: usize,
    pub intercept: bool,
    pub dim_class: Option<Factor>,
    pub test_week: Option<Factor>,
    /// Pedigree row of each record's animal, when animal effects are fitted.
    pub animal: Option<Vec<usize>>,
    pub n_animals: usize,
}

impl Design {
    /// Fixed-effect columns: intercept, then the DIM classes. With an
    /// intercept the first class is the reference level and gets no column.
    pub fn fixed_columns(&self) -> usize {
        usize::from(self.intercept) + self.dim_columns()
    }

    pub fn dim_columns(&self) -> usize {
        match &self.dim_class {
            Some(f) if self.intercept => f.n_levels() - 1,
            Some(f) => f.n_levels(),
            None => 0,
        }
    }

    /// Fixed-effect column hit by record `i` besides the intercept.
    pub fn dim_column(&self, i: usize) -> Option<usize> {
        let f = self.dim_class.as_ref()?;
        let l = f.index[i];
        match (self.intercept, l) {
            (true, 0) => None,
            (true, l) => Some(l - 1),
            (false, l) => Some(l),
        }
    }

    /// Records grouped by animal (pedigree row).
    pub fn records_by_animal(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_animals];
        if let Some(a) = &self.animal {
            for (i, &j) in a.iter().enumerate() {
                m[j].push(i);
            }
        }
        m
    }
}

pub fn build_design(records: &[PhenotypeRecord], effects: EffectSet, pedigree: Option<&Pedigree>) -> Result<Design> {
    let n = records.len();
    if n == 0 {
        return Err(Error::Validation("no phenotype records".into()));
    }
    let dim_class = effects
        .dim_class
        .then(|| Factor::from_labels("dim", records.iter().map(|r| r.dim)));
    if let Some(f) = &dim_class {
        if effects.intercept && f.n_levels() < 2 {
            return Err(Error::Validation(
                "factor dim has a single level and is not estimable alongside the intercept".into(),
            ));
        }
    }
    let test_week = effects
        .test_week
        .then(|| Factor::from_labels("test_week", records.iter().map(|r| r.test_week)));
    let (animal, n_animals) = if effects.animal {
        let ped = pedigree.ok_or_else(|| Error::Validation("animal effects require a pedigree".into()))?;
        let mut idx = Vec::with_capacity(n);
        for (row, r) in records.iter().enumerate() {
            let i = ped.index_of(r.animal).ok_or_else(|| {
                Error::Validation(format!("row {}: animal {} is not in the pedigree", row + 1, r.animal))
            })?;
            idx.push(i);
        }
        (Some(idx), ped.len())
    } else {
        (None, 0)
    };
    Ok(Design {
        n_records: n,
        intercept: effects.intercept,
        dim_class,
        test_week,
        animal,
        n_animals,
    })
}

/// Everything a sampler reads: standardized phenotypes in model trait order,
/// the incidence structure and, with animal effects, `A^{-1}`.
#[derive(Debug, Clone)]
pub struct ModelData {
    /// `n x k`, column 0 is the intake trait.
    pub y: Matrix,
    pub trait_names: Vec<String>,
    pub design: Design,
    pub ainv: Option<SparseSymmetric>,
    /// Pedigree ids, one per genetic-effect row.
    pub animal_ids: Vec<i64>,
}

impl ModelData {
    pub fn new(records: &[PhenotypeRecord], pedigree: Option<&Pedigree>, spec: &ModelSpec) -> Result<Self> {
        Self::with_names(records, pedigree, spec, &TRAIT_NAMES)
    }

    pub fn with_names(
        records: &[PhenotypeRecord],
        pedigree: Option<&Pedigree>,
        spec: &ModelSpec,
        names: &[&str],
    ) -> Result<Self> {
        spec.validate()?;
        let order = spec.trait_order();
        let k_in = records.first().map_or(0, |r| r.traits.len());
        if let Some(&bad) = order.iter().find(|&&j| j >= k_in) {
            return Err(Error::Dimension(format!("trait index {bad} out of range for {k_in} traits")));
        }
        let design = build_design(records, spec.effects, pedigree)?;
        let full = trait_matrix(records);
        let y = full.select_columns(&order);
        let trait_names = order
            .iter()
            .map(|&j| names.get(j).map_or_else(|| format!("trait{j}"), |s| s.to_string()))
            .collect();
        let (ainv, animal_ids) = match (spec.effects.animal, pedigree) {
            (true, Some(p)) => (Some(relationship_inverse(p)), p.ids()),
            _ => (None, Vec::new()),
        };
        Ok(Self {
            y,
            trait_names,
            design,
            ainv,
            animal_ids,
        })
    }

    pub fn n_records(&self) -> usize {
        self.y.rows()
    }

    pub fn n_traits(&self) -> usize {
        self.y.cols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(animal: i64, dim: i64, tw: i64, t: [f64; 4]) -> PhenotypeRecord {
        PhenotypeRecord { animal, dim, test_week: tw, traits: t.to_vec() }
    }

    fn sample() -> Vec<PhenotypeRecord> {
        vec![
            rec(1, 71, 1, [20.0, 110.0, 19.0, 0.2]),
            rec(2, 72, 1, [25.0, 115.0, 21.0, 0.5]),
            rec(3, 73, 2, [31.0, 112.0, 24.0, 0.7]),
            rec(4, 71, 2, [28.0, 118.0, 20.0, 0.1]),
            rec(5, 72, 3, [35.0, 120.0, 23.5, 0.9]),
        ]
    }

    #[test]
    fn standardized_moments() {
        let (z, info) = standardize(&sample()).unwrap();
        let again = trait_moments(&z).unwrap();
        for j in 0..4 {
            assert!(again.means[j].abs() < 1e-12);
            assert!((again.sds[j] - 1.0).abs() < 1e-12);
        }
        let back = info.to_raw(&z[2].traits);
        for (a, b) in back.iter().zip(&sample()[2].traits) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardization_is_location_invariant_and_idempotent() {
        let shifted: Vec<_> = sample()
            .into_iter()
            .map(|mut r| {
                r.traits.iter_mut().for_each(|x| *x += 100.0);
                r
            })
            .collect();
        let (a, _) = standardize(&sample()).unwrap();
        let (b, _) = standardize(&shifted).unwrap();
        let (c, _) = standardize(&a).unwrap();
        for i in 0..a.len() {
            for j in 0..4 {
                assert!((a[i].traits[j] - b[i].traits[j]).abs() < 1e-12);
                assert!((a[i].traits[j] - c[i].traits[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn correlations_survive_standardization() {
        let raw = sample_covariance(&trait_matrix(&sample()));
        let (z, _) = standardize(&sample()).unwrap();
        let std = sample_covariance(&trait_matrix(&z));
        assert!(covariance_to_correlation(&raw).max_abs_diff(&std) < 1e-12);
    }

    #[test]
    fn zero_variance_trait_is_degenerate() {
        let mut recs = sample();
        recs.iter_mut().for_each(|r| r.traits[3] = 0.4);
        assert!(matches!(standardize(&recs), Err(Error::Degenerate(_))));
    }

    #[test]
    fn design_incidence_rows_sum_to_one() {
        let d = build_design(&sample(), EffectSet { animal: false, ..EffectSet::FULL }, None).unwrap();
        let dim = d.dim_class.as_ref().unwrap();
        assert_eq!(dim.n_levels(), 3);
        assert_eq!(d.test_week.as_ref().unwrap().n_levels(), 3);
        let x = dim.incidence();
        for i in 0..x.rows() {
            assert_eq!(x.row(i).iter().sum::<f64>(), 1.0);
        }
        assert_eq!(d.dim_columns(), 2);
        assert_eq!(d.dim_column(0), None);
        assert_eq!(d.dim_column(1), Some(0));
    }

    #[test]
    fn lr1_design_is_empty() {
        let d = build_design(&sample(), ModelFamily::Lr1.default_effects(), None).unwrap();
        assert_eq!(d.fixed_columns(), 0);
        assert!(d.test_week.is_none() && d.animal.is_none());
    }

    #[test]
    fn single_level_dim_is_not_estimable() {
        let mut recs = sample();
        recs.iter_mut().for_each(|r| r.dim = 71);
        let e = build_design(&recs, EffectSet { animal: false, ..EffectSet::FULL }, None);
        assert!(matches!(e, Err(Error::Validation(_))));
    }

    #[test]
    fn family_parsing() {
        assert_eq!("RSEM3".parse::<ModelFamily>().unwrap(), ModelFamily::Rsem3);
        assert_eq!("mt-chol".parse::<ModelFamily>().unwrap(), ModelFamily::MtChol);
        assert!("lr9".parse::<ModelFamily>().is_err());
    }

    #[test]
    fn saved_state_count() {
        let m = McmcSettings { chain_length: 2200, burn_in: 2000, thin: 2, ..Default::default() };
        assert_eq!((1..=2200).filter(|&i| m.is_saved(i)).count(), 100);
        assert_eq!(m.saved_per_chain(), 100);
    }

    #[test]
    fn spec_validation() {
        let mut s = ModelSpec::new(ModelFamily::Rsem3);
        assert!(s.validate().is_ok());
        s.mcmc.burn_in = s.mcmc.chain_length;
        assert!(s.validate().is_err());
        let mut s = ModelSpec::new(ModelFamily::Rsem3);
        s.sink_indices = vec![0, 1];
        assert!(s.validate().is_err());
    }
}
