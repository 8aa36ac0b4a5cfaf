//! Pedigrees, the numerator relationship matrix `A` and its sparse inverse.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Parent code for an unknown sire or dam.
pub const UNKNOWN: i64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PedigreeEntry {
    pub animal: i64,
    pub sire: i64,
    pub dam: i64,
}

impl PedigreeEntry {
    pub fn new(animal: i64, sire: i64, dam: i64) -> Self {
        Self { animal, sire, dam }
    }

    pub fn founder(animal: i64) -> Self {
        Self::new(animal, UNKNOWN, UNKNOWN)
    }
}

/// A validated pedigree in which every parent precedes its offspring.
///
/// Parents referenced but not listed are inserted as founders. Input order is
/// kept wherever it already satisfies the parent-first ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Pedigree {
    entries: Vec<PedigreeEntry>,
    parents: Vec<(Option<usize>, Option<usize>)>,
    index: BTreeMap<i64, usize>,
}

impl Pedigree {
    pub fn new(entries: Vec<PedigreeEntry>) -> Result<Self> {
        let mut listed: BTreeMap<i64, usize> = BTreeMap::new();
        for (pos, e) in entries.iter().enumerate() {
            if e.animal == UNKNOWN {
                return Err(Error::Validation(format!(
                    "pedigree row {}: animal id {UNKNOWN} is reserved for unknown parents",
                    pos + 1
                )));
            }
            if e.animal == e.sire || e.animal == e.dam {
                return Err(Error::Structure(format!("animal {} is its own parent", e.animal)));
            }
            if listed.insert(e.animal, pos).is_some() {
                return Err(Error::Validation(format!("duplicate animal id {}", e.animal)));
            }
        }

        // Unlisted parents become founders, placed ahead of everything else.
        let mut all: Vec<PedigreeEntry> = Vec::with_capacity(entries.len());
        for e in &entries {
            for p in [e.sire, e.dam] {
                if p != UNKNOWN && !listed.contains_key(&p) {
                    listed.insert(p, usize::MAX);
                    all.push(PedigreeEntry::founder(p));
                }
            }
        }
        all.extend(entries);
        let pos: BTreeMap<i64, usize> = all.iter().enumerate().map(|(i, e)| (e.animal, i)).collect();

        // Depth-first ordering, parents first.
        const NEW: u8 = 0;
        const OPEN: u8 = 1;
        const DONE: u8 = 2;
        let n = all.len();
        let mut state = vec![NEW; n];
        let mut order = Vec::with_capacity(n);
        let mut stack: Vec<(usize, u8)> = Vec::new();
        for root in 0..n {
            if state[root] != NEW {
                continue;
            }
            stack.push((root, 0));
            while let Some(top) = stack.len().checked_sub(1) {
                let (node, next) = stack[top];
                if next == 0 {
                    state[node] = OPEN;
                }
                if next < 2 {
                    stack[top].1 += 1;
                    let parent = if next == 0 { all[node].sire } else { all[node].dam };
                    if parent == UNKNOWN {
                        continue;
                    }
                    let p = pos[&parent];
                    match state[p] {
                        NEW => stack.push((p, 0)),
                        OPEN => {
                            return Err(Error::Structure(format!(
                                "pedigree cycle through animal {}",
                                all[p].animal
                            )))
                        }
                        _ => {}
                    }
                } else {
                    state[node] = DONE;
                    order.push(node);
                    stack.pop();
                }
            }
        }

        let sorted: Vec<PedigreeEntry> = order.iter().map(|&i| all[i]).collect();
        let index: BTreeMap<i64, usize> = sorted.iter().enumerate().map(|(i, e)| (e.animal, i)).collect();
        let lookup = |id: i64| if id == UNKNOWN { None } else { Some(index[&id]) };
        let parents = sorted.iter().map(|e| (lookup(e.sire), lookup(e.dam))).collect();
        Ok(Self {
            entries: sorted,
            parents,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in parent-first order. Matrix rows follow this order.
    pub fn entries(&self) -> &[PedigreeEntry] {
        &self.entries
    }

    pub fn index_of(&self, animal: i64) -> Option<usize> {
        self.index.get(&animal).copied()
    }

    pub fn parents(&self, i: usize) -> (Option<usize>, Option<usize>) {
        self.parents[i]
    }

    pub fn ids(&self) -> Vec<i64> {
        self.entries.iter().map(|e| e.animal).collect()
    }
}

/// Dense numerator relationship matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationshipMatrix {
    values: Matrix,
}

impl RelationshipMatrix {
    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Inbreeding coefficient `A_ii - 1`.
    pub fn inbreeding(&self, i: usize) -> f64 {
        self.values[(i, i)] - 1.0
    }
}

/// Tabular method: each new animal's row is the mean of its parents' rows.
pub fn relationship_matrix(ped: &Pedigree) -> RelationshipMatrix {
    let n = ped.len();
    let mut a = Matrix::zeros(n, n);
    for j in 0..n {
        let (s, d) = ped.parents(j);
        for i in 0..j {
            let v = 0.5 * (s.map_or(0.0, |s| a[(i, s)]) + d.map_or(0.0, |d| a[(i, d)]));
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a[(j, j)] = 1.0 + match (s, d) {
            (Some(s), Some(d)) => 0.5 * a[(s, d)],
            _ => 0.0,
        };
    }
    RelationshipMatrix { values: a }
}

/// Symmetric sparse matrix stored as full rows sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); dim];
        for (i, j, v) in triplets {
            *acc[i].entry(j).or_insert(0.0) += v;
            if i != j {
                *acc[j].entry(i).or_insert(0.0) += v;
            }
        }
        Self {
            rows: acc.into_iter().map(|r| r.into_iter().collect()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, a)| a * v[j]).sum())
            .collect()
    }

    /// `X' M X` for a dense `dim x t` matrix `X`.
    pub fn quadratic_form(&self, x: &Matrix) -> Matrix {
        let t = x.cols();
        let mut out = Matrix::zeros(t, t);
        for (i, r) in self.rows.iter().enumerate() {
            let xi = x.row(i);
            for &(j, a) in r {
                let xj = x.row(j);
                for p in 0..t {
                    for q in 0..t {
                        out[(p, q)] += a * xi[p] * xj[q];
                    }
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, a) in r {
                m[(i, j)] = a;
            }
        }
        m
    }
}

/// Inbreeding coefficients without forming `A`: each animal's row of the
/// `L` factor in `A = L D L'` is traced through its ancestors, and
/// `F_i = sum_j L_ij^2 d_j - 1`.
pub fn inbreeding_coefficients(ped: &Pedigree) -> Vec<f64> {
    let n = ped.len();
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pending: BTreeMap<usize, f64> = BTreeMap::new();
    for i in 0..n {
        d[i] = mendelian_variance(ped, &f, i);
        let (s, dam) = ped.parents(i);
        if s.is_none() || dam.is_none() {
            continue;
        }
        pending.clear();
        pending.insert(i, 1.0);
        let mut sum = 0.0;
        while let Some((j, l)) = pending.pop_last() {
            sum += l * l * d[j];
            let (ps, pd) = ped.parents(j);
            for p in [ps, pd].into_iter().flatten() {
                *pending.entry(p).or_insert(0.0) += 0.5 * l;
            }
        }
        f[i] = sum - 1.0;
    }
    f
}

/// Variance of the Mendelian sampling term of animal `i` relative to the
/// additive variance: `1/2 - (F_s + F_d)/4` with both parents known,
/// `3/4 - F_p/4` with one, and `1` for founders.
pub fn mendelian_variance(ped: &Pedigree, inbreeding: &[f64], i: usize) -> f64 {
    match ped.parents(i) {
        (Some(s), Some(d)) => 0.5 - 0.25 * (inbreeding[s] + inbreeding[d]),
        (Some(p), None) | (None, Some(p)) => 0.75 - 0.25 * inbreeding[p],
        (None, None) => 1.0,
    }
}

/// Inverse of `A` by the Henderson rules with inbreeding.
pub fn relationship_inverse(ped: &Pedigree) -> SparseSymmetric {
    let n = ped.len();
    let f = inbreeding_coefficients(ped);
    let mut triplets = Vec::with_capacity(n * 6);
    for i in 0..n {
        let (s, d) = ped.parents(i);
        let known: Vec<usize> = [s, d].into_iter().flatten().collect();
        let alpha = 1.0 / mendelian_variance(ped, &f, i);
        triplets.push((i, i, alpha));
        for &p in &known {
            triplets.push((i, p, -0.5 * alpha));
        }
        for (x, &p) in known.iter().enumerate() {
            for &q in &known[x..] {
                triplets.push((p, q, 0.25 * alpha));
            }
        }
    }
    SparseSymmetric::from_triplets(n, triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trio() -> Pedigree {
        Pedigree::new(vec![
            PedigreeEntry::founder(1),
            PedigreeEntry::founder(2),
            PedigreeEntry::new(3, 1, 2),
        ])
        .unwrap()
    }

    #[test]
    fn unrelated_founders_give_identity() {
        let ped = Pedigree::new(vec![PedigreeEntry::founder(10), PedigreeEntry::founder(20)]).unwrap();
        let a = relationship_matrix(&ped);
        assert_eq!(a.values(), &Matrix::identity(2));
        assert_eq!(relationship_inverse(&ped).to_dense(), Matrix::identity(2));
    }

    #[test]
    fn trio_and_full_sibs() {
        let ped = Pedigree::new(vec![
            PedigreeEntry::founder(1),
            PedigreeEntry::founder(2),
            PedigreeEntry::new(3, 1, 2),
            PedigreeEntry::new(4, 1, 2),
        ])
        .unwrap();
        let a = relationship_matrix(&ped);
        let (s, o, sib) = (ped.index_of(1).unwrap(), ped.index_of(3).unwrap(), ped.index_of(4).unwrap());
        assert_eq!(a.get(o, s), 0.5);
        assert_eq!(a.get(o, o), 1.0);
        assert_eq!(a.get(o, sib), 0.5);
    }

    #[test]
    fn trio_inverse_follows_rules() {
        let ped = trio();
        let ai = relationship_inverse(&ped);
        let (s, d, o) = (0, 1, 2);
        assert_eq!(ai.get(o, o), 2.0);
        assert_eq!(ai.get(o, s), -1.0);
        assert_eq!(ai.get(o, d), -1.0);
        assert_eq!(ai.get(s, d), 0.5);
        assert_eq!(ai.get(s, s), 1.5);
        let dense_inv = relationship_matrix(&ped).values().inverse().unwrap();
        assert!(ai.to_dense().max_abs_diff(&dense_inv) < 1e-14);
    }

    #[test]
    fn inbred_offspring_inverse() {
        // 5 is the offspring of full sibs 3 and 4.
        let ped = Pedigree::new(vec![
            PedigreeEntry::founder(1),
            PedigreeEntry::founder(2),
            PedigreeEntry::new(3, 1, 2),
            PedigreeEntry::new(4, 1, 2),
            PedigreeEntry::new(5, 3, 4),
            PedigreeEntry::new(6, 5, 0),
        ])
        .unwrap();
        let a = relationship_matrix(&ped);
        assert_eq!(a.inbreeding(ped.index_of(5).unwrap()), 0.25);
        let prod = relationship_inverse(&ped).to_dense().matmul(a.values()).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(6)) < 1e-12);
    }

    #[test]
    fn resorts_and_inserts_missing_parents() {
        let ped = Pedigree::new(vec![
            PedigreeEntry::new(3, 1, 2),
            PedigreeEntry::founder(1),
            PedigreeEntry::new(5, 3, 9),
        ])
        .unwrap();
        assert_eq!(ped.len(), 5);
        for (i, _) in ped.entries().iter().enumerate() {
            let (s, d) = ped.parents(i);
            assert!(s.map_or(true, |s| s < i) && d.map_or(true, |d| d < i));
        }
    }

    #[test]
    fn rejects_cycles_and_duplicates() {
        let cyc = Pedigree::new(vec![PedigreeEntry::new(1, 2, 0), PedigreeEntry::new(2, 1, 0)]);
        assert!(matches!(cyc, Err(Error::Structure(_))));
        let dup = Pedigree::new(vec![PedigreeEntry::founder(1), PedigreeEntry::founder(1)]);
        assert!(matches!(dup, Err(Error::Validation(_))));
        let own = Pedigree::new(vec![PedigreeEntry::new(1, 1, 0)]);
        assert!(matches!(own, Err(Error::Structure(_))));
    }
}
