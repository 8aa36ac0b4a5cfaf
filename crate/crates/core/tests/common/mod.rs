#![allow(dead_code)]

use rand::Rng;
use rfi_core::dist::{self, ChainRng};
use rfi_core::pedigree::PedigreeEntry;
use rfi_core::simulator::{self, SimulatedData};
use rfi_core::{Matrix, ModelData, ModelFamily, ModelSpec, Pedigree};

pub fn rng(seed: u64) -> ChainRng {
    dist::stream(seed, 99)
}

/// Random parent-first pedigree with ids `1..=n`; parents are unknown with
/// probability 0.3, otherwise any earlier animal.
pub fn random_pedigree(n: usize, rng: &mut ChainRng) -> Pedigree {
    let mut entries = Vec::with_capacity(n);
    for i in 1..=n as i64 {
        let mut pick = |avoid: i64| {
            if i == 1 || rng.random::<f64>() < 0.3 {
                return 0;
            }
            let p = rng.random_range(1..i);
            if p == avoid { 0 } else { p }
        };
        let sire = pick(0);
        let dam = pick(sire);
        entries.push(PedigreeEntry::new(i, sire, dam));
    }
    Pedigree::new(entries).unwrap()
}

/// `B B' + eps I` for a random `k x k` matrix `B`.
pub fn random_spd(k: usize, rng: &mut ChainRng) -> Matrix {
    let b = Matrix::from_fn(k, k, |_, _| dist::standard_normal(rng));
    b.matmul(&b.transpose()).unwrap().add(&Matrix::identity(k).scale(0.05))
}

pub fn small_replica(seed: u64) -> SimulatedData {
    let truth = simulator::paper_replica_truth();
    let pedigree = simulator::simulate_pedigree(20, 60, 150, seed).unwrap();
    let sizes = simulator::DesignSizes { dim_levels: rfi_core::data::DIM_LEVELS.to_vec(), n_test_weeks: 12 };
    let records = simulator::simulate_phenotypes(&pedigree, &truth, &sizes, seed).unwrap();
    SimulatedData { pedigree, records, truth }
}

pub fn spec(family: ModelFamily) -> ModelSpec {
    let mut s = ModelSpec::new(family);
    s.mcmc.n_chains = 2;
    s.mcmc.chain_length = 60;
    s.mcmc.burn_in = 20;
    s.mcmc.thin = 2;
    s
}

pub fn model_data(sim: &SimulatedData, spec: &ModelSpec) -> ModelData {
    ModelData::new(&sim.records, Some(&sim.pedigree), spec).unwrap()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
        .fold(0.0, f64::max)
}
