use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rfi::runner::{run_chains_parallel, RunSummary};
use rfi::workflow::{Comparison, Manifest};
use rfi_core::chain::run_chains_sequential;
use rfi_core::simulator::{paper_replica_truth, simulate_replica};
use rfi_core::{ModelData, ModelFamily, ModelSpec};

fn rfi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfi")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A simulated replica plus a short-chain config pointing at it.
fn setup(dir: &Path) -> PathBuf {
    let sim = dir.join("sim");
    let out = rfi(&["simulate", "--out", p(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cfg = dir.join("fit.toml");
    fs::write(
        &cfg,
        "[mcmc]\nchains = 2\nlength = 80\nburnin = 40\nthin = 2\n[data]\npedigree = \"sim/pedigree.csv\"\nphenotypes = \"sim/phenotypes.csv\"\n",
    )
    .unwrap();
    cfg
}

#[test]
fn simulate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(rfi(&["simulate", "--seed", "9", "--out", p(&a)]).status.success());
    assert!(rfi(&["simulate", "--seed", "9", "--out", p(&b)]).status.success());
    assert!(rfi(&["simulate", "--seed", "10", "--out", p(&c)]).status.success());
    for f in ["pedigree.csv", "phenotypes.csv", "truth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("phenotypes.csv")).unwrap(), fs::read(c.join("phenotypes.csv")).unwrap());
    let rows = fs::read_to_string(a.join("phenotypes.csv")).unwrap().lines().count();
    assert_eq!(rows, 646);
    let m: Manifest = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.seed, 9);
    assert!(m.outputs.iter().all(|o| a.join(o).exists()));
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "[simulate]\noffspring = 0\n").unwrap();
    let out = rfi(&["simulate", "--config", p(&cfg), "--out", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = rfi(&["fit", "--family", "rsem9"]);
    assert_eq!(out.status.code(), Some(2));

    let out = rfi(&["diagnose", p(&dir.path().join("missing"))]);
    assert_eq!(out.status.code(), Some(4));

    let out = rfi(&["fit", "--config", p(&dir.path().join("absent.toml"))]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn lr1_reports_published_partial_regressions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let run = dir.path().join("lr1");
    let out = rfi(&["fit", "--config", p(&cfg), "--family", "lr1", "--out", p(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(run.join("coefficients.csv")).unwrap();
    let coef: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (b, want) in coef.iter().zip([0.351, 0.514, 0.117]) {
        assert!((b - want).abs() < 0.01, "{b} vs {want}");
    }
    let m: Manifest = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.inputs.len(), 2);
    assert!(m.outputs.iter().all(|o| run.join(o).exists()));
}

#[test]
fn fit_diagnose_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let run = dir.path().join("rsem3");
    let out = rfi(&["fit", "--config", p(&cfg), "--family", "rsem3", "--out", p(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: RunSummary = serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.family, ModelFamily::Rsem3);
    assert_eq!(summary.saved_per_chain, 20);
    let h = summary.heritability["rfi"];
    assert!(h.mean > 0.0 && h.mean < 1.0 && h.sd > 0.0);
    for f in ["samples_chain0.csv", "samples_chain1.csv", "diagnostics.csv", "genetic_values.csv", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let again = dir.path().join("rsem3b");
    assert!(rfi(&["fit", "--config", p(&cfg), "--family", "rsem3", "--out", p(&again)]).status.success());
    for f in ["samples_chain0.csv", "trace_chain1.csv", "summary.json", "genetic_values.csv", "diagnostics.csv"] {
        assert_eq!(fs::read(run.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }

    let diag = dir.path().join("diag.csv");
    let out = rfi(&["diagnose", p(&run), "--stride", "20", "--out", p(&diag)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&diag).unwrap();
    assert!(text.starts_with("param,iteration,sf\n"));
    assert!(text.lines().any(|l| l.starts_with("lambda.mbw,80,")));

    let cmp = dir.path().join("cmp.csv");
    let out = rfi(&["compare", p(&run), p(&again), "--out", p(&cmp)]);
    assert!(out.status.success());
    let c: Comparison = serde_json::from_slice(&out.stdout).unwrap();
    assert!((c.spearman - 1.0).abs() < 1e-12);
    assert_eq!(c.animals, 1247);
    assert!(fs::read_to_string(&cmp).unwrap().starts_with("animal,gv_model_a,gv_model_b,rank_a,rank_b\n"));

    let single = dir.path().join("single");
    assert!(rfi(&["fit", "--config", p(&cfg), "--family", "rsem1", "--out", p(&single)]).status.success());
    fs::remove_file(single.join("trace_chain1.csv")).unwrap();
    let mut m: Manifest = serde_json::from_str(&fs::read_to_string(single.join("manifest.json")).unwrap()).unwrap();
    m.chains.truncate(1);
    fs::write(single.join("manifest.json"), serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(rfi(&["diagnose", p(&single)]).status.code(), Some(2));
    // RSEM1 fits no animal effects, so it has no genetic values to compare.
    assert_eq!(rfi(&["compare", p(&run), p(&single), "--out", p(&cmp)]).status.code(), Some(4));
}

#[test]
fn parallel_chains_equal_sequential_chains() {
    let sim = simulate_replica(&paper_replica_truth(), 12, true).unwrap();
    for family in [ModelFamily::Rsem3, ModelFamily::Mt] {
        let mut spec = ModelSpec::new(family);
        spec.mcmc.n_chains = 3;
        spec.mcmc.chain_length = 30;
        spec.mcmc.burn_in = 10;
        let data = ModelData::new(&sim.records, Some(&sim.pedigree), &spec).unwrap();
        let par: Vec<_> = run_chains_parallel(&spec, &data).into_iter().map(Result::unwrap).collect();
        let seq: Vec<_> = run_chains_sequential(&spec, &data).into_iter().map(Result::unwrap).collect();
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.trace, b.trace);
            assert_eq!(a.genetic_values, b.genetic_values);
        }
    }
}
