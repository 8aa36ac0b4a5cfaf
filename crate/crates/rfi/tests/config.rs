use std::fs;

use rfi::config::Config;
use rfi_core::ModelFamily;

#[test]
fn defaults_describe_the_replica_protocol() {
    let cfg = Config::default();
    let spec = cfg.model_spec().unwrap();
    assert_eq!(spec.family, ModelFamily::Rsem3);
    assert_eq!(spec.mcmc.n_chains, 30);
    assert_eq!(spec.mcmc.chain_length, 2200);
    assert_eq!(spec.mcmc.saved_per_chain(), 600);
    assert_eq!(cfg.simulate.offspring, 645);
}

#[test]
fn load_resolves_data_paths_and_priors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.toml");
    fs::write(
        &p,
        "[model]\nfamily = \"mt_chol\"\n[mcmc]\nchains = 3\nlength = 100\nburnin = 40\n[priors]\ntau2 = 1e12\n[data]\npedigree = \"ped.csv\"\n",
    )
    .unwrap();
    let cfg = Config::load(&p).unwrap();
    assert_eq!(cfg.data.pedigree, dir.path().join("ped.csv"));
    assert_eq!(cfg.data.phenotypes, dir.path().join("phenotypes.csv"));
    let spec = cfg.model_spec().unwrap();
    assert_eq!(spec.family, ModelFamily::MtChol);
    assert_eq!(spec.priors.tau2, 1e12);
    assert_eq!(spec.mcmc.n_chains, 3);
}

#[test]
fn invalid_configs_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    for text in ["[mcmc]\nchainz = 3\n", "[model]\nfamily = \"rsem9\"\n", "[mcmc]\nlength = 10\nburnin = 10\n"] {
        fs::write(&p, text).unwrap();
        let err = Config::load(&p).and_then(|c| c.model_spec().map(|_| ()));
        assert_eq!(err.unwrap_err().exit_code(), 2, "{text}");
    }
}
