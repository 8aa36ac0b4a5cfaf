use std::fs;

use rfi::io::{
    read_genetic_values, read_pedigree, read_phenotypes, read_trace, sha256_file, write_genetic_values,
    write_pedigree, write_phenotypes, write_trace,
};
use rfi::CliError;
use rfi_core::chain::run_model_chain;
use rfi_core::data::DIM_LEVELS;
use rfi_core::simulator::{paper_replica_truth, simulate_replica};
use rfi_core::{Matrix, ModelData, ModelFamily, ModelSpec};

#[test]
fn pedigree_and_phenotypes_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_replica(&paper_replica_truth(), 3, false).unwrap();
    let ped = dir.path().join("pedigree.csv");
    let phe = dir.path().join("phenotypes.csv");
    write_pedigree(&ped, sim.pedigree.entries()).unwrap();
    write_phenotypes(&phe, &sim.records).unwrap();
    assert_eq!(read_pedigree(&ped).unwrap(), sim.pedigree.entries());
    assert_eq!(read_phenotypes(&phe, Some(&DIM_LEVELS)).unwrap(), sim.records);
    let header = fs::read_to_string(&phe).unwrap();
    assert!(header.starts_with("animal,dim,test_week,dmi,mbw,milkne,dbw\n"));
}

#[test]
fn missing_cell_reports_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    fs::write(&p, "animal,dim,test_week,dmi,mbw,milkne,dbw\n1,71,1,28,110,20,0.4\n2,72,1,27,,21,0.5\n").unwrap();
    let err = read_phenotypes(&p, None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("row 2") && msg.contains("mbw"), "{msg}");
}

#[test]
fn unknown_dim_and_missing_column_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.csv");
    fs::write(&p, "animal,dim,test_week,dmi,mbw,milkne,dbw\n1,99,1,28,110,20,0.4\n").unwrap();
    let msg = read_phenotypes(&p, Some(&DIM_LEVELS)).unwrap_err().to_string();
    assert!(msg.contains("row 1") && msg.contains("dim"), "{msg}");
    fs::write(&p, "animal,dim,test_week,dmi,mbw,milkne\n1,71,1,28,110,20\n").unwrap();
    let msg = read_phenotypes(&p, None).unwrap_err().to_string();
    assert!(msg.contains("dbw"), "{msg}");
    let missing = read_pedigree(&dir.path().join("absent.csv")).unwrap_err();
    assert!(matches!(missing, CliError::Io { .. }));
    assert_eq!(missing.exit_code(), 4);
}

#[test]
fn trace_and_genetic_values_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_replica(&paper_replica_truth(), 4, true).unwrap();
    let mut spec = ModelSpec::new(ModelFamily::Rsem3);
    spec.mcmc.chain_length = 12;
    spec.mcmc.burn_in = 4;
    let data = ModelData::new(&sim.records, Some(&sim.pedigree), &spec).unwrap();
    let chain = run_model_chain(&spec, &data, 0).unwrap();
    let t = dir.path().join("trace.csv");
    write_trace(&t, &chain).unwrap();
    let (names, trace) = read_trace(&t).unwrap();
    assert_eq!(names, chain.param_names);
    assert_eq!(trace, chain.trace);

    let g = dir.path().join("gv.csv");
    let values = Matrix::from_rows(&[&[0.1, -2.5], &[1.0 / 3.0, 7.0]]);
    write_genetic_values(&g, &[11, 12], &["rfi".into(), "dmi".into()], &values).unwrap();
    assert_eq!(read_genetic_values(&g, "dmi").unwrap(), vec![(11, -2.5), (12, 7.0)]);
    assert_eq!(read_genetic_values(&g, "rfi").unwrap()[1].1, 1.0 / 3.0);
}

#[test]
fn sha256_of_known_content() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("abc.txt");
    fs::write(&p, "abc").unwrap();
    assert_eq!(
        sha256_file(&p).unwrap(),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
}
