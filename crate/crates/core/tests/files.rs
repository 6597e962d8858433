use std::fs;

use distinguish_core::matrix::{binarize, load_raw_answers};
use distinguish_core::simulation::PopulationSpec;
use distinguish_core::{load_matrix, save_matrix, Error};

#[test]
fn saved_matrix_loads_back_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let m = PopulationSpec::uniform(13, 70, 4).generate().unwrap();
    save_matrix(&m, &path).unwrap();
    assert_eq!(load_matrix(&path).unwrap(), m);
    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.starts_with("model_id,"));
}

#[test]
fn malformed_cell_reports_its_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    fs::write(&path, "model_id,q0,q1\na,0,1\nb,1,x\n").unwrap();
    match load_matrix(&path) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn raw_answers_binarize_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    fs::write(
        &path,
        "model_id,question_id,chosen,gold\nm1,q1,A,A\nm1,q2,?,C\nm2,q1,B,A\nm2,q2,C,C\n",
    )
    .unwrap();
    let b = binarize(&load_raw_answers(&path).unwrap()).unwrap();
    assert_eq!(b.unparseable, 1);
    assert_eq!(b.matrix.row(0).to_string(), "10");
    assert_eq!(b.matrix.row(1).to_string(), "01");
}
