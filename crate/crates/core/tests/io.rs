mod common;

use std::path::PathBuf;

use lcirt::estimator::fit;
use lcirt::inference::standardize_report;
use lcirt::io::*;
use lcirt::model::*;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/tiny").join(name)
}

fn tiny() -> (ItemMap, LoadedData, RunConfig) {
    let map = read_item_map(fixture("items.csv")).unwrap();
    let cfg = RunConfig::load(fixture("run.toml")).unwrap();
    let data = read_data(fixture("data.csv"), &map, cfg.covariates.as_deref()).unwrap();
    (map, data, cfg)
}

#[test]
fn fixture_is_parsed_cell_by_cell() {
    let (map, loaded, cfg) = tiny();
    assert_eq!(map.items, ["q1", "q2", "q3"]);
    assert_eq!(map.dimension_labels, ["math"]);
    assert_eq!(loaded.covariate_names, ["age"]);
    let d = &loaded.data;
    assert_eq!((d.n_subjects(), d.n_items(), d.n_covariates()), (8, 3, 1));
    // NA and the empty cell both count as missing.
    assert_eq!(d.missing_count(), 5);
    assert_eq!(d.response(1, 1), Response::Missing);
    assert_eq!(d.response(3, 2), Response::Missing);
    assert_eq!(d.response(4, 0), Response::Correct);
    assert_eq!(d.covariates(4), [1.5]);
    assert_eq!(cfg.model.ability_classes, 2);
    assert_eq!(cfg.em.n_starts, 2);
}

#[test]
fn all_non_item_columns_are_covariates_by_default() {
    let map = read_item_map(fixture("items.csv")).unwrap();
    let loaded = read_data(fixture("data.csv"), &map, None).unwrap();
    assert_eq!(loaded.covariate_names, ["id", "age"]);
    assert_eq!(loaded.data.covariates(7), [8.0, -0.6]);
}

#[test]
fn report_reproduces_the_library_loglik() {
    let (map, loaded, cfg) = tiny();
    let spec = cfg.spec(1, 3, 1).unwrap();
    let f = fit(&spec, &map.design, &loaded.data, &cfg.em).unwrap();
    let d = &loaded.data;
    let std = standardize_report(&f, &map.design, d).unwrap();
    let report = FitReport::build(&f, &std, &map, &loaded.covariate_names, d.n_subjects(), d.missing_count());
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    let back: FitReport = read_json(dir.path().join("fit.json")).unwrap();
    assert_eq!(back, report);
    let p = back.to_parameters(&map.design).unwrap();
    assert_eq!(p, f.params);
    assert_eq!(log_likelihood(&p, &map.design, &loaded.data).unwrap(), back.loglik);
    assert_eq!(back.npar, count_parameters(&spec).unwrap());

    let rasch = ModelSpec { parametrization: Parametrization::Rasch, ..spec };
    assert!(count_parameters(&rasch).unwrap() < back.npar);
}

#[test]
fn data_round_trips_through_csv() {
    let mut rng = common::rng(5);
    let d = common::noise_data(30, 4, 2, 0.3, &mut rng);
    let map = ItemMap::generic(&common::halves(4));
    let names = vec!["x1".to_string(), "x2".to_string()];
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path().join("d.csv"), &d, &map, &names).unwrap();
    write_item_map(dir.path().join("m.csv"), &map).unwrap();
    let map2 = read_item_map(dir.path().join("m.csv")).unwrap();
    assert_eq!(map2, map);
    let back = read_data(dir.path().join("d.csv"), &map2, None).unwrap();
    assert_eq!(back.data, d);
    assert_eq!(back.covariate_names, names);
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn malformed_tables_are_parse_errors_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let map = ItemMap::new(vec![("a".into(), "U".into()), ("b".into(), "U".into())]).unwrap();
    let bad_cell = write(&dir, "bad.csv", "a,b,x\n1,0,0.5\n1,2,0.1\n");
    match read_data(&bad_cell, &map, None) {
        Err(lcirt::Error::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (3, "b")),
        other => panic!("{other:?}"),
    }
    let bad_cov = write(&dir, "cov.csv", "a,b,x\n1,0,abc\n");
    assert!(matches!(read_data(&bad_cov, &map, None), Err(lcirt::Error::Parse { row: 2, .. })));
    let nan_cov = write(&dir, "nan.csv", "a,b,x\n1,0,NaN\n");
    assert!(matches!(read_data(&nan_cov, &map, None), Err(lcirt::Error::Parse { .. })));
    let no_col = write(&dir, "nocol.csv", "a,x\n1,0.5\n");
    assert!(matches!(read_data(&no_col, &map, None), Err(lcirt::Error::Parse { row: 1, .. })));
    let ragged = write(&dir, "ragged.csv", "a,b,x\n1,0\n");
    assert!(read_data(&ragged, &map, None).is_err());
    let dup = write(&dir, "dup.csv", "item,dimension\na,U\na,V\n");
    assert!(matches!(read_item_map(&dup), Err(lcirt::Error::Config(_))));
    let empty = write(&dir, "empty.csv", "item,dimension\na,\n");
    assert!(matches!(read_item_map(&empty), Err(lcirt::Error::Parse { row: 2, .. })));
    assert!(matches!(read_item_map(dir.path().join("absent.csv")), Err(lcirt::Error::Io { .. })));
}

#[test]
fn config_rejects_unknown_and_invalid_fields() {
    assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    assert!(RunConfig::from_toml_str("[model]\nclasses = 3\n").is_err());
    assert!(RunConfig::from_toml_str("surprise = 1\n").is_err());
    assert!(RunConfig::from_toml_str("[model]\nability_classes = 0\n").is_err());
    assert!(RunConfig::from_toml_str("[bootstrap]\nreplicates = 1\n").is_err());
    assert!(RunConfig::from_toml_str("[em]\nrel_tol = -1.0\n").is_err());
    assert!(RunConfig::from_toml_str("[model]\nparametrization = \"3pl\"\n").is_err());
    let cfg = RunConfig::from_toml_str(
        "[[grid]]\nability_classes = 2\npropensity_classes = 1\nparametrization = \"rasch\"\nmissing_mode = \"mar\"\n",
    )
    .unwrap();
    assert_eq!(cfg.selection_grid().len(), 1);
    assert_eq!(RunConfig::default().selection_grid().len(), 4);
}

#[test]
fn config_survives_a_toml_round_trip() {
    let mut cfg = RunConfig::default();
    cfg.em.n_starts = 4;
    cfg.covariates = Some(vec!["x1".into()]);
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
}

proptest! {
    #[test]
    fn covariates_round_trip_exactly(xs in prop::collection::vec(-1e6f64..1e6, 1..20)) {
        let n = xs.len();
        let d = Dataset::new(2, 1, vec![Response::Correct; 2 * n], xs).unwrap();
        let map = ItemMap::generic(&ItemDesign::contiguous(&[2]).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_data(&path, &d, &map, &["x".to_string()]).unwrap();
        prop_assert_eq!(read_data(&path, &map, None).unwrap().data, d);
    }
}
