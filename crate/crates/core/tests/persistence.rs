use std::fs::File;

use pufshift::attacks::{generate_pcps, read_pcps_csv, train_lr, write_pcps_csv, LrHyper, LrModel};
use pufshift::{generate_chip, DelayMatrix, FoundryParams, ResponseConfig};

#[test]
fn chip_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chip.json");
    let chip = generate_chip(42, FoundryParams::default()).unwrap();
    chip.save(&path).unwrap();
    assert_eq!(DelayMatrix::load(&path).unwrap(), chip);
}

#[test]
fn pcp_csv_file_round_trip_and_model_reload() {
    let dir = tempfile::tempdir().unwrap();
    let chip = generate_chip(3, FoundryParams::default())
        .unwrap()
        .sub_matrix(6)
        .unwrap();
    let pcps = generate_pcps(&chip, 4, 25, ResponseConfig::default(), 9).unwrap();
    let path = dir.path().join("pcps.csv");
    write_pcps_csv(File::create(&path).unwrap(), &pcps).unwrap();
    let back = read_pcps_csv(File::open(&path).unwrap(), 64, 6).unwrap();
    assert_eq!(back, pcps);

    let model = train_lr(
        &back,
        2,
        LrHyper {
            learning_rate: 0.1,
            iterations: 20,
        },
    )
    .unwrap();
    let model_path = dir.path().join("model.json");
    std::fs::write(&model_path, model.to_json().unwrap()).unwrap();
    assert_eq!(
        LrModel::from_json(&std::fs::read_to_string(&model_path).unwrap()).unwrap(),
        model
    );
}
