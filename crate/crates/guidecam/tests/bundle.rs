mod common;

use std::fs;

use guidecam::bundle::{load_bundle, read_manifest, save_bundle, ExtractionBundle, Preprocessing};
use guidecam::npy::save_npy;
use guidecam::Error;
use guidecam_core::Tensor;
use proptest::prelude::*;
use serde_json::json;

use common::{bundle, parts, tensor};

#[test]
fn full_size_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let b = bundle(512, 14, 14, 224, 224, 1000);
    save_bundle(&b, dir.path()).unwrap();
    let loaded = load_bundle(dir.path()).unwrap();
    assert_eq!(loaded.class_index(), 500);
    assert_eq!(loaded.features().spatial_dims(), (14, 14));
    assert_eq!(loaded.features().channels(), 512);
    assert_eq!(loaded.class_scores().len(), 1000);
    assert!(loaded.bit_eq(&b));
}

#[test]
fn gradient_shape_mismatch() {
    let mut p = parts(512, 14, 14, 224, 224, 1000);
    p.gradients = tensor(&[512, 7, 7], 9);
    assert!(matches!(ExtractionBundle::new(p), Err(Error::Shape(_))));
}

#[test]
fn mismatch_on_disk_is_caught_at_load() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&bundle(8, 14, 14, 32, 32, 10), dir.path()).unwrap();
    save_npy(&dir.path().join("gradients.npy"), &tensor(&[8, 7, 7], 5)).unwrap();
    let mut manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    manifest["tensors"]["gradients"]["shape"] = json!([8, 7, 7]);
    fs::write(dir.path().join("manifest.json"), manifest.to_string()).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::Shape(_))));
}

#[test]
fn nan_in_features() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&bundle(4, 3, 3, 8, 8, 5), dir.path()).unwrap();
    let mut data = common::ramp(36, 2);
    data[17] = f32::NAN;
    save_npy(
        &dir.path().join("features.npy"),
        &Tensor::new(vec![4, 3, 3], data).unwrap(),
    )
    .unwrap();
    match load_bundle(dir.path()) {
        Err(Error::NonFiniteData { tensor, index }) => {
            assert_eq!(tensor, "features");
            assert_eq!(index, 17);
        }
        other => panic!("expected NonFiniteData, got {other:?}"),
    }
}

#[test]
fn infinity_in_image() {
    let mut p = parts(2, 2, 2, 4, 4, 3);
    p.image.data_mut()[0] = f32::INFINITY;
    assert!(matches!(
        ExtractionBundle::new(p),
        Err(Error::NonFiniteData { .. })
    ));
}

#[test]
fn missing_components() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_bundle(dir.path()),
        Err(Error::MissingComponent(_))
    ));
    save_bundle(&bundle(2, 2, 2, 4, 4, 3), dir.path()).unwrap();
    fs::remove_file(dir.path().join("class_scores.npy")).unwrap();
    assert!(matches!(
        load_bundle(dir.path()),
        Err(Error::MissingComponent(_))
    ));
}

#[test]
fn corrupt_manifest_and_dtype() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&bundle(2, 2, 2, 4, 4, 3), dir.path()).unwrap();
    let path = dir.path().join("manifest.json");
    let good = fs::read_to_string(&path).unwrap();

    fs::write(&path, "{ not json").unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::Format(_))));

    let mut m: serde_json::Value = serde_json::from_str(&good).unwrap();
    m["tensors"]["image"]["dtype"] = json!("<f8");
    fs::write(&path, m.to_string()).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::Format(_))));

    let mut m: serde_json::Value = serde_json::from_str(&good).unwrap();
    m["class_index"] = json!(3);
    fs::write(&path, m.to_string()).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::Shape(_))));
}

#[test]
fn empty_feature_stack() {
    let mut p = parts(1, 2, 2, 4, 4, 3);
    p.features = Tensor::new(vec![0, 2, 2], vec![]).unwrap();
    p.gradients = Tensor::new(vec![0, 2, 2], vec![]).unwrap();
    assert!(matches!(ExtractionBundle::new(p), Err(Error::Shape(_))));
}

#[test]
fn image_smaller_than_features() {
    assert!(matches!(
        ExtractionBundle::new(parts(2, 8, 8, 4, 4, 3)),
        Err(Error::Shape(_))
    ));
}

#[test]
fn preprocessing_and_extra_keys_preserved() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = parts(2, 2, 2, 4, 4, 3);
    p.preprocessing = Preprocessing {
        resize: [256, 240],
        mean: [0.5, 0.25, 0.125],
        std: [0.1, 0.2, 0.3],
    };
    p.extra.insert("gradient_target".into(), json!("logit"));
    save_bundle(&ExtractionBundle::new(p.clone()).unwrap(), dir.path()).unwrap();

    let manifest = read_manifest(dir.path()).unwrap();
    assert_eq!(manifest.preprocessing, p.preprocessing);
    assert_eq!(manifest.extra.get("gradient_target"), Some(&json!("logit")));
    let raw: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(raw["preprocessing"]["mean"], json!([0.5, 0.25, 0.125]));
    assert_eq!(
        load_bundle(dir.path()).unwrap().preprocessing(),
        &p.preprocessing
    );
}

#[test]
fn checked_in_fixtures_load() {
    for stem in ["a", "b", "c"] {
        let b = load_bundle(&common::fixture(&format!("collection/{stem}.bundle"))).unwrap();
        assert_eq!(b.image_dims(), (32, 32));
        assert_eq!(b.features().channels(), 4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_valid_bundle_round_trips(
        k in 1..6usize, fh in 1..5usize, fw in 1..5usize, up in 1..3usize, classes in 1..12usize,
        seed in any::<u32>(),
    ) {
        let mut p = parts(k, fh, fw, fh * up, fw * up, classes);
        p.features = tensor(&[k, fh, fw], seed);
        p.class_index = seed as usize % classes;
        let b = ExtractionBundle::new(p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&b, dir.path()).unwrap();
        let loaded = load_bundle(dir.path()).unwrap();
        prop_assert!(loaded.bit_eq(&b));
        prop_assert_eq!(loaded, b);
    }
}
