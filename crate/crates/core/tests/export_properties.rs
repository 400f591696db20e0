use std::io::Write;
use std::process::{Command, Stdio};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smartchair_core::classify::*;
use smartchair_core::dataset::{split_train_test, synth_cohort, CohortSpec, LabeledDataset, SplitSpec};
use smartchair_core::export::*;
use smartchair_core::{Error, PostureLabel, N_CLASSES, N_SENSORS};

fn small_cohort() -> LabeledDataset {
    synth_cohort(&CohortSpec { masses_kg: vec![55.0, 85.0], seconds_per_posture: 20.0, ..CohortSpec::default() })
        .unwrap()
        .0
}

fn quick_spec(kind: ModelKind, seed: u64) -> ModelSpec {
    match ModelSpec::default_for(kind, seed) {
        ModelSpec::Rf(p) => ModelSpec::Rf(RfParams { n_trees: 15, ..p }),
        ModelSpec::Mlp(p) => ModelSpec::Mlp(MlpParams { epochs: 20, ..p }),
        other => other,
    }
}

fn random_inputs(n: usize, seed: u64) -> Vec<[f64; N_SENSORS]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| std::array::from_fn(|_| rng.random_range(0..=4095) as f64)).collect()
}

#[test]
fn round_trip_all_kinds() {
    let ds = small_cohort();
    for kind in ModelKind::ALL {
        let model = train(&quick_spec(kind, 3), &ds).unwrap();
        let art = export_model(&model, ArtifactFormat::Binary).unwrap();
        let loaded = load_model(&art).unwrap();
        assert_eq!(loaded.params, model.params, "{kind}");
        assert_eq!(loaded.spec, model.spec);
        for x in random_inputs(10_000, kind.code() as u64) {
            assert_eq!(loaded.predict_row(&x), model.predict_row(&x));
        }
        // Training twice gives a different wall time but the same bytes.
        let again = export_model(&train(&quick_spec(kind, 3), &ds).unwrap(), ArtifactFormat::Binary).unwrap();
        assert_eq!(again.payload, art.payload);
        assert_eq!(export_model(&model, ArtifactFormat::FirmwareSource).unwrap(), export_model(&model, ArtifactFormat::FirmwareSource).unwrap());
    }
}

#[test]
fn every_single_byte_corruption_is_caught() {
    let model = train(&quick_spec(ModelKind::Dt, 0), &small_cohort()).unwrap();
    let art = export_model(&model, ArtifactFormat::Binary).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..art.payload.len() {
        let mut bytes = art.payload.clone();
        bytes[i] ^= rng.random_range(1..=255u8);
        assert!(matches!(load_bytes(&bytes), Err(Error::Corruption(_))), "byte {i}");
    }
    for cut in [0, 3, 11, art.payload.len() - 1] {
        assert!(load_bytes(&art.payload[..cut]).is_err());
    }
}

#[test]
fn future_version_names_both_versions() {
    let model = train(&quick_spec(ModelKind::Svm, 0), &small_cohort()).unwrap();
    let mut bytes = export_model(&model, ArtifactFormat::Binary).unwrap().payload;
    bytes[4..6].copy_from_slice(&7u16.to_le_bytes());
    let n = bytes.len();
    let crc = crc32fast::hash(&bytes[..n - 4]);
    bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
    let err = load_bytes(&bytes).unwrap_err();
    assert!(matches!(err, Error::Version { found: 7, supported: 1 }));
    let msg = err.to_string();
    assert!(msg.contains('7') && msg.contains('1'), "{msg}");
}

#[test]
fn firmware_artifacts_do_not_load() {
    let model = train(&quick_spec(ModelKind::Dt, 0), &small_cohort()).unwrap();
    let art = export_model(&model, ArtifactFormat::FirmwareSource).unwrap();
    assert!(matches!(load_model(&art), Err(Error::UnsupportedFormat(_))));
    assert!(matches!("onnx".parse::<ArtifactFormat>(), Err(Error::UnsupportedFormat(_))));
}

/// Rows of the node table that are splits rather than leaves.
fn split_rows(source: &str) -> usize {
    let start = source.find("NODES[] = {").expect("node table");
    let table = &source[start..];
    let end = table.find("};").unwrap();
    table[..end].lines().skip(1).filter(|l| l.trim_start().starts_with('{') && !l.contains("LEAF")).count()
}

#[test]
fn depth_one_tree_has_one_decision_node() {
    let spec = ModelSpec::Dt(DtParams { max_depth: 1, min_leaf: 1 });
    let model = train(&spec, &small_cohort()).unwrap();
    let text = String::from_utf8(export_model(&model, ArtifactFormat::FirmwareSource).unwrap().payload).unwrap();
    assert_eq!(split_rows(&text), 1);
    assert!(text.contains("int classify(const uint16_t counts[N_SENSORS])"));
    assert!(!text.contains("malloc"));
}

#[test]
fn default_forest_fits_the_flash_budget() {
    let (ds, _) = synth_cohort(&CohortSpec::default()).unwrap();
    let (train_set, _) = split_train_test(&ds, &SplitSpec::default()).unwrap();
    let model = train(&ModelSpec::default_for(ModelKind::Rf, 1), &train_set).unwrap();
    let art = export_model(&model, ArtifactFormat::Binary).unwrap();
    assert!(art.payload.len() <= 256 * 1024, "{} bytes", art.payload.len());
}

fn arb_dataset() -> impl Strategy<Value = LabeledDataset> {
    // Every class appears so all four kinds can train.
    (prop::collection::vec((prop::array::uniform10(0u16..=4095), 0usize..N_CLASSES), 0..40)).prop_map(|extra| {
        let mut rows: Vec<_> = (0..N_CLASSES)
            .map(|c| smartchair_core::dataset::DatasetRow {
                timestamp_ms: c as u64,
                counts: [(c * 500) as u16; N_SENSORS],
                label: PostureLabel::from_index(c).unwrap(),
            })
            .collect();
        rows.extend(extra.into_iter().enumerate().map(|(i, (counts, c))| smartchair_core::dataset::DatasetRow {
            timestamp_ms: 100 + i as u64,
            counts,
            label: PostureLabel::from_index(c).unwrap(),
        }));
        LabeledDataset::from_rows(rows, "prop")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_small_models_round_trip(ds in arb_dataset(), seed in any::<u64>(), k in 0usize..4) {
        let kind = ModelKind::ALL[k];
        let spec = match quick_spec(kind, seed) {
            ModelSpec::Rf(p) => ModelSpec::Rf(RfParams { n_trees: 4, ..p }),
            ModelSpec::Mlp(p) => ModelSpec::Mlp(MlpParams { epochs: 3, ..p }),
            other => other,
        };
        let model = train(&spec, &ds).unwrap();
        let loaded = load_model(&export_model(&model, ArtifactFormat::Binary).unwrap()).unwrap();
        for x in random_inputs(200, seed) {
            prop_assert_eq!(loaded.predict_row(&x), model.predict_row(&x));
        }
    }
}

/// Compiles the emitted source with the system C compiler and runs it over
/// `rows`. `None` when no compiler is available.
fn run_firmware(source: &str, rows: &[[u16; N_SENSORS]]) -> Option<Vec<usize>> {
    let dir = tempfile::tempdir().unwrap();
    let harness = format!(
        "{source}\n#include <stdio.h>\nint main(void) {{\n    uint16_t c[N_SENSORS];\n    \
         while (scanf(\"%hu %hu %hu %hu %hu %hu %hu %hu %hu %hu\", &c[0], &c[1], &c[2], &c[3], &c[4], &c[5], &c[6], &c[7], &c[8], &c[9]) == 10)\n        \
         printf(\"%d\\n\", classify(c));\n    return 0;\n}}\n"
    );
    let src = dir.path().join("model.c");
    let exe = dir.path().join("model");
    std::fs::write(&src, harness).unwrap();
    let status = Command::new("cc").args(["-std=c99", "-O1", "-Wall", "-Werror", "-o"]).arg(&exe).arg(&src).status();
    match status {
        Ok(s) if s.success() => {}
        Ok(s) => panic!("firmware source failed to compile: {s}"),
        Err(_) => return None,
    }
    let mut child = Command::new(&exe).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    let mut input = String::new();
    for r in rows {
        let vals: Vec<String> = r.iter().map(u16::to_string).collect();
        input.push_str(&vals.join(" "));
        input.push('\n');
    }
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    Some(String::from_utf8(out.stdout).unwrap().lines().map(|l| l.parse().unwrap()).collect())
}

#[test]
fn compiled_firmware_agrees_with_the_model() {
    let ds = small_cohort();
    let mut rows: Vec<[u16; N_SENSORS]> = ds.rows.iter().map(|r| r.counts).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    rows.extend((0..2000).map(|_| std::array::from_fn(|_| rng.random_range(0..=4095u16))));
    for kind in ModelKind::ALL {
        let model = train(&quick_spec(kind, 5), &ds).unwrap();
        let text = String::from_utf8(export_model(&model, ArtifactFormat::FirmwareSource).unwrap().payload).unwrap();
        let Some(got) = run_firmware(&text, &rows) else {
            eprintln!("no C compiler; skipping firmware check");
            return;
        };
        assert_eq!(got.len(), rows.len());
        let agree = rows.iter().zip(&got).filter(|(r, &c)| model.predict_counts(r).label.index() == c).count();
        match kind {
            ModelKind::Dt | ModelKind::Rf => assert_eq!(agree, rows.len(), "{kind}"),
            // Fixed-point rounding may flip near-ties.
            _ => assert!(agree as f64 >= 0.995 * rows.len() as f64, "{kind}: {agree}/{}", rows.len()),
        }
    }
}
