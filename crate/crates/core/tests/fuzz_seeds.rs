//! Replays the checked-in fuzz seed corpora through the fuzz targets'
//! invariants on the stable toolchain.

use std::fs;
use std::path::PathBuf;

use synsrl::config::{read_settings, ModelConfig, TrainSchedule};
use synsrl::conll::{read_corpus, score, write_corpus};
use synsrl::syntax::{Vocab, VocabKind};
use synsrl::vocabs::RoleLabels;
use synsrl_tensor::read_archive;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn conll_seeds_parse_round_trip_and_self_score() {
    for (name, bytes) in seeds("conll_corpus") {
        let corpus = read_corpus(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(read_corpus(&write_corpus(&corpus)).unwrap(), corpus, "{name}");
        let r = score(&corpus, &corpus, false).unwrap();
        assert_eq!((r.predicted, r.correct), (r.gold, r.gold), "{name}");
    }
}

#[test]
fn vocab_seeds_round_trip() {
    for (name, bytes) in seeds("vocab_text") {
        let text = std::str::from_utf8(&bytes).unwrap();
        if name.starts_with("role") {
            let r = RoleLabels::from_text(text).unwrap();
            assert_eq!(RoleLabels::from_text(&r.to_text()).unwrap(), r);
        } else {
            let v = Vocab::from_text(VocabKind::RelPath, text).unwrap();
            assert_eq!(v.to_text(), text);
        }
    }
}

#[test]
fn archive_seeds_read() {
    for (name, bytes) in seeds("tensor_archive") {
        let ok = if name.contains("f32") {
            read_archive::<f32>(&bytes).is_ok()
        } else {
            read_archive::<f64>(&bytes).is_ok()
        };
        assert!(ok, "{name}");
    }
}

#[test]
fn settings_seeds_apply() {
    for (name, bytes) in seeds("settings_manifest") {
        let text = std::str::from_utf8(&bytes).unwrap();
        let (mut model, mut schedule) = (ModelConfig::tiny(), TrainSchedule::desk());
        read_settings(text, &mut model, &mut schedule).unwrap_or_else(|e| panic!("{name}: {e}"));
        model.validate().unwrap();
        assert_eq!(ModelConfig::from_manifest(&model.to_manifest()).unwrap(), model);
    }
}
