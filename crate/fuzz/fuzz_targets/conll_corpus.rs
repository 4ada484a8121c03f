#![no_main]

use libfuzzer_sys::fuzz_target;
use synsrl::conll::{read_corpus, score, write_corpus};
use synsrl::syntax::{trees_for, TreeSource};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(corpus) = read_corpus(text) else { return };
    // anything that parses must round-trip and score perfectly against itself
    let again = read_corpus(&write_corpus(&corpus)).expect("written corpus parses");
    assert_eq!(again, corpus);
    let r = score(&corpus, &corpus, false).expect("self-score");
    assert!(r.predicted == r.gold && r.correct == r.gold);
    for source in [TreeSource::Gold, TreeSource::Predicted, TreeSource::AutoDel] {
        let _ = trees_for(&corpus, &source);
    }
});
