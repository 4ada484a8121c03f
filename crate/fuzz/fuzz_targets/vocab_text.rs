#![no_main]

use libfuzzer_sys::fuzz_target;
use synsrl::syntax::{Vocab, VocabKind};
use synsrl::vocabs::RoleLabels;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = Vocab::from_text(VocabKind::RelPath, text) {
        assert_eq!(Vocab::from_text(VocabKind::RelPath, &v.to_text()).expect("round trip"), v);
    }
    if let Ok(r) = RoleLabels::from_text(text) {
        assert_eq!(RoleLabels::from_text(&r.to_text()).expect("round trip"), r);
    }
});
