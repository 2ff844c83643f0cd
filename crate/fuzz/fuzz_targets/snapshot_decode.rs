#![no_main]

use libfuzzer_sys::fuzz_target;
use vll_core::snapshot::Snapshot;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = Snapshot::decode(data) {
        // Anything accepted must survive a re-encode.
        let again = Snapshot::decode(&s.encode()).expect("re-encoded snapshot decodes");
        assert_eq!(again.encode(), s.encode());
    }
});
