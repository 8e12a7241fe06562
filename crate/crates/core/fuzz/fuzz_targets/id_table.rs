#![no_main]
use libfuzzer_sys::fuzz_target;
use plmmkit::design::IdTable;
use plmmkit::ingest::Delimiter;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = IdTable::parse(data, Delimiter::Whitespace, "fuzz.txt") {
        let _ = t.column("id");
    }
});
