#![no_main]
use libfuzzer_sys::fuzz_target;
use plmmkit::ingest::plink::parse_bim;

fuzz_target!(|data: &[u8]| {
    let _ = parse_bim(data, "fuzz.bim");
});
