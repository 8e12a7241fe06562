#![no_main]
use libfuzzer_sys::fuzz_target;
use plmmkit::inference::parse_cve;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((lambda, cve, cvse)) = parse_cve(text, "cve.txt") {
        assert!(lambda.len() == cve.len() && cve.len() == cvse.len());
    }
});
