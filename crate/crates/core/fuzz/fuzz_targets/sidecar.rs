#![no_main]
use libfuzzer_sys::fuzz_target;
use plmmkit::store::Sidecar;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Sidecar::parse(text) {
        let again = Sidecar::parse(&s.render()).expect("rendered sidecar parses");
        assert_eq!(again.render(), s.render());
    }
});
