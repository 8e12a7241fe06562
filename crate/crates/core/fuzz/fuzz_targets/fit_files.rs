#![no_main]
use libfuzzer_sys::fuzz_target;
use plmmkit::path::{parse_beta_sparse, parse_fitinfo, parse_lambda};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_lambda(text, "lambda.txt");
    let _ = parse_fitinfo(text, "fitinfo.txt");
    let names = ["rs1".to_string(), "rs2".to_string(), "(Intercept)".to_string()];
    let _ = parse_beta_sparse(text, &names, 3, "beta.sparse");
});
