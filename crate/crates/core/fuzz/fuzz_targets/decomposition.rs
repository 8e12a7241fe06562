#![no_main]
use libfuzzer_sys::fuzz_target;
use plmmkit::decomp::Decomposition;

// Metadata text, a NUL byte, then the raw eigenvector and eigenvalue bytes.
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let Ok(meta) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    let bytes = data.get(split + 1..).unwrap_or(&[]);
    let _ = Decomposition::from_parts(meta, bytes);
});
