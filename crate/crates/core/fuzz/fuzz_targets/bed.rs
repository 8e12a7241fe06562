#![no_main]
use libfuzzer_sys::fuzz_target;
use plmmkit::ingest::plink::{bytes_per_variant, BedReader};

// First byte picks the sample count; the rest is the .bed file.
fuzz_target!(|data: &[u8]| {
    let Some((&n, bed)) = data.split_first() else { return };
    let n = usize::from(n) + 1;
    let v = bed.len().saturating_sub(3) / bytes_per_variant(n);
    if let Ok(reader) = BedReader::new(bed, n, v) {
        let mut out = vec![0u8; n];
        for j in 0..v {
            reader.decode_variant(j, &mut out);
            assert!(out.iter().all(|&g| g <= 2 || g == plmmkit::store::MISSING_DOSAGE));
        }
    }
});
