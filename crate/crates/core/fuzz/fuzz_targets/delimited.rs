#![no_main]
use libfuzzer_sys::fuzz_target;
use plmmkit::ingest::{parse_delimited, DelimitedOptions, Delimiter};

// First byte selects delimiter, header and id-column options.
fuzz_target!(|data: &[u8]| {
    let Some((&flags, text)) = data.split_first() else {
        return;
    };
    let opts = DelimitedOptions {
        delimiter: if flags & 1 == 0 {
            Delimiter::Char(',')
        } else {
            Delimiter::Whitespace
        },
        has_header: flags & 2 != 0,
        id_column: flags & 4 != 0,
    };
    let _ = parse_delimited(text, opts, "fuzz.csv");
});
