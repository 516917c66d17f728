#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = htq_cli::parse_distribution(s) {
        // anything that parses must be usable
        let _ = d.mean();
        let _ = d.support_hi();
        let _ = d.density_bound();
    }
});
