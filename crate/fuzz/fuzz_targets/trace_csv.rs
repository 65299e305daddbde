#![no_main]

use libfuzzer_sys::fuzz_target;
use mgda_core::descent::read_trace_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_trace_csv(data) {
        for r in &rows {
            assert!(r.active.indices().iter().all(|&i| i < r.f.len()));
        }
    }
});
