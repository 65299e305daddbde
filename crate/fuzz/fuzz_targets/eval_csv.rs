#![no_main]

use libfuzzer_sys::fuzz_target;
use mgda_core::marl::{read_eval_csv, write_eval_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(evals) = read_eval_csv(data) else { return };
    let mut out = Vec::new();
    write_eval_csv(&evals, &mut out).unwrap();
    assert_eq!(read_eval_csv(out.as_slice()).unwrap(), evals);
});
