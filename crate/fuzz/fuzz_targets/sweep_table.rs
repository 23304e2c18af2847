#![no_main]

use libfuzzer_sys::fuzz_target;
use qdiscrim::io::{read_sweep, write_sweep};

fuzz_target!(|data: &[u8]| {
    let Ok(rows) = read_sweep(data) else { return };
    let mut out = Vec::new();
    write_sweep(&mut out, &rows).unwrap();
    let again = read_sweep(out.as_slice()).expect("written tables parse");
    assert_eq!(again.len(), rows.len());
});
