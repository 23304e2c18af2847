#![no_main]

use libfuzzer_sys::fuzz_target;
use qdiscrim::io::read_fits;

fuzz_target!(|data: &[u8]| {
    let _ = read_fits(data);
});
