#![no_main]

use libfuzzer_sys::fuzz_target;
use qdiscrim::io::read_field;

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = read_field(data) {
        if let Ok(grid) = samples.grid() {
            let field = samples.into_field(&grid).expect("a field matches its own grid");
            assert_eq!(field.len(), grid.n_steps());
        }
    }
});
