#![no_main]

use libfuzzer_sys::fuzz_target;
use qdiscrim::dynamics::NoiseKind;
use qdiscrim::io::read_m_table;
use qdiscrim::protocols::{fit_effective_time, MCurve};

fuzz_target!(|data: &[u8]| {
    let Ok((deltas, ms)) = read_m_table(data) else { return };
    assert_eq!(deltas.len(), ms.len());
    if let Ok(curve) = MCurve::new(deltas, ms, 1e-3) {
        if let Ok(fit) = fit_effective_time(&curve, NoiseKind::Relaxation) {
            assert!(fit.gamma_eff.is_finite() && fit.gamma_eff > 0.0);
        }
    }
});
