#![no_main]

use libfuzzer_sys::fuzz_target;
use qdiscrim::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = ExperimentConfig::from_toml_str(text) else { return };
    // A validated config must expand into jobs and problems without panicking.
    if let Ok(jobs) = config.jobs() {
        for job in jobs.iter().take(4) {
            if let Ok(problem) = config.problem_for(job) {
                if problem.grid.n_steps() <= 10_000 {
                    let _ = config.guess_fields(&problem, job);
                    let _ = config.shapes(&problem.grid);
                }
            }
        }
    }
});
