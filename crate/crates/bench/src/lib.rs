//! Benchmark fixtures shared by the criterion targets.

use hybridlin::sim::Scenario;

/// Benchmark scenario cut to `seconds` of simulated time.
pub fn short_scenario(seconds: f64) -> Scenario {
    Scenario { duration: seconds, ..Scenario::benchmark() }
}
