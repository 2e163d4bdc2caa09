//! Scenarios, closed-loop episodes and the benchmark harness.

mod bench;
mod dataset;
mod episode;
mod export;
mod scenario;

pub use bench::*;
pub use dataset::*;
pub use episode::*;
pub use export::*;
pub use scenario::{generate_scenario, Layout, Scenario, ScenarioConfig};

/// JSON has no infinity; distances with nothing to measure against are
/// written as `null` and read back as `+inf`.
pub(crate) mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
