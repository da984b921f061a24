//! Deterministic multi-robot coordination simulator under adversarial
//! perception.
//!
//! The pipeline per robot and tick: a synthetic detector renders ground-truth
//! bounding boxes, attack injectors corrupt the detection set
//! (misclassification, spurious boxes, overload latency), surviving boxes are
//! localized into 3D relative-position candidates, a Kalman filter with
//! intermittent measurements gates/associates/fuses them with VIO velocity
//! data, and a distributed consensus controller closes the loop over a
//! simulated lossy network. Observability Gramians and covariance norms
//! quantify the attack-induced degradation.

pub mod adversary;
pub mod estimation;
pub mod geometry;
pub mod harness;
pub mod observability;
pub mod perception;
pub mod seeds;
pub mod swarm;

pub use harness::config::ScenarioConfig;
pub use harness::metrics::{RunSummary, TickRecord};
pub use harness::runner::{run_scenario, RunError, RunOutput};
pub use harness::sweep::{sweep, SweepAxis, SweepReport};
