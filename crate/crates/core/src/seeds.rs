//! Deterministic seed fan-out: one master seed derives independent
//! substreams per (robot, subsystem) so toggling one noise source never
//! perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Subsystems with their own random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Detector,
    Misclassification,
    Mislocalization,
    Vio,
    /// Network link, keyed by (sender, receiver).
    Link(u64, u64),
}

impl Subsystem {
    fn tag(self) -> u64 {
        match self {
            Subsystem::Detector => 0x01,
            Subsystem::Misclassification => 0x02,
            Subsystem::Mislocalization => 0x03,
            Subsystem::Vio => 0x04,
            Subsystem::Link(a, b) => 0x05 ^ mix(a.wrapping_add(1)) ^ mix(b.wrapping_add(0x1000)),
        }
    }
}

/// splitmix64 finalizer; decorrelates structured inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for the substream of one robot/subsystem pair.
pub fn substream_seed(master: u64, robot_id: u64, subsystem: Subsystem) -> u64 {
    mix(master ^ mix(robot_id.wrapping_add(0xA5A5)) ^ mix(subsystem.tag()))
}

/// Substream generator for one robot/subsystem pair.
pub fn substream(master: u64, robot_id: u64, subsystem: Subsystem) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, robot_id, subsystem))
}

/// Seed for the i-th run of a multi-seed sweep point.
pub fn sweep_run_seed(master: u64, run_index: u64) -> u64 {
    mix(master ^ mix(run_index.wrapping_add(0xC3D2)))
}
