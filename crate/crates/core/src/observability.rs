//! Observability Gramians under missed position measurements.
//!
//! Each spatial axis carries an independent 2x2 (position, velocity)
//! Gramian. The adversarial Gramian masks the position row on missed steps;
//! the standard Gramian keeps every row. Their trace ratio quantifies how
//! much observability the missed measurements cost.

use nalgebra::Matrix2;

/// Running Gramian pair for one axis.
#[derive(Debug, Clone, PartialEq)]
struct AxisGramian {
    adversarial: Matrix2<f64>,
    standard: Matrix2<f64>,
    transition: Matrix2<f64>,
}

impl AxisGramian {
    fn new() -> Self {
        Self {
            adversarial: Matrix2::zeros(),
            standard: Matrix2::zeros(),
            transition: Matrix2::identity(),
        }
    }

    fn accumulate(&mut self, dt_next: f64, measured: bool) {
        let phi = self.transition;
        // C^T C is either the identity (position measured) or the
        // velocity-row selector.
        self.standard += phi.transpose() * phi;
        if measured {
            self.adversarial += phi.transpose() * phi;
        } else {
            let velocity_only = Matrix2::new(0.0, 0.0, 0.0, 1.0);
            self.adversarial += phi.transpose() * velocity_only * phi;
        }
        let step = Matrix2::new(1.0, dt_next, 0.0, 1.0);
        self.transition = step * phi;
    }
}

/// Per-axis Gramian accumulator with the shared availability sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct GramianAccumulator {
    axes: [AxisGramian; 3],
    samples: Vec<(f64, bool)>,
}

/// Per-axis and aggregate observability quality (trace ratio in [0, 1]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservabilityQuality {
    pub per_axis: [f64; 3],
    pub mean: f64,
}

impl Default for GramianAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl GramianAccumulator {
    pub fn new() -> Self {
        Self {
            axes: [AxisGramian::new(), AxisGramian::new(), AxisGramian::new()],
            samples: Vec::new(),
        }
    }

    /// Records step `k`: adds the current-step output term, then advances the
    /// transition by the interval to the next step. `measured` is false on a
    /// missed position measurement.
    pub fn record_step(&mut self, dt_next: f64, measured: bool) {
        assert!(dt_next > 0.0, "sampling interval must be positive");
        for axis in &mut self.axes {
            axis.accumulate(dt_next, measured);
        }
        self.samples.push((dt_next, measured));
    }

    pub fn steps(&self) -> usize {
        self.samples.len()
    }

    /// Sampling record: (interval to next step, measured flag) per step.
    pub fn samples(&self) -> &[(f64, bool)] {
        &self.samples
    }

    /// Trace of the adversarial Gramian on one axis.
    pub fn trace_adversarial(&self) -> f64 {
        self.axes[0].adversarial.trace()
    }

    /// Trace of the standard (all measurements) Gramian on one axis.
    pub fn trace_standard(&self) -> f64 {
        self.axes[0].standard.trace()
    }

    /// Trace ratio per axis and averaged. The standard trace is strictly
    /// positive for any recorded step because the velocity row always
    /// contributes.
    pub fn quality_ratio(&self) -> ObservabilityQuality {
        assert!(self.steps() >= 1, "quality ratio needs at least one step");
        let mut per_axis = [0.0; 3];
        for (i, axis) in self.axes.iter().enumerate() {
            let std_trace = axis.standard.trace();
            assert!(std_trace > 0.0, "standard Gramian trace must be positive");
            per_axis[i] = axis.adversarial.trace() / std_trace;
        }
        ObservabilityQuality {
            per_axis,
            mean: per_axis.iter().sum::<f64>() / 3.0,
        }
    }
}

/// Closed-form approximate lower bound on the quality ratio under even
/// sampling with every position measurement missed: 1 / (2 + dt^2 n (2n+1) / 6).
/// The n-term series evaluates to a slightly different coefficient, so the
/// bound is approximate; the accumulator is authoritative.
pub fn even_sampling_lower_bound(n: usize, dt: f64) -> f64 {
    let n = n as f64;
    1.0 / (2.0 + dt * dt * n * (2.0 * n + 1.0) / 6.0)
}
