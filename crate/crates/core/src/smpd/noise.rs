use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::SmpdParams;

/// Slow fluctuations at one instant: relative efficiency change and
/// common-mode rate offset [1/s].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSample {
    pub eta_rel: f64,
    pub walk: f64,
}

impl NoiseSample {
    pub const QUIET: Self = Self {
        eta_rel: 0.0,
        walk: 0.0,
    };
}

/// Efficiency drift and rate random walk sampled on a fixed grid and
/// interpolated linearly. Advances forward only.
///
/// The drift is `A tanh(X / 2)` with X a unit Ornstein-Uhlenbeck process, so
/// |eta - eta0| / eta0 < A at all times.
#[derive(Debug, Clone)]
pub struct NoiseProcess {
    grid_ns: u64,
    amplitude: f64,
    decay: f64,
    kick: f64,
    walk_step: f64,
    rng: ChaCha8Rng,
    /// Grid index of `lo`.
    index: u64,
    lo: (f64, f64),
    hi: (f64, f64),
}

impl NoiseProcess {
    pub fn new(params: &SmpdParams, rng: ChaCha8Rng) -> Self {
        let dt = params.noise_grid_s;
        let tau = params.eta_drift.correlation_min * 60.0;
        let decay = (-dt / tau).exp();
        let mut p = Self {
            grid_ns: (dt * 1e9).round().max(1.0) as u64,
            amplitude: params.eta_drift.amplitude,
            decay,
            kick: (1.0 - decay * decay).sqrt(),
            walk_step: (params.rate_walk_diffusion * dt).sqrt(),
            rng,
            index: 0,
            lo: (0.0, 0.0),
            hi: (0.0, 0.0),
        };
        // Start the drift in its stationary distribution and the walk at zero.
        let x0: f64 = p.rng.sample(StandardNormal);
        p.lo = (x0, 0.0);
        p.hi = p.next_node(p.lo);
        p
    }

    pub fn grid_ns(&self) -> u64 {
        self.grid_ns
    }

    fn next_node(&mut self, (x, w): (f64, f64)) -> (f64, f64) {
        let zx: f64 = self.rng.sample(StandardNormal);
        let zw: f64 = self.rng.sample(StandardNormal);
        (x * self.decay + self.kick * zx, w + self.walk_step * zw)
    }

    fn advance_to(&mut self, index: u64) {
        assert!(index >= self.index, "noise process only moves forward");
        while self.index < index {
            self.lo = self.hi;
            self.hi = self.next_node(self.lo);
            self.index += 1;
        }
    }

    fn node_sample(&self, (x, w): (f64, f64)) -> NoiseSample {
        NoiseSample {
            eta_rel: self.amplitude * (0.5 * x).tanh(),
            walk: w,
        }
    }

    /// Samples at both ends of the grid cell holding `t_ns`, with the cell
    /// bounds. Linear interpolation inside the cell keeps extremes at the ends.
    pub fn cell(&mut self, t_ns: u64) -> (u64, u64, NoiseSample, NoiseSample) {
        let index = t_ns / self.grid_ns;
        self.advance_to(index);
        let start = index * self.grid_ns;
        (
            start,
            start + self.grid_ns,
            self.node_sample(self.lo),
            self.node_sample(self.hi),
        )
    }

    pub fn at(&mut self, t_ns: u64) -> NoiseSample {
        let (start, _, a, b) = self.cell(t_ns);
        let f = (t_ns - start) as f64 / self.grid_ns as f64;
        NoiseSample {
            eta_rel: a.eta_rel + f * (b.eta_rel - a.eta_rel),
            walk: a.walk + f * (b.walk - a.walk),
        }
    }
}
