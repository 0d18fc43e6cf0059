use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Increments are clipped to this many standard deviations.
pub const CLIP_SIGMAS: f64 = 6.0;

/// Reproducible Wiener increments for one trajectory.
///
/// The increment of step `i` is a pure function of `(seed, trajectory_index, i)`:
/// a ChaCha8 keystream keyed by the seed, with the trajectory index as stream id
/// and the step index as block position, mapped to a Gaussian through the
/// inverse normal CDF. Lookups may happen in any order.
#[derive(Debug, Clone)]
pub struct NoisePath {
    pub seed: u64,
    pub trajectory_index: u64,
    fine_dt: f64,
    substeps: u64,
    rng: ChaCha8Rng,
    next_fine: u64,
    clip_events: u64,
    normal: Normal,
}

impl NoisePath {
    pub fn new(seed: u64, trajectory_index: u64, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trajectory_index);
        Self {
            seed,
            trajectory_index,
            fine_dt: dt,
            substeps: 1,
            rng,
            next_fine: 0,
            clip_events: 0,
            normal: Normal::new(0.0, 1.0).unwrap(),
        }
    }

    /// The same Brownian path sampled `factor` times more coarsely: each
    /// increment is the sum of `factor` consecutive increments of `self`.
    pub fn coarsened(&self, factor: u64) -> Self {
        assert!(factor >= 1);
        let mut out = Self::new(self.seed, self.trajectory_index, self.fine_dt);
        out.substeps = self.substeps * factor;
        out
    }

    /// Step of the increments handed out by [`NoisePath::increment`].
    pub fn dt(&self) -> f64 {
        self.fine_dt * self.substeps as f64
    }

    pub fn clip_events(&self) -> u64 {
        self.clip_events
    }

    /// Standard normal variate attached to fine step `index`.
    pub fn standard_normal(&mut self, index: u64) -> f64 {
        if index != self.next_fine {
            self.rng.set_word_pos(2 * index as u128);
        }
        self.next_fine = index + 1;
        let bits = self.rng.next_u64() >> 11;
        let u = (bits as f64 + 0.5) / (1u64 << 53) as f64;
        self.normal.inverse_cdf(u)
    }

    /// Unclipped increment over step `step` of length [`NoisePath::dt`].
    pub fn raw_increment(&mut self, step: u64) -> f64 {
        let scale = self.fine_dt.sqrt();
        let first = step * self.substeps;
        (first..first + self.substeps)
            .map(|i| scale * self.standard_normal(i))
            .sum()
    }

    /// Increment `dW` for `step`, clipped at `CLIP_SIGMAS·√dt`.
    pub fn increment(&mut self, step: u64) -> f64 {
        let dw = self.raw_increment(step);
        let bound = CLIP_SIGMAS * self.dt().sqrt();
        if dw.abs() > bound {
            self.clip_events += 1;
            dw.signum() * bound
        } else {
            dw
        }
    }
}
