//! Seeded 2-D simplex noise, sampled along a line to drive the toy goals.

use crate::math;
use crate::rng;
use rand::Rng as _;

use super::ToyConfig;

const GRADIENTS: [(f64, f64); 8] = [
    (1.0, 1.0),
    (-1.0, 1.0),
    (1.0, -1.0),
    (-1.0, -1.0),
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
];

/// Classic 2-D simplex gradient noise with a seed-shuffled permutation table.
#[derive(Debug, Clone)]
pub struct SimplexNoise {
    perm: [u8; 512],
}

impl SimplexNoise {
    pub fn new(seed: u64) -> Self {
        let mut table = [0u8; 256];
        for (i, v) in table.iter_mut().enumerate() {
            *v = i as u8;
        }
        let mut rng = rng::seeded(seed);
        for i in (1..256).rev() {
            let j = rng.gen_range(0..=i);
            table.swap(i, j);
        }
        let mut perm = [0u8; 512];
        for (i, v) in perm.iter_mut().enumerate() {
            *v = table[i & 255];
        }
        Self { perm }
    }

    #[inline]
    fn corner(&self, i: i64, j: i64, x: f64, y: f64) -> f64 {
        let t = 0.5 - x * x - y * y;
        if t <= 0.0 {
            return 0.0;
        }
        let ii = (i & 255) as usize;
        let jj = (j & 255) as usize;
        let (gx, gy) = GRADIENTS[(self.perm[ii + self.perm[jj] as usize] & 7) as usize];
        let t2 = t * t;
        t2 * t2 * (gx * x + gy * y)
    }

    /// Noise value at `(x, y)`, roughly within `[-1, 1]`.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let sqrt3 = math::sqrt(3.0);
        let f2 = 0.5 * (sqrt3 - 1.0);
        let g2 = (3.0 - sqrt3) / 6.0;

        let s = (x + y) * f2;
        let i = math::floor(x + s);
        let j = math::floor(y + s);
        let t = (i + j) * g2;
        let x0 = x - (i - t);
        let y0 = y - (j - t);
        let (i1, j1) = if x0 > y0 { (1, 0) } else { (0, 1) };
        let x1 = x0 - i1 as f64 + g2;
        let y1 = y0 - j1 as f64 + g2;
        let x2 = x0 - 1.0 + 2.0 * g2;
        let y2 = y0 - 1.0 + 2.0 * g2;

        let (i, j) = (i as i64, j as i64);
        let n = self.corner(i, j, x0, y0) + self.corner(i + i1, j + j1, x1, y1) + self.corner(i + 1, j + 1, x2, y2);
        70.0 * n
    }
}

/// Goal trajectory: a horizontal slice of the noise field, clamped to
/// `[-1, 1]`, with time measured in environment steps.
#[derive(Debug, Clone)]
pub struct GoalSignal {
    noise: SimplexNoise,
    frequency: f64,
}

/// Row of the noise field the goal signal follows; off the lattice so the
/// slice does not pass through the zero-valued simplex vertices.
const SLICE_Y: f64 = 17.31;

impl GoalSignal {
    pub fn new(config: &ToyConfig) -> Self {
        Self {
            noise: SimplexNoise::new(config.noise_seed),
            frequency: config.noise_frequency,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.noise.sample(t * self.frequency, SLICE_Y).clamp(-1.0, 1.0)
    }
}

/// Goal value at time `t` (in steps) for the noise seed in `config`.
pub fn noise_eval(t: f64, config: &ToyConfig) -> f64 {
    GoalSignal::new(config).at(t)
}
