//! Innovation laws, residual pools and seeded random streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const MIXTURE_LOW_WEIGHT: f64 = 0.9;
const MIXTURE_LOW_MEAN: f64 = -1.0;
const MIXTURE_HIGH_MEAN: f64 = 9.0;

/// A reproducible random number stream identified by `(seed, stream)`.
///
/// Backed by ChaCha8 with the stream id mapped onto ChaCha's native stream
/// counter, so distinct ids never share state.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A child stream, independent of the parent's draw position.
    ///
    /// Children of the same parent share a derived seed and differ by stream
    /// id; children of different parents get different seeds.
    pub fn derive(&self, child: u64) -> RandomStream {
        let seed = splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x5851_f42d_4c95_7f2d)));
        RandomStream::new(seed, child)
    }

    /// Uniform index in `0..len`.
    pub fn index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Anything that can supply one additive shock per time step.
pub trait Innovation: Sync {
    fn draw(&self, rng: &mut RandomStream) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// N(0, 1).
    Normal,
    /// Exp(1) - 1.
    Exp,
    /// N(-1, 1) with probability 0.9, N(9, 1) with probability 0.1.
    Mixture,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Normal, NoiseKind::Exp, NoiseKind::Mixture];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Normal => "normal",
            NoiseKind::Exp => "exp",
            NoiseKind::Mixture => "mixture",
        }
    }

    /// Standard deviation of the unit-scale law.
    pub fn sd(self) -> f64 {
        match self {
            NoiseKind::Normal | NoiseKind::Exp => 1.0,
            // 0.9 * (1 + 1) + 0.1 * (1 + 81)
            NoiseKind::Mixture => 10f64.sqrt(),
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(NoiseKind::Normal),
            "exp" => Ok(NoiseKind::Exp),
            "mixture" => Ok(NoiseKind::Mixture),
            other => Err(Error::InvalidSpec(format!("unknown noise kind {other:?}"))),
        }
    }
}

/// A zero-mean innovation law, optionally rescaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl NoiseSpec {
    pub fn standard(kind: NoiseKind) -> Self {
        Self { kind, scale: 1.0 }
    }

    pub fn scaled(kind: NoiseKind, scale: f64) -> Self {
        Self { kind, scale }
    }

    pub fn sd(&self) -> f64 {
        self.scale * self.kind.sd()
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let unit = match self.kind {
            NoiseKind::Normal => StandardNormal.sample(rng),
            NoiseKind::Exp => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            NoiseKind::Mixture => {
                let u: f64 = rng.random();
                let z: f64 = StandardNormal.sample(rng);
                if u < MIXTURE_LOW_WEIGHT {
                    MIXTURE_LOW_MEAN + z
                } else {
                    MIXTURE_HIGH_MEAN + z
                }
            }
        };
        self.scale * unit
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = x / self.scale;
        let unit = match self.kind {
            NoiseKind::Normal => std_normal_pdf(z),
            NoiseKind::Exp => {
                if z >= -1.0 {
                    (-(z + 1.0)).exp()
                } else {
                    0.0
                }
            }
            NoiseKind::Mixture => {
                MIXTURE_LOW_WEIGHT * std_normal_pdf(z - MIXTURE_LOW_MEAN)
                    + (1.0 - MIXTURE_LOW_WEIGHT) * std_normal_pdf(z - MIXTURE_HIGH_MEAN)
            }
        };
        unit / self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = x / self.scale;
        match self.kind {
            NoiseKind::Normal => std_normal_cdf(z),
            NoiseKind::Exp => {
                if z <= -1.0 {
                    0.0
                } else {
                    -(-(z + 1.0)).exp_m1()
                }
            }
            NoiseKind::Mixture => {
                MIXTURE_LOW_WEIGHT * std_normal_cdf(z - MIXTURE_LOW_MEAN)
                    + (1.0 - MIXTURE_LOW_WEIGHT) * std_normal_cdf(z - MIXTURE_HIGH_MEAN)
            }
        }
    }
}

impl Innovation for NoiseSpec {
    fn draw(&self, rng: &mut RandomStream) -> f64 {
        self.sample(rng)
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Centered, variance-corrected residuals resampled with replacement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualPool {
    values: Vec<f64>,
    rescale: f64,
}

impl ResidualPool {
    /// Optionally centers `residuals`, then multiplies every element by `rescale`.
    pub fn new(residuals: &[f64], rescale: f64, center: bool) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::EmptyPool);
        }
        let offset = if center {
            residuals.iter().sum::<f64>() / residuals.len() as f64
        } else {
            0.0
        };
        let values = residuals.iter().map(|e| (e - offset) * rescale).collect();
        Ok(Self { values, rescale })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rescale(&self) -> f64 {
        self.rescale
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Innovation for ResidualPool {
    fn draw(&self, rng: &mut RandomStream) -> f64 {
        self.values[rng.index(self.values.len())]
    }
}

/// Variance inflation √((n - p)/(n - 2p)) for residuals of a fitted lag-p model.
pub fn variance_correction(n: usize, p: usize) -> Result<f64> {
    if n <= 2 * p {
        return Err(Error::VarianceCorrection { n, p });
    }
    Ok((((n - p) as f64) / ((n - 2 * p) as f64)).sqrt())
}

/// Centered residual pool rescaled by √((n - p)/(n - 2p)).
pub fn make_residual_pool(residuals: &[f64], n: usize, p: usize) -> Result<ResidualPool> {
    ResidualPool::new(residuals, variance_correction(n, p)?, true)
}
