//! Synthetic display-advertising instances: `m` advertisers, one ad slot per
//! period, click-through rates drawn from per-advertiser log-normal
//! mixtures clamped to `[0, 1]`, and identity cost matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Instance, Request};
use crate::error::{Error, Result};

/// Total budget rate `Σ_j ρ_j` after normalization.
pub const BUDGET_TOTAL: f64 = 1.5;
pub const DEFAULT_ADVERTISERS: usize = 12;

const DEFAULT_MIXTURE_WEIGHTS: [f64; 2] = [0.7, 0.3];
const MU_LOG_RANGE: (f64, f64) = (-3.5, -1.5);
const SIGMA_LOG_RANGE: (f64, f64) = (0.3, 0.8);
const RHO_PROFILE_RANGE: (f64, f64) = (0.5, 1.5);

fn default_m() -> usize {
    DEFAULT_ADVERTISERS
}

/// Log-normal mixture of one advertiser's click-through rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtrMixture {
    pub weights: Vec<f64>,
    pub mu_log: Vec<f64>,
    pub sigma_log: Vec<f64>,
}

impl CtrMixture {
    fn validate(&self, j: usize) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.mu_log.len() != k || self.sigma_log.len() != k {
            return Err(Error::InvalidConfig(format!(
                "mixture {j}: components must be nonempty with equal lengths"
            )));
        }
        if self.weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "mixture {j}: negative weight"
            )));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "mixture {j}: weights sum to {total}"
            )));
        }
        if self.sigma_log.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "mixture {j}: sigma_log must be positive"
            )));
        }
        if self.mu_log.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mixture {j}: non-finite mu_log"
            )));
        }
        Ok(())
    }

    /// One draw, clamped to `[0, 1]`.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let dist = LogNormal::new(self.mu_log[k], self.sigma_log[k]).expect("validated sigma");
        dist.sample(rng).min(1.0)
    }
}

/// Generator parameters. Empty `rho_profile` / `ctr_model` are filled from
/// `seed` by [`GeneratorConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub rho_profile: Vec<f64>,
    #[serde(default)]
    pub ctr_model: Vec<CtrMixture>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            m: DEFAULT_ADVERTISERS,
            rho_profile: Vec::new(),
            ctr_model: Vec::new(),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Fully populated synthetic parameters for `m` advertisers.
    pub fn synthetic(m: usize, seed: u64) -> Result<Self> {
        Self {
            m,
            seed,
            ..Self::default()
        }
        .resolve()
    }

    /// Fills missing parameters from the seed, rescales `ρ` to sum to
    /// [`BUDGET_TOTAL`] and validates.
    pub fn resolve(&self) -> Result<Self> {
        if self.m == 0 {
            return Err(Error::InvalidConfig(
                "generator needs at least one advertiser".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = self.clone();
        if out.rho_profile.is_empty() {
            out.rho_profile = (0..self.m)
                .map(|_| rng.random_range(RHO_PROFILE_RANGE.0..RHO_PROFILE_RANGE.1))
                .collect();
        }
        if out.ctr_model.is_empty() {
            out.ctr_model = (0..self.m)
                .map(|_| {
                    let k = DEFAULT_MIXTURE_WEIGHTS.len();
                    CtrMixture {
                        weights: DEFAULT_MIXTURE_WEIGHTS.to_vec(),
                        mu_log: (0..k)
                            .map(|_| rng.random_range(MU_LOG_RANGE.0..MU_LOG_RANGE.1))
                            .collect(),
                        sigma_log: (0..k)
                            .map(|_| rng.random_range(SIGMA_LOG_RANGE.0..SIGMA_LOG_RANGE.1))
                            .collect(),
                    }
                })
                .collect();
        }
        if out.rho_profile.len() != self.m || out.ctr_model.len() != self.m {
            return Err(Error::DimensionMismatch {
                what: "generator profile".into(),
                expected: self.m,
                found: out.rho_profile.len().min(out.ctr_model.len()),
            });
        }
        if let Some(j) = out
            .rho_profile
            .iter()
            .position(|r| !(*r > 0.0 && r.is_finite()))
        {
            return Err(Error::NonPositiveBudgetRate {
                j,
                value: out.rho_profile[j],
            });
        }
        let total: f64 = out.rho_profile.iter().sum();
        out.rho_profile
            .iter_mut()
            .for_each(|r| *r *= BUDGET_TOTAL / total);
        for (j, mix) in out.ctr_model.iter().enumerate() {
            mix.validate(j)?;
        }
        Ok(out)
    }
}

/// Draws `horizon` requests. Request `t` has `q_j` from advertiser `j`'s
/// mixture and the `m × m` identity cost matrix.
pub fn generate_instance(cfg: &GeneratorConfig, horizon: usize, seed: u64) -> Result<Instance> {
    let cfg = cfg.resolve()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let requests = (0..horizon)
        .map(|_| {
            let q = cfg
                .ctr_model
                .iter()
                .map(|mix| mix.sample(&mut rng))
                .collect();
            Request::with_identity_costs(q)
        })
        .collect();
    Instance::new(cfg.rho_profile, requests)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one sweep cell: a fixed function of `(base, λ index, T, trial)`.
pub fn trial_seed(base: u64, lambda_index: usize, horizon: usize, trial: usize) -> u64 {
    [lambda_index as u64, horizon as u64, trial as u64]
        .into_iter()
        .fold(mix64(base), |acc, v| {
            mix64(acc.wrapping_mul(0xFF51_AFD7_ED55_8CCD) ^ v)
        })
}
