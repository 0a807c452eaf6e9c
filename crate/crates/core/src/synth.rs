//! Synthetic resonator ensembles generated from known tangents, used to
//! check the whole pipeline end to end.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{DesignId, ParticipationMatrix, ResonatorMeasurement};
use crate::predict::forward_loss;
use crate::region::RegionArray;
use crate::sle::design_stream_key;

/// High-power quality factor assigned to every synthetic resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HighPowerModel {
    Fixed(f64),
    Infinite,
}

impl HighPowerModel {
    pub fn value(self) -> f64 {
        match self {
            HighPowerModel::Fixed(q) => q,
            HighPowerModel::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub matrix: ParticipationMatrix,
    pub true_tangents: RegionArray<f64>,
    pub n_per_design: usize,
    /// Coefficient of variation of the multiplicative lognormal noise on Q_TLS.
    pub relative_noise: f64,
    pub q_hp_model: HighPowerModel,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("n_per_design must be at least 1")]
    NoResonators,
    #[error("relative noise must lie in [0, 1), got {0}")]
    BadNoise(f64),
    #[error("true tangents must be finite and non-negative")]
    BadTangents,
    #[error("high-power Q must be positive, got {0}")]
    BadHighPower(f64),
    #[error("zero predicted loss for {0}: Q_TLS is infinite and Q_LP cannot be formed")]
    ZeroLoss(DesignId),
    #[error("participation matrix failed validation: {0}")]
    InvalidMatrix(String),
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_per_design == 0 {
            return Err(SynthError::NoResonators);
        }
        if !(self.relative_noise >= 0.0 && self.relative_noise < 1.0) {
            return Err(SynthError::BadNoise(self.relative_noise));
        }
        if self.true_tangents.values().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(SynthError::BadTangents);
        }
        if let HighPowerModel::Fixed(q) = self.q_hp_model {
            if !(q > 0.0 && q.is_finite()) {
                return Err(SynthError::BadHighPower(q));
            }
        }
        let v = self.matrix.validate();
        if !v.is_empty() {
            let msg: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            return Err(SynthError::InvalidMatrix(msg.join("; ")));
        }
        Ok(())
    }

    /// Noise-free Q_TLS of every design, in row order.
    pub fn true_q_tls(&self) -> Vec<f64> {
        self.matrix
            .rows()
            .iter()
            .map(|row| 1.0 / forward_loss(row, &self.true_tangents))
            .collect()
    }
}

/// Low-power Q that yields `q_tls` against the given high-power Q.
pub fn low_power_q(q_tls: f64, q_hp: f64) -> f64 {
    if q_hp.is_infinite() {
        q_tls
    } else {
        q_tls * q_hp / (q_tls + q_hp)
    }
}

fn resonator_rng(seed: u64, design_key: u64, index: u64) -> ChaCha8Rng {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&design_key.to_le_bytes());
    s[16..24].copy_from_slice(&index.to_le_bytes());
    // distinguishes these streams from the extraction's
    s[24] = 0x5e;
    ChaCha8Rng::from_seed(s)
}

/// `n_per_design` resonators for every design of the matrix.
pub fn generate(spec: &SynthSpec) -> Result<Vec<ResonatorMeasurement>, SynthError> {
    spec.validate()?;
    let sigma2 = (1.0 + spec.relative_noise * spec.relative_noise).ln();
    let sigma = sigma2.sqrt();
    let q_hp = spec.q_hp_model.value();

    let mut out = Vec::with_capacity(spec.matrix.n_rows() * spec.n_per_design);
    for (design, row) in spec.matrix.designs().iter().zip(spec.matrix.rows()) {
        let loss = forward_loss(row, &spec.true_tangents);
        if !(loss > 0.0) {
            return Err(SynthError::ZeroLoss(design.clone()));
        }
        let true_q = 1.0 / loss;
        let key = design_stream_key(design);
        for k in 0..spec.n_per_design {
            let q = if spec.relative_noise == 0.0 {
                true_q
            } else {
                let z: f64 = StandardNormal.sample(&mut resonator_rng(spec.rng_seed, key, k as u64));
                true_q * (sigma * z - 0.5 * sigma2).exp()
            };
            out.push(ResonatorMeasurement {
                design: design.clone(),
                resonator_id: format!("r{k:02}"),
                q_lp: low_power_q(q, q_hp),
                q_hp,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DesignKind;
    use crate::qtls::{ensemble_stats, q_tls};

    fn single(p: [f64; 4]) -> ParticipationMatrix {
        ParticipationMatrix::new(
            vec![DesignId::new(DesignKind::MADesign, "TiN", "none")],
            vec![RegionArray(p)],
        )
    }

    fn spec(noise: f64, model: HighPowerModel) -> SynthSpec {
        SynthSpec {
            // loss 0.001 * 1e-3 = 1e-6
            matrix: single([0.0, 0.0, 0.001, 0.0]),
            true_tangents: RegionArray([0.0, 0.0, 1e-3, 0.0]),
            n_per_design: 5,
            relative_noise: noise,
            q_hp_model: model,
            rng_seed: 7,
        }
    }

    #[test]
    fn noiseless_infinite_high_power() {
        let s = spec(0.0, HighPowerModel::Infinite);
        let ms = generate(&s).unwrap();
        let q = s.true_q_tls()[0];
        assert_eq!(ms.len(), 5);
        assert!(ms.iter().all(|m| m.q_lp == q && m.q_hp.is_infinite()));
    }

    #[test]
    fn noiseless_fixed_high_power() {
        let s = spec(0.0, HighPowerModel::Fixed(5e6));
        let ms = generate(&s).unwrap();
        let q = s.true_q_tls()[0];
        // 1 / (1/q + 1/5e6) for q = 1e6 is 833_333.33...
        assert!((q - 1e6).abs() < 1e-6);
        assert!((ms[0].q_lp - 833_333.333_333_333_3).abs() < 1e-6);
        let back = q_tls(ms[0].q_lp, ms[0].q_hp).unwrap();
        assert!((back - q).abs() / q < 1e-14);
    }

    #[test]
    fn zero_loss_is_an_error() {
        let mut s = spec(0.0, HighPowerModel::Fixed(5e6));
        s.true_tangents = RegionArray::splat(0.0);
        assert!(matches!(generate(&s), Err(SynthError::ZeroLoss(_))));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let s = spec(0.05, HighPowerModel::Fixed(5e6));
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let mut t = s.clone();
        t.rng_seed += 1;
        assert_ne!(generate(&s).unwrap(), generate(&t).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(0.0, HighPowerModel::Infinite);
        s.n_per_design = 0;
        assert_eq!(generate(&s), Err(SynthError::NoResonators));
        let s = spec(1.0, HighPowerModel::Infinite);
        assert_eq!(generate(&s), Err(SynthError::BadNoise(1.0)));
        let s = spec(0.1, HighPowerModel::Fixed(-1.0));
        assert_eq!(generate(&s), Err(SynthError::BadHighPower(-1.0)));
    }

    #[test]
    fn standard_error_shrinks_with_ensemble_size() {
        let design = DesignId::new(DesignKind::MADesign, "TiN", "none");
        let mut s = spec(0.05, HighPowerModel::Infinite);
        let mut se = Vec::new();
        for n in [25usize, 100, 400] {
            s.n_per_design = n;
            // average over seeds to tame the fluctuation of a single SE
            let mean_se: f64 = (0..20u64)
                .map(|seed| {
                    s.rng_seed = seed;
                    ensemble_stats(&generate(&s).unwrap(), &design).unwrap().std_err_q_tls
                })
                .sum::<f64>()
                / 20.0;
            se.push(mean_se);
        }
        // quadrupling n halves the standard error
        for w in se.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.2, "{se:?}");
        }
        // and its level matches 5% / sqrt(n)
        let expected = 0.05 * 1e6 / 20.0;
        assert!((se[2] - expected).abs() / expected < 0.1, "{se:?}");
    }
}
