//! Charge-to-mass ratios from the RF frequency at which an ion is ejected.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::dynamics::GasModel;
use crate::geometry::IonSpecies;
use crate::stability::{drag_b, qmax, QMAX_UNDAMPED};
use crate::units::C_PER_KG_TO_E_PER_AMU;

/// Drive frequency at ejection with the amplitude and ion height it was seen at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EjectionRecord {
    /// Ω_ej (rad/s).
    #[serde(deserialize_with = "crate::units::de::angular_frequency")]
    pub omega_ej: f64,
    /// RF amplitude (V).
    #[serde(deserialize_with = "crate::units::de::volts")]
    pub v: f64,
    #[serde(deserialize_with = "crate::units::de::length")]
    pub r0: f64,
}

impl EjectionRecord {
    pub fn new(omega_ej: f64, v: f64, r0: f64) -> Result<Self, AnalysisError> {
        let r = Self { omega_ej, v, r0 };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        for (name, x) in [("omega_ej", self.omega_ej), ("v", self.v), ("r0", self.r0)] {
            if !(x > 0.0) || !x.is_finite() {
                return Err(AnalysisError::Invalid(format!("{name} must be positive, got {x}")));
            }
        }
        Ok(())
    }
}

/// Where the edge of the stability region comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "source")]
pub enum QmaxSource {
    /// Undamped value 0.908.
    Undamped,
    /// Computed from the damped Mathieu equation at drag `b`.
    Damped { b: f64, qmax: f64 },
}

impl QmaxSource {
    pub fn value(&self) -> f64 {
        match self {
            QmaxSource::Undamped => QMAX_UNDAMPED,
            QmaxSource::Damped { qmax, .. } => *qmax,
        }
    }

    /// Damped `q_max` at the drag of `ion` in `gas` at drive `omega`, or 0.908 without gas.
    pub fn for_gas(gas: Option<&GasModel>, ion: &IonSpecies, omega: f64) -> Result<Self, AnalysisError> {
        match gas {
            None => Ok(QmaxSource::Undamped),
            Some(g) => {
                let b = drag_b(g, ion, omega)?;
                Ok(QmaxSource::Damped { b, qmax: qmax(0.0, b)? })
            }
        }
    }
}

/// `Q/m = q_max·r0²·Ω_ej²/(2V)` in C/kg.
pub fn qm_from_ejection(rec: &EjectionRecord, q_max: f64) -> f64 {
    q_max * rec.r0 * rec.r0 * rec.omega_ej * rec.omega_ej / (2.0 * rec.v)
}

/// Ejection frequency (rad/s) at which an ion of the given `Q/m` (C/kg) leaves the trap.
pub fn ejection_omega(qm: f64, v: f64, r0: f64, q_max: f64) -> f64 {
    (2.0 * v * qm / (q_max * r0 * r0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Histogram and moments of Q/m, all in e/amu.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QmSpectrum {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single record.
    pub std_dev: f64,
    pub bin_width: f64,
    pub bins: Vec<Bin>,
    /// Stability edge used for every record; `None` when it varied per record.
    pub q_max: Option<f64>,
}

pub fn qm_spectrum(records: &[EjectionRecord], q_max: f64, bin_width: f64) -> Result<QmSpectrum, AnalysisError> {
    let mut vals = Vec::with_capacity(records.len());
    for r in records {
        r.validate()?;
        vals.push(qm_from_ejection(r, q_max) * C_PER_KG_TO_E_PER_AMU);
    }
    let mut s = spectrum_from_values(&vals, bin_width)?;
    s.q_max = Some(q_max);
    Ok(s)
}

/// Moments and histogram of Q/m values already in e/amu.
pub fn spectrum_from_values(vals: &[f64], bin_width: f64) -> Result<QmSpectrum, AnalysisError> {
    if vals.is_empty() {
        return Err(AnalysisError::Invalid("no ejection records".into()));
    }
    if !(bin_width > 0.0) {
        return Err(AnalysisError::Invalid(format!("bin width must be positive, got {bin_width}")));
    }
    if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
        return Err(AnalysisError::Invalid(format!("non-finite Q/m value {v}")));
    }
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let std_dev = if n > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = (lo / bin_width).floor() as i64;
    let last = (hi / bin_width).floor() as i64;
    let mut bins: Vec<Bin> = (first..=last)
        .map(|k| Bin { lo: k as f64 * bin_width, hi: (k + 1) as f64 * bin_width, count: 0 })
        .collect();
    for v in vals {
        let k = ((v / bin_width).floor() as i64 - first) as usize;
        bins[k].count += 1;
    }
    Ok(QmSpectrum { n, mean, std_dev, bin_width, bins, q_max: None })
}

/// Parameters of a synthetic ejection data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Mean and standard deviation of Q/m in e/amu.
    pub mean: f64,
    pub std_dev: f64,
    #[serde(deserialize_with = "crate::units::de::volts")]
    pub v: f64,
    #[serde(deserialize_with = "crate::units::de::length")]
    pub r0: f64,
    pub seed: u64,
}

/// Records whose Q/m follow a log-normal law with the requested mean and spread.
pub fn synthetic_records(spec: &SyntheticSpec, q_max: f64) -> Result<Vec<EjectionRecord>, AnalysisError> {
    if spec.n == 0 || !(spec.mean > 0.0) || !(spec.std_dev >= 0.0) {
        return Err(AnalysisError::Invalid("synthetic set needs n > 0, mean > 0, std_dev >= 0".into()));
    }
    let s2 = (1.0 + (spec.std_dev / spec.mean).powi(2)).ln();
    let law = LogNormal::new(spec.mean.ln() - 0.5 * s2, s2.sqrt())
        .map_err(|e| AnalysisError::Invalid(format!("log-normal parameters: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n)
        .map(|_| {
            let qm = law.sample(&mut rng) / C_PER_KG_TO_E_PER_AMU;
            EjectionRecord::new(ejection_omega(qm, spec.v, spec.r0, q_max), spec.v, spec.r0)
        })
        .collect()
}
