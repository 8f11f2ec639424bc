//! Acceptance bands for statistical checks.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{LabError, Result};
use crate::exact::{FiniteDistribution, Space};

/// A `level`-sigma two-sided band, Bonferroni-corrected over
/// `comparisons` simultaneous z-tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaBand {
    pub level: f64,
    pub comparisons: usize,
}

impl SigmaBand {
    pub fn new(level: f64, comparisons: usize) -> Self {
        SigmaBand {
            level,
            comparisons: comparisons.max(1),
        }
    }

    pub fn single(level: f64) -> Self {
        Self::new(level, 1)
    }

    /// Band for `k` sub-tests inside one member of this family.
    pub fn split(&self, k: usize) -> Self {
        Self::new(self.level, self.comparisons * k.max(1))
    }

    /// Critical |z|: the per-test false-alarm rate is the `level`-sigma rate
    /// divided by the number of comparisons.
    pub fn critical_z(&self) -> f64 {
        if self.comparisons <= 1 {
            return self.level;
        }
        let normal = Normal::standard();
        let alpha = 2.0 * normal.sf(self.level) / self.comparisons as f64;
        normal.inverse_cdf(1.0 - alpha / 2.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub samples: usize,
    pub empirical_tv: f64,
    pub worst_atom: String,
    pub worst_z: f64,
    pub critical_z: f64,
    /// Number of simultaneous per-atom tests.
    pub comparisons: usize,
    pub pass: bool,
    #[serde(skip)]
    pub counts: Vec<u64>,
    #[serde(skip)]
    pub z_scores: Vec<f64>,
}

/// Minimum sample size for [`empirical_compare`].
pub const MIN_SAMPLES: usize = 100;

/// Per-atom z-scores of sample counts against `reference`, with the band
/// further corrected over the atoms of positive mass. Atoms with zero
/// reference mass fail on any hit.
pub fn empirical_compare(samples: &[usize], reference: &FiniteDistribution, band: SigmaBand) -> Result<CompareReport> {
    if samples.len() < MIN_SAMPLES {
        return Err(LabError::contract(format!(
            "{} samples; at least {MIN_SAMPLES} required",
            samples.len()
        )));
    }
    let size = reference.len();
    let mut counts = vec![0u64; size];
    for &s in samples {
        if s >= size {
            return Err(LabError::contract(format!("sample index {s} outside reference space")));
        }
        counts[s] += 1;
    }
    let labels: Vec<String> = (0..size).map(|i| reference.space().config_string(i)).collect();
    counts_compare(counts, reference.probs(), &labels, band)
}

/// Per-cell z-scores of `counts` against cell probabilities `probs`, with
/// the band corrected over the cells of positive mass.
pub fn counts_compare(counts: Vec<u64>, probs: &[f64], labels: &[String], band: SigmaBand) -> Result<CompareReport> {
    if counts.len() != probs.len() || labels.len() != probs.len() {
        return Err(LabError::contract("counts, probabilities and labels differ in length"));
    }
    let total: u64 = counts.iter().sum();
    let n = total as f64;
    let atoms = probs.iter().filter(|&&p| p > 0.0).count();
    let critical = band.split(atoms).critical_z();
    let z_scores: Vec<f64> = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| atom_z(c as f64, n, p))
        .collect();
    let empirical_tv = 0.5
        * counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| (c as f64 / n - p).abs())
            .sum::<f64>();
    let (worst, worst_z) = worst(&z_scores);
    Ok(CompareReport {
        samples: total as usize,
        empirical_tv,
        worst_atom: labels[worst].clone(),
        worst_z,
        critical_z: critical,
        comparisons: atoms,
        pass: worst_z.abs() <= critical,
        counts,
        z_scores,
    })
}

fn worst(z: &[f64]) -> (usize, f64) {
    z.iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bz), (i, &z)| if z.abs() > bz.abs() || z.is_nan() { (i, z) } else { (bi, bz) })
}

fn atom_z(count: f64, n: f64, p: f64) -> f64 {
    let expected = n * p;
    let var = n * p * (1.0 - p);
    if var > 0.0 {
        (count - expected) / var.sqrt()
    } else if count == expected {
        0.0
    } else {
        f64::INFINITY.copysign(count - expected)
    }
}

/// Two-sample per-atom comparison of empirical laws on the same space
/// (pooled-proportion z-tests).
pub fn two_sample_compare(a: &[usize], b: &[usize], space: Space, band: SigmaBand) -> Result<CompareReport> {
    if a.len() < MIN_SAMPLES || b.len() < MIN_SAMPLES {
        return Err(LabError::contract("two-sample comparison needs at least 100 samples per side"));
    }
    let size = space.size().ok_or_else(|| LabError::contract("space too large"))?;
    let hist = |xs: &[usize]| -> Result<Vec<u64>> {
        let mut h = vec![0u64; size];
        for &x in xs {
            *h.get_mut(x).ok_or_else(|| LabError::contract("sample outside space"))? += 1;
        }
        Ok(h)
    };
    let (ha, hb) = (hist(a)?, hist(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let atoms = ha.iter().zip(&hb).filter(|(x, y)| **x + **y > 0).count();
    let critical = band.split(atoms).critical_z();
    let mut tv = 0.0;
    let z_scores: Vec<f64> = ha
        .iter()
        .zip(&hb)
        .map(|(&x, &y)| {
            let (pa, pb) = (x as f64 / na, y as f64 / nb);
            tv += 0.5 * (pa - pb).abs();
            let pooled = (x + y) as f64 / (na + nb);
            let var = pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb);
            if var > 0.0 {
                (pa - pb) / var.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let (worst, worst_z) = worst(&z_scores);
    Ok(CompareReport {
        samples: a.len() + b.len(),
        empirical_tv: tv,
        worst_atom: space.config_string(worst),
        worst_z,
        critical_z: critical,
        comparisons: atoms,
        pass: worst_z.abs() <= critical,
        counts: ha,
        z_scores,
    })
}

/// Running moments of a scalar sample.
#[derive(Debug, Clone, Default)]
pub struct Moments {
    values: Vec<f64>,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.values.push(x);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::sum::compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    /// Central moment of order `k` (biased).
    pub fn central(&self, k: i32) -> f64 {
        let m = self.mean();
        crate::sum::compensated_sum(self.values.iter().map(|x| (x - m).powi(k))) / self.values.len() as f64
    }

    /// Unbiased variance.
    pub fn variance(&self) -> f64 {
        let n = self.values.len() as f64;
        self.central(2) * n / (n - 1.0)
    }

    /// z-score of the sample mean against `expected`.
    pub fn mean_z(&self, expected: f64) -> f64 {
        let se = (self.variance() / self.values.len() as f64).sqrt();
        (self.mean() - expected) / se
    }

    /// z-score of the sample variance against `expected`, with the standard
    /// error estimated from the fourth central moment.
    pub fn variance_z(&self, expected: f64) -> f64 {
        let n = self.values.len() as f64;
        let m2 = self.central(2);
        let m4 = self.central(4);
        let se = ((m4 - m2 * m2) / n).sqrt();
        (self.variance() - expected) / se
    }
}

/// z-score of the difference of two independent sample means.
pub fn mean_difference_z(a: &Moments, b: &Moments) -> f64 {
    let se = (a.variance() / a.len() as f64 + b.variance() / b.len() as f64).sqrt();
    (a.mean() - b.mean()) / se
}

/// z-score of the difference of two sample variances.
pub fn variance_difference_z(a: &Moments, b: &Moments) -> f64 {
    let var_se = |m: &Moments| {
        let c2 = m.central(2);
        (m.central(4) - c2 * c2) / m.len() as f64
    };
    (a.variance() - b.variance()) / (var_se(a) + var_se(b)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_band_is_level() {
        assert_eq!(SigmaBand::single(3.0).critical_z(), 3.0);
        let z = SigmaBand::new(3.0, 10).critical_z();
        assert!(z > 3.6 && z < 3.7, "{z}");
    }

    #[test]
    fn maximally_wrong_samples_fail() {
        let reference = FiniteDistribution::product(&[0.5], None).unwrap();
        let r = empirical_compare(&vec![0; 10_000], &reference, SigmaBand::single(3.0)).unwrap();
        assert!(!r.pass);
        assert!((r.z_scores[1] + 100.0).abs() < 1e-9);
        assert!((r.worst_z.abs() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        let reference = FiniteDistribution::product(&[0.5], None).unwrap();
        assert!(empirical_compare(&[0; 50], &reference, SigmaBand::single(3.0)).is_err());
        assert!(empirical_compare(&[2; 200], &reference, SigmaBand::single(3.0)).is_err());
    }

    #[test]
    fn zero_mass_atom_hit_fails() {
        let reference = FiniteDistribution::point_mass(Space::edges(1), 0).unwrap();
        let mut s = vec![0; 200];
        s[0] = 1;
        assert!(!empirical_compare(&s, &reference, SigmaBand::single(3.0)).unwrap().pass);
    }

    #[test]
    fn moments() {
        let mut m = Moments::new();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-15);
    }
}
