//! Catalog of non-Gaussian source distributions.

use std::fmt;

use dcovica_core::rng;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};

use crate::config::Config;
use crate::error::{CliError, CliResult};

/// The catalog shipped with the crate.
pub const BUILTIN_CATALOG: &str = include_str!("../../configs/sources-v1.conf");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    StudentT,
    Uniform,
    Exponential,
    ExpMixture,
    GaussMixtureSym,
    GaussMixtureAsym,
}

impl Family {
    pub fn parse(s: &str) -> Option<Family> {
        Some(match s {
            "student_t" => Family::StudentT,
            "uniform" => Family::Uniform,
            "exponential" => Family::Exponential,
            "exp_mixture" => Family::ExpMixture,
            "gauss_mixture_sym" => Family::GaussMixtureSym,
            "gauss_mixture_asym" => Family::GaussMixtureAsym,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::StudentT => "student_t",
            Family::Uniform => "uniform",
            Family::Exponential => "exponential",
            Family::ExpMixture => "exp_mixture",
            Family::GaussMixtureSym => "gauss_mixture_sym",
            Family::GaussMixtureAsym => "gauss_mixture_asym",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    StudentT { df: f64 },
    Uniform,
    /// Components `sign · Exp(rate)`.
    ExpMixture { weights: Vec<f64>, rates: Vec<f64>, signs: Vec<f64> },
    GaussMixture { weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64> },
}

/// Population mean and sd, when standardizing with them is reliable.
fn population_moments(law: &Law) -> Option<(f64, f64)> {
    let mix = |w: &[f64], m1: &[f64], m2: &[f64]| {
        let mean: f64 = w.iter().zip(m1).map(|(w, m)| w * m).sum();
        let second: f64 = w.iter().zip(m2).map(|(w, m)| w * m).sum();
        (mean, (second - mean * mean).sqrt())
    };
    match law {
        // Heavy tails make the sample variance converge slowly, so the
        // population scale would leave it visibly off 1.
        Law::StudentT { .. } => None,
        Law::Uniform => Some((0.5, (1.0f64 / 12.0).sqrt())),
        Law::ExpMixture { weights, rates, signs } => {
            let m1: Vec<f64> = rates.iter().zip(signs).map(|(r, s)| s / r).collect();
            let m2: Vec<f64> = rates.iter().map(|r| 2.0 / (r * r)).collect();
            Some(mix(weights, &m1, &m2))
        }
        Law::GaussMixture { weights, means, sds } => {
            let m2: Vec<f64> = means.iter().zip(sds).map(|(m, s)| m * m + s * s).collect();
            Some(mix(weights, means, &m2))
        }
    }
}

/// A labeled source distribution with a deterministic sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDistribution {
    pub label: String,
    pub family: Family,
    law: Law,
}

impl SourceDistribution {
    /// `n` draws from stream `(seed, 0)`, standardized to mean 0 and
    /// variance 1.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = rng::stream(seed, 0);
        let mut x: Vec<f64> = (0..n).map(|_| self.draw(&mut rng)).collect();
        let (mean, sd) = population_moments(&self.law).unwrap_or_else(|| sample_moments(&x));
        for v in &mut x {
            *v = (*v - mean) / sd;
        }
        x
    }

    /// Whether the scale comes from the sample rather than the population.
    pub fn sample_standardized(&self) -> bool {
        population_moments(&self.law).is_none()
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::StudentT { df } => StudentT::new(*df).expect("validated df").sample(rng),
            Law::Uniform => rng.random::<f64>(),
            Law::ExpMixture { weights, rates, signs } => {
                let c = pick(weights, rng);
                let e: f64 = Exp1.sample(rng);
                signs[c] * e / rates[c]
            }
            Law::GaussMixture { weights, means, sds } => {
                let c = pick(weights, rng);
                let z: f64 = StandardNormal.sample(rng);
                means[c] + sds[c] * z
            }
        }
    }
}

fn pick<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn sample_moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
}

/// A versioned set of source distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub version: u32,
    pub entries: Vec<SourceDistribution>,
}

impl Catalog {
    pub fn builtin() -> Catalog {
        Catalog::parse(BUILTIN_CATALOG).expect("bundled catalog is valid")
    }

    pub fn parse(text: &str) -> CliResult<Catalog> {
        let cfg = Config::parse(text)?;
        let version = cfg.require("version")?;
        let mut entries = Vec::new();
        for label in cfg.keys().filter(|k| *k != "version") {
            entries.push(parse_entry(label, cfg.get(label).unwrap_or_default())?);
        }
        if entries.is_empty() {
            return Err(CliError::Config("catalog has no entries".into()));
        }
        Ok(Catalog { version, entries })
    }

    pub fn get(&self, label: &str) -> Option<&SourceDistribution> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn parse_entry(label: &str, spec: &str) -> CliResult<SourceDistribution> {
    let bad = |msg: String| CliError::Config(format!("source {label:?}: {msg}"));
    let mut parts = spec.split_whitespace();
    let family_name = parts.next().ok_or_else(|| bad("missing family".into()))?;
    let family = Family::parse(family_name).ok_or_else(|| bad(format!("unknown family {family_name:?}")))?;
    let mut params = std::collections::BTreeMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {p:?}")))?;
        let values = v
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad(format!("bad number in {p:?}")))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("non-finite value in {p:?}")));
        }
        params.insert(k.to_owned(), values);
    }
    let mut take = |key: &str| params.remove(key).ok_or_else(|| bad(format!("missing {key}")));

    let law = match family {
        Family::StudentT => {
            let df = take("df")?;
            if df.len() != 1 || df[0] <= 2.0 {
                return Err(bad("df must be a single value above 2".into()));
            }
            Law::StudentT { df: df[0] }
        }
        Family::Uniform => Law::Uniform,
        Family::Exponential => Law::ExpMixture { weights: vec![1.0], rates: vec![1.0], signs: vec![1.0] },
        Family::ExpMixture => {
            let (weights, rates, signs) = (take("weights")?, take("rates")?, take("signs")?);
            if rates.iter().any(|r| *r <= 0.0) || signs.iter().any(|s| s.abs() != 1.0) {
                return Err(bad("rates must be positive and signs ±1".into()));
            }
            check_components(&weights, &[&rates, &signs]).map_err(bad)?;
            Law::ExpMixture { weights, rates, signs }
        }
        Family::GaussMixtureSym | Family::GaussMixtureAsym => {
            let (weights, means, sds) = (take("weights")?, take("means")?, take("sds")?);
            if sds.iter().any(|s| *s <= 0.0) {
                return Err(bad("sds must be positive".into()));
            }
            check_components(&weights, &[&means, &sds]).map_err(bad)?;
            Law::GaussMixture { weights, means, sds }
        }
    };
    if let Some(k) = params.keys().next() {
        return Err(bad(format!("unknown parameter {k:?}")));
    }
    Ok(SourceDistribution { label: label.to_owned(), family, law })
}

fn check_components(weights: &[f64], others: &[&Vec<f64>]) -> Result<(), String> {
    if others.iter().any(|o| o.len() != weights.len()) {
        return Err("component lists differ in length".into());
    }
    if weights.iter().any(|w| *w <= 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err("weights must be positive and sum to 1".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_catalog_has_eighteen_entries() {
        let c = Catalog::builtin();
        assert_eq!(c.version, 1);
        assert_eq!(c.len(), 18);
        assert_eq!(c.entries[0].label, "a");
        assert_eq!(c.get("d").unwrap().family, Family::Exponential);
    }

    #[test]
    fn samplers_are_standardized() {
        let n = 10_000;
        let tol_mean = 4.0 / (n as f64).sqrt();
        let tol_var = 6.0 / (n as f64).sqrt();
        for (i, dist) in Catalog::builtin().entries.iter().enumerate() {
            let x = dist.sample(100 + i as u64, n);
            let (mean, sd) = sample_moments(&x);
            assert!(mean.abs() < tol_mean, "{}: mean {mean}", dist.label);
            assert!((sd * sd - 1.0).abs() < tol_var, "{}: var {}", dist.label, sd * sd);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = Catalog::builtin().get("k").unwrap().clone();
        assert_eq!(d.sample(5, 50), d.sample(5, 50));
        assert_ne!(d.sample(5, 50), d.sample(6, 50));
    }

    #[test]
    fn malformed_entries_rejected() {
        assert!(Catalog::parse("version = 1\nx = cauchy\n").is_err());
        assert!(Catalog::parse("version = 1\nx = student_t df=1\n").is_err());
        assert!(Catalog::parse("version = 1\nx = gauss_mixture_sym weights=0.5,0.4 means=0,1 sds=1,1\n").is_err());
        assert!(Catalog::parse("version = 1\nx = uniform extra=1\n").is_err());
        assert!(Catalog::parse("x = uniform\n").is_err());
    }
}
