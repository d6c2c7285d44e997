use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::QptDataset;
use super::mle::{mle_project, MleOptions};
use crate::error::{Error, Result};
use crate::spin::optimize_phi;

pub const MIN_REPLICAS: usize = 100;
/// Largest tolerated fraction of replicas whose projection fails.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McErrors {
    pub sigma_f: f64,
    pub sigma_phi_deg: f64,
    pub mean_f: f64,
    /// Circular mean of φ over the replicas, in degrees.
    pub mean_phi_deg: f64,
    pub replicas: usize,
    pub failed: usize,
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Resamples every count as Poisson around its observed value and repeats
/// normalization, inversion, projection and the φ optimization. Replica `i`
/// draws from stream `i` of a ChaCha generator keyed by `seed`, so the result
/// does not depend on scheduling.
pub fn monte_carlo_errors(dataset: &QptDataset, replicas: usize, seed: u64, mle: &MleOptions) -> Result<McErrors> {
    if replicas < MIN_REPLICAS {
        return Err(Error::Config(format!(
            "Monte-Carlo needs at least {MIN_REPLICAS} replicas, got {replicas}"
        )));
    }
    if !dataset.has_counts() {
        return Err(Error::InvalidDataset("Monte-Carlo resampling needs raw counts".into()));
    }
    let outcomes: Vec<Result<(f64, f64)>> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let replica = dataset.with_counts(|e| e.counts().resample(&mut rng))?;
            let opts = MleOptions {
                seed: seed.wrapping_add(i as u64),
                ..mle.clone()
            };
            let fit = mle_project(&replica, &opts)?;
            let best = optimize_phi(&fit.chi);
            Ok((best.fidelity, best.phi))
        })
        .collect();
    let mut f = Vec::with_capacity(replicas);
    let mut phi = Vec::with_capacity(replicas);
    let mut first_error = None;
    for o in outcomes {
        match o {
            Ok((a, b)) => {
                f.push(a);
                phi.push(b);
            }
            Err(e) => {
                log::debug!("Monte-Carlo replica failed: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    let failed = replicas - f.len();
    if failed as f64 > MAX_FAILURE_FRACTION * replicas as f64 || f.len() < 2 {
        return Err(Error::MonteCarlo {
            failed,
            total: replicas,
            first: first_error.map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    let (s, c) = phi.iter().fold((0.0, 0.0), |(s, c), p| (s + p.sin(), c + p.cos()));
    let center = s.atan2(c);
    let dev: Vec<f64> = phi
        .iter()
        .map(|p| (p - center + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI)
        .collect();
    Ok(McErrors {
        sigma_f: sample_std(&f),
        sigma_phi_deg: sample_std(&dev).to_degrees(),
        mean_f: f.iter().sum::<f64>() / f.len() as f64,
        mean_phi_deg: center.to_degrees(),
        replicas,
        failed,
    })
}
