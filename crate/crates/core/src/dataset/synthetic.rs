use ndarray::Array2;
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SurvivalDataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Shape of the true log-hazard as a function of the features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HazardKind {
    /// `β·x`
    Linear,
    /// `x0 * x1`
    Interaction,
    /// `sin(x0) + x1² * sign(x2)`
    Deep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub hazard_kind: HazardKind,
    #[serde(default)]
    pub true_coefficients: Vec<f64>,
    pub weibull_shape: f64,
    pub baseline_scale: f64,
    pub target_censor_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 || self.p == 0 {
            return bad(format!(
                "n and p must be positive (n={}, p={})",
                self.n, self.p
            ));
        }
        if !(0.0..1.0).contains(&self.target_censor_rate) {
            return bad(format!(
                "target_censor_rate must lie in [0, 1), got {}",
                self.target_censor_rate
            ));
        }
        if !(self.weibull_shape > 0.0 && self.weibull_shape.is_finite()) {
            return bad(format!(
                "weibull_shape must be positive, got {}",
                self.weibull_shape
            ));
        }
        if !(self.baseline_scale > 0.0 && self.baseline_scale.is_finite()) {
            return bad(format!(
                "baseline_scale must be positive, got {}",
                self.baseline_scale
            ));
        }
        match self.hazard_kind {
            HazardKind::Linear if self.true_coefficients.len() != self.p => bad(format!(
                "linear hazard needs {} coefficients, got {}",
                self.p,
                self.true_coefficients.len()
            )),
            HazardKind::Interaction if self.p < 2 => bad("interaction hazard needs p >= 2".into()),
            HazardKind::Deep if self.p < 3 => bad("deep hazard needs p >= 3".into()),
            _ => Ok(()),
        }
    }

    fn score(&self, x: &[f64]) -> f64 {
        match self.hazard_kind {
            HazardKind::Linear => x
                .iter()
                .zip(&self.true_coefficients)
                .map(|(a, b)| a * b)
                .sum(),
            HazardKind::Interaction => x[0] * x[1],
            HazardKind::Deep => {
                let sign = if x[2] > 0.0 {
                    1.0
                } else if x[2] < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                x[0].sin() + x[1] * x[1] * sign
            }
        }
    }
}

fn censored_fraction(times: &[f64], unit_censor: &[f64], c_max: f64) -> f64 {
    let censored = times
        .iter()
        .zip(unit_censor)
        .filter(|(t, v)| *v * c_max < **t)
        .count();
    censored as f64 / times.len() as f64
}

/// Scale for uniform censoring on `[0, c_max]` whose realised censored
/// fraction is as close as possible to `target`. Bisection in log space.
fn solve_censor_scale(times: &[f64], unit_censor: &[f64], target: f64) -> f64 {
    let ratios = times.iter().zip(unit_censor).map(|(t, v)| t / v);
    let (min_r, max_r) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    // f(lo) = 1 > target >= 0 = f(hi)
    let (mut lo, mut hi) = ((min_r * 0.5).ln(), (max_r * 2.0).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if censored_fraction(times, unit_censor, mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let err = |c: f64| (censored_fraction(times, unit_censor, c.exp()) - target).abs();
    if err(lo) < err(hi) {
        lo.exp()
    } else {
        hi.exp()
    }
}

/// Draw a dataset from a Weibull proportional-hazards model. Event times are
/// sampled by inverse transform, `T = (-ln U / (scale * exp(s)))^(1/shape)`,
/// then independently censored uniformly on `[0, c_max]`.
///
/// Returns the dataset and the true risk score of every sample.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(SurvivalDataset, Vec<f64>)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut rng = seeded(spec.seed);

    let values: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let features = Array2::from_shape_vec((n, p), values).expect("shape matches buffer");

    let scores: Vec<f64> = features
        .rows()
        .into_iter()
        .map(|row| spec.score(row.as_slice().expect("standard layout")))
        .collect();
    let event_times: Vec<f64> = scores
        .iter()
        .map(|s| {
            let u: f64 = rng.sample(Open01);
            (-u.ln() / (spec.baseline_scale * s.exp())).powf(1.0 / spec.weibull_shape)
        })
        .collect();
    let unit_censor: Vec<f64> = (0..n).map(|_| rng.sample(Open01)).collect();

    let (times, events) = if spec.target_censor_rate == 0.0 {
        (event_times, vec![true; n])
    } else {
        let c_max = solve_censor_scale(&event_times, &unit_censor, spec.target_censor_rate);
        event_times
            .iter()
            .zip(&unit_censor)
            .map(|(&t, &v)| {
                let c = v * c_max;
                if t <= c {
                    (t, true)
                } else {
                    (c, false)
                }
            })
            .unzip()
    };
    let ds = SurvivalDataset::from_parts(features, times, events)?;
    Ok((ds, scores))
}
