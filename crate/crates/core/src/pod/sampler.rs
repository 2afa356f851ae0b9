use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::Theta;

/// Axis-aligned box of admissible `(λ, A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lambda: [f64; 2],
    #[serde(rename = "A")]
    pub a: [f64; 2],
}

impl Default for ParamBox {
    fn default() -> Self {
        ParamBox::TRAINING
    }
}

impl ParamBox {
    pub const TRAINING: ParamBox = ParamBox { lambda: [1000.0, 2000.0], a: [2000.0, 6000.0] };

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [("lambda", self.lambda), ("A", self.a)] {
            if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
                return Err(Error::Config(format!("{name} range [{}, {}] is empty or reversed", r[0], r[1])));
            }
        }
        Ok(())
    }

    pub fn contains(&self, t: &Theta) -> bool {
        t.lambda >= self.lambda[0] && t.lambda <= self.lambda[1] && t.a >= self.a[0] && t.a <= self.a[1]
    }

    pub fn lower(&self) -> [f64; 2] {
        [self.lambda[0], self.a[0]]
    }

    pub fn upper(&self) -> [f64; 2] {
        [self.lambda[1], self.a[1]]
    }

    fn is_degenerate(&self) -> bool {
        self.lambda[0] == self.lambda[1] || self.a[0] == self.a[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SamplingDistribution {
    Uniform,
    /// Independent normals; draws outside the box are rejected and redrawn.
    Normal { mean: Theta, std: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSampler {
    pub bounds: ParamBox,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub distribution: SamplingDistribution,
}

/// Draw one normal pair inside `bounds`, retrying until it lands there.
pub(crate) fn draw_normal_in_box(rng: &mut ChaCha8Rng, mean: Theta, std: [f64; 2], bounds: &ParamBox) -> Result<Theta> {
    if std[0] == 0.0 && std[1] == 0.0 {
        return Ok(mean);
    }
    let nl = Normal::new(mean.lambda, std[0]).map_err(|e| Error::Config(format!("lambda distribution: {e}")))?;
    let na = Normal::new(mean.a, std[1]).map_err(|e| Error::Config(format!("A distribution: {e}")))?;
    // a mean far outside the box would loop forever
    for _ in 0..1_000_000 {
        let t = Theta::new(nl.sample(rng), na.sample(rng));
        if bounds.contains(&t) {
            return Ok(t);
        }
    }
    Err(Error::Config("normal distribution has negligible mass inside the parameter box".into()))
}

/// Training and testing parameter sets, disjoint and reproducible for a
/// fixed seed.
pub fn sample_parameters(sampler: &ParameterSampler) -> Result<(Vec<Theta>, Vec<Theta>)> {
    let b = &sampler.bounds;
    b.validate()?;
    if sampler.n_test > 0 && b.is_degenerate() {
        return Err(Error::Config("a degenerate range cannot give disjoint training and testing sets".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<Theta> {
        match sampler.distribution {
            SamplingDistribution::Uniform => {
                let l = if b.lambda[0] == b.lambda[1] { b.lambda[0] } else { rng.random_range(b.lambda[0]..b.lambda[1]) };
                let a = if b.a[0] == b.a[1] { b.a[0] } else { rng.random_range(b.a[0]..b.a[1]) };
                Ok(Theta::new(l, a))
            }
            SamplingDistribution::Normal { mean, std } => draw_normal_in_box(rng, mean, std, b),
        }
    };
    let train: Vec<Theta> = (0..sampler.n_train).map(|_| draw(&mut rng)).collect::<Result<_>>()?;
    let mut test = Vec::with_capacity(sampler.n_test);
    while test.len() < sampler.n_test {
        let t = draw(&mut rng)?;
        if !train.contains(&t) {
            test.push(t);
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n_train: usize, n_test: usize, seed: u64) -> ParameterSampler {
        ParameterSampler {
            bounds: ParamBox::TRAINING,
            n_train,
            n_test,
            seed,
            distribution: SamplingDistribution::Uniform,
        }
    }

    #[test]
    fn training_draws_in_range_and_reproducible() {
        let (a, t) = sample_parameters(&uniform(30, 10, 7)).unwrap();
        assert_eq!(a.len(), 30);
        assert!(a.iter().chain(&t).all(|p| ParamBox::TRAINING.contains(p)));
        assert!(t.iter().all(|p| !a.contains(p)));
        assert_eq!(sample_parameters(&uniform(30, 10, 7)).unwrap().0, a);
        assert_ne!(sample_parameters(&uniform(30, 10, 8)).unwrap().0, a);
    }

    #[test]
    fn degenerate_range_yields_the_point() {
        let mut s = uniform(1, 0, 1);
        s.bounds = ParamBox { lambda: [1500.0, 1500.0], a: [3000.0, 3000.0] };
        assert_eq!(sample_parameters(&s).unwrap().0, vec![Theta::new(1500.0, 3000.0)]);
        s.n_test = 1;
        assert!(sample_parameters(&s).is_err());
    }

    #[test]
    fn uniform_mean_converges_to_midpoint() {
        let (a, _) = sample_parameters(&uniform(100_000, 0, 3)).unwrap();
        let ml = a.iter().map(|t| t.lambda).sum::<f64>() / a.len() as f64;
        let ma = a.iter().map(|t| t.a).sum::<f64>() / a.len() as f64;
        assert!((ml - 1500.0).abs() < 0.01 * 1500.0);
        assert!((ma - 4000.0).abs() < 0.01 * 4000.0);
    }

    #[test]
    fn reversed_range_is_rejected() {
        let mut s = uniform(3, 0, 1);
        s.bounds.lambda = [2000.0, 1000.0];
        assert!(matches!(sample_parameters(&s), Err(Error::Config(_))));
    }

    #[test]
    fn normal_draws_respect_the_box() {
        let mut s = uniform(2000, 0, 11);
        s.distribution = SamplingDistribution::Normal { mean: Theta::new(1900.0, 4000.0), std: [300.0, 400.0] };
        let (a, _) = sample_parameters(&s).unwrap();
        assert!(a.iter().all(|p| ParamBox::TRAINING.contains(p)));
    }
}
