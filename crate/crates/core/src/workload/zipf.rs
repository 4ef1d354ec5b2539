//! Zipfian sampling by the closed-form inversion approximation of Gray et
//! al., as popularised by YCSB. One uniform draw per sample, no rejection.

use rand::Rng;

use crate::error::WorkloadError;

#[derive(Clone, Debug)]
pub struct Zipf {
    n: u64,
    theta: f64,
    alpha: f64,
    zetan: f64,
    eta: f64,
}

fn zeta(n: u64, theta: f64) -> f64 {
    (1..=n).map(|i| 1.0 / (i as f64).powf(theta)).sum()
}

impl Zipf {
    /// Ranks `0..n`, rank 0 most popular. `theta` must lie in (0, 1).
    pub fn new(n: u64, theta: f64) -> Result<Self, WorkloadError> {
        if n == 0 {
            return Err(WorkloadError::EmptyPool);
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(WorkloadError::InvalidSpec(format!("zipf exponent {theta} is outside (0, 1)")));
        }
        let zetan = zeta(n, theta);
        let zeta2 = zeta(2.min(n), theta);
        let eta = (1.0 - (2.0 / n as f64).powf(1.0 - theta)) / (1.0 - zeta2 / zetan);
        Ok(Zipf { n, theta, alpha: 1.0 / (1.0 - theta), zetan, eta })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.n == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let uz = u * self.zetan;
        if uz < 1.0 {
            return 0;
        }
        if uz < 1.0 + 0.5f64.powf(self.theta) {
            return 1;
        }
        let r = (self.n as f64 * (self.eta * u - self.eta + 1.0).powf(self.alpha)) as u64;
        r.min(self.n - 1)
    }
}
