//! Small numeric helpers shared by the skip-gram and softmax trainers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Portable seeded generator; identical streams on every platform.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Learning rate decaying linearly from `start` to `start * floor_ratio`.
#[derive(Debug, Clone, Copy)]
pub struct LinearDecay {
    start: f64,
    floor: f64,
    total_steps: u64,
}

impl LinearDecay {
    pub fn new(start: f64, floor_ratio: f64, total_steps: u64) -> Self {
        Self {
            start,
            floor: start * floor_ratio,
            total_steps: total_steps.max(1),
        }
    }

    pub fn at(&self, step: u64) -> f64 {
        let progress = (step as f64 / self.total_steps as f64).min(1.0);
        (self.start * (1.0 - progress)).max(self.floor)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax in place.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_reaches_floor() {
        let lr = LinearDecay::new(0.1, 1e-4, 100);
        assert_eq!(lr.at(0), 0.1);
        assert!((lr.at(50) - 0.05).abs() < 1e-15);
        assert!((lr.at(1000) - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-1000.0) >= 0.0 && sigmoid(1000.0) <= 1.0);
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut v = [1000.0, 999.0, -5.0];
        softmax_in_place(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
