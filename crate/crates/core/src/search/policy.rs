use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::math::{ln, softmax};
use crate::rng::Rng;

/// Independent categorical distributions, one per decision point, with all
/// logits in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    pub logits: Vec<f64>,
}

impl Policy {
    pub fn uniform(sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &n in sizes {
            offsets.push(total);
            total += n;
        }
        Policy { sizes: sizes.to_vec(), offsets, logits: vec![0.0; total] }
    }

    pub fn num_points(&self) -> usize {
        self.sizes.len()
    }

    pub fn logits_of(&self, point: usize) -> &[f64] {
        &self.logits[self.offsets[point]..self.offsets[point] + self.sizes[point]]
    }

    pub fn probs(&self, point: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.sizes[point]];
        softmax(self.logits_of(point), &mut p);
        p
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<usize> {
        (0..self.num_points())
            .map(|i| {
                let p = self.probs(i);
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (k, pk) in p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        return k;
                    }
                }
                p.len() - 1
            })
            .collect()
    }

    pub fn log_prob(&self, choice: &[usize]) -> f64 {
        choice.iter().enumerate().map(|(i, &c)| ln(self.probs(i)[c])).sum()
    }

    /// Adds `scale * d log pi(choice) / d logits` into `grad`.
    pub fn add_log_prob_grad(&self, choice: &[usize], scale: f64, grad: &mut [f64]) {
        for (i, &c) in choice.iter().enumerate() {
            let p = self.probs(i);
            let o = self.offsets[i];
            for (k, pk) in p.iter().enumerate() {
                grad[o + k] += scale * ((k == c) as u8 as f64 - pk);
            }
        }
    }

    /// Largest deviation of any distribution's total mass from 1.
    pub fn simplex_error(&self) -> f64 {
        (0..self.num_points()).map(|i| (self.probs(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Most likely choice per decision point.
    pub fn mode(&self) -> Vec<usize> {
        (0..self.num_points())
            .map(|i| {
                let l = self.logits_of(i);
                (0..l.len()).fold(0, |best, k| if l[k] > l[best] { k } else { best })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let mut p = Policy::uniform(&[3, 2, 4]);
        p.logits.iter_mut().enumerate().for_each(|(i, l)| *l = crate::math::cos(i as f64 * 0.37));
        let choice = [2, 0, 1];
        let mut g = vec![0.0; p.logits.len()];
        p.add_log_prob_grad(&choice, 1.0, &mut g);
        for k in 0..p.logits.len() {
            let mut a = p.clone();
            a.logits[k] += 1e-6;
            let mut b = p.clone();
            b.logits[k] -= 1e-6;
            let fd = (a.log_prob(&choice) - b.log_prob(&choice)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-8, "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn sampling_follows_probabilities() {
        let mut p = Policy::uniform(&[2]);
        p.logits[1] = ln(3.0);
        let mut r = rng::rng(9);
        let ones = (0..20_000).filter(|_| p.sample(&mut r)[0] == 1).count();
        assert!((ones as f64 / 20_000.0 - 0.75).abs() < 0.015, "{ones}");
    }
}
