use fixedbitset::FixedBitSet;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{Divider, LowerBoundError, Result};
use crate::seeds;

/// Largest divider whose mean buffers are summed exactly under `Auto`.
pub const EXACT_BUFFER_LIMIT: usize = 10_000;
pub const DEFAULT_MC_DRAWS: usize = 20_000;
const PILOT_REFERENCES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BufferMethod {
    /// Exact up to [`EXACT_BUFFER_LIMIT`] sets, Monte Carlo with
    /// [`DEFAULT_MC_DRAWS`] draws and seed 0 beyond.
    Auto,
    Exact,
    MonteCarlo { draws: usize, seed: u64 },
}

/// `M_B = log(1 / max_S mean_{S'} |V_{S,S'}|)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BufferEntropy {
    /// `None` when the worst mean buffer is zero (entropy `+∞`).
    pub entropy: Option<f64>,
    pub max_mean: f64,
    /// Index of the set attaining the maximum.
    pub reference_set: usize,
    /// Standard error of `max_mean`; `None` for exact summation.
    pub standard_error: Option<f64>,
}

impl BufferEntropy {
    fn from_mean(max_mean: f64, reference_set: usize, standard_error: Option<f64>) -> Self {
        let entropy = (max_mean > 0.0).then(|| -max_mean.ln());
        BufferEntropy { entropy, max_mean, reference_set, standard_error }
    }

    pub fn is_infinite(&self) -> bool {
        self.entropy.is_none()
    }
}

/// Buffer entropy of a divider. Self pairs `S' = S` are part of the average.
///
/// The Monte Carlo path first screens up to 32 reference sets with a pilot
/// sample, then re-estimates the selected set with `draws` fresh uniform
/// draws of `S'`, so the reported mean and standard error are not inflated by
/// the selection.
pub fn buffer_entropy(c: &Divider, method: BufferMethod) -> Result<BufferEntropy> {
    let len = c.len();
    if len == 0 {
        return Err(LowerBoundError::EmptyDivider);
    }
    match method {
        BufferMethod::Exact => Ok(exact(c)),
        BufferMethod::Auto if len <= EXACT_BUFFER_LIMIT => Ok(exact(c)),
        BufferMethod::Auto => monte_carlo(c, DEFAULT_MC_DRAWS, 0),
        BufferMethod::MonteCarlo { draws, seed } => monte_carlo(c, draws, seed),
    }
}

fn exact(c: &Divider) -> BufferEntropy {
    let sup = c.supports();
    let supports: Vec<FixedBitSet> = c.sets().map(|s| sup.of(&s)).collect();
    let totals: Vec<usize> = supports
        .par_iter()
        .map(|vs| supports.iter().map(|vt| sup.buffer_len(vs, vt)).sum())
        .collect();
    let (best, total) = totals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, &t)| (i, t))
        .expect("nonempty");
    BufferEntropy::from_mean(total as f64 / c.len() as f64, best, None)
}

fn monte_carlo(c: &Divider, draws: usize, seed: u64) -> Result<BufferEntropy> {
    if draws < 2 {
        return Err(LowerBoundError::InvalidArgument("Monte Carlo needs at least 2 draws".into()));
    }
    let len = c.len();
    let sup = c.supports();
    let mut rng = seeds::child_rng(seed, &[0]);
    let references: Vec<usize> = if len <= PILOT_REFERENCES {
        (0..len).collect()
    } else {
        (0..PILOT_REFERENCES).map(|_| rng.random_range(0..len)).collect()
    };
    let pilot_draws = (draws / 10).max(100);
    let estimate = |reference: usize, n: usize, stream: u64| -> (f64, f64) {
        let vs = sup.of(&c.set(reference));
        let mut rng = seeds::child_rng(seed, &[1, stream]);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let other = rng.random_range(0..len);
            let k = sup.buffer_len(&vs, &sup.of(&c.set(other))) as f64;
            sum += k;
            sum_sq += k * k;
        }
        let mean = sum / n as f64;
        let var = ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0);
        (mean, (var / n as f64).sqrt())
    };
    let chosen = if references.len() == 1 {
        references[0]
    } else {
        let pilot: Vec<f64> = references
            .par_iter()
            .enumerate()
            .map(|(k, &r)| estimate(r, pilot_draws, k as u64 + 1).0)
            .collect();
        let best = (0..pilot.len()).max_by(|&a, &b| pilot[a].total_cmp(&pilot[b]).then(b.cmp(&a))).expect("nonempty");
        references[best]
    };
    let (mean, se) = estimate(chosen, draws, 0);
    Ok(BufferEntropy::from_mean(mean, chosen, Some(se)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{EdgeSet, Graph};
    use crate::lowerbound::{DividerMode, SubsetShape};

    #[test]
    fn disjoint_supports_only_count_self() {
        let sets = vec![
            EdgeSet::from_pairs(&[(1, 2)]).unwrap(),
            EdgeSet::from_pairs(&[(3, 4)]).unwrap(),
            EdgeSet::from_pairs(&[(5, 6), (6, 7)]).unwrap(),
        ];
        let c = Divider::new(Graph::empty(7), sets, DividerMode::Add).unwrap();
        let b = buffer_entropy(&c, BufferMethod::Exact).unwrap();
        assert_eq!(b.max_mean, 3.0 / 3.0);
        assert_eq!(b.reference_set, 2);
        assert_eq!(b.entropy, Some(0.0));
    }

    #[test]
    fn clique_mean_is_s_squared_over_d() {
        let c = Divider::all_subsets(12, 3, SubsetShape::Clique).unwrap();
        let b = buffer_entropy(&c, BufferMethod::Exact).unwrap();
        assert!((b.max_mean - 9.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let c = Divider::all_subsets(15, 3, SubsetShape::Cycle).unwrap();
        let m = BufferMethod::MonteCarlo { draws: 2000, seed: 9 };
        let a = buffer_entropy(&c, m).unwrap();
        assert_eq!(a, buffer_entropy(&c, m).unwrap());
        assert!(a.standard_error.unwrap() > 0.0);
        let exact = buffer_entropy(&c, BufferMethod::Exact).unwrap();
        assert!((a.max_mean - exact.max_mean).abs() < 4.0 * a.standard_error.unwrap());
    }
}
