//! Antithetic evolution strategies with rank-normalized fitness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::seed::mix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsSettings {
    /// Members per generation; must be even (antithetic pairs).
    pub population: usize,
    pub sigma: f64,
    pub step_size: f64,
    pub seed: u64,
}

/// Result of evaluating one perturbed parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    /// Work spent, e.g. environment steps. Summed into the generation cost.
    pub cost: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub center_fitness: f64,
    pub cost: usize,
}

/// Maximizes a fitness function by antithetic sampling around a center.
#[derive(Debug, Clone)]
pub struct Es {
    pub settings: EsSettings,
    pub center: Vec<f64>,
    pub generation: usize,
    best: Option<(f64, Vec<f64>)>,
}

/// Centered ranks in [-0.5, 0.5]; ties keep index order.
pub fn centered_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    if n < 2 {
        return ranks;
    }
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r as f64 / (n - 1) as f64 - 0.5;
    }
    ranks
}

impl Es {
    pub fn new(center: Vec<f64>, settings: EsSettings) -> Self {
        assert!(
            settings.population >= 2 && settings.population.is_multiple_of(2),
            "population must be even"
        );
        Self {
            settings,
            center,
            generation: 0,
            best: None,
        }
    }

    /// Best member seen so far and its fitness.
    pub fn best(&self) -> Option<(f64, &[f64])> {
        self.best.as_ref().map(|(f, x)| (*f, x.as_slice()))
    }

    pub fn into_best(self) -> Option<(f64, Vec<f64>)> {
        self.best
    }

    fn noise(&self, pair: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(&[self.settings.seed, self.generation as u64]));
        rng.set_stream(pair as u64);
        (0..self.center.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }

    /// Runs one generation: every member plus the unperturbed center.
    /// `fitness` receives the parameters and a rollout seed shared by both
    /// members of an antithetic pair. Returns
    /// the spent cost as an error, without changing state, if any fitness
    /// is non-finite.
    pub fn step<F>(&mut self, fitness: F) -> Result<GenerationStats, usize>
    where
        F: Fn(&[f64], u64) -> Evaluation + Sync,
    {
        let s = self.settings;
        let pairs = s.population / 2;
        let noises: Vec<Vec<f64>> = (0..pairs).map(|p| self.noise(p)).collect();
        let members: Vec<Vec<f64>> = noises
            .iter()
            .flat_map(|eps| {
                [1.0, -1.0].map(|sign| {
                    self.center
                        .iter()
                        .zip(eps)
                        .map(|(c, e)| c + sign * s.sigma * e)
                        .collect::<Vec<f64>>()
                })
            })
            .collect();
        let gen_seed = mix(&[s.seed, self.generation as u64, 0xe5]);
        // Member i of pair p shares that pair's rollout seed; the center
        // is evaluated last under its own seed.
        let center_seed = mix(&[gen_seed, u64::MAX]);
        let jobs: Vec<(&[f64], u64)> = members
            .iter()
            .enumerate()
            .map(|(i, x)| (x.as_slice(), mix(&[gen_seed, (i / 2) as u64])))
            .chain(std::iter::once((self.center.as_slice(), center_seed)))
            .collect();
        let evals: Vec<Evaluation> = jobs.par_iter().map(|(x, seed)| fitness(x, *seed)).collect();
        let cost: usize = evals.iter().map(|e| e.cost).sum();
        if evals.iter().any(|e| !e.fitness.is_finite()) {
            return Err(cost);
        }
        let center_fit = evals[s.population].fitness;
        let fit: Vec<f64> = evals[..s.population].iter().map(|e| e.fitness).collect();

        let mut candidates: Vec<(f64, &[f64])> = vec![(center_fit, self.center.as_slice())];
        candidates.extend(fit.iter().copied().zip(members.iter().map(Vec::as_slice)));
        let (best_f, best_x) =
            candidates
                .into_iter()
                .fold((f64::NEG_INFINITY, &[][..]), |acc, c| {
                    if c.0 > acc.0 {
                        c
                    } else {
                        acc
                    }
                });
        if self.best.as_ref().is_none_or(|(b, _)| best_f > *b) {
            self.best = Some((best_f, best_x.to_vec()));
        }

        let ranks = centered_ranks(&fit);
        let scale = s.step_size / (s.population as f64 * s.sigma);
        for (p, eps) in noises.iter().enumerate() {
            let w = ranks[2 * p] - ranks[2 * p + 1];
            for (c, e) in self.center.iter_mut().zip(eps) {
                *c += scale * w * e;
            }
        }
        self.generation += 1;
        Ok(GenerationStats {
            generation: self.generation,
            best_fitness: self.best.as_ref().map_or(best_f, |b| b.0),
            mean_fitness: fit.iter().sum::<f64>() / fit.len() as f64,
            center_fitness: center_fit,
            cost,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_are_centered() {
        assert_eq!(centered_ranks(&[3.0, 1.0, 2.0]), vec![0.5, -0.5, 0.0]);
        assert_eq!(centered_ranks(&[1.0, 1.0]), vec![-0.5, 0.5]);
    }

    #[test]
    fn ascends_a_linear_objective() {
        let mut es = Es::new(
            vec![0.0; 4],
            EsSettings {
                population: 8,
                sigma: 0.1,
                step_size: 0.05,
                seed: 1,
            },
        );
        for _ in 0..20 {
            es.step(|x, _| Evaluation {
                fitness: x[0] - x[1],
                cost: 1,
            })
            .unwrap();
        }
        assert!(es.center[0] > 0.0 && es.center[1] < 0.0);
    }
}
