//! (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
//! cumulative step-size adaptation. Maximizes.
//!
//! Box constraints: every sample is mirrored back into the box before it is
//! evaluated, and its selection fitness is reduced by a quadratic penalty on
//! the distance between the raw sample and its mirror image (in box-width
//! units). The distribution update uses the raw samples.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight of the squared out-of-box distance subtracted from the objective.
pub const PENALTY_WEIGHT: f64 = 1.0;
/// Covariance eigenvalues are floored here.
pub const EIGENVALUE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid(
                "bounds need matching, nonempty lower and upper vectors",
            ));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(u > l)) {
            return Err(Error::invalid(
                "every upper bound must exceed its lower bound",
            ));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Bounds {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Mirrors each coordinate into `[lower, upper]`.
    pub fn reflect(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| {
                if v >= l && v <= u {
                    return v;
                }
                let w = u - l;
                let y = (v - l).rem_euclid(2.0 * w);
                let y = if y > w { 2.0 * w - y } else { y };
                (l + y).clamp(l, u)
            })
            .collect()
    }

    pub fn penalty(&self, raw: &[f64], repaired: &[f64]) -> f64 {
        raw.iter()
            .zip(repaired)
            .zip(self.widths())
            .map(|((r, p), w)| ((r - p) / w).powi(2))
            .sum::<f64>()
            * PENALTY_WEIGHT
    }
}

/// Serializable distribution state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmaState {
    pub mean: Vec<f64>,
    pub step_size: f64,
    pub covariance: Vec<Vec<f64>>,
    pub path_sigma: Vec<f64>,
    pub path_c: Vec<f64>,
    pub population_size: usize,
    pub generation: usize,
    pub evaluations: usize,
    pub rng_seed: u64,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub raw: Vec<f64>,
    /// Point actually evaluated; always inside the bounds.
    pub repaired: Vec<f64>,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
struct Strategy {
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Strategy {
    fn new(n: usize, lambda: usize) -> Self {
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (0..mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu =
            (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        Strategy {
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

/// Default population size `4 + floor(3 ln d)`.
pub fn default_population_size(dim: usize) -> usize {
    (4 + (3.0 * (dim as f64).ln()).floor() as usize).max(4)
}

pub struct CmaEs {
    bounds: Bounds,
    strategy: Strategy,
    mean: DVector<f64>,
    sigma: f64,
    sigma_max: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    generation: usize,
    evaluations: usize,
    seed: u64,
}

impl CmaEs {
    /// Starts at `mean` with isotropic step `sigma`.
    pub fn new(bounds: Bounds, mean: Vec<f64>, sigma: f64, seed: u64) -> Result<Self> {
        let n = bounds.dim();
        if mean.len() != n {
            return Err(Error::invalid("initial mean has the wrong dimension"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("initial step size must be positive"));
        }
        let sigma_max = 2.0 * bounds.widths().iter().cloned().fold(0.0, f64::max);
        Ok(CmaEs {
            strategy: Strategy::new(n, default_population_size(n)),
            mean: DVector::from_vec(mean),
            sigma,
            sigma_max,
            cov: DMatrix::identity(n, n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            evaluations: 0,
            seed,
            bounds,
        })
    }

    /// Box center start with step 0.3 of the widest box side.
    pub fn centered(bounds: Bounds, seed: u64) -> Result<Self> {
        let sigma = 0.3 * bounds.widths().iter().cloned().fold(0.0, f64::max);
        let mean = bounds.center();
        Self::new(bounds, mean, sigma, seed)
    }

    pub fn from_state(bounds: Bounds, state: &CmaState) -> Result<Self> {
        let n = bounds.dim();
        if state.mean.len() != n
            || state.covariance.len() != n
            || state.covariance.iter().any(|r| r.len() != n)
        {
            return Err(Error::Config(
                "checkpoint state does not match the search dimension".into(),
            ));
        }
        let mut es = Self::new(bounds, state.mean.clone(), state.step_size, state.rng_seed)?;
        es.strategy = Strategy::new(n, state.population_size);
        es.cov = DMatrix::from_fn(n, n, |i, j| state.covariance[i][j]);
        es.p_sigma = DVector::from_vec(state.path_sigma.clone());
        es.p_c = DVector::from_vec(state.path_c.clone());
        es.generation = state.generation;
        es.evaluations = state.evaluations;
        es.decompose();
        Ok(es)
    }

    pub fn state(&self) -> CmaState {
        let n = self.dim();
        CmaState {
            mean: self.mean.iter().copied().collect(),
            step_size: self.sigma,
            covariance: (0..n)
                .map(|i| (0..n).map(|j| self.cov[(i, j)]).collect())
                .collect(),
            path_sigma: self.p_sigma.iter().copied().collect(),
            path_c: self.p_c.iter().copied().collect(),
            population_size: self.strategy.lambda,
            generation: self.generation,
            evaluations: self.evaluations,
            rng_seed: self.seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn population_size(&self) -> usize {
        self.strategy.lambda
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn step_size(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean.iter().copied().collect()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Largest standard deviation of the sampling distribution.
    pub fn spread(&self) -> f64 {
        self.sigma * self.scales.max()
    }

    /// Samples one generation. The random stream depends only on the seed and
    /// the generation index, so a resumed search replays exactly.
    pub fn ask(&self) -> Vec<Candidate> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.generation as u64);
        (0..self.strategy.lambda)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                let y = &self.basis * z.component_mul(&self.scales);
                let x = &self.mean + y * self.sigma;
                let raw: Vec<f64> = x.iter().copied().collect();
                let repaired = self.bounds.reflect(&raw);
                let penalty = self.bounds.penalty(&raw, &repaired);
                Candidate {
                    raw,
                    repaired,
                    penalty,
                }
            })
            .collect()
    }

    /// Updates the distribution from objective values (higher is better) of
    /// the candidates returned by the matching [`CmaEs::ask`].
    pub fn tell(&mut self, candidates: &[Candidate], objective: &[f64]) -> Result<()> {
        let s = &self.strategy;
        if candidates.len() != s.lambda || objective.len() != s.lambda {
            return Err(Error::invalid(
                "tell needs one objective value per candidate",
            ));
        }
        let n = self.dim();
        let nf = n as f64;
        let fitness: Vec<f64> = objective
            .iter()
            .zip(candidates)
            .map(|(f, c)| f - c.penalty)
            .collect();
        let mut order: Vec<usize> = (0..s.lambda).collect();
        // stable: ties keep sampling order
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));

        let old_mean = self.mean.clone();
        let steps: Vec<DVector<f64>> = order
            .iter()
            .take(s.weights.len())
            .map(|&i| (DVector::from_column_slice(&candidates[i].raw) - &old_mean) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(n);
        for (w, y) in s.weights.iter().zip(&steps) {
            y_w += y * *w;
        }
        self.mean = &old_mean + &y_w * self.sigma;

        let inv_sqrt_c = &self.basis
            * DMatrix::from_diagonal(&self.scales.map(|d| 1.0 / d))
            * self.basis.transpose();
        self.p_sigma = &self.p_sigma * (1.0 - s.c_sigma)
            + (&inv_sqrt_c * &y_w) * (s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff).sqrt();
        let ps_norm = self.p_sigma.norm();
        let decay = 1.0 - (1.0 - s.c_sigma).powi(2 * (self.generation as i32 + 1));
        let h_sigma = ps_norm / decay.sqrt() < (1.4 + 2.0 / (nf + 1.0)) * s.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        self.p_c =
            &self.p_c * (1.0 - s.c_c) + &y_w * (h * (s.c_c * (2.0 - s.c_c) * s.mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, y) in s.weights.iter().zip(&steps) {
            rank_mu += (y * y.transpose()) * *w;
        }
        let rank_one = &self.p_c * self.p_c.transpose();
        let correction = (1.0 - h) * s.c_c * (2.0 - s.c_c);
        self.cov = &self.cov * (1.0 - s.c_1 - s.c_mu)
            + (rank_one + &self.cov * correction) * s.c_1
            + rank_mu * s.c_mu;

        self.sigma *= ((s.c_sigma / s.d_sigma) * (ps_norm / s.chi_n - 1.0)).exp();
        self.sigma = self.sigma.min(self.sigma_max);

        self.generation += 1;
        self.evaluations += candidates.len();
        self.decompose();
        Ok(())
    }

    /// Symmetrizes the covariance, floors its eigenvalues, and refreshes the
    /// sampling basis.
    fn decompose(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let floored = eig.eigenvalues.iter().any(|&l| !(l >= EIGENVALUE_FLOOR));
        let values = eig.eigenvalues.map(|l| {
            if l >= EIGENVALUE_FLOOR {
                l
            } else {
                EIGENVALUE_FLOOR
            }
        });
        self.cov = if floored {
            let c =
                &eig.eigenvectors * DMatrix::from_diagonal(&values) * eig.eigenvectors.transpose();
            (&c + c.transpose()) * 0.5
        } else {
            sym
        };
        self.basis = eig.eigenvectors;
        self.scales = values.map(f64::sqrt);
    }

    /// Runs until the next generation would exceed `budget` evaluations or the
    /// distribution collapses below `tol_x`. Returns the best repaired point
    /// and its objective value.
    pub fn maximize<F>(
        &mut self,
        mut objective: F,
        budget: usize,
        tol_x: f64,
    ) -> Result<(Vec<f64>, f64)>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let lambda = self.population_size();
        if budget < lambda {
            return Err(Error::BudgetTooSmall {
                budget,
                population: lambda,
            });
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        while self.evaluations + lambda <= budget && self.spread() > tol_x {
            let cands = self.ask();
            let values = cands
                .iter()
                .map(|c| objective(&c.repaired))
                .collect::<Result<Vec<f64>>>()?;
            for (c, &v) in cands.iter().zip(&values) {
                if best.as_ref().is_none_or(|(_, b)| v > *b) {
                    best = Some((c.repaired.clone(), v));
                }
            }
            self.tell(&cands, &values)?;
        }
        Ok(best.expect("budget admits at least one generation"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_population() {
        assert_eq!(default_population_size(2), 6);
        assert_eq!(default_population_size(6), 9);
        assert_eq!(default_population_size(1), 4);
    }

    #[test]
    fn reflection_stays_inside() {
        let b = Bounds::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(b.reflect(&[1.25, -1.5]), vec![0.75, -0.5]);
        assert_eq!(b.reflect(&[-0.25, 3.5]), vec![0.25, -0.5]);
        let r = b.reflect(&[17.3, -42.1]);
        assert!(b.contains(&r));
        assert_eq!(b.penalty(&[0.5, 0.0], &[0.5, 0.0]), 0.0);
    }

    #[test]
    fn budget_smaller_than_generation() {
        let mut es = CmaEs::centered(Bounds::unit(6), 1).unwrap();
        assert!(matches!(
            es.maximize(|_| Ok(0.0), 5, 0.0),
            Err(Error::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn objective_error_propagates() {
        let mut es = CmaEs::centered(Bounds::unit(2), 1).unwrap();
        let r = es.maximize(|_| Err(Error::invalid("boom")), 100, 0.0);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn state_round_trip_replays() {
        let f = |x: &[f64]| Ok(-(x[0] - 0.3).powi(2) - (x[1] - 0.8).powi(2));
        let mut a = CmaEs::centered(Bounds::unit(2), 9).unwrap();
        a.maximize(f, 60, 0.0).unwrap();
        let state = a.state();
        let mut b = CmaEs::from_state(Bounds::unit(2), &state).unwrap();
        let ca = a.ask();
        let cb = b.ask();
        for (x, y) in ca.iter().zip(&cb) {
            for (p, q) in x.raw.iter().zip(&y.raw) {
                assert!((p - q).abs() < 1e-12);
            }
        }
        a.maximize(f, 120, 0.0).unwrap();
        b.maximize(f, 120, 0.0).unwrap();
        assert!((a.step_size() - b.step_size()).abs() < 1e-9 * a.step_size());
    }
}
