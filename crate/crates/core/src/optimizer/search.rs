use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cma::{Bounds, CmaEs, CmaState};
use super::params::{ParamKind, ParamVector, SearchSpace};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
/// Search stops once the sampling spread in the unit cube falls below this.
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub params: ParamVector,
    pub score: f64,
    pub generation: usize,
}

/// Resumable search snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub space: SearchSpace,
    pub state: CmaState,
    pub best: Option<BestRecord>,
    pub history: Vec<(usize, f64)>,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cp: Checkpoint = serde_json::from_str(&text)?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} not supported (expected {CHECKPOINT_VERSION})",
                cp.version
            )));
        }
        Ok(cp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: ParamVector,
    pub best_score: f64,
    /// `(generation, best score so far)` after every generation.
    pub history: Vec<(usize, f64)>,
    pub evaluations: usize,
}

/// CMA-ES over a [`SearchSpace`], maximizing `objective`.
pub struct Search {
    space: SearchSpace,
    engine: CmaEs,
    best: Option<BestRecord>,
    history: Vec<(usize, f64)>,
}

impl Search {
    pub fn new(space: SearchSpace, seed: u64) -> Result<Self> {
        space.validate()?;
        Ok(Search {
            engine: CmaEs::centered(Bounds::unit(space.dim()), seed)?,
            space,
            best: None,
            history: Vec::new(),
        })
    }

    pub fn resume(cp: &Checkpoint) -> Result<Self> {
        cp.space.validate()?;
        Ok(Search {
            engine: CmaEs::from_state(Bounds::unit(cp.space.dim()), &cp.state)?,
            space: cp.space,
            best: cp.best.clone(),
            history: cp.history.clone(),
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            space: self.space,
            state: self.engine.state(),
            best: self.best.clone(),
            history: self.history.clone(),
        }
    }

    pub fn population_size(&self) -> usize {
        self.engine.population_size()
    }

    pub fn evaluations(&self) -> usize {
        self.engine.evaluations()
    }

    pub fn best(&self) -> Option<&BestRecord> {
        self.best.as_ref()
    }

    pub fn history(&self) -> &[(usize, f64)] {
        &self.history
    }

    pub fn converged(&self) -> bool {
        self.engine.spread() <= UNIT_TOLERANCE
    }

    /// Samples, evaluates, and updates one generation.
    pub fn step<F>(&mut self, objective: &mut F) -> Result<()>
    where
        F: FnMut(&ParamVector) -> Result<f64>,
    {
        let generation = self.engine.generation();
        let candidates = self.engine.ask();
        let mut values = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let params = self.space.from_unit(&c.repaired);
            let v = objective(&params)?;
            if self.best.as_ref().is_none_or(|b| v > b.score) {
                self.best = Some(BestRecord {
                    params,
                    score: v,
                    generation,
                });
            }
            values.push(v);
        }
        self.engine.tell(&candidates, &values)?;
        let best = self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.score);
        self.history.push((generation, best));
        Ok(())
    }

    /// Steps until the total evaluation count would exceed `budget`.
    pub fn run<F>(&mut self, mut objective: F, budget: usize) -> Result<SearchResult>
    where
        F: FnMut(&ParamVector) -> Result<f64>,
    {
        let lambda = self.population_size();
        if budget < lambda {
            return Err(Error::BudgetTooSmall {
                budget,
                population: lambda,
            });
        }
        while self.evaluations() + lambda <= budget && !self.converged() {
            self.step(&mut objective)?;
        }
        self.result()
    }

    pub fn result(&self) -> Result<SearchResult> {
        let best = self
            .best
            .as_ref()
            .ok_or(Error::EmptyInput("search has not evaluated any candidate"))?;
        Ok(SearchResult {
            best: best.params.clone(),
            best_score: best.score,
            history: self.history.clone(),
            evaluations: self.evaluations(),
        })
    }
}

/// Runs a fresh search over the default space for `kind`.
pub fn cma_search<F>(
    objective: F,
    kind: ParamKind,
    budget: usize,
    seed: u64,
) -> Result<SearchResult>
where
    F: FnMut(&ParamVector) -> Result<f64>,
{
    Search::new(SearchSpace::new(kind), seed)?.run(objective, budget)
}

/// History as CSV with header `generation,best_score`.
pub fn write_history_csv<W: Write>(history: &[(usize, f64)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["generation", "best_score"])?;
    for (g, s) in history {
        out.write_record([g.to_string(), s.to_string()])?;
    }
    out.flush().map_err(|e| Error::io("history.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak(p: &ParamVector) -> Result<f64> {
        Ok(-((p.values[0] - 300.0) / 100.0).powi(2) - (p.duty_cycle() - 0.4).powi(2))
    }

    #[test]
    fn finds_interior_peak() {
        let r = cma_search(peak, ParamKind::Mono2, 600, 3).unwrap();
        assert!((r.best.values[0] - 300.0).abs() < 1.0, "{:?}", r.best);
        assert!((r.best.duty_cycle() - 0.4).abs() < 0.01);
        assert!(r.evaluations <= 600);
    }

    #[test]
    fn history_is_nondecreasing() {
        let r = cma_search(peak, ParamKind::Color6, 300, 1).unwrap();
        assert!(r
            .history
            .windows(2)
            .all(|w| w[1].1 >= w[0].1 && w[1].0 == w[0].0 + 1));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let mut full = Search::new(SearchSpace::new(ParamKind::Color6), 5).unwrap();
        let full = full.run(peak, 270).unwrap();

        let mut first = Search::new(SearchSpace::new(ParamKind::Color6), 5).unwrap();
        first.run(peak, 90).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.json");
        first.checkpoint().save(&path).unwrap();
        let mut second = Search::resume(&Checkpoint::load(&path).unwrap()).unwrap();
        let resumed = second.run(peak, 270).unwrap();
        assert_eq!(full.history.len(), resumed.history.len());
        for (a, b) in full.history.iter().zip(&resumed.history) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() <= 1e-12 * a.1.abs().max(1.0));
        }
    }

    #[test]
    fn bad_checkpoint_version() {
        let s = Search::new(SearchSpace::new(ParamKind::Mono2), 0).unwrap();
        let mut cp = s.checkpoint();
        cp.version = 99;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cp.json");
        cp.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Config(_))));
    }
}
