use std::collections::HashMap;

use super::{EngineError, EngineLimits, Evaluation, Evaluator};
use crate::chess::Position;

/// Memoizes evaluations by exact FEN and limits. Critic #2 and the grader
/// ask about the same positions repeatedly within one attempt.
pub struct EvalCache<E> {
    inner: E,
    memo: HashMap<(String, EngineLimits), Evaluation>,
    misses: u64,
}

impl<E: Evaluator> EvalCache<E> {
    pub fn new(inner: E) -> EvalCache<E> {
        EvalCache {
            inner,
            memo: HashMap::new(),
            misses: 0,
        }
    }

    /// Number of evaluations that reached the wrapped evaluator.
    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}

impl<E: Evaluator> Evaluator for EvalCache<E> {
    fn evaluate(&mut self, p: &Position, limits: &EngineLimits) -> Result<Evaluation, EngineError> {
        let key = (p.to_fen(), *limits);
        if let Some(e) = self.memo.get(&key) {
            return Ok(*e);
        }
        let e = self.inner.evaluate(p, limits)?;
        self.misses += 1;
        self.memo.insert(key, e);
        Ok(e)
    }

    fn name(&self) -> String {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::MateOracle;

    #[test]
    fn second_lookup_is_free() {
        let mut c = EvalCache::new(MateOracle::default());
        let p = Position::starting();
        let a = c.evaluate(&p, &EngineLimits::depth(1)).unwrap();
        let b = c.evaluate(&p, &EngineLimits::depth(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(c.misses(), 1);
        c.evaluate(&p, &EngineLimits::depth(2)).unwrap();
        assert_eq!(c.misses(), 2);
    }
}
