//! Delay surprisals evaluated straight from their definition, for the oracles.
//!
//! For a value sequence x_0, ..., x_L the delay probability is
//! `p = prod_k (1 - f(x_{k+1} - x_0 + shift + T Sbar(x_{k+1} .. x_1) - T S(x_0 .. x_k)))`
//! and `S = -ln p`. `Sbar` is `S` with the first element raised by `shift`.
//! Sub-sequences are evaluated top-down with memoization, independently of
//! the incremental order used by the samplers.

use crate::models::AcceptanceFunction;

pub struct SurprisalOracle<'a> {
    values: &'a [f64],
    af: AcceptanceFunction,
    shift: f64,
    memo: Vec<Option<f64>>,
}

impl<'a> SurprisalOracle<'a> {
    pub fn new(values: &'a [f64], af: AcceptanceFunction, shift: f64) -> Self {
        let n = values.len();
        Self {
            values,
            af,
            shift,
            memo: vec![None; n * n * 2],
        }
    }

    /// Surprisal of the sub-sequence running from index `start` to index `end`.
    pub fn surprisal(&mut self, start: usize, end: usize, barred: bool) -> f64 {
        if start == end {
            return 0.0;
        }
        let n = self.values.len();
        let key = (start * n + end) * 2 + barred as usize;
        if let Some(v) = self.memo[key] {
            return v;
        }
        let len = start.abs_diff(end);
        let at = |k: usize| if end > start { start + k } else { start - k };
        let t = self.af.temperature();
        let x0 = self.values[start] + if barred { self.shift } else { 0.0 };
        let mut total = 0.0;
        for k in 0..len {
            let back = self.surprisal(at(k + 1), at(1), true);
            let fwd = self.surprisal(start, at(k), barred);
            total += self.af.s(self.values[at(k + 1)] - x0 + self.shift + t * back - t * fwd);
        }
        self.memo[key] = Some(total);
        total
    }

    /// Probability weight f_n e^{-S_0^n} of halting at the last branch of the whole sequence.
    pub fn halting_weight(&mut self) -> f64 {
        let last = self.values.len() - 1;
        assert!(last >= 1, "need at least one proposal");
        let t = self.af.temperature();
        let fwd = self.surprisal(0, last - 1, false);
        let back = self.surprisal(last, 1, true);
        let arg = self.values[last] - self.values[0] + self.shift + t * back - t * fwd;
        self.af.f(arg) * (-fwd).exp()
    }

    /// Probability e^{-S_0^{L}} of delaying through every branch of the sequence.
    pub fn delay_weight(&mut self) -> f64 {
        let last = self.values.len() - 1;
        (-self.surprisal(0, last, false)).exp()
    }
}
