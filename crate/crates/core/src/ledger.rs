//! Incremental delay-surprisal tables maintained during a step.
//!
//! `S[sub][sup]` is the surprisal of delaying acceptance along the recorded
//! values from index `sub` to index `sup` (either direction). Entries on the
//! diagonal are zero. A step only keeps the two forward columns and two
//! reverse rows the recursion reads, so memory is linear in the branch count.

use crate::models::AcceptanceFunction;

/// Dense square table indexed `(sub, sup)`, grown by doubling. Used to keep
/// the full history of a ledger when it is requested.
#[derive(Debug, Clone)]
pub struct SurprisalTable {
    cap: usize,
    data: Vec<f64>,
}

impl SurprisalTable {
    fn new() -> Self {
        Self {
            cap: 4,
            data: vec![0.0; 16],
        }
    }

    fn ensure(&mut self, size: usize) {
        if size <= self.cap {
            return;
        }
        let mut cap = self.cap;
        while cap < size {
            cap *= 2;
        }
        let mut data = vec![0.0; cap * cap];
        for i in 0..self.cap {
            data[i * cap..i * cap + self.cap].copy_from_slice(&self.data[i * self.cap..(i + 1) * self.cap]);
        }
        self.cap = cap;
        self.data = data;
    }

    pub fn get(&self, sub: usize, sup: usize) -> f64 {
        self.data[sub * self.cap + sup]
    }

    fn set(&mut self, sub: usize, sup: usize, v: f64) {
        self.ensure(sub.max(sup) + 1);
        self.data[sub * self.cap + sup] = v;
    }
}

/// The slices of one table the recursion touches at branch n: forward
/// entries ending at n-1 and n (indexed by start), reverse entries starting
/// at n and n+1 (indexed by end). Everything else is only kept in `history`.
#[derive(Debug, Clone)]
struct Rolling {
    fwd_prev: Vec<f64>,
    fwd: Vec<f64>,
    rev_prev: Vec<f64>,
    rev: Vec<f64>,
    history: Option<SurprisalTable>,
}

impl Rolling {
    fn new(history: bool) -> Self {
        Self {
            fwd_prev: Vec::new(),
            fwd: Vec::new(),
            rev_prev: Vec::new(),
            rev: Vec::new(),
            history: history.then(SurprisalTable::new),
        }
    }

    /// Advances to branch n: S_n^n = S_{n+1}^{n+1} = 0.
    fn advance(&mut self, n: usize) {
        std::mem::swap(&mut self.fwd_prev, &mut self.fwd);
        std::mem::swap(&mut self.rev_prev, &mut self.rev);
        self.fwd.clear();
        self.fwd.resize(n + 1, 0.0);
        self.rev.clear();
        self.rev.resize(n + 2, 0.0);
        if let Some(h) = self.history.as_mut() {
            h.set(n, n, 0.0);
            h.set(n + 1, n + 1, 0.0);
        }
    }

    /// Copies the entries computed at branch n into the history, if kept.
    fn record(&mut self, n: usize) {
        if let Some(h) = self.history.as_mut() {
            for (i, &v) in self.fwd[..n].iter().enumerate() {
                h.set(i, n, v);
            }
            for m in 1..=n {
                h.set(n + 1, m, self.rev[m]);
            }
        }
    }

    fn entry(&self, sub: usize, sup: usize) -> f64 {
        self.history
            .as_ref()
            .expect("ledger history was not enabled")
            .get(sub, sup)
    }
}

/// Ledger for the classical chain: visited energies and the table S.
#[derive(Debug, Clone)]
pub struct DelayLedger {
    values: Vec<f64>,
    s: Rolling,
}

impl DelayLedger {
    /// Starts a step at energy `e0` with `S_0^0 = 0`.
    pub fn new(e0: f64) -> Self {
        Self {
            values: vec![e0],
            s: Rolling::new(false),
        }
    }

    /// Like [`DelayLedger::new`] but keeps every table entry for inspection.
    pub fn with_history(e0: f64) -> Self {
        Self {
            values: vec![e0],
            s: Rolling::new(true),
        }
    }

    /// Current branch index n, i.e. the number of values recorded minus one.
    pub fn branch(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `S[sub][sup]`; needs a ledger built with `with_history`.
    pub fn s(&self, sub: usize, sup: usize) -> f64 {
        self.s.entry(sub, sup)
    }

    /// Records the proposal energy `E_{a_{n+1}}` and updates both recursion
    /// families for m = n, ..., 1.
    pub fn push(&mut self, e_next: f64, af: &AcceptanceFunction) {
        let n = self.branch();
        let t = af.temperature();
        self.values.push(e_next);
        self.s.advance(n);
        let e = &self.values;
        let Rolling {
            fwd_prev,
            fwd,
            rev_prev,
            rev,
            ..
        } = &mut self.s;
        // the forward line only reads the previous branch, so it is computed
        // first and the serial reverse line reads it afterwards
        for m in 1..=n {
            // S_{m-1}^n from S_{m-1}^{n-1} and S_n^m
            let prev = fwd_prev[m - 1];
            fwd[m - 1] = prev + af.s(e[n] - e[m - 1] + t * rev_prev[m] - t * prev);
        }
        for m in (1..=n).rev() {
            // S_{n+1}^m from S_{n+1}^{m+1} and S_m^n
            let prev = rev[m + 1];
            rev[m] = prev + af.s(e[m] - e[n + 1] + t * fwd[m] - t * prev);
        }
        self.s.record(n);
    }

    /// Argument of f in the halting test of the latest branch.
    pub fn halting_argument(&self, t: f64) -> f64 {
        let n = self.branch() - 1;
        let e = &self.values;
        e[n + 1] - e[0] + t * self.s.rev[1] - t * self.s.fwd[0]
    }
}

/// Ledger for the quantum chain: measured frequencies and the tables S and S-bar.
#[derive(Debug, Clone)]
pub struct QuantumDelayLedger {
    omegas: Vec<f64>,
    shift: f64,
    s: Rolling,
    s_bar: Rolling,
}

impl QuantumDelayLedger {
    /// Starts a step at frequency `omega0`; `shift` is 1/(2 lambda T).
    pub fn new(omega0: f64, shift: f64) -> Self {
        Self::build(omega0, shift, false)
    }

    /// Like [`QuantumDelayLedger::new`] but keeps every table entry.
    pub fn with_history(omega0: f64, shift: f64) -> Self {
        Self::build(omega0, shift, true)
    }

    fn build(omega0: f64, shift: f64, history: bool) -> Self {
        Self {
            omegas: vec![omega0],
            shift,
            s: Rolling::new(history),
            s_bar: Rolling::new(history),
        }
    }

    pub fn branch(&self) -> usize {
        self.omegas.len() - 1
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn s(&self, sub: usize, sup: usize) -> f64 {
        self.s.entry(sub, sup)
    }

    pub fn s_bar(&self, sub: usize, sup: usize) -> f64 {
        self.s_bar.entry(sub, sup)
    }

    /// Records `omega_{n+1}` and applies the four-line recursion for m = n, ..., 1.
    pub fn push(&mut self, omega_next: f64, af: &AcceptanceFunction) {
        let n = self.branch();
        let t = af.temperature();
        let sh = self.shift;
        self.omegas.push(omega_next);
        self.s.advance(n);
        self.s_bar.advance(n);
        let w = &self.omegas;
        let (s, sb) = (&mut self.s, &mut self.s_bar);
        for m in 1..=n {
            // S_n^m enters both forward lines through S-bar
            let back = w[n] - w[m - 1] + t * sb.rev_prev[m];
            let prev = s.fwd_prev[m - 1];
            s.fwd[m - 1] = prev + af.s(back - t * prev + sh);
            let prev = sb.fwd_prev[m - 1];
            sb.fwd[m - 1] = prev + af.s(back - t * prev);
        }
        for m in (1..=n).rev() {
            let ahead = w[m] - w[n + 1] + t * sb.fwd[m];
            let prev = s.rev[m + 1];
            s.rev[m] = prev + af.s(ahead - t * prev + sh);
            let prev = sb.rev[m + 1];
            sb.rev[m] = prev + af.s(ahead - t * prev);
        }
        s.record(n);
        sb.record(n);
    }

    pub fn halting_argument(&self, t: f64) -> f64 {
        let n = self.branch() - 1;
        let w = &self.omegas;
        w[n + 1] - w[0] + t * self.s_bar.rev[1] - t * self.s.fwd[0] + self.shift
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_growth_preserves_entries() {
        let mut t = SurprisalTable::new();
        t.set(3, 2, 1.5);
        t.set(39, 0, 0.0);
        assert_eq!(t.get(3, 2), 1.5);
        assert_eq!(t.get(39, 39), 0.0);
    }

    #[test]
    fn empty_recursion_at_first_branch() {
        let af = AcceptanceFunction::new(0.05, 1.0).unwrap();
        let mut l = DelayLedger::new(0.3);
        l.push(1.1, &af);
        assert_eq!(l.halting_argument(1.0), 1.1 - 0.3);
        let mut q = QuantumDelayLedger::new(0.3, 0.25);
        q.push(1.1, &af);
        assert!((q.halting_argument(1.0) - (1.1 - 0.3 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn unshifted_quantum_ledger_reduces_to_classical() {
        let af = AcceptanceFunction::new(0.05, 0.7).unwrap();
        let seq = [0.0, 1.3, -0.4, 0.9, 0.2, 2.0, -1.0];
        let mut cl = DelayLedger::with_history(seq[0]);
        let mut qu = QuantumDelayLedger::with_history(seq[0], 0.0);
        for &x in &seq[1..] {
            cl.push(x, &af);
            qu.push(x, &af);
            assert_eq!(cl.halting_argument(0.7), qu.halting_argument(0.7));
        }
        for i in 0..seq.len() {
            for j in 0..seq.len() {
                assert_eq!(cl.s(i, j), qu.s(i, j));
                assert_eq!(qu.s(i, j), qu.s_bar(i, j));
            }
        }
    }
}
