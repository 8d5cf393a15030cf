//! Committed trades on a wall-clock event line, used to clip new trades so
//! that the whole schedule stays within the battery's bounds when replayed
//! in time order.

use crate::battery::Energy;

#[derive(Debug, Clone)]
pub(crate) struct Timeline {
    initial: Energy,
    net: Vec<Energy>,
}

impl Timeline {
    pub fn new(initial: Energy, events: usize) -> Self {
        Timeline {
            initial,
            net: vec![Energy::ZERO; events],
        }
    }

    /// Charge entering event `k`.
    pub fn charge_before(&self, k: usize) -> Energy {
        self.net[..k].iter().fold(self.initial, |c, q| c + *q)
    }

    /// (min, max) charge after each event in `from..to`, `from < to`.
    pub fn extrema(&self, from: usize, to: usize) -> (Energy, Energy) {
        let mut level = self.charge_before(from);
        let (mut lo, mut hi) = (Energy::from_milli(i64::MAX), Energy::from_milli(i64::MIN));
        for q in &self.net[from..to] {
            level = level + *q;
            lo = lo.min(level);
            hi = hi.max(level);
        }
        (lo, hi)
    }

    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn commit(&mut self, k: usize, signed: Energy) {
        debug_assert!(self.net[k].is_zero(), "one trade per event");
        self.net[k] = signed;
    }
}
