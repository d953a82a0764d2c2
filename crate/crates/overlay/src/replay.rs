/// 64-entry sliding anti-replay window over message counters.
#[derive(Debug, Clone, Default)]
pub struct ReplayWindow {
    highest: u64,
    bitmap: u64,
}

pub const WINDOW_SIZE: u64 = 64;

impl ReplayWindow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn highest(&self) -> u64 {
        self.highest
    }

    /// Whether `counter` would be accepted. Counter 0 is never valid.
    pub fn check(&self, counter: u64) -> bool {
        if counter == 0 {
            return false;
        }
        if counter > self.highest {
            return true;
        }
        let age = self.highest - counter;
        if age >= WINDOW_SIZE {
            return false;
        }
        self.bitmap & (1u64 << age) == 0
    }

    /// Records `counter`; only call after [`ReplayWindow::check`] and authentication succeeded.
    pub fn mark(&mut self, counter: u64) {
        if counter > self.highest {
            let shift = counter - self.highest;
            self.bitmap = if shift >= WINDOW_SIZE { 0 } else { self.bitmap << shift };
            self.bitmap |= 1;
            self.highest = counter;
        } else {
            self.bitmap |= 1u64 << (self.highest - counter);
        }
    }

    pub fn accept(&mut self, counter: u64) -> bool {
        if self.check(counter) {
            self.mark(counter);
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn basic_rules() {
        let mut w = ReplayWindow::new();
        assert!(!w.accept(0));
        assert!(w.accept(1));
        assert!(!w.accept(1));
        assert!(w.accept(100));
        assert!(!w.accept(36), "100 - 64 is outside the window");
        assert!(w.accept(37));
        assert!(!w.accept(37));
        assert!(w.accept(99));
        assert!(w.accept(1000));
        assert!(!w.accept(100));
    }

    proptest! {
        // Model: accepted iff never accepted before and within 64 of the max seen so far.
        #[test]
        fn matches_reference_model(seq in proptest::collection::vec(1u64..300, 0..400)) {
            let mut w = ReplayWindow::new();
            let mut seen = HashSet::new();
            let mut highest = 0u64;
            for c in seq {
                let expect = !seen.contains(&c) && (c > highest || highest - c < WINDOW_SIZE);
                prop_assert_eq!(w.accept(c), expect);
                if expect {
                    seen.insert(c);
                    highest = highest.max(c);
                }
            }
        }
    }
}
