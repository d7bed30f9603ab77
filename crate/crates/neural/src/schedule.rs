//! Learning-rate schedules.

/// Linear warmup from 0 to `peak` over `warmup` steps, then linear decay to
/// 0 at `total` steps. `step` counts optimizer updates from 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearWarmupDecay {
    pub peak: f64,
    pub warmup: usize,
    pub total: usize,
}

impl LinearWarmupDecay {
    pub fn new(peak: f64, warmup: usize, total: usize) -> Self {
        LinearWarmupDecay {
            peak,
            warmup: warmup.min(total),
            total,
        }
    }

    pub fn at(&self, step: usize) -> f64 {
        if step < self.warmup {
            return self.peak * step as f64 / self.warmup.max(1) as f64;
        }
        let remaining = self.total.saturating_sub(step) as f64;
        let span = self.total.saturating_sub(self.warmup).max(1) as f64;
        self.peak * (remaining / span).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_then_decay() {
        let s = LinearWarmupDecay::new(1.0, 2, 6);
        let lrs: Vec<f64> = (0..7).map(|i| s.at(i)).collect();
        assert_eq!(lrs, [0.0, 0.5, 1.0, 0.75, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn no_warmup_starts_at_peak() {
        let s = LinearWarmupDecay::new(2.0, 0, 4);
        assert_eq!(s.at(0), 2.0);
        assert_eq!(s.at(2), 1.0);
    }
}
