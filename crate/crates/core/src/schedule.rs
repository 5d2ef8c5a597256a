use serde::{Deserialize, Serialize};

/// Linear interpolation from `start` to `end` over `decay_steps`, constant
/// afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: usize,
}

impl LinearSchedule {
    pub fn constant(value: f64) -> Self {
        Self { start: value, end: value, decay_steps: 0 }
    }

    pub fn value(&self, t: usize) -> f64 {
        if self.decay_steps == 0 || t >= self.decay_steps {
            return self.end;
        }
        let frac = t as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_then_holds() {
        let s = LinearSchedule { start: 1.0, end: 0.05, decay_steps: 10 };
        assert_eq!(s.value(0), 1.0);
        assert!((s.value(5) - 0.525).abs() < 1e-12);
        assert_eq!(s.value(10), 0.05);
        assert_eq!(s.value(1000), 0.05);
        assert_eq!(LinearSchedule::constant(0.3).value(0), 0.3);
    }
}
