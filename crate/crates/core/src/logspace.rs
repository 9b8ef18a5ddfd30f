//! Log-domain accumulation.
//!
//! Masses are represented as `Option<f64>` holding the natural logarithm, with
//! `None` standing for an exact zero. No floating-point infinity is ever fed
//! into arithmetic.

use serde::{Deserialize, Serialize};

/// Running sum of `exp(v)` over a stream of log values, kept as a shifted
/// pair so that neither overflow nor total underflow can occur.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LogAccumulator {
    max: f64,
    scaled: f64,
    empty: bool,
}

impl LogAccumulator {
    pub const fn new() -> Self {
        LogAccumulator {
            max: 0.0,
            scaled: 0.0,
            empty: true,
        }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        if self.empty {
            self.max = v;
            self.scaled = 1.0;
            self.empty = false;
        } else if v > self.max {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.scaled += (v - self.max).exp();
        }
    }

    pub fn add_opt(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.add(v);
        }
    }

    /// Merge another accumulator. The result depends on the order of merges,
    /// so callers that need bit-stable output must merge in a fixed order.
    pub fn merge(&mut self, other: &LogAccumulator) {
        if other.empty {
            return;
        }
        if self.empty {
            *self = *other;
            return;
        }
        if other.max > self.max {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        } else {
            self.scaled += other.scaled * (other.max - self.max).exp();
        }
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn value(&self) -> Option<f64> {
        if self.empty {
            None
        } else {
            Some(self.max + self.scaled.ln())
        }
    }
}

/// `log(exp(a) + exp(b))` on optional log masses.
pub fn log_add(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            Some(hi + (lo - hi).exp().ln_1p())
        }
    }
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    let mut acc = LogAccumulator::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// `ln` of a non-negative count, `None` for zero.
pub fn log_count(c: u128) -> Option<f64> {
    if c == 0 {
        None
    } else {
        Some((c as f64).ln())
    }
}

pub fn exp_or_zero(v: Option<f64>) -> f64 {
    v.map_or(0.0, f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_matches_direct_sum() {
        let vals = [-3.0, 2.0, 0.5, -700.0, 1.0];
        let direct: f64 = vals.iter().map(|v: &f64| v.exp()).sum();
        let mut acc = LogAccumulator::new();
        for v in vals {
            acc.add(v);
        }
        assert!((acc.value().unwrap() - direct.ln()).abs() < 1e-14);
    }

    #[test]
    fn accumulator_survives_large_negative_values() {
        let mut acc = LogAccumulator::new();
        acc.add(-2000.0);
        acc.add(-2001.0);
        let expect = -2000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((acc.value().unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_sequential() {
        let mut a = LogAccumulator::new();
        let mut b = LogAccumulator::new();
        let mut all = LogAccumulator::new();
        for (i, v) in [0.1, 3.0, -1.0, 2.5, 7.0].iter().enumerate() {
            if i % 2 == 0 { a.add(*v) } else { b.add(*v) }
            all.add(*v);
        }
        a.merge(&b);
        assert!((a.value().unwrap() - all.value().unwrap()).abs() < 1e-13);
    }

    #[test]
    fn zero_mass_is_none() {
        assert_eq!(LogAccumulator::new().value(), None);
        assert_eq!(log_add(None, None), None);
        assert_eq!(log_add(Some(1.0), None), Some(1.0));
        assert_eq!(log_count(0), None);
    }
}
