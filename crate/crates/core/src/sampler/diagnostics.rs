//! Autocorrelation and batch-means error bars.

use serde::{Deserialize, Serialize};

use crate::stats::mean;

/// Integrated autocorrelation time with Sokal's automatic window: the
/// smallest `M` with `M ≥ 5 τ(M)`.
pub fn sokal_tau(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 0.5;
    }
    let m = mean(xs);
    let c0 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let ct = xs[..n - t]
            .iter()
            .zip(&xs[t..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / n as f64;
        tau += ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchMean {
    pub mean: f64,
    pub se: f64,
    pub batches: usize,
}

/// Mean with a batch-means standard error; each of the `chains` equal
/// segments of `xs` is cut into at least 32 batches.
pub fn batch_means(xs: &[f64], chains: usize) -> BatchMean {
    let chains = chains.max(1);
    let per = xs.len() / chains;
    let per_batch_count = 32.min(per.max(1));
    let size = (per / per_batch_count).max(1);
    let mut means = Vec::new();
    for c in 0..chains {
        let seg = &xs[c * per..(c + 1) * per];
        for b in seg.chunks_exact(size).take(per_batch_count) {
            means.push(mean(b));
        }
    }
    let b = means.len();
    let mu = mean(xs);
    let se = if b > 1 {
        let m = mean(&means);
        (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b as f64 - 1.0) / b as f64).sqrt()
    } else {
        f64::INFINITY
    };
    BatchMean {
        mean: mu,
        se,
        batches: b,
    }
}
