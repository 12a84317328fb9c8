//! Completed Q-values, σ scaling, improved logits and min-max normalisation.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaConfig {
    pub c_visit: f64,
    pub c_scale: f64,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        Self { c_visit: 50.0, c_scale: 1.0 }
    }
}

/// `σ(q) = (c_visit + max_b N(b)) · c_scale · q`.
pub fn sigma(q: f64, max_visit: u32, cfg: SigmaConfig) -> f64 {
    (cfg.c_visit + max_visit as f64) * cfg.c_scale * q
}

/// Mixed value `V̂` interpolating the network value with the prior-weighted
/// mean Q of visited actions. Equals `value` when nothing has been visited.
pub fn mixed_value(value: f64, probs: &[f64], q: &[f64], visits: &[u32]) -> f64 {
    let total: u32 = visits.iter().sum();
    if total == 0 {
        return value;
    }
    let mut p_sum = 0.0;
    let mut pq_sum = 0.0;
    for i in 0..visits.len() {
        if visits[i] > 0 {
            p_sum += probs[i];
            pq_sum += probs[i] * q[i];
        }
    }
    let weighted = if p_sum > 0.0 {
        pq_sum / p_sum
    } else {
        // Prior puts no mass on visited actions; fall back to the visit-weighted mean.
        visits.iter().zip(q).map(|(&n, q)| n as f64 * q).sum::<f64>() / total as f64
    };
    (value + total as f64 * weighted) / (1.0 + total as f64)
}

/// Visited actions keep their empirical Q; unvisited ones receive `fill`.
pub fn completed_q(q: &[f64], visits: &[u32], fill: f64) -> Vec<f64> {
    q.iter().zip(visits).map(|(&q, &n)| if n > 0 { q } else { fill }).collect()
}

/// `logit(a) + σ(Q̂(a) − baseline)`; `-inf` logits stay `-inf`.
pub fn improved_logits(logits: &[f64], completed: &[f64], baseline: f64, max_visit: u32, cfg: SigmaConfig) -> Vec<f64> {
    logits
        .iter()
        .zip(completed)
        .map(|(&l, &q)| if l == f64::NEG_INFINITY { l } else { l + sigma(q - baseline, max_visit, cfg) })
        .collect()
}

/// `argmax_a π'(a) − N(a) / (1 + Σ_b N(b))`, lowest index on ties.
pub fn nonroot_select(improved_probs: &[f64], visits: &[u32]) -> usize {
    let total: u32 = visits.iter().sum();
    let scores: Vec<f64> =
        improved_probs.iter().zip(visits).map(|(&p, &n)| p - n as f64 / (1.0 + total as f64)).collect();
    crate::mdp::argmax(&scores).unwrap_or(0)
}

/// Running bounds over values observed in one search tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl Default for MinMax {
    fn default() -> Self {
        Self { min: f64::INFINITY, max: f64::NEG_INFINITY }
    }
}

impl MinMax {
    pub fn update(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    /// Maps into [0, 1]; all zeros when the bounds are (nearly) degenerate.
    pub fn normalize(&self, q: f64) -> f64 {
        let span = self.max - self.min;
        if span.is_nan() || span < 1e-9 {
            return 0.0;
        }
        (q - self.min) / (self.max - self.min)
    }
}
