//! Function approximators: transformer encoders for TSP and JSSP states, a
//! pointing policy head, value heads, reverse-mode gradients and Adam.

pub mod checkpoint;
pub mod network;
pub mod params;
pub mod tape;

pub use checkpoint::{config_digest, Checkpoint, CheckpointError};
pub use network::{
    loss, loss_and_grad, mask_logits, Encode, Encoded, EncoderKind, Evaluation, HeadKind, LossStats, NetConfig,
    Network, PolicySample, ValueInput, ValueSample, POINTER_CLIP,
};
pub use params::{Adam, AdamConfig, Grads, NnError, ParamStore};
pub use tape::Tape;

/// Softmax over finite logits; `-inf` entries get probability zero.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return vec![0.0; logits.len()];
    }
    let e: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}
