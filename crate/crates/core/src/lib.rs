//! Gumbel AlphaZero planning with self-competitive "play-to-plan" training
//! for deterministic single-player combinatorial problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: environment abstraction, rollouts and exact value tables.
//! - [`env`]: Euclidean TSP and job-shop scheduling environments.
//! - [`nn`]: transformer encoders, policy/value heads, reverse-mode gradients, Adam.
//! - [`mcts`]: single-player Gumbel search (root Gumbel-Top-k, sequential halving,
//!   completed Q-values).
//! - [`ptp`]: the two-player self-competition game and its modified search.
//! - [`variants`]: single-player comparison algorithms.
//! - [`train`]: replay, arena, optimizer cadence and metrics.
//! - [`oracle`]: exact and heuristic reference solvers.

pub mod env;
pub mod mcts;
pub mod mdp;
pub mod nn;
pub mod oracle;
pub mod par;
pub mod ptp;
pub mod train;
pub mod variants;

/// Seed derivation shared by every component that splits one seed into streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finaliser over the combined words
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
