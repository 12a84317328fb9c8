//! Exact and heuristic reference solvers, optimality gaps and the exact
//! value-identity check on enumerable toy MDPs.

mod jssp;
mod tsp;

pub use jssp::{jssp_enumerate, jssp_exact, spt_jssp, DEFAULT_NODE_BUDGET, ENUMERATION_CAP};
pub use tsp::{held_karp, nearest_neighbor_tsp, tsp_brute_force, BRUTE_FORCE_CAP, HELD_KARP_CAP};

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::mdp::{exact_paired_values, exact_values, Environment, MdpError, Policy, ToyMdp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{what}: size {size} exceeds cap {cap}")]
    TooLarge { what: &'static str, size: usize, cap: usize },
    #[error("branch and bound exceeded its budget of {0} nodes")]
    BudgetExceeded(u64),
    #[error("reference objective must be positive, got {0}")]
    NonPositiveReference(String),
    #[error("not a decimal number: {0:?}")]
    Decimal(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// `method / reference − 1`.
pub fn gap(method: f64, reference: f64) -> Result<f64, OracleError> {
    if reference.is_nan() || reference <= 0.0 {
        return Err(OracleError::NonPositiveReference(reference.to_string()));
    }
    Ok(method / reference - 1.0)
}

/// Exact `method / reference − 1` over rationals.
pub fn gap_exact(method: Ratio<i64>, reference: Ratio<i64>) -> Result<Ratio<i64>, OracleError> {
    if reference <= Ratio::from_integer(0) {
        return Err(OracleError::NonPositiveReference(reference.to_string()));
    }
    Ok(method / reference - Ratio::from_integer(1))
}

/// Parses a plain decimal such as `1547.4` into an exact rational.
pub fn decimal(s: &str) -> Result<Ratio<i64>, OracleError> {
    let err = || OracleError::Decimal(s.to_string());
    let t = s.trim();
    let (neg, t) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int}{frac}");
    let num: i64 = digits.parse().map_err(|_| err())?;
    let den = 10i64.checked_pow(frac.len() as u32).ok_or_else(err)?;
    let r = Ratio::new(num, den);
    Ok(if neg { -r } else { r })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub instance: String,
    pub method: f64,
    pub reference: f64,
    pub gap: f64,
    /// Whether the reference is a proven optimum (not just a bound).
    pub exact_reference: bool,
    /// Method beat a proven optimum, which indicates a bug.
    pub anomaly: bool,
}

impl GapReport {
    pub fn new(
        instance: impl Into<String>,
        method: f64,
        reference: f64,
        exact_reference: bool,
    ) -> Result<Self, OracleError> {
        let g = gap(method, reference)?;
        Ok(Self {
            instance: instance.into(),
            method,
            reference,
            gap: g,
            exact_reference,
            anomaly: exact_reference && g < -1e-9,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvantageReport {
    /// Largest `|A^π(s, a) − A^{π,μ}(s, s'; a)|`.
    pub advantage_deviation: f64,
    /// Largest deviation between the two sides of the improvement identity.
    pub improvement_deviation: f64,
    pub pass: bool,
}

/// Checks on every reachable state pair of `mdp` that advantages under `π`
/// equal paired advantages against `μ`, and that the expected advantage of
/// any `π̃` is the same in both formulations. Values on each side come from
/// separate exact computations.
pub fn advantage_identities<P, M, T>(
    mdp: &ToyMdp,
    pi: &P,
    mu: &M,
    pi_tilde: &T,
    tol: f64,
) -> Result<AdvantageReport, OracleError>
where
    P: Policy<usize> + ?Sized,
    M: Policy<usize> + ?Sized,
    T: Policy<usize> + ?Sized,
{
    let root = mdp.root();
    let single = exact_values(mdp, pi, &root)?;
    let paired = exact_paired_values(mdp, pi, mu, &root)?;
    let states = mdp.reachable();
    let (mut adv_dev, mut imp_dev) = (0.0f64, 0.0f64);
    for &s in &states {
        if mdp.is_terminal(&s) {
            continue;
        }
        let actions = mdp.feasible_actions(&s);
        let weights = pi_tilde.distribution(&s, &actions);
        let v = single.value(&s);
        let lhs: f64 = single.q_values(&s).iter().zip(&weights).map(|((_, q), w)| w * q).sum::<f64>() - v;
        for &s2 in &states {
            for &(a, q) in single.q_values(&s) {
                let pa = paired.advantage(&s, &s2, a).ok_or(MdpError::InvalidAction { action: a })?;
                adv_dev = adv_dev.max(((q - v) - pa).abs());
            }
            let rhs: f64 = paired.q_values(&s, &s2).iter().zip(&weights).map(|((_, q), w)| w * q).sum::<f64>()
                - paired.value(&s, &s2);
            imp_dev = imp_dev.max((lhs - rhs).abs());
        }
    }
    Ok(AdvantageReport {
        advantage_deviation: adv_dev,
        improvement_deviation: imp_dev,
        pass: adv_dev <= tol && imp_dev <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::TabularPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gap_examples() {
        assert_eq!(gap(3.84, 3.84).unwrap(), 0.0);
        assert!(gap(1.0, 0.0).is_err());
        let r = GapReport::new("x", 0.9, 1.0, true).unwrap();
        assert!(r.anomaly);
        assert!(!GapReport::new("x", 0.9, 1.0, false).unwrap().anomaly);
    }

    #[test]
    fn exact_gap_and_decimals() {
        assert_eq!(decimal("1547.4").unwrap(), Ratio::new(15474, 10));
        assert_eq!(decimal("-0.25").unwrap(), Ratio::new(-1, 4));
        assert!(decimal("1.2.3").is_err());
        assert!(decimal("").is_err());
        let g = gap_exact(decimal("1547.4").unwrap(), decimal("1228.9").unwrap()).unwrap();
        assert_eq!(g, Ratio::new(3185, 12289));
        assert_eq!(gap_exact(Ratio::from_integer(1231), Ratio::from_integer(1231)).unwrap(), Ratio::from_integer(0));
    }

    #[test]
    fn advantage_identities_hold_and_self_play_value_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mdp = ToyMdp::random(3, 3, 3, &mut rng);
        let pi = TabularPolicy::random(&mdp.arity(), &mut rng);
        let mu = TabularPolicy::random(&mdp.arity(), &mut rng);
        let pt = TabularPolicy::random(&mdp.arity(), &mut rng);
        let r = advantage_identities(&mdp, &pi, &mu, &pt, 1e-12).unwrap();
        assert!(r.pass, "{r:?}");
        let same = crate::mdp::exact_paired_values(&mdp, &pi, &pi, &mdp.root()).unwrap();
        for s in mdp.reachable() {
            assert!(same.value(&s, &s).abs() < 1e-12);
        }
    }
}
