use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("non-finite gradient (norm {0})")]
    NonFiniteGradient(f64),
    #[error("non-finite forward value in {0}")]
    NonFinite(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("all actions masked")]
    AllMasked,
    #[error("value head arity mismatch: {0}")]
    Arity(&'static str),
    #[error("state cannot be encoded: {0}")]
    Encode(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type ParamId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// All learnable tensors of a network plus a version counter that the
/// optimizer bumps on every step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub tensors: Vec<Tensor>,
    pub version: u64,
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in ±1/√fan_in.
    FanIn(usize),
}

impl ParamStore {
    pub fn add(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut impl Rng,
    ) -> ParamId {
        let data = match init {
            Init::Zeros => vec![0.0; rows * cols],
            Init::Ones => vec![1.0; rows * cols],
            Init::FanIn(fan) => {
                let a = 1.0 / (fan.max(1) as f64).sqrt();
                (0..rows * cols).map(|_| rng.random_range(-a..a)).collect()
            }
        };
        self.tensors.push(Tensor { name: name.into(), rows, cols, data });
        self.tensors.len() - 1
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.tensors[id].data
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn zeros_like(&self) -> Grads {
        Grads { data: self.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect() }
    }

    /// Flat view of every scalar, in tensor order.
    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, i: usize, value: f64) {
        let mut i = i;
        for t in &mut self.tensors {
            if i < t.data.len() {
                t.data[i] = value;
                return;
            }
            i -= t.data.len();
        }
        panic!("flat index out of range");
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub data: Vec<Vec<f64>>,
}

impl Grads {
    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().flatten().for_each(|x| *x *= c);
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.data.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global L2 gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, clip_norm: Some(1.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let z = params.zeros_like().data;
        Self { config, m: z.clone(), v: z, step: 0 }
    }

    /// Clips, applies one Adam update and bumps the parameter version.
    /// Returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Grads) -> Result<f64, NnError> {
        if grads.data.len() != params.tensors.len()
            || grads.data.iter().zip(&params.tensors).any(|(g, t)| g.len() != t.data.len())
        {
            return Err(NnError::Shape("gradients do not match parameters".into()));
        }
        let norm = grads.norm();
        if !norm.is_finite() {
            return Err(NnError::NonFiniteGradient(norm));
        }
        let c = self.config;
        let clip = match c.clip_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (((t, g), m), v) in params.tensors.iter_mut().zip(&grads.data).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..g.len() {
                let gi = g[i] * clip;
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let mh = m[i] / bc1;
                let vh = v[i] / bc2;
                t.data[i] -= c.lr * mh / (vh.sqrt() + c.eps);
            }
        }
        params.version += 1;
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store() -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = ParamStore::default();
        p.add("a", 2, 3, Init::FanIn(3), &mut rng);
        p.add("b", 1, 3, Init::Zeros, &mut rng);
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters_and_bumps_version() {
        let mut p = store();
        let before = p.flat();
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let g = p.zeros_like();
        adam.step(&mut p, &g).unwrap();
        assert_eq!(p.flat(), before);
        assert_eq!(p.version, 1);
    }

    #[test]
    fn clipping_matches_prescaled_gradient() {
        let p0 = store();
        let mut g = p0.zeros_like();
        g.data[0][0] = 3.0;
        g.data[1][2] = 4.0;
        assert!((g.norm() - 5.0).abs() < 1e-12);
        let mut pre = g.clone();
        pre.scale(0.2);

        let (mut p1, mut p2) = (p0.clone(), p0.clone());
        let mut a1 = Adam::new(AdamConfig::default(), &p0);
        let mut a2 = Adam::new(AdamConfig::default(), &p0);
        a1.step(&mut p1, &g).unwrap();
        a2.step(&mut p2, &pre).unwrap();
        assert_eq!(p1.flat(), p2.flat());
        assert_eq!(a1.m, a2.m);
    }

    #[test]
    fn quadratic_loss_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = ParamStore::default();
        p.add("x", 1, 1, Init::Ones, &mut rng);
        let loss = |p: &ParamStore| (p.get(0)[0] - 3.0).powi(2);
        let before = loss(&p);
        let mut g = p.zeros_like();
        g.data[0][0] = 2.0 * (p.get(0)[0] - 3.0);
        Adam::new(AdamConfig { lr: 0.1, ..Default::default() }, &p).step(&mut p, &g).unwrap();
        assert!(loss(&p) < before);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = store();
        let mut g = p.zeros_like();
        g.data[0][1] = f64::NAN;
        let mut adam = Adam::new(AdamConfig::default(), &p);
        assert!(matches!(adam.step(&mut p, &g), Err(NnError::NonFiniteGradient(_))));
        assert_eq!(p.version, 0);
    }
}
