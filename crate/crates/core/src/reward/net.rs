use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Output is `OUTPUT_SCALE * tanh(u)`, keeping rewards strictly inside (-1, 1)
/// even where `tanh` rounds to ±1.
const OUTPUT_SCALE: f64 = 1.0 - 1e-6;

/// Two tanh hidden layers and a squashed scalar output.
///
/// Parameters live in one flat vector laid out as
/// `[W1 (h×d) | b1 (h) | W2 (h×h) | b2 (h) | w3 (h) | b3 (1)]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardNet<T> {
    input_dim: usize,
    hidden: usize,
    params: Vec<T>,
}

/// Activations kept from a forward pass for backprop.
#[derive(Debug, Clone, Default)]
pub(crate) struct StepCache<T> {
    h1: Vec<T>,
    h2: Vec<T>,
    tanh_out: T,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

impl Layout {
    fn new(d: usize, h: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + d * h;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + h;
        Self {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            len: b3 + 1,
        }
    }
}

/// Factor applied to the fan-in bound of the output layer at initialization.
pub const OUTPUT_INIT_SCALE: f64 = 1e-3;

impl<T: Scalar> RewardNet<T> {
    pub fn param_count(input_dim: usize, hidden: usize) -> usize {
        Layout::new(input_dim, hidden).len
    }

    /// Fan-in scaled uniform weights everywhere, with the output layer shrunk by
    /// `OUTPUT_INIT_SCALE` so fresh rewards are close to 0. An exactly constant
    /// output would leave min-max normalized returns degenerate and stall
    /// training.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let lay = Layout::new(input_dim, hidden);
        let mut params = vec![T::zero(); lay.len];
        let fill = |slice: &mut [T], fan_in: usize, rng: &mut R| {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            for p in slice {
                *p = T::of(rng.gen_range(-bound..bound));
            }
        };
        fill(&mut params[lay.w1..lay.b1], input_dim, rng);
        fill(&mut params[lay.b1..lay.w2], input_dim, rng);
        fill(&mut params[lay.w2..lay.b2], hidden, rng);
        fill(&mut params[lay.b2..lay.w3], hidden, rng);
        fill(&mut params[lay.w3..], hidden, rng);
        params[lay.w3..]
            .iter_mut()
            .for_each(|p| *p *= T::of(OUTPUT_INIT_SCALE));
        Self {
            input_dim,
            hidden,
            params,
        }
    }

    pub fn from_params(input_dim: usize, hidden: usize, params: Vec<T>) -> Result<Self> {
        let expected = Self::param_count(input_dim, hidden);
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                what: "parameter vector",
                left: params.len(),
                right: expected,
            });
        }
        Ok(Self {
            input_dim,
            hidden,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    /// Zeroes the final linear layer so every input maps to exactly 0.
    pub fn zero_output_layer(&mut self) {
        let lay = Layout::new(self.input_dim, self.hidden);
        self.params[lay.w3..]
            .iter_mut()
            .for_each(|p| *p = T::zero());
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Single-step reward for one state-action feature vector.
    pub fn reward(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        let mut cache = StepCache::default();
        Ok(self.forward(x, &mut cache))
    }

    /// Predicted return of a segment: the sum of its per-step rewards.
    pub fn segment_return(&self, steps: &[Vec<T>]) -> Result<T> {
        if steps.is_empty() {
            return Err(Error::Config(
                "segment must contain at least one step".into(),
            ));
        }
        let mut cache = StepCache::default();
        let mut total = T::zero();
        for x in steps {
            self.check_dim(x)?;
            total += self.forward(x, &mut cache);
        }
        Ok(total)
    }

    pub(crate) fn forward(&self, x: &[T], cache: &mut StepCache<T>) -> T {
        let (d, h) = (self.input_dim, self.hidden);
        let lay = Layout::new(d, h);
        let p = &self.params;
        cache.h1.clear();
        cache.h2.clear();
        for j in 0..h {
            let row = &p[lay.w1 + j * d..lay.w1 + (j + 1) * d];
            let mut acc = p[lay.b1 + j];
            for (w, &xi) in row.iter().zip(x) {
                // Feature vectors are mostly one-hot.
                if xi != T::zero() {
                    acc += *w * xi;
                }
            }
            cache.h1.push(acc.tanh());
        }
        for j in 0..h {
            let row = &p[lay.w2 + j * h..lay.w2 + (j + 1) * h];
            let mut acc = p[lay.b2 + j];
            for (w, &a) in row.iter().zip(&cache.h1) {
                acc += *w * a;
            }
            cache.h2.push(acc.tanh());
        }
        let mut u = p[lay.b3];
        for (w, &a) in p[lay.w3..lay.b3].iter().zip(&cache.h2) {
            u += *w * a;
        }
        if u.is_nan() {
            u = T::zero();
        }
        cache.tanh_out = u.tanh();
        T::of(OUTPUT_SCALE) * cache.tanh_out
    }

    /// Accumulates `grad_out * d output / d params` into `grads`.
    pub(crate) fn backward(&self, x: &[T], cache: &StepCache<T>, grad_out: T, grads: &mut [T]) {
        let (d, h) = (self.input_dim, self.hidden);
        let lay = Layout::new(d, h);
        let p = &self.params;
        let one = T::one();
        let du = grad_out * T::of(OUTPUT_SCALE) * (one - cache.tanh_out * cache.tanh_out);
        grads[lay.b3] += du;
        let mut dz2 = vec![T::zero(); h];
        for j in 0..h {
            grads[lay.w3 + j] += du * cache.h2[j];
            let a = cache.h2[j];
            dz2[j] = du * p[lay.w3 + j] * (one - a * a);
        }
        let mut dh1 = vec![T::zero(); h];
        for j in 0..h {
            let g = dz2[j];
            if g == T::zero() {
                continue;
            }
            grads[lay.b2 + j] += g;
            let base = lay.w2 + j * h;
            for k in 0..h {
                grads[base + k] += g * cache.h1[k];
                dh1[k] += g * p[base + k];
            }
        }
        for j in 0..h {
            let a = cache.h1[j];
            let g = dh1[j] * (one - a * a);
            if g == T::zero() {
                continue;
            }
            grads[lay.b1 + j] += g;
            let base = lay.w1 + j * d;
            for (k, &xi) in x.iter().enumerate() {
                if xi != T::zero() {
                    grads[base + k] += g * xi;
                }
            }
        }
    }
}
