//! Fused three-layer MLP: `[feature ⊕ SH(direction)] → 64 → 64 → 4` with
//! ReLU hidden activations, `σ = exp(raw₀)` and `rgb = sigmoid(raw₁..₃)`.
//!
//! Weights are stored input-major (each input's fan-out is contiguous) so
//! the forward pass and the weight-gradient updates are contiguous axpys.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::sh::SH_COEFFS;

pub const HIDDEN: usize = 64;
pub const OUTPUTS: usize = 4;

/// Raw density logits are clamped here before `exp`, which keeps `σ` finite
/// in `f32`. The clamp has zero gradient.
pub const SIGMA_RAW_MAX: f64 = 15.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldParams<T> {
    feature_dim: usize,
    data: Vec<T>,
    generation: u64,
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    input: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    total: usize,
}

impl Layout {
    fn new(input: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + input * HIDDEN;
        let w2 = b1 + HIDDEN;
        let b2 = w2 + HIDDEN * HIDDEN;
        let w3 = b2 + HIDDEN;
        let b3 = w3 + HIDDEN * OUTPUTS;
        let total = b3 + OUTPUTS;
        Self {
            input,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            total,
        }
    }
}

impl<T: Real> FieldParams<T> {
    pub fn zeros(feature_dim: usize) -> Self {
        let layout = Layout::new(feature_dim + SH_COEFFS);
        Self {
            feature_dim,
            data: vec![T::zero(); layout.total],
            generation: 0,
        }
    }

    /// He-uniform weights, zero biases.
    pub fn init(feature_dim: usize, seed: u64) -> Self {
        let mut params = Self::zeros(feature_dim);
        let layout = params.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |slice: &mut [T], fan_in: usize| {
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in slice {
                *v = T::lit(rng.gen_range(-bound..bound));
            }
        };
        fill(&mut params.data[layout.w1..layout.b1], layout.input);
        fill(&mut params.data[layout.w2..layout.b2], HIDDEN);
        fill(&mut params.data[layout.w3..layout.b3], HIDDEN);
        params
    }

    /// Rebuilds parameters from a flat vector, e.g. from a checkpoint.
    pub fn from_flat(feature_dim: usize, data: Vec<T>) -> Result<Self> {
        let expected = Layout::new(feature_dim + SH_COEFFS).total;
        if data.len() != expected {
            return Err(Error::InvalidShape(format!(
                "{} parameters, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            feature_dim,
            data,
            generation: 0,
        })
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input_dim())
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim + SH_COEFFS
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Mutable access; invalidates every outstanding forward cache.
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        self.generation += 1;
        &mut self.data
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Forward pass for one sample into a reusable cache.
    pub fn forward_into(&self, feature: &[T], dir_enc: &[T], cache: &mut FieldCache<T>) {
        debug_assert_eq!(feature.len(), self.feature_dim);
        debug_assert_eq!(dir_enc.len(), SH_COEFFS);
        let l = self.layout();
        let d = &self.data;
        cache.generation = self.generation;
        cache.input.clear();
        cache.input.extend_from_slice(feature);
        cache.input.extend_from_slice(dir_enc);

        let h1 = &mut cache.h1;
        h1.copy_from_slice(&d[l.b1..l.b1 + HIDDEN]);
        for (i, &xi) in cache.input.iter().enumerate() {
            let col = &d[l.w1 + i * HIDDEN..l.w1 + (i + 1) * HIDDEN];
            axpy(h1, col, xi);
        }
        relu(h1);

        let h2 = &mut cache.h2;
        h2.copy_from_slice(&d[l.b2..l.b2 + HIDDEN]);
        for (i, &hi) in h1.iter().enumerate() {
            if hi != T::zero() {
                axpy(h2, &d[l.w2 + i * HIDDEN..l.w2 + (i + 1) * HIDDEN], hi);
            }
        }
        relu(h2);

        let mut raw = [T::zero(); OUTPUTS];
        raw.copy_from_slice(&d[l.b3..l.b3 + OUTPUTS]);
        for (i, &hi) in h2.iter().enumerate() {
            if hi != T::zero() {
                let w = &d[l.w3 + i * OUTPUTS..l.w3 + (i + 1) * OUTPUTS];
                for o in 0..OUTPUTS {
                    raw[o] += w[o] * hi;
                }
            }
        }
        cache.raw = raw;
        cache.sigma = raw[0].min(T::lit(SIGMA_RAW_MAX)).exp();
        for k in 0..3 {
            cache.color[k] = sigmoid(raw[k + 1]);
        }
    }

    /// Reverse pass for one sample. Parameter gradients are accumulated into
    /// `grads`; `∂L/∂feature` is written to `d_feature`.
    pub fn backward_into(
        &self,
        cache: &FieldCache<T>,
        d_sigma: T,
        d_color: [T; 3],
        grads: &mut FieldGradients<T>,
        d_feature: &mut [T],
    ) -> Result<()> {
        if cache.generation != self.generation || cache.input.len() != self.input_dim() {
            return Err(Error::InvalidCache(format!(
                "cache from parameter generation {}, current is {}",
                cache.generation, self.generation
            )));
        }
        if grads.data.len() != self.data.len() || d_feature.len() != self.feature_dim {
            return Err(Error::InvalidShape(
                "gradient buffers do not match the parameters".into(),
            ));
        }
        let l = self.layout();
        let d = &self.data;
        let g = &mut grads.data;

        let mut draw = [T::zero(); OUTPUTS];
        if cache.raw[0] < T::lit(SIGMA_RAW_MAX) {
            draw[0] = d_sigma * cache.sigma;
        }
        for k in 0..3 {
            let c = cache.color[k];
            draw[k + 1] = d_color[k] * c * (T::one() - c);
        }

        let mut dh2 = [T::zero(); HIDDEN];
        for i in 0..HIDDEN {
            let hi = cache.h2[i];
            if hi > T::zero() {
                let w = &d[l.w3 + i * OUTPUTS..l.w3 + (i + 1) * OUTPUTS];
                let gw = &mut g[l.w3 + i * OUTPUTS..l.w3 + (i + 1) * OUTPUTS];
                let mut acc = T::zero();
                for o in 0..OUTPUTS {
                    gw[o] += hi * draw[o];
                    acc += w[o] * draw[o];
                }
                dh2[i] = acc;
            }
        }
        for o in 0..OUTPUTS {
            g[l.b3 + o] += draw[o];
        }

        let mut dh1 = [T::zero(); HIDDEN];
        for i in 0..HIDDEN {
            let hi = cache.h1[i];
            if hi > T::zero() {
                axpy(&mut g[l.w2 + i * HIDDEN..l.w2 + (i + 1) * HIDDEN], &dh2, hi);
                dh1[i] = dot(&d[l.w2 + i * HIDDEN..l.w2 + (i + 1) * HIDDEN], &dh2);
            }
        }
        axpy(&mut g[l.b2..l.b2 + HIDDEN], &dh2, T::one());

        for (i, &xi) in cache.input.iter().enumerate() {
            if xi != T::zero() {
                axpy(&mut g[l.w1 + i * HIDDEN..l.w1 + (i + 1) * HIDDEN], &dh1, xi);
            }
        }
        axpy(&mut g[l.b1..l.b1 + HIDDEN], &dh1, T::one());

        for (i, out) in d_feature.iter_mut().enumerate() {
            *out = dot(&d[l.w1 + i * HIDDEN..l.w1 + (i + 1) * HIDDEN], &dh1);
        }
        Ok(())
    }
}

/// Activations retained by the forward pass.
#[derive(Clone, Debug)]
pub struct FieldCache<T> {
    pub(crate) input: Vec<T>,
    pub(crate) h1: [T; HIDDEN],
    pub(crate) h2: [T; HIDDEN],
    pub(crate) raw: [T; OUTPUTS],
    pub sigma: T,
    pub color: [T; 3],
    generation: u64,
}

impl<T: Real> Default for FieldCache<T> {
    fn default() -> Self {
        Self {
            input: Vec::new(),
            h1: [T::zero(); HIDDEN],
            h2: [T::zero(); HIDDEN],
            raw: [T::zero(); OUTPUTS],
            sigma: T::zero(),
            color: [T::zero(); 3],
            generation: u64::MAX,
        }
    }
}

/// Flat gradient buffer laid out like [`FieldParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGradients<T> {
    pub data: Vec<T>,
}

impl<T: Real> FieldGradients<T> {
    pub fn zeros_like(params: &FieldParams<T>) -> Self {
        Self {
            data: vec![T::zero(); params.len()],
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn accumulate(&mut self, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `(σ, rgb, cache)` for one sample.
pub fn field_forward<T: Real>(
    params: &FieldParams<T>,
    feature: &[T],
    dir_enc: &[T],
) -> Result<(T, [T; 3], FieldCache<T>)> {
    if feature.len() != params.feature_dim() || dir_enc.len() != SH_COEFFS {
        return Err(Error::InvalidShape(format!(
            "feature of width {} and direction encoding of width {}, expected {} and {}",
            feature.len(),
            dir_enc.len(),
            params.feature_dim(),
            SH_COEFFS
        )));
    }
    let mut cache = FieldCache::default();
    params.forward_into(feature, dir_enc, &mut cache);
    Ok((cache.sigma, cache.color, cache))
}

/// Fresh parameter gradients and `∂L/∂feature` for one sample.
pub fn field_backward<T: Real>(
    params: &FieldParams<T>,
    cache: &FieldCache<T>,
    d_sigma: T,
    d_color: [T; 3],
) -> Result<(FieldGradients<T>, Vec<T>)> {
    let mut grads = FieldGradients::zeros_like(params);
    let mut d_feature = vec![T::zero(); params.feature_dim()];
    params.backward_into(cache, d_sigma, d_color, &mut grads, &mut d_feature)?;
    Ok((grads, d_feature))
}

#[inline(always)]
fn axpy<T: Real>(y: &mut [T], x: &[T], a: T) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with eight independent partial sums, combined in a fixed
/// order so results do not depend on the caller.
#[inline(always)]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        for k in 0..8 {
            acc[k] += a[c * 8 + k] * b[c * 8 + k];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline(always)]
fn relu<T: Real>(v: &mut [T]) {
    for x in v {
        *x = x.max(T::zero());
    }
}

#[inline(always)]
fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::network::encode_direction;
    use rand::Rng;

    fn random_input(rng: &mut ChaCha8Rng, m: usize) -> (Vec<f64>, Vec<f64>) {
        let feature = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dir = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalized();
        (feature, encode_direction(dir).unwrap().to_vec())
    }

    /// Scalar probe `L = a·σ + b·c` for finite differencing.
    /// Which hidden units are active; a finite difference is only valid
    /// when the step does not flip any of them.
    fn relu_mask(params: &FieldParams<f64>, f: &[f64], e: &[f64]) -> Vec<bool> {
        let (_, _, c) = field_forward(params, f, e).unwrap();
        c.h1.iter().chain(&c.h2).map(|&v| v > 0.0).collect()
    }

    fn probe(params: &FieldParams<f64>, f: &[f64], e: &[f64], a: f64, b: [f64; 3]) -> f64 {
        let (s, c, _) = field_forward(params, f, e).unwrap();
        a * s + b[0] * c[0] + b[1] * c[1] + b[2] * c[2]
    }

    #[test]
    fn zero_params_give_unit_density_and_grey() {
        let params = FieldParams::<f64>::zeros(4);
        let (s, c, _) = field_forward(&params, &[0.0; 4], &[0.0; 16]).unwrap();
        assert_eq!(s, 1.0);
        assert_eq!(c, [0.5; 3]);
    }

    #[test]
    fn outputs_in_range_and_deterministic() {
        let a = FieldParams::<f32>::init(4, 3);
        let b = FieldParams::<f32>::init(4, 3);
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let f: Vec<f32> = (0..4).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let e = [0.1f32; 16];
            let (s1, c1, _) = field_forward(&a, &f, &e).unwrap();
            let (s2, c2, _) = field_forward(&a, &f, &e).unwrap();
            assert_eq!(s1.to_bits(), s2.to_bits());
            assert_eq!(c1, c2);
            assert!(s1 > 0.0 && s1.is_finite());
            assert!(c1.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn shape_errors() {
        let p = FieldParams::<f64>::zeros(4);
        assert!(matches!(
            field_forward(&p, &[0.0; 3], &[0.0; 16]),
            Err(Error::InvalidShape(_))
        ));
        assert!(FieldParams::<f64>::from_flat(4, vec![0.0; 3]).is_err());
    }

    #[test]
    fn stale_cache_rejected() {
        let mut p = FieldParams::<f64>::init(4, 1);
        let (_, _, cache) = field_forward(&p, &[0.1; 4], &[0.2; 16]).unwrap();
        p.as_mut_slice()[0] += 1e-3;
        assert!(matches!(
            field_backward(&p, &cache, 1.0, [0.0; 3]),
            Err(Error::InvalidCache(_))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = FieldParams::<f64>::init(4, 2);
        let (_, _, cache) = field_forward(&p, &[0.3; 4], &[0.2; 16]).unwrap();
        let (g, df) = field_backward(&p, &cache, 0.0, [0.0; 3]).unwrap();
        assert!(g.data.iter().all(|&v| v == 0.0));
        assert!(df.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let p = FieldParams::<f64>::init(4, 5);
        let (_, _, cache) = field_forward(&p, &[0.3, -0.2, 0.5, 0.1], &[0.2; 16]).unwrap();
        let (g1, d1) = field_backward(&p, &cache, 0.7, [0.1, -0.4, 0.9]).unwrap();
        let a = -2.5;
        let (g2, d2) = field_backward(&p, &cache, 0.7 * a, [0.1 * a, -0.4 * a, 0.9 * a]).unwrap();
        for (x, y) in g1.data.iter().zip(&g2.data) {
            assert!((x * a - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        for (x, y) in d1.iter().zip(&d2) {
            assert!((x * a - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-4;
        let mut worst = 0.0f64;
        let mut skipped = 0;
        for config in 0..50 {
            let mut params = FieldParams::<f64>::init(4, config);
            // Non-zero biases exercise every path.
            for v in params.as_mut_slice().iter_mut() {
                if *v == 0.0 {
                    *v = rng.gen_range(-0.1..0.1);
                }
            }
            let (f, e) = random_input(&mut rng, 4);
            let a = rng.gen_range(-1.0..1.0);
            let b = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let (_, _, cache) = field_forward(&params, &f, &e).unwrap();
            let (g, df) = field_backward(&params, &cache, a, b).unwrap();

            let check = |analytic: f64, fd: f64| {
                let scale = analytic.abs().max(fd.abs()).max(1e-3);
                (analytic - fd).abs() / scale
            };
            for k in 0..f.len() {
                let mut fp = f.clone();
                fp[k] += h;
                let mut fm = f.clone();
                fm[k] -= h;
                let fd = (probe(&params, &fp, &e, a, b) - probe(&params, &fm, &e, a, b)) / (2.0 * h);
                let base = relu_mask(&params, &f, &e);
                if relu_mask(&params, &fp, &e) != base || relu_mask(&params, &fm, &e) != base {
                    continue;
                }
                worst = worst.max(check(df[k], fd));
            }
            // A strided subset of parameters keeps the test fast.
            for idx in (config as usize..params.len()).step_by(37) {
                let mut pp = params.clone();
                pp.as_mut_slice()[idx] += h;
                let mut pm = params.clone();
                pm.as_mut_slice()[idx] -= h;
                let fd = (probe(&pp, &f, &e, a, b) - probe(&pm, &f, &e, a, b)) / (2.0 * h);
                let base = relu_mask(&params, &f, &e);
                if relu_mask(&pp, &f, &e) != base || relu_mask(&pm, &f, &e) != base {
                    skipped += 1;
                    continue;
                }
                worst = worst.max(check(g.data[idx], fd));
            }
        }
        assert!(worst <= 1e-4, "max relative error {worst}");
        assert!(skipped < 10, "{skipped} probes straddled a ReLU kink");
    }
}
