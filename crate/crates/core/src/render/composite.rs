//! Volume compositing along one ray and its exact reverse pass.
//!
//! `Tᵢ = exp(−Σ_{j<i} σⱼδⱼ)`, `wᵢ = Tᵢ(1 − exp(−σᵢδᵢ))` and
//! `Ĉ = Σ wᵢcᵢ + T_{N+1}·background`.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput<T> {
    pub color: [T; 3],
    pub weights: Vec<T>,
    /// Light surviving past the last sample, `T_{N+1}`.
    pub transmittance: T,
}

/// Inputs and intermediates kept for [`composite_backward`].
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeCache<T> {
    pub(crate) colors: Vec<[T; 3]>,
    pub(crate) deltas: Vec<T>,
    pub(crate) weights: Vec<T>,
    /// `T₁ … T_{N+1}`.
    pub(crate) transmittance: Vec<T>,
    pub(crate) background: [T; 3],
}

/// Fills `weights` (length N) and `trans` (length N+1) and returns `Ĉ`.
#[inline]
pub(crate) fn composite_in_place<T: Real>(
    colors: &[[T; 3]],
    densities: &[T],
    deltas: &[T],
    background: [T; 3],
    weights: &mut Vec<T>,
    trans: &mut Vec<T>,
) -> [T; 3] {
    weights.clear();
    trans.clear();
    let mut optical_depth = T::zero();
    let mut color = [T::zero(); 3];
    trans.push(T::one());
    for i in 0..densities.len() {
        let tau = densities[i] * deltas[i];
        let t_i = (-optical_depth).exp();
        let w = t_i * (T::one() - (-tau).exp());
        optical_depth += tau;
        weights.push(w);
        trans.push((-optical_depth).exp());
        for k in 0..3 {
            color[k] += w * colors[i][k];
        }
    }
    let tail = *trans.last().unwrap();
    for k in 0..3 {
        color[k] += tail * background[k];
    }
    color
}

/// Writes `∂L/∂cᵢ` and `∂L/∂σᵢ` given `∂L/∂Ĉ`.
#[inline]
pub(crate) fn composite_backward_in_place<T: Real>(
    colors: &[[T; 3]],
    deltas: &[T],
    weights: &[T],
    trans: &[T],
    background: [T; 3],
    d_out: [T; 3],
    d_colors: &mut Vec<[T; 3]>,
    d_densities: &mut Vec<T>,
) {
    let n = weights.len();
    d_colors.clear();
    d_densities.clear();
    d_colors.extend(weights.iter().map(|&w| [w * d_out[0], w * d_out[1], w * d_out[2]]));
    d_densities.resize(n, T::zero());
    let dot = |c: [T; 3]| c[0] * d_out[0] + c[1] * d_out[1] + c[2] * d_out[2];
    // Running g·(Σ_{i>k} wᵢcᵢ + T_{N+1}·background).
    let mut behind = trans[n] * dot(background);
    for k in (0..n).rev() {
        let gc = dot(colors[k]);
        d_densities[k] = deltas[k] * (trans[k + 1] * gc - behind);
        behind += weights[k] * gc;
    }
}

pub fn composite_ray<T: Real>(
    colors: &[[T; 3]],
    densities: &[T],
    deltas: &[T],
    background: [T; 3],
) -> Result<(RenderOutput<T>, CompositeCache<T>)> {
    if colors.len() != densities.len() || deltas.len() != densities.len() {
        return Err(Error::InvalidShape(format!(
            "{} colors, {} densities, {} deltas",
            colors.len(),
            densities.len(),
            deltas.len()
        )));
    }
    if let Some(&bad) = densities.iter().find(|&&s| !(s >= T::zero())) {
        return Err(Error::InvalidDensity(bad.as_f64()));
    }
    let mut weights = Vec::with_capacity(densities.len());
    let mut trans = Vec::with_capacity(densities.len() + 1);
    let color = composite_in_place(colors, densities, deltas, background, &mut weights, &mut trans);
    let output = RenderOutput {
        color,
        weights: weights.clone(),
        transmittance: trans[densities.len()],
    };
    let cache = CompositeCache {
        colors: colors.to_vec(),
        deltas: deltas.to_vec(),
        weights,
        transmittance: trans,
        background,
    };
    Ok((output, cache))
}

/// `(∂L/∂colors, ∂L/∂densities)` from `∂L/∂Ĉ`.
pub fn composite_backward<T: Real>(
    cache: &CompositeCache<T>,
    d_color: [T; 3],
) -> Result<(Vec<[T; 3]>, Vec<T>)> {
    let n = cache.weights.len();
    if cache.colors.len() != n || cache.deltas.len() != n || cache.transmittance.len() != n + 1 {
        return Err(Error::InvalidCache(
            "composite cache arrays have inconsistent lengths".into(),
        ));
    }
    let mut d_colors = Vec::with_capacity(n);
    let mut d_densities = Vec::with_capacity(n);
    composite_backward_in_place(
        &cache.colors,
        &cache.deltas,
        &cache.weights,
        &cache.transmittance,
        cache.background,
        d_color,
        &mut d_colors,
        &mut d_densities,
    );
    Ok((d_colors, d_densities))
}
