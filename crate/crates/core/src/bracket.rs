//! Finite-difference Poisson brackets over flat canonical coordinates.
//!
//! A phase-space point is a flat slice `z`; a list of `(q, p)` index pairs
//! names the canonical pairs. Both the discrete bracket and the hybrid
//! bracket are built on this kernel.

use alloc::vec::Vec;

use crate::math;

/// Central-difference settings. The step for coordinate `z_k` is
/// `h * max(1, |z_k|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiff {
    pub h: f64,
}

impl Default for FiniteDiff {
    fn default() -> Self {
        Self { h: 1e-4 }
    }
}

impl FiniteDiff {
    pub const fn new(h: f64) -> Self {
        Self { h }
    }

    pub fn step(&self, z: f64) -> f64 {
        self.h * f64::max(1.0, math::abs(z))
    }

    /// `∂f/∂z_k` at `z` by central differences. The divisor is the actually
    /// representable spacing, so linear observables differentiate exactly.
    pub fn partial<F>(&self, f: &F, z: &[f64], k: usize) -> f64
    where
        F: Fn(&[f64]) -> f64 + ?Sized,
    {
        let mut w: Vec<f64> = z.to_vec();
        let step = self.step(z[k]);
        let plus = z[k] + step;
        let minus = z[k] - step;
        w[k] = plus;
        let fp = f(&w);
        w[k] = minus;
        let fm = f(&w);
        (fp - fm) / (plus - minus)
    }

    pub fn gradient<F>(&self, f: &F, z: &[f64]) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + ?Sized,
    {
        (0..z.len()).map(|k| self.partial(f, z, k)).collect()
    }
}

/// `{f, g} = Σ (∂f/∂q ∂g/∂p − ∂f/∂p ∂g/∂q)` over the given canonical pairs.
///
/// Gradients of `f` and `g` are taken separately and combined term by term
/// in a fixed order, so `{g, f}` is the exact floating-point negation of
/// `{f, g}`.
pub fn poisson_bracket<F, G>(f: &F, g: &G, z: &[f64], pairs: &[(usize, usize)], fd: FiniteDiff) -> f64
where
    F: Fn(&[f64]) -> f64 + ?Sized,
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut acc = 0.0;
    for &(qi, pi) in pairs {
        let fq = fd.partial(f, z, qi);
        let fp = fd.partial(f, z, pi);
        let gq = fd.partial(g, z, qi);
        let gp = fd.partial(g, z, pi);
        acc += fq * gp - fp * gq;
    }
    acc
}

/// First-order canonical map generated by `g`:
/// `q → q + ∂g/∂p δα`, `p → p − ∂g/∂q δα`.
pub fn canonical_shift<G>(g: &G, z: &[f64], pairs: &[(usize, usize)], dalpha: f64, fd: FiniteDiff) -> Vec<f64>
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut out = z.to_vec();
    for &(qi, pi) in pairs {
        let gq = fd.partial(g, z, qi);
        let gp = fd.partial(g, z, pi);
        out[qi] += gp * dalpha;
        out[pi] -= gq * dalpha;
    }
    out
}

/// `{f, {g, h}} + {g, {h, f}} + {h, {f, g}}` with nested finite differences.
pub fn jacobi_residual<F, G, H>(f: &F, g: &G, h: &H, z: &[f64], pairs: &[(usize, usize)], fd: FiniteDiff) -> f64
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
    H: Fn(&[f64]) -> f64,
{
    let gh = |w: &[f64]| poisson_bracket(g, h, w, pairs, fd);
    let hf = |w: &[f64]| poisson_bracket(h, f, w, pairs, fd);
    let fg = |w: &[f64]| poisson_bracket(f, g, w, pairs, fd);
    poisson_bracket(f, &gh, z, pairs, fd)
        + poisson_bracket(g, &hf, z, pairs, fd)
        + poisson_bracket(h, &fg, z, pairs, fd)
}
