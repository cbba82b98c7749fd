//! State types, potentials and the per-step pieces of the discrete Hamiltonian.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;

/// One event of the discrete object: positions `(x, tau)` and their conjugate
/// momenta `(p, pcal)` at step index `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteState {
    pub n: u64,
    pub x: f64,
    /// Internal time.
    pub tau: f64,
    pub p: f64,
    /// Momentum conjugate to the internal time.
    pub pcal: f64,
}

impl DiscreteState {
    pub const fn new(n: u64, x: f64, tau: f64, p: f64, pcal: f64) -> Self {
        Self { n, x, tau, p, pcal }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.tau.is_finite() && self.p.is_finite() && self.pcal.is_finite()
    }

    /// Phase-space coordinates in the order `(x, tau, p, pcal)`.
    pub fn coords(&self) -> [f64; 4] {
        [self.x, self.tau, self.p, self.pcal]
    }

    pub fn from_coords(n: u64, c: [f64; 4]) -> Self {
        Self::new(n, c[0], c[1], c[2], c[3])
    }

    /// Largest componentwise difference in `(x, tau, p, pcal)`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = self.coords();
        let b = other.coords();
        (0..4).map(|i| math::abs(a[i] - b[i])).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PotentialKind {
    Zero,
    Constant,
    Linear,
    Harmonic,
}

/// A closed-form potential `V(q)`:
///
/// | kind       | value            | gradient  |
/// |------------|------------------|-----------|
/// | `Zero`     | `0`              | `0`       |
/// | `Constant` | `c0`             | `0`       |
/// | `Linear`   | `c0 + c1 q`      | `c1`      |
/// | `Harmonic` | `c0 + c2 q^2`    | `2 c2 q`  |
///
/// Note the harmonic form carries no factor ½: `c2` plays the role of `ω²`
/// in `𝒱(τ) = ω²τ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl PotentialSpec {
    pub const fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
            c0: 0.0,
            c1: 0.0,
            c2: 0.0,
        }
    }

    pub const fn constant(c0: f64) -> Self {
        Self {
            kind: PotentialKind::Constant,
            c0,
            c1: 0.0,
            c2: 0.0,
        }
    }

    pub const fn linear(c1: f64) -> Self {
        Self {
            kind: PotentialKind::Linear,
            c0: 0.0,
            c1,
            c2: 0.0,
        }
    }

    /// `V(q) = c2 q²`; rejects `c2 <= 0`.
    pub fn harmonic(c2: f64) -> Result<Self> {
        let spec = Self {
            kind: PotentialKind::Harmonic,
            c0: 0.0,
            c1: 0.0,
            c2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_offset(mut self, c0: f64) -> Self {
        self.c0 = c0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0.is_finite() && self.c1.is_finite() && self.c2.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "potential",
                reason: "coefficients must be finite",
            });
        }
        if self.kind == PotentialKind::Harmonic && self.c2 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "c2",
                reason: "harmonic potential requires c2 > 0",
            });
        }
        Ok(())
    }

    pub fn eval(&self, q: f64) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant => self.c0,
            PotentialKind::Linear => self.c0 + self.c1 * q,
            PotentialKind::Harmonic => self.c0 + self.c2 * q * q,
        }
    }

    pub fn gradient(&self, q: f64) -> f64 {
        match self.kind {
            PotentialKind::Zero | PotentialKind::Constant => 0.0,
            PotentialKind::Linear => self.c1,
            PotentialKind::Harmonic => 2.0 * self.c2 * q,
        }
    }
}

/// `E_n = ½(p_n² + p_{n-1}²) + V(x_n) + V(x_{n-1})`.
pub fn energy_e_n(p_n: f64, p_prev: f64, x_n: f64, x_prev: f64, v: &PotentialSpec) -> f64 {
    0.5 * (p_n * p_n + p_prev * p_prev) + v.eval(x_n) + v.eval(x_prev)
}

/// `K_n = l (𝒫_n² + 𝒱(τ_n))`. Depends on `(tau, pcal)` only, which is what
/// keeps every step of the recurrence explicit.
pub fn kappa_k_n(pcal: f64, tau: f64, l: f64, vtau: &PotentialSpec) -> f64 {
    l * (pcal * pcal + vtau.eval(tau))
}

/// `H_n = Δτ_n E_n + K_n` for the step from `prev` to `curr`.
pub fn hamiltonian_h_n(
    curr: &DiscreteState,
    prev: &DiscreteState,
    v: &PotentialSpec,
    vtau: &PotentialSpec,
    l: f64,
) -> Result<f64> {
    if curr.n != prev.n + 1 {
        return Err(Error::NonConsecutive {
            expected: prev.n + 1,
            found: curr.n,
        });
    }
    let dtau = curr.tau - prev.tau;
    Ok(dtau * energy_e_n(curr.p, prev.p, curr.x, prev.x, v) + kappa_k_n(curr.pcal, curr.tau, l, vtau))
}

/// Classical pair `(x, p)` plus q-bit oscillator coordinates
/// `ψ_i = X_i + i P_i` at external time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridState {
    pub t: f64,
    pub x: f64,
    pub p: f64,
    /// `(X_1, X_2)`
    pub qx: [f64; 2],
    /// `(P_1, P_2)`
    pub qp: [f64; 2],
}

impl HybridState {
    pub const fn new(t: f64, x: f64, p: f64, qx: [f64; 2], qp: [f64; 2]) -> Self {
        Self { t, x, p, qx, qp }
    }

    /// Phase-space coordinates `(x, p, X1, X2, P1, P2)`; `t` is not included.
    pub fn coords(&self) -> [f64; 6] {
        [self.x, self.p, self.qx[0], self.qx[1], self.qp[0], self.qp[1]]
    }

    pub fn from_coords(t: f64, c: &[f64]) -> Self {
        Self::new(t, c[0], c[1], [c[2], c[3]], [c[4], c[5]])
    }

    pub fn psi(&self) -> [Complex64; 2] {
        [
            Complex64::new(self.qx[0], self.qp[0]),
            Complex64::new(self.qx[1], self.qp[1]),
        ]
    }

    pub fn with_psi(mut self, psi: [Complex64; 2]) -> Self {
        self.qx = [psi[0].re, psi[1].re];
        self.qp = [psi[0].im, psi[1].im];
        self
    }

    /// `C = ½(X1² + X2² + P1² + P2²)`; equals 1 on physical states.
    pub fn constraint(&self) -> f64 {
        0.5 * (self.qx[0] * self.qx[0] + self.qx[1] * self.qx[1] + self.qp[0] * self.qp[0] + self.qp[1] * self.qp[1])
    }

    /// Rescale the q-bit coordinates onto the `C = 1` sphere. A zero q-bit
    /// vector cannot be projected.
    pub fn normalized(mut self) -> Result<Self> {
        let c = self.constraint();
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter {
                name: "qubit",
                reason: "cannot normalize a zero q-bit vector",
            });
        }
        let s = 1.0 / math::sqrt(c);
        for i in 0..2 {
            self.qx[i] *= s;
            self.qp[i] *= s;
        }
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|v| v.is_finite()) && self.t.is_finite()
    }
}

/// A 2×2 Hermitian matrix of q-bit observable elements `O_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableMatrix {
    entries: [[Complex64; 2]; 2],
}

const HERMITIAN_TOL: f64 = 1e-14;

impl ObservableMatrix {
    pub fn new(entries: [[Complex64; 2]; 2]) -> Result<Self> {
        for i in 0..2 {
            for j in 0..2 {
                let d = entries[i][j] - entries[j][i].conj();
                if !(math::abs(d.re) <= HERMITIAN_TOL && math::abs(d.im) <= HERMITIAN_TOL) {
                    return Err(Error::NonHermitian);
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[[Complex64; 2]; 2] {
        &self.entries
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self {
            entries: [[one, zero], [zero, one]],
        }
    }

    /// Pauli `σ₂ = [[0, -i], [i, 0]]`.
    pub fn sigma2() -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            entries: [[zero, Complex64::new(0.0, -1.0)], [Complex64::new(0.0, 1.0), zero]],
        }
    }

    /// Pauli `σ₃ = diag(1, -1)`.
    pub fn sigma3() -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            entries: [[Complex64::new(1.0, 0.0), zero], [zero, Complex64::new(-1.0, 0.0)]],
        }
    }

    /// `σ₂/2`, the default hybrid coupling observable.
    pub fn sigma2_half() -> Self {
        Self::sigma2().scaled(0.5)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut entries = self.entries;
        for row in entries.iter_mut() {
            for e in row.iter_mut() {
                *e *= s;
            }
        }
        Self { entries }
    }

    pub fn is_hermitian(&self) -> bool {
        Self::new(self.entries).is_ok()
    }

    /// `(Oψ)_i`.
    pub fn apply(&self, psi: &[Complex64; 2]) -> [Complex64; 2] {
        let o = &self.entries;
        [o[0][0] * psi[0] + o[0][1] * psi[1], o[1][0] * psi[0] + o[1][1] * psi[1]]
    }
}

/// Physical constants and integration controls shared by the scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Fundamental step of the discrete theory.
    pub l: f64,
    /// Frequency of the time machine's direction changes.
    pub omega: f64,
    /// Proper frequency of the classical oscillator.
    pub big_omega: f64,
    /// Q-bit energy scale.
    pub e0: f64,
    /// Hybrid coupling.
    pub lambda: f64,
    pub zeta: f64,
    /// Internal-time amplitude.
    pub taubar: f64,
    pub phi: f64,
    /// Amplitude of the homogeneous classical solution.
    pub x1: f64,
    /// Step of the continuum integrators.
    pub dt: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            l: 1e-2,
            omega: 1.0,
            big_omega: 5.0,
            e0: 1.0,
            lambda: 0.1,
            zeta: 1.0,
            taubar: 1.0,
            phi: 0.0,
            x1: 1.0,
            dt: 1e-4,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64); 10] = [
            ("l", self.l),
            ("omega", self.omega),
            ("Omega", self.big_omega),
            ("E0", self.e0),
            ("lambda", self.lambda),
            ("zeta", self.zeta),
            ("taubar", self.taubar),
            ("phi", self.phi),
            ("x1", self.x1),
            ("dt", self.dt),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite",
                });
            }
        }
        if self.l <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "l",
                reason: "must be > 0",
            });
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be > 0",
            });
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: "must be > 0",
            });
        }
        if self.big_omega < 0.0 {
            return Err(Error::InvalidParameter {
                name: "Omega",
                reason: "must be >= 0",
            });
        }
        Ok(())
    }

    /// Internal time of the hybrid machine, `τ(t) = ω⁻¹ sin(ωt)`.
    pub fn internal_time(&self, t: f64) -> f64 {
        math::sin(self.omega * t) / self.omega
    }

    /// Lapse of the hybrid machine, `dτ/dt = cos(ωt)`.
    pub fn lapse(&self, t: f64) -> f64 {
        math::cos(self.omega * t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn potential_examples() {
        let h = PotentialSpec::harmonic(4.0).unwrap();
        assert_eq!(h.eval(1.0), 4.0);
        assert_eq!(h.gradient(1.0), 8.0);
        let z = PotentialSpec::zero();
        assert_eq!(z.eval(7.3), 0.0);
        assert_eq!(z.gradient(7.3), 0.0);
        let lin = PotentialSpec::linear(2.0);
        assert_eq!(lin.eval(3.0), 6.0);
        assert_eq!(lin.gradient(3.0), 2.0);
        assert_eq!(PotentialSpec::constant(1.5).eval(-4.0), 1.5);
    }

    #[test]
    fn harmonic_requires_positive_c2() {
        assert!(PotentialSpec::harmonic(0.0).is_err());
        assert!(PotentialSpec::harmonic(-1.0).is_err());
    }

    #[test]
    fn energy_examples() {
        let zero = PotentialSpec::zero();
        assert_eq!(energy_e_n(1.0, 1.0, 0.0, 0.0, &zero), 1.0);
        let h1 = PotentialSpec::harmonic(1.0).unwrap();
        assert_eq!(energy_e_n(2.0, 0.0, 1.0, 0.0, &h1), 3.0);
        assert_eq!(energy_e_n(0.0, 0.0, 0.0, 0.0, &h1), 0.0);
    }

    #[test]
    fn kappa_examples() {
        let zero = PotentialSpec::zero();
        assert!((kappa_k_n(1.0, 0.0, 0.1, &zero) - 0.1).abs() < 1e-15);
        let h1 = PotentialSpec::harmonic(1.0).unwrap();
        assert_eq!(kappa_k_n(0.0, 2.0, 0.5, &h1), 2.0);
        assert_eq!(kappa_k_n(0.0, 0.0, 0.5, &h1), 0.0);
    }

    #[test]
    fn hamiltonian_examples() {
        let zero = PotentialSpec::zero();
        let a = DiscreteState::new(0, 0.3, 0.2, 0.0, 0.0);
        let b = DiscreteState::new(1, 0.3, 0.2, 0.0, 0.0);
        assert_eq!(hamiltonian_h_n(&b, &a, &zero, &zero, 0.1).unwrap(), 0.0);

        let prev = DiscreteState::new(0, 0.0, 0.0, 1.0, 1.0);
        let curr = DiscreteState::new(1, 0.1, 0.1, 1.0, 1.0);
        let h = hamiltonian_h_n(&curr, &prev, &zero, &zero, 0.1).unwrap();
        assert!((h - 0.2).abs() < 1e-15);

        assert!(matches!(
            hamiltonian_h_n(&prev, &curr, &zero, &zero, 0.1),
            Err(Error::NonConsecutive { .. })
        ));
    }

    #[test]
    fn provided_observables_are_hermitian() {
        for o in [
            ObservableMatrix::identity(),
            ObservableMatrix::sigma2(),
            ObservableMatrix::sigma3(),
            ObservableMatrix::sigma2_half(),
        ] {
            assert!(o.is_hermitian());
        }
        let bad = [
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)],
            [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
        ];
        assert_eq!(ObservableMatrix::new(bad), Err(Error::NonHermitian));
    }

    #[test]
    fn constraint_is_quadratic() {
        let s = HybridState::new(0.0, 0.0, 0.0, [1.0, 0.0], [0.0, 1.0]);
        assert_eq!(s.constraint(), 1.0);
        let z = HybridState::new(0.0, 0.0, 0.0, [0.0; 2], [0.0; 2]);
        assert_eq!(z.constraint(), 0.0);
        assert!(z.normalized().is_err());
        let c = 1.7;
        let scaled = HybridState::new(0.0, 0.0, 0.0, [c, 0.0], [0.0, c]);
        assert!((scaled.constraint() - c * c).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let p = ModelParams {
            dt: 0.0,
            ..ModelParams::default()
        };
        assert_eq!(
            p.validate(),
            Err(Error::InvalidParameter {
                name: "dt",
                reason: "must be > 0"
            })
        );
    }

    fn any_potential() -> impl Strategy<Value = PotentialSpec> {
        (0u8..4, -3.0..3.0f64, -3.0..3.0f64, 0.1..5.0f64).prop_map(|(k, c0, c1, c2)| {
            let kind = match k {
                0 => PotentialKind::Zero,
                1 => PotentialKind::Constant,
                2 => PotentialKind::Linear,
                _ => PotentialKind::Harmonic,
            };
            PotentialSpec { kind, c0, c1, c2 }
        })
    }

    proptest! {
        #[test]
        fn gradient_matches_central_difference(spec in any_potential(), q in -10.0..10.0f64) {
            for h in [1e-4, 1e-5] {
                let fd = (spec.eval(q + h) - spec.eval(q - h)) / (2.0 * h);
                // closed forms are at most quadratic, so only rounding remains
                let tol = 1e-8 * (1.0 + spec.eval(q).abs()) / (h * 1e4);
                prop_assert!((fd - spec.gradient(q)).abs() <= tol.max(1e-6),
                    "fd {} vs {}", fd, spec.gradient(q));
            }
        }

        #[test]
        fn kappa_ignores_x_and_p(pcal in -3.0..3.0f64, tau in -3.0..3.0f64,
                                 dx in -5.0..5.0f64, dp in -5.0..5.0f64) {
            let vtau = PotentialSpec::harmonic(2.0).unwrap();
            let l = 0.05;
            let zero = PotentialSpec::zero();
            let a = DiscreteState::new(0, 0.0, 0.0, 0.0, 0.0);
            let b = DiscreteState::new(1, 0.0, tau, 0.0, pcal);
            let b2 = DiscreteState::new(1, dx, tau, dp, pcal);
            let a2 = DiscreteState::new(0, -dx, 0.0, dp, 0.0);
            // with V = 0 and Δτ = τ only the E-part can see x, p; K cannot
            let k1 = hamiltonian_h_n(&b, &a, &zero, &vtau, l).unwrap() - tau * energy_e_n(0.0, 0.0, 0.0, 0.0, &zero);
            let k2 = hamiltonian_h_n(&b2, &a2, &zero, &vtau, l).unwrap() - tau * energy_e_n(dp, dp, dx, -dx, &zero);
            prop_assert!((k1 - k2).abs() < 1e-12);
            prop_assert!((kappa_k_n(pcal, tau, l, &vtau) - k1).abs() < 1e-12);
        }
    }
}
