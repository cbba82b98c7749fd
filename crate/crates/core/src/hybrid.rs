//! A classical time machine coupled to a q-bit.
//!
//! The q-bit lives in the oscillator representation `ψ_i = X_i + i P_i`
//! with constraint `C = ½ Σ (X_i² + P_i²) = 1`. The total Hamiltonian is
//!
//! ```text
//! H_Σ = ζ/2 cos(ωt) (p² + Ω² x²) + E₀/2 Σ_i (−1)^i (P_i² + X_i²) + λ x cos(ωt) ⟨O⟩
//! ```
//!
//! with `⟨O⟩ = Σ O_ij conj(ψ_i) ψ_j` (no leading ½; `λ` absorbs that factor).
//! The classical part is written with `Ω²x²` directly, not through a
//! [`PotentialSpec`](crate::PotentialSpec).
//!
//! Sign check: at `λ = 0` Hamilton's equations give `ψ̇_1 = iE₀ψ_1` and
//! `ψ̇_2 = −iE₀ψ_2`, i.e. `i dψ/dt = −E₀σ₃ψ`. With coupling the q-bit obeys
//! `i dψ/dt = (−E₀σ₃ + 2λx cos(ωt) O)ψ`, which for `O = σ₂/2` is
//! `−E₀σ₃ + λx cos(ωt) σ₂`. There is no sign discrepancy between the two
//! formulations.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::bracket::{self, FiniteDiff};
use crate::error::{Error, Result};
use crate::math;
use crate::model::{HybridState, ModelParams, ObservableMatrix};
use crate::rk4;

/// Canonical pair of the classical sector in [`HybridState::coords`].
pub const CL_PAIRS: [(usize, usize); 1] = [(0, 1)];
/// Canonical pairs `(X_i, P_i)` of the q-bit sector in [`HybridState::coords`].
pub const QM_PAIRS: [(usize, usize); 2] = [(2, 4), (3, 5)];
pub const ALL_PAIRS: [(usize, usize); 3] = [(0, 1), (2, 4), (3, 5)];

pub const DEFAULT_CONSTRAINT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridModel {
    pub params: ModelParams,
    observable: ObservableMatrix,
}

impl HybridModel {
    pub fn new(params: ModelParams, observable: ObservableMatrix) -> Result<Self> {
        params.validate()?;
        if !observable.is_hermitian() {
            return Err(Error::NonHermitian);
        }
        Ok(Self { params, observable })
    }

    /// Coupling through `σ₂/2`.
    pub fn with_default_observable(params: ModelParams) -> Result<Self> {
        Self::new(params, ObservableMatrix::sigma2_half())
    }

    pub fn observable(&self) -> &ObservableMatrix {
        &self.observable
    }
}

/// Time derivative of a [`HybridState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridRate {
    pub x: f64,
    pub p: f64,
    pub qx: [f64; 2],
    pub qp: [f64; 2],
}

impl HybridRate {
    /// Same ordering as [`HybridState::coords`].
    pub fn as_array(&self) -> [f64; 6] {
        [self.x, self.p, self.qx[0], self.qx[1], self.qp[0], self.qp[1]]
    }
}

/// Signature of a right-hand side; lets callers swap in a modified flow.
pub type RhsFn = fn(&HybridState, &HybridModel) -> HybridRate;

/// `⟨O⟩ = Σ_ij O_ij (X_i − iP_i)(X_j + iP_j)`.
pub fn qbit_expectation(o: &ObservableMatrix, s: &HybridState) -> f64 {
    let psi = s.psi();
    let opsi = o.apply(&psi);
    (psi[0].conj() * opsi[0] + psi[1].conj() * opsi[1]).re
}

/// `(∂⟨O⟩/∂X_i, ∂⟨O⟩/∂P_i) = (2 Re (Oψ)_i, 2 Im (Oψ)_i)` for Hermitian `O`.
pub fn qbit_expectation_gradient(o: &ObservableMatrix, s: &HybridState) -> ([f64; 2], [f64; 2]) {
    let opsi = o.apply(&s.psi());
    (
        [2.0 * opsi[0].re, 2.0 * opsi[1].re],
        [2.0 * opsi[0].im, 2.0 * opsi[1].im],
    )
}

pub fn constraint_c(s: &HybridState) -> f64 {
    s.constraint()
}

fn level_sign(i: usize) -> f64 {
    // q-bit levels are numbered from 1: (−1)^1 = −1, (−1)^2 = +1
    if i == 0 {
        -1.0
    } else {
        1.0
    }
}

pub fn hybrid_rhs(s: &HybridState, model: &HybridModel) -> HybridRate {
    let pr = &model.params;
    let c = pr.lapse(s.t);
    let o = qbit_expectation(&model.observable, s);
    let (d_x, d_p) = qbit_expectation_gradient(&model.observable, s);
    let coupling = pr.lambda * s.x * c;
    let mut qx = [0.0; 2];
    let mut qp = [0.0; 2];
    for i in 0..2 {
        let sg = level_sign(i);
        qx[i] = sg * pr.e0 * s.qp[i] + coupling * d_p[i];
        qp[i] = -sg * pr.e0 * s.qx[i] - coupling * d_x[i];
    }
    HybridRate {
        x: pr.zeta * s.p * c,
        p: -(pr.zeta * pr.big_omega * pr.big_omega * s.x + pr.lambda * o) * c,
        qx,
        qp,
    }
}

pub fn hamiltonian_cl(s: &HybridState, params: &ModelParams) -> f64 {
    0.5 * params.zeta * params.lapse(s.t) * (s.p * s.p + params.big_omega * params.big_omega * s.x * s.x)
}

pub fn hamiltonian_qm(s: &HybridState, params: &ModelParams) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        acc += level_sign(i) * (s.qp[i] * s.qp[i] + s.qx[i] * s.qx[i]);
    }
    0.5 * params.e0 * acc
}

pub fn hamiltonian_interaction(s: &HybridState, model: &HybridModel) -> f64 {
    model.params.lambda * s.x * model.params.lapse(s.t) * qbit_expectation(&model.observable, s)
}

pub fn hybrid_hamiltonian_total(s: &HybridState, model: &HybridModel) -> f64 {
    hamiltonian_cl(s, &model.params) + hamiltonian_qm(s, &model.params) + hamiltonian_interaction(s, model)
}

/// `H_Σ` as a function of the flat coordinates with `t` frozen.
pub fn frozen_hamiltonian(model: &HybridModel, t: f64) -> impl Fn(&[f64]) -> f64 + '_ {
    move |w: &[f64]| hybrid_hamiltonian_total(&HybridState::from_coords(t, w), model)
}

pub fn cl_bracket<A, B>(a: &A, b: &B, point: &HybridState, fd: FiniteDiff) -> f64
where
    A: Fn(&[f64]) -> f64 + ?Sized,
    B: Fn(&[f64]) -> f64 + ?Sized,
{
    bracket::poisson_bracket(a, b, &point.coords(), &CL_PAIRS, fd)
}

pub fn qm_bracket<A, B>(a: &A, b: &B, point: &HybridState, fd: FiniteDiff) -> f64
where
    A: Fn(&[f64]) -> f64 + ?Sized,
    B: Fn(&[f64]) -> f64 + ?Sized,
{
    bracket::poisson_bracket(a, b, &point.coords(), &QM_PAIRS, fd)
}

/// `{A, B}_× = {A, B}_CL + {A, B}_QM` over `(x, p, X1, X2, P1, P2)`.
pub fn generalized_bracket<A, B>(a: &A, b: &B, point: &HybridState, fd: FiniteDiff) -> f64
where
    A: Fn(&[f64]) -> f64 + ?Sized,
    B: Fn(&[f64]) -> f64 + ?Sized,
{
    cl_bracket(a, b, point, fd) + qm_bracket(a, b, point, fd)
}

/// The flow `({z_k, H_Σ})_k` at frozen `t`, for comparison with an rhs.
pub fn bracket_flow(point: &HybridState, model: &HybridModel, fd: FiniteDiff) -> [f64; 6] {
    let h = frozen_hamiltonian(model, point.t);
    let mut out = [0.0; 6];
    for (k, o) in out.iter_mut().enumerate() {
        let coord = move |w: &[f64]| w[k];
        *o = generalized_bracket(&coord, &h, point, fd);
    }
    out
}

/// First-order canonical map generated by `g` over both sectors.
pub fn infinitesimal_canonical<G>(g: &G, dalpha: f64, point: &HybridState, fd: FiniteDiff) -> HybridState
where
    G: Fn(&[f64]) -> f64 + ?Sized,
{
    let z = bracket::canonical_shift(g, &point.coords(), &ALL_PAIRS, dalpha, fd);
    HybridState::from_coords(point.t, &z)
}

/// One fourth-order step of an arbitrary rhs.
pub fn hybrid_step_with(s: &HybridState, model: &HybridModel, dt: f64, rhs: RhsFn) -> HybridState {
    let f = |t: f64, y: &[f64; 6]| rhs(&HybridState::from_coords(t, y), model).as_array();
    let y = rk4::step(f, s.t, &s.coords(), dt);
    HybridState::from_coords(s.t + dt, &y)
}

pub fn hybrid_step(s: &HybridState, model: &HybridModel, dt: f64) -> HybridState {
    hybrid_step_with(s, model, dt, hybrid_rhs)
}

/// Fixed-step integration with the default constraint tolerance.
pub fn integrate_hybrid(s0: HybridState, model: &HybridModel, dt: f64, steps: usize) -> Result<Vec<HybridState>> {
    integrate_hybrid_with(s0, model, dt, steps, DEFAULT_CONSTRAINT_TOLERANCE, hybrid_rhs)
}

/// Records `steps + 1` states starting with `s0`. The q-bit is never
/// renormalized; a drift `|C − 1| > tolerance` aborts the run.
pub fn integrate_hybrid_with(
    s0: HybridState,
    model: &HybridModel,
    dt: f64,
    steps: usize,
    tolerance: f64,
    rhs: RhsFn,
) -> Result<Vec<HybridState>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: "must be finite and > 0",
        });
    }
    check_constraint(&s0, tolerance)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s0);
    let mut s = s0;
    for k in 0..steps {
        s = hybrid_step_with(&s, model, dt, rhs);
        s.t = s0.t + (k + 1) as f64 * dt;
        if !s.is_finite() {
            return Err(Error::NonFiniteAt { t: s.t });
        }
        check_constraint(&s, tolerance)?;
        out.push(s);
    }
    Ok(out)
}

fn check_constraint(s: &HybridState, tolerance: f64) -> Result<()> {
    let drift = math::abs(s.constraint() - 1.0);
    if !(drift <= tolerance) {
        return Err(Error::ConstraintViolation {
            t: s.t,
            drift,
            tolerance,
        });
    }
    Ok(())
}

/// Largest `|z(t_k) − z(t_{n−k})|` over `x` and `p` for a history that
/// spans one half-period `[0, π/ω]` of the machine. Since `τ(t_k)` and
/// `τ(t_{n−k})` coincide, an undisturbed classical oscillator retraces
/// itself exactly.
pub fn retrace_defect(history: &[HybridState]) -> f64 {
    let n = history.len().saturating_sub(1);
    let mut worst = 0.0f64;
    for k in 0..=n / 2 {
        let (a, b) = (&history[k], &history[n - k]);
        worst = worst.max(math::abs(a.x - b.x)).max(math::abs(a.p - b.p));
    }
    worst
}

/// Q-bit coordinates at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QbitSample {
    pub t: f64,
    pub qx: [f64; 2],
    pub qp: [f64; 2],
}

impl QbitSample {
    pub fn psi(&self) -> [Complex64; 2] {
        [
            Complex64::new(self.qx[0], self.qp[0]),
            Complex64::new(self.qx[1], self.qp[1]),
        ]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..2).fold(0.0f64, |m, i| {
            m.max(math::abs(self.qx[i] - other.qx[i]))
                .max(math::abs(self.qp[i] - other.qp[i]))
        })
    }
}

/// Hamilton's equations for the q-bit alone with `x(t)` supplied by `driver`.
pub fn integrate_qbit_driven(
    start: QbitSample,
    model: &HybridModel,
    driver: &dyn Fn(f64) -> f64,
    dt: f64,
    steps: usize,
) -> Vec<QbitSample> {
    let f = |t: f64, y: &[f64; 4]| {
        let s = HybridState::new(t, driver(t), 0.0, [y[0], y[1]], [y[2], y[3]]);
        let r = hybrid_rhs(&s, model);
        [r.qx[0], r.qx[1], r.qp[0], r.qp[1]]
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    let mut y = [start.qx[0], start.qx[1], start.qp[0], start.qp[1]];
    for k in 0..steps {
        let t = start.t + k as f64 * dt;
        y = rk4::step(f, t, &y, dt);
        out.push(QbitSample {
            t: start.t + (k + 1) as f64 * dt,
            qx: [y[0], y[1]],
            qp: [y[2], y[3]],
        });
    }
    out
}

/// `−i (−E₀σ₃ + 2λx(t)cos(ωt) O) ψ`.
fn schrodinger_rate(psi: &[Complex64; 2], t: f64, model: &HybridModel, x: f64) -> [Complex64; 2] {
    let pr = &model.params;
    let b = 2.0 * pr.lambda * x * pr.lapse(t);
    let opsi = model.observable.apply(psi);
    let h = [-pr.e0 * psi[0] + b * opsi[0], pr.e0 * psi[1] + b * opsi[1]];
    let mi = Complex64::new(0.0, -1.0);
    [mi * h[0], mi * h[1]]
}

/// One fourth-order step of `i dψ/dt = (−E₀σ₃ + 2λx(t)cos(ωt) O) ψ`.
pub fn schrodinger_step(
    psi: &[Complex64; 2],
    t: f64,
    model: &HybridModel,
    driver: &dyn Fn(f64) -> f64,
    dt: f64,
) -> [Complex64; 2] {
    let half = 0.5 * dt;
    let axpy = |a: &[Complex64; 2], k: &[Complex64; 2], s: f64| [a[0] + k[0] * s, a[1] + k[1] * s];
    let k1 = schrodinger_rate(psi, t, model, driver(t));
    let k2 = schrodinger_rate(&axpy(psi, &k1, half), t + half, model, driver(t + half));
    let k3 = schrodinger_rate(&axpy(psi, &k2, half), t + half, model, driver(t + half));
    let k4 = schrodinger_rate(&axpy(psi, &k3, dt), t + dt, model, driver(t + dt));
    let w = dt / 6.0;
    [
        psi[0] + (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * w,
        psi[1] + (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * w,
    ]
}

pub fn integrate_schrodinger(
    start: QbitSample,
    model: &HybridModel,
    driver: &dyn Fn(f64) -> f64,
    dt: f64,
    steps: usize,
) -> Vec<QbitSample> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(start);
    let mut psi = start.psi();
    for k in 0..steps {
        let t = start.t + k as f64 * dt;
        psi = schrodinger_step(&psi, t, model, driver, dt);
        out.push(QbitSample {
            t: start.t + (k + 1) as f64 * dt,
            qx: [psi[0].re, psi[1].re],
            qp: [psi[0].im, psi[1].im],
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn model(lambda: f64) -> HybridModel {
        HybridModel::with_default_observable(ModelParams {
            lambda,
            ..ModelParams::default()
        })
        .unwrap()
    }

    fn reference() -> HybridState {
        HybridState::new(0.0, 1.0, 0.0, [1.0, 0.0], [0.0, 1.0])
    }

    /// `⟨ψ|O|ψ⟩` by explicit double sum, independent of `apply`.
    fn expectation_oracle(o: &ObservableMatrix, s: &HybridState) -> f64 {
        let z = s.psi();
        let e = o.entries();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += z[i].conj() * e[i][j] * z[j];
            }
        }
        acc.re
    }

    #[test]
    fn expectation_examples() {
        let s = reference();
        assert_eq!(qbit_expectation(&ObservableMatrix::sigma2_half(), &s), 1.0);
        assert_eq!(expectation_oracle(&ObservableMatrix::sigma2_half(), &s), 1.0);
        assert_eq!(qbit_expectation(&ObservableMatrix::identity(), &s), 2.0);
        let r = 1.0 / 2f64.sqrt();
        let eq = HybridState::new(0.0, 0.0, 0.0, [r, r], [0.0, 0.0])
            .normalized()
            .unwrap();
        assert!(qbit_expectation(&ObservableMatrix::sigma3(), &eq).abs() < 1e-15);
    }

    #[test]
    fn constraint_examples() {
        assert_eq!(constraint_c(&reference()), 1.0);
        assert_eq!(constraint_c(&HybridState::new(0.0, 0.0, 0.0, [0.0; 2], [0.0; 2])), 0.0);
    }

    #[test]
    fn rhs_examples() {
        let m = HybridModel::with_default_observable(ModelParams {
            lambda: 1.0,
            e0: 1.0,
            ..ModelParams::default()
        })
        .unwrap();
        let r = hybrid_rhs(&reference(), &m);
        assert_eq!(r.qx[0], 0.0);
        assert_eq!(r.qp[1], 0.0);
        assert_eq!(r.qx[1], 2.0);
        assert_eq!(r.qp[0], 0.0);

        let mut s = reference();
        s.t = PI / 2.0;
        let r = hybrid_rhs(&s, &m);
        assert!(r.x.abs() < 1e-14 && r.p.abs() < 1e-14);
        assert!((r.qx[1] - 1.0).abs() < 1e-15);
        assert!((r.qp[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_rhs_at_zero_coupling() {
        let m = model(0.0);
        let s = HybridState::new(0.0, 0.4, -0.3, [0.6, 0.8], [0.0, 1.0]);
        let r = hybrid_rhs(&s, &m);
        assert_eq!(r.x, -0.3);
        assert_eq!(r.p, -25.0 * 0.4);
        assert_eq!(r.qx, [0.0, 1.0]);
        assert_eq!(r.qp, [0.6, -0.8]);
    }

    #[test]
    fn hamiltonian_examples() {
        let m = model(0.1);
        let mut s = reference();
        s.t = PI / 2.0;
        let total = hybrid_hamiltonian_total(&s, &m);
        assert!((total - hamiltonian_qm(&s, &m.params)).abs() < 1e-15);
        let r = 1.0 / 2f64.sqrt();
        let eq = HybridState::new(0.0, 1.0, 0.0, [r, r], [r, r]);
        assert_eq!(hamiltonian_qm(&eq, &m.params), 0.0);
    }

    #[test]
    fn bracket_examples() {
        let fd = FiniteDiff::default();
        let s = HybridState::new(0.3, 0.4, -0.3, [0.6, 0.8], [0.0, 0.1]);
        let x = |w: &[f64]| w[0];
        let p = |w: &[f64]| w[1];
        assert!((generalized_bracket(&x, &p, &s, fd) - 1.0).abs() < 1e-12);
        let cl = |w: &[f64]| w[0] * w[0] * w[1] + w[1];
        let qm = |w: &[f64]| w[2] * w[5] - w[3] * w[4];
        assert!(generalized_bracket(&cl, &qm, &s, fd).abs() <= 1e-10);
        let m = model(0.1);
        let h = frozen_hamiltonian(&m, s.t);
        assert_eq!(generalized_bracket(&h, &h, &s, fd), 0.0);
    }

    #[test]
    fn canonical_examples() {
        let fd = FiniteDiff::default();
        let s = HybridState::new(0.0, 0.4, -0.3, [0.6, 0.8], [0.0, 0.1]);
        let p = |w: &[f64]| w[1];
        let moved = infinitesimal_canonical(&p, 1e-3, &s, fd);
        assert!((moved.x - 0.401).abs() < 1e-14);
        assert_eq!((moved.p, moved.qx, moved.qp), (s.p, s.qx, s.qp));

        let qm = |w: &[f64]| w[2] * w[5] - w[3] * w[4];
        let moved = infinitesimal_canonical(&qm, 1e-3, &s, fd);
        assert_eq!((moved.x, moved.p), (s.x, s.p));

        let m = model(0.0);
        let hq = |w: &[f64]| hamiltonian_qm(&HybridState::from_coords(0.0, w), &m.params);
        let dt = 1e-4;
        let moved = infinitesimal_canonical(&hq, dt, &s, fd);
        let r = hybrid_rhs(&s, &m);
        for i in 0..2 {
            assert!((moved.qx[i] - (s.qx[i] + dt * r.qx[i])).abs() < 1e-10);
            assert!((moved.qp[i] - (s.qp[i] + dt * r.qp[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn homogeneous_solution_and_free_precession() {
        let m = model(0.0);
        let dt = 1e-4;
        let steps = (2.0 * PI / dt).round() as usize;
        let run = integrate_hybrid(reference(), &m, dt, steps).unwrap();
        let pops = |s: &HybridState| (s.qx[0].powi(2) + s.qp[0].powi(2), s.qx[1].powi(2) + s.qp[1].powi(2));
        let p0 = pops(&run[0]);
        let mut worst = 0.0f64;
        for s in &run {
            let exact = (5.0 * m.params.internal_time(s.t)).cos();
            worst = worst.max((s.x - exact).abs());
            let p = pops(s);
            assert!((p.0 - p0.0).abs() < 1e-9 && (p.1 - p0.1).abs() < 1e-9);
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn coupling_breaks_retrace() {
        let dt = PI / 31416.0;
        let defect = |lambda: f64| {
            let run = integrate_hybrid(reference(), &model(lambda), dt, 31416).unwrap();
            retrace_defect(&run)
        };
        let free = defect(0.0);
        let coupled = defect(0.1);
        assert!(coupled > 100.0 * free, "{coupled} vs {free}");
    }

    #[test]
    fn constraint_guard() {
        let bad = HybridState::new(0.0, 1.0, 0.0, [1.0, 1.0], [0.0, 1.0]);
        assert!(matches!(
            integrate_hybrid(bad, &model(0.1), 1e-3, 10),
            Err(Error::ConstraintViolation { .. })
        ));
        assert!(HybridModel::new(ModelParams::default(), ObservableMatrix::sigma2().scaled(1.0)).is_ok());
    }

    #[test]
    fn hamilton_and_schrodinger_agree() {
        let m = model(0.1);
        let driver = |t: f64| (5.0 * m.params.internal_time(t)).cos();
        let dt = 1e-3;
        let steps = (2.0 * PI / dt).round() as usize;
        let start = QbitSample {
            t: 0.0,
            qx: [1.0, 0.0],
            qp: [0.0, 1.0],
        };
        let a = integrate_qbit_driven(start, &m, &driver, dt, steps);
        let b = integrate_schrodinger(start, &m, &driver, dt, steps);
        let worst = a.iter().zip(&b).map(|(u, v)| u.max_abs_diff(v)).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
        for s in &b {
            let norm: f64 = s.psi().iter().map(|z| z.norm_sqr()).sum();
            assert!((norm - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn free_schrodinger_phases() {
        let m = model(0.0);
        let zero = |_t: f64| 0.0;
        let psi0 = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let mut psi = psi0;
        let dt = 1e-3;
        for k in 0..1000 {
            psi = schrodinger_step(&psi, k as f64 * dt, &m, &zero, dt);
        }
        let t: f64 = 1.0;
        let e1 = psi0[0] * Complex64::new(t.cos(), t.sin());
        let e2 = psi0[1] * Complex64::new(t.cos(), -t.sin());
        assert!((psi[0] - e1).norm_sqr().sqrt() < 1e-12);
        assert!((psi[1] - e2).norm_sqr().sqrt() < 1e-12);
    }

    fn unit_state() -> impl Strategy<Value = HybridState> {
        (
            proptest::array::uniform4(-1.0..1.0f64),
            -2.0..2.0f64,
            -2.0..2.0f64,
            0.0..6.0f64,
        )
            .prop_filter("nonzero", |(q, ..)| q.iter().any(|v| v.abs() > 1e-3))
            .prop_map(|(q, x, p, t)| {
                HybridState::new(t, x, p, [q[0], q[1]], [q[2], q[3]])
                    .normalized()
                    .unwrap()
            })
    }

    proptest! {
        #[test]
        fn sigma2_half_identity(s in unit_state()) {
            let lhs = qbit_expectation(&ObservableMatrix::sigma2_half(), &s);
            let rhs = s.qx[0] * s.qp[1] - s.qx[1] * s.qp[0];
            prop_assert!((lhs - rhs).abs() <= 1e-12);
            prop_assert!((expectation_oracle(&ObservableMatrix::sigma2_half(), &s) - rhs).abs() <= 1e-12);
        }

        #[test]
        fn analytic_partials_match_fd(s in unit_state()) {
            for o in [ObservableMatrix::sigma2_half(), ObservableMatrix::sigma3(), ObservableMatrix::identity()] {
                let f = |w: &[f64]| qbit_expectation(&o, &HybridState::from_coords(s.t, w));
                let fd = FiniteDiff::new(1e-4);
                let z = s.coords();
                let (dx, dp) = qbit_expectation_gradient(&o, &s);
                for i in 0..2 {
                    prop_assert!((fd.partial(&f, &z, 2 + i) - dx[i]).abs() <= 1e-6);
                    prop_assert!((fd.partial(&f, &z, 4 + i) - dp[i]).abs() <= 1e-6);
                }
            }
        }

        #[test]
        fn rhs_is_the_bracket_flow(s in unit_state()) {
            let m = model(0.1);
            let flow = bracket_flow(&s, &m, FiniteDiff::default());
            let rhs = hybrid_rhs(&s, &m).as_array();
            for k in 0..6 {
                prop_assert!((flow[k] - rhs[k]).abs() <= 1e-6, "component {}: {} vs {}", k, flow[k], rhs[k]);
            }
        }

        #[test]
        fn constraint_is_homogeneous(s in unit_state(), c in 0.1..3.0f64) {
            let z = s.coords();
            let scaled = HybridState::from_coords(s.t, &[z[0], z[1], c * z[2], c * z[3], c * z[4], c * z[5]]);
            prop_assert!((constraint_c(&scaled) - c * c * constraint_c(&s)).abs() <= 1e-12 * c * c);
        }
    }
}
