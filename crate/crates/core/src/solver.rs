//! Three-phase momentum reprojection solver.
//!
//! Each phase evaluates the objective gradient `g` at the running iterate,
//! splits it against the band-limited subspace, pushes the selected part
//! through a generalized back-propagator `A`, and folds the result into an
//! exponentially weighted momentum `m` and energy `v`:
//!
//! ```text
//! m(t) = beta1 m(t-1) + A[d(t)]
//! v(t) = beta2 v(t-1) + |A[d(t)]|^2
//! D(t) = (m(t) - K * r(t-1)) / (sqrt(v(t)) + eps)
//! ```
//!
//! where `r = g - P g` is the out-of-band residual and `K` a unit-mass
//! Gaussian. After exactly three phases the accumulated iterate
//! `psi0 - sum gamma_t D(t)` is projected onto the band-limited subspace.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, C64};
use crate::fresnel::{PropagationSpec, Propagator};
use crate::smoothing::GaussianKernel;

pub const PHASES: usize = 3;

/// Which part of the gradient feeds the momentum and energy recurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchDirection {
    /// `P g`, the band-limited part of the gradient.
    Admissible,
    /// `g - P g`, the out-of-band residual.
    Residual,
}

/// The operator `A` applied to the selected gradient part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralizedPropagator {
    /// `T^dagger T`: forward then back, i.e. the subspace projector.
    RoundTrip,
    /// `T^dagger`.
    Adjoint,
    /// `(T^dagger)^n`, a multi-bounce back-propagation.
    AdjointChain(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: [f64; PHASES],
    pub epsilon: f64,
    pub smoothing_sigma_px: f64,
    pub smoothing_radius_px: usize,
    pub direction: SearchDirection,
    pub propagator: GeneralizedPropagator,
    /// Evaluate gradients at the projected rather than the raw running iterate.
    pub project_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            gamma: [0.05, 0.025, 0.0125],
            epsilon: 1e-8,
            smoothing_sigma_px: 1.5,
            smoothing_radius_px: 3,
            direction: SearchDirection::Admissible,
            propagator: GeneralizedPropagator::RoundTrip,
            project_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::param(name, format!("{b} not in [0, 1)")));
            }
        }
        if self.gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::param("gamma", format!("{:?} must all be positive", self.gamma)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::param("epsilon", format!("{} must be positive", self.epsilon)));
        }
        if let GeneralizedPropagator::AdjointChain(0) = self.propagator {
            return Err(Error::param("propagator", "adjoint chain needs at least one hop"));
        }
        self.kernel().map(|_| ())
    }

    pub fn kernel(&self) -> Result<GaussianKernel> {
        GaussianKernel::new(self.smoothing_sigma_px, self.smoothing_radius_px)
    }
}

/// `L(psi) = 1/2 || |T psi|^2 - I ||^2` for a measured intensity `I`.
#[derive(Debug, Clone)]
pub struct IntensityObjective {
    measured: Vec<f64>,
    propagator: Propagator,
}

impl IntensityObjective {
    pub fn new(
        measured: Vec<f64>,
        width: usize,
        height: usize,
        pitch: f64,
        spec: PropagationSpec,
    ) -> Result<Self> {
        if measured.len() != width * height {
            return Err(Error::param(
                "measured_intensity",
                format!("{} samples for a {width}x{height} grid", measured.len()),
            ));
        }
        if let Some(index) = measured.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if measured.iter().any(|&v| v < 0.0) {
            return Err(Error::param("measured_intensity", "intensities must be non-negative"));
        }
        Ok(Self {
            measured,
            propagator: Propagator::new(spec, width, height, pitch)?,
        })
    }

    /// Objective whose measurement is exactly `|T psi|^2`.
    pub fn consistent_with(psi: &ComplexField, spec: PropagationSpec) -> Result<Self> {
        let propagator = Propagator::for_field(spec, psi)?;
        let measured = propagator.propagate(psi)?.intensity();
        Ok(Self {
            measured,
            propagator,
        })
    }

    pub fn measured(&self) -> &[f64] {
        &self.measured
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn spec(&self) -> &PropagationSpec {
        self.propagator.spec()
    }

    pub fn value(&self, psi: &ComplexField) -> Result<f64> {
        let e = self.propagator.propagate(psi)?;
        Ok(0.5
            * e.data()
                .iter()
                .zip(&self.measured)
                .map(|(c, i)| (c.norm_sqr() - i).powi(2))
                .sum::<f64>())
    }

    /// Conjugate-Wirtinger gradient `T^dagger[(|E|^2 - I) E]`, `E = T psi`.
    pub fn gradient(&self, psi: &ComplexField) -> Result<ComplexField> {
        let e = self.propagator.propagate(psi)?;
        let weighted = e.with_data(
            e.data()
                .iter()
                .zip(&self.measured)
                .map(|(c, i)| c * (c.norm_sqr() - i))
                .collect(),
        );
        self.propagator.adjoint(&weighted)
    }
}

pub fn gradient(objective: &IntensityObjective, psi: &ComplexField) -> Result<ComplexField> {
    objective.gradient(psi)
}

/// `g - P g`.
pub fn residual(g: &ComplexField, spec: &PropagationSpec) -> Result<ComplexField> {
    Propagator::for_field(*spec, g)?.reject(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub psi: ComplexField,
    pub m: ComplexField,
    pub v: Vec<f64>,
    pub prev_residual: ComplexField,
    pub t: usize,
}

impl SolverState {
    pub fn new(psi0: ComplexField) -> Self {
        let zero = psi0.map(|_| C64::new(0.0, 0.0));
        Self {
            v: vec![0.0; psi0.len()],
            m: zero.clone(),
            prev_residual: zero,
            psi: psi0,
            t: 0,
        }
    }
}

/// Applies the configured generalized propagator.
pub fn apply_generalized(
    config: &SolverConfig,
    propagator: &Propagator,
    field: &ComplexField,
) -> Result<ComplexField> {
    match config.propagator {
        GeneralizedPropagator::RoundTrip => propagator.project(field),
        GeneralizedPropagator::Adjoint => propagator.adjoint(field),
        GeneralizedPropagator::AdjointChain(hops) => {
            let mut out = propagator.adjoint(field)?;
            for _ in 1..hops {
                out = propagator.adjoint(&out)?;
            }
            Ok(out)
        }
    }
}

/// `A[d(g)]`, the per-phase contribution to both recurrences.
pub fn phase_direction(
    g: &ComplexField,
    config: &SolverConfig,
    propagator: &Propagator,
) -> Result<ComplexField> {
    let part = match config.direction {
        SearchDirection::Admissible => propagator.project(g)?,
        SearchDirection::Residual => propagator.reject(g)?,
    };
    apply_generalized(config, propagator, &part)
}

pub fn momentum_step(
    state: &SolverState,
    g: &ComplexField,
    config: &SolverConfig,
    spec: &PropagationSpec,
) -> Result<ComplexField> {
    let propagator = Propagator::for_field(*spec, g)?;
    let a = phase_direction(g, config, &propagator)?;
    momentum_from_direction(&state.m, &a, config.beta1)
}

pub fn energy_step(
    state: &SolverState,
    g: &ComplexField,
    config: &SolverConfig,
    spec: &PropagationSpec,
) -> Result<Vec<f64>> {
    let propagator = Propagator::for_field(*spec, g)?;
    let a = phase_direction(g, config, &propagator)?;
    energy_from_direction(&state.v, &a, config.beta2)
}

fn momentum_from_direction(m: &ComplexField, a: &ComplexField, beta1: f64) -> Result<ComplexField> {
    m.zip_with(a, |m, a| m * beta1 + a)
}

fn energy_from_direction(v: &[f64], a: &ComplexField, beta2: f64) -> Result<Vec<f64>> {
    if v.len() != a.len() {
        return Err(Error::param("v", format!("{} entries for {} samples", v.len(), a.len())));
    }
    Ok(v.iter()
        .zip(a.data())
        .map(|(v, a)| beta2 * v + a.norm_sqr())
        .collect())
}

/// `(m - K * r_prev) / (sqrt(v) + eps)`, pointwise with a real denominator.
pub fn update_increment(state: &SolverState, config: &SolverConfig) -> Result<ComplexField> {
    let kernel = config.kernel()?;
    increment_with_kernel(state, &kernel, config.epsilon)
}

fn increment_with_kernel(
    state: &SolverState,
    kernel: &GaussianKernel,
    epsilon: f64,
) -> Result<ComplexField> {
    let (w, h) = state.m.shape();
    state.m.ensure_same_shape(&state.prev_residual)?;
    let smoothed = kernel.convolve_complex(state.prev_residual.data(), w, h);
    Ok(state.m.with_data(
        state
            .m
            .data()
            .iter()
            .zip(&smoothed)
            .zip(&state.v)
            .map(|((m, s), v)| (m - s) / (v.sqrt() + epsilon))
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub field: ComplexField,
    /// Objective at the projected start point.
    pub initial_objective: f64,
    /// Objective at the projected iterate after each phase; the last entry is
    /// the objective of `field`.
    pub phase_objectives: [f64; PHASES],
}

/// Runs exactly three phases from `psi0` and returns the projected result.
pub fn run_triwcp(
    psi0: &ComplexField,
    objective: &IntensityObjective,
    config: &SolverConfig,
) -> Result<SolverOutcome> {
    config.validate()?;
    let propagator = objective.propagator();
    let kernel = config.kernel()?;

    let initial_objective = objective.value(&propagator.project(psi0)?)?;
    let mut state = SolverState::new(psi0.clone());
    let mut phase_objectives = [0.0; PHASES];

    for phase in 1..=PHASES {
        let at = if config.project_iterates {
            propagator.project(&state.psi)?
        } else {
            state.psi.clone()
        };
        let g = objective.gradient(&at)?;
        let residual = propagator.reject(&g)?;
        let a = phase_direction(&g, config, propagator)?;
        state.m = momentum_from_direction(&state.m, &a, config.beta1)?;
        state.v = energy_from_direction(&state.v, &a, config.beta2)?;
        let delta = increment_with_kernel(&state, &kernel, config.epsilon)?;
        let step = C64::new(config.gamma[phase - 1], 0.0);
        state.psi = state.psi.zip_with(&delta, |p, d| p - d * step)?;
        state.prev_residual = residual;
        state.t = phase;

        if state.psi.check_finite().is_err() || state.v.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverDiverged { phase });
        }
        phase_objectives[phase - 1] = objective.value(&propagator.project(&state.psi)?)?;
        if !phase_objectives[phase - 1].is_finite() {
            return Err(Error::SolverDiverged { phase });
        }
    }

    Ok(SolverOutcome {
        field: propagator.project(&state.psi)?,
        initial_objective,
        phase_objectives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PITCH: f64 = 10e-6;

    fn spec() -> PropagationSpec {
        PropagationSpec::new(633e-9, 0.02).unwrap()
    }

    fn random_field(w: usize, h: usize, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexField::from_fn(w, h, PITCH, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            beta1: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            gamma: [1.0, 0.0, 1.0],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let k = SolverConfig::default().kernel().unwrap();
        assert!((k.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_json_keys() {
        let c: SolverConfig = serde_json::from_str(
            r#"{"beta1": 0.5, "beta2": 0.9, "gamma": [0.1, 0.2, 0.3], "epsilon": 1e-6,
                "smoothing_sigma_px": 1.0, "smoothing_radius_px": 2}"#,
        )
        .unwrap();
        assert_eq!(c.gamma, [0.1, 0.2, 0.3]);
        assert_eq!(c.direction, SearchDirection::Admissible);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"gamma": [1.0, 2.0]}"#).is_err());
        assert!(serde_json::from_str::<SolverConfig>(r#"{"bogus": 1}"#).is_err());
        let c: SolverConfig = serde_json::from_str(r#"{"propagator": {"adjoint_chain": 2}}"#).unwrap();
        assert_eq!(c.propagator, GeneralizedPropagator::AdjointChain(2));
    }

    #[test]
    fn stationary_point_has_zero_gradient() {
        let psi = random_field(16, 16, 1);
        let obj = IntensityObjective::consistent_with(&psi, spec()).unwrap();
        let g = obj.gradient(&psi).unwrap();
        assert!(g.data().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn gradient_is_cubic_for_zero_measurement() {
        let psi = random_field(8, 8, 2);
        let obj = IntensityObjective::new(vec![0.0; 64], 8, 8, PITCH, spec()).unwrap();
        let g1 = obj.gradient(&psi).unwrap();
        let g2 = obj.gradient(&psi.scale(C64::new(2.0, 0.0))).unwrap();
        let diff = g2.sub(&g1.scale(C64::new(8.0, 0.0))).unwrap().l2_norm();
        assert!(diff <= 1e-12 * g2.l2_norm());
    }

    #[test]
    fn objective_rejects_bad_measurements() {
        assert!(IntensityObjective::new(vec![-1.0; 4], 2, 2, PITCH, spec()).is_err());
        assert!(IntensityObjective::new(vec![0.0; 3], 2, 2, PITCH, spec()).is_err());
        assert!(IntensityObjective::new(vec![f64::NAN; 4], 2, 2, PITCH, spec()).is_err());
    }

    #[test]
    fn residual_decomposition() {
        let s = spec();
        let g = random_field(16, 16, 3);
        let p = Propagator::for_field(s, &g).unwrap();
        let r = residual(&g, &s).unwrap();
        assert!(p.in_band_mass(&r).unwrap() <= 1e-12 * g.l2_norm());
        let pg = p.project(&g).unwrap();
        assert!(r.inner_product(&pg).unwrap().norm() <= 1e-10 * g.norm_sqr());
        assert!(residual(&pg, &s).unwrap().l2_norm() <= 1e-12 * g.l2_norm());
        let back = residual(&r, &s).unwrap();
        assert!(back.sub(&r).unwrap().l2_norm() <= 1e-12 * r.l2_norm());
    }

    #[test]
    fn first_increment_is_momentum_over_epsilon() {
        let cfg = SolverConfig::default();
        let mut st = SolverState::new(random_field(6, 6, 4));
        st.m = random_field(6, 6, 5);
        let d = update_increment(&st, &cfg).unwrap();
        let expect = st.m.scale(C64::new(1.0 / cfg.epsilon, 0.0));
        assert!(d.sub(&expect).unwrap().l2_norm() <= 1e-12 * expect.l2_norm());
    }

    #[test]
    fn impulse_residual_gives_negative_kernel() {
        let cfg = SolverConfig::default();
        let (w, h) = (11, 11);
        let mut st = SolverState::new(ComplexField::zeros(w, h, PITCH).unwrap());
        let mut data = vec![C64::new(0.0, 0.0); w * h];
        data[5 * w + 5] = C64::new(1.0, 0.0);
        st.prev_residual = ComplexField::new(w, h, PITCH, data).unwrap();
        let d = update_increment(&st, &cfg).unwrap();
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 - 5.0, y as f64 - 5.0);
                let expect = if dx.abs() <= 3.0 && dy.abs() <= 3.0 {
                    // Analytic separable weight of the renormalized sigma=1.5, r=3 kernel.
                    let norm: f64 = (-3..=3).map(|k| (-((k * k) as f64) / 4.5).exp()).sum();
                    -((-(dx * dx) / 4.5).exp() / norm) * ((-(dy * dy) / 4.5).exp() / norm) / cfg.epsilon
                } else {
                    0.0
                };
                let got = d.get(x, y);
                assert!((got.re - expect).abs() <= 1e-12 * expect.abs().max(1.0), "{x},{y}");
                assert_eq!(got.im, 0.0);
            }
        }
    }

    #[test]
    fn uniform_energy_divides_pointwise() {
        let cfg = SolverConfig::default();
        let c = 0.3;
        let m0 = C64::new(0.4, -0.2);
        let mut st = SolverState::new(ComplexField::zeros(5, 4, PITCH).unwrap());
        st.m = st.m.map(|_| m0);
        st.v = vec![c * c; 20];
        let d = update_increment(&st, &cfg).unwrap();
        for z in d.data() {
            assert!((z - m0 / (c + cfg.epsilon)).norm() < 1e-15);
        }
    }

    #[test]
    fn memoryless_and_zero_gradient_limits() {
        let s = spec();
        let cfg = SolverConfig {
            beta1: 0.0,
            beta2: 0.0,
            direction: SearchDirection::Residual,
            propagator: GeneralizedPropagator::Adjoint,
            ..Default::default()
        };
        let g = random_field(8, 8, 6);
        let mut st = SolverState::new(random_field(8, 8, 7));
        st.m = random_field(8, 8, 8);
        st.v = vec![5.0; 64];
        let m = momentum_step(&st, &g, &cfg, &s).unwrap();
        let expect = adjoint(&residual(&g, &s).unwrap(), &s);
        assert!(m.sub(&expect).unwrap().l2_norm() <= 1e-14);
        let v = energy_step(&st, &g, &cfg, &s).unwrap();
        for (v, e) in v.iter().zip(expect.data()) {
            assert!((v - e.norm_sqr()).abs() <= 1e-14);
        }

        let zero = ComplexField::zeros(8, 8, PITCH).unwrap();
        let st = SolverState::new(zero.clone());
        let cfg = SolverConfig::default();
        assert!(momentum_step(&st, &zero, &cfg, &s).unwrap().l2_norm() == 0.0);
        assert!(energy_step(&st, &zero, &cfg, &s).unwrap().iter().all(|&v| v == 0.0));
    }

    fn adjoint(f: &ComplexField, s: &PropagationSpec) -> ComplexField {
        crate::fresnel::adjoint_propagate(f, s).unwrap()
    }

    #[test]
    fn adjoint_of_residual_vanishes() {
        // T^dagger multiplies by the passband indicator, so it annihilates
        // anything already outside the band.
        let s = spec();
        let g = random_field(16, 16, 9);
        let a = adjoint(&residual(&g, &s).unwrap(), &s);
        assert!(a.l2_norm() <= 1e-12 * g.l2_norm());
    }

    #[test]
    fn zero_gradient_objective_returns_projection() {
        let psi0 = random_field(16, 16, 10);
        let obj = IntensityObjective::consistent_with(&psi0, spec()).unwrap();
        let out = run_triwcp(&psi0, &obj, &SolverConfig::default()).unwrap();
        let expect = obj.propagator().project(&psi0).unwrap();
        assert_eq!(out.field, expect);
    }

    #[test]
    fn output_is_band_limited_and_deterministic() {
        let psi0 = random_field(16, 16, 11);
        let truth = random_field(16, 16, 12);
        let obj = IntensityObjective::consistent_with(&truth, spec()).unwrap();
        let cfg = SolverConfig::default();
        let a = run_triwcp(&psi0, &obj, &cfg).unwrap();
        let b = run_triwcp(&psi0, &obj, &cfg).unwrap();
        assert_eq!(a, b);
        let p = obj.propagator();
        assert!(p.out_of_band_mass(&a.field).unwrap() <= 1e-12 * a.field.l2_norm());
        let again = p.project(&a.field).unwrap();
        assert!(again.sub(&a.field).unwrap().l2_norm() <= 1e-12 * a.field.l2_norm());
    }

    #[test]
    fn divergence_reports_phase() {
        let psi0 = random_field(8, 8, 13);
        let obj = IntensityObjective::new(vec![0.0; 64], 8, 8, PITCH, spec()).unwrap();
        let cfg = SolverConfig {
            gamma: [1e300, 1e300, 1e300],
            ..Default::default()
        };
        match run_triwcp(&psi0, &obj, &cfg) {
            Err(Error::SolverDiverged { phase }) => assert!((1..=3).contains(&phase)),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
