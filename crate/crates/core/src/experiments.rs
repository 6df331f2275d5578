//! Numerical studies: dynamics traces, the time and depth of maximum
//! squeezing, their scaling with `J` and `S`, robustness against the
//! `Jz Sz` perturbation, and the one-axis-twisting baseline.
//!
//! Every time in this module is the dimensionless `alpha t`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::algebra::{build_spin_operators, x_polarized_state, ProductSpace, QuantumState, SpinQuantum};
use crate::error::{Error, Result};
use crate::fit::{golden_section_minimize, power_law_fit};
use crate::hamiltonian::{build_ku_hamiltonian, build_swap_hamiltonian, ModelParams};
use crate::observables::{
    schmidt_spectrum, spin_moments, squeezing_ratio_from, xi_squared_from, LiftedSpin, SpinMoments, SqueezingReport,
};
use crate::propagate::{
    resolve_method, sample_times, KrylovPropagator, Method, PropagatorConfig, SpectralCoefficients, SpectralPropagator,
};
use crate::sparse::SparseMatrix;

/// Relative time tolerance of the golden-section refinement of `t*`.
pub const REFINE_RTOL: f64 = 1e-4;
/// Transverse spin components below `NOISE_FLOOR_PER_SPIN * S` are numerical noise.
pub const NOISE_FLOOR_PER_SPIN: f64 = 1e-9;

/// Rescales `params` so the swap coupling has unit magnitude, making the
/// evolution time `|alpha| t`. With `alpha = 0` the parameters are kept.
pub fn scaled_params(params: ModelParams) -> ModelParams {
    if params.alpha == 0.0 {
        params
    } else {
        let a = params.alpha.abs();
        ModelParams::new(params.alpha / a, params.beta / a)
    }
}

fn check_horizon(t_max: f64) -> Result<()> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidConfig(format!("t_max must be positive, got {t_max}")));
    }
    Ok(())
}

enum Engine<'h> {
    Spectral {
        prop: SpectralPropagator,
        coeffs: SpectralCoefficients,
    },
    Krylov { prop: KrylovPropagator<'h> },
}

/// A fixed initial state under a fixed Hamiltonian, sampled at arbitrary times.
struct Evolution<'h> {
    space: ProductSpace,
    state0: QuantumState,
    engine: Engine<'h>,
    method: Method,
}

impl<'h> Evolution<'h> {
    fn new(state0: &QuantumState, h: &'h SparseMatrix, cfg: &PropagatorConfig) -> Result<Self> {
        cfg.validate()?;
        let method = resolve_method(h, cfg)?;
        let engine = match method {
            Method::Krylov => Engine::Krylov {
                prop: KrylovPropagator::from_config(h, cfg)?,
            },
            _ => {
                let prop = SpectralPropagator::new(h)?;
                let coeffs = prop.project(state0.amplitudes())?;
                Engine::Spectral { prop, coeffs }
            }
        };
        Ok(Self {
            space: state0.space(),
            state0: state0.clone(),
            engine,
            method,
        })
    }

    fn state_at(&mut self, t: f64) -> Result<QuantumState> {
        if t == 0.0 {
            return Ok(self.state0.clone());
        }
        let amplitudes = match &mut self.engine {
            Engine::Spectral { prop, coeffs } => prop.evaluate(coeffs, t),
            Engine::Krylov { prop } => prop.propagate(self.state0.amplitudes(), t)?,
        };
        Ok(QuantumState::renormalized(self.space, amplitudes)?.0)
    }

    /// Applies `measure` at each of `times` (increasing), returning the
    /// measurement and the norm drift of the raw propagated vector.
    fn sample<T, F>(&mut self, times: &[f64], measure: F) -> Result<Vec<(T, f64)>>
    where
        T: Send,
        F: Fn(&QuantumState) -> Result<T> + Sync,
    {
        let space = self.space;
        let state0 = &self.state0;
        match &mut self.engine {
            Engine::Spectral { prop, coeffs } => {
                let (prop, coeffs) = (&*prop, &*coeffs);
                times
                    .par_iter()
                    .map(|&t| {
                        if t == 0.0 {
                            return Ok((measure(state0)?, state0.norm() - 1.0));
                        }
                        let (state, norm) = QuantumState::renormalized(space, prop.evaluate(coeffs, t))?;
                        Ok((measure(&state)?, norm - 1.0))
                    })
                    .collect()
            }
            Engine::Krylov { prop, .. } => {
                let mut out = Vec::with_capacity(times.len());
                let mut current = state0.amplitudes().to_vec();
                let mut t_prev = 0.0;
                for &t in times {
                    if t == 0.0 {
                        out.push((measure(state0)?, state0.norm() - 1.0));
                        continue;
                    }
                    let (state, norm) = QuantumState::renormalized(space, prop.propagate(&current, t - t_prev)?)?;
                    out.push((measure(&state)?, norm - 1.0));
                    current = state.into_amplitudes();
                    t_prev = t;
                }
                Ok(out)
            }
        }
    }
}

/// Observables conserved by the swap Hamiltonian with the diagonal perturbation.
struct ConservedProbe<'h> {
    h: &'h SparseMatrix,
    difference: SparseMatrix,
}

impl<'h> ConservedProbe<'h> {
    fn new(space: ProductSpace, h: &'h SparseMatrix) -> Result<Self> {
        let jz = space.lift_field(&build_spin_operators(space.field).z)?;
        let sz = space.lift_spin(&build_spin_operators(space.spin).z)?;
        Ok(Self {
            h,
            difference: jz.try_sub(&sz)?,
        })
    }

    fn measure(&self, state: &QuantumState) -> (f64, f64) {
        let psi = state.amplitudes();
        (self.h.expectation(psi).re, self.difference.expectation(psi).re)
    }
}

/// Largest absolute row sum, an upper bound on the spectral norm.
fn operator_scale(h: &SparseMatrix) -> f64 {
    (0..h.nrows())
        .map(|r| h.row(r).map(|(_, v)| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Worst deviations of the conserved quantities along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct ConservationCheck {
    /// `max |‖psi(t)‖ - 1|` before renormalization.
    pub max_norm_drift: f64,
    /// `max |<H>(t) - <H>(0)|` divided by `energy_scale`.
    pub max_energy_drift: f64,
    /// `max |<Jz - Sz>(t) - <Jz - Sz>(0)|`.
    pub max_difference_drift: f64,
    /// Row-sum bound on `‖H‖₂`.
    pub energy_scale: f64,
}

impl ConservationCheck {
    fn from_samples(initial: (f64, f64), scale: f64, samples: impl Iterator<Item = (f64, f64, f64)>) -> Self {
        let mut check = Self {
            energy_scale: scale,
            ..Self::default()
        };
        let mut max_energy = 0.0f64;
        for (energy, difference, norm_drift) in samples {
            check.max_norm_drift = check.max_norm_drift.max(norm_drift.abs());
            max_energy = max_energy.max((energy - initial.0).abs());
            check.max_difference_drift = check.max_difference_drift.max((difference - initial.1).abs());
        }
        check.max_energy_drift = if scale > 0.0 { max_energy / scale } else { max_energy };
        check
    }

    pub fn within(&self, norm_tol: f64, energy_tol: f64, difference_tol: f64) -> bool {
        self.max_norm_drift <= norm_tol
            && self.max_energy_drift <= energy_tol
            && self.max_difference_drift <= difference_tol
    }
}

/// One sample of a dynamics run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsRecord {
    pub alpha_t: f64,
    pub moments: SpinMoments,
    pub report: SqueezingReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct DynamicsRun {
    pub space: ProductSpace,
    pub params: ModelParams,
    pub method: Method,
    pub records: Vec<DynamicsRecord>,
    pub conservation: ConservationCheck,
}

impl DynamicsRun {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.alpha_t).collect()
    }

    /// `r(t)` with undefined samples as NaN.
    pub fn r_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.report.r.unwrap_or(f64::NAN)).collect()
    }

    pub fn xi2_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.report.xi2.unwrap_or(f64::NAN)).collect()
    }
}

struct Measured {
    moments: SpinMoments,
    schmidt: Option<Vec<f64>>,
    energy: f64,
    difference: f64,
}

struct Observed {
    times: Vec<f64>,
    samples: Vec<Measured>,
    conservation: ConservationCheck,
}

/// Evolves `x ⊗ x` under the rescaled swap Hamiltonian and measures every
/// sample; `full` adds the Schmidt spectrum. `then` gets the measured series
/// and an off-grid evaluator of `r`.
fn observe<T>(
    space: ProductSpace,
    params: ModelParams,
    t_max: f64,
    cfg: &PropagatorConfig,
    full: bool,
    then: impl FnOnce(&Observed, &mut dyn FnMut(f64) -> f64) -> T,
) -> Result<(Observed, Method, T)> {
    check_horizon(t_max)?;
    cfg.validate()?;
    let h = build_swap_hamiltonian(space, scaled_params(params));
    let state0 = x_polarized_state(space);
    let ops = LiftedSpin::new(space);
    let probe = ConservedProbe::new(space, &h)?;
    let mut evolution = Evolution::new(&state0, &h, cfg)?;
    let times = sample_times(t_max, cfg.dt);
    let raw = evolution.sample(&times, |state| {
        let moments = spin_moments(state, &ops)?;
        let schmidt = if full { Some(schmidt_spectrum(state)?) } else { None };
        let (energy, difference) = probe.measure(state);
        Ok(Measured {
            moments,
            schmidt,
            energy,
            difference,
        })
    })?;
    let conservation = ConservationCheck::from_samples(
        probe.measure(&state0),
        operator_scale(&h),
        raw.iter().map(|(m, drift)| (m.energy, m.difference, *drift)),
    );
    let observed = Observed {
        times,
        samples: raw.into_iter().map(|(m, _)| m).collect(),
        conservation,
    };
    let method = evolution.method;
    let mut r_at = |t: f64| {
        evolution
            .state_at(t)
            .and_then(|s| spin_moments(&s, &ops))
            .and_then(|m| squeezing_ratio_from(&m))
            .unwrap_or(f64::NAN)
    };
    let out = then(&observed, &mut r_at);
    Ok((observed, method, out))
}

/// Full observable time series of the `x ⊗ x` product state under the swap
/// Hamiltonian, sampled every `cfg.dt` up to `t_max`.
pub fn run_dynamics(
    spin: SpinQuantum,
    field: SpinQuantum,
    params: ModelParams,
    t_max: f64,
    cfg: &PropagatorConfig,
) -> Result<DynamicsRun> {
    let space = ProductSpace::new(spin, field);
    let (observed, method, ()) = observe(space, params, t_max, cfg, true, |_, _| ())?;
    let records = observed
        .times
        .iter()
        .zip(&observed.samples)
        .map(|(&alpha_t, m)| DynamicsRecord {
            alpha_t,
            moments: m.moments,
            report: SqueezingReport::from_moments(&m.moments, spin, m.schmidt.as_deref().unwrap_or(&[1.0])),
        })
        .collect();
    Ok(DynamicsRun {
        space,
        params,
        method,
        records,
        conservation: observed.conservation,
    })
}

/// Which local minimum of `r(t)` counts as maximum squeezing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimumKind {
    /// The earliest local minimum below 1.
    #[default]
    First,
    /// The lowest local minimum below 1 within the window.
    Deepest,
}

impl std::str::FromStr for MinimumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Self::First),
            "deepest" => Ok(Self::Deepest),
            other => Err(Error::InvalidConfig(format!("unknown minimum kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingMinimum {
    pub t_star: f64,
    pub r_min: f64,
    /// Grid sample the refinement started from.
    pub grid_index: usize,
}

/// Grid local minima below 1 as `(index, index of the next differing sample)`.
/// A minimum is strictly below its left neighbour and strictly below the
/// first later sample that differs from it; plateaus resolve to their start.
fn grid_minima(r: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for k in 1..r.len().saturating_sub(1) {
        if !(r[k] < 1.0 && r[k] < r[k - 1]) {
            continue;
        }
        let mut j = k + 1;
        while j < r.len() && r[j] == r[k] {
            j += 1;
        }
        if j < r.len() && r[j] > r[k] {
            out.push((k, j));
        }
    }
    out
}

/// Locates `t*` on the grid `(times, r)` and refines it by golden-section
/// search of `eval` on the bracketing samples.
pub fn find_t_star<F>(times: &[f64], r: &[f64], kind: MinimumKind, mut eval: F) -> Result<SqueezingMinimum>
where
    F: FnMut(f64) -> f64,
{
    if times.len() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: r.len(),
        });
    }
    let t_max = times.last().copied().unwrap_or(0.0);
    let minima = grid_minima(r);
    let chosen = match kind {
        MinimumKind::First => minima.first().copied(),
        MinimumKind::Deepest => minima.iter().copied().min_by(|a, b| r[a.0].total_cmp(&r[b.0])),
    };
    let (k, right) = chosen.ok_or(Error::NoSqueezing { t_max })?;
    let tol = REFINE_RTOL * times[k];
    let (t, value) = golden_section_minimize(&mut eval, times[k - 1], times[right], tol);
    Ok(if value <= r[k] {
        SqueezingMinimum {
            t_star: t,
            r_min: value,
            grid_index: k,
        }
    } else {
        SqueezingMinimum {
            t_star: times[k],
            r_min: r[k],
            grid_index: k,
        }
    })
}

/// `r(t)` on the sample grid, without the entanglement measures.
#[derive(Debug, Clone, Serialize)]
pub struct SqueezingSeries {
    pub space: ProductSpace,
    pub params: ModelParams,
    pub times: Vec<f64>,
    /// NaN where `r` is undefined.
    pub r: Vec<f64>,
    pub conservation: ConservationCheck,
    /// Refined minimum, `None` if `r` never dips below 1 at an interior minimum.
    pub minimum: Option<SqueezingMinimum>,
}

impl SqueezingSeries {
    /// Largest grid value of `r` strictly before `t*`.
    pub fn max_r_before_t_star(&self) -> Option<f64> {
        let t_star = self.minimum?.t_star;
        self.times
            .iter()
            .zip(&self.r)
            .filter(|(t, r)| **t < t_star && !r.is_nan())
            .map(|(_, r)| *r)
            .reduce(f64::max)
    }
}

/// Runs the swap dynamics and locates the squeezing minimum of `r(t)`.
pub fn squeezing_series(
    spin: SpinQuantum,
    field: SpinQuantum,
    params: ModelParams,
    t_max: f64,
    cfg: &PropagatorConfig,
    kind: MinimumKind,
) -> Result<SqueezingSeries> {
    let space = ProductSpace::new(spin, field);
    let mut r = Vec::new();
    let (observed, _, found) = observe(space, params, t_max, cfg, false, |obs, eval| {
        r = obs
            .samples
            .iter()
            .map(|m| squeezing_ratio_from(&m.moments).unwrap_or(f64::NAN))
            .collect();
        find_t_star(&obs.times, &r, kind, eval)
    })?;
    let minimum = match found {
        Ok(m) => Some(m),
        Err(Error::NoSqueezing { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SqueezingSeries {
        space,
        params,
        times: observed.times,
        r,
        conservation: observed.conservation,
        minimum,
    })
}

/// The swept quantum number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    S,
    J,
}

/// How the other quantum number follows the swept one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partner {
    Fixed(SpinQuantum),
    /// `J / S` held at this value.
    Ratio(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<SpinQuantum>,
    pub partner: Partner,
    pub params: ModelParams,
    pub t_max: f64,
    pub dt: f64,
    pub propagator: PropagatorConfig,
    pub minimum: MinimumKind,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, values: Vec<SpinQuantum>, partner: Partner, t_max: f64, dt: f64) -> Self {
        Self {
            variable,
            values,
            partner,
            params: ModelParams::default(),
            t_max,
            dt,
            propagator: PropagatorConfig::default(),
            minimum: MinimumKind::First,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("sweep values must be strictly increasing".into()));
        }
        check_horizon(self.t_max)?;
        self.propagator.with_dt(self.dt).validate()?;
        if let Partner::Ratio(q) = self.partner {
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::InvalidConfig(format!("J/S ratio must be positive, got {q}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        for &v in &self.values {
            self.point(v)?;
        }
        Ok(())
    }

    /// The joint space of one sweep point.
    pub fn point(&self, value: SpinQuantum) -> Result<ProductSpace> {
        let other = match self.partner {
            Partner::Fixed(q) => q,
            Partner::Ratio(ratio) => {
                let factor = match self.variable {
                    SweepVariable::S => ratio,
                    SweepVariable::J => 1.0 / ratio,
                };
                let twice = f64::from(value.two_s()) * factor;
                let rounded = twice.round();
                if (twice - rounded).abs() > 1e-9 * twice.max(1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "ratio {ratio} maps {} = {value} to a non-half-integer spin",
                        match self.variable {
                            SweepVariable::S => "S",
                            SweepVariable::J => "J",
                        }
                    )));
                }
                SpinQuantum::from_twice(rounded as u32)
            }
        };
        Ok(match self.variable {
            SweepVariable::S => ProductSpace::new(value, other),
            SweepVariable::J => ProductSpace::new(other, value),
        })
    }
}

/// Quantity regressed against the swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepResponse {
    TStar,
    RMin,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Swept spin quantum number.
    pub param: f64,
    pub space: ProductSpace,
    pub t_star: f64,
    pub r_min: f64,
    pub conservation: ConservationCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub response: SweepResponse,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln response` against `ln param`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

impl SweepResult {
    pub fn responses(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| match self.response {
                SweepResponse::TStar => row.t_star,
                SweepResponse::RMin => row.r_min,
            })
            .collect()
    }

    /// `(max - min) / min` of the response.
    pub fn relative_spread(&self) -> f64 {
        let values = self.responses();
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        (max - min) / min
    }
}

fn sweep_point(spec: &SweepSpec, value: SpinQuantum) -> Result<SweepRow> {
    let space = spec.point(value)?;
    let cfg = spec.propagator.with_dt(spec.dt);
    let series = squeezing_series(space.spin, space.field, spec.params, spec.t_max, &cfg, spec.minimum)?;
    let minimum = series.minimum.ok_or(Error::NoSqueezing { t_max: spec.t_max })?;
    Ok(SweepRow {
        param: value.value(),
        space,
        t_star: minimum.t_star,
        r_min: minimum.r_min,
        conservation: series.conservation,
    })
}

/// Runs every point of `spec` on a worker pool and fits the response.
pub fn run_sweep(spec: &SweepSpec, response: SweepResponse) -> Result<SweepResult> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<SweepRow>> =
        pool.install(|| spec.values.par_iter().map(|&v| sweep_point(spec, v)).collect());
    let mut rows = Vec::with_capacity(outcomes.len());
    for (value, outcome) in spec.values.iter().zip(outcomes) {
        rows.push(outcome.map_err(|source| Error::SweepPoint {
            param: value.value(),
            source: Box::new(source),
        })?);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.param).collect();
    let ys: Vec<f64> = rows
        .iter()
        .map(|r| match response {
            SweepResponse::TStar => r.t_star,
            SweepResponse::RMin => r.r_min,
        })
        .collect();
    let fit = power_law_fit(&xs, &ys)?;
    Ok(SweepResult {
        variable: spec.variable,
        response,
        rows,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        residuals: fit.residuals,
    })
}

/// Time of maximum squeezing against the swept quantum number.
pub fn sweep_t_star_vs_j(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep(spec, SweepResponse::TStar)
}

/// Depth of maximum squeezing against the swept quantum number.
pub fn sweep_rmin_vs_s(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep(spec, SweepResponse::RMin)
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationRun {
    pub beta: f64,
    pub series: SqueezingSeries,
    pub max_r_before_t_star: Option<f64>,
}

/// `r(t)` for each perturbation strength `beta` at fixed swap coupling `alpha`.
pub fn perturbation_study(
    spin: SpinQuantum,
    field: SpinQuantum,
    alpha: f64,
    betas: &[f64],
    t_max: f64,
    cfg: &PropagatorConfig,
) -> Result<Vec<PerturbationRun>> {
    betas
        .iter()
        .map(|&beta| {
            let series = squeezing_series(spin, field, ModelParams::new(alpha, beta), t_max, cfg, MinimumKind::First)?;
            Ok(PerturbationRun {
                beta,
                max_r_before_t_star: series.max_r_before_t_star(),
                series,
            })
        })
        .collect()
}

/// Aligned mean-spin traces of the swap and one-axis-twisting models.
#[derive(Debug, Clone, Serialize)]
pub struct KuComparison {
    pub spin: SpinQuantum,
    pub field: SpinQuantum,
    pub times: Vec<f64>,
    pub swap_mean: Vec<[f64; 3]>,
    pub ku_mean: Vec<[f64; 3]>,
    /// `S cos^(2S-1)(alpha t)`.
    pub ku_analytic_sx: Vec<f64>,
    /// NaN where undefined.
    pub ku_xi2: Vec<f64>,
    pub ku_max_deviation: f64,
    pub ku_transverse_max: f64,
    pub swap_transverse_max: f64,
    pub noise_floor: f64,
    /// Dominant frequency (cycles per unit `alpha t`) of the swap transverse
    /// components, when they rise above the noise floor.
    pub swap_transverse_frequency: Option<f64>,
    pub note: Option<String>,
}

pub fn ku_analytic_sx(spin: SpinQuantum, alpha_t: f64) -> f64 {
    if spin.two_s() == 0 {
        return 0.0;
    }
    spin.value() * alpha_t.cos().powi(spin.two_s() as i32 - 1)
}

fn mean_trace(
    space: ProductSpace,
    h: &SparseMatrix,
    times: &[f64],
    cfg: &PropagatorConfig,
) -> Result<Vec<SpinMoments>> {
    let ops = LiftedSpin::new(space);
    let state0 = x_polarized_state(space);
    let mut evolution = Evolution::new(&state0, h, cfg)?;
    Ok(evolution
        .sample(times, |state| spin_moments(state, &ops))?
        .into_iter()
        .map(|(m, _)| m)
        .collect())
}

/// Runs the swap model on `(S, J)` and the one-axis-twisting model on the
/// spin alone, both from the `x`-polarized spin state.
pub fn ku_comparison(
    spin: SpinQuantum,
    field: SpinQuantum,
    alpha: f64,
    t_max: f64,
    cfg: &PropagatorConfig,
) -> Result<KuComparison> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidConfig("the comparison needs a nonzero alpha".into()));
    }
    check_horizon(t_max)?;
    cfg.validate()?;
    let times = sample_times(t_max, cfg.dt);
    let sign = alpha.signum();

    let swap_space = ProductSpace::new(spin, field);
    let swap_h = build_swap_hamiltonian(swap_space, ModelParams::swap_only(sign));
    let swap = mean_trace(swap_space, &swap_h, &times, cfg)?;

    // A spin-0 field factor has dimension 1, so the joint space is the spin space.
    let ku_space = ProductSpace::new(spin, SpinQuantum::from_twice(0));
    let ku_h = build_ku_hamiltonian(spin, sign);
    let ku = mean_trace(ku_space, &ku_h, &times, cfg)?;

    let ku_analytic: Vec<f64> = times.iter().map(|&t| ku_analytic_sx(spin, t)).collect();
    let ku_max_deviation = ku
        .iter()
        .zip(&ku_analytic)
        .map(|(m, a)| (m.mean[0] - a).abs())
        .fold(0.0, f64::max);
    let transverse = |trace: &[SpinMoments]| {
        trace
            .iter()
            .map(|m| m.mean[1].abs().max(m.mean[2].abs()))
            .fold(0.0, f64::max)
    };
    let noise_floor = NOISE_FLOOR_PER_SPIN * spin.value();
    let swap_transverse_max = transverse(&swap);
    let (swap_transverse_frequency, note) = if swap_transverse_max > noise_floor {
        let sy: Vec<f64> = swap.iter().map(|m| m.mean[1]).collect();
        (dominant_frequency(&sy, cfg.dt), None)
    } else {
        (
            None,
            Some(format!(
                "swap transverse components stay below the noise floor {noise_floor:e} (max {swap_transverse_max:e}); frequency not resolved"
            )),
        )
    };
    Ok(KuComparison {
        spin,
        field,
        swap_mean: swap.iter().map(|m| m.mean).collect(),
        ku_mean: ku.iter().map(|m| m.mean).collect(),
        ku_xi2: ku.iter().map(|m| xi_squared_from(m, spin).unwrap_or(f64::NAN)).collect(),
        ku_analytic_sx: ku_analytic,
        ku_max_deviation,
        ku_transverse_max: transverse(&ku),
        swap_transverse_max,
        noise_floor,
        swap_transverse_frequency,
        note,
        times,
    })
}

/// Frequency (cycles per unit time) of the largest non-constant Fourier
/// component of uniformly sampled `samples`.
pub fn dominant_frequency(samples: &[f64], dt: f64) -> Option<f64> {
    let n = samples.len();
    if n < 4 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buffer: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let (k, peak) = buffer[1..=n / 2]
        .iter()
        .enumerate()
        .map(|(i, c)| (i + 1, c.norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    (peak > 0.0).then(|| k as f64 / (n as f64 * dt))
}

/// A squeezing curve together with its field spin and `t*`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledCurve<'a> {
    pub times: &'a [f64],
    pub r: &'a [f64],
    pub field: SpinQuantum,
    pub t_star: f64,
}

impl ScaledCurve<'_> {
    fn at_scaled(&self, x: f64) -> Option<f64> {
        let t = x / self.field.value();
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 || k >= self.times.len() {
            return (k == self.times.len() && (t - self.times[k - 1]).abs() < 1e-12).then(|| self.r[k - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        Some(self.r[k - 1] * (1.0 - w) + self.r[k] * w)
    }
}

/// RMS relative difference of two curves compared at equal `J alpha t`, over
/// the window before the earlier of the two scaled squeezing times.
pub fn scaled_collapse_rms(a: ScaledCurve<'_>, b: ScaledCurve<'_>) -> Result<f64> {
    let ja = a.field.value();
    let window = (ja * a.t_star).min(b.field.value() * b.t_star);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (&t, &ra) in a.times.iter().zip(a.r) {
        let x = ja * t;
        if x > window {
            break;
        }
        if let Some(rb) = b.at_scaled(x) {
            if ra.is_finite() && rb.is_finite() && rb != 0.0 {
                sum += ((ra - rb) / rb).powi(2);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InvalidConfig("curves share no samples before t*".into()));
    }
    Ok((sum / count as f64).sqrt())
}
