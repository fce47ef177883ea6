//! Local clocks `t ↦ e^{-itH}ψ` for the Hamiltonian forms this crate knows:
//! kinetic-plus-potential operators (Strang splitting), dense operators (exact
//! eigen-expansion), pure Fourier multipliers (exact phases), and the
//! second-order Klein–Gordon field equation (leapfrog).
//!
//! A negative `t_final` runs the clock backwards; snapshot times are then
//! decreasing.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit;
use crate::grid::{FourierMultiplier, Grid, Representation, WaveFunction};
use crate::linalg::{self, LinearOperator};
use crate::nbody::HamiltonianOperator;
use crate::spectral::{Evolver, SpectralData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SplitOperator,
    ExactDiagonal,
    DispersiveExact,
    KgLeapfrog,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::SplitOperator => "split_operator",
            Method::ExactDiagonal => "exact_diagonal",
            Method::DispersiveExact => "dispersive_exact",
            Method::KgLeapfrog => "kg_leapfrog",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorConfig {
    pub method: Method,
    /// Step size, always positive.
    pub dt: f64,
    /// Signed final time.
    pub t_final: f64,
    #[serde(default = "one")]
    pub record_every: usize,
    /// Halt when the outer-shell mass exceeds this threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_monitor: Option<f64>,
}

fn one() -> usize {
    1
}

/// Outer-shell mass above which a scattering run is considered contaminated by
/// the periodic wrap.
pub const DEFAULT_BOUNDARY_THRESHOLD: f64 = 1e-3;

impl PropagatorConfig {
    pub fn new(method: Method, dt: f64, t_final: f64) -> Self {
        Self { method, dt, t_final, record_every: 1, boundary_monitor: None }
    }

    pub fn recording_every(mut self, steps: usize) -> Self {
        self.record_every = steps;
        self
    }

    pub fn with_monitor(mut self, threshold: f64) -> Self {
        self.boundary_monitor = Some(threshold);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t_final.is_finite() || self.t_final.abs() < self.dt * (1.0 - 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "|t_final| = {} must be at least dt = {}",
                self.t_final.abs(),
                self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        if let Some(th) = self.boundary_monitor {
            if !(th > 0.0) {
                return Err(Error::InvalidConfig(format!("boundary monitor threshold must be positive, got {th}")));
            }
        }
        Ok(())
    }

    /// Number of steps; the step is shrunk so that they land on `t_final`.
    pub fn steps(&self) -> usize {
        ((self.t_final.abs() / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// Signed step actually taken.
    pub fn step(&self) -> f64 {
        self.t_final / self.steps() as f64
    }

    fn expect(&self, method: Method) -> Result<()> {
        self.validate()?;
        if self.method != method {
            return Err(Error::InvalidConfig(format!(
                "method {} requested from the {} integrator",
                self.method.as_str(),
                method.as_str()
            )));
        }
        Ok(())
    }
}

/// Snapshots of one run.
#[derive(Debug, Clone)]
pub struct Trajectory<S = Vec<Complex64>> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// Human-readable description of the generator and method.
    pub generator: String,
    /// Set when the states are position amplitudes on a grid.
    pub grid: Option<Grid>,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &S)> {
        self.times.last().copied().zip(self.states.last())
    }
}

impl Trajectory<Vec<Complex64>> {
    /// Norm of a state, using the grid's cell volume when there is a grid.
    pub fn state_norm(&self, state: &[Complex64]) -> f64 {
        let scale = self.grid.as_ref().map_or(1.0, |g| g.cell_volume());
        (linalg::norm_sqr(state) * scale).sqrt()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| self.state_norm(s)).collect()
    }

    pub fn wave_function(&self, index: usize) -> Option<WaveFunction> {
        let grid = self.grid.as_ref()?;
        WaveFunction::unnormalized(grid, self.states.get(index)?.clone(), Representation::Position).ok()
    }
}

fn run<S: Clone>(
    config: &PropagatorConfig,
    initial: S,
    generator: String,
    grid: Option<Grid>,
    mut advance: impl FnMut(&mut S, f64),
    shell_mass: impl Fn(&S) -> f64,
) -> (Trajectory<S>, Option<Error>) {
    let steps = config.steps();
    let dt = config.step();
    let mut traj = Trajectory { times: vec![0.0], states: vec![initial.clone()], generator, grid };
    let mut state = initial;
    for step in 1..=steps {
        let t = step as f64 * dt;
        advance(&mut state, t);
        if step % config.record_every == 0 || step == steps {
            traj.times.push(t);
            traj.states.push(state.clone());
            if let Some(threshold) = config.boundary_monitor {
                let mass = shell_mass(&state);
                if mass > threshold {
                    return (traj, Some(Error::MonitorTrip { time: t, mass, threshold }));
                }
            }
        }
    }
    (traj, None)
}

fn shell_mass(grid: &Grid, state: &[Complex64]) -> f64 {
    WaveFunction::unnormalized(grid, state.to_vec(), Representation::Position)
        .and_then(|w| w.boundary_mass())
        .unwrap_or(f64::INFINITY)
}

fn finish<S>((traj, err): (Trajectory<S>, Option<Error>)) -> Result<Trajectory<S>> {
    match err {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

fn require_position(psi: &WaveFunction) -> Result<()> {
    if psi.representation() != Representation::Position {
        return Err(Error::WrongRepresentation { expected: "position" });
    }
    Ok(())
}

/// Strang splitting `e^{-iδV/2} e^{-iδK} e^{-iδV/2}` per step.
pub fn evolve_split_operator(
    h: &HamiltonianOperator,
    psi: &WaveFunction,
    config: &PropagatorConfig,
) -> Result<Trajectory> {
    finish(evolve_split_operator_partial(h, psi, config)?)
}

/// Like [`evolve_split_operator`] but returns the snapshots taken before a
/// boundary-monitor trip together with the trip.
pub fn evolve_split_operator_partial(
    h: &HamiltonianOperator,
    psi: &WaveFunction,
    config: &PropagatorConfig,
) -> Result<(Trajectory, Option<Error>)> {
    config.expect(Method::SplitOperator)?;
    let gh = h.as_grid().ok_or(Error::NotSplittable)?;
    require_position(psi)?;
    if psi.grid() != gh.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = gh.grid().clone();
    let dt = config.step();
    let half_kick: Vec<Complex64> = gh.potential().iter().map(|v| Complex64::from_polar(1.0, -0.5 * dt * v)).collect();
    let drift: Vec<Complex64> = gh.kinetic().values().iter().map(|s| Complex64::from_polar(1.0, -dt * s)).collect();
    let potential_free = gh.potential().iter().all(|v| *v == 0.0);
    let generator = format!("split_operator(dt={dt})");
    Ok(run(
        config,
        psi.amplitudes().to_vec(),
        generator,
        Some(grid.clone()),
        |state, _| {
            if !potential_free {
                for (s, k) in state.iter_mut().zip(&half_kick) {
                    *s *= k;
                }
            }
            *state = grid.filter(state, |i| drift[i]);
            if !potential_free {
                for (s, k) in state.iter_mut().zip(&half_kick) {
                    *s *= k;
                }
            }
        },
        |s| shell_mass(&grid, s),
    ))
}

/// `ψ(t) = Σ_j e^{-itλ_j} ⟨v_j,ψ⟩ v_j` at every snapshot.
pub fn evolve_exact_diagonal(sd: &SpectralData, psi: &[Complex64], config: &PropagatorConfig) -> Result<Trajectory> {
    config.expect(Method::ExactDiagonal)?;
    if psi.len() != sd.dim() {
        return Err(Error::DimensionMismatch { expected: sd.dim(), got: psi.len() });
    }
    let coefficients = sd.coefficients(psi);
    let eigenvalues = sd.eigenvalues();
    let steps = config.steps();
    let dt = config.step();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![psi.to_vec()],
        generator: format!("exact_diagonal(n={})", sd.dim()),
        grid: None,
    };
    for step in (1..=steps).filter(|s| s % config.record_every == 0 || *s == steps) {
        let t = step as f64 * dt;
        let phased: Vec<Complex64> =
            coefficients.iter().zip(eigenvalues).map(|(c, l)| c * Complex64::from_polar(1.0, -l * t)).collect();
        traj.times.push(t);
        traj.states.push(sd.synthesize(&phased));
    }
    Ok(traj)
}

/// Exact evolution under a pure multiplier: momentum amplitudes pick up
/// `e^{-iω(k)t}`.
pub fn evolve_dispersive(
    symbol: &FourierMultiplier,
    psi: &WaveFunction,
    config: &PropagatorConfig,
) -> Result<Trajectory> {
    finish(evolve_dispersive_partial(symbol, psi, config)?)
}

pub fn evolve_dispersive_partial(
    symbol: &FourierMultiplier,
    psi: &WaveFunction,
    config: &PropagatorConfig,
) -> Result<(Trajectory, Option<Error>)> {
    config.expect(Method::DispersiveExact)?;
    require_position(psi)?;
    if psi.grid() != symbol.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = symbol.grid().clone();
    let initial = psi.amplitudes().to_vec();
    let start = initial.clone();
    Ok(run(
        config,
        initial,
        "dispersive_exact".to_string(),
        Some(grid.clone()),
        |state, t| {
            // from the initial state each time: no accumulated phase error
            *state = symbol.evolve(&start, t);
        },
        |s| shell_mass(&grid, s),
    ))
}

/// Real field `q` and its time derivative on a grid, for
/// `(1/c²) ∂²q/∂t² = Δq - c²μ² q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: Grid,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    /// Wave speed.
    pub c: f64,
    /// Mass parameter.
    pub mu: f64,
}

impl FieldState {
    pub fn new(grid: &Grid, q: Vec<f64>, qdot: Vec<f64>, c: f64, mu: f64) -> Result<Self> {
        for v in [&q, &qdot] {
            if v.len() != grid.len() {
                return Err(Error::DimensionMismatch { expected: grid.len(), got: v.len() });
            }
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!("wave speed must be positive, got {c}")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("mass must be non-negative, got {mu}")));
        }
        Ok(Self { grid: grid.clone(), q, qdot, c, mu })
    }

    /// `ω(k) = c·sqrt(|k|² + c²μ²)` at each momentum lattice point.
    pub fn frequencies(&self) -> Vec<f64> {
        let (c, mu) = (self.c, self.mu);
        self.grid.sample_momentum(|k| c * (k.iter().map(|k| k * k).sum::<f64>() + c * c * mu * mu).sqrt())
    }

    /// Largest lattice frequency.
    pub fn max_frequency(&self) -> f64 {
        let k = self.grid.k_max();
        self.c * (self.grid.dims() as f64 * k * k + self.c * self.c * self.mu * self.mu).sqrt()
    }

    /// Leapfrog stability limit with a 10% margin, `0.9 · 2/ω_max`.
    pub fn stable_step(&self) -> f64 {
        1.8 / self.max_frequency()
    }

    /// `½ ∫ (q̇² + c²|∇q|² + c⁴μ²q²) dx`, with the gradient taken spectrally.
    pub fn energy(&self) -> f64 {
        let h = self.grid.cell_volume();
        let kinetic: f64 = self.qdot.iter().map(|v| v * v).sum::<f64>() * h;
        let w2: Vec<f64> = self.frequencies().iter().map(|w| w * w).collect();
        let q: Vec<Complex64> = self.q.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let hat = self.grid.forward(&q);
        let potential: f64 =
            hat.iter().zip(&w2).map(|(v, w)| v.norm_sqr() * w).sum::<f64>() * self.grid.momentum_cell_volume();
        0.5 * (kinetic + potential)
    }

    /// `c²Δq - c⁴μ²q`.
    fn acceleration(&self, w2: &[Complex64]) -> Vec<f64> {
        let q: Vec<Complex64> = self.q.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.filter(&q, |i| w2[i]).iter().map(|v| v.re).collect()
    }
}

/// Velocity-Verlet leapfrog with a pseudospectral Laplacian.
pub fn evolve_klein_gordon(field: &FieldState, config: &PropagatorConfig) -> Result<Trajectory<FieldState>> {
    config.expect(Method::KgLeapfrog)?;
    let bound = field.stable_step();
    if config.dt > bound {
        return Err(Error::Unstable { dt: config.dt, bound });
    }
    let minus_w2: Vec<Complex64> = field.frequencies().iter().map(|w| Complex64::new(-w * w, 0.0)).collect();
    let dt = config.step();
    let mut accel = field.acceleration(&minus_w2);
    let (traj, _) = run(
        config,
        field.clone(),
        format!("kg_leapfrog(c={}, mu={}, dt={dt})", field.c, field.mu),
        None,
        |state, _| {
            for (v, a) in state.qdot.iter_mut().zip(&accel) {
                *v += 0.5 * dt * a;
            }
            for (q, v) in state.q.iter_mut().zip(&state.qdot) {
                *q += dt * v;
            }
            accel = state.acceleration(&minus_w2);
            for (v, a) in state.qdot.iter_mut().zip(&accel) {
                *v += 0.5 * dt * a;
            }
        },
        |_| 0.0,
    );
    Ok(traj)
}

impl Trajectory<FieldState> {
    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(FieldState::energy).collect()
    }

    /// `max |E(t) - E(0)| / E(0)`.
    pub fn max_energy_drift(&self) -> f64 {
        let e = self.energies();
        let e0 = e[0];
        e.iter().map(|v| (v - e0).abs() / e0.abs()).fold(0.0, f64::max)
    }
}

/// Centered-difference check of `(1/i) dψ/dt + Hψ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// Max over interior snapshots of the residual norm at spacing `δ`.
    pub max_residual: f64,
    pub spacing: f64,
    /// `log₂` of the residual ratio between spacings `2δ` and `δ`, when at
    /// least five snapshots are available.
    pub order: Option<f64>,
}

pub fn schrodinger_residual(traj: &Trajectory, h: &dyn LinearOperator) -> Result<ResidualReport> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::TooFewSnapshots { needed: 3, got: n });
    }
    let delta = traj.times[1] - traj.times[0];
    let uniform = traj.times.windows(2).all(|w| ((w[1] - w[0]) - delta).abs() <= 1e-9 * delta.abs());
    if delta == 0.0 || !uniform {
        return Err(Error::InvalidConfig("snapshots must be uniformly spaced".into()));
    }
    let residual = |i: usize, stride: usize| -> f64 {
        let d = stride as f64 * delta;
        let hpsi = h.apply(&traj.states[i]);
        let r: Vec<Complex64> = traj.states[i + stride]
            .iter()
            .zip(&traj.states[i - stride])
            .zip(&hpsi)
            .map(|((a, b), hv)| (a - b) / Complex64::new(0.0, 2.0 * d) + hv)
            .collect();
        traj.state_norm(&r)
    };
    let max_residual = (1..n - 1).map(|i| residual(i, 1)).fold(0.0, f64::max);
    let order = (n >= 5).then(|| {
        let fine = (2..n - 2).map(|i| residual(i, 1)).fold(0.0, f64::max);
        let coarse = (2..n - 2).map(|i| residual(i, 2)).fold(0.0, f64::max);
        (coarse / fine).log2()
    });
    Ok(ResidualReport { max_residual, spacing: delta.abs(), order })
}

/// Packet center and width under one clock.
#[derive(Debug, Clone, Serialize)]
pub struct ClockRun {
    pub clock: String,
    pub times: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    /// Least-squares slope of `⟨x⟩(t)`.
    pub center_slope: f64,
    /// Least-squares slope of `σ(t)`.
    pub width_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoClocksReport {
    pub half_laplacian: ClockRun,
    pub nonrelativistic: ClockRun,
}

/// Evolves one packet under `(-Δ)^{1/2}` and under `-Δ/2` and compares how
/// its center and width move.
///
/// Under `|k|` a packet with weight near `k = 0` grows algebraic tails, so
/// it reaches the boundary shell sooner than its width suggests.
pub fn two_clocks_compare(psi0: &WaveFunction, t_final: f64, samples: usize) -> Result<TwoClocksReport> {
    let grid = psi0.grid();
    if grid.dims() != 1 {
        return Err(Error::InvalidGrid("two-clock comparison runs on a 1D grid".into()));
    }
    require_position(psi0)?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidTime(t_final));
    }
    if samples < 2 {
        return Err(Error::TooFewSnapshots { needed: 2, got: samples });
    }
    let shell = psi0.boundary_mass()?;
    if shell > 1e-6 {
        return Err(Error::PacketTooWide(format!(
            "initial mass {shell:e} already lies in the outer shell of the domain"
        )));
    }
    let edge_k = 0.9 * grid.k_max();
    let hat = psi0.to_momentum();
    let edge_weight: f64 = hat
        .amplitudes()
        .iter()
        .zip(grid.kvalues())
        .filter(|(_, k)| k.abs() >= edge_k)
        .map(|(v, _)| v.norm_sqr())
        .sum::<f64>()
        * grid.momentum_cell_volume();
    if edge_weight > 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "packet momentum is not representable on the lattice (weight {edge_weight:e} near k_max)"
        )));
    }

    let times: Vec<f64> = (0..samples).map(|i| t_final * i as f64 / (samples - 1) as f64).collect();
    let run = |name: &str, symbol: FourierMultiplier| -> Result<ClockRun> {
        let mut centers = Vec::with_capacity(samples);
        let mut widths = Vec::with_capacity(samples);
        for &t in &times {
            let psi = psi0.with_amplitudes(symbol.evolve(psi0.amplitudes(), t));
            let shell = psi.boundary_mass()?;
            if shell > DEFAULT_BOUNDARY_THRESHOLD {
                return Err(Error::PacketTooWide(format!(
                    "under {name} the packet reaches the domain boundary by t = {t}"
                )));
            }
            centers.push(psi.mean_position(0)?);
            widths.push(psi.position_spread(0)?);
        }
        Ok(ClockRun {
            clock: name.to_string(),
            center_slope: fit::linear_fit(&times, &centers)?.slope,
            width_rate: fit::linear_fit(&times, &widths)?.slope,
            times: times.clone(),
            centers,
            widths,
        })
    };
    Ok(TwoClocksReport {
        half_laplacian: run("half_laplacian", FourierMultiplier::half_laplacian(grid)?)?,
        nonrelativistic: run("nonrelativistic", FourierMultiplier::half_laplacian(grid)?.compose(|k| 0.5 * k * k)?)?,
    })
}
