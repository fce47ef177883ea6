//! Long-time diagnostics of continuum states: how fast a packet leaves every
//! ball, how quickly `φ(H)` and `φ(H₀)` agree on it, and how closely `x/t`
//! tracks `p/μ`. Also the calibration `t ≈ μ⟨x⟩/⟨p⟩` of the clock parameter
//! against classical time of flight.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clock::{Trajectory, DEFAULT_BOUNDARY_THRESHOLD};
use crate::error::{Error, Result};
use crate::fit::{self, PowerLawFit};
use crate::grid::{apply_momentum, apply_position_from, FourierMultiplier, Representation, WaveFunction};
use crate::linalg;
use crate::nbody::{densify_grid, GridHamiltonian};
use crate::spectral::{self, ClassificationThresholds, Evolver, FunctionalCalculus, SpectralData};

/// Smooth bump on the energy axis,
/// `φ(λ) = exp(1 - 1/(1 - ((λ-E₀)/w)²))` for `|λ-E₀| < w` and 0 elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub center: f64,
    pub half_width: f64,
}

impl TestFunction {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite() && center.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "test function needs a finite center and positive half-width, got ({center}, {half_width})"
            )));
        }
        Ok(Self { center, half_width })
    }

    /// Bump centered at `⟨ψ, H₀ψ⟩` with that same half-width.
    pub fn around_kinetic_energy(psi: &WaveFunction, kinetic: &FourierMultiplier) -> Result<Self> {
        let hpsi = kinetic.apply(psi)?;
        let e = psi.inner(&hpsi)?.re / psi.norm().powi(2);
        Self::new(e, e.abs())
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        let s = (lambda - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }
}

/// `‖χ_{|x|<R} ψ‖`, with `|x|` measured from the domain center.
pub fn escape_norm(psi: &WaveFunction, radius: f64) -> Result<f64> {
    if psi.representation() != Representation::Position {
        return Err(Error::WrongRepresentation { expected: "position" });
    }
    let limit = 0.5 * psi.grid().extent();
    if !(radius > 0.0 && radius < limit) {
        return Err(Error::RadiusOutOfRange { radius, limit });
    }
    let r2 = radius * radius;
    let inside = psi.grid().sample(|x| x.iter().map(|c| c * c).sum::<f64>() < r2);
    let mass: f64 = psi.amplitudes().iter().zip(&inside).filter(|(_, &i)| i).map(|(v, _)| v.norm_sqr()).sum();
    Ok((mass * psi.grid().cell_volume()).sqrt())
}

/// `‖φ(H)ψ - φ(H₀)ψ‖`.
pub fn energy_mismatch(
    psi: &WaveFunction,
    phi: &TestFunction,
    h: &dyn FunctionalCalculus,
    h0: &FourierMultiplier,
) -> Result<f64> {
    if psi.representation() != Representation::Position {
        return Err(Error::WrongRepresentation { expected: "position" });
    }
    if h.dim() != psi.amplitudes().len() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: psi.amplitudes().len() });
    }
    if h0.grid() != psi.grid() {
        return Err(Error::GridMismatch);
    }
    let f = |l: f64| Complex64::new(phi.eval(l), 0.0);
    let a = h.apply_function(&f, psi.amplitudes());
    let b = h0.apply_function(psi.amplitudes(), f);
    Ok(linalg::distance(&a, &b) * psi.grid().cell_volume().sqrt())
}

/// `sqrt(Σ_a ‖((x_a - o_a)/t - p_a/μ_a) ψ‖²)`.
///
/// `masses` holds one reduced mass per axis; `origin` defaults to the domain
/// center. Negative `t` is accepted for backward-time diagnostics.
pub fn velocity_mismatch(psi: &WaveFunction, t: f64, masses: &[f64], origin: Option<&[f64]>) -> Result<f64> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::InvalidTime(t));
    }
    let dims = psi.grid().dims();
    if masses.len() != dims {
        return Err(Error::DimensionMismatch { expected: dims, got: masses.len() });
    }
    if let Some(o) = origin {
        if o.len() != dims {
            return Err(Error::DimensionMismatch { expected: dims, got: o.len() });
        }
    }
    let mut total = 0.0;
    for axis in 0..dims {
        let o = origin.map_or(0.0, |o| o[axis]);
        let x = apply_position_from(psi, axis, o)?;
        let p = apply_momentum(psi, axis)?;
        let diff: Vec<Complex64> =
            x.amplitudes().iter().zip(p.amplitudes()).map(|(x, p)| x / t - p / masses[axis]).collect();
        total += linalg::norm_sqr(&diff) * psi.grid().cell_volume();
    }
    Ok(total.sqrt())
}

/// `t̂ = μ⟨x - o⟩/⟨p⟩` along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub times: Vec<f64>,
    pub estimates: Vec<f64>,
    /// `|t̂ - t|/|t|`, `NaN` at `t = 0`.
    pub deviations: Vec<f64>,
    /// Mean of `t̂ - t`; `μx₀/⟨p⟩` for a free packet launched at `x₀`.
    pub offset: f64,
    /// Largest departure of `t̂ - t` from `offset`.
    pub offset_spread: f64,
}

pub fn local_time_calibration(traj: &Trajectory, mass: f64, axis: usize, origin: f64) -> Result<Calibration> {
    if traj.grid.is_none() {
        return Err(Error::InvalidConfig("calibration needs grid snapshots".into()));
    }
    let mut estimates = Vec::with_capacity(traj.len());
    let mut sign = 0.0;
    for (i, &t) in traj.times.iter().enumerate() {
        let psi = traj.wave_function(i).ok_or(Error::ZeroNorm)?;
        let norm2 = psi.norm().powi(2);
        let p = psi.mean_momentum(axis)? / norm2;
        if p.abs() < 1e-8 || (sign != 0.0 && p.signum() != sign) {
            return Err(Error::MomentumCrossesZero { time: t });
        }
        sign = p.signum();
        let x = psi.mean_position(axis)? / norm2 - origin;
        estimates.push(mass * x / p);
    }
    let deviations = traj
        .times
        .iter()
        .zip(&estimates)
        .map(|(&t, &e)| if t == 0.0 { f64::NAN } else { (e - t).abs() / t.abs() })
        .collect();
    let shifts: Vec<f64> = traj.times.iter().zip(&estimates).map(|(t, e)| e - t).collect();
    let offset = shifts.iter().sum::<f64>() / shifts.len() as f64;
    let offset_spread = shifts.iter().map(|s| (s - offset).abs()).fold(0.0, f64::max);
    Ok(Calibration { times: traj.times.clone(), estimates, deviations, offset, offset_spread })
}

/// `count` times from `t_min` to `t_max` in geometric progression; a negative
/// `direction` mirrors them onto the negative axis.
pub fn geometric_times(t_min: f64, t_max: f64, count: usize, direction: f64) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && count >= 2) {
        return Err(Error::InvalidConfig(format!(
            "geometric time grid needs 0 < t_min < t_max and two points, got ({t_min}, {t_max}, {count})"
        )));
    }
    let ratio = (t_max / t_min).powf(1.0 / (count - 1) as f64);
    let s = if direction < 0.0 { -1.0 } else { 1.0 };
    Ok((0..count).map(|i| s * t_min * ratio.powi(i as i32)).collect())
}

/// Power-law fit of one diagnostic series.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesFit {
    pub series: String,
    pub fit: Option<PowerLawFit>,
    /// `|t|` range the fit used.
    pub window: (f64, f64),
}

/// Escape norm, energy mismatch and velocity mismatch on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticSeries {
    pub times: Vec<f64>,
    pub escape: Vec<f64>,
    pub energy_mismatch: Vec<f64>,
    pub velocity_mismatch: Vec<f64>,
    pub fits: Vec<SeriesFit>,
}

impl DiagnosticSeries {
    fn empty() -> Self {
        Self {
            times: Vec::new(),
            escape: Vec::new(),
            energy_mismatch: Vec::new(),
            velocity_mismatch: Vec::new(),
            fits: Vec::new(),
        }
    }

    fn refit(&mut self) {
        let abs_t: Vec<f64> = self.times.iter().map(|t| t.abs()).collect();
        self.fits = [
            ("escape", &self.escape),
            ("energy_mismatch", &self.energy_mismatch),
            ("velocity_mismatch", &self.velocity_mismatch),
        ]
        .into_iter()
        .map(|(name, values)| {
            let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.0).collect();
            let x: Vec<f64> = keep.iter().map(|&i| abs_t[i]).collect();
            let y: Vec<f64> = keep.iter().map(|&i| values[i]).collect();
            SeriesFit {
                series: name.to_string(),
                fit: fit::power_law_fit(&x, &y).ok(),
                window: (x.first().copied().unwrap_or(f64::NAN), x.last().copied().unwrap_or(f64::NAN)),
            }
        })
        .collect();
    }

    pub fn fit(&self, series: &str) -> Option<&PowerLawFit> {
        self.fits.iter().find(|f| f.series == series)?.fit.as_ref()
    }
}

/// Strictly decreasing, allowing equality only where both values are zero.
pub fn is_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

/// Settings of an asymptotics run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub radius: f64,
    /// Signed sample times, all of one sign, increasing in magnitude.
    pub times: Vec<f64>,
    #[serde(default)]
    pub test_function: Option<TestFunction>,
    /// Project the packet onto the continuum proxy before running.
    #[serde(default = "yes")]
    pub continuum_filter: bool,
    #[serde(default = "continuum_threshold")]
    pub continuum_threshold: f64,
    #[serde(default = "boundary_threshold")]
    pub boundary_threshold: f64,
    /// Position-operator origin for the velocity mismatch.
    #[serde(default)]
    pub origin: Option<Vec<f64>>,
}

fn yes() -> bool {
    true
}

fn continuum_threshold() -> f64 {
    0.99
}

fn boundary_threshold() -> f64 {
    DEFAULT_BOUNDARY_THRESHOLD
}

impl SuiteConfig {
    pub fn new(radius: f64, times: Vec<f64>) -> Self {
        Self {
            radius,
            times,
            test_function: None,
            continuum_filter: true,
            continuum_threshold: continuum_threshold(),
            boundary_threshold: boundary_threshold(),
            origin: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() < 2 {
            return Err(Error::TooFewSnapshots { needed: 2, got: self.times.len() });
        }
        let sign = self.times[0].signum();
        if self.times.iter().any(|t| *t == 0.0 || !t.is_finite() || t.signum() != sign) {
            return Err(Error::InvalidConfig("sample times must be nonzero and share one sign".into()));
        }
        if self.times.windows(2).any(|w| !(w[1].abs() > w[0].abs())) {
            return Err(Error::InvalidConfig("sample times must grow in magnitude".into()));
        }
        if !(self.continuum_threshold > 0.0 && self.continuum_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "continuum threshold must lie in (0, 1], got {}",
                self.continuum_threshold
            )));
        }
        if !(self.boundary_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "boundary threshold must be positive, got {}",
                self.boundary_threshold
            )));
        }
        Ok(())
    }
}

/// Result of [`run_asymptotics_suite`].
#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub series: DiagnosticSeries,
    pub test_function: TestFunction,
    /// `‖P_c ψ‖²/‖ψ‖²` before filtering; 1 for free systems.
    pub continuum_weight: f64,
    pub bound_states: usize,
    /// Boundary-monitor trip that ended the run early, if any.
    #[serde(serialize_with = "display_error")]
    pub halted: Option<Error>,
}

fn display_error<S: serde::Serializer>(e: &Option<Error>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match e {
        Some(e) => s.serialize_some(&e.to_string()),
        None => s.serialize_none(),
    }
}

/// Samples escape norm, energy mismatch and velocity mismatch of `e^{-itH}ψ`
/// on the configured times.
///
/// With a potential present the operator is diagonalized once; the packet is
/// then projected onto the continuum proxy (when filtering is on) and evolved
/// by the exact eigen-expansion. Free systems evolve by exact Fourier phases.
/// A boundary-monitor trip ends the run and is reported in
/// [`SuiteOutcome::halted`] together with the samples taken so far.
pub fn run_asymptotics_suite(h: &GridHamiltonian, psi0: &WaveFunction, config: &SuiteConfig) -> Result<SuiteOutcome> {
    run_asymptotics_suite_with_spectrum(h, None, psi0, config)
}

/// [`run_asymptotics_suite`] reusing an eigendecomposition of `h`.
pub fn run_asymptotics_suite_with_spectrum(
    h: &GridHamiltonian,
    spectrum: Option<&SpectralData>,
    psi0: &WaveFunction,
    config: &SuiteConfig,
) -> Result<SuiteOutcome> {
    config.validate()?;
    if psi0.grid() != h.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = h.grid();
    let limit = 0.5 * grid.extent();
    if !(config.radius > 0.0 && config.radius < limit) {
        return Err(Error::RadiusOutOfRange { radius: config.radius, limit });
    }
    let mut psi = psi0.to_position();
    psi.normalize()?;

    let owned;
    let spectral_data: Option<&SpectralData> = if h.is_free() {
        None
    } else if let Some(sd) = spectrum {
        if sd.dim() != h.grid().len() {
            return Err(Error::DimensionMismatch { expected: h.grid().len(), got: sd.dim() });
        }
        Some(sd)
    } else {
        owned = spectral::diagonalize(&densify_grid(h)?)?;
        Some(&owned)
    };

    let mut continuum_weight = 1.0;
    let mut bound_states = 0;
    if let (Some(sd), true) = (spectral_data, config.continuum_filter) {
        let split = spectral::classify_subspaces(sd, grid, h.tail(), ClassificationThresholds::default())?;
        bound_states = split.bound_count();
        let projected = split.continuum.apply(psi.amplitudes());
        continuum_weight = linalg::norm_sqr(&projected) / linalg::norm_sqr(psi.amplitudes());
        if continuum_weight < config.continuum_threshold {
            return Err(Error::BoundInitialState { weight: continuum_weight, threshold: config.continuum_threshold });
        }
        psi = psi.with_amplitudes(projected);
        psi.normalize()?;
    }

    let phi = match config.test_function {
        Some(f) => f,
        None => TestFunction::around_kinetic_energy(&psi, h.kinetic())?,
    };
    let evolver: &dyn Evolver = match spectral_data {
        Some(sd) => sd,
        None => h.kinetic(),
    };

    let mut series = DiagnosticSeries::empty();
    let mut halted = None;
    for &t in &config.times {
        let psi_t = psi.with_amplitudes(evolver.evolve(psi.amplitudes(), t));
        let shell = psi_t.boundary_mass()?;
        if shell > config.boundary_threshold {
            halted = Some(Error::MonitorTrip { time: t, mass: shell, threshold: config.boundary_threshold });
            break;
        }
        let energy = match spectral_data {
            Some(sd) => energy_mismatch(&psi_t, &phi, sd, h.kinetic())?,
            None => 0.0,
        };
        series.times.push(t);
        series.escape.push(escape_norm(&psi_t, config.radius)?);
        series.energy_mismatch.push(energy);
        series.velocity_mismatch.push(velocity_mismatch(&psi_t, t, h.axis_masses(), config.origin.as_deref())?);
    }
    series.refit();
    Ok(SuiteOutcome { series, test_function: phi, continuum_weight, bound_states, halted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::nbody::Potential;

    #[test]
    fn bump_shape() {
        let f = TestFunction::new(2.0, 1.0).unwrap();
        assert_eq!(f.eval(2.0), 1.0);
        assert_eq!(f.eval(1.0), 0.0);
        assert_eq!(f.eval(3.5), 0.0);
        assert!(f.eval(2.5) > 0.0 && f.eval(2.5) < 1.0);
        assert!(TestFunction::new(0.0, 0.0).is_err());
    }

    #[test]
    fn escape_limits() {
        let grid = Grid::new(1, 256, 40.0).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[0.0], 0.5, &[0.0]).unwrap();
        assert!((escape_norm(&psi, 10.0).unwrap() - 1.0).abs() < 1e-12);
        let away = WaveFunction::gaussian(&grid, &[15.0], 0.5, &[0.0]).unwrap();
        assert!(escape_norm(&away, 5.0).unwrap() < 1e-12);
        assert!(matches!(escape_norm(&psi, 20.0), Err(Error::RadiusOutOfRange { .. })));
    }

    #[test]
    fn velocity_mismatch_translation() {
        let grid = Grid::new(1, 512, 80.0).unwrap();
        let a = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[1.0]).unwrap();
        let b = WaveFunction::gaussian(&grid, &[5.0], 1.0, &[1.0]).unwrap();
        let va = velocity_mismatch(&a, 3.0, &[1.0], None).unwrap();
        let vb = velocity_mismatch(&b, 3.0, &[1.0], Some(&[5.0])).unwrap();
        assert!((va - vb).abs() < 1e-10);
        assert!(matches!(velocity_mismatch(&a, 0.0, &[1.0], None), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn free_system_has_no_energy_mismatch() {
        let grid = Grid::new(1, 256, 100.0).unwrap();
        let h = GridHamiltonian::single(&grid, 1.0, Potential::None).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[1.0]).unwrap();
        let cfg = SuiteConfig::new(5.0, geometric_times(2.0, 16.0, 4, 1.0).unwrap());
        let out = run_asymptotics_suite(&h, &psi, &cfg).unwrap();
        assert!(out.halted.is_none());
        assert!(out.series.energy_mismatch.iter().all(|v| *v == 0.0));
        assert!(is_decreasing(&out.series.velocity_mismatch));
    }

    #[test]
    fn bound_packets_are_rejected() {
        let grid = Grid::new(1, 128, 40.0).unwrap();
        let h = GridHamiltonian::single(&grid, 1.0, Potential::GaussianWell { depth: 5.0, width: 1.0 }).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[0.0], 0.7, &[0.0]).unwrap();
        let cfg = SuiteConfig::new(5.0, vec![1.0, 2.0]);
        assert!(matches!(run_asymptotics_suite(&h, &psi, &cfg), Err(Error::BoundInitialState { .. })));
    }

    #[test]
    fn calibration_rejects_zero_momentum() {
        let grid = Grid::new(1, 128, 40.0).unwrap();
        let psi = WaveFunction::gaussian(&grid, &[0.0], 1.0, &[0.0]).unwrap();
        let traj = Trajectory {
            times: vec![0.0],
            states: vec![psi.amplitudes().to_vec()],
            generator: String::new(),
            grid: Some(grid),
        };
        assert!(matches!(local_time_calibration(&traj, 1.0, 0, 0.0), Err(Error::MomentumCrossesZero { .. })));
    }
}
