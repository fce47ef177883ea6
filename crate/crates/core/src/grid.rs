//! Uniform periodic lattices, wave functions on them, and operators that are
//! diagonal in position or momentum.
//!
//! Positions are centered: along every axis the lattice covers `[-L/2, L/2)`
//! with spacing `h = L/n`. The dual lattice carries the DFT frequencies
//! `2π·{0, 1, …, n/2-1, -n/2, …, -1}/L`.
//!
//! Momentum amplitudes are scaled so that they approximate the continuum
//! Fourier transform `(2π)^{-d/2} ∫ e^{-ik·x} ψ(x) dx`; with that scaling the
//! L² norm measured with the momentum cell `(2π/L)^d` equals the position-space
//! norm measured with `h^d`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{self, LinearOperator};

/// Default upper bound on `n^dims`.
pub const DEFAULT_POINT_CAP: usize = 1 << 22;

#[derive(Clone)]
struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic lattice in 1, 2 or 3 dimensions with equal resolution and
/// extent along every axis.
#[derive(Clone)]
pub struct Grid {
    dims: usize,
    n: usize,
    extent: f64,
    spacing: f64,
    kvalues: Vec<f64>,
    positions: Vec<f64>,
    fft: FftPair,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dims", &self.dims)
            .field("n", &self.n)
            .field("extent", &self.extent)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.n == other.n && self.extent == other.extent
    }
}

impl Grid {
    /// Builds a grid with the default point cap.
    pub fn new(dims: usize, n: usize, extent: f64) -> Result<Self> {
        Self::with_cap(dims, n, extent, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(dims: usize, n: usize, extent: f64, cap: usize) -> Result<Self> {
        if !(1..=3).contains(&dims) {
            return Err(Error::InvalidGrid(format!("dims must be 1, 2 or 3, got {dims}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n must be a power of two and at least 8, got {n}")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        let points = n.checked_pow(dims as u32).ok_or(Error::CapExceeded { points: usize::MAX, cap })?;
        if points > cap {
            return Err(Error::CapExceeded { points, cap });
        }

        let spacing = extent / n as f64;
        let dk = 2.0 * PI / extent;
        let half = (n / 2) as i64;
        let kvalues = (0..n as i64).map(|j| if j < half { j } else { j - n as i64 }).map(|m| m as f64 * dk).collect();
        let positions = (0..n).map(|j| -0.5 * extent + j as f64 * spacing).collect();

        let mut planner = FftPlanner::new();
        let fft = FftPair { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) };

        Ok(Self { dims, n, extent, spacing, kvalues, positions, fft })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Dual lattice along one axis, in FFT order.
    pub fn kvalues(&self) -> &[f64] {
        &self.kvalues
    }

    /// Lattice coordinates along one axis, ascending from `-L/2`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Total number of lattice points, `n^dims`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^dims` of the position lattice.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dims as i32)
    }

    /// Volume element `(2π/L)^dims` of the momentum lattice.
    pub fn momentum_cell_volume(&self) -> f64 {
        (2.0 * PI / self.extent).powi(self.dims as i32)
    }

    /// Largest |k| along one axis (the Nyquist frequency).
    pub fn k_max(&self) -> f64 {
        PI / self.spacing
    }

    /// Splits a flat row-major index into per-axis indices (axis 0 slowest).
    pub fn unravel(&self, mut index: usize, out: &mut [usize]) {
        for axis in (0..self.dims).rev() {
            out[axis] = index % self.n;
            index /= self.n;
        }
    }

    /// Position of a flat lattice index.
    pub fn point(&self, index: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.unravel(index, &mut idx[..self.dims]);
        for (o, &i) in out.iter_mut().zip(&idx[..self.dims]) {
            *o = self.positions[i];
        }
    }

    /// Momentum of a flat lattice index.
    pub fn momentum(&self, index: usize, out: &mut [f64]) {
        let mut idx = [0usize; 3];
        self.unravel(index, &mut idx[..self.dims]);
        for (o, &i) in out.iter_mut().zip(&idx[..self.dims]) {
            *o = self.kvalues[i];
        }
    }

    /// Evaluates `f` at every lattice position.
    pub fn sample<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        let mut x = [0.0; 3];
        (0..self.len())
            .map(|i| {
                self.point(i, &mut x[..self.dims]);
                f(&x[..self.dims])
            })
            .collect()
    }

    /// Evaluates `f` at every momentum lattice point (FFT order).
    pub fn sample_momentum<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        let mut k = [0.0; 3];
        (0..self.len())
            .map(|i| {
                self.momentum(i, &mut k[..self.dims]);
                f(&k[..self.dims])
            })
            .collect()
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dims {
            return Err(Error::AxisOutOfRange { axis, dims: self.dims });
        }
        Ok(())
    }

    fn transform_lines(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let total = data.len();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..self.dims {
            let stride = n.pow((self.dims - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * n;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// `(-1)^{Σ idx}`, the phase that moves the transform origin to the
    /// domain center.
    fn center_phase(&self, index: usize) -> f64 {
        let mut idx = [0usize; 3];
        self.unravel(index, &mut idx[..self.dims]);
        if idx[..self.dims].iter().sum::<usize>() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Position amplitudes to momentum amplitudes.
    pub fn forward(&self, data: &[Complex64]) -> Vec<Complex64> {
        let mut out = data.to_vec();
        self.transform_lines(&mut out, &self.fft.forward);
        let scale = (self.spacing / (2.0 * PI).sqrt()).powi(self.dims as i32);
        for (i, v) in out.iter_mut().enumerate() {
            *v *= scale * self.center_phase(i);
        }
        out
    }

    /// Momentum amplitudes to position amplitudes.
    pub fn inverse(&self, data: &[Complex64]) -> Vec<Complex64> {
        let scale = ((2.0 * PI).sqrt() / self.spacing).powi(self.dims as i32) / self.len() as f64;
        let mut out: Vec<Complex64> =
            data.iter().enumerate().map(|(i, v)| v * (scale * self.center_phase(i))).collect();
        self.transform_lines(&mut out, &self.fft.inverse);
        out
    }

    /// Multiplies position-space amplitudes by a momentum-space diagonal.
    pub fn filter(&self, data: &[Complex64], diagonal: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
        let mut hat = data.to_vec();
        self.transform_lines(&mut hat, &self.fft.forward);
        for (i, v) in hat.iter_mut().enumerate() {
            *v *= diagonal(i);
        }
        self.transform_lines(&mut hat, &self.fft.inverse);
        let inv = 1.0 / self.len() as f64;
        for v in &mut hat {
            *v *= inv;
        }
        hat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Position,
    Momentum,
}

impl Representation {
    fn name(self) -> &'static str {
        match self {
            Representation::Position => "position",
            Representation::Momentum => "momentum",
        }
    }
}

/// Complex amplitudes on a [`Grid`] in either representation.
///
/// Constructors named `new`/`from_fn` normalize; operator outputs use
/// [`WaveFunction::unnormalized`] and carry whatever norm the operator gives.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
    representation: Representation,
}

impl WaveFunction {
    /// Normalized state from raw amplitudes.
    pub fn new(grid: &Grid, amplitudes: Vec<Complex64>, representation: Representation) -> Result<Self> {
        let mut psi = Self::unnormalized(grid, amplitudes, representation)?;
        psi.normalize()?;
        Ok(psi)
    }

    pub fn unnormalized(grid: &Grid, amplitudes: Vec<Complex64>, representation: Representation) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: amplitudes.len() });
        }
        Ok(Self { grid: grid.clone(), amplitudes, representation })
    }

    /// Normalized position-space state sampled from `f`.
    pub fn from_fn(grid: &Grid, f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.sample(f), Representation::Position)
    }

    /// Gaussian packet `exp(-|x-x₀|²/(4σ²) + ik₀·(x-x₀))`, so that `σ` is the
    /// standard deviation of `|ψ|²` along each axis.
    pub fn gaussian(grid: &Grid, center: &[f64], sigma: f64, momentum: &[f64]) -> Result<Self> {
        if center.len() != grid.dims() || momentum.len() != grid.dims() {
            return Err(Error::DimensionMismatch { expected: grid.dims(), got: center.len().min(momentum.len()) });
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidGrid(format!("packet width must be positive, got {sigma}")));
        }
        Self::from_fn(grid, |x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for a in 0..x.len() {
                let d = x[a] - center[a];
                r2 += d * d;
                phase += momentum[a] * d;
            }
            Complex64::from_polar((-r2 / (4.0 * sigma * sigma)).exp(), phase)
        })
    }

    /// Compactly supported bump `exp(1 - 1/(1-r²/w²))` on `|x-x₀| < w`,
    /// modulated by `e^{ik₀·(x-x₀)}`.
    pub fn bump(grid: &Grid, center: &[f64], half_width: f64, momentum: &[f64]) -> Result<Self> {
        if center.len() != grid.dims() || momentum.len() != grid.dims() {
            return Err(Error::DimensionMismatch { expected: grid.dims(), got: center.len().min(momentum.len()) });
        }
        Self::from_fn(grid, |x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for a in 0..x.len() {
                let d = x[a] - center[a];
                r2 += d * d;
                phase += momentum[a] * d;
            }
            let s = r2 / (half_width * half_width);
            if s < 1.0 {
                Complex64::from_polar((1.0 - 1.0 / (1.0 - s)).exp(), phase)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    fn measure(&self) -> f64 {
        match self.representation {
            Representation::Position => self.grid.cell_volume(),
            Representation::Momentum => self.grid.momentum_cell_volume(),
        }
    }

    pub fn norm(&self) -> f64 {
        (linalg::norm_sqr(&self.amplitudes) * self.measure()).sqrt()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / norm;
        for v in &mut self.amplitudes {
            *v *= inv;
        }
        Ok(())
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.representation != other.representation {
            return Err(Error::WrongRepresentation { expected: self.representation.name() });
        }
        Ok(linalg::dot(&self.amplitudes, &other.amplitudes) * self.measure())
    }

    pub fn to_momentum(&self) -> WaveFunction {
        match self.representation {
            Representation::Momentum => self.clone(),
            Representation::Position => WaveFunction {
                grid: self.grid.clone(),
                amplitudes: self.grid.forward(&self.amplitudes),
                representation: Representation::Momentum,
            },
        }
    }

    pub fn to_position(&self) -> WaveFunction {
        match self.representation {
            Representation::Position => self.clone(),
            Representation::Momentum => WaveFunction {
                grid: self.grid.clone(),
                amplitudes: self.grid.inverse(&self.amplitudes),
                representation: Representation::Position,
            },
        }
    }

    /// Same grid and representation, new amplitudes.
    pub fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> WaveFunction {
        assert_eq!(amplitudes.len(), self.amplitudes.len());
        WaveFunction { grid: self.grid.clone(), amplitudes, representation: self.representation }
    }

    fn require_position(&self) -> Result<()> {
        if self.representation != Representation::Position {
            return Err(Error::WrongRepresentation { expected: "position" });
        }
        Ok(())
    }

    /// Probability density `|ψ|²` in position space.
    pub fn density(&self) -> Result<Vec<f64>> {
        self.require_position()?;
        Ok(self.amplitudes.iter().map(|v| v.norm_sqr()).collect())
    }

    /// `⟨x_axis⟩` measured from `origin`.
    pub fn mean_position(&self, axis: usize) -> Result<f64> {
        self.require_position()?;
        self.grid.check_axis(axis)?;
        let mut x = [0.0; 3];
        let mut acc = 0.0;
        for (i, v) in self.amplitudes.iter().enumerate() {
            self.grid.point(i, &mut x[..self.grid.dims]);
            acc += x[axis] * v.norm_sqr();
        }
        Ok(acc * self.grid.cell_volume())
    }

    /// Standard deviation of `x_axis` under `|ψ|²/‖ψ‖²`.
    pub fn position_spread(&self, axis: usize) -> Result<f64> {
        self.require_position()?;
        self.grid.check_axis(axis)?;
        let mut x = [0.0; 3];
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (i, v) in self.amplitudes.iter().enumerate() {
            self.grid.point(i, &mut x[..self.grid.dims]);
            let w = v.norm_sqr();
            m0 += w;
            m1 += x[axis] * w;
            m2 += x[axis] * x[axis] * w;
        }
        let mean = m1 / m0;
        Ok((m2 / m0 - mean * mean).max(0.0).sqrt())
    }

    /// `⟨p_axis⟩`, computed in the momentum representation.
    pub fn mean_momentum(&self, axis: usize) -> Result<f64> {
        self.grid.check_axis(axis)?;
        let hat = self.to_momentum();
        let mut k = [0.0; 3];
        let mut acc = 0.0;
        for (i, v) in hat.amplitudes.iter().enumerate() {
            self.grid.momentum(i, &mut k[..self.grid.dims]);
            acc += k[axis] * v.norm_sqr();
        }
        Ok(acc * self.grid.momentum_cell_volume())
    }

    /// Mass of `|ψ|²` within the outer 10% of the domain along any axis,
    /// i.e. where some coordinate satisfies `|x_a| ≥ 0.45·L`.
    pub fn boundary_mass(&self) -> Result<f64> {
        self.require_position()?;
        let edge = 0.45 * self.grid.extent;
        let mut x = [0.0; 3];
        let mut acc = 0.0;
        for (i, v) in self.amplitudes.iter().enumerate() {
            self.grid.point(i, &mut x[..self.grid.dims]);
            if x[..self.grid.dims].iter().any(|c| c.abs() >= edge) {
                acc += v.norm_sqr();
            }
        }
        Ok(acc * self.grid.cell_volume())
    }
}

/// `x_axis · ψ`, with the coordinate measured from the domain center.
pub fn apply_position(psi: &WaveFunction, axis: usize) -> Result<WaveFunction> {
    apply_position_from(psi, axis, 0.0)
}

/// `(x_axis - origin) · ψ`.
pub fn apply_position_from(psi: &WaveFunction, axis: usize, origin: f64) -> Result<WaveFunction> {
    psi.require_position()?;
    psi.grid.check_axis(axis)?;
    let grid = &psi.grid;
    let mut idx = [0usize; 3];
    let amplitudes = psi
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, v)| {
            grid.unravel(i, &mut idx[..grid.dims]);
            v * (grid.positions[idx[axis]] - origin)
        })
        .collect();
    Ok(psi.with_amplitudes(amplitudes))
}

/// `(1/i) ∂ψ/∂x_axis`, exact on the discrete Fourier lattice.
pub fn apply_momentum(psi: &WaveFunction, axis: usize) -> Result<WaveFunction> {
    psi.require_position()?;
    psi.grid.check_axis(axis)?;
    let grid = &psi.grid;
    let out = grid.filter(&psi.amplitudes, |i| {
        let mut idx = [0usize; 3];
        grid.unravel(i, &mut idx[..grid.dims]);
        Complex64::new(grid.kvalues[idx[axis]], 0.0)
    });
    Ok(psi.with_amplitudes(out))
}

/// A real symbol on the momentum lattice, acting as `F⁻¹ · symbol · F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMultiplier {
    grid: Grid,
    values: Vec<f64>,
}

impl FourierMultiplier {
    /// Samples `symbol(k)` at every momentum lattice point.
    pub fn new(grid: &Grid, symbol: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_values(grid, grid.sample_momentum(symbol))
    }

    /// Symbol values given in FFT order.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonRealSymbol { index, value });
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// `Σ_a k_a² / (2 m_a)`, one mass per axis.
    pub fn kinetic(grid: &Grid, masses: &[f64]) -> Result<Self> {
        if masses.len() != grid.dims() {
            return Err(Error::DimensionMismatch { expected: grid.dims(), got: masses.len() });
        }
        if masses.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidSystem("masses must be positive".into()));
        }
        Self::new(grid, |k| k.iter().zip(masses).map(|(k, m)| k * k / (2.0 * m)).sum())
    }

    /// `|k|² / (2m)` on every axis.
    pub fn free(grid: &Grid, mass: f64) -> Result<Self> {
        Self::kinetic(grid, &vec![mass; grid.dims()])
    }

    /// `(-Δ)^{1/2}`, symbol `|k|`.
    pub fn half_laplacian(grid: &Grid) -> Result<Self> {
        Self::new(grid, |k| k.iter().map(|k| k * k).sum::<f64>().sqrt())
    }

    /// `c·sqrt(-Δ + c²μ²)`, symbol `c·sqrt(|k|² + c²μ²)`.
    pub fn relativistic(grid: &Grid, c: f64, mass: f64) -> Result<Self> {
        Self::new(grid, |k| c * (k.iter().map(|k| k * k).sum::<f64>() + c * c * mass * mass).sqrt())
    }

    /// `f ∘ symbol`.
    pub fn compose(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(&self.grid, self.values.iter().map(|&s| f(s)).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Symbol values in FFT order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Applies the multiplier; the output keeps the input's representation.
    pub fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        if psi.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let out = match psi.representation {
            Representation::Momentum => psi.amplitudes.iter().zip(&self.values).map(|(v, s)| v * s).collect(),
            Representation::Position => self.apply_position_slice(&psi.amplitudes),
        };
        Ok(psi.with_amplitudes(out))
    }

    /// Applies `g(symbol)` for a complex-valued `g`, e.g. a propagator phase.
    pub fn apply_function(&self, amplitudes: &[Complex64], g: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        self.grid.filter(amplitudes, |i| g(self.values[i]))
    }

    fn apply_position_slice(&self, amplitudes: &[Complex64]) -> Vec<Complex64> {
        self.grid.filter(amplitudes, |i| Complex64::new(self.values[i], 0.0))
    }
}

impl LinearOperator for FourierMultiplier {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.apply_position_slice(v)
    }
}
