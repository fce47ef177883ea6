//! Relative-motion Hamiltonians of N-particle systems.
//!
//! Particle coordinates `r_1..r_N` are mapped to the center of mass `X_C` and
//! Jacobi coordinates `x_i = r_{i+1} - (m_1 r_1 + … + m_i r_i)/(m_1 + … + m_i)`.
//! In those coordinates the kinetic energy separates into `P_C²/(2M)` plus
//! `Σ p_i²/(2μ_i)` with `1/μ_i = 1/m_{i+1} + 1/(m_1 + … + m_i)`, and every pair
//! separation `r_i - r_j` is a fixed linear combination of the `x_k` alone.
//!
//! On a grid the relative coordinates are stacked: Jacobi coordinate `i`,
//! spatial component `c` lives on axis `i·d + c`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FourierMultiplier, Grid};
use crate::linalg::{DenseHermitian, LinearOperator, DENSE_CAP};

/// Pair interaction as a function of the separation length `r = |r_i - r_j|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    None,
    /// `½ ω² r²`.
    Harmonic {
        omega: f64,
    },
    /// `-V₀ exp(-r²/w²)`.
    GaussianWell {
        depth: f64,
        width: f64,
    },
    /// `-q / sqrt(r² + a²)`; `a` defaults to twice the grid spacing.
    SoftCoulomb {
        charge: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        softening: Option<f64>,
    },
    /// `V₀` for `r < w/2`, zero outside.
    SquareBarrier {
        height: f64,
        width: f64,
    },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidSystem(format!("potential {what}")));
        match *self {
            Potential::None => Ok(()),
            Potential::Harmonic { omega } if !omega.is_finite() => bad("omega must be finite"),
            Potential::GaussianWell { depth, width } if !depth.is_finite() || !(width > 0.0) => {
                bad("gaussian_well needs finite depth and positive width")
            }
            Potential::SoftCoulomb { charge, softening } => {
                if !charge.is_finite() {
                    bad("soft_coulomb charge must be finite")
                } else if matches!(softening, Some(a) if !(a > 0.0)) {
                    bad("soft_coulomb softening must be positive")
                } else {
                    Ok(())
                }
            }
            Potential::SquareBarrier { height, width } if !height.is_finite() || !(width > 0.0) => {
                bad("square_barrier needs finite height and positive width")
            }
            _ => Ok(()),
        }
    }

    /// `V(r)`; `spacing` fixes the default soft-Coulomb regularization.
    pub fn evaluate(&self, r: f64, spacing: f64) -> f64 {
        match *self {
            Potential::None => 0.0,
            Potential::Harmonic { omega } => 0.5 * omega * omega * r * r,
            Potential::GaussianWell { depth, width } => -depth * (-(r * r) / (width * width)).exp(),
            Potential::SoftCoulomb { charge, softening } => {
                let a = softening.unwrap_or(2.0 * spacing);
                -charge / (r * r + a * a).sqrt()
            }
            Potential::SquareBarrier { height, width } => {
                if r < 0.5 * width {
                    height
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether `V(r) → 0` as `r → ∞`.
    pub fn has_decaying_tail(&self) -> bool {
        !matches!(self, Potential::Harmonic { .. })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Potential::None)
    }
}

/// Masses plus pair potentials keyed by `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    masses: Vec<f64>,
    spatial_dims: usize,
    pairs: BTreeMap<(usize, usize), Potential>,
}

impl ParticleSystem {
    pub fn new(masses: Vec<f64>, spatial_dims: usize) -> Result<Self> {
        check_masses(&masses)?;
        if !(1..=3).contains(&spatial_dims) {
            return Err(Error::InvalidSystem(format!("spatial dimension must be 1, 2 or 3, got {spatial_dims}")));
        }
        Ok(Self { masses, spatial_dims, pairs: BTreeMap::new() })
    }

    /// Adds (or replaces) the potential between particles `i` and `j`.
    pub fn with_pair(mut self, i: usize, j: usize, potential: Potential) -> Result<Self> {
        let n = self.masses.len();
        if i == j || i >= n || j >= n {
            return Err(Error::InvalidSystem(format!("pair ({i}, {j}) does not name two distinct particles of {n}")));
        }
        potential.validate()?;
        self.pairs.insert((i.min(j), i.max(j)), potential);
        Ok(self)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn spatial_dims(&self) -> usize {
        self.spatial_dims
    }

    pub fn pairs(&self) -> &BTreeMap<(usize, usize), Potential> {
        &self.pairs
    }

    pub fn particle_count(&self) -> usize {
        self.masses.len()
    }

    /// Grid dimension needed for the relative motion.
    pub fn relative_dims(&self) -> usize {
        self.spatial_dims * (self.masses.len() - 1)
    }

    pub fn is_free(&self) -> bool {
        self.pairs.values().all(Potential::is_none)
    }

    pub fn tail(&self) -> PotentialTail {
        if self.pairs.values().all(Potential::has_decaying_tail) {
            PotentialTail::Decaying
        } else {
            PotentialTail::Confining
        }
    }
}

fn check_masses(masses: &[f64]) -> Result<()> {
    if masses.len() < 2 {
        return Err(Error::InvalidSystem(format!("need at least two particles, got {}", masses.len())));
    }
    if let Some(m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidSystem(format!("masses must be positive, got {m}")));
    }
    Ok(())
}

/// Linear change of variables `(r_1..r_N) → (X_C, x_1..x_{N-1})` applied to
/// each spatial component separately.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiFrame {
    masses: Vec<f64>,
    reduced_masses: Vec<f64>,
    transform: Vec<Vec<f64>>,
    inverse: Vec<Vec<f64>>,
}

pub fn jacobi_frame(masses: &[f64]) -> Result<JacobiFrame> {
    check_masses(masses)?;
    let n = masses.len();
    let total: f64 = masses.iter().sum();
    let mut transform = vec![vec![0.0; n]; n];
    for (j, m) in masses.iter().enumerate() {
        transform[0][j] = m / total;
    }
    let mut reduced_masses = Vec::with_capacity(n - 1);
    let mut partial = 0.0;
    for i in 1..n {
        partial += masses[i - 1];
        for j in 0..i {
            transform[i][j] = -masses[j] / partial;
        }
        transform[i][i] = 1.0;
        reduced_masses.push(1.0 / (1.0 / masses[i] + 1.0 / partial));
    }
    let inverse = invert(&transform)?;
    Ok(JacobiFrame { masses: masses.to_vec(), reduced_masses, transform, inverse })
}

fn invert(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap_or(col);
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::InvalidSystem("singular coordinate transform".into()));
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for j in 0..n {
                        m[row][j] -= f * m[col][j];
                        inv[row][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

impl JacobiFrame {
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `μ_1..μ_{N-1}`.
    pub fn reduced_masses(&self) -> &[f64] {
        &self.reduced_masses
    }

    /// Row 0 gives `X_C`, row `i` gives `x_i`.
    pub fn transform(&self) -> &[Vec<f64>] {
        &self.transform
    }

    pub fn inverse(&self) -> &[Vec<f64>] {
        &self.inverse
    }

    /// `(r_1..r_N) → (X_C, x_1..x_{N-1})` for one spatial component.
    pub fn to_jacobi(&self, r: &[f64]) -> Vec<f64> {
        matvec(&self.transform, r)
    }

    pub fn to_particles(&self, y: &[f64]) -> Vec<f64> {
        matvec(&self.inverse, y)
    }

    /// Conjugate momenta: `(P_C, p_1..) = T^{-⊤} (p_{r_1}..p_{r_N})`.
    pub fn momenta_to_jacobi(&self, p: &[f64]) -> Vec<f64> {
        let n = self.masses.len();
        (0..n).map(|k| (0..n).map(|i| self.inverse[i][k] * p[i]).sum()).collect()
    }

    /// `(P_C, p_1..) → (p_{r_1}..)`, i.e. `T^⊤`.
    pub fn momenta_to_particles(&self, q: &[f64]) -> Vec<f64> {
        let n = self.masses.len();
        (0..n).map(|i| (0..n).map(|k| self.transform[k][i] * q[k]).sum()).collect()
    }

    /// Coefficients `c_k` (k = 1..N-1) with `r_i - r_j = Σ c_k x_k`.
    pub fn pair_coefficients(&self, i: usize, j: usize) -> Vec<f64> {
        (1..self.masses.len()).map(|k| self.inverse[i][k] - self.inverse[j][k]).collect()
    }
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Whether the potential vanishes far from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialTail {
    Decaying,
    Confining,
}

/// `H = kinetic multiplier + diagonal potential` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridHamiltonian {
    kinetic: FourierMultiplier,
    potential: Vec<f64>,
    tail: PotentialTail,
    axis_masses: Vec<f64>,
}

impl GridHamiltonian {
    pub fn new(
        kinetic: FourierMultiplier,
        potential: Vec<f64>,
        tail: PotentialTail,
        axis_masses: Vec<f64>,
    ) -> Result<Self> {
        let grid = kinetic.grid();
        if potential.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: potential.len() });
        }
        if axis_masses.len() != grid.dims() {
            return Err(Error::DimensionMismatch { expected: grid.dims(), got: axis_masses.len() });
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem("potential must be finite on the grid".into()));
        }
        Ok(Self { kinetic, potential, tail, axis_masses })
    }

    /// One particle of mass `mass` in a radial potential `V(|x|)` about the
    /// domain center.
    pub fn single(grid: &Grid, mass: f64, potential: Potential) -> Result<Self> {
        potential.validate()?;
        let kinetic = FourierMultiplier::free(grid, mass)?;
        let h = grid.spacing();
        let values = grid.sample(|x| potential.evaluate(x.iter().map(|c| c * c).sum::<f64>().sqrt(), h));
        let tail = if potential.has_decaying_tail() { PotentialTail::Decaying } else { PotentialTail::Confining };
        Self::new(kinetic, values, tail, vec![mass; grid.dims()])
    }

    pub fn grid(&self) -> &Grid {
        self.kinetic.grid()
    }

    pub fn kinetic(&self) -> &FourierMultiplier {
        &self.kinetic
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn tail(&self) -> PotentialTail {
        self.tail
    }

    /// Reduced mass attached to each grid axis.
    pub fn axis_masses(&self) -> &[f64] {
        &self.axis_masses
    }

    pub fn is_free(&self) -> bool {
        self.potential.iter().all(|&v| v == 0.0)
    }
}

impl LinearOperator for GridHamiltonian {
    fn dim(&self) -> usize {
        self.potential.len()
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = LinearOperator::apply(&self.kinetic, v);
        for ((o, x), p) in out.iter_mut().zip(v).zip(&self.potential) {
            *o += x * p;
        }
        out
    }
}

/// A self-adjoint generator, either matrix-free on a grid or dense.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianOperator {
    Grid(GridHamiltonian),
    Dense(DenseHermitian),
}

impl HamiltonianOperator {
    pub fn grid(&self) -> Option<&Grid> {
        match self {
            HamiltonianOperator::Grid(h) => Some(h.grid()),
            HamiltonianOperator::Dense(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridHamiltonian> {
        match self {
            HamiltonianOperator::Grid(h) => Some(h),
            HamiltonianOperator::Dense(_) => None,
        }
    }
}

impl LinearOperator for HamiltonianOperator {
    fn dim(&self) -> usize {
        match self {
            HamiltonianOperator::Grid(h) => h.dim(),
            HamiltonianOperator::Dense(h) => LinearOperator::dim(h),
        }
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        match self {
            HamiltonianOperator::Grid(h) => LinearOperator::apply(h, v),
            HamiltonianOperator::Dense(h) => LinearOperator::apply(h, v),
        }
    }
}

impl From<GridHamiltonian> for HamiltonianOperator {
    fn from(h: GridHamiltonian) -> Self {
        HamiltonianOperator::Grid(h)
    }
}

impl From<DenseHermitian> for HamiltonianOperator {
    fn from(h: DenseHermitian) -> Self {
        HamiltonianOperator::Dense(h)
    }
}

/// `Σ p_i²/(2μ_i) + Σ_{pairs} V_ij(|r_i - r_j|)` on a grid of dimension
/// `d·(N-1)`.
pub fn assemble_relative_hamiltonian(
    frame: &JacobiFrame,
    grid: &Grid,
    system: &ParticleSystem,
) -> Result<GridHamiltonian> {
    if frame.masses() != system.masses() {
        return Err(Error::InvalidSystem("frame and system disagree on the masses".into()));
    }
    let d = system.spatial_dims();
    if grid.dims() != system.relative_dims() {
        return Err(Error::InvalidSystem(format!(
            "relative motion of {} particles in {d}D needs a {}-dimensional grid, got {}",
            system.particle_count(),
            system.relative_dims(),
            grid.dims()
        )));
    }
    let axis_masses: Vec<f64> = frame.reduced_masses().iter().flat_map(|&mu| std::iter::repeat_n(mu, d)).collect();
    let kinetic = FourierMultiplier::kinetic(grid, &axis_masses)?;

    let h = grid.spacing();
    let pairs: Vec<(Vec<f64>, Potential)> = system
        .pairs()
        .iter()
        .filter(|(_, p)| !p.is_none())
        .map(|(&(i, j), &p)| (frame.pair_coefficients(i, j), p))
        .collect();
    let potential = grid.sample(|y| {
        pairs
            .iter()
            .map(|(coeffs, pot)| {
                let mut r2 = 0.0;
                for c in 0..d {
                    let s: f64 = coeffs.iter().enumerate().map(|(k, ck)| ck * y[k * d + c]).sum();
                    r2 += s * s;
                }
                pot.evaluate(r2.sqrt(), h)
            })
            .sum()
    });
    GridHamiltonian::new(kinetic, potential, system.tail(), axis_masses)
}

/// Dense matrix of `H` in the lattice-point basis, `M[a,b] = (Hδ_b)[a]`.
pub fn densify(h: &HamiltonianOperator) -> Result<DenseHermitian> {
    match h {
        HamiltonianOperator::Dense(m) => Ok(m.clone()),
        HamiltonianOperator::Grid(g) => densify_grid(g),
    }
}

pub fn densify_grid(h: &GridHamiltonian) -> Result<DenseHermitian> {
    let grid = h.grid();
    let size = grid.len();
    if size > DENSE_CAP {
        return Err(Error::CapExceeded { points: size, cap: DENSE_CAP });
    }
    // the kinetic part is translation invariant on the torus: one column fixes it
    let mut delta = vec![Complex64::new(0.0, 0.0); size];
    delta[0] = Complex64::new(1.0, 0.0);
    let column = LinearOperator::apply(h.kinetic(), &delta);
    let dims = grid.dims();
    let n = grid.n();
    let mut ia = [0usize; 3];
    let mut ib = [0usize; 3];
    DenseHermitian::from_fn(size, |a, b| {
        grid.unravel(a, &mut ia[..dims]);
        grid.unravel(b, &mut ib[..dims]);
        let mut offset = 0;
        for axis in 0..dims {
            offset = offset * n + (ia[axis] + n - ib[axis]) % n;
        }
        let mut v = column[offset];
        if a == b {
            v += h.potential()[a];
        }
        v
    })
}

/// Outcome of comparing a two-particle spectrum with the separated one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    /// Sorted eigenvalues of the two-particle Hamiltonian.
    pub full: Vec<f64>,
    /// Sorted sums `λ_C + λ_rel`.
    pub separated: Vec<f64>,
    pub max_deviation: f64,
    /// Index of the largest deviation in the sorted lists.
    pub worst_index: usize,
    pub tolerance: f64,
    pub matches: bool,
}

/// Multiset tolerance used by [`com_separation_check`].
pub const SEPARATION_TOLERANCE: f64 = 1e-8;

/// Two particles on a line: diagonalizes the full Hamiltonian on the
/// `(X_C, x_1)` tensor grid and compares with sums of center-of-mass and
/// relative eigenvalues.
pub fn com_separation_check(system: &ParticleSystem, grid: &Grid) -> Result<SeparationReport> {
    let frame = jacobi_frame(system.masses())?;
    com_separation_check_in_frame(system, grid, &frame)
}

/// As [`com_separation_check`], but separating with a caller-supplied frame.
///
/// The two-particle kinetic energy always uses the system's own masses,
/// `Σ p_{r_i}²/(2m_i)` with `p_r = T^⊤ (P_C, p_1)` expressed through the
/// frame's transform `T`; the separated side uses the frame's total and
/// reduced masses. A frame built from the wrong masses leaves cross terms and
/// a wrong `μ`, which the comparison detects.
pub fn com_separation_check_in_frame(
    system: &ParticleSystem,
    grid: &Grid,
    frame: &JacobiFrame,
) -> Result<SeparationReport> {
    if system.particle_count() != 2 || system.spatial_dims() != 1 || grid.dims() != 1 {
        return Err(Error::InvalidSystem("center-of-mass check needs two particles on a line and a 1D grid".into()));
    }
    if frame.masses().len() != 2 {
        return Err(Error::InvalidSystem("frame must describe two particles".into()));
    }
    let n = grid.n();
    if n * n > DENSE_CAP {
        return Err(Error::CapExceeded { points: n * n, cap: DENSE_CAP });
    }
    let tensor = Grid::new(2, n, grid.extent())?;
    let masses = system.masses();
    let kinetic = FourierMultiplier::new(&tensor, |q| {
        let p = frame.momenta_to_particles(q);
        p.iter().zip(masses).map(|(p, m)| p * p / (2.0 * m)).sum()
    })?;
    let h = grid.spacing();
    let interactions: Vec<(usize, usize, Potential)> = system.pairs().iter().map(|(&(i, j), &p)| (i, j, p)).collect();
    let potential = tensor.sample(|y| {
        let r = frame.to_particles(y);
        interactions.iter().map(|&(i, j, p)| p.evaluate((r[i] - r[j]).abs(), h)).sum()
    });
    let full_h =
        GridHamiltonian::new(kinetic, potential, system.tail(), vec![frame.total_mass(), frame.reduced_masses()[0]])?;
    let (mut full, _) = densify_grid(&full_h)?.eigen()?;

    let com = FourierMultiplier::free(grid, frame.total_mass())?;
    let kinetic_rel = FourierMultiplier::free(grid, frame.reduced_masses()[0])?;
    let potential_rel = grid.sample(|x| {
        let r = frame.to_particles(&[0.0, x[0]]);
        interactions.iter().map(|&(i, j, p)| p.evaluate((r[i] - r[j]).abs(), h)).sum()
    });
    let rel_h = GridHamiltonian::new(kinetic_rel, potential_rel, system.tail(), vec![frame.reduced_masses()[0]])?;
    let (rel, _) = densify_grid(&rel_h)?.eigen()?;
    let mut separated: Vec<f64> = com.values().iter().flat_map(|c| rel.iter().map(move |r| c + r)).collect();

    full.sort_by(f64::total_cmp);
    separated.sort_by(f64::total_cmp);
    let (worst_index, max_deviation) = full
        .iter()
        .zip(&separated)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    Ok(SeparationReport {
        full,
        separated,
        max_deviation,
        worst_index,
        tolerance: SEPARATION_TOLERANCE,
        matches: max_deviation <= SEPARATION_TOLERANCE,
    })
}
