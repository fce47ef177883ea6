//! Scenario files: TOML with one section per concern.
//!
//! See `docs/scenario.md` for the grammar.

use std::fmt;
use std::path::Path;

use localclock::clock::{Method, PropagatorConfig};
use localclock::grid::{Grid, DEFAULT_POINT_CAP};
use localclock::linalg::DENSE_CAP;
use localclock::nbody::Potential;
use localclock::resolvent::Solver;
use localclock::scattering::TestFunction;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[serde(alias = "theorem1")]
    Asymptotics,
    TwoClocks,
    Ergodic,
    Stone,
    FourierLaplace,
    KleinGordon,
    ComSeparation,
    Beats,
    Equivalence,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Asymptotics,
        Experiment::TwoClocks,
        Experiment::Ergodic,
        Experiment::Stone,
        Experiment::FourierLaplace,
        Experiment::KleinGordon,
        Experiment::ComSeparation,
        Experiment::Beats,
        Experiment::Equivalence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Asymptotics => "asymptotics",
            Experiment::TwoClocks => "two_clocks",
            Experiment::Ergodic => "ergodic",
            Experiment::Stone => "stone",
            Experiment::FourierLaplace => "fourier_laplace",
            Experiment::KleinGordon => "klein_gordon",
            Experiment::ComSeparation => "com_separation",
            Experiment::Beats => "beats",
            Experiment::Equivalence => "equivalence",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub experiment: Experiment,
    /// Seeds every randomized probe and matrix.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub system: SystemBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet: Option<PacketBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagator: Option<PropagatorConfig>,
    #[serde(default, alias = "theorem1", skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<AsymptoticsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_clocks: Option<TwoClocksBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodic: Option<ErgodicBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stone: Option<StoneBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier_laplace: Option<FourierLaplaceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub klein_gordon: Option<KleinGordonBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beats: Option<BeatsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "one_usize")]
    pub dims: usize,
    pub n: usize,
    pub extent: f64,
}

/// Either particles on the grid (`masses`, `potential`, `pairs`) or a
/// finite-dimensional matrix (`levels` or `random`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    #[serde(default = "unit_mass")]
    pub masses: Vec<f64>,
    /// External potential for one particle; for several, the potential of
    /// every pair not listed in `pairs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Potential>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairBlock>,
    /// Diagonal matrix with these entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Random Hermitian matrix of this dimension, drawn from `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<usize>,
}

impl Default for SystemBlock {
    fn default() -> Self {
        Self { masses: unit_mass(), potential: None, pairs: Vec::new(), levels: None, random: None }
    }
}

impl SystemBlock {
    pub fn is_finite(&self) -> bool {
        self.levels.is_some() || self.random.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairBlock {
    pub i: usize,
    pub j: usize,
    pub potential: Potential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Gaussian,
    Bump,
    Eigenstate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketBlock {
    #[serde(default = "gaussian")]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Gaussian `σ` or bump half-width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<Vec<f64>>,
    /// Eigen-index for `shape = "eigenstate"`, ascending energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

/// Probe vectors for finite-dimensional systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeBlock {
    /// Explicit vectors as `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vectors: Vec<Vec<[f64; 2]>>,
    /// Number of seeded random unit vectors added after `vectors`.
    #[serde(default)]
    pub random: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsBlock {
    pub radius: f64,
    /// Explicit sample times; otherwise a geometric grid from the fields below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default = "five")]
    pub t_min: f64,
    #[serde(default = "forty")]
    pub t_max: f64,
    #[serde(default = "eight")]
    pub count: usize,
    /// `-1` samples the negative time axis.
    #[serde(default = "plus_one")]
    pub direction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunction>,
    #[serde(default = "yes")]
    pub continuum_filter: bool,
    #[serde(default = "continuum_threshold")]
    pub continuum_threshold: f64,
    #[serde(default = "boundary_threshold")]
    pub boundary_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default = "minus_one")]
    pub exponent_target: f64,
    #[serde(default = "exponent_tolerance")]
    pub exponent_tolerance: f64,
    /// `bound` turns the run into a negative control: the state must stay put.
    #[serde(default)]
    pub expect: Expectation,
    /// Smallest admissible escape norm when `expect = "bound"`.
    #[serde(default = "bound_floor")]
    pub bound_floor: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    #[default]
    Scattering,
    Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoClocksBlock {
    /// Relative tolerance on both center speeds.
    #[serde(default = "one_percent")]
    pub speed_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicBlock {
    pub lambda: f64,
    #[serde(default = "ergodic_horizons")]
    pub horizons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Bound on the error at the longest horizon, relative to `‖ψ‖`.
    #[serde(default = "one_percent")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoneBlock {
    #[serde(default = "broadenings")]
    pub epsilons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    /// Energy step; defaults to half the smallest broadening.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default = "direct_dense")]
    pub solver: Solver,
    #[serde(default = "pointwise_tolerance")]
    pub pointwise_tolerance: f64,
    #[serde(default = "integral_tolerance")]
    pub integral_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierLaplaceBlock {
    /// Shifts as `[re, im]`.
    #[serde(default = "shifts")]
    pub shifts: Vec<[f64; 2]>,
    /// Horizon as a multiple of the shortest admissible one.
    #[serde(default = "horizon_factor")]
    pub horizon_factor: f64,
    /// Step as a fraction of the largest admissible one.
    #[serde(default = "step_factor")]
    pub step_factor: f64,
    #[serde(default = "fl_tolerance")]
    pub tolerance: f64,
    /// Truncation times for the tail study; empty skips it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tail_horizons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KleinGordonBlock {
    #[serde(default = "one_f64")]
    pub c: f64,
    #[serde(default)]
    pub mu_field: f64,
    #[serde(default)]
    pub center: f64,
    pub width: f64,
    #[serde(default = "energy_tolerance")]
    pub energy_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeatsBlock {
    /// Eigen-indices, superposed with equal amplitudes.
    pub components: Vec<usize>,
    /// Lattice index of the probe point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_index: Option<usize>,
    /// Probe position on a grid; the nearest lattice point is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_position: Option<Vec<f64>>,
    pub dt: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockChoice {
    Exact,
    /// `t → -t`, a negative control.
    TimeReversed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceBlock {
    /// Defaults to every eigenvalue (at most 16).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<Vec<f64>>,
    #[serde(default = "shifts")]
    pub shifts: Vec<[f64; 2]>,
    #[serde(default = "equivalence_horizon")]
    pub horizon: f64,
    #[serde(default = "broadenings")]
    pub broadenings: Vec<f64>,
    #[serde(default = "fl_tolerance")]
    pub fourier_laplace_tolerance: f64,
    #[serde(default = "pointwise_tolerance")]
    pub stone_tolerance: f64,
    #[serde(default = "exact_clock")]
    pub clock: ClockChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: None, formats: all_formats() }
    }
}

fn one_usize() -> usize {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn unit_mass() -> Vec<f64> {
    vec![1.0]
}
fn gaussian() -> Shape {
    Shape::Gaussian
}
fn five() -> f64 {
    5.0
}
fn forty() -> f64 {
    40.0
}
fn eight() -> usize {
    8
}
fn plus_one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn yes() -> bool {
    true
}
fn continuum_threshold() -> f64 {
    0.99
}
fn boundary_threshold() -> f64 {
    localclock::clock::DEFAULT_BOUNDARY_THRESHOLD
}
fn exponent_tolerance() -> f64 {
    0.2
}
fn bound_floor() -> f64 {
    0.9
}
fn one_percent() -> f64 {
    0.01
}
fn ergodic_horizons() -> Vec<f64> {
    vec![25.0, 50.0, 100.0, 200.0]
}
fn broadenings() -> Vec<f64> {
    vec![0.1, 0.05]
}
fn direct_dense() -> Solver {
    Solver::DirectDense
}
fn pointwise_tolerance() -> f64 {
    1e-8
}
fn integral_tolerance() -> f64 {
    0.03
}
fn shifts() -> Vec<[f64; 2]> {
    vec![[0.5, 0.5], [0.5, -0.5]]
}
fn horizon_factor() -> f64 {
    1.5
}
fn step_factor() -> f64 {
    0.1
}
fn fl_tolerance() -> f64 {
    1e-3
}
fn energy_tolerance() -> f64 {
    1e-6
}
fn equivalence_horizon() -> f64 {
    200.0
}
fn exact_clock() -> ClockChoice {
    ClockChoice::Exact
}
fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

/// Why a scenario was rejected.
#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{}", parse_message(.line, .column, .path, .message))]
    Parse {
        line: usize,
        column: usize,
        /// Dotted key path of the offending value, if known.
        path: String,
        message: String,
    },
    #[error("{} validation error(s):\n  {}", .0.len(), .0.join("\n  "))]
    Invalid(Vec<String>),
}

fn parse_message(line: &usize, column: &usize, path: &str, message: &str) -> String {
    if path.is_empty() || path == "." {
        format!("parse error at line {line}, column {column}: {message}")
    } else {
        format!("parse error at line {line}, column {column} (key `{path}`): {message}")
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_str(&text)
}

/// Parses and validates scenario text.
pub fn parse_str(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario = deserialize(text)?;
    let errors = scenario.validate();
    if errors.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(errors))
    }
}

fn deserialize(text: &str) -> Result<Scenario, ScenarioError> {
    let position = |span: Option<std::ops::Range<usize>>| {
        let offset = span.map_or(0, |s| s.start).min(text.len());
        let before = &text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    };
    let de = toml::Deserializer::parse(text).map_err(|e| {
        let (line, column) = position(e.span());
        ScenarioError::Parse { line, column, path: String::new(), message: e.message().trim().to_string() }
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = position(inner.span());
        ScenarioError::Parse { line, column, message: describe(&path, inner.message().trim()), path }
    })
}

/// Rewrites serde's unknown-field and unknown-variant messages so that they
/// name the key and its section.
fn describe(path: &str, message: &str) -> String {
    if let Some(rest) = message.strip_prefix("unknown field `") {
        let key = rest.split('`').next().unwrap_or("");
        let section = section_of(path, key);
        let expected = rest.split_once(", expected ").map_or("", |(_, e)| e);
        return format!("unknown key `{key}` in section [{section}]; expected {expected}");
    }
    if path == "experiment" && message.starts_with("unknown variant") {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.as_str()).collect();
        let given = message.split('`').nth(1).unwrap_or("");
        return format!("unknown experiment `{given}`; expected one of {} (or theorem1)", names.join(", "));
    }
    message.to_string()
}

fn section_of(path: &str, key: &str) -> String {
    let trimmed = path.strip_suffix(key).unwrap_or(path).trim_end_matches('.');
    if trimmed.is_empty() || trimmed == "." {
        "top level".to_string()
    } else {
        trimmed.to_string()
    }
}

impl Scenario {
    /// Canonical TOML text; re-parses to an equal scenario.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Every constraint violation, in a stable order.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Validator::default();
        self.check_blocks(&mut v);
        let grid = self.grid.as_ref().and_then(|g| check_grid(g, &mut v));
        self.check_system(grid.as_ref(), &mut v);
        self.check_packet(grid.as_ref(), &mut v);
        self.check_probe(&mut v);
        self.check_propagator(&mut v);
        self.check_experiment(grid.as_ref(), &mut v);
        self.check_output(&mut v);
        v.errors
    }

    fn needs_grid(&self) -> bool {
        match self.experiment {
            Experiment::Asymptotics | Experiment::TwoClocks | Experiment::KleinGordon | Experiment::ComSeparation => {
                true
            }
            _ => !self.system.is_finite(),
        }
    }

    /// Whether the experiment diagonalizes or densifies the Hamiltonian.
    fn needs_dense(&self) -> bool {
        match self.experiment {
            Experiment::Asymptotics => self.system.potential.is_some() || !self.system.pairs.is_empty(),
            Experiment::Ergodic | Experiment::Stone | Experiment::Beats | Experiment::Equivalence => true,
            Experiment::FourierLaplace => true,
            _ => false,
        }
    }

    fn check_blocks(&self, v: &mut Validator) {
        let e = self.experiment;
        if self.needs_grid() && self.grid.is_none() {
            v.push(format!("experiment `{e}` needs a [grid] section"));
        }
        let block = match e {
            Experiment::Asymptotics => self.asymptotics.is_some(),
            Experiment::Ergodic => self.ergodic.is_some(),
            Experiment::KleinGordon => self.klein_gordon.is_some(),
            Experiment::Beats => self.beats.is_some(),
            _ => true,
        };
        if !block {
            v.push(format!("experiment `{e}` needs a [{}] section", e.as_str()));
        }
        let state = match e {
            Experiment::Asymptotics | Experiment::TwoClocks => Some("packet"),
            Experiment::Ergodic | Experiment::Stone | Experiment::FourierLaplace | Experiment::Equivalence => {
                Some(if self.system.is_finite() { "probe" } else { "packet" })
            }
            _ => None,
        };
        match state {
            Some("packet") if self.packet.is_none() => v.push(format!("experiment `{e}` needs a [packet] section")),
            Some("probe") if self.probe.is_none() => v.push(format!("experiment `{e}` needs a [probe] section")),
            _ => {}
        }
        if matches!(e, Experiment::TwoClocks | Experiment::KleinGordon) && self.propagator.is_none() {
            v.push(format!("experiment `{e}` needs a [propagator] section"));
        }
        if e == Experiment::ComSeparation && self.system.masses.len() != 2 {
            v.push("experiment `com_separation` needs exactly two masses in [system]".into());
        }
        if self.system.is_finite() && self.needs_grid() {
            v.push(format!("experiment `{e}` runs on a grid; system.levels and system.random are not allowed"));
        }
    }

    fn check_system(&self, grid: Option<&Grid>, v: &mut Validator) {
        let s = &self.system;
        if s.levels.is_some() && s.random.is_some() {
            v.push("system: give either levels or random, not both".into());
        }
        if let Some(levels) = &s.levels {
            if levels.is_empty() || levels.iter().any(|l| !l.is_finite()) {
                v.push("system.levels must be a nonempty list of finite numbers".into());
            }
            if levels.len() > DENSE_CAP {
                v.push(format!("system.levels has {} entries, above the dense cap {DENSE_CAP}", levels.len()));
            }
        }
        if let Some(n) = s.random {
            if n == 0 || n > DENSE_CAP {
                v.push(format!("system.random must lie in 1..={DENSE_CAP}, got {n}"));
            }
        }
        if s.is_finite() {
            if s.potential.is_some() || !s.pairs.is_empty() {
                v.push("system: potentials do not apply to a finite-dimensional system".into());
            }
            return;
        }
        if s.masses.is_empty() || s.masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            v.push("system.masses must be positive and finite".into());
        }
        if let Some(p) = &s.potential {
            if let Err(e) = p.validate() {
                v.push(format!("system.potential: {e}"));
            }
        }
        let count = s.masses.len();
        for (k, pair) in s.pairs.iter().enumerate() {
            if !(pair.i < pair.j && pair.j < count) {
                v.push(format!("system.pairs[{k}]: need i < j < {count}, got ({}, {})", pair.i, pair.j));
            }
            if let Err(e) = pair.potential.validate() {
                v.push(format!("system.pairs[{k}].potential: {e}"));
            }
        }
        if count == 1 && !s.pairs.is_empty() {
            v.push("system.pairs needs at least two masses".into());
        }
        if let Some(g) = grid {
            if count >= 2 && g.dims() % (count - 1) != 0 {
                v.push(format!(
                    "grid.dims = {} must be a multiple of the {} relative coordinates",
                    g.dims(),
                    count - 1
                ));
            }
            if self.needs_dense() && g.len() > DENSE_CAP {
                v.push(format!(
                    "experiment `{}` diagonalizes the grid operator; {} lattice points exceed the dense cap {DENSE_CAP}",
                    self.experiment,
                    g.len()
                ));
            }
        }
    }

    fn check_packet(&self, grid: Option<&Grid>, v: &mut Validator) {
        let Some(p) = &self.packet else { return };
        let dims = grid.map_or(0, |g| g.dims());
        match p.shape {
            Shape::Gaussian | Shape::Bump => match p.width {
                Some(w) if w > 0.0 && w.is_finite() => {}
                Some(w) => v.push(format!("packet.width must be positive, got {w}")),
                None => v.push("packet.width is required for gaussian and bump packets".into()),
            },
            Shape::Eigenstate => {
                if p.index.is_none() {
                    v.push("packet.index is required for eigenstate packets".into());
                }
                if let Some(g) = grid {
                    if g.len() > DENSE_CAP {
                        v.push(format!("eigenstate packets need at most {DENSE_CAP} lattice points"));
                    }
                    if p.index.is_some_and(|i| i >= g.len()) {
                        v.push(format!("packet.index must be below {}", g.len()));
                    }
                }
            }
        }
        for (name, value) in [("center", &p.center), ("momentum", &p.momentum)] {
            if let Some(x) = value {
                if grid.is_some() && x.len() != dims {
                    v.push(format!("packet.{name} has {} components, the grid has {dims} axes", x.len()));
                }
                if x.iter().any(|c| !c.is_finite()) {
                    v.push(format!("packet.{name} must be finite"));
                }
            }
        }
    }

    fn check_probe(&self, v: &mut Validator) {
        let Some(p) = &self.probe else { return };
        if p.vectors.is_empty() && p.random == 0 {
            v.push("probe: give vectors or a positive random count".into());
        }
        if let Some(dim) = self.finite_dim() {
            for (k, vec) in p.vectors.iter().enumerate() {
                if vec.len() != dim {
                    v.push(format!("probe.vectors[{k}] has {} entries, the system has dimension {dim}", vec.len()));
                }
                if vec.iter().all(|[re, im]| *re == 0.0 && *im == 0.0) {
                    v.push(format!("probe.vectors[{k}] is zero"));
                }
            }
        }
    }

    pub(crate) fn finite_dim(&self) -> Option<usize> {
        self.system.levels.as_ref().map(|l| l.len()).or(self.system.random)
    }

    fn check_propagator(&self, v: &mut Validator) {
        let Some(p) = &self.propagator else { return };
        if let Err(e) = p.validate() {
            v.push(format!("propagator: {e}"));
        }
        let expected = match self.experiment {
            Experiment::TwoClocks => Some(Method::DispersiveExact),
            Experiment::KleinGordon => Some(Method::KgLeapfrog),
            _ => None,
        };
        if let Some(m) = expected {
            if p.method != m {
                v.push(format!("propagator.method must be {} for experiment `{}`", m.as_str(), self.experiment));
            }
        }
    }

    fn check_experiment(&self, grid: Option<&Grid>, v: &mut Validator) {
        match self.experiment {
            Experiment::Asymptotics => {
                if let Some(a) = &self.asymptotics {
                    check_asymptotics(a, grid, v);
                }
            }
            Experiment::TwoClocks => {
                if grid.is_some_and(|g| g.dims() != 1) {
                    v.push("experiment `two_clocks` needs a 1D grid".into());
                }
                if let Some(b) = &self.two_clocks {
                    positive(v, "two_clocks.speed_tolerance", b.speed_tolerance);
                }
                if let Some(p) = &self.propagator {
                    if p.t_final <= 0.0 {
                        v.push("propagator.t_final must be positive for `two_clocks`".into());
                    }
                    if p.validate().is_ok() && p.steps() / p.record_every < 1 {
                        v.push("propagator: record_every leaves fewer than two samples".into());
                    }
                }
                if self.packet.as_ref().is_some_and(|p| p.shape == Shape::Eigenstate) {
                    v.push("experiment `two_clocks` needs a gaussian or bump packet".into());
                }
            }
            Experiment::Ergodic => {
                if let Some(b) = &self.ergodic {
                    finite(v, "ergodic.lambda", b.lambda);
                    if b.horizons.is_empty() {
                        v.push("ergodic.horizons must not be empty".into());
                    }
                    for t in &b.horizons {
                        positive(v, "ergodic.horizons entries", *t);
                    }
                    if let Some(s) = b.step {
                        positive(v, "ergodic.step", s);
                    }
                    positive(v, "ergodic.tolerance", b.tolerance);
                }
            }
            Experiment::Stone => {
                let b = self.stone_block();
                check_broadenings(v, "stone.epsilons", &b.epsilons);
                if let (Some(lo), Some(hi)) = (b.lambda_min, b.lambda_max) {
                    if !(lo < hi) {
                        v.push(format!("stone: lambda_min = {lo} must be below lambda_max = {hi}"));
                    }
                }
                if let Some(step) = b.step {
                    positive(v, "stone.step", step);
                    let smallest = b.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
                    if step > 0.5 * smallest {
                        v.push(format!("stone.step = {step} must be at most half the smallest epsilon ({smallest})"));
                    }
                }
                positive(v, "stone.pointwise_tolerance", b.pointwise_tolerance);
                positive(v, "stone.integral_tolerance", b.integral_tolerance);
            }
            Experiment::FourierLaplace => {
                let b = self.fourier_laplace_block();
                check_shifts(v, "fourier_laplace.shifts", &b.shifts);
                if !(b.horizon_factor >= 1.0) {
                    v.push(format!("fourier_laplace.horizon_factor must be at least 1, got {}", b.horizon_factor));
                }
                if !(b.step_factor > 0.0 && b.step_factor < 1.0) {
                    v.push(format!("fourier_laplace.step_factor must lie in (0, 1), got {}", b.step_factor));
                }
                positive(v, "fourier_laplace.tolerance", b.tolerance);
                for t in &b.tail_horizons {
                    positive(v, "fourier_laplace.tail_horizons entries", *t);
                }
            }
            Experiment::KleinGordon => {
                if let Some(b) = &self.klein_gordon {
                    positive(v, "klein_gordon.c", b.c);
                    if !(b.mu_field >= 0.0 && b.mu_field.is_finite()) {
                        v.push(format!("klein_gordon.mu_field must be nonnegative, got {}", b.mu_field));
                    }
                    finite(v, "klein_gordon.center", b.center);
                    positive(v, "klein_gordon.width", b.width);
                    positive(v, "klein_gordon.energy_tolerance", b.energy_tolerance);
                }
                if grid.is_some_and(|g| g.dims() != 1) {
                    v.push("experiment `klein_gordon` needs a 1D grid".into());
                }
            }
            Experiment::ComSeparation => {
                if let Some(g) = grid {
                    if g.dims() != 1 {
                        v.push("experiment `com_separation` needs a 1D grid".into());
                    }
                    if g.n() * g.n() > DENSE_CAP {
                        v.push(format!("experiment `com_separation` needs n² ≤ {DENSE_CAP}, got n = {}", g.n()));
                    }
                }
            }
            Experiment::Beats => {
                if let Some(b) = &self.beats {
                    if b.components.is_empty() {
                        v.push("beats.components must not be empty".into());
                    }
                    let dim = self.finite_dim().or(grid.map(|g| g.len()));
                    if let Some(d) = dim {
                        if b.components.iter().any(|&j| j >= d) {
                            v.push(format!("beats.components must be below the dimension {d}"));
                        }
                        if b.probe_index.is_some_and(|i| i >= d) {
                            v.push(format!("beats.probe_index must be below the dimension {d}"));
                        }
                    }
                    match (b.probe_index, &b.probe_position) {
                        (Some(_), Some(_)) => v.push("beats: give probe_index or probe_position, not both".into()),
                        (None, Some(x)) => {
                            if self.system.is_finite() {
                                v.push("beats.probe_position needs a grid system".into());
                            } else if let Some(g) = grid {
                                if x.len() != g.dims() {
                                    v.push(format!("beats.probe_position needs {} components", g.dims()));
                                }
                            }
                        }
                        _ => {}
                    }
                    positive(v, "beats.dt", b.dt);
                    if b.samples < 8 {
                        v.push(format!("beats.samples must be at least 8, got {}", b.samples));
                    }
                }
            }
            Experiment::Equivalence => {
                let b = self.equivalence_block();
                check_shifts(v, "equivalence.shifts", &b.shifts);
                positive(v, "equivalence.horizon", b.horizon);
                check_broadenings(v, "equivalence.broadenings", &b.broadenings);
                positive(v, "equivalence.fourier_laplace_tolerance", b.fourier_laplace_tolerance);
                positive(v, "equivalence.stone_tolerance", b.stone_tolerance);
                if let Some(e) = &b.energies {
                    if e.iter().any(|x| !x.is_finite()) {
                        v.push("equivalence.energies must be finite".into());
                    }
                }
            }
        }
    }

    fn check_output(&self, v: &mut Validator) {
        if self.output.formats.is_empty() {
            v.push("output.formats must name at least one of csv, json".into());
        }
        if self.output.directory.as_deref() == Some("") {
            v.push("output.directory must not be empty".into());
        }
    }

    pub(crate) fn stone_block(&self) -> StoneBlock {
        self.stone.clone().unwrap_or_else(deserialize_defaults)
    }

    pub(crate) fn fourier_laplace_block(&self) -> FourierLaplaceBlock {
        self.fourier_laplace.clone().unwrap_or_else(deserialize_defaults)
    }

    pub(crate) fn two_clocks_block(&self) -> TwoClocksBlock {
        self.two_clocks.clone().unwrap_or_else(deserialize_defaults)
    }

    pub(crate) fn equivalence_block(&self) -> EquivalenceBlock {
        self.equivalence.clone().unwrap_or_else(deserialize_defaults)
    }
}

/// A block with every field at its default.
fn deserialize_defaults<T: serde::de::DeserializeOwned>() -> T {
    toml::from_str("").expect("every field of this block has a default")
}

#[derive(Default)]
struct Validator {
    errors: Vec<String>,
}

impl Validator {
    fn push(&mut self, message: String) {
        self.errors.push(message);
    }
}

fn positive(v: &mut Validator, name: &str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        v.push(format!("{name} must be positive and finite, got {x}"));
    }
}

fn finite(v: &mut Validator, name: &str, x: f64) {
    if !x.is_finite() {
        v.push(format!("{name} must be finite, got {x}"));
    }
}

fn check_broadenings(v: &mut Validator, name: &str, eps: &[f64]) {
    if eps.is_empty() {
        v.push(format!("{name} must not be empty"));
    }
    for e in eps {
        positive(v, &format!("{name} entries"), *e);
    }
}

fn check_shifts(v: &mut Validator, name: &str, shifts: &[[f64; 2]]) {
    if shifts.is_empty() {
        v.push(format!("{name} must not be empty"));
    }
    for [re, im] in shifts {
        if !re.is_finite() || !im.is_finite() || *im == 0.0 {
            v.push(format!("{name}: [{re}, {im}] must be finite and off the real axis"));
        }
    }
}

fn check_grid(g: &GridBlock, v: &mut Validator) -> Option<Grid> {
    let before = v.errors.len();
    if !(1..=3).contains(&g.dims) {
        v.push(format!("grid.dims must be 1, 2 or 3, got {}", g.dims));
    }
    if !g.n.is_power_of_two() || g.n < 2 {
        v.push(format!("grid.n must be a power of two (at least 2), got {}", g.n));
    }
    if !(g.extent > 0.0 && g.extent.is_finite()) {
        v.push(format!("grid.extent must be positive and finite, got {}", g.extent));
    }
    if v.errors.len() > before {
        return None;
    }
    match Grid::new(g.dims, g.n, g.extent) {
        Ok(grid) => Some(grid),
        Err(e) => {
            v.push(format!("grid: {e} (cap {DEFAULT_POINT_CAP} points)"));
            None
        }
    }
}

fn check_asymptotics(a: &AsymptoticsBlock, grid: Option<&Grid>, v: &mut Validator) {
    if let Some(g) = grid {
        let limit = 0.5 * g.extent();
        if !(a.radius > 0.0 && a.radius < limit) {
            v.push(format!("asymptotics.radius must lie in (0, {limit}), got {}", a.radius));
        }
        if let Some(o) = &a.origin {
            if o.len() != g.dims() {
                v.push(format!("asymptotics.origin needs {} components", g.dims()));
            }
        }
    }
    match &a.times {
        Some(times) => {
            let config = localclock::scattering::SuiteConfig::new(a.radius, times.clone());
            if let Err(e) = config.validate() {
                v.push(format!("asymptotics.times: {e}"));
            }
        }
        None => {
            if let Err(e) = localclock::scattering::geometric_times(a.t_min, a.t_max, a.count, a.direction) {
                v.push(format!("asymptotics: {e}"));
            }
        }
    }
    if !(a.continuum_threshold > 0.0 && a.continuum_threshold <= 1.0) {
        v.push(format!("asymptotics.continuum_threshold must lie in (0, 1], got {}", a.continuum_threshold));
    }
    positive(v, "asymptotics.boundary_threshold", a.boundary_threshold);
    finite(v, "asymptotics.exponent_target", a.exponent_target);
    positive(v, "asymptotics.exponent_tolerance", a.exponent_tolerance);
    if !(0.0..=1.0).contains(&a.bound_floor) {
        v.push(format!("asymptotics.bound_floor must lie in [0, 1], got {}", a.bound_floor));
    }
}
