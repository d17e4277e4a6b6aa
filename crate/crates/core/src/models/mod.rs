//! Declarative model descriptions and their compilation into exact
//! generators and effective families.

pub mod builtins;
pub mod continuum;
pub mod discretized;
pub mod lambda;

use faer::{Col, Mat};
use serde::{Deserialize, Serialize};

use crate::effective::EffectiveFamily;
use crate::linalg::{self, ZERO};
use crate::propagation;
use crate::superop::{self, Partition};
use crate::{Error, NumericPolicy, Operator, Result, StateVec, SuperOperator, C64};

pub use continuum::{continuum_dilation, continuum_effective_family};
pub use discretized::DiscretizedContinuum;
pub use lambda::{lambda_effective_family, lambda_exact_generator, Temperature};

/// Current version of the JSON model format.
pub const SCHEMA_VERSION: u32 = 1;

/// Real number or `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl Amplitude {
    pub fn value(&self) -> C64 {
        match *self {
            Amplitude::Real(x) => C64::new(x, 0.0),
            Amplitude::Complex([re, im]) => C64::new(re, im),
        }
    }
}

impl From<f64> for Amplitude {
    fn from(x: f64) -> Self {
        Amplitude::Real(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub label: String,
    pub energy: f64,
}

/// Hermitian coupling `V_ij |g_i><g_j| + h.c.` between ground levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundCoupling {
    pub i: usize,
    pub j: usize,
    pub value: Amplitude,
}

/// Discrete excited level with couplings `V_i |g_i><e| + h.c.`, decay
/// `e -> g_i` at `decay_rates[i]` and pumping `g_i -> e` at `pump_rates[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitedLevel {
    pub label: String,
    pub energy: f64,
    pub couplings: Vec<Amplitude>,
    pub decay_rates: Vec<f64>,
    #[serde(default)]
    pub pump_rates: Vec<f64>,
}

/// Flat wide-band continuum with density of states `density`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Continuum {
    pub label: String,
    pub density: f64,
    pub couplings: Vec<Amplitude>,
    pub decay_rates: Vec<f64>,
}

/// Prefactor relating continuum couplings to the injection rate,
/// `gamma = c * pi * n * |V|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    /// `c = 2`: the golden-rule rate of a discretized continuum.
    #[default]
    GoldenRule,
    /// `c = 1`.
    HalfGoldenRule,
}

impl RateConvention {
    pub fn factor(self) -> f64 {
        match self {
            RateConvention::GoldenRule => 2.0,
            RateConvention::HalfGoldenRule => 1.0,
        }
    }
}

/// Levels, couplings and rates of a model; energies and rates are in units
/// of a reference coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub ground_levels: Vec<Level>,
    #[serde(default)]
    pub ground_couplings: Vec<GroundCoupling>,
    #[serde(default)]
    pub excited_levels: Vec<ExcitedLevel>,
    #[serde(default)]
    pub continua: Vec<Continuum>,
    #[serde(default)]
    pub rate_convention: RateConvention,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}

fn check_rates(what: &str, rates: &[f64], n: usize, allow_empty: bool) -> Result<()> {
    if rates.is_empty() && allow_empty {
        return Ok(());
    }
    if rates.len() != n {
        return Err(Error::InvalidModel(format!("{what}: expected {n} entries, got {}", rates.len())));
    }
    if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::InvalidModel(format!("{what}: rate {r} must be finite and nonnegative")));
    }
    Ok(())
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            let msg = msg.strip_suffix(&suffix).unwrap_or(&msg);
            Error::InvalidModel(format!("line {}, column {}: {msg}", e.line(), e.column()))
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidModel(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        let ng = self.ground_levels.len();
        if ng == 0 {
            return Err(Error::InvalidModel("at least one ground level is required".into()));
        }
        for l in self.ground_levels.iter().chain(self.excited_levels.iter().map(|_| &self.ground_levels[0])) {
            if !l.energy.is_finite() {
                return Err(Error::InvalidModel(format!("level {} has non-finite energy", l.label)));
            }
        }
        for c in &self.ground_couplings {
            if c.i >= ng || c.j >= ng || c.i == c.j {
                return Err(Error::InvalidModel(format!(
                    "ground coupling ({}, {}) must join two distinct ground levels",
                    c.i, c.j
                )));
            }
        }
        for e in &self.excited_levels {
            if !e.energy.is_finite() {
                return Err(Error::InvalidModel(format!("level {} has non-finite energy", e.label)));
            }
            if e.couplings.len() != ng {
                return Err(Error::InvalidModel(format!("{}: expected {ng} couplings", e.label)));
            }
            check_rates(&format!("{} decay_rates", e.label), &e.decay_rates, ng, false)?;
            check_rates(&format!("{} pump_rates", e.label), &e.pump_rates, ng, true)?;
        }
        for c in &self.continua {
            if !(c.density.is_finite() && c.density > 0.0) {
                return Err(Error::InvalidModel(format!("{}: density must be positive", c.label)));
            }
            if c.couplings.len() != ng {
                return Err(Error::InvalidModel(format!("{}: expected {ng} couplings", c.label)));
            }
            check_rates(&format!("{} decay_rates", c.label), &c.decay_rates, ng, false)?;
        }
        Ok(())
    }

    pub fn n_ground(&self) -> usize {
        self.ground_levels.len()
    }

    pub fn n_excited(&self) -> usize {
        self.excited_levels.len()
    }

    /// `PHP` on the ground manifold.
    pub fn ground_hamiltonian(&self) -> Operator {
        let n = self.n_ground();
        let mut h = Mat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(self.ground_levels[i].energy, 0.0)
            } else {
                ZERO
            }
        });
        for c in &self.ground_couplings {
            let v = c.value.value();
            h[(c.i, c.j)] += v;
            h[(c.j, c.i)] += v.conj();
        }
        h
    }

    /// Rows `<f| H |g_j>` for every excited level and every continuum bright
    /// state; a ground state is dark exactly when this matrix annihilates it.
    pub fn fast_coupling_matrix(&self) -> Mat<C64> {
        let ng = self.n_ground();
        let rows: Vec<Vec<C64>> = self
            .excited_levels
            .iter()
            .map(|e| e.couplings.iter().map(|v| v.value().conj()).collect())
            .chain(
                self.continua
                    .iter()
                    .map(|c| c.couplings.iter().map(|v| v.value().conj()).collect()),
            )
            .collect();
        Mat::from_fn(rows.len(), ng, |i, j| rows[i][j])
    }

    pub fn has_pumping(&self) -> bool {
        self.excited_levels.iter().any(|e| e.pump_rates.iter().any(|&r| r > 0.0))
    }

    /// Copy with all pump rates removed.
    pub fn without_pumping(&self) -> Self {
        let mut s = self.clone();
        for e in &mut s.excited_levels {
            e.pump_rates.clear();
        }
        s
    }

    /// Largest rate or energy scale, used to size discretization grids.
    pub fn rate_scale(&self) -> f64 {
        let mut scale = 0.0f64;
        for e in &self.excited_levels {
            scale = scale.max(e.decay_rates.iter().sum());
            scale = scale.max(e.pump_rates.iter().sum());
        }
        for c in &self.continua {
            scale = scale.max(c.decay_rates.iter().sum());
            let v2: f64 = c.couplings.iter().map(|v| v.value().norm_sqr()).sum();
            scale = scale.max(self.rate_convention.factor() * std::f64::consts::PI * c.density * v2);
        }
        let e: Vec<f64> = self.ground_levels.iter().map(|l| l.energy).collect();
        let spread = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - e.iter().cloned().fold(f64::INFINITY, f64::min);
        scale.max(spread)
    }
}

/// Slow-space vector of `|g_i><g_i|` for an `r`-level ground manifold.
pub fn ground_population(r: usize, i: usize) -> StateVec {
    Col::from_fn(r * r, |k| if k == i * r + i { C64::new(1.0, 0.0) } else { ZERO })
}

/// Slow-space vector of the pure state `psi`.
pub fn pure_state(psi: &[C64]) -> StateVec {
    let r = psi.len();
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Col::from_fn(r * r, |k| psi[k % r] * psi[k / r].conj() / (norm * norm))
}

/// Exact slow dynamics `extract exp(G t) embed x0`.
#[derive(Debug, Clone)]
pub struct ExactSlowDynamics {
    pub generator: SuperOperator,
    pub embed: Mat<C64>,
    pub extract: Mat<C64>,
}

impl ExactSlowDynamics {
    pub fn from_generator(l: SuperOperator, partition: &Partition) -> Self {
        Self {
            embed: partition.slow_isometry().clone(),
            extract: partition.slow_isometry().adjoint().to_owned(),
            generator: l,
        }
    }

    pub fn slow_dim(&self) -> usize {
        self.embed.ncols()
    }

    pub fn evolve(&self, x0: &StateVec, t: f64) -> Result<StateVec> {
        let y0 = &self.embed * x0;
        let y = propagation::expm_apply(self.generator.as_ref(), t, &y0)?;
        Ok(&self.extract * y)
    }

    pub fn trajectory(&self, x0: &StateVec, times: &[f64]) -> Result<Vec<StateVec>> {
        let y0 = &self.embed * x0;
        let ys = propagation::expm_trajectory(self.generator.as_ref(), times, &y0)?;
        Ok(ys.iter().map(|y| &self.extract * y).collect())
    }
}

/// Which effective family a compiled model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "order")]
pub enum Reduction {
    /// Schur complement of the exact generator.
    Exact,
    /// Closed-form family of the model class.
    ClosedForm,
    /// Truncated Neumann series of the fast block.
    Perturbative(usize),
}

/// A model with its effective family and its exact slow dynamics.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub name: String,
    pub family: EffectiveFamily,
    pub exact: ExactSlowDynamics,
    /// Full Lindblad generator and partition, for discrete models.
    pub full: Option<(SuperOperator, Partition)>,
    pub policy: NumericPolicy,
}

impl CompiledModel {
    /// Slow part of the exact steady state, when a finite generator exists.
    pub fn exact_steady_slow(&self) -> Result<Option<StateVec>> {
        match &self.full {
            Some((l, part)) => {
                let ss = propagation::steady_state_exact(l.as_ref(), &self.policy)?;
                Ok(Some(part.project(&ss)?))
            }
            None => Ok(None),
        }
    }
}

/// Compiles a model. Continuum models always use their closed form; the
/// `Exact` and `ClosedForm` reductions coincide for them.
pub fn compile(spec: &ModelSpec, reduction: Reduction, policy: &NumericPolicy) -> Result<CompiledModel> {
    spec.validate()?;
    let has_cont = !spec.continua.is_empty();
    let has_exc = !spec.excited_levels.is_empty();
    if has_cont && has_exc {
        return Err(Error::InvalidModel(
            "models mixing discrete excited levels and continua are not supported".into(),
        ));
    }
    if has_cont || !has_exc {
        if let Reduction::Perturbative(_) = reduction {
            return Err(Error::InvalidModel("continuum models have no perturbative reduction".into()));
        }
        let family = continuum_effective_family(spec)?;
        let exact = continuum_dilation(spec)?;
        return Ok(CompiledModel {
            name: spec.name.clone(),
            family,
            exact,
            full: None,
            policy: *policy,
        });
    }
    let l = lambda_exact_generator(spec)?;
    let part = Partition::new(superop::leading_projector(spec.n_ground() + spec.n_excited(), spec.n_ground()).as_ref(), policy)?;
    let family = match reduction {
        Reduction::Exact => EffectiveFamily::exact(l.as_ref(), &part, policy)?,
        Reduction::ClosedForm => {
            let t = if spec.has_pumping() { Temperature::Finite } else { Temperature::Zero };
            lambda_effective_family(spec, t)?
        }
        Reduction::Perturbative(order) => {
            let (h, jumps) = lambda::discrete_operators(spec)?;
            let split = crate::effective::build_ld_w(h.as_ref(), &jumps, part.projector().as_ref(), policy)?;
            if linalg::max_abs((split.partition.basis() - part.basis()).as_ref()) > 1e-12 {
                return Err(Error::InvalidModel(
                    "perturbative reduction needs a diagonal ground Hamiltonian".into(),
                ));
            }
            EffectiveFamily::perturbative(l.as_ref(), &split, order)?
        }
    };
    Ok(CompiledModel {
        name: spec.name.clone(),
        family,
        exact: ExactSlowDynamics::from_generator(l.clone(), &part),
        full: Some((l, part)),
        policy: *policy,
    })
}

/// Residuals of the dark-state conditions `[PHP, rho] = 0` and
/// `QHP rho = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct CptReport {
    pub commutator_residual: f64,
    pub coupling_residual: f64,
    pub passes: bool,
}

pub fn cpt_check(spec: &ModelSpec, rho: &StateVec) -> Result<CptReport> {
    let r = spec.n_ground();
    if rho.nrows() != r * r {
        return Err(Error::Dimension("state is not on the ground manifold".into()));
    }
    let m = superop::unvectorize(rho)?;
    let h = spec.ground_hamiltonian();
    let comm = &h * &m - &m * &h;
    let c = spec.fast_coupling_matrix();
    let commutator_residual = comm.norm_l2();
    let coupling_residual = (&c * &m).norm_l2();
    Ok(CptReport {
        commutator_residual,
        coupling_residual,
        passes: commutator_residual <= 1e-10 && coupling_residual <= 1e-10,
    })
}

/// Normalized ground state annihilated by every fast coupling, if unique.
pub fn dark_state(spec: &ModelSpec) -> Result<Option<Vec<C64>>> {
    let c = spec.fast_coupling_matrix();
    let k = linalg::kernel(c.as_ref(), 1e-12)?;
    if k.ncols() != 1 {
        return Ok(None);
    }
    Ok(Some((0..k.nrows()).map(|i| k[(i, 0)]).collect()))
}

/// Continuum model with `n = 2/(pi Gamma)` standing in for a single excited
/// level of total decay `Gamma`.
pub fn large_gamma_map(spec: &ModelSpec) -> Result<ModelSpec> {
    spec.validate()?;
    if spec.n_excited() != 1 || !spec.continua.is_empty() {
        return Err(Error::InvalidModel("large-Gamma map needs exactly one excited level".into()));
    }
    let e = &spec.excited_levels[0];
    if e.pump_rates.iter().any(|&r| r > 0.0) {
        return Err(Error::InvalidModel("large-Gamma map does not support pumping".into()));
    }
    let gamma: f64 = e.decay_rates.iter().sum();
    if gamma <= 0.0 {
        return Err(Error::InvalidModel("total decay must be positive".into()));
    }
    Ok(ModelSpec {
        schema_version: SCHEMA_VERSION,
        name: format!("{}_continuum", spec.name),
        ground_levels: spec.ground_levels.clone(),
        ground_couplings: spec.ground_couplings.clone(),
        excited_levels: Vec::new(),
        continua: vec![Continuum {
            label: e.label.clone(),
            density: 2.0 / (std::f64::consts::PI * gamma),
            couplings: e.couplings.clone(),
            decay_rates: e.decay_rates.clone(),
        }],
        rate_convention: RateConvention::GoldenRule,
    })
}

/// `delta_j = -i omega_j / (Gamma/2)` with `omega_j = E_e - E_j`.
pub fn smallness_parameters(spec: &ModelSpec) -> Result<Vec<C64>> {
    if spec.n_excited() != 1 {
        return Err(Error::InvalidModel("needs exactly one excited level".into()));
    }
    let e = &spec.excited_levels[0];
    let gamma: f64 = e.decay_rates.iter().sum();
    if gamma <= 0.0 {
        return Err(Error::InvalidModel("total decay must be positive".into()));
    }
    Ok(spec
        .ground_levels
        .iter()
        .map(|g| C64::new(0.0, -(e.energy - g.energy)) / (gamma / 2.0))
        .collect())
}
