//! Tabular experiment drivers shared by the command line and the Python
//! bindings: trajectory comparisons, spectra, steady states and sweeps.

use std::fmt::Write as _;

use serde::Serialize;

use crate::effective;
use crate::models::{self, builtins, CompiledModel, ModelSpec, Reduction};
use crate::propagation::{self, fidelity_rescaled_with_policy};
use crate::spectral;
use crate::{Error, NumericPolicy, Result, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Column-labelled rows, written as CSV with 17 significant digits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column values on rows whose text column `key` equals `value`.
    pub fn select(&self, key: &str, value: &str, column: &str) -> Vec<f64> {
        let (Some(k), Some(c)) = (self.column(key), self.column(column)) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter(|r| matches!(&r[k], Cell::Text(s) if s == value))
            .filter_map(|r| match r[c] {
                Cell::Num(x) => Some(x),
                Cell::Text(_) => None,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Num(x) => out.push_str(&format_number(*x)),
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mut s = String::new();
    write!(s, "{x:.16e}").expect("write to string");
    s
}

/// Evenly spaced grid of `n` points from `t0` to `t1`.
pub fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` points spaced evenly in `log10` from `a` to `b`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.log10(), b.log10(), n).into_iter().map(|x| 10f64.powf(x)).collect()
}

/// `t, variant, <observables...>, fidelity_rescaled` for every variant of
/// [`propagation::compare_evolutions`].
pub fn trajectory_table(model: &CompiledModel, rho0: &StateVec, times: &[f64]) -> Result<(Table, Vec<String>)> {
    let cmp = propagation::compare_evolutions(model, rho0, times)?;
    let names = propagation::observable_names(model.family.rank());
    let mut cols = vec!["t".to_string(), "variant".to_string()];
    cols.extend(names.iter().cloned());
    cols.push("fidelity_rescaled".into());
    let mut table = Table::new(&cols);
    for (k, &t) in times.iter().enumerate() {
        for v in &cmp.variants {
            let mut row: Vec<Cell> = vec![t.into(), v.name.as_str().into()];
            row.extend(v.trajectory.observables[k].iter().map(|&x| Cell::Num(x)));
            row.push(v.fidelity[k].into());
            table.push(row);
        }
    }
    let mut notes = cmp.notes;
    notes.push(format!("alpha = {}", format_number(cmp.alpha)));
    Ok((table, notes))
}

/// Linear eigenvalues of `L0` and nonlinear eigenvalues of `L_eff`.
pub fn spectrum_table(model: &CompiledModel) -> Result<(Table, Vec<String>)> {
    let mut table = Table::new(&["re", "im", "source"]);
    let mut notes = Vec::new();
    let mut l0 = crate::linalg::eigenvalues(model.family.l0().as_ref())?;
    l0.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    for v in l0 {
        table.push(vec![v.re.into(), v.im.into(), "L0".into()]);
    }
    match spectral::complete_eigenpairs(&model.family, &model.policy) {
        Ok(pairs) => {
            for p in pairs {
                if p.near_pole {
                    notes.push(format!("eigenvalue {} lies near a pole of the family", p.lambda));
                }
                table.push(vec![p.lambda.re.into(), p.lambda.im.into(), "Leff".into()]);
            }
        }
        Err(e) => notes.push(format!("nonlinear eigenvalues unavailable: {e}")),
    }
    Ok((table, notes))
}

/// Entries of `L0` and `L1`.
pub fn effective_table(model: &CompiledModel) -> Table {
    let mut table = Table::new(&["operator", "row", "col", "re", "im"]);
    for (name, m) in [("L0", model.family.l0()), ("L1", model.family.l1())] {
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                table.push(vec![name.into(), (i as f64).into(), (j as f64).into(), v.re.into(), v.im.into()]);
            }
        }
    }
    table
}

/// Steady slow states: exact (when a finite generator exists), `rho_bar`
/// and `alpha rho_bar`.
pub fn steady_table(model: &CompiledModel) -> Result<(Table, Vec<String>)> {
    let r = model.family.rank();
    let names = propagation::observable_names(r);
    let mut cols = vec!["variant".to_string()];
    cols.extend(names.iter().cloned());
    let mut table = Table::new(&cols);
    let tc = effective::trace_correction(&model.family, &model.policy)?;
    let mut states = Vec::new();
    if let Some(ex) = model.exact_steady_slow()? {
        states.push(("exact", ex));
    }
    states.push(("L0", tc.rho_bar.clone()));
    states.push(("alpha_L0", scale(&tc.rho_bar, tc.alpha)));
    for (name, s) in &states {
        let mut row: Vec<Cell> = vec![(*name).into()];
        row.extend(propagation::observables(s)?.into_iter().map(Cell::Num));
        table.push(row);
    }
    let notes = vec![
        format!("alpha = {}", format_number(tc.alpha)),
        format!("mean_l1 = {}", format_number(tc.mean_l1.re)),
    ];
    Ok((table, notes))
}

fn scale(v: &StateVec, a: f64) -> StateVec {
    faer::Col::from_fn(v.nrows(), |i| v[i] * a)
}

/// Steady states of `L0` (`rho_bar`) and `alpha L0` (`alpha rho_bar`).
fn effective_steady(spec: &ModelSpec, reduction: Reduction, policy: &NumericPolicy) -> Result<(StateVec, StateVec)> {
    let m = models::compile(spec, reduction, policy)?;
    let tc = effective::trace_correction(&m.family, policy)?;
    let scaled = scale(&tc.rho_bar, tc.alpha);
    Ok((tc.rho_bar, scaled))
}

/// Slow block of the exact steady state of a discrete model.
pub fn exact_steady(spec: &ModelSpec, policy: &NumericPolicy) -> Result<StateVec> {
    let m = models::compile(spec, Reduction::Exact, policy)?;
    m.exact_steady_slow()?
        .ok_or_else(|| Error::InvalidModel("model has no finite exact generator".into()))
}

/// Variant labels of [`steady_sweep`], in output order.
pub const SWEEP_VARIANTS: [&str; 5] = ["exact", "3ls_L0", "3ls_alpha_L0", "continuum_L0", "continuum_alpha_L0"];

/// `gamma, variant, ground_population, fidelity_rescaled` for discrete
/// models built by `make(gamma)`, comparing the exact steady state with the
/// Schur-complement three-level family and its large-decay continuum image.
/// The closed-form family is not used here: its steady state leaves the
/// positive cone once `V^2 / Gamma` is of order one.
pub fn steady_sweep<F>(make: F, gammas: &[f64], policy: &NumericPolicy) -> Result<Table>
where
    F: Fn(f64) -> Result<ModelSpec> + Sync,
{
    use rayon::prelude::*;
    let rows = gammas
        .par_iter()
        .map(|&g| {
            let spec = make(g)?;
            let exact = exact_steady(&spec, policy)?;
            let (l0, al0) = effective_steady(&spec, Reduction::Exact, policy)?;
            let cont = models::large_gamma_map(&spec)?;
            let (c0, ac0) = effective_steady(&cont, Reduction::ClosedForm, policy)?;
            let mut out = Vec::with_capacity(SWEEP_VARIANTS.len());
            for (name, s) in SWEEP_VARIANTS.iter().zip([&exact, &l0, &al0, &c0, &ac0]) {
                let pop = crate::superop::trace_of_vec(s)?.re;
                let fid = fidelity_rescaled_with_policy(s, &exact, policy)?;
                out.push(vec![g.into(), (*name).into(), pop.into(), fid.into()]);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["gamma", "variant", "ground_population", "fidelity_rescaled"]);
    for r in rows.into_iter().flatten() {
        table.push(r);
    }
    Ok(table)
}

/// `detuning, model, rho_g1g1, rho_g2g2, rho_e1e1` for the exact three-level
/// model, its continuum image and the unscaled `L0`.
pub fn detuning_sweep(detunings: &[f64], policy: &NumericPolicy) -> Result<Table> {
    use rayon::prelude::*;
    let rows = detunings
        .par_iter()
        .map(|&d| {
            let spec = builtins::lambda_fig9(d);
            let m = models::compile(&spec, Reduction::Exact, policy)?;
            let (l, _) = m.full.as_ref().expect("discrete model");
            let full = propagation::steady_state_exact(l.as_ref(), policy)?;
            let n = 3;
            let exact = [full[0].re, full[n + 1].re, full[2 * n + 2].re];
            let (l0, _) = effective_steady(&spec, Reduction::Exact, policy)?;
            let (_, ac0) = effective_steady(&models::large_gamma_map(&spec)?, Reduction::ClosedForm, policy)?;
            let cont_ground = ac0[0].re + ac0[3].re;
            let rows = vec![
                vec![d.into(), "three_level".into(), exact[0].into(), exact[1].into(), exact[2].into()],
                vec![d.into(), "fano".into(), ac0[0].re.into(), ac0[3].re.into(), (1.0 - cont_ground).into()],
                vec![d.into(), "L0".into(), l0[0].re.into(), l0[3].re.into(), 0.0.into()],
            ];
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["detuning", "model", "rho_g1g1", "rho_g2g2", "rho_e1e1"]);
    for r in rows.into_iter().flatten() {
        table.push(r);
    }
    Ok(table)
}

/// Slow population of the single-level model at dimensionless time `tau`.
pub fn single_level_law(beta: f64, tau: f64) -> f64 {
    (beta + (-(beta + 1.0) * tau).exp()) / (beta + 1.0)
}

/// Limits of [`single_level_law`]: `beta -> inf` keeps the population at 1,
/// `beta -> 0` gives pure decay.
pub fn single_level_limit(infinite: bool, tau: f64) -> f64 {
    if infinite {
        1.0
    } else {
        (-tau).exp()
    }
}

/// Named output of a figure: file stem and table.
pub type FigureOutput = Vec<(String, Table)>;

/// Decay settings used for the low- and high-dissipation panels.
pub const PANEL_GAMMAS: [f64; 2] = [0.1, 10.0];

/// Default time grid of the trajectory figures.
pub fn default_times() -> Vec<f64> {
    linspace(0.0, 20.0, 201)
}

/// Builds every table of a named figure. `times` overrides the time grid
/// of trajectory figures; `gammas` the sweep grid of fig7/fig8.
pub fn figure(name: &str, times: Option<&[f64]>, policy: &NumericPolicy) -> Result<(FigureOutput, Vec<String>)> {
    let default_t = default_times();
    let times = times.unwrap_or(&default_t);
    let mut out: FigureOutput = Vec::new();
    let mut notes = Vec::new();
    match name {
        "fig2" => {
            let taus = if times.is_empty() { linspace(0.0, 10.0, 201) } else { times.to_vec() };
            let x0 = models::ground_population(1, 0);
            for (label, beta) in [("0.1", Some(0.1)), ("1", Some(1.0)), ("10", Some(10.0)), ("inf", None), ("0", None)] {
                let mut t = Table::new(&["tau", "ground_population"]);
                match beta {
                    Some(b) => {
                        let ex = models::continuum_dilation(&builtins::single_level(b))?;
                        for (tau, s) in taus.iter().zip(ex.trajectory(&x0, &taus)?) {
                            t.push(vec![(*tau).into(), s[0].re.into()]);
                        }
                    }
                    None => {
                        for &tau in &taus {
                            t.push(vec![tau.into(), single_level_limit(label == "inf", tau).into()]);
                        }
                    }
                }
                out.push((format!("fig2_beta_{label}"), t));
            }
        }
        "fig3" | "fig5" | "fig6" => {
            for g in PANEL_GAMMAS {
                let spec = match name {
                    "fig3" => builtins::fano_fig3(g),
                    "fig5" => builtins::lambda_fig5(g),
                    _ => builtins::lambda_fig6(g),
                };
                let model = models::compile(&spec, Reduction::ClosedForm, policy)?;
                let rho0 = models::ground_population(2, 0);
                let (traj, n1) = trajectory_table(&model, &rho0, times)?;
                let (spec_t, n2) = spectrum_table(&model)?;
                let tag = format!("gamma_{}", format_short(g));
                notes.extend(n1.into_iter().chain(n2).map(|n| format!("{name} {tag}: {n}")));
                out.push((format!("{name}_{tag}_trajectories"), traj));
                out.push((format!("{name}_{tag}_spectrum"), spec_t));
            }
        }
        "fig7" | "fig8" => {
            let gammas = logspace(0.1, 1000.0, 41);
            let make = if name == "fig7" { builtins::lambda_fig7 } else { builtins::lambda_fig8 };
            out.push((name.to_string(), steady_sweep(|g| Ok(make(g)), &gammas, policy)?));
        }
        "fig9" => {
            out.push(("fig9".to_string(), detuning_sweep(&linspace(-5.0, 5.0, 101), policy)?));
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown figure '{name}'; expected one of fig2, fig3, fig5, fig6, fig7, fig8, fig9"
            )))
        }
    }
    Ok((out, notes))
}

/// Compact decimal label for file names.
pub fn format_short(x: f64) -> String {
    let s = format!("{x}");
    s.replace('-', "m")
}
