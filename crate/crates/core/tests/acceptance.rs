//! End-to-end acceptance checks, one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::time::Instant;

use adiabatic_core::effective::{self, EffectiveFamily};
use adiabatic_core::experiments::{self, logspace};
use adiabatic_core::models::{
    self, builtins, continuum_effective_family, lambda_effective_family, DiscretizedContinuum, ModelSpec,
    RateConvention, Reduction, Temperature,
};
use adiabatic_core::propagation::{self, ode::OdeOptions};
use adiabatic_core::spectral::{self, ContourOptions};
use adiabatic_core::superop::{self, Partition};
use adiabatic_core::{spectral_norm, NumericPolicy, Operator, StateVec, C64};
use faer::linalg::solvers::DenseSolveCore;
use faer::{Col, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn max_abs(m: &Mat<C64>) -> f64 {
    let mut x = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            x = x.max(m[(i, j)].norm());
        }
    }
    x
}

fn vec_diff(a: &StateVec, b: &StateVec) -> f64 {
    (0..a.nrows()).map(|i| (a[i] - b[i]).norm()).fold(0.0, f64::max)
}

fn sup(a: &[StateVec], b: &[StateVec]) -> f64 {
    a.iter().zip(b).map(|(x, y)| vec_diff(x, y)).fold(0.0, f64::max)
}

fn trace(v: &StateVec) -> f64 {
    superop::trace_of_vec(v).unwrap().re
}

/// Random density matrix on `r` levels, vectorized.
fn random_state(rng: &mut ChaCha8Rng, r: usize) -> StateVec {
    let a = Mat::from_fn(r, r, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let rho = &a * a.adjoint();
    let tr: C64 = (0..r).map(|i| rho[(i, i)]).sum();
    Col::from_fn(r * r, |k| rho[(k % r, k / r)] / tr)
}

fn random_operator(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Operator {
    Mat::from_fn(n, n, |_, _| C64::new(rng.random_range(-s..s), rng.random_range(-s..s)))
}

fn random_lindblad(rng: &mut ChaCha8Rng, n: usize) -> (Operator, Vec<Operator>) {
    let a = random_operator(rng, n, 1.0);
    let h = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let jumps = (0..2).map(|_| random_operator(rng, n, 0.7)).collect();
    (h, jumps)
}

fn criterion_1() -> Outcome {
    // injection rate 2 pi n V^2 = 1, so beta is the return rate
    let probe = builtins::single_level(1.0);
    let c = &probe.continua[0];
    let gamma = 2.0 * std::f64::consts::PI * c.density * c.couplings[0].value().norm_sqr();
    if probe.rate_convention != RateConvention::GoldenRule || (gamma - 1.0).abs() > 1e-14 {
        return Ok((false, "single-level model does not use the golden-rule injection rate".into()));
    }
    let taus = experiments::linspace(0.0, 10.0, 401);
    let x0 = models::ground_population(1, 0);
    let mut worst = 0.0f64;
    let mut worst_alpha = 0.0f64;
    for beta in [0.1, 1.0, 10.0] {
        let spec = builtins::single_level(beta);
        let ex = models::continuum_dilation(&spec).map_err(err)?;
        for (tau, x) in taus.iter().zip(ex.trajectory(&x0, &taus).map_err(err)?) {
            worst = worst.max((x[0].re - experiments::single_level_law(beta, *tau)).abs());
        }
        let fam = continuum_effective_family(&spec).map_err(err)?;
        let tc = effective::trace_correction(&fam, &NumericPolicy::default()).map_err(err)?;
        worst_alpha = worst_alpha.max((tc.alpha - beta / (beta + 1.0)).abs());
    }
    Ok((
        worst <= 1e-8 && worst_alpha <= 1e-10,
        format!("trajectory error {worst:.2e} (tol 1e-8), alpha error {worst_alpha:.2e} (tol 1e-10)"),
    ))
}

fn random_fano(rng: &mut ChaCha8Rng) -> ModelSpec {
    builtins::fano(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.2..1.5),
        rng.random_range(0.2..1.5),
        rng.random_range(0.1..10.0),
    )
}

fn random_lambda(rng: &mut ChaCha8Rng) -> ModelSpec {
    builtins::lambda(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(0.2..1.5),
        rng.random_range(0.2..1.5),
        rng.random_range(0.1..10.0),
        rng.random_bool(0.5),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc0_0002);
    let policy = NumericPolicy::default();
    let mut worst = 0.0f64;
    for draw in 0..20 {
        let spec = if draw % 2 == 0 { random_fano(&mut rng) } else { random_lambda(&mut rng) };
        let model = models::compile(&spec, Reduction::Exact, &policy).map_err(err)?;
        let d = model.family.slow_dim();
        for _ in 0..20 {
            let z = C64::new(rng.random_range(0.05..3.0), rng.random_range(-5.0..5.0));
            let t = model.family.t_matrix(z).map_err(err)?;
            let lhs = t.partial_piv_lu().inverse();
            let g = &model.exact.generator;
            let n = g.nrows();
            let zl = Mat::from_fn(n, n, |i, j| if i == j { z - g[(i, j)] } else { -g[(i, j)] });
            let full = zl.partial_piv_lu().inverse();
            let rhs = &model.exact.extract * full * &model.exact.embed;
            let rel = max_abs(&(&lhs - &rhs)) / max_abs(&rhs);
            worst = worst.max(rel);
            debug_assert_eq!(lhs.nrows(), d);
        }
    }
    Ok((worst <= 1e-9, format!("worst relative deviation {worst:.2e} over 400 evaluations (tol 1e-9)")))
}

fn fd_l1(fam: &EffectiveFamily, h: f64) -> Result<Mat<C64>, String> {
    let p = fam.eval(C64::new(h, 0.0)).map_err(err)?;
    let m = fam.eval(C64::new(-h, 0.0)).map_err(err)?;
    Ok(Mat::from_fn(p.nrows(), p.ncols(), |i, j| (p[(i, j)] - m[(i, j)]) / (2.0 * h)))
}

fn criterion_3() -> Outcome {
    let h = NumericPolicy::default().fd_step;
    let families = vec![
        ("single_level", continuum_effective_family(&builtins::single_level(0.7)).map_err(err)?),
        ("fano_fig3", continuum_effective_family(&builtins::fano_fig3(10.0)).map_err(err)?),
        ("fano_fig3_low", continuum_effective_family(&builtins::fano_fig3(0.1)).map_err(err)?),
        ("lambda_zero_t", lambda_effective_family(&builtins::lambda_fig5(10.0), Temperature::Zero).map_err(err)?),
        ("lambda_finite_t", lambda_effective_family(&builtins::lambda_fig6(10.0), Temperature::Finite).map_err(err)?),
        ("lambda_fig7", lambda_effective_family(&builtins::lambda_fig7(1.0), Temperature::Zero).map_err(err)?),
    ];
    let mut worst = 0.0f64;
    let mut which = "";
    for (name, fam) in &families {
        let e = max_abs(&(fd_l1(fam, h)? - fam.l1()));
        if e > worst {
            worst = e;
            which = name;
        }
    }
    Ok((worst <= 1e-6, format!("worst |L1 - finite difference| {worst:.2e} ({which}, tol 1e-6)")))
}

fn criterion_4() -> Outcome {
    let policy = NumericPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc0_0004);
    let cases = [
        ("fano", builtins::fano_fig3(10.0)),
        ("lambda_zero_t", builtins::lambda_fig5(10.0)),
        ("lambda_infinite_t", builtins::lambda_fig6(10.0)),
    ];
    let mut worst = 0.0f64;
    let mut spread = 0.0f64;
    let mut parts = Vec::new();
    for (name, spec) in cases {
        let model = models::compile(&spec, Reduction::Exact, &policy).map_err(err)?;
        let tc = effective::trace_correction(&model.family, &policy).map_err(err)?;
        let gap = propagation::linear_gap(model.exact.generator.as_ref()).map_err(err)?;
        let t = 100.0 / gap.abs();
        let mut traces = Vec::new();
        for _ in 0..5 {
            let x0 = random_state(&mut rng, 2);
            let x = model.exact.evolve(&x0, t).map_err(err)?;
            traces.push(trace(&x));
        }
        let e = traces.iter().map(|tr| (tr - tc.alpha).abs()).fold(0.0, f64::max);
        let s = traces.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - traces.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(e);
        spread = spread.max(s);
        parts.push(format!("{name}: alpha {:.6}", tc.alpha));
    }
    Ok((
        worst <= 1e-4,
        format!("{}; worst |trace - alpha| {worst:.2e}, spread over 5 states {spread:.2e} (tol 1e-4)", parts.join(", ")),
    ))
}

fn criterion_5() -> Outcome {
    let policy = NumericPolicy::default();
    let mut worst = 0.0f64;
    let mut worst_eig = 0.0f64;
    for gamma in [0.1, 10.0] {
        let spec = builtins::fano_fig3(gamma);
        let model = models::compile(&spec, Reduction::ClosedForm, &policy).map_err(err)?;
        let pairs = spectral::complete_eigenpairs(&model.family, &policy).map_err(err)?;
        let gap = spectral::spectral_gap(&pairs).map_err(err)?.gap.abs();
        let times = experiments::linspace(0.0, 10.0 / gap, 201);
        let x0 = models::ground_population(2, 0);
        let exact = model.exact.trajectory(&x0, &times).map_err(err)?;
        let rec = times
            .iter()
            .map(|&t| spectral::keldysh_propagate(&pairs, &x0, t))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        worst = worst.max(sup(&rec, &exact));

        let opts = ContourOptions {
            quadrature_points: 512,
            max_moments: 8,
            ..ContourOptions::default()
        };
        let contour = spectral::enclosing_contour(&model.family);
        let via_contour = spectral::nonlinear_eigs_contour(&model.family, contour, &opts, &policy).map_err(err)?;
        let via_lin = spectral::nonlinear_eigs_rational(&model.family, &policy).map_err(err)?;
        if via_contour.len() != via_lin.len() {
            return Ok((false, format!("gamma {gamma}: contour found {} eigenvalues, linearization {}", via_contour.len(), via_lin.len())));
        }
        for p in &via_lin {
            let d = via_contour.iter().map(|q| (q.lambda - p.lambda).norm()).fold(f64::INFINITY, f64::min);
            worst_eig = worst_eig.max(d);
        }
    }
    Ok((
        worst <= 1e-6 && worst_eig <= 1e-8,
        format!("reconstruction sup error {worst:.2e} (tol 1e-6), contour vs linearization {worst_eig:.2e} (tol 1e-8)"),
    ))
}

fn relative_gap(spec: &ModelSpec, reduction: Reduction, policy: &NumericPolicy) -> Result<(f64, f64, f64), String> {
    let model = models::compile(spec, reduction, policy).map_err(err)?;
    let g0 = propagation::linear_gap(model.family.l0().as_ref()).map_err(err)?;
    let pairs = spectral::complete_eigenpairs(&model.family, policy).map_err(err)?;
    let ge = spectral::spectral_gap(&pairs).map_err(err)?.gap;
    Ok((g0, ge, (g0 - ge).abs() / ge.abs()))
}

fn criterion_6() -> Outcome {
    let policy = NumericPolicy::default();
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, spec) in [("fig3", builtins::fano_fig3(10.0)), ("fig5", builtins::lambda_fig5(10.0))] {
        let (g0, ge, rel) = relative_gap(&spec, Reduction::ClosedForm, &policy)?;
        ok &= rel <= 0.1;
        parts.push(format!("{name}: gap(L0) {g0:.5}, gap(Leff) {ge:.5}, rel {rel:.3}"));
    }
    // diagnostics only: the same comparison for the Schur-complement family and
    // for the pi n V^2 injection rate
    let (_, _, schur) = relative_gap(&builtins::lambda_fig5(10.0), Reduction::Exact, &policy)?;
    let mut alt = builtins::fano_fig3(10.0);
    alt.rate_convention = RateConvention::HalfGoldenRule;
    let (_, _, half) = relative_gap(&alt, Reduction::ClosedForm, &policy)?;
    let (_, _, fig3_100) = relative_gap(&builtins::fano_fig3(100.0), Reduction::ClosedForm, &policy)?;
    Ok((
        ok,
        format!(
            "{} (tol 0.1); diagnostics: fig5 Schur family rel {schur:.3}, fig3 at pi n V^2 rel {half:.3}, fig3 at Gamma 100 rel {fig3_100:.3}",
            parts.join("; ")
        ),
    ))
}

fn criterion_7() -> Outcome {
    let policy = NumericPolicy::default();
    let gammas = [10.0, 30.0, 100.0, 300.0];
    let xs: Vec<f64> = gammas.iter().map(|g: &f64| g.ln()).collect();
    let mut closed = Vec::new();
    let mut schur = Vec::new();
    let mut half = Vec::new();
    for &g in &gammas {
        let spec = builtins::lambda_fig7(g);
        let three = lambda_effective_family(&spec, Temperature::Zero).map_err(err)?;
        let exact = models::compile(&spec, Reduction::Exact, &policy).map_err(err)?.family;
        let image = models::large_gamma_map(&spec).map_err(err)?;
        let cont = continuum_effective_family(&image).map_err(err)?;
        let mut alt = image.clone();
        alt.rate_convention = RateConvention::HalfGoldenRule;
        let cont_alt = continuum_effective_family(&alt).map_err(err)?;
        closed.push(spectral_norm((three.l0() - cont.l0()).as_ref()));
        schur.push(spectral_norm((exact.l0() - cont.l0()).as_ref()));
        half.push(spectral_norm((three.l0() - cont_alt.l0()).as_ref()));
    }
    let slope_of = |d: &[f64]| fit_slope(&xs, &d.iter().map(|x| x.ln()).collect::<Vec<_>>());
    let slope = slope_of(&closed);
    let norms: Vec<String> = closed.iter().map(|d| format!("{d:.3e}")).collect();
    Ok((
        (slope + 1.0).abs() <= 0.2,
        format!(
            "norms [{}], log-log slope {slope:.3} (target -1 +- 0.2); Schur-complement three-level slope {:.3}; \
             against the pi n V^2 rate {:.3}",
            norms.join(", "),
            slope_of(&schur),
            slope_of(&half)
        ),
    ))
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_8() -> Outcome {
    let policy = NumericPolicy::default();
    let mut worst_alpha = 0.0f64;
    let mut worst_l1 = 0.0f64;
    let mut worst_excited = 0.0f64;
    let mut worst_variant = 0.0f64;
    for spec in [builtins::lambda_fig8(1.0), builtins::lambda_fig8(20.0), builtins::lambda_fig9(0.0)] {
        let dark = models::dark_state(&spec).map_err(err)?.ok_or("no dark state")?;
        let rho_d = models::pure_state(&dark);
        if !models::cpt_check(&spec, &rho_d).map_err(err)?.passes {
            return Ok((false, format!("{}: dark state fails the CPT check", spec.name)));
        }
        let fams = [
            models::compile(&spec, Reduction::Exact, &policy).map_err(err)?,
            models::compile(&spec, Reduction::ClosedForm, &policy).map_err(err)?,
            models::compile(&models::large_gamma_map(&spec).map_err(err)?, Reduction::ClosedForm, &policy).map_err(err)?,
        ];
        for m in &fams {
            let tc = effective::trace_correction(&m.family, &policy).map_err(err)?;
            worst_alpha = worst_alpha.max((tc.alpha - 1.0).abs());
            worst_l1 = worst_l1.max(tc.mean_l1.norm());
        }
        let (l, _) = fams[0].full.as_ref().unwrap();
        let ss = propagation::steady_state_exact(l.as_ref(), &policy).map_err(err)?;
        worst_excited = worst_excited.max(ss[8].re.abs());
        let times = experiments::linspace(0.0, 20.0, 41);
        for m in &fams[1..] {
            let cmp = propagation::compare_evolutions(m, &rho_d, &times).map_err(err)?;
            let reference = &cmp.variants[0].trajectory.states;
            for v in &cmp.variants {
                worst_variant = worst_variant.max(sup(&v.trajectory.states, reference));
            }
            worst_variant = worst_variant.max(sup(reference, &vec![rho_d.clone(); times.len()]));
        }
    }
    let sweep = experiments::steady_sweep(|g| Ok(builtins::lambda_fig8(g)), &logspace(0.1, 1000.0, 9), &policy).map_err(err)?;
    let mut sweep_spread = 0.0f64;
    for col in ["ground_population", "fidelity_rescaled"] {
        let all: Vec<f64> = experiments::SWEEP_VARIANTS.iter().flat_map(|v| sweep.select("variant", v, col)).collect();
        let mx = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mn = all.iter().cloned().fold(f64::INFINITY, f64::min);
        sweep_spread = sweep_spread.max(mx - mn);
    }
    let det = experiments::detuning_sweep(&experiments::linspace(-5.0, 5.0, 41), &policy).map_err(err)?;
    let l0_excited = det.select("model", "L0", "rho_e1e1").iter().cloned().fold(0.0, f64::max);
    let exact_excited_off = det.select("model", "three_level", "rho_e1e1").iter().cloned().fold(0.0, f64::max);
    let ok = worst_alpha <= 1e-10
        && worst_l1 <= 1e-10
        && worst_excited <= 1e-10
        && worst_variant <= 1e-6
        && sweep_spread <= 1e-6
        && l0_excited == 0.0
        && exact_excited_off > 1e-6;
    Ok((
        ok,
        format!(
            "|alpha-1| {worst_alpha:.1e}, |<L1>| {worst_l1:.1e}, excited {worst_excited:.1e} (tol 1e-10); \
             variants {worst_variant:.1e}, fig8 sweep spread {sweep_spread:.1e} (tol 1e-6); \
             off-CPT excited: L0 {l0_excited:.1e}, exact up to {exact_excited_off:.3e}"
        ),
    ))
}

fn criterion_9() -> Outcome {
    let policy = NumericPolicy::default();
    let gammas = logspace(0.1, 1000.0, 41);
    let t = experiments::steady_sweep(|g| Ok(builtins::lambda_fig7(g)), &gammas, &policy).map_err(err)?;
    let best = t.select("variant", "3ls_alpha_L0", "fidelity_rescaled");
    let plain = t.select("variant", "3ls_L0", "fidelity_rescaled");
    let cont = t.select("variant", "continuum_alpha_L0", "fidelity_rescaled");
    let mut violations = Vec::new();
    for (k, g) in gammas.iter().enumerate() {
        if best[k] < plain[k] || best[k] < cont[k] {
            violations.push(format!("gamma {g:.3}: {:.6} vs {:.6}/{:.6}", best[k], plain[k], cont[k]));
        }
    }
    let min_margin = (0..gammas.len()).map(|k| best[k] - plain[k].max(cont[k])).fold(f64::INFINITY, f64::min);
    Ok((
        violations.is_empty(),
        if violations.is_empty() {
            format!("rescaled three-level fidelity ranks first at all {} grid points (min margin {min_margin:.2e})", gammas.len())
        } else {
            format!("{} violations, first {}", violations.len(), violations[0])
        },
    ))
}

/// Oracle errors with the band widened in step with the level count, so the
/// spacing stays fixed and the truncation of the band shrinks.
fn oracle_errors(spec: &ModelSpec, times: &[f64], levels: &[usize]) -> Result<Vec<f64>, String> {
    let r = spec.n_ground();
    let x0 = models::ground_population(r, 0);
    let exact = models::continuum_dilation(spec).map_err(err)?.trajectory(&x0, times).map_err(err)?;
    let opts = OdeOptions {
        rtol: 1e-7,
        atol: 1e-9,
        ..OdeOptions::default()
    };
    let top = *levels.last().unwrap() as f64;
    levels
        .iter()
        .map(|&m| {
            let bandwidth = 50.0 * spec.rate_scale() * m as f64 / top;
            let d = DiscretizedContinuum::new(spec, m, Some(bandwidth)).map_err(err)?;
            Ok(sup(&d.propagate_slow(&x0, times, &opts).map_err(err)?, &exact))
        })
        .collect()
}

fn criterion_10() -> Outcome {
    let levels = [51, 101, 201];
    let single = oracle_errors(&builtins::single_level(1.0), &experiments::linspace(0.0, 10.0, 401), &levels)?;
    let fano = oracle_errors(&builtins::fano_fig3(1.0), &experiments::linspace(0.0, 3.0, 301), &levels)?;
    let monotone = |e: &[f64]| e.windows(2).all(|w| w[1] < w[0]);
    // adjudication: the closed form with each injection-rate convention against the same oracle
    let mut alt = builtins::fano_fig3(1.0);
    alt.rate_convention = RateConvention::HalfGoldenRule;
    let times = experiments::linspace(0.0, 3.0, 31);
    let x0 = models::ground_population(2, 0);
    let d = DiscretizedContinuum::new(&builtins::fano_fig3(1.0), 201, None).map_err(err)?;
    let oracle = d.propagate_slow(&x0, &times, &OdeOptions { rtol: 1e-7, atol: 1e-9, ..OdeOptions::default() }).map_err(err)?;
    let e_golden = sup(&models::continuum_dilation(&builtins::fano_fig3(1.0)).map_err(err)?.trajectory(&x0, &times).map_err(err)?, &oracle);
    let e_half = sup(&models::continuum_dilation(&alt).map_err(err)?.trajectory(&x0, &times).map_err(err)?, &oracle);
    let ok = single[2] <= 1e-2 && fano[2] <= 1e-2 && monotone(&single) && monotone(&fano) && e_golden < e_half;
    Ok((
        ok,
        format!(
            "single level M=51/101/201 (band 12.7x/25x/50x the rate): {:.2e}/{:.2e}/{:.2e}; fano: {:.2e}/{:.2e}/{:.2e} \
             (tol 1e-2, monotone); rate 2 pi n V^2 error {e_golden:.2e} vs pi n V^2 error {e_half:.2e}",
            single[0], single[1], single[2], fano[0], fano[1], fano[2]
        ),
    ))
}

const STRUCTURAL_SEED: u64 = 0x5eed_0011;
const STRUCTURAL_CASES: usize = 64;

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(STRUCTURAL_SEED);
    let policy = NumericPolicy::default();
    let mut worst = BTreeMap::<&str, f64>::new();
    let mut bump = |k: &'static str, v: f64| {
        let e = worst.entry(k).or_insert(0.0);
        *e = e.max(v);
    };
    for _ in 0..STRUCTURAL_CASES {
        let n = rng.random_range(2..=4);
        let (h, jumps) = random_lindblad(&mut rng, n);
        let l = superop::lindblad(h.as_ref(), &jumps).map_err(err)?;

        let row = superop::trace_row(l.as_ref()).map_err(err)?;
        bump("trace annihilation", (0..row.nrows()).map(|i| row[i].norm()).fold(0.0, f64::max));

        let r = rng.random_range(1..n);
        let part = Partition::new(superop::leading_projector(n, r).as_ref(), &policy).map_err(err)?;
        let (pp, qq) = superop::super_projectors(part.projector().as_ref()).map_err(err)?;
        let id = Mat::<C64>::identity(n * n, n * n);
        bump("projector idempotence", max_abs(&(&pp * &pp - &pp)).max(max_abs(&(&qq * &qq - &qq))));
        bump("projector complement", max_abs(&(&pp + &qq - &id)).max(max_abs(&(&pp * &qq))));

        let a = random_operator(&mut rng, n, 1.0);
        let b = random_operator(&mut rng, n, 1.0);
        let x = random_operator(&mut rng, n, 1.0);
        let lhs = superop::vectorize((&a * &x * &b).as_ref()).map_err(err)?;
        let sw = superop::sandwich(a.as_ref(), b.adjoint().to_owned().as_ref()).map_err(err)?;
        let rhs = &sw * superop::vectorize(x.as_ref()).map_err(err)?;
        bump("vectorization homomorphism", vec_diff(&lhs, &rhs));
        let back = superop::unvectorize(&superop::vectorize(x.as_ref()).map_err(err)?).map_err(err)?;
        bump("vectorization round trip", max_abs(&(&back - &x)));

        let rho0 = random_state(&mut rng, n);
        let (s, t) = (rng.random_range(0.0..1.5), rng.random_range(0.0..1.5));
        let two = propagation::expm_apply(l.as_ref(), s, &propagation::expm_apply(l.as_ref(), t, &rho0).map_err(err)?).map_err(err)?;
        let one = propagation::expm_apply(l.as_ref(), s + t, &rho0).map_err(err)?;
        bump("semigroup", vec_diff(&one, &two));

        let m = superop::unvectorize(&one).map_err(err)?;
        let herm = max_abs(&(&m - m.adjoint()));
        bump("hermiticity preservation", herm);
        let hm = Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
        let min_eig = hm.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|e| format!("{e:?}"))?.into_iter().fold(f64::INFINITY, f64::min);
        bump("positivity preservation", (-min_eig).max(0.0));
        bump("trace preservation", (trace(&one) - 1.0).abs());
    }
    let limits: BTreeMap<&str, f64> = BTreeMap::from([
        ("trace annihilation", 1e-12),
        ("projector idempotence", 1e-13),
        ("projector complement", 1e-13),
        ("vectorization homomorphism", 1e-12),
        ("vectorization round trip", 0.0),
        ("semigroup", 1e-10),
        ("hermiticity preservation", 1e-10),
        ("positivity preservation", 1e-10),
        ("trace preservation", 1e-10),
    ]);
    let failed: Vec<String> = worst
        .iter()
        .filter(|(k, v)| **v > limits[*k])
        .map(|(k, v)| format!("{k} {v:.1e}"))
        .collect();
    Ok((
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} properties x {STRUCTURAL_CASES} cases, seed {STRUCTURAL_SEED:#x}", worst.len())
        } else {
            format!("violations: {}", failed.join(", "))
        },
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("exact single-level law", criterion_1),
        ("resolvent identity", criterion_2),
        ("derivative consistency", criterion_3),
        ("trace-correction factor", criterion_4),
        ("eigenpair reconstruction", criterion_5),
        ("gap agreement", criterion_6),
        ("large-decay convergence", criterion_7),
        ("dark-state coincidence", criterion_8),
        ("fidelity ranking", criterion_9),
        ("oracle closure", criterion_10),
        ("structural suite", criterion_11),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
