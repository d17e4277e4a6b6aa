//! Exact propagation, steady states, resolvent solves and comparison metrics.

pub mod expm;
pub mod ode;

use faer::{Col, Mat, MatRef};
use serde::Serialize;

use crate::effective::corrected_evolution;
use crate::linalg::{self, ZERO};
use crate::models::CompiledModel;
use crate::spectral;
use crate::superop::{self, perfect_sqrt};
use crate::{Error, NumericPolicy, Operator, Result, StateVec, C64};

/// `exp(L t) rho0`.
pub fn expm_apply(l: MatRef<'_, C64>, t: f64, rho0: &StateVec) -> Result<StateVec> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    if l.ncols() != rho0.nrows() {
        return Err(Error::Dimension("generator and state differ in size".into()));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let e = expm::expm(linalg::scale(l, C64::new(t, 0.0)).as_ref())?;
    let out = &e * rho0;
    if !out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("propagated state".into()));
    }
    Ok(out)
}

/// `exp(L t) rho0` for every `t` in `times`, each computed from `t = 0`.
pub fn expm_trajectory(l: MatRef<'_, C64>, times: &[f64], rho0: &StateVec) -> Result<Vec<StateVec>> {
    use rayon::prelude::*;
    times.par_iter().map(|&t| expm_apply(l, t, rho0)).collect()
}

/// Integrates `d rho/dt = L rho` with the adaptive Dormand-Prince pair.
pub fn ode_apply(
    l: MatRef<'_, C64>,
    times: &[f64],
    rho0: &StateVec,
    opts: &ode::OdeOptions,
) -> Result<Vec<StateVec>> {
    let n = rho0.nrows();
    let y0: Vec<C64> = rho0.iter().copied().collect();
    let lm = l.to_owned();
    let ys = ode::integrate(
        |_, y, dy| {
            for (i, d) in dy.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (j, yj) in y.iter().enumerate() {
                    acc += lm[(i, j)] * yj;
                }
                *d = acc;
            }
        },
        0.0,
        &y0,
        times,
        opts,
    )?;
    Ok(ys.into_iter().map(|y| Col::from_fn(n, |i| y[i])).collect())
}

/// `(z - L)^-1 rho0` by a direct solve.
pub fn resolvent_apply(l: MatRef<'_, C64>, z: C64, rho0: &StateVec) -> Result<StateVec> {
    let n = linalg::require_square(l, "generator")?;
    if rho0.nrows() != n {
        return Err(Error::Dimension("generator and state differ in size".into()));
    }
    let a = Mat::from_fn(n, n, |i, j| if i == j { z - l[(i, j)] } else { -l[(i, j)] });
    let x = linalg::solve(a.as_ref(), linalg::col_to_mat(rho0).as_ref());
    let resid = linalg::frobenius((&a * &x - linalg::col_to_mat(rho0)).as_ref());
    let scale = rho0.norm_l2().max(f64::MIN_POSITIVE);
    let singular = !linalg::all_finite(x.as_ref())
        || resid > 1e-8 * scale
        || linalg::inverse_condition(a.as_ref())? < 1e-14;
    if singular {
        let eig = linalg::eigenvalues(l)?;
        let eigenvalue = linalg::nearest(&eig, z).unwrap_or(z);
        return Err(Error::ResolventPole { z, eigenvalue });
    }
    Ok(linalg::mat_to_col(x.as_ref()))
}

/// Unique trace-one steady state of `L`.
pub fn steady_state_exact(l: MatRef<'_, C64>, policy: &NumericPolicy) -> Result<StateVec> {
    linalg::require_square(l, "generator")?;
    perfect_sqrt(l.nrows())?;
    let k = linalg::kernel(l, policy.kernel_rel_tol)?;
    if k.ncols() != 1 {
        return Err(Error::DegenerateSteadyState { kernel_dim: k.ncols() });
    }
    let v = Col::from_fn(k.nrows(), |i| k[(i, 0)]);
    let tr = superop::trace_of_vec(&v)?;
    if tr.norm() <= 1e-12 * v.norm_l2() {
        return Err(Error::TracelessKernel);
    }
    let v = Col::from_fn(v.nrows(), |i| v[i] / tr);
    let rho = superop::unvectorize(&v)?;
    let dev = linalg::hermiticity_deviation(rho.as_ref());
    if dev > policy.psd_tol {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let herm = hermitize(rho.as_ref());
    let (vals, _) = linalg::hermitian_eig(herm.as_ref())?;
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -policy.psd_tol {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    superop::vectorize(herm.as_ref())
}

pub(crate) fn hermitize(m: MatRef<'_, C64>) -> Operator {
    linalg::scale((m + m.adjoint()).as_ref(), C64::new(0.5, 0.0))
}

fn psd_sqrt(m: MatRef<'_, C64>, policy: &NumericPolicy) -> Result<(Operator, f64)> {
    let h = hermitize(m);
    let (vals, vecs) = linalg::hermitian_eig(h.as_ref())?;
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -policy.psd_tol {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    let n = vals.len();
    let d = Mat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(vals[i].max(0.0).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    Ok((&vecs * d * vecs.adjoint(), min))
}

/// Uhlmann fidelity of the trace-normalized states, multiplied by
/// `1 - (tr rho - tr rho_exact)^2` and clamped to `[0, 1]`.
pub fn fidelity_rescaled(rho: &StateVec, rho_exact: &StateVec) -> Result<f64> {
    fidelity_rescaled_with_policy(rho, rho_exact, &NumericPolicy::default())
}

pub fn fidelity_rescaled_with_policy(
    rho: &StateVec,
    rho_exact: &StateVec,
    policy: &NumericPolicy,
) -> Result<f64> {
    if rho.nrows() != rho_exact.nrows() {
        return Err(Error::Dimension("states differ in size".into()));
    }
    let a = superop::unvectorize(rho)?;
    let b = superop::unvectorize(rho_exact)?;
    let dev = linalg::hermiticity_deviation(a.as_ref()).max(linalg::hermiticity_deviation(b.as_ref()));
    if dev > policy.psd_tol.max(1e-9) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let tra = superop::trace_of_vec(rho)?.re;
    let trb = superop::trace_of_vec(rho_exact)?.re;
    if tra <= 0.0 || trb <= 0.0 {
        return Err(Error::InvalidArgument("states must have positive trace".into()));
    }
    psd_sqrt(a.as_ref(), policy)?;
    let (sb, _) = psd_sqrt(b.as_ref(), policy)?;
    let m = &sb * hermitize(a.as_ref()) * &sb;
    let (vals, _) = linalg::hermitian_eig(hermitize(m.as_ref()).as_ref())?;
    let root: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    let f = root * root / (tra * trb);
    let rescale = 1.0 - (tra - trb).powi(2);
    Ok((f * rescale).clamp(0.0, 1.0))
}

/// Names and values of the default observable set on an `r`-level slow space.
pub fn observable_names(r: usize) -> Vec<String> {
    if r == 2 {
        return ["trace", "sx", "sy", "sz"].iter().map(|s| s.to_string()).collect();
    }
    let mut names = vec!["trace".to_string()];
    names.extend((0..r).map(|i| format!("p{i}")));
    for i in 0..r {
        for j in (i + 1)..r {
            names.push(format!("abs_c{i}{j}"));
        }
    }
    names
}

/// Real observable values matching [`observable_names`].
pub fn observables(v: &StateVec) -> Result<Vec<f64>> {
    let r = perfect_sqrt(v.nrows())?;
    let tr = superop::trace_of_vec(v)?.re;
    if r == 2 {
        return Ok(vec![
            tr,
            superop::expectation(v, superop::sigma_x().as_ref())?.re,
            superop::expectation(v, superop::sigma_y().as_ref())?.re,
            superop::expectation(v, superop::sigma_z().as_ref())?.re,
        ]);
    }
    let mut out = vec![tr];
    out.extend((0..r).map(|i| v[i * r + i].re));
    for i in 0..r {
        for j in (i + 1)..r {
            out.push(v[j * r + i].norm());
        }
    }
    Ok(out)
}

/// Slow-space states on a time grid with their observables.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<StateVec>,
    pub observable_names: Vec<String>,
    pub observables: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<StateVec>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Dimension("times and states differ in length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        let r = match states.first() {
            Some(s) => perfect_sqrt(s.nrows())?,
            None => 0,
        };
        let observables = states.iter().map(observables).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times,
            states,
            observable_names: observable_names(r),
            observables,
        })
    }
}

/// One approximation (or the exact reference) in a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct VariantTrajectory {
    pub name: String,
    pub trajectory: Trajectory,
    /// Rescaled fidelity against the exact state; `NaN` where undefined.
    pub fidelity: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub variants: Vec<VariantTrajectory>,
    pub alpha: f64,
    pub notes: Vec<String>,
}

impl ComparisonTable {
    pub fn variant(&self, name: &str) -> Option<&VariantTrajectory> {
        self.variants.iter().find(|v| v.name == name)
    }
}

/// Exact slow evolution next to `exp(L0 t)`, `alpha exp(L0 t)` and the
/// Keldysh reconstruction from nonlinear eigenpairs.
pub fn compare_evolutions(model: &CompiledModel, rho0: &StateVec, times: &[f64]) -> Result<ComparisonTable> {
    let policy = model.policy;
    let family = &model.family;
    let exact = model.exact.trajectory(rho0, times)?;
    let tc = crate::effective::trace_correction(family, &policy)?;
    let l0 = family.l0();
    let plain = expm_trajectory(l0.as_ref(), times, rho0)?;
    let corrected = times
        .iter()
        .map(|&t| corrected_evolution(family, &tc, rho0, t))
        .collect::<Result<Vec<_>>>()?;
    let mut notes = Vec::new();
    let mut variants = vec![
        ("exact".to_string(), exact.clone()),
        ("L0".to_string(), plain),
        ("alpha_L0".to_string(), corrected),
    ];
    match spectral::complete_eigenpairs(family, &policy) {
        Ok(pairs) => {
            let k = times
                .iter()
                .map(|&t| spectral::keldysh_propagate(&pairs, rho0, t))
                .collect::<Result<Vec<_>>>()?;
            variants.push(("keldysh".to_string(), k));
        }
        Err(e) => notes.push(format!("keldysh reconstruction unavailable: {e}")),
    }
    let variants = variants
        .into_iter()
        .map(|(name, states)| {
            let fidelity = states
                .iter()
                .zip(exact.iter())
                .map(|(s, e)| fidelity_rescaled_with_policy(s, e, &policy).unwrap_or(f64::NAN))
                .collect();
            Ok(VariantTrajectory {
                name,
                trajectory: Trajectory::new(times.to_vec(), states)?,
                fidelity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        variants,
        alpha: tc.alpha,
        notes,
    })
}

/// Largest real part among the nonzero eigenvalues of a linear generator.
pub fn linear_gap(l: MatRef<'_, C64>) -> Result<f64> {
    let vals = linalg::eigenvalues(l)?;
    spectral::gap_of_values(&vals).map(|g| g.gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SuperOperator;
    use crate::superop::{ket_bra, lindblad, sigma_z, vectorize};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn damping(gamma: f64, omega: f64) -> SuperOperator {
        let h = linalg::scale(sigma_z().as_ref(), C64::new(omega / 2.0, 0.0));
        let f = linalg::scale(ket_bra(2, 1, 0).as_ref(), C64::new(gamma.sqrt(), 0.0));
        lindblad(h.as_ref(), &[f]).unwrap()
    }

    fn random_lindblad(rng: &mut ChaCha8Rng, n: usize, k: usize) -> SuperOperator {
        let rnd = |rng: &mut ChaCha8Rng| {
            Mat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        };
        let a = rnd(rng);
        let h = hermitize(a.as_ref());
        let jumps: Vec<Operator> = (0..k).map(|_| rnd(rng)).collect();
        lindblad(h.as_ref(), &jumps).unwrap()
    }

    fn random_density(rng: &mut ChaCha8Rng, n: usize) -> StateVec {
        let a = Mat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let r = &a * a.adjoint();
        let tr: C64 = (0..n).map(|i| r[(i, i)]).sum();
        vectorize(linalg::scale(r.as_ref(), tr.inv()).as_ref()).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let l = damping(1.0, 2.0);
        let rho = vectorize(ket_bra(2, 1, 1).as_ref()).unwrap();
        let out = expm_apply(l.as_ref(), 0.0, &rho).unwrap();
        assert_eq!((out - &rho).norm_l2(), 0.0);
    }

    #[test]
    fn matches_ode_integrator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = random_lindblad(&mut rng, 3, 2);
        let rho = random_density(&mut rng, 3);
        let times = [0.5, 1.0, 5.0];
        let a = expm_trajectory(l.as_ref(), &times, &rho).unwrap();
        let b = ode_apply(l.as_ref(), &times, &rho, &ode::OdeOptions::default()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm_l2() < 1e-8);
        }
    }

    #[test]
    fn resolvent_of_zero_generator() {
        let l = Mat::<C64>::zeros(4, 4);
        let rho = vectorize(ket_bra(2, 0, 0).as_ref()).unwrap();
        let z = C64::new(2.0, 1.0);
        let x = resolvent_apply(l.as_ref(), z, &rho).unwrap();
        assert!((x - Col::from_fn(4, |i| rho[i] / z)).norm_l2() < 1e-15);
    }

    #[test]
    fn resolvent_residual_and_pole() {
        let l = damping(0.8, 1.1);
        let rho = vectorize(ket_bra(2, 1, 0).as_ref()).unwrap();
        let z = C64::new(0.3, -0.7);
        let x = resolvent_apply(l.as_ref(), z, &rho).unwrap();
        let resid = linalg::col_to_mat(&rho) - (linalg::scale(linalg::col_to_mat(&x).as_ref(), z) - &l * linalg::col_to_mat(&x));
        assert!(resid.norm_l2() <= 1e-11);
        match resolvent_apply(l.as_ref(), C64::new(-0.8, 0.0), &rho) {
            Err(Error::ResolventPole { eigenvalue, .. }) => assert!((eigenvalue - C64::new(-0.8, 0.0)).norm() < 1e-10),
            other => panic!("expected pole error, got {other:?}"),
        }
    }

    #[test]
    fn bromwich_quadrature_matches_propagation() {
        // inverse Laplace along Re z = c, truncated; diagnostic accuracy only
        let l = damping(1.0, 2.0);
        let rho = vectorize(ket_bra(2, 1, 1).as_ref()).unwrap();
        let t = 1.5;
        let c = 0.5;
        let (ymax, n) = (400.0, 80_000);
        let dy = 2.0 * ymax / n as f64;
        let mut acc = Col::<C64>::zeros(4);
        for k in 0..=n {
            let y = -ymax + k as f64 * dy;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            let z = C64::new(c, y);
            // subtracting rho/(z+1) leaves an integrand decaying like 1/z^2
            let g = resolvent_apply(l.as_ref(), z, &rho).unwrap();
            let f = (z * t).exp() * (w * dy / (2.0 * std::f64::consts::PI));
            let lead = (z + 1.0).inv();
            acc += Col::from_fn(4, |i| (g[i] - rho[i] * lead) * f);
        }
        acc += Col::from_fn(4, |i| rho[i] * (-t).exp());
        let want = expm_apply(l.as_ref(), t, &rho).unwrap();
        // populations only: the truncated line integral converges slowly for coherences
        assert!((acc[0] - want[0]).norm() < 1e-3);
        assert!((acc[3] - want[3]).norm() < 1e-3);
    }

    #[test]
    fn dephasing_keeps_diagonal_states() {
        let l = lindblad(Mat::<C64>::zeros(2, 2).as_ref(), &[sigma_z()]).unwrap();
        let d = Mat::from_fn(2, 2, |i, j| if i == j { C64::new(0.3 + 0.4 * i as f64, 0.0) } else { ZERO });
        let v = vectorize(d.as_ref()).unwrap();
        assert!((&l * &v).norm_l2() < 1e-15);
        // kernel is two dimensional: uniqueness fails
        assert!(matches!(
            steady_state_exact(l.as_ref(), &NumericPolicy::default()),
            Err(Error::DegenerateSteadyState { kernel_dim: 2 })
        ));
    }

    #[test]
    fn steady_state_matches_long_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = random_lindblad(&mut rng, 3, 2);
        let ss = steady_state_exact(l.as_ref(), &NumericPolicy::default()).unwrap();
        let gap = linear_gap(l.as_ref()).unwrap();
        let rho = random_density(&mut rng, 3);
        let late = expm_apply(l.as_ref(), 100.0 / gap.abs(), &rho).unwrap();
        assert!((late - &ss).norm_l2() < 1e-7);
    }

    #[test]
    fn fidelity_examples() {
        let a = vectorize(ket_bra(2, 0, 0).as_ref()).unwrap();
        let b = vectorize(ket_bra(2, 1, 1).as_ref()).unwrap();
        assert!((fidelity_rescaled(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity_rescaled(&a, &b).unwrap().abs() < 1e-12);
        let mixed = Col::from_fn(4, |i| if i == 0 || i == 3 { C64::new(0.5, 0.0) } else { ZERO });
        let bigger = Col::from_fn(4, |i| mixed[i] * 1.3);
        assert!((fidelity_rescaled(&bigger, &mixed).unwrap() - 0.91).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rejects_non_positive() {
        let bad = Col::from_fn(4, |i| match i {
            0 => C64::new(1.1, 0.0),
            3 => C64::new(-0.1, 0.0),
            _ => ZERO,
        });
        let good = vectorize(ket_bra(2, 0, 0).as_ref()).unwrap();
        assert!(matches!(fidelity_rescaled(&bad, &good), Err(Error::NotPositive { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 40, rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed_0002), ..ProptestConfig::default() })]

        #[test]
        fn semigroup_property(seed in any::<u64>(), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = random_lindblad(&mut rng, 3, 2);
            let rho = random_density(&mut rng, 3);
            let a = expm_apply(l.as_ref(), t1 + t2, &rho).unwrap();
            let b = expm_apply(l.as_ref(), t2, &expm_apply(l.as_ref(), t1, &rho).unwrap()).unwrap();
            prop_assert!((a - b).norm_l2() <= 1e-9);
        }

        #[test]
        fn evolution_is_physical(seed in any::<u64>(), t in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = random_lindblad(&mut rng, 3, 2);
            let rho = random_density(&mut rng, 3);
            let out = expm_apply(l.as_ref(), t, &rho).unwrap();
            let m = superop::unvectorize(&out).unwrap();
            prop_assert!(linalg::hermiticity_deviation(m.as_ref()) <= 1e-10);
            prop_assert!((superop::trace_of_vec(&out).unwrap() - C64::new(1.0, 0.0)).norm() <= 1e-9);
            let (vals, _) = linalg::hermitian_eig(hermitize(m.as_ref()).as_ref()).unwrap();
            prop_assert!(vals[0] >= -1e-9);
        }

        #[test]
        fn fidelity_symmetric_and_uhlmann(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_density(&mut rng, 3);
            let b = random_density(&mut rng, 3);
            let f1 = fidelity_rescaled(&a, &b).unwrap();
            let f2 = fidelity_rescaled(&b, &a).unwrap();
            prop_assert!((f1 - f2).abs() <= 1e-10);
            prop_assert!((0.0..=1.0).contains(&f1));
        }
    }
}
