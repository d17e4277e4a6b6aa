//! Ground manifold coupled to discrete excited levels.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::effective::{EffectiveFamily, PoleExpansion};
use crate::linalg::{self, ZERO};
use crate::superop;
use crate::{Error, Operator, Result, SuperOperator, C64};

use super::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Temperature {
    /// Pump rates are ignored.
    Zero,
    /// Pump rates enter the family.
    Finite,
}

/// Hamiltonian and jump operators on ground levels followed by excited
/// levels.
pub(crate) fn discrete_operators(spec: &ModelSpec) -> Result<(Operator, Vec<Operator>)> {
    if !spec.continua.is_empty() {
        return Err(Error::InvalidModel("continua have no finite generator; use the discretized oracle".into()));
    }
    let ng = spec.n_ground();
    let n = ng + spec.n_excited();
    let hg = spec.ground_hamiltonian();
    let mut h = Mat::from_fn(n, n, |i, j| if i < ng && j < ng { hg[(i, j)] } else { ZERO });
    let mut jumps = Vec::new();
    for (k, e) in spec.excited_levels.iter().enumerate() {
        let ie = ng + k;
        h[(ie, ie)] = C64::new(e.energy, 0.0);
        for i in 0..ng {
            let v = e.couplings[i].value();
            h[(i, ie)] = v;
            h[(ie, i)] = v.conj();
            let g = e.decay_rates[i];
            if g > 0.0 {
                jumps.push(linalg::scale(superop::ket_bra(n, i, ie).as_ref(), C64::new(g.sqrt(), 0.0)));
            }
            let p = e.pump_rates.get(i).copied().unwrap_or(0.0);
            if p > 0.0 {
                jumps.push(linalg::scale(superop::ket_bra(n, ie, i).as_ref(), C64::new(p.sqrt(), 0.0)));
            }
        }
    }
    Ok((h, jumps))
}

/// Full Lindblad generator of a discrete model.
pub fn lambda_exact_generator(spec: &ModelSpec) -> Result<SuperOperator> {
    spec.validate()?;
    let (h, jumps) = discrete_operators(spec)?;
    superop::lindblad(h.as_ref(), &jumps)
}

/// Closed-form family for one excited level with uncoupled ground levels,
/// accurate to second order in the coupling over the total decay.
pub fn lambda_effective_family(spec: &ModelSpec, temperature: Temperature) -> Result<EffectiveFamily> {
    spec.validate()?;
    if spec.n_excited() != 1 || !spec.continua.is_empty() {
        return Err(Error::InvalidModel("closed form needs exactly one excited level".into()));
    }
    if !spec.ground_couplings.is_empty() {
        return Err(Error::InvalidModel("closed form needs uncoupled ground levels".into()));
    }
    let ng = spec.n_ground();
    let e = &spec.excited_levels[0];
    let gamma: f64 = e.decay_rates.iter().sum();
    if gamma <= 0.0 {
        return Err(Error::InvalidModel("closed form needs a positive total decay".into()));
    }
    let pumps: Vec<f64> = match temperature {
        Temperature::Zero => vec![0.0; ng],
        Temperature::Finite => (0..ng).map(|i| e.pump_rates.get(i).copied().unwrap_or(0.0)).collect(),
    };
    if pumps.iter().any(|&p| p > 0.0) && ng != 2 {
        return Err(Error::InvalidModel("finite-temperature closed form needs two ground levels".into()));
    }
    let v: Vec<C64> = e.couplings.iter().map(|c| c.value()).collect();
    let s2 = Mat::from_fn(ng, ng, |i, j| v[i] * v[j].conj());
    let kp = Mat::from_fn(ng, ng, |i, j| {
        if i == j {
            C64::new(spec.ground_levels[i].energy, -pumps[i] / 2.0)
        } else {
            ZERO
        }
    });
    let pp = superop::effective_hamiltonian_superop(kp.as_ref())?;

    let mut terms = Vec::with_capacity(2 * ng);
    for j in 0..ng {
        let pj = superop::ket_bra(ng, j, j);
        let omega = e.energy - spec.ground_levels[j].energy;
        let damp = -gamma / 2.0 - pumps[j] / 2.0;
        let minus = linalg::scale(superop::sandwich(s2.as_ref(), pj.as_ref())?.as_ref(), C64::new(-1.0, 0.0));
        let plus = linalg::scale(superop::sandwich(pj.as_ref(), s2.as_ref())?.as_ref(), C64::new(-1.0, 0.0));
        terms.push((minus, C64::new(damp, -omega)));
        terms.push((plus, C64::new(damp, omega)));
    }

    let d = ng * ng;
    let mut m = Mat::<C64>::zeros(d, d);
    let mut m_prime = Mat::<C64>::zeros(d, d);
    for i in 0..ng {
        for a in 0..ng {
            let down = superop::ket_bra(ng, i, a);
            let s = superop::sandwich(down.as_ref(), down.as_ref())?;
            m -= linalg::scale(s.as_ref(), C64::new(e.decay_rates[i], 0.0));
            if pumps[i] > 0.0 {
                let up = superop::ket_bra(ng, a, i);
                let s = superop::sandwich(up.as_ref(), up.as_ref())?;
                m_prime -= linalg::scale(s.as_ref(), C64::new(pumps[i], 0.0));
            }
        }
    }
    let label = match temperature {
        Temperature::Zero => "lambda_zero_temperature",
        Temperature::Finite => "lambda_finite_temperature",
    };
    EffectiveFamily::pole_expansion(
        PoleExpansion {
            pp,
            m,
            m_prime,
            terms,
            gamma,
        },
        label,
    )
}

/// Largest `|V_i|^2 / Gamma`; the closed form is trustworthy when small.
pub fn validity_ratio(spec: &ModelSpec) -> Option<f64> {
    let e = spec.excited_levels.first()?;
    let gamma: f64 = e.decay_rates.iter().sum();
    let v2 = e.couplings.iter().map(|c| c.value().norm_sqr()).fold(0.0, f64::max);
    Some(v2 / gamma)
}

#[cfg(test)]
mod tests {
    use super::super::builtins;
    use super::*;
    use crate::effective::{self, EffectiveFamily};
    use crate::propagation;
    use crate::superop::Partition;
    use crate::NumericPolicy;

    fn partition(spec: &ModelSpec) -> Partition {
        let n = spec.n_ground() + spec.n_excited();
        Partition::new(superop::leading_projector(n, spec.n_ground()).as_ref(), &NumericPolicy::default()).unwrap()
    }

    #[test]
    fn uncoupled_generator_is_block_diagonal() {
        let mut spec = builtins::lambda_fig5(3.0);
        for c in &mut spec.excited_levels[0].couplings {
            *c = 0.0.into();
        }
        let l = lambda_exact_generator(&spec).unwrap();
        let ee = 2 * 3 + 2;
        let rho = superop::vectorize(superop::ket_bra(3, 2, 2).as_ref()).unwrap();
        let out = propagation::expm_apply(l.as_ref(), 0.7, &rho).unwrap();
        assert!((out[ee].re - (-3.0f64 * 0.7).exp()).abs() < 1e-12);
        let b = partition(&spec).blocks(l.as_ref()).unwrap();
        // the only slow/fast coupling left is the decay back to the ground levels
        assert!(linalg::max_abs(b.qp.as_ref()) < 1e-14);
    }

    #[test]
    fn trace_annihilated() {
        let l = lambda_exact_generator(&builtins::lambda_fig6(4.0)).unwrap();
        let row = superop::trace_row(l.as_ref()).unwrap();
        assert!((0..row.nrows()).all(|i| row[i].norm() < 1e-13));
    }

    #[test]
    fn steady_state_matches_long_time() {
        let spec = builtins::lambda_fig5(10.0);
        let l = lambda_exact_generator(&spec).unwrap();
        let ss = propagation::steady_state_exact(l.as_ref(), &NumericPolicy::default()).unwrap();
        let rho0 = superop::vectorize(superop::ket_bra(3, 0, 0).as_ref()).unwrap();
        let gap = propagation::linear_gap(l.as_ref()).unwrap();
        let late = propagation::expm_apply(l.as_ref(), 60.0 / gap.abs(), &rho0).unwrap();
        let diff = (0..ss.nrows()).map(|i| (ss[i] - late[i]).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn closed_form_matches_perturbative_l0() {
        let policy = NumericPolicy::default();
        for gamma in [20.0, 80.0] {
            let spec = builtins::lambda_fig5(gamma);
            let fam = lambda_effective_family(&spec, Temperature::Zero).unwrap();
            let l = lambda_exact_generator(&spec).unwrap();
            let exact = EffectiveFamily::exact(l.as_ref(), &partition(&spec), &policy).unwrap();
            let err = linalg::max_abs((fam.l0() - exact.l0()).as_ref());
            let scale = 1.0 / (gamma * gamma);
            assert!(err < 20.0 * scale, "gamma {gamma}: {err}");
        }
    }

    #[test]
    fn closed_form_converges_with_gamma() {
        // error relative to the exact Schur family shrinks faster than L0 itself
        let policy = NumericPolicy::default();
        let err = |gamma: f64, t: Temperature, spec: ModelSpec| {
            let fam = lambda_effective_family(&spec, t).unwrap();
            let l = lambda_exact_generator(&spec).unwrap();
            let ex = EffectiveFamily::exact(l.as_ref(), &partition(&spec), &policy).unwrap();
            let z = C64::new(0.3, 0.4);
            let d = fam.eval(z).unwrap() - ex.eval(z).unwrap();
            let _ = gamma;
            linalg::max_abs(d.as_ref()) / linalg::max_abs(ex.l0().as_ref())
        };
        for t in [Temperature::Zero, Temperature::Finite] {
            let spec_of = |g: f64| if t == Temperature::Zero { builtins::lambda_fig5(g) } else { builtins::lambda_fig6(g) };
            let e1 = err(20.0, t, spec_of(20.0));
            let e2 = err(200.0, t, spec_of(200.0));
            assert!(e2 < e1 / 5.0, "{t:?}: {e1} {e2}");
        }
    }

    #[test]
    fn zero_pumps_reduce_to_zero_temperature() {
        let spec = builtins::lambda_fig5(10.0);
        let a = lambda_effective_family(&spec, Temperature::Zero).unwrap();
        let b = lambda_effective_family(&spec, Temperature::Finite).unwrap();
        let z = C64::new(-0.2, 1.1);
        assert!(linalg::max_abs((a.eval(z).unwrap() - b.eval(z).unwrap()).as_ref()) < 1e-15);
    }

    #[test]
    fn closed_form_l0_is_trace_annihilating() {
        let fam = lambda_effective_family(&builtins::lambda_fig6(10.0), Temperature::Finite).unwrap();
        let row = superop::trace_row(fam.l0().as_ref()).unwrap();
        assert!((0..row.nrows()).all(|i| row[i].norm() < 1e-13));
        let tc = effective::trace_correction(&fam, &NumericPolicy::default()).unwrap();
        assert!(tc.alpha > 0.0 && tc.alpha <= 1.0 + 1e-12);
    }
}
