//! Ground manifold coupled to flat wide-band continua.

use faer::Mat;

use crate::effective::EffectiveFamily;
use crate::linalg::{self, ONE, ZERO};
use crate::superop;
use crate::{Error, Operator, Result, C64};

use super::{ExactSlowDynamics, ModelSpec};

/// Effective jump operators `F_i` of continuum `a`, and the return rate
/// `Gamma_a`.
pub(crate) fn continuum_jumps(spec: &ModelSpec, a: usize) -> (Vec<Operator>, f64) {
    let c = &spec.continua[a];
    let ng = spec.n_ground();
    let gamma: f64 = c.decay_rates.iter().sum();
    let strength = spec.rate_convention.factor() * std::f64::consts::PI * c.density;
    let jumps = (0..ng)
        .map(|i| {
            let w = if gamma > 0.0 { c.decay_rates[i] / gamma } else { 1.0 / ng as f64 };
            let s = (w * strength).sqrt();
            Mat::from_fn(ng, ng, |row, col| if row == i { c.couplings[col].value().conj() * s } else { ZERO })
        })
        .collect();
    (jumps, gamma)
}

/// Base generator and one `(B_a, Gamma_a)` channel per continuum.
fn rational_parts(spec: &ModelSpec) -> Result<(Mat<C64>, Vec<(Mat<C64>, f64)>)> {
    if !spec.excited_levels.is_empty() {
        return Err(Error::InvalidModel("continuum family does not take discrete excited levels".into()));
    }
    let h = spec.ground_hamiltonian();
    let mut base = superop::effective_hamiltonian_superop(h.as_ref())?;
    let mut channels = Vec::with_capacity(spec.continua.len());
    for a in 0..spec.continua.len() {
        let (jumps, gamma) = continuum_jumps(spec, a);
        let d = base.nrows();
        let mut b = Mat::<C64>::zeros(d, d);
        for f in &jumps {
            base += superop::dissipator(f.as_ref())?;
            b += superop::sandwich(f.as_ref(), f.as_ref())?;
        }
        channels.push((b, gamma));
    }
    Ok((base, channels))
}

/// `L_eff(z) = base + sum_a (-z/(z + Gamma_a)) B_a`, exact in the wide-band
/// limit.
pub fn continuum_effective_family(spec: &ModelSpec) -> Result<EffectiveFamily> {
    spec.validate()?;
    let (base, channels) = rational_parts(spec)?;
    EffectiveFamily::rational(base, channels, "continuum")
}

/// Linear generator on the slow space plus one auxiliary copy per continuum
/// whose slow restriction reproduces the continuum family exactly.
pub fn continuum_dilation(spec: &ModelSpec) -> Result<ExactSlowDynamics> {
    spec.validate()?;
    let (base, channels) = rational_parts(spec)?;
    let d = base.nrows();
    let k = channels.len();
    let n = d * (k + 1);
    let mut g = Mat::<C64>::zeros(n, n);
    let mut top = base.clone();
    for (b, _) in &channels {
        top -= b;
    }
    g.as_mut().submatrix_mut(0, 0, d, d).copy_from(&top);
    for (a, (b, gamma)) in channels.iter().enumerate() {
        let off = d * (a + 1);
        g.as_mut().submatrix_mut(0, off, d, d).copy_from(b);
        for i in 0..d {
            g[(off + i, i)] = C64::new(*gamma, 0.0);
            g[(off + i, off + i)] = C64::new(-gamma, 0.0);
        }
    }
    let embed = Mat::from_fn(n, d, |i, j| if i == j { ONE } else { ZERO });
    let extract = linalg::adjoint(embed.as_ref());
    Ok(ExactSlowDynamics {
        generator: g,
        embed,
        extract,
    })
}
