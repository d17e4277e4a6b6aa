//! Nonlinear eigenvalues of `T(z) = z - L_eff(z)`, Keldysh-normalized
//! eigenpairs and the dynamics they reconstruct.

use faer::{Col, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::effective::EffectiveFamily;
use crate::linalg::{self, identity, ZERO};
use crate::{Error, NumericPolicy, Result, StateVec, C64};

/// Simple nonlinear eigenvalue with right and left eigenvectors.
#[derive(Debug, Clone)]
pub struct NonlinearEigenpair {
    pub lambda: C64,
    pub v: StateVec,
    pub w: StateVec,
    /// `w^dag T'(lambda) v = 1`.
    pub normalized: bool,
    /// Within the pole tolerance of a pole of `L_eff`.
    pub near_pole: bool,
    /// `||T(lambda) v|| / ||v||`.
    pub residual: f64,
}

/// Circle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contour {
    pub center: C64,
    pub radius: f64,
}

impl Contour {
    pub fn contains(&self, z: C64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ContourOptions {
    pub quadrature_points: usize,
    /// Columns of the random probe; defaults to the slow dimension.
    pub probe_dim: Option<usize>,
    /// Largest number of block moments tried before giving up.
    pub max_moments: usize,
    pub seed: u64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            quadrature_points: 64,
            probe_dim: None,
            max_moments: 4,
            seed: 0x0be7_2012,
        }
    }
}

/// Beyn's contour-integral method followed by Newton refinement. When the
/// moment estimates disagree with their refined eigenvalues the disk is
/// covered by seven half-size disks and the search repeats on each.
pub fn nonlinear_eigs_contour(
    family: &EffectiveFamily,
    contour: Contour,
    opts: &ContourOptions,
    policy: &NumericPolicy,
) -> Result<Vec<NonlinearEigenpair>> {
    if contour.radius <= 0.0 || !contour.radius.is_finite() {
        return Err(Error::InvalidArgument("contour radius must be positive".into()));
    }
    let poles = family.poles();
    let mut out = Vec::new();
    search_disk(family, contour, contour, opts, policy, &poles, 0, &mut out)?;
    finish(out, policy)
}

const MAX_SUBDIVISION: usize = 4;

#[allow(clippy::too_many_arguments)]
fn search_disk(
    family: &EffectiveFamily,
    outer: Contour,
    disk: Contour,
    opts: &ContourOptions,
    policy: &NumericPolicy,
    poles: &[C64],
    depth: usize,
    out: &mut Vec<NonlinearEigenpair>,
) -> Result<()> {
    let guesses = match beyn_estimates(family, disk, opts, policy) {
        Ok(g) => g,
        Err(Error::ResolventPole { .. }) if depth > 0 => {
            // a sub-contour ran through an eigenvalue or pole; nudge it
            let nudged = Contour { center: disk.center, radius: disk.radius * 1.013 };
            beyn_estimates(family, nudged, opts, policy)?
        }
        Err(e) => return Err(e),
    };
    let mut found: Vec<NonlinearEigenpair> = Vec::new();
    let mut consistent = true;
    for guess in guesses {
        let pair = refine(family, guess, policy, poles)?;
        if pair.residual > policy.residual_tol {
            consistent = false;
            continue;
        }
        if (pair.lambda - guess).norm() > 1e-6 * disk.radius.max(1.0) {
            consistent = false;
        }
        if found.iter().any(|q| (q.lambda - pair.lambda).norm() <= policy.cluster_tol) {
            if multiplicity_hint(family, pair.lambda, policy)? > 1 {
                return Err(Error::NonSimpleEigenvalue(pair.lambda));
            }
            consistent = false;
            continue;
        }
        found.push(pair);
    }
    if !consistent && depth < MAX_SUBDIVISION {
        let r = 0.55 * disk.radius;
        let offset = disk.radius * 3f64.sqrt() / 2.0;
        let mut centers = vec![disk.center];
        centers.extend((0..6).map(|k| disk.center + C64::from_polar(offset, k as f64 * std::f64::consts::PI / 3.0 + 0.1)));
        for c in centers {
            let sub = Contour { center: c, radius: r };
            if (sub.center - outer.center).norm() - r >= outer.radius {
                continue;
            }
            search_disk(family, outer, sub, opts, policy, poles, depth + 1, out)?;
        }
        return Ok(());
    }
    for pair in found {
        if !outer.contains(pair.lambda) {
            continue;
        }
        if out.iter().any(|q| (q.lambda - pair.lambda).norm() <= policy.cluster_tol) {
            continue;
        }
        out.push(pair);
    }
    Ok(())
}

/// Eigenvalue estimates from block moments of `T(z)^-1` on the disk.
fn beyn_estimates(family: &EffectiveFamily, contour: Contour, opts: &ContourOptions, policy: &NumericPolicy) -> Result<Vec<C64>> {
    let m = family.slow_dim();
    let p = opts.probe_dim.unwrap_or(m).max(1);
    let n = opts.quadrature_points.max(4);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let probe = Mat::from_fn(m, p, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let nodes: Vec<C64> = (0..n)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
            C64::from_polar(1.0, theta)
        })
        .collect();
    // T(z_j)^-1 probe, evaluated independently and gathered in node order
    let solves: Vec<Mat<C64>> = nodes
        .par_iter()
        .map(|zeta| {
            let z = contour.center + zeta * contour.radius;
            let t = family.t_matrix(z)?;
            let y = linalg::solve(t.as_ref(), probe.as_ref());
            if !linalg::all_finite(y.as_ref()) {
                return Err(Error::ResolventPole { z, eigenvalue: z });
            }
            Ok(y)
        })
        .collect::<Result<Vec<_>>>()?;
    let moment = |k: usize| -> Mat<C64> {
        let mut acc = Mat::zeros(m, p);
        for (zeta, y) in nodes.iter().zip(solves.iter()) {
            acc += linalg::scale(y.as_ref(), zeta.powu(k as u32 + 1) / n as f64);
        }
        acc
    };
    // singular values below this are quadrature noise relative to the integrand
    let floor = solves.iter().map(|y| linalg::max_abs(y.as_ref())).fold(0.0, f64::max) * policy.rank_rel_tol;
    let max_k = opts.max_moments.max(1);
    let mut moments: Vec<Mat<C64>> = Vec::new();
    let mut k_blocks = 1;
    let zetas = loop {
        while moments.len() < 2 * k_blocks {
            moments.push(moment(moments.len()));
        }
        let h0 = Mat::from_fn(k_blocks * m, k_blocks * p, |i, j| moments[i / m + j / p][(i % m, j % p)]);
        let h1 = Mat::from_fn(k_blocks * m, k_blocks * p, |i, j| moments[i / m + j / p + 1][(i % m, j % p)]);
        let svd = h0.svd().map_err(|e| Error::Decomposition(format!("svd: {e:?}")))?;
        let s = svd.S().column_vector();
        let smax = if s.nrows() > 0 { s[0].re } else { 0.0 };
        let rank = if smax == 0.0 {
            0
        } else {
            (0..s.nrows()).filter(|&i| s[i].re > (policy.rank_rel_tol * smax).max(floor)).count()
        };
        if rank == 0 {
            return Ok(Vec::new());
        }
        if rank == (k_blocks * p).min(k_blocks * m) {
            if k_blocks < max_k {
                k_blocks += 1;
                continue;
            }
            return Err(Error::IncreaseProbeDimension { rank });
        }
        let u = svd.U().subcols(0, rank).to_owned();
        let w = svd.V().subcols(0, rank).to_owned();
        let sinv = Mat::from_fn(rank, rank, |i, j| if i == j { C64::new(1.0 / s[i].re, 0.0) } else { ZERO });
        let b = u.adjoint() * &h1 * &w * &sinv;
        break linalg::eigenvalues(b.as_ref())?;
    };
    Ok(zetas
        .into_iter()
        .filter(|z| z.norm() < 1.0)
        .map(|z| contour.center + z * contour.radius)
        .collect())
}

/// Newton iteration `lambda <- lambda - w^dag T v / w^dag T' v` with `v`,
/// `w` the smallest singular vectors of `T(lambda)`.
fn refine(
    family: &EffectiveFamily,
    guess: C64,
    policy: &NumericPolicy,
    poles: &[C64],
) -> Result<NonlinearEigenpair> {
    let mut lambda = guess;
    let m = family.slow_dim();
    let mut best: Option<(f64, C64)> = None;
    for _ in 0..50 {
        let t = family.t_matrix(lambda)?;
        let svd = t.svd().map_err(|e| Error::Decomposition(format!("svd: {e:?}")))?;
        let v = svd.V().col(m - 1).to_owned();
        let w = svd.U().col(m - 1).to_owned();
        let tp = family.t_derivative(lambda)?;
        let num = w.adjoint() * (&t * &v);
        let den = w.adjoint() * (&tp * &v);
        let sigma = svd.S().column_vector()[m - 1].re;
        if best.is_none_or(|(s, _)| sigma < s) {
            best = Some((sigma, lambda));
        }
        if den.norm() == 0.0 {
            break;
        }
        let step = num / den;
        lambda -= step;
        if step.norm() <= 4.0 * f64::EPSILON * lambda.norm().max(1.0) {
            break;
        }
    }
    // keep the best iterate if Newton wandered
    let t = family.t_matrix(lambda)?;
    let sigma_now = linalg::singular_values(t.as_ref())?.last().copied().unwrap_or(f64::INFINITY);
    if let Some((s, l)) = best {
        if s < sigma_now {
            lambda = l;
        }
    }
    eigenpair_at(family, lambda, policy, poles)
}

fn eigenpair_at(family: &EffectiveFamily, lambda: C64, policy: &NumericPolicy, poles: &[C64]) -> Result<NonlinearEigenpair> {
    let m = family.slow_dim();
    let t = family.t_matrix(lambda)?;
    let svd = t.svd().map_err(|e| Error::Decomposition(format!("svd: {e:?}")))?;
    let v = svd.V().col(m - 1).to_owned();
    let w = svd.U().col(m - 1).to_owned();
    let tp = family.t_derivative(lambda)?;
    let s = w.adjoint() * (&tp * &v);
    let residual = (&t * &v).norm_l2() / v.norm_l2();
    let normalized = s.norm() > 1e-14;
    let w = if normalized {
        let c = s.conj();
        Col::from_fn(m, |i| w[i] / c)
    } else {
        w
    };
    let near_pole = poles.iter().any(|p| (lambda - p).norm() <= policy.pole_tol);
    Ok(NonlinearEigenpair {
        lambda,
        v,
        w,
        normalized,
        near_pole,
        residual,
    })
}

fn finish(mut pairs: Vec<NonlinearEigenpair>, policy: &NumericPolicy) -> Result<Vec<NonlinearEigenpair>> {
    pairs.sort_by(|a, b| {
        b.lambda
            .re
            .total_cmp(&a.lambda.re)
            .then(a.lambda.im.total_cmp(&b.lambda.im))
    });
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            if (pairs[i].lambda - pairs[j].lambda).norm() <= policy.cluster_tol {
                return Err(Error::NonSimpleEigenvalue(pairs[i].lambda));
            }
        }
    }
    Ok(pairs)
}

/// Companion linearization of `(z + Gamma)(z - A) + z B = 0` for families
/// `L_eff(z) = A + (-z/(z+Gamma)) B`.
pub fn nonlinear_eigs_rational(family: &EffectiveFamily, policy: &NumericPolicy) -> Result<Vec<NonlinearEigenpair>> {
    let (a, b, g) = family.single_pole_form().ok_or(Error::UnsupportedForm)?;
    let m = a.nrows();
    let poles = family.poles();
    if g == 0.0 {
        // f(z) = -1: the family is the constant A - B
        let c = &a - &b;
        return linear_pairs(c.as_ref(), policy, &poles);
    }
    let id = identity(m);
    // z^2 + z C1 + C0 with C1 = Gamma - A + B, C0 = -Gamma A
    let c1 = linalg::scale(id.as_ref(), C64::new(g, 0.0)) - &a + &b;
    let c0 = linalg::scale(a.as_ref(), C64::new(-g, 0.0));
    let comp = Mat::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
        (true, true) => ZERO,
        (true, false) => id[(i, j - m)],
        (false, true) => -c0[(i - m, j)],
        (false, false) => -c1[(i - m, j - m)],
    });
    let vals = linalg::eigenvalues(comp.as_ref())?;
    let pole = C64::new(-g, 0.0);
    let mut out: Vec<NonlinearEigenpair> = Vec::new();
    for lam in vals {
        if (lam - pole).norm() <= 1e-6 * (1.0 + g) {
            continue;
        }
        let pair = refine(family, lam, policy, &poles)?;
        if pair.residual > policy.residual_tol {
            continue;
        }
        if out.iter().any(|q| (q.lambda - pair.lambda).norm() <= policy.cluster_tol) {
            return Err(Error::NonSimpleEigenvalue(pair.lambda));
        }
        out.push(pair);
    }
    finish(out, policy)
}

fn linear_pairs(l: faer::MatRef<'_, C64>, policy: &NumericPolicy, poles: &[C64]) -> Result<Vec<NonlinearEigenpair>> {
    let m = l.nrows();
    let (vals, vecs) = linalg::eig(l)?;
    let inv = linalg::solve(vecs.as_ref(), identity(m).as_ref());
    let mut out = Vec::with_capacity(m);
    for (k, lam) in vals.iter().enumerate() {
        let v = Col::from_fn(m, |i| vecs[(i, k)]);
        let w = Col::from_fn(m, |i| inv[(k, i)].conj());
        let lv = l * &v;
        let residual = Col::from_fn(m, |i| lam * v[i] - lv[i]).norm_l2() / v.norm_l2();
        out.push(NonlinearEigenpair {
            lambda: *lam,
            v,
            w,
            normalized: true,
            near_pole: poles.iter().any(|p| (lam - p).norm() <= policy.pole_tol),
            residual,
        });
    }
    finish(out, policy)
}

/// Eigenvalues and Keldysh-normalized eigenpairs of a linear generator.
pub fn linear_eigenpairs(l: faer::MatRef<'_, C64>, policy: &NumericPolicy) -> Result<Vec<NonlinearEigenpair>> {
    linear_pairs(l, policy, &[])
}

/// Circle expected to enclose every nonlinear eigenvalue of the family.
pub fn enclosing_contour(family: &EffectiveFamily) -> Contour {
    let norm = |m: &Mat<C64>| linalg::spectral_norm(m.as_ref());
    let l0 = norm(family.l0());
    let l1 = norm(family.l1());
    let pole = family.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
    let bound = if let Some((a, b, g)) = family.single_pole_form() {
        norm(&a) + norm(&b) + 2.0 * g
    } else {
        2.0 * pole + l0 * (1.0 + l1) + 1.0
    };
    Contour {
        center: ZERO,
        radius: 1.1 * bound + 0.1,
    }
}

/// Every nonlinear eigenpair of the family, by the cheapest complete method.
pub fn complete_eigenpairs(family: &EffectiveFamily, policy: &NumericPolicy) -> Result<Vec<NonlinearEigenpair>> {
    if family.is_constant() {
        return linear_eigenpairs(family.l0().as_ref(), policy);
    }
    if family.single_pole_form().is_some() {
        return nonlinear_eigs_rational(family, policy);
    }
    let opts = ContourOptions {
        quadrature_points: 512,
        max_moments: 8,
        ..ContourOptions::default()
    };
    nonlinear_eigs_contour(family, enclosing_contour(family), &opts, policy)
}

/// `sum_n exp(lambda_n t) v_n w_n^dag rho0`.
pub fn keldysh_propagate(pairs: &[NonlinearEigenpair], rho0: &StateVec, t: f64) -> Result<StateVec> {
    if pairs.iter().any(|p| !p.normalized) {
        return Err(Error::UnnormalizedPairs);
    }
    let m = rho0.nrows();
    let mut out = Col::<C64>::zeros(m);
    for p in pairs {
        if p.v.nrows() != m {
            return Err(Error::Dimension("eigenvector does not match state".into()));
        }
        let c = (p.lambda * t).exp() * (p.w.adjoint() * rho0);
        out += Col::from_fn(m, |i| p.v[i] * c);
    }
    Ok(out)
}

/// Largest nonzero real part, and whether a zero eigenvalue was present.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralGap {
    pub gap: f64,
    pub steady_state_found: bool,
    pub warning: Option<String>,
}

pub fn spectral_gap(pairs: &[NonlinearEigenpair]) -> Result<SpectralGap> {
    let vals: Vec<C64> = pairs.iter().map(|p| p.lambda).collect();
    gap_of_values(&vals)
}

pub fn gap_of_values(vals: &[C64]) -> Result<SpectralGap> {
    if vals.is_empty() {
        return Err(Error::InvalidArgument("empty eigenvalue set".into()));
    }
    let scale = vals.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let zero_tol = 1e-8 * scale;
    let steady_state_found = vals.iter().any(|v| v.norm() <= zero_tol);
    let gap = vals
        .iter()
        .filter(|v| v.norm() > zero_tol)
        .map(|v| v.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if gap == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("no nonzero eigenvalue".into()));
    }
    let warning = (!steady_state_found).then(|| "no eigenvalue at zero: steady state missing from the set".to_string());
    Ok(SpectralGap {
        gap,
        steady_state_found,
        warning,
    })
}

/// `||T(z)^-1 - sum_n v_n w_n^dag / (z - lambda_n)||`, the analytic remainder.
pub fn keldysh_remainder(family: &EffectiveFamily, pairs: &[NonlinearEigenpair], z: C64) -> Result<f64> {
    let t = family.t_matrix(z)?;
    let m = t.nrows();
    let inv = linalg::solve(t.as_ref(), identity(m).as_ref());
    let mut sum = Mat::<C64>::zeros(m, m);
    for p in pairs {
        let c = (z - p.lambda).inv();
        sum += Mat::from_fn(m, m, |i, j| p.v[i] * p.w[j].conj() * c);
    }
    Ok((inv - sum).norm_l2())
}

/// Probe that eigenvalue `lambda` is simple for the given family.
pub fn multiplicity_hint(family: &EffectiveFamily, lambda: C64, policy: &NumericPolicy) -> Result<usize> {
    let t = family.t_matrix(lambda)?;
    let s = linalg::singular_values(t.as_ref())?;
    let smax = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x <= policy.kernel_rel_tol * smax.max(1.0)).count())
}
