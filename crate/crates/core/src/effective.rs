//! Effective slow-subspace generators `L_eff(z)`, their expansion
//! `L0 + z L1`, perturbative inversion of the fast block, and the
//! trace-correction factor.

use faer::{Col, Mat, MatRef};
use serde::Serialize;

use crate::linalg::{self, identity, ONE, ZERO};
use crate::propagation;
use crate::superop::{self, Partition};
use crate::{Error, NumericPolicy, Operator, Result, StateVec, SuperOperator, C64};

/// How an [`EffectiveFamily`] was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FamilySource {
    ExactSchur,
    Perturbative { order: usize },
    ClosedForm { model: String },
}

/// Closed form `L_PP + (1 + M c) X(z) (1 + M' c) + 1/2 M M' c` with
/// `c = 1/(z + gamma)` and `X(z) = sum_j h_j / (z - xi_j)`.
#[derive(Debug, Clone)]
pub struct PoleExpansion {
    pub pp: Mat<C64>,
    pub m: Mat<C64>,
    pub m_prime: Mat<C64>,
    pub terms: Vec<(Mat<C64>, C64)>,
    pub gamma: f64,
}

impl PoleExpansion {
    fn x(&self, z: C64, power: i32) -> Mat<C64> {
        let d = self.pp.nrows();
        let mut out = Mat::zeros(d, d);
        for (h, xi) in &self.terms {
            let w = (z - xi).powi(-power);
            out += linalg::scale(h.as_ref(), w);
        }
        out
    }

    fn eval(&self, z: C64) -> Mat<C64> {
        let d = self.pp.nrows();
        let id = identity(d);
        let c = (z + self.gamma).inv();
        let left = &id + linalg::scale(self.m.as_ref(), c);
        let right = &id + linalg::scale(self.m_prime.as_ref(), c);
        let direct = linalg::scale((&self.m * &self.m_prime).as_ref(), c * 0.5);
        &self.pp + &left * self.x(z, 1) * &right + direct
    }

    fn derivative(&self, z: C64) -> Mat<C64> {
        let d = self.pp.nrows();
        let id = identity(d);
        let c = (z + self.gamma).inv();
        let dc = -c * c;
        let left = &id + linalg::scale(self.m.as_ref(), c);
        let right = &id + linalg::scale(self.m_prime.as_ref(), c);
        let x = self.x(z, 1);
        let dx = linalg::scale(self.x(z, 2).as_ref(), -ONE);
        let dl = linalg::scale(self.m.as_ref(), dc);
        let dr = linalg::scale(self.m_prime.as_ref(), dc);
        &dl * &x * &right
            + &left * &dx * &right
            + &left * &x * &dr
            + linalg::scale((&self.m * &self.m_prime).as_ref(), dc * 0.5)
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Schur {
        pp: Mat<C64>,
        pq: Mat<C64>,
        qp: Mat<C64>,
        qq: Mat<C64>,
        poles: Vec<C64>,
    },
    Perturbative {
        pp: Mat<C64>,
        pq: Mat<C64>,
        qp: Mat<C64>,
        ld: Vec<C64>,
        w: Mat<C64>,
        order: usize,
    },
    /// `base + sum_a f_a(z) B_a` with `f_a(z) = -z / (z + Gamma_a)`.
    Rational {
        base: Mat<C64>,
        channels: Vec<(Mat<C64>, f64)>,
    },
    Poles(PoleExpansion),
}

/// The map `z -> L_eff(z)` on the slow space, with `L0 = L_eff(0)` and
/// `L1 = dL_eff/dz (0)`.
#[derive(Debug, Clone)]
pub struct EffectiveFamily {
    rank: usize,
    source: FamilySource,
    kind: Kind,
    l0: Mat<C64>,
    l1: Mat<C64>,
    pseudoinverse_used: bool,
}

fn rank_of_dim(slow_dim: usize) -> Result<usize> {
    superop::perfect_sqrt(slow_dim)
}

impl EffectiveFamily {
    /// Exact Schur-complement family of a full generator.
    pub fn exact(l: MatRef<'_, C64>, partition: &Partition, policy: &NumericPolicy) -> Result<Self> {
        let b = partition.blocks(l)?;
        let poles = linalg::eigenvalues(b.qq.as_ref())?;
        let q = b.qq.nrows();
        let singular = q > 0 && linalg::rank(b.qq.as_ref(), policy.rank_rel_tol)? < q;
        let (l0, l1) = if q == 0 {
            (b.pp.clone(), Mat::zeros(b.pp.nrows(), b.pp.ncols()))
        } else {
            let inv = if singular {
                linalg::pinv(b.qq.as_ref(), policy.rank_rel_tol)?
            } else {
                linalg::solve(b.qq.as_ref(), identity(q).as_ref())
            };
            let t = &inv * &b.qp;
            let l0 = &b.pp - &b.pq * &t;
            let l1 = linalg::scale((&b.pq * &inv * &t).as_ref(), -ONE);
            (l0, l1)
        };
        Ok(Self {
            rank: partition.rank(),
            source: FamilySource::ExactSchur,
            kind: Kind::Schur {
                pp: b.pp,
                pq: b.pq,
                qp: b.qp,
                qq: b.qq,
                poles,
            },
            l0,
            l1,
            pseudoinverse_used: singular,
        })
    }

    /// Family whose fast-block inverse is replaced by a truncated Neumann
    /// series around the diagonal part of the split.
    pub fn perturbative(l: MatRef<'_, C64>, split: &LdWSplit, order: usize) -> Result<Self> {
        let b = split.partition.blocks(l)?;
        let ld = diagonal_entries(split.l_d.as_ref())?;
        let mut fam = Self {
            rank: split.partition.rank(),
            source: FamilySource::Perturbative { order },
            kind: Kind::Perturbative {
                pp: b.pp,
                pq: b.pq,
                qp: b.qp,
                ld,
                w: split.w.clone(),
                order,
            },
            l0: Mat::zeros(0, 0),
            l1: Mat::zeros(0, 0),
            pseudoinverse_used: false,
        };
        fam.l0 = fam.eval(ZERO)?;
        fam.l1 = fam.derivative(ZERO)?;
        Ok(fam)
    }

    /// `base + sum_a (-z/(z + Gamma_a)) B_a`. A channel with `Gamma_a = 0`
    /// contributes the constant `-B_a`.
    pub fn rational(base: Mat<C64>, channels: Vec<(Mat<C64>, f64)>, model: &str) -> Result<Self> {
        let rank = rank_of_dim(base.nrows())?;
        for (b, g) in &channels {
            if b.nrows() != base.nrows() || b.ncols() != base.ncols() {
                return Err(Error::Dimension("channel matrix does not match base".into()));
            }
            if *g < 0.0 || !g.is_finite() {
                return Err(Error::InvalidModel(format!("pole rate {g} must be nonnegative")));
            }
        }
        let mut fam = Self {
            rank,
            source: FamilySource::ClosedForm { model: model.to_string() },
            kind: Kind::Rational { base, channels },
            l0: Mat::zeros(0, 0),
            l1: Mat::zeros(0, 0),
            pseudoinverse_used: false,
        };
        fam.l0 = fam.eval(ZERO)?;
        fam.l1 = fam.derivative(ZERO)?;
        Ok(fam)
    }

    pub fn pole_expansion(form: PoleExpansion, model: &str) -> Result<Self> {
        if form.gamma <= 0.0 {
            return Err(Error::InvalidModel("pole expansion needs a positive decay rate".into()));
        }
        let rank = rank_of_dim(form.pp.nrows())?;
        let mut fam = Self {
            rank,
            source: FamilySource::ClosedForm { model: model.to_string() },
            kind: Kind::Poles(form),
            l0: Mat::zeros(0, 0),
            l1: Mat::zeros(0, 0),
            pseudoinverse_used: false,
        };
        fam.l0 = fam.eval(ZERO)?;
        fam.l1 = fam.derivative(ZERO)?;
        Ok(fam)
    }

    pub fn source(&self) -> &FamilySource {
        &self.source
    }

    /// `rank P`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `(rank P)^2`.
    pub fn slow_dim(&self) -> usize {
        self.rank * self.rank
    }

    pub fn l0(&self) -> &Mat<C64> {
        &self.l0
    }

    pub fn l1(&self) -> &Mat<C64> {
        &self.l1
    }

    /// True when the fast block was singular and `L0`, `L1` use its
    /// Moore-Penrose pseudoinverse.
    pub fn pseudoinverse_used(&self) -> bool {
        self.pseudoinverse_used
    }

    /// Points where `L_eff` is singular.
    pub fn poles(&self) -> Vec<C64> {
        match &self.kind {
            Kind::Schur { poles, .. } => poles.clone(),
            Kind::Perturbative { ld, .. } => ld.clone(),
            Kind::Rational { channels, .. } => channels
                .iter()
                .filter(|(_, g)| *g > 0.0)
                .map(|(_, g)| C64::new(-g, 0.0))
                .collect(),
            Kind::Poles(f) => {
                let mut p: Vec<C64> = f.terms.iter().map(|(_, xi)| *xi).collect();
                p.push(C64::new(-f.gamma, 0.0));
                p
            }
        }
    }

    /// `(A, B, Gamma)` such that `L_eff(z) = A + (-z/(z+Gamma)) B`, if the
    /// family has that shape with at least one coupled channel.
    pub fn single_pole_form(&self) -> Option<(Mat<C64>, Mat<C64>, f64)> {
        match &self.kind {
            Kind::Rational { base, channels } if !channels.is_empty() => {
                let g = channels[0].1;
                if channels.iter().any(|(_, gi)| (gi - g).abs() > 1e-14 * g.max(1.0)) {
                    return None;
                }
                let mut b = Mat::zeros(base.nrows(), base.ncols());
                for (bi, _) in channels {
                    b += bi;
                }
                Some((base.clone(), b, g))
            }
            _ => None,
        }
    }

    /// True when `L_eff` does not depend on `z`.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            Kind::Rational { channels, .. } => channels.iter().all(|(b, _)| linalg::max_abs(b.as_ref()) == 0.0),
            Kind::Schur { pq, qp, .. } | Kind::Perturbative { pq, qp, .. } => {
                linalg::max_abs(pq.as_ref()) == 0.0 || linalg::max_abs(qp.as_ref()) == 0.0
            }
            Kind::Poles(_) => false,
        }
    }

    /// `L_eff(z)`.
    pub fn eval(&self, z: C64) -> Result<Mat<C64>> {
        match &self.kind {
            Kind::Schur { pp, pq, qp, qq, poles } => {
                if qq.nrows() == 0 {
                    return Ok(pp.clone());
                }
                if self.pseudoinverse_used && z == ZERO {
                    return Ok(self.l0.clone());
                }
                let x = self.fast_solve(qq, poles, z, qp)?;
                Ok(pp + pq * &x)
            }
            Kind::Perturbative { pp, pq, qp, ld, w, order } => {
                let r = neumann_resolvent(ld, w, *order, z)?;
                Ok(pp + pq * r.value * qp)
            }
            Kind::Rational { base, channels } => {
                let mut out = base.clone();
                for (b, g) in channels {
                    let f = if *g == 0.0 {
                        -ONE
                    } else {
                        let d = z + g;
                        if d.norm() == 0.0 {
                            return Err(Error::ResolventPole { z, eigenvalue: C64::new(-g, 0.0) });
                        }
                        -z / d
                    };
                    out += linalg::scale(b.as_ref(), f);
                }
                Ok(out)
            }
            Kind::Poles(f) => {
                for p in self.poles() {
                    if (z - p).norm() == 0.0 {
                        return Err(Error::ResolventPole { z, eigenvalue: p });
                    }
                }
                Ok(f.eval(z))
            }
        }
    }

    /// `dL_eff/dz` at `z`.
    pub fn derivative(&self, z: C64) -> Result<Mat<C64>> {
        match &self.kind {
            Kind::Schur { pp, pq, qp, qq, poles } => {
                if qq.nrows() == 0 {
                    return Ok(Mat::zeros(pp.nrows(), pp.ncols()));
                }
                if self.pseudoinverse_used && z == ZERO {
                    return Ok(self.l1.clone());
                }
                let x = self.fast_solve(qq, poles, z, qp)?;
                let y = self.fast_solve(qq, poles, z, &x)?;
                Ok(linalg::scale((pq * &y).as_ref(), -ONE))
            }
            Kind::Perturbative { pq, qp, ld, w, order, .. } => {
                let r = neumann_resolvent(ld, w, *order, z)?;
                Ok(pq * r.derivative * qp)
            }
            Kind::Rational { base, channels } => {
                let mut out = Mat::zeros(base.nrows(), base.ncols());
                for (b, g) in channels {
                    if *g == 0.0 {
                        continue;
                    }
                    let d = z + g;
                    let df = -C64::new(*g, 0.0) / (d * d);
                    out += linalg::scale(b.as_ref(), df);
                }
                Ok(out)
            }
            Kind::Poles(f) => Ok(f.derivative(z)),
        }
    }

    /// `T(z) = z - L_eff(z)`.
    pub fn t_matrix(&self, z: C64) -> Result<Mat<C64>> {
        let l = self.eval(z)?;
        let d = l.nrows();
        Ok(Mat::from_fn(d, d, |i, j| if i == j { z - l[(i, j)] } else { -l[(i, j)] }))
    }

    /// `T'(z) = 1 - L_eff'(z)`.
    pub fn t_derivative(&self, z: C64) -> Result<Mat<C64>> {
        let l = self.derivative(z)?;
        let d = l.nrows();
        Ok(Mat::from_fn(d, d, |i, j| if i == j { ONE - l[(i, j)] } else { -l[(i, j)] }))
    }

    fn fast_solve(&self, qq: &Mat<C64>, poles: &[C64], z: C64, rhs: &Mat<C64>) -> Result<Mat<C64>> {
        let q = qq.nrows();
        if let Some(p) = linalg::nearest(poles, z) {
            if (z - p).norm() <= 1e-12 * (1.0 + p.norm()) {
                return Err(Error::ResolventPole { z, eigenvalue: p });
            }
        }
        let a = Mat::from_fn(q, q, |i, j| if i == j { z - qq[(i, j)] } else { -qq[(i, j)] });
        let x = linalg::solve(a.as_ref(), rhs.as_ref());
        if !linalg::all_finite(x.as_ref()) {
            let eigenvalue = linalg::nearest(poles, z).unwrap_or(z);
            return Err(Error::ResolventPole { z, eigenvalue });
        }
        Ok(x)
    }
}

fn diagonal_entries(m: MatRef<'_, C64>) -> Result<Vec<C64>> {
    let n = linalg::require_square(m, "L_D")?;
    let diag_max = (0..n).map(|i| m[(i, i)].norm()).fold(0.0, f64::max);
    let mut off = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                off = off.max(m[(i, j)].norm());
            }
        }
    }
    if off > 1e-12 * diag_max.max(1.0) {
        return Err(Error::NotDiagonal { offdiag: off });
    }
    Ok((0..n).map(|i| m[(i, i)]).collect())
}

struct NeumannResolvent {
    value: Mat<C64>,
    derivative: Mat<C64>,
}

/// `sum_{n<=order} D (W D)^n` with `D = (z - L_D)^-1`, and its z-derivative.
fn neumann_resolvent(ld: &[C64], w: &Mat<C64>, order: usize, z: C64) -> Result<NeumannResolvent> {
    let q = ld.len();
    let mut d = Vec::with_capacity(q);
    for &x in ld {
        let den = z - x;
        if den.norm() == 0.0 {
            return Err(Error::ResolventPole { z, eigenvalue: x });
        }
        d.push(den.inv());
    }
    let dmat = Mat::from_fn(q, q, |i, j| if i == j { d[i] } else { ZERO });
    let d2 = Mat::from_fn(q, q, |i, j| if i == j { -d[i] * d[i] } else { ZERO });
    // term_n = D (W D)^n; its derivative replaces one D factor by -D^2.
    let wd = w * &dmat;
    let wd_prime = w * &d2;
    let mut value = dmat.clone();
    let mut derivative = d2.clone();
    let mut term = dmat.clone();
    let mut term_prime = d2;
    for _ in 0..order {
        let next_prime = &term_prime * &wd + &term * &wd_prime;
        term = &term * &wd;
        term_prime = next_prime;
        value += &term;
        derivative += &term_prime;
    }
    Ok(NeumannResolvent { value, derivative })
}

/// Result of the truncated Neumann inversion.
#[derive(Debug, Clone)]
pub struct PerturbativeInverse {
    pub inverse: Mat<C64>,
    /// Spectral radius of `W L_D^-1`.
    pub contraction: f64,
    pub warning: Option<String>,
}

/// `(L_D + W)^-1 ~ L_D^-1 sum_{n<=order} (-W L_D^-1)^n` for diagonal `L_D`.
pub fn perturbative_inverse(l_d: MatRef<'_, C64>, w: MatRef<'_, C64>, order: usize) -> Result<PerturbativeInverse> {
    let d = diagonal_entries(l_d)?;
    let q = d.len();
    if w.nrows() != q || w.ncols() != q {
        return Err(Error::Dimension("W does not match L_D".into()));
    }
    if let Some(pos) = d.iter().position(|x| x.norm() == 0.0) {
        return Err(Error::Singular(format!("L_D has a zero diagonal entry at {pos}")));
    }
    let dinv = Mat::from_fn(q, q, |i, j| if i == j { d[i].inv() } else { ZERO });
    let step = linalg::scale((w * &dinv).as_ref(), -ONE);
    let mut term = identity(q);
    let mut sum = identity(q);
    for _ in 0..order {
        term = &term * &step;
        sum += &term;
    }
    let contraction = linalg::eigenvalues(step.as_ref())?
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    let warning = (contraction >= 1.0)
        .then(|| format!("spectral radius of W L_D^-1 is {contraction:.3e}; the series may diverge"));
    Ok(PerturbativeInverse {
        inverse: &dinv * &sum,
        contraction,
        warning,
    })
}

/// Diagonal/coupling split of the fast block.
#[derive(Debug, Clone)]
pub struct LdWSplit {
    /// Partition expressed in the eigenbasis of `PHP` and `QHQ`.
    pub partition: Partition,
    pub l_d: Mat<C64>,
    pub w: Mat<C64>,
}

/// Builds `L_D` from `K0 = PHP + QHQ - i/2 sum F^dag F` and `W` from the
/// couplings `PHQ + QHP`, both on the fast block.
pub fn build_ld_w(
    h: MatRef<'_, C64>,
    jumps: &[Operator],
    p: MatRef<'_, C64>,
    policy: &NumericPolicy,
) -> Result<LdWSplit> {
    let n = linalg::require_square(h, "Hamiltonian")?;
    let base = Partition::new(p, policy)?;
    let r = base.rank();
    let u = base.slow_basis().to_owned();
    let v = base.fast_basis().to_owned();
    let rotate = |b: &Mat<C64>| -> Result<Mat<C64>> {
        if b.ncols() == 0 {
            return Ok(b.clone());
        }
        let block = b.adjoint() * h * b;
        let off = (0..block.nrows())
            .flat_map(|i| (0..block.ncols()).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| block[(i, j)].norm())
            .fold(0.0, f64::max);
        if off <= policy.hermitian_tol {
            return Ok(b.clone());
        }
        let (_, vecs) = linalg::hermitian_eig(propagation::hermitize(block.as_ref()).as_ref())?;
        Ok(b * vecs)
    };
    let u2 = rotate(&u)?;
    let v2 = rotate(&v)?;
    let basis = Mat::from_fn(n, n, |i, k| if k < r { u2[(i, k)] } else { v2[(i, k - r)] });
    let partition = Partition::with_basis(p, basis, policy)?;
    let pm = partition.projector();
    let qm = identity(n) - &pm;
    let h0 = &pm * h * &pm + &qm * h * &qm;
    let coupling = h.to_owned() - &h0;
    let mut k0 = h0.clone();
    for f in jumps {
        k0 -= linalg::scale((f.adjoint() * f).as_ref(), C64::new(0.0, 0.5));
    }
    let sq = partition.fast_isometry();
    let lk = superop::effective_hamiltonian_superop(k0.as_ref())?;
    let lv = superop::effective_hamiltonian_superop(coupling.as_ref())?;
    Ok(LdWSplit {
        l_d: sq.adjoint() * &lk * sq,
        w: sq.adjoint() * &lv * sq,
        partition,
    })
}

/// `L_eff(z)` of a full generator for projector `P`.
pub fn leff_at(l: MatRef<'_, C64>, p: MatRef<'_, C64>, z: C64) -> Result<SuperOperator> {
    let policy = NumericPolicy::default();
    let part = Partition::new(p, &policy)?;
    EffectiveFamily::exact(l, &part, &policy)?.eval(z)
}

/// `L0 = PLP - PLQ (QLQ)^-1 QLP` on the slow block.
pub fn l0(l: MatRef<'_, C64>, p: MatRef<'_, C64>) -> Result<SuperOperator> {
    let policy = NumericPolicy::default();
    let part = Partition::new(p, &policy)?;
    Ok(EffectiveFamily::exact(l, &part, &policy)?.l0.clone())
}

/// `L1 = -PLQ (QLQ)^-2 QLP` on the slow block.
pub fn l1(l: MatRef<'_, C64>, p: MatRef<'_, C64>) -> Result<SuperOperator> {
    let policy = NumericPolicy::default();
    let part = Partition::new(p, &policy)?;
    Ok(EffectiveFamily::exact(l, &part, &policy)?.l1.clone())
}

/// Steady-state data of `L0` and the factor rescaling its evolution.
#[derive(Debug, Clone, Serialize)]
pub struct TraceCorrection {
    pub alpha: f64,
    #[serde(skip)]
    pub rho_bar: StateVec,
    pub kernel_dim: usize,
    /// `tr(L1 rho_bar)`.
    pub mean_l1: C64,
    /// `||L0 rho_bar||`.
    pub residual: f64,
}

/// `alpha = 1 / tr((1 - L1) rho_bar)` with `rho_bar` the trace-one kernel
/// vector of `L0`.
pub fn trace_correction(family: &EffectiveFamily, policy: &NumericPolicy) -> Result<TraceCorrection> {
    let l0 = family.l0();
    let k = linalg::kernel(l0.as_ref(), policy.kernel_rel_tol)?;
    if k.ncols() != 1 {
        return Err(Error::DegenerateSteadyState { kernel_dim: k.ncols() });
    }
    let r = family.rank();
    let tr = superop::slow_trace(k.as_ref(), r);
    if tr.norm() <= 1e-12 * k.norm_l2() {
        return Err(Error::TracelessKernel);
    }
    let rho_bar = Col::from_fn(k.nrows(), |i| k[(i, 0)] / tr);
    let l1r = family.l1() * &rho_bar;
    let mean_l1: C64 = (0..r).map(|a| l1r[a * r + a]).sum();
    let alpha = (ONE - mean_l1).inv().re;
    let residual = (l0 * &rho_bar).norm_l2();
    Ok(TraceCorrection {
        alpha,
        rho_bar,
        kernel_dim: 1,
        mean_l1,
        residual,
    })
}

/// `alpha exp(L0 t) rho0`; its trace at `t = 0` is `alpha`, by design.
pub fn corrected_evolution(
    family: &EffectiveFamily,
    correction: &TraceCorrection,
    rho0: &StateVec,
    t: f64,
) -> Result<StateVec> {
    if rho0.nrows() != family.slow_dim() {
        return Err(Error::Dimension("initial state is not a slow-space vector".into()));
    }
    let r = family.rank();
    let tr: C64 = (0..r).map(|a| rho0[a * r + a]).sum();
    if (tr - ONE).norm() > 1e-8 {
        return Err(Error::InvalidArgument(format!("initial state has trace {tr}, expected 1")));
    }
    let out = propagation::expm_apply(family.l0().as_ref(), t, rho0)?;
    Ok(Col::from_fn(out.nrows(), |i| out[i] * correction.alpha))
}

/// Diagnostics for trace preservation of `L0`.
#[derive(Debug, Clone, Serialize)]
pub struct TracePreservationReport {
    /// `||vec(1_P)^dag L0||`.
    pub residual: f64,
    /// Whether `ran QLP` lies inside `ran QLQ`.
    pub range_inclusion: bool,
    pub rank_qq: usize,
    pub rank_augmented: usize,
}

pub fn trace_preserving_check(l: MatRef<'_, C64>, p: MatRef<'_, C64>) -> Result<TracePreservationReport> {
    let policy = NumericPolicy::default();
    let part = Partition::new(p, &policy)?;
    let fam = EffectiveFamily::exact(l, &part, &policy)?;
    let b = part.blocks(l)?;
    let r = part.rank();
    let l0 = fam.l0();
    let row = Col::from_fn(l0.ncols(), |j| (0..r).map(|a| l0[(a * r + a, j)]).sum::<C64>());
    let q = b.qq.nrows();
    let aug = Mat::from_fn(q, q + b.qp.ncols(), |i, j| if j < q { b.qq[(i, j)] } else { b.qp[(i, j - q)] });
    let scale_tol = |m: MatRef<'_, C64>| -> Result<usize> {
        // both ranks share one absolute threshold so the comparison is fair
        if m.nrows() == 0 || m.ncols() == 0 {
            return Ok(0);
        }
        let s = linalg::singular_values(m)?;
        let smax = linalg::singular_values(aug.as_ref())?.first().copied().unwrap_or(0.0);
        Ok(s.iter().filter(|&&x| x > policy.rank_rel_tol * smax).count())
    };
    let rank_qq = scale_tol(b.qq.as_ref())?;
    let rank_augmented = scale_tol(aug.as_ref())?;
    Ok(TracePreservationReport {
        residual: row.norm_l2(),
        range_inclusion: rank_qq == rank_augmented,
        rank_qq,
        rank_augmented,
    })
}

/// Conditional complete positivity of a slow generator.
#[derive(Debug, Clone, Serialize)]
pub struct LindbladFormReport {
    pub hermiticity_preserving: bool,
    /// Smallest eigenvalue of the Choi matrix compressed off the maximally
    /// entangled vector; nonnegative for Lindblad generators.
    pub min_eigenvalue: f64,
    pub is_lindblad: bool,
}

pub fn lindblad_form_check(l0: MatRef<'_, C64>, policy: &NumericPolicy) -> Result<LindbladFormReport> {
    let r = rank_of_dim(l0.nrows())?;
    let d = r * r;
    // Choi[(i r + a), (j r + b)] = [L0(|i><j|)]_{ab}
    let choi = Mat::from_fn(d, d, |row, col| {
        let (i, a) = (row / r, row % r);
        let (j, b) = (col / r, col % r);
        l0[(b * r + a, j * r + i)]
    });
    let herm_dev = linalg::hermiticity_deviation(choi.as_ref());
    let scale = linalg::max_abs(choi.as_ref()).max(1.0);
    let omega = Col::from_fn(d, |k| if k / r == k % r { C64::new(1.0 / (r as f64).sqrt(), 0.0) } else { ZERO });
    let proj = identity(d) - linalg::col_to_mat(&omega) * linalg::col_to_mat(&omega).adjoint();
    let comp = &proj * propagation::hermitize(choi.as_ref()) * &proj;
    let (vals, _) = linalg::hermitian_eig(propagation::hermitize(comp.as_ref()).as_ref())?;
    let min_eigenvalue = vals.first().copied().unwrap_or(0.0);
    let hermiticity_preserving = herm_dev <= 1e-9 * scale;
    Ok(LindbladFormReport {
        hermiticity_preserving,
        min_eigenvalue,
        is_lindblad: hermiticity_preserving && min_eigenvalue >= -policy.psd_tol * scale,
    })
}
