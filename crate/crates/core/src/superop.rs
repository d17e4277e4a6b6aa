//! Vectorization calculus, dissipators, Lindblad generators and
//! super-projectors.

use faer::{Col, Mat, MatRef};

use crate::linalg::{self, conj, identity, transpose, ONE, ZERO};
use crate::{Error, NumericPolicy, Operator, Result, StateVec, SuperOperator, C64};

/// Column-stacks `rho`: entry `(a, b)` goes to index `b * N + a`.
pub fn vectorize(rho: MatRef<'_, C64>) -> Result<StateVec> {
    let n = linalg::require_square(rho, "density matrix")?;
    Ok(Col::from_fn(n * n, |k| rho[(k % n, k / n)]))
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &StateVec) -> Result<Operator> {
    let n = perfect_sqrt(v.nrows())?;
    Ok(Mat::from_fn(n, n, |a, b| v[b * n + a]))
}

pub(crate) fn perfect_sqrt(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len {
        return Err(Error::Dimension(format!(
            "vector of length {len} is not a vectorized square matrix"
        )));
    }
    Ok(n)
}

/// Superoperator of `rho -> A rho B^dag`, i.e. `conj(B) kron A`.
pub fn sandwich(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Result<SuperOperator> {
    let n = linalg::require_square(a, "A")?;
    let m = linalg::require_square(b, "B")?;
    if n != m {
        return Err(Error::Dimension(format!("sandwich of {n}x{n} and {m}x{m}")));
    }
    Ok(b.conjugate().kron(a))
}

/// `D(F) = conj(F) kron F - 1/2 (1 kron F^dag F + (F^dag F)^T kron 1)`.
pub fn dissipator(f: MatRef<'_, C64>) -> Result<SuperOperator> {
    let n = linalg::require_square(f, "jump operator")?;
    let id = identity(n);
    let ff = f.adjoint() * f;
    let mut out = f.conjugate().kron(f);
    let anti = id.kron(&ff) + transpose(ff.as_ref()).kron(&id);
    out -= linalg::scale(anti.as_ref(), C64::new(0.5, 0.0));
    Ok(out)
}

/// `-i (1 kron K - conj(K) kron 1)`, the generator of `rho -> -i (K rho - rho K^dag)`.
/// For Hermitian `K` this is the commutator superoperator.
pub fn effective_hamiltonian_superop(k: MatRef<'_, C64>) -> Result<SuperOperator> {
    let n = linalg::require_square(k, "Hamiltonian")?;
    let id = identity(n);
    let m = id.kron(k) - conj(k).kron(&id);
    Ok(linalg::scale(m.as_ref(), C64::new(0.0, -1.0)))
}

/// Full Lindblad generator `-i[H, .] + sum_k D(F_k)`.
pub fn lindblad(h: MatRef<'_, C64>, jumps: &[Operator]) -> Result<SuperOperator> {
    lindblad_with_policy(h, jumps, &NumericPolicy::default())
}

pub fn lindblad_with_policy(
    h: MatRef<'_, C64>,
    jumps: &[Operator],
    policy: &NumericPolicy,
) -> Result<SuperOperator> {
    let n = linalg::require_square(h, "Hamiltonian")?;
    let deviation = linalg::hermiticity_deviation(h);
    if deviation > policy.hermitian_tol {
        return Err(Error::NotHermitian { deviation });
    }
    let mut l = effective_hamiltonian_superop(h)?;
    for f in jumps {
        if f.nrows() != n || f.ncols() != n {
            return Err(Error::Dimension(format!(
                "jump operator is {}x{}, Hamiltonian is {n}x{n}",
                f.nrows(),
                f.ncols()
            )));
        }
        l += dissipator(f.as_ref())?;
    }
    Ok(l)
}

/// Checks that `p` is a Hermitian idempotent matrix.
pub fn validate_projector(p: MatRef<'_, C64>, policy: &NumericPolicy) -> Result<usize> {
    let n = linalg::require_square(p, "projector")?;
    let herm = linalg::hermiticity_deviation(p);
    let idem = linalg::max_abs((p * p - p).as_ref());
    let deviation = herm.max(idem);
    if deviation > policy.hermitian_tol {
        return Err(Error::NotProjector { deviation });
    }
    Ok(n)
}

/// `(PP, QQ)` with `PP = conj(P) kron P` and `QQ = 1 - PP`.
pub fn super_projectors(p: MatRef<'_, C64>) -> Result<(SuperOperator, SuperOperator)> {
    let n = validate_projector(p, &NumericPolicy::default())?;
    let pp = p.conjugate().kron(p);
    let qq = identity(n * n) - &pp;
    Ok((pp, qq))
}

/// `tr(O rho)` for a vectorized `rho`.
pub fn expectation(v: &StateVec, o: MatRef<'_, C64>) -> Result<C64> {
    let n = perfect_sqrt(v.nrows())?;
    if o.nrows() != n || o.ncols() != n {
        return Err(Error::Dimension(format!(
            "observable is {}x{}, state is {n}x{n}",
            o.nrows(),
            o.ncols()
        )));
    }
    let mut acc = ZERO;
    for a in 0..n {
        for b in 0..n {
            acc += o[(a, b)] * v[a * n + b];
        }
    }
    Ok(acc)
}

/// Sum of the diagonal entries of a vectorized matrix.
pub fn trace_of_vec(v: &StateVec) -> Result<C64> {
    let n = perfect_sqrt(v.nrows())?;
    Ok((0..n).map(|a| v[a * n + a]).sum())
}

/// Row vector `vec(1)^dag L`; vanishes for trace-preserving generators.
pub fn trace_row(l: MatRef<'_, C64>) -> Result<Col<C64>> {
    let n = perfect_sqrt(l.nrows())?;
    Ok(Col::from_fn(l.ncols(), |j| (0..n).map(|a| l[(a * n + a, j)]).sum()))
}

pub fn sigma_x() -> Operator {
    Mat::from_fn(2, 2, |i, j| if i != j { ONE } else { ZERO })
}

pub fn sigma_y() -> Operator {
    let mut m = Mat::zeros(2, 2);
    m[(0, 1)] = C64::new(0.0, -1.0);
    m[(1, 0)] = C64::new(0.0, 1.0);
    m
}

pub fn sigma_z() -> Operator {
    let mut m = Mat::zeros(2, 2);
    m[(0, 0)] = ONE;
    m[(1, 1)] = -ONE;
    m
}

/// `|i><j|` in dimension `n`.
pub fn ket_bra(n: usize, i: usize, j: usize) -> Operator {
    let mut m = Mat::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

/// Orthogonal decomposition of the Liouville space induced by a projector.
///
/// `basis` is a unitary `W = [U V]` whose first `rank` columns span `ran P`.
/// Slow coordinates are the entries of the `rank x rank` matrix `U^dag rho U`
/// in column-stacked order; fast coordinates are all remaining entries of
/// `W^dag rho W`.
#[derive(Debug, Clone)]
pub struct Partition {
    dim: usize,
    rank: usize,
    basis: Operator,
    slow: Mat<C64>,
    fast: Mat<C64>,
}

impl Partition {
    /// Builds the partition for projector `p`. A diagonal `p` keeps the
    /// standard basis; otherwise its eigenvectors are used.
    pub fn new(p: MatRef<'_, C64>, policy: &NumericPolicy) -> Result<Self> {
        let n = validate_projector(p, policy)?;
        let offdiag = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| p[(i, j)].norm())
            .fold(0.0, f64::max);
        let basis = if offdiag == 0.0 {
            let mut order: Vec<usize> = (0..n).filter(|&i| p[(i, i)].re > 0.5).collect();
            order.extend((0..n).filter(|&i| p[(i, i)].re <= 0.5));
            Mat::from_fn(n, n, |i, k| if i == order[k] { ONE } else { ZERO })
        } else {
            let (vals, vecs) = linalg::hermitian_eig(p)?;
            // eigenvalues ascending: ones are at the end
            let order: Vec<usize> = (0..n).rev().collect();
            let _ = vals;
            Mat::from_fn(n, n, |i, k| vecs[(i, order[k])])
        };
        Self::with_basis(p, basis, policy)
    }

    /// Uses a caller-supplied unitary whose leading columns span `ran P`.
    pub fn with_basis(p: MatRef<'_, C64>, basis: Operator, policy: &NumericPolicy) -> Result<Self> {
        let n = validate_projector(p, policy)?;
        if basis.nrows() != n || basis.ncols() != n {
            return Err(Error::Dimension("basis does not match projector".into()));
        }
        let unitarity = linalg::max_abs((basis.adjoint() * &basis - identity(n)).as_ref());
        if unitarity > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis is not unitary (deviation {unitarity:.3e})"
            )));
        }
        let rank = (0..n).map(|i| p[(i, i)].re).sum::<f64>().round() as usize;
        let leading = basis.subcols(0, rank);
        let check = p * leading - leading;
        if linalg::max_abs(check.as_ref()) > 1e-10 {
            return Err(Error::InvalidArgument(
                "leading basis columns do not span ran P".into(),
            ));
        }
        let full = basis.conjugate().kron(&basis);
        let mut slow_cols = Vec::with_capacity(rank * rank);
        let mut fast_cols = Vec::with_capacity(n * n - rank * rank);
        for b in 0..n {
            for a in 0..n {
                let idx = b * n + a;
                if a < rank && b < rank {
                    slow_cols.push(idx);
                } else {
                    fast_cols.push(idx);
                }
            }
        }
        let slow = Mat::from_fn(n * n, slow_cols.len(), |i, k| full[(i, slow_cols[k])]);
        let fast = Mat::from_fn(n * n, fast_cols.len(), |i, k| full[(i, fast_cols[k])]);
        Ok(Self {
            dim: n,
            rank,
            basis,
            slow,
            fast,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `rank P`; the slow space has dimension `rank^2`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn slow_dim(&self) -> usize {
        self.rank * self.rank
    }

    pub fn fast_dim(&self) -> usize {
        self.dim * self.dim - self.rank * self.rank
    }

    pub fn basis(&self) -> &Operator {
        &self.basis
    }

    /// Isometry from slow coordinates into the full Liouville space.
    pub fn slow_isometry(&self) -> &Mat<C64> {
        &self.slow
    }

    pub fn fast_isometry(&self) -> &Mat<C64> {
        &self.fast
    }

    /// The four blocks `(PP, PQ, QP, QQ)` of `l` in slow/fast coordinates.
    pub fn blocks(&self, l: MatRef<'_, C64>) -> Result<Blocks> {
        let nn = self.dim * self.dim;
        if l.nrows() != nn || l.ncols() != nn {
            return Err(Error::Dimension(format!(
                "superoperator is {}x{}, partition expects {nn}x{nn}",
                l.nrows(),
                l.ncols()
            )));
        }
        let ls = l * &self.slow;
        let lf = l * &self.fast;
        Ok(Blocks {
            pp: self.slow.adjoint() * &ls,
            qp: self.fast.adjoint() * &ls,
            pq: self.slow.adjoint() * &lf,
            qq: self.fast.adjoint() * &lf,
        })
    }

    /// Embeds a slow-coordinate vector into the full Liouville space.
    pub fn lift(&self, x: &StateVec) -> Result<StateVec> {
        if x.nrows() != self.slow_dim() {
            return Err(Error::Dimension("slow vector has wrong length".into()));
        }
        Ok(&self.slow * x)
    }

    /// Slow coordinates of a full vector, i.e. `U^dag rho U` column-stacked.
    pub fn project(&self, v: &StateVec) -> Result<StateVec> {
        if v.nrows() != self.dim * self.dim {
            return Err(Error::Dimension("full vector has wrong length".into()));
        }
        Ok(self.slow.adjoint() * v)
    }

    /// Projects a full-space superoperator onto the slow block.
    pub fn restrict(&self, l: MatRef<'_, C64>) -> Mat<C64> {
        self.slow.adjoint() * l * &self.slow
    }

    /// The slow-coordinate row vector of the trace functional.
    pub fn slow_trace_indices(&self) -> Vec<usize> {
        (0..self.rank).map(|a| a * self.rank + a).collect()
    }

    /// Projector `P` rebuilt from the basis.
    pub fn projector(&self) -> Operator {
        let u = self.basis.subcols(0, self.rank);
        u * u.adjoint()
    }

    /// Operator `P^dag`-side helper: `U` as an `N x rank` isometry.
    pub fn slow_basis(&self) -> MatRef<'_, C64> {
        self.basis.subcols(0, self.rank)
    }

    pub fn fast_basis(&self) -> MatRef<'_, C64> {
        self.basis.subcols(self.rank, self.dim - self.rank)
    }
}

/// Block decomposition of a superoperator.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub pp: Mat<C64>,
    pub pq: Mat<C64>,
    pub qp: Mat<C64>,
    pub qq: Mat<C64>,
}

/// Diagonal projector onto the first `rank` of `n` levels.
pub fn leading_projector(n: usize, rank: usize) -> Operator {
    Mat::from_fn(n, n, |i, j| if i == j && i < rank { ONE } else { ZERO })
}

/// `tr` of a slow-coordinate vector with `r x r` layout.
pub(crate) fn slow_trace(x: MatRef<'_, C64>, r: usize) -> C64 {
    (0..r).map(|a| x[(a * r + a, 0)]).sum()
}
