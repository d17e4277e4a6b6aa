//! Finite stand-in for wide-band continua: each continuum becomes `M`
//! evenly spaced levels with couplings scaled to keep the golden-rule rate.

use faer::{Col, Mat};
use serde::Serialize;

use crate::linalg::ZERO;
use crate::propagation::ode::{self, OdeOptions};
use crate::superop;
use crate::{Error, Operator, Result, StateVec, SuperOperator, C64};

use super::ModelSpec;

/// Largest Hilbert dimension for which the dense generator is built.
const DENSE_LIMIT: usize = 40;

#[derive(Debug, Clone, Serialize)]
pub struct DiscretizedContinuum {
    pub n_ground: usize,
    pub dim: usize,
    pub levels_per_continuum: usize,
    pub bandwidth: f64,
    pub spacing: f64,
    pub warning: Option<String>,
    energies: Vec<f64>,
    /// Off-diagonal Hamiltonian entries `(i, j, H_ij)`, both orderings.
    couplings: Vec<(usize, usize, C64)>,
    /// Incoherent transfers `(to, from, rate)`.
    transfers: Vec<(usize, usize, f64)>,
}

impl DiscretizedContinuum {
    /// `bandwidth` defaults to 50 times the largest model rate.
    pub fn new(spec: &ModelSpec, levels: usize, bandwidth: Option<f64>) -> Result<Self> {
        spec.validate()?;
        if levels == 0 {
            return Err(Error::InvalidArgument("at least one level per continuum is required".into()));
        }
        if levels > 1 && levels % 2 == 0 {
            return Err(Error::InvalidArgument("level count must be odd for a symmetric grid".into()));
        }
        let scale = spec.rate_scale();
        let bandwidth = bandwidth.unwrap_or(50.0 * scale);
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument("bandwidth must be positive".into()));
        }
        let warning = (bandwidth < 10.0 * scale).then(|| {
            format!("bandwidth {bandwidth} is below 10x the largest rate {scale}; wide-band assumption violated")
        });
        let ng = spec.n_ground();
        let ne = spec.n_excited();
        let dim = ng + ne + levels * spec.continua.len();
        let spacing = bandwidth / levels as f64;
        let center = spec.ground_levels.iter().map(|l| l.energy).sum::<f64>() / ng as f64;

        let hg = spec.ground_hamiltonian();
        let mut energies = vec![0.0; dim];
        let mut couplings = Vec::new();
        let mut transfers = Vec::new();
        for i in 0..ng {
            energies[i] = hg[(i, i)].re;
            for j in 0..ng {
                if i != j && hg[(i, j)] != ZERO {
                    couplings.push((i, j, hg[(i, j)]));
                }
            }
        }
        let link = |couplings: &mut Vec<(usize, usize, C64)>, g: usize, k: usize, v: C64| {
            if v != ZERO {
                couplings.push((g, k, v));
                couplings.push((k, g, v.conj()));
            }
        };
        for (q, e) in spec.excited_levels.iter().enumerate() {
            let k = ng + q;
            energies[k] = e.energy;
            for i in 0..ng {
                link(&mut couplings, i, k, e.couplings[i].value());
                if e.decay_rates[i] > 0.0 {
                    transfers.push((i, k, e.decay_rates[i]));
                }
                let p = e.pump_rates.get(i).copied().unwrap_or(0.0);
                if p > 0.0 {
                    transfers.push((k, i, p));
                }
            }
        }
        for (a, c) in spec.continua.iter().enumerate() {
            let s = (c.density * spacing).sqrt();
            for m in 0..levels {
                let k = ng + ne + a * levels + m;
                energies[k] = center + (m as f64 - (levels as f64 - 1.0) / 2.0) * spacing;
                for i in 0..ng {
                    link(&mut couplings, i, k, c.couplings[i].value() * s);
                    if c.decay_rates[i] > 0.0 {
                        transfers.push((i, k, c.decay_rates[i]));
                    }
                }
            }
        }
        Ok(Self {
            n_ground: ng,
            dim,
            levels_per_continuum: levels,
            bandwidth,
            spacing,
            warning,
            energies,
            couplings,
            transfers,
        })
    }

    pub fn hamiltonian(&self) -> Operator {
        let mut h = Mat::from_fn(self.dim, self.dim, |i, j| if i == j { C64::new(self.energies[i], 0.0) } else { ZERO });
        for &(i, j, v) in &self.couplings {
            h[(i, j)] = v;
        }
        h
    }

    pub fn jump_operators(&self) -> Vec<Operator> {
        self.transfers
            .iter()
            .map(|&(to, from, rate)| {
                Mat::from_fn(self.dim, self.dim, |i, j| {
                    if i == to && j == from {
                        C64::new(rate.sqrt(), 0.0)
                    } else {
                        ZERO
                    }
                })
            })
            .collect()
    }

    /// Dense Lindblad generator; refused above a small dimension.
    pub fn generator(&self) -> Result<SuperOperator> {
        if self.dim > DENSE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "dense generator of dimension {} exceeds {DENSE_LIMIT}; use propagate_slow",
                self.dim
            )));
        }
        superop::lindblad(self.hamiltonian().as_ref(), &self.jump_operators())
    }

    /// Evolves a ground-manifold state embedded with zero fast population and
    /// returns the ground block at each time.
    pub fn propagate_slow(&self, x0: &StateVec, times: &[f64], opts: &OdeOptions) -> Result<Vec<StateVec>> {
        let ng = self.n_ground;
        let n = self.dim;
        if x0.nrows() != ng * ng {
            return Err(Error::Dimension("initial state is not on the ground manifold".into()));
        }
        let mut y0 = vec![ZERO; n * n];
        for b in 0..ng {
            for a in 0..ng {
                y0[b * n + a] = x0[b * ng + a];
            }
        }
        // K = H - i/2 sum F^dag F is diagonal plus the sparse couplings.
        let mut kdiag: Vec<C64> = self.energies.iter().map(|&e| C64::new(e, 0.0)).collect();
        for &(_, from, rate) in &self.transfers {
            kdiag[from] -= C64::new(0.0, rate / 2.0);
        }
        let couplings = self.couplings.clone();
        let transfers = self.transfers.clone();
        let minus_i = C64::new(0.0, -1.0);
        let rhs = move |_t: f64, y: &[C64], dy: &mut [C64]| {
            // X = K rho, stored column-major like rho
            for b in 0..n {
                for a in 0..n {
                    dy[b * n + a] = kdiag[a] * y[b * n + a];
                }
            }
            for &(i, j, v) in &couplings {
                for b in 0..n {
                    dy[b * n + i] += v * y[b * n + j];
                }
            }
            // d rho = -i (X - X^dag)
            for b in 0..n {
                for a in 0..=b {
                    let x_ab = dy[b * n + a];
                    let x_ba = dy[a * n + b];
                    let d_ab = minus_i * (x_ab - x_ba.conj());
                    dy[b * n + a] = d_ab;
                    dy[a * n + b] = d_ab.conj();
                }
            }
            for &(to, from, rate) in &transfers {
                dy[to * n + to] += y[from * n + from] * rate;
            }
        };
        let ys = ode::integrate(rhs, 0.0, &y0, times, opts)?;
        Ok(ys
            .into_iter()
            .map(|y| Col::from_fn(ng * ng, |k| y[(k / ng) * n + k % ng]))
            .collect())
    }
}
