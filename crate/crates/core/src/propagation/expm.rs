//! Matrix exponential by scaling and squaring with diagonal Pade approximants.

use faer::{Mat, MatRef};

use crate::linalg::{self, identity};
use crate::{Error, Result, C64};

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1(a: MatRef<'_, C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn axpy(acc: &mut Mat<C64>, c: f64, m: &Mat<C64>) {
    *acc += linalg::scale(m.as_ref(), real(c));
}

/// Solves `(V - U) R = V + U`.
fn pade_quotient(u: &Mat<C64>, v: &Mat<C64>) -> Mat<C64> {
    let p = v + u;
    let q = v - u;
    linalg::solve(q.as_ref(), p.as_ref())
}

fn pade_low(a: &Mat<C64>, b: &[f64]) -> Mat<C64> {
    let n = a.nrows();
    let a2 = a * a;
    let m = b.len() - 1;
    // powers of A^2 up to A^(m-1)
    let mut even = vec![identity(n)];
    for k in 1..=(m / 2) {
        let next = &even[k - 1] * &a2;
        even.push(next);
    }
    let mut u_inner = Mat::zeros(n, n);
    let mut v = Mat::zeros(n, n);
    for (k, p) in even.iter().enumerate() {
        let odd = 2 * k + 1;
        if odd <= m {
            axpy(&mut u_inner, b[odd], p);
        }
        axpy(&mut v, b[2 * k], p);
    }
    let u = a * &u_inner;
    pade_quotient(&u, &v)
}

fn pade_13(a: &Mat<C64>) -> Mat<C64> {
    let n = a.nrows();
    let b = &B13;
    let id = identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let mut w1 = Mat::zeros(n, n);
    axpy(&mut w1, b[13], &a6);
    axpy(&mut w1, b[11], &a4);
    axpy(&mut w1, b[9], &a2);
    let mut w2 = Mat::zeros(n, n);
    axpy(&mut w2, b[7], &a6);
    axpy(&mut w2, b[5], &a4);
    axpy(&mut w2, b[3], &a2);
    axpy(&mut w2, b[1], &id);
    let u = a * (&a6 * &w1 + &w2);
    let mut z1 = Mat::zeros(n, n);
    axpy(&mut z1, b[12], &a6);
    axpy(&mut z1, b[10], &a4);
    axpy(&mut z1, b[8], &a2);
    let mut z2 = Mat::zeros(n, n);
    axpy(&mut z2, b[6], &a6);
    axpy(&mut z2, b[4], &a4);
    axpy(&mut z2, b[2], &a2);
    axpy(&mut z2, b[0], &id);
    let v = &a6 * &z1 + &z2;
    pade_quotient(&u, &v)
}

/// `exp(A)` for a square complex matrix.
pub fn expm(a: MatRef<'_, C64>) -> Result<Mat<C64>> {
    let n = linalg::require_square(a, "matrix")?;
    if !linalg::all_finite(a) {
        return Err(Error::NonFinite("matrix exponential input".into()));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let a = a.to_owned();
    let nrm = norm1(a.as_ref());
    for (m, theta) in THETA {
        if nrm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return finish(pade_low(&a, b));
        }
    }
    let s = if nrm > THETA_13 {
        (nrm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = linalg::scale(a.as_ref(), real(2f64.powi(-s)));
    let mut r = pade_13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    finish(r)
}

fn finish(r: Mat<C64>) -> Result<Mat<C64>> {
    if !linalg::all_finite(r.as_ref()) {
        return Err(Error::NonFinite("matrix exponential".into()));
    }
    Ok(r)
}
