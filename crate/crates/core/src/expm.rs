//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (degrees 3, 5, 7, 9 and 13, chosen from the 1-norm of the input).

use nalgebra::DMatrix;

use crate::error::{domain, CdpError, Result};

/// Largest square matrix accepted by [`expm`].
pub const DEFAULT_MATRIX_CAP: usize = 512;

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
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

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    expm_capped(a, DEFAULT_MATRIX_CAP)
}

pub fn expm_capped(a: &DMatrix<f64>, cap: usize) -> Result<DMatrix<f64>> {
    let (r, c) = a.shape();
    if r != c {
        return domain(format!("matrix exponential needs a square matrix, got {r}x{c}"));
    }
    if r > cap {
        return Err(CdpError::Resource(format!(
            "matrix dimension {r} exceeds the cap of {cap}"
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return domain("matrix exponential input has non-finite entries");
    }
    if r == 0 {
        return Ok(a.clone());
    }
    let n = r;
    let ident = DMatrix::<f64>::identity(n, n);
    let norm = one_norm(a);

    for (m, theta) in THETA {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, &ident, b);
            return solve_pade(&u, &v);
        }
    }

    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s);
    let (u, v) = pade13(&scaled, &ident);
    let mut x = solve_pade(&u, &v)?;
    for _ in 0..s {
        x = &x * &x;
    }
    Ok(x)
}

fn pade_low(a: &DMatrix<f64>, ident: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let a2 = a * a;
    let mut u_inner = ident * b[1];
    let mut v = ident * b[0];
    let mut power = ident.clone();
    let m = b.len() - 1;
    for k in (2..=m).step_by(2) {
        power = &power * &a2;
        v += &power * b[k];
        u_inner += &power * b[k + 1];
    }
    (a * u_inner, v)
}

fn pade13(a: &DMatrix<f64>, ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u_inner = &a6 * u_hi + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + ident * b[1];
    let u = a * u_inner;
    let v_hi = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + ident * b[0];
    (u, v)
}

fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = v - u;
    let p = v + u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| CdpError::Domain("Padé denominator is singular".into()))
}
