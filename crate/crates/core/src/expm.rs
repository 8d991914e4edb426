//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (Higham 2005, orders 3, 5, 7, 9, 13).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

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

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn low_order(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut power = DMatrix::identity(n, n);
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for pair in b.chunks(2) {
        v += &power * pair[0];
        u += &power * pair[1];
        power = &power * &a2;
    }
    (a * u, v)
}

fn order_13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let b = &B13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// `exp(s M)` for a square matrix `M`.
pub fn matrix_exponential(m: &DMatrix<f64>, s: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::param(
            "matrix",
            format!("expected square, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let a = m * s;
    let norm = one_norm(&a);
    if !norm.is_finite() {
        return Err(Error::Overflow { norm });
    }

    let (u, v, squarings) = match THETA.iter().find(|(_, th)| norm <= *th) {
        Some(&(order, _)) => {
            let b: &[f64] = match order {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = low_order(&a, b);
            (u, v, 0)
        }
        None => {
            let squarings = (norm / THETA_13).log2().ceil().max(0.0) as i32;
            let scaled = a * 2f64.powi(-squarings);
            let (u, v) = order_13(&scaled);
            (u, v, squarings)
        }
    };

    let numer = &v + &u;
    let denom = v - u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::param("matrix", "Padé denominator is singular"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow { norm });
    }
    Ok(r)
}
