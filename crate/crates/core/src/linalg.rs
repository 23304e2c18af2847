//! Fixed-size real matrices for superoperator propagation.

pub type Mat4 = [[f64; 4]; 4];
pub type Vec4 = [f64; 4];

pub fn identity<const N: usize>() -> [[f64; N]; N] {
    let mut m = [[0.0; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn matmul<const N: usize>(a: &[[f64; N]; N], b: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut out = [[0.0; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..N {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(a) {
        *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}

/// `aᵀ v`.
pub fn matvec_transposed(a: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for (row, &vi) in a.iter().zip(v) {
        for (o, &aij) in out.iter_mut().zip(row) {
            *o += aij * vi;
        }
    }
    out
}

pub fn transpose<const N: usize>(a: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut out = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            out[j][i] = a[i][j];
        }
    }
    out
}

pub fn scale<const N: usize>(a: &[[f64; N]; N], s: f64) -> [[f64; N]; N] {
    let mut out = *a;
    out.iter_mut().flatten().for_each(|x| *x *= s);
    out
}

/// Maximum absolute column sum.
pub fn norm1<const N: usize>(a: &[[f64; N]; N]) -> f64 {
    (0..N).map(|j| (0..N).map(|i| a[i][j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

const TAYLOR_DEGREE: usize = 14;
const SCALED_NORM: f64 = 0.5;

/// Matrix exponential by scaling and squaring with a degree-14 Taylor
/// polynomial; truncation error below 1e-16 relative once `‖a‖₁ ≤ 1/2`.
pub fn expm<const N: usize>(a: &[[f64; N]; N]) -> [[f64; N]; N] {
    let norm = norm1(a);
    if !norm.is_finite() {
        return [[f64::NAN; N]; N];
    }
    let squarings = if norm > SCALED_NORM { (norm / SCALED_NORM).log2().ceil() as i32 } else { 0 };
    let x = scale(a, 0.5f64.powi(squarings));
    // Horner: I + x(I + x/2(I + x/3(...)))
    let mut acc = identity::<N>();
    for k in (1..=TAYLOR_DEGREE).rev() {
        acc = matmul(&x, &acc);
        acc.iter_mut().flatten().for_each(|v| *v /= k as f64);
        for (i, row) in acc.iter_mut().enumerate() {
            row[i] += 1.0;
        }
    }
    for _ in 0..squarings {
        acc = matmul(&acc, &acc);
    }
    acc
}

/// Exponential `exp(a)` together with its Fréchet derivative in direction
/// `e`, i.e. `d/dε exp(a + ε e)` at `ε = 0`, from the block identity
/// `exp([[a, e], [0, a]]) = [[exp a, L(a, e)], [0, exp a]]`.
pub fn expm_frechet(a: &Mat4, e: &Mat4) -> (Mat4, Mat4) {
    let mut block = [[0.0; 8]; 8];
    for i in 0..4 {
        for j in 0..4 {
            block[i][j] = a[i][j];
            block[i + 4][j + 4] = a[i][j];
            block[i][j + 4] = e[i][j];
        }
    }
    let big = expm(&block);
    let mut exp_a = [[0.0; 4]; 4];
    let mut deriv = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            exp_a[i][j] = big[i][j];
            deriv[i][j] = big[i][j + 4];
        }
    }
    (exp_a, deriv)
}
