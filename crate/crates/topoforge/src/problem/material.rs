//! Elastic material laws.

use crate::autodiff::{const_mat, matmul, transpose, DMat, Dual, RMat, ZERO_MAT};
use crate::error::{Error, Result};

/// Lamé parameters (μ, λ) from Young's modulus and Poisson ratio.
pub fn lame_from_engineering(e: f64, nu: f64) -> Result<(f64, f64)> {
    if !(e > 0.0) {
        return Err(Error::InvalidInput(format!("Young's modulus must be positive, got {e}")));
    }
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidInput(format!("Poisson ratio must lie in [0, 1/2), got {nu}")));
    }
    Ok((e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))))
}

/// S = 2μ e(u) + λ tr(e(u)) I.
pub fn linear_stress(du: &DMat, mu: f64, lambda: f64) -> DMat {
    let tr = du[0][0] + du[1][1];
    let mut s = ZERO_MAT;
    for i in 0..2 {
        for k in 0..2 {
            s[i][k] = mu * (du[i][k] + du[k][i]);
        }
        s[i][i] += lambda * tr;
    }
    s
}

/// St. Venant–Kirchhoff first Piola stress (I + Du)[λ tr(E) I + 2μ E],
/// E = ½(C − I), C = (I + Du)ᵀ(I + Du).
pub fn stvk_stress_dual(du: &DMat, mu: f64, lambda: f64) -> DMat {
    let mut f = *du;
    f[0][0] += Dual::ONE;
    f[1][1] += Dual::ONE;
    let c = matmul(&transpose(&f), &f);
    // 2E = C − I
    let two_e = [[c[0][0] - 1.0, c[0][1]], [c[1][0], c[1][1] - 1.0]];
    let tr_e = 0.5 * (two_e[0][0] + two_e[1][1]);
    let mut s2 = ZERO_MAT;
    for i in 0..2 {
        for k in 0..2 {
            s2[i][k] = mu * two_e[i][k];
        }
        s2[i][i] += lambda * tr_e;
    }
    matmul(&f, &s2)
}

pub fn stvk_stress(du: &RMat, mu: f64, lambda: f64) -> RMat {
    let s = stvk_stress_dual(&const_mat(du), mu, lambda);
    [[s[0][0].value, s[0][1].value], [s[1][0].value, s[1][1].value]]
}
