//! Continuous Lyapunov equation `A^T X + X A = C` for small dense matrices,
//! solved by Bartels–Stewart on the real Schur form of `A`.

use nalgebra::{DMatrix, Dyn, Matrix};

use crate::error::{Error, Result};

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return f64::NEG_INFINITY;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn check_hurwitz(a: &DMatrix<f64>) -> Result<()> {
    let abscissa = spectral_abscissa(a);
    if abscissa < 0.0 {
        Ok(())
    } else {
        Err(Error::NotHurwitz {
            max_real_part: abscissa,
        })
    }
}

/// Diagonal block boundaries of a quasi-upper-triangular matrix.
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let scale = t.amax().max(1.0);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)].abs() > 1e-14 * scale {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Solves `A^T X + X A = C`. `A` must be Hurwitz so the solution is unique.
pub fn solve_continuous(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || c.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: "lyapunov operands",
            expected: n,
            actual: c.nrows(),
        });
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    check_hurwitz(a)?;

    let (u, t) = a.clone().schur().unpack();
    // T^T Y + Y T = F with Y = U^T X U.
    let f = u.transpose() * c * &u;
    let blocks = schur_blocks(&t);
    let mut y = DMatrix::<f64>::zeros(n, n);

    for &(l0, ls) in &blocks {
        for &(k0, ks) in &blocks {
            let mut rhs = f.view((k0, l0), (ks, ls)).clone_owned();
            // Blocks above k in the same column and left of l in the same row are solved.
            for &(i0, is) in blocks.iter().take_while(|(i0, _)| *i0 < k0) {
                rhs -= t.view((i0, k0), (is, ks)).transpose() * y.view((i0, l0), (is, ls));
            }
            for &(j0, js) in blocks.iter().take_while(|(j0, _)| *j0 < l0) {
                rhs -= y.view((k0, j0), (ks, js)) * t.view((j0, l0), (js, ls));
            }
            let tkk = t.view((k0, k0), (ks, ks)).transpose();
            let tll = t.view((l0, l0), (ls, ls));
            // vec(Tkk^T Y + Y Tll) = (I ⊗ Tkk^T + Tll^T ⊗ I) vec(Y), column-major vec.
            let dim = ks * ls;
            let mut sys = DMatrix::<f64>::zeros(dim, dim);
            for col in 0..ls {
                for row in 0..ks {
                    let r = col * ks + row;
                    for q in 0..ks {
                        sys[(r, col * ks + q)] += tkk[(row, q)];
                    }
                    for q in 0..ls {
                        sys[(r, q * ks + row)] += tll[(q, col)];
                    }
                }
            }
            let rhs_vec: Matrix<f64, Dyn, nalgebra::U1, _> = nalgebra::DVector::from_column_slice(rhs.as_slice());
            let sol = sys.lu().solve(&rhs_vec).ok_or(Error::SingularSystem)?;
            for col in 0..ls {
                for row in 0..ks {
                    y[(k0 + row, l0 + col)] = sol[col * ks + row];
                }
            }
        }
    }

    let x = &u * y * u.transpose();
    Ok(x)
}

/// Symmetric `M > 0` with `Λ^T M + M Λ = -β I`.
pub fn solve_lyapunov(lambda: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    if !(beta > 0.0) {
        return Err(Error::NonpositiveGain {
            name: "beta",
            value: beta,
        });
    }
    let n = lambda.nrows();
    let x = solve_continuous(lambda, &DMatrix::from_diagonal_element(n, n, -beta))?;
    Ok((&x + x.transpose()) * 0.5)
}

/// `||Λ^T M + M Λ + β I||_inf` (max absolute entry).
pub fn lyapunov_residual(lambda: &DMatrix<f64>, m: &DMatrix<f64>, beta: f64) -> f64 {
    let n = lambda.nrows();
    if n == 0 {
        return 0.0;
    }
    (lambda.transpose() * m + m * lambda + DMatrix::from_diagonal_element(n, n, beta)).amax()
}
