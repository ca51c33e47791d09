//! Closed-form and brute-force references for linear encoders.
//!
//! Nothing here touches the network or optimizer code: inputs are datasets and
//! plain matrices, so these results can referee the trained models.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::dataset::EmbeddingDataset;
use crate::error::{Result, SvddError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterKind {
    /// `(1/n^2) sum_{i,j} (x_i - x_j)(x_i - x_j)^T`
    Pairwise,
    /// `(1/(2n sum y)) sum_{i,j} y_i y_j (x_i - x_j)(x_i - x_j)^T`
    SignedPairwise,
    /// `(1/n) sum_i x_i x_i^T`
    SecondMoment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrix {
    pub matrix: Array2<f64>,
    pub kind: ScatterKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Array1<f64>,
}

fn frob(m: &ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_symmetric(s: &ArrayView2<'_, f64>) -> Result<()> {
    if s.nrows() != s.ncols() {
        return Err(SvddError::DimensionMismatch(format!("matrix is {}x{}", s.nrows(), s.ncols())));
    }
    let scale = s.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..s.nrows() {
        for j in i + 1..s.ncols() {
            worst = worst.max((s[[i, j]] - s[[j, i]]).abs());
        }
    }
    if worst > 1e-12 * scale {
        return Err(SvddError::NotSymmetric(worst));
    }
    Ok(())
}

/// All eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// ascending eigenvalue. Stops when the off-diagonal Frobenius norm drops
/// below `1e-11 * ||S||_F`.
pub fn jacobi_eigen(s: ArrayView2<'_, f64>) -> Result<Vec<EigenPair>> {
    check_symmetric(&s)?;
    let n = s.nrows();
    let mut a = s.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let tol = 1e-11 * frob(&s);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - sn * akq;
                    a[[k, q]] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - sn * aqk;
                    a[[q, k]] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - sn * vkq;
                    v[[k, q]] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<EigenPair> = (0..n)
        .map(|i| {
            let col = v.column(i).to_owned();
            let norm = col.dot(&col).sqrt();
            EigenPair {
                value: a[[i, i]],
                vector: col / norm,
            }
        })
        .collect();
    pairs.sort_by(|x, y| x.value.total_cmp(&y.value));
    Ok(pairs)
}

/// Algebraically smallest eigenvalue and a unit eigenvector.
pub fn min_eigenpair(s: &ScatterMatrix) -> Result<EigenPair> {
    min_eigenpair_of(s.matrix.view())
}

pub fn min_eigenpair_of(s: ArrayView2<'_, f64>) -> Result<EigenPair> {
    jacobi_eigen(s)?
        .into_iter()
        .next()
        .ok_or_else(|| SvddError::DimensionMismatch("empty matrix".into()))
}

fn outer_add(acc: &mut Array2<f64>, d: ArrayView1<'_, f64>, w: f64) {
    let dim = d.len();
    for a in 0..dim {
        for b in 0..dim {
            acc[[a, b]] += w * d[a] * d[b];
        }
    }
}

/// Scatter matrix by explicit double sum over pairs. Without labels this is
/// the plain pairwise scatter; with labels it is the signed analogue whose
/// quadratic form reproduces the BC-loss of a linear map.
pub fn pairwise_scatter(ds: &EmbeddingDataset, labels: Option<&[i8]>) -> Result<ScatterMatrix> {
    let x = ds.vectors();
    let (n, dim) = x.dim();
    let mut acc = Array2::<f64>::zeros((dim, dim));
    let (weights, scale, kind): (Vec<f64>, f64, ScatterKind) = match labels {
        None => (vec![1.0; n], 1.0 / (n * n) as f64, ScatterKind::Pairwise),
        Some(l) => {
            if l.len() != n {
                return Err(SvddError::DimensionMismatch(format!("{} rows but {} labels", n, l.len())));
            }
            let sum: i64 = l.iter().map(|&y| y as i64).sum();
            if sum <= 0 {
                return Err(SvddError::DegenerateCenter(sum));
            }
            (
                l.iter().map(|&y| y as f64).collect(),
                1.0 / (2.0 * n as f64 * sum as f64),
                ScatterKind::SignedPairwise,
            )
        }
    };
    for i in 0..n {
        for j in 0..n {
            let d = &x.row(i) - &x.row(j);
            outer_add(&mut acc, d.view(), weights[i] * weights[j]);
        }
    }
    acc *= scale;
    Ok(ScatterMatrix { matrix: acc, kind })
}

/// `(1/n) sum x_i x_i^T`.
pub fn second_moment(ds: &EmbeddingDataset) -> ScatterMatrix {
    let x = ds.vectors();
    let m = x.t().dot(&x) / x.nrows() as f64;
    ScatterMatrix {
        matrix: m,
        kind: ScatterKind::SecondMoment,
    }
}

/// `S + lambda I`.
pub fn regularized(s: &ScatterMatrix, lambda: f64) -> Array2<f64> {
    &s.matrix + &(Array2::<f64>::eye(s.matrix.nrows()) * lambda)
}

/// `trace(W^T S W)`.
pub fn trace_quadratic(w: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>) -> f64 {
    let sw = s.dot(&w);
    w.iter().zip(sw.iter()).map(|(a, b)| a * b).sum()
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky factorization.
pub fn cholesky_solve(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_symmetric(&a)?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(SvddError::DimensionMismatch(format!("A is {n}x{n}, B has {} rows", b.nrows())));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                let d = a[[i, i]] - s;
                if d <= 0.0 {
                    return Err(SvddError::InvalidConfig("matrix is not positive definite".into()));
                }
                l[[i, i]] = d.sqrt();
            } else {
                l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    let mut x = b.to_owned();
    for mut col in x.axis_iter_mut(Axis(1)) {
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[[i, k]] * col[k]).sum();
            col[i] = (col[i] - s) / l[[i, i]];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[[k, i]] * col[k]).sum();
            col[i] = (col[i] - s) / l[[i, i]];
        }
    }
    Ok(x)
}

fn check_ridge(ds: &EmbeddingDataset, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SvddError::InvalidConfig(format!("ridge lambda must be positive, got {lambda}")));
    }
    if ds.is_empty() {
        return Err(SvddError::EmptyDataset);
    }
    Ok(())
}

/// Minimizer of `(1/n) sum ||W^T x_i - c||^2 + (lambda/2) ||W||_F^2`:
/// `W = ((2/n) sum x x^T + lambda I)^{-1} ((2/n) sum x c^T)`.
pub fn ridge_solution(ds: &EmbeddingDataset, c: ArrayView1<'_, f64>, lambda: f64) -> Result<Array2<f64>> {
    check_ridge(ds, lambda)?;
    let x = ds.vectors();
    let n = x.nrows() as f64;
    let dim = x.ncols();
    let mut a = x.t().dot(&x) * (2.0 / n);
    for i in 0..dim {
        a[[i, i]] += lambda;
    }
    let xsum = x.sum_axis(Axis(0));
    let mut b = Array2::<f64>::zeros((dim, c.len()));
    for i in 0..dim {
        for j in 0..c.len() {
            b[[i, j]] = 2.0 / n * xsum[i] * c[j];
        }
    }
    cholesky_solve(a.view(), b.view())
}

/// Value of the ridge objective at `W`.
pub fn ridge_objective(ds: &EmbeddingDataset, w: ArrayView2<'_, f64>, c: ArrayView1<'_, f64>, lambda: f64) -> f64 {
    let z = ds.vectors().dot(&w);
    let n = z.nrows() as f64;
    let data: f64 = z.rows().into_iter().map(|r| (&r - &c).mapv(|v| v * v).sum()).sum::<f64>() / n;
    data + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of the ridge objective: `(2/n) sum x_i (W^T x_i - c)^T + lambda W`.
pub fn ridge_objective_grad(
    ds: &EmbeddingDataset,
    w: ArrayView2<'_, f64>,
    c: ArrayView1<'_, f64>,
    lambda: f64,
) -> Array2<f64> {
    let x = ds.vectors();
    let n = x.nrows() as f64;
    let resid = x.dot(&w) - c;
    x.t().dot(&resid) * (2.0 / n) + &w * lambda
}

/// Minimum of `trace(W^T S W)` over `D x d` matrices with `||W||_F = 1`:
/// the smallest eigenvalue, attained by `v_min` in the first column.
pub fn constrained_linear_optimum(s: &ScatterMatrix, out_dim: usize) -> Result<(f64, Array2<f64>)> {
    if out_dim == 0 {
        return Err(SvddError::InvalidConfig("output dimension must be positive".into()));
    }
    let pair = min_eigenpair(s)?;
    let mut w = Array2::<f64>::zeros((s.matrix.nrows(), out_dim));
    w.column_mut(0).assign(&pair.vector);
    Ok((pair.value, w))
}

pub const FD_STEP: f64 = 1e-5;

/// Central-difference gradient `(f(p + h e_k) - f(p - h e_k)) / 2h` for every coordinate.
pub fn fd_gradient<F>(mut f: F, params: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        let orig = p[k];
        p[k] = orig + h;
        let up = f(&p);
        p[k] = orig - h;
        let down = f(&p);
        p[k] = orig;
        if !(up.is_finite() && down.is_finite()) {
            return Err(SvddError::NonFiniteEvaluation { coordinate: k });
        }
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}
