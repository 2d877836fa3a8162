//! Forward kernels on plain tensors.
//!
//! The graph records these same kernels; inference code that needs no
//! gradients calls them directly.

use crate::error::TensorError;
use crate::tensor::{axis_split, Scalar, Tensor};

type Result<T> = std::result::Result<T, TensorError>;

fn mismatch<S: Scalar>(op: &'static str, a: &Tensor<S>, b: &Tensor<S>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn check_axis<S: Scalar>(op: &'static str, t: &Tensor<S>, axis: usize) -> Result<()> {
    if axis >= t.rank() {
        return Err(TensorError::InvalidAxis {
            op,
            axis,
            shape: t.shape().to_vec(),
        });
    }
    Ok(())
}

/// `[m, k] @ [k, n] -> [m, n]`.
pub fn matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (m, k, n) = match (a.shape(), b.shape()) {
        ([m, k], [k2, n]) if k == k2 => (*m, *k, *n),
        _ => return Err(mismatch("matmul", a, b)),
    };
    let mut out = Tensor::zeros([m, n]);
    S::gemm(
        m,
        k,
        n,
        S::one(),
        a.data(),
        k as isize,
        1,
        b.data(),
        n as isize,
        1,
        S::zero(),
        out.data_mut(),
        n as isize,
        1,
    );
    Ok(out)
}

/// `[B, m, k] @ [B, k, n] -> [B, m, n]`.
pub fn batch_matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    let (bs, m, k, n) = match (a.shape(), b.shape()) {
        ([b1, m, k], [b2, k2, n]) if b1 == b2 && k == k2 => (*b1, *m, *k, *n),
        _ => return Err(mismatch("batch_matmul", a, b)),
    };
    let mut out = Tensor::zeros([bs, m, n]);
    for i in 0..bs {
        S::gemm(
            m,
            k,
            n,
            S::one(),
            &a.data()[i * m * k..],
            k as isize,
            1,
            &b.data()[i * k * n..],
            n as isize,
            1,
            S::zero(),
            &mut out.data_mut()[i * m * n..],
            n as isize,
            1,
        );
    }
    Ok(out)
}

/// True when `rhs` either matches `lhs` or matches its trailing dimensions,
/// i.e. `rhs` is repeated over a leading batch.
pub(crate) fn broadcastable(lhs: &[usize], rhs: &[usize]) -> bool {
    rhs.len() <= lhs.len() && lhs[lhs.len() - rhs.len()..] == *rhs
}

fn zip_bcast<S: Scalar>(
    op: &'static str,
    a: &Tensor<S>,
    b: &Tensor<S>,
    f: impl Fn(S, S) -> S,
) -> Result<Tensor<S>> {
    if !broadcastable(a.shape(), b.shape()) {
        return Err(mismatch(op, a, b));
    }
    let mut data = Vec::with_capacity(a.len());
    if !b.is_empty() {
        for chunk in a.data().chunks(b.len()) {
            data.extend(chunk.iter().zip(b.data()).map(|(&x, &y)| f(x, y)));
        }
    }
    Tensor::new(a.shape().to_vec(), data)
}

pub fn add<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    zip_bcast("add", a, b, |x, y| x + y)
}

pub fn sub<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    zip_bcast("sub", a, b, |x, y| x - y)
}

pub fn mul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    zip_bcast("mul", a, b, |x, y| x * y)
}

#[inline]
pub fn elu_scalar<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x
    } else {
        x.exp_m1()
    }
}

#[inline]
pub fn sigmoid_scalar<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

pub fn relu<S: Scalar>(a: &Tensor<S>) -> Tensor<S> {
    a.map(|x| x.max(S::zero()))
}

pub fn elu<S: Scalar>(a: &Tensor<S>) -> Tensor<S> {
    a.map(elu_scalar)
}

pub fn sigmoid<S: Scalar>(a: &Tensor<S>) -> Tensor<S> {
    a.map(sigmoid_scalar)
}

pub fn tanh<S: Scalar>(a: &Tensor<S>) -> Tensor<S> {
    a.map(|x| x.tanh())
}

pub fn abs<S: Scalar>(a: &Tensor<S>) -> Tensor<S> {
    a.map(|x| x.abs())
}

fn softmax_impl<S: Scalar>(
    op: &'static str,
    a: &Tensor<S>,
    axis: usize,
    log: bool,
) -> Result<Tensor<S>> {
    check_axis(op, a, axis)?;
    let (outer, n, inner) = axis_split(a.shape(), axis);
    if n == 0 {
        return Err(TensorError::EmptyAxis {
            op,
            axis,
            shape: a.shape().to_vec(),
        });
    }
    let src = a.data();
    let mut out = Tensor::zeros(a.shape().to_vec());
    let dst = out.data_mut();
    for o in 0..outer {
        for i in 0..inner {
            let at = |j: usize| (o * n + j) * inner + i;
            let max = (0..n)
                .map(|j| src[at(j)])
                .fold(S::neg_infinity(), S::max);
            let total: S = (0..n).map(|j| (src[at(j)] - max).exp()).sum();
            if log {
                let lse = total.ln();
                for j in 0..n {
                    dst[at(j)] = src[at(j)] - max - lse;
                }
            } else {
                for j in 0..n {
                    dst[at(j)] = (src[at(j)] - max).exp() / total;
                }
            }
        }
    }
    Ok(out)
}

/// Softmax along `axis`, stabilised by subtracting the per-slice maximum.
pub fn softmax<S: Scalar>(a: &Tensor<S>, axis: usize) -> Result<Tensor<S>> {
    softmax_impl("softmax", a, axis, false)
}

pub fn log_softmax<S: Scalar>(a: &Tensor<S>, axis: usize) -> Result<Tensor<S>> {
    softmax_impl("log_softmax", a, axis, true)
}

/// Sums out `axis`, dropping it from the shape.
pub fn sum_axis<S: Scalar>(a: &Tensor<S>, axis: usize) -> Result<Tensor<S>> {
    check_axis("sum_axis", a, axis)?;
    let (outer, n, inner) = axis_split(a.shape(), axis);
    let mut shape = a.shape().to_vec();
    shape.remove(axis);
    let mut out = Tensor::zeros(shape);
    let src = a.data();
    let dst = out.data_mut();
    for o in 0..outer {
        for j in 0..n {
            let row = &src[(o * n + j) * inner..(o * n + j + 1) * inner];
            for (d, &s) in dst[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                *d = *d + s;
            }
        }
    }
    Ok(out)
}

pub fn concat<S: Scalar>(parts: &[&Tensor<S>], axis: usize) -> Result<Tensor<S>> {
    let first = parts.first().ok_or(TensorError::ShapeMismatch {
        op: "concat",
        lhs: Vec::new(),
        rhs: Vec::new(),
    })?;
    check_axis("concat", first, axis)?;
    let mut shape = first.shape().to_vec();
    shape[axis] = 0;
    for p in parts {
        let compatible = p.rank() == first.rank()
            && p
                .shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(d, (x, y))| d == axis || x == y);
        if !compatible {
            return Err(mismatch("concat", first, p));
        }
        shape[axis] += p.shape()[axis];
    }
    let (outer, _, inner) = axis_split(&shape, axis);
    let mut data = Vec::with_capacity(shape.iter().product());
    for o in 0..outer {
        for p in parts {
            let w = p.shape()[axis] * inner;
            data.extend_from_slice(&p.data()[o * w..(o + 1) * w]);
        }
    }
    Tensor::new(shape, data)
}

pub fn slice<S: Scalar>(a: &Tensor<S>, axis: usize, start: usize, len: usize) -> Result<Tensor<S>> {
    check_axis("slice", a, axis)?;
    let (outer, n, inner) = axis_split(a.shape(), axis);
    if start + len > n {
        return Err(TensorError::IndexOutOfRange {
            op: "slice",
            index: start + len,
            bound: n,
        });
    }
    let mut shape = a.shape().to_vec();
    shape[axis] = len;
    let mut data = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = (o * n + start) * inner;
        data.extend_from_slice(&a.data()[base..base + len * inner]);
    }
    Tensor::new(shape, data)
}

/// Picks `a[r, index[r]]` from a `[rows, cols]` tensor.
pub fn gather<S: Scalar>(a: &Tensor<S>, index: &[usize]) -> Result<Tensor<S>> {
    let (rows, cols) = match a.shape() {
        [r, c] if *r == index.len() => (*r, *c),
        _ => {
            return Err(TensorError::ShapeMismatch {
                op: "gather",
                lhs: a.shape().to_vec(),
                rhs: vec![index.len()],
            })
        }
    };
    let mut data = Vec::with_capacity(rows);
    for (r, &c) in index.iter().enumerate() {
        if c >= cols {
            return Err(TensorError::IndexOutOfRange {
                op: "gather",
                index: c,
                bound: cols,
            });
        }
        data.push(a.data()[r * cols + c]);
    }
    Tensor::new([rows], data)
}

/// Mean of squared differences over all elements.
pub fn mse<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>> {
    if a.shape() != b.shape() {
        return Err(mismatch("mse", a, b));
    }
    let n = S::of(a.len().max(1) as f64);
    let total: S = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(Tensor::scalar(total / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape.to_vec(), v).unwrap()
    }

    #[test]
    fn elu_fixed_points() {
        assert_eq!(elu_scalar(0.0f64), 0.0);
        assert_eq!(elu_scalar(2.5f64), 2.5);
        assert!((elu_scalar(-1.0f64) - (-0.632_120_558_828_557_7)).abs() < 1e-12);
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&t(&[3], &[0.0, 0.0, 0.0]), 0).unwrap();
        for &x in s.data() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        let s = softmax(&t(&[2], &[1000.0, 0.0]), 0).unwrap();
        assert!((s.data()[0] - 1.0).abs() < 1e-12);
        assert!(s.data()[1] >= 0.0 && s.data()[1] < 1e-300);
        let s = softmax(&t(&[2], &[2f64.ln(), 0.0]), 0).unwrap();
        assert!((s.data()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.data()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_empty_axis() {
        let e = Tensor::<f64>::zeros([2, 0]);
        assert!(matches!(softmax(&e, 1), Err(TensorError::EmptyAxis { .. })));
        assert!(matches!(softmax(&e, 2), Err(TensorError::InvalidAxis { .. })));
    }

    #[test]
    fn softmax_over_middle_axis() {
        let a = t(&[2, 3, 2], &[1., 2., 3., 4., 5., 6., 0., 0., 0., 0., 0., 0.]);
        let s = softmax(&a, 1).unwrap();
        let sums = sum_axis(&s, 1).unwrap();
        for &x in sums.data() {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_error_names_shapes() {
        let e = matmul(&Tensor::<f32>::zeros([2, 3]), &Tensor::zeros([2, 3])).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn matmul_small() {
        let a = t(&[2, 2], &[1., 2., 3., 4.]);
        let b = t(&[2, 1], &[5., 6.]);
        assert_eq!(matmul(&a, &b).unwrap().data(), &[17.0, 39.0]);
    }

    #[test]
    fn leading_batch_broadcast_only() {
        let a = t(&[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let b = t(&[3], &[10., 20., 30.]);
        assert_eq!(add(&a, &b).unwrap().data(), &[11., 22., 33., 14., 25., 36.]);
        let col = t(&[2, 1], &[1., 1.]);
        assert!(add(&a, &col).is_err());
    }

    #[test]
    fn concat_slice_inverse() {
        let a = t(&[2, 2], &[1., 2., 3., 4.]);
        let b = t(&[2, 1], &[5., 6.]);
        let c = concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.data(), &[1., 2., 5., 3., 4., 6.]);
        assert_eq!(slice(&c, 1, 2, 1).unwrap(), b);
        assert_eq!(slice(&c, 1, 0, 2).unwrap(), a);
    }
}
