//! Small dense-vector helpers. Parameters are plain slices; nothing here allocates
//! unless it returns a vector.

use crate::scalar::Scalar;

#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm_sq<F: Scalar>(a: &[F]) -> F {
    dot(a, a)
}

/// `‖a − b‖²`
#[inline]
pub fn dist_sq<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// `y += alpha * x`
#[inline]
pub fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale<F: Scalar>(alpha: F, x: &mut [F]) {
    for v in x {
        *v *= alpha;
    }
}

pub fn all_finite<F: Scalar>(x: &[F]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Coordinate-wise mean of `vectors`, summed in order 0..N.
///
/// Computed as `v_0 + Σ (v_i − v_0) / N` so that a set of identical vectors
/// averages to exactly that vector.
pub fn mean_of<F: Scalar, V: AsRef<[F]>>(vectors: &[V], out: &mut [F]) {
    assert!(!vectors.is_empty(), "mean of an empty set");
    let first = vectors[0].as_ref();
    debug_assert_eq!(first.len(), out.len());
    let n = F::from_usize_lossy(vectors.len());
    for (j, o) in out.iter_mut().enumerate() {
        let base = first[j];
        let mut acc = F::zero();
        for v in &vectors[1..] {
            acc += v.as_ref()[j] - base;
        }
        *o = base + acc / n;
    }
}
