//! Symmetric vectorization with `sqrt(2)`-scaled off-diagonals.

use faer::Mat;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn svec_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Position of entry `(i, j)` (either order) in the upper-triangle,
/// column-major packing.
#[inline]
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Inverse of [`svec_index`].
pub fn svec_entry(index: usize) -> (usize, usize) {
    let mut j = ((((8 * index + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    while j * (j + 1) / 2 > index {
        j -= 1;
    }
    while (j + 1) * (j + 2) / 2 <= index {
        j += 1;
    }
    (index - j * (j + 1) / 2, j)
}

pub fn svec(m: &Mat<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(svec_len(d));
    for j in 0..d {
        for i in 0..=j {
            let v = if i == j { m[(i, j)] } else { SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]) };
            out.push(v);
        }
    }
    out
}

pub fn smat(v: &[f64], dim: usize) -> Mat<f64> {
    debug_assert_eq!(v.len(), svec_len(dim));
    let mut m = Mat::zeros(dim, dim);
    let mut k = 0;
    for j in 0..dim {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let s = v[k] / SQRT2;
                m[(i, j)] = s;
                m[(j, i)] = s;
            }
            k += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sym_from(vals: &[f64], d: usize) -> Mat<f64> {
        Mat::from_fn(d, d, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            vals[(a * 7 + b * 3) % vals.len()]
        })
    }

    #[test]
    fn index_round_trip() {
        for idx in 0..svec_len(40) {
            let (i, j) = svec_entry(idx);
            assert!(i <= j);
            assert_eq!(svec_index(i, j), idx);
            assert_eq!(svec_index(j, i), idx);
        }
    }

    proptest! {
        #[test]
        fn svec_smat_round_trip_preserves_inner_products(
            vals in prop::collection::vec(-10.0f64..10.0, 16),
            other in prop::collection::vec(-10.0f64..10.0, 16),
            d in 1usize..10,
        ) {
            let a = sym_from(&vals, d);
            let b = sym_from(&other, d);
            let va = svec(&a);
            let back = smat(&va, d);
            for i in 0..d {
                for j in 0..d {
                    prop_assert!((back[(i, j)] - a[(i, j)]).abs() <= 1e-12 * (1.0 + a[(i, j)].abs()));
                }
            }
            let vb = svec(&b);
            let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
            let mut tr = 0.0;
            for i in 0..d {
                for j in 0..d {
                    tr += a[(i, j)] * b[(j, i)];
                }
            }
            prop_assert!((dot - tr).abs() <= 1e-12 * (1.0 + tr.abs()));
        }
    }
}
