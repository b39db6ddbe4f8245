//! Spin-`s` representation matrices in the standard basis, `s³` diagonal with
//! entries `s, s−1, …, −s`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::linalg::{self, I, ZERO};

#[derive(Debug, Clone)]
pub struct SpinRep {
    /// Twice the spin, so `L = two_s + 1`.
    pub two_s: usize,
    pub s1: Array2<C64>,
    pub s2: Array2<C64>,
    pub s3: Array2<C64>,
    pub s_plus: Array2<C64>,
    pub s_minus: Array2<C64>,
    /// `α_l = sqrt(l (2s + 1 − l))`, `l = 1..2s`.
    pub alpha: Vec<f64>,
    /// Cross-diagonal `T_{l,l'} = χ(l + l' = L + 1) (−1)^{l+1}`.
    pub t_cross: Array2<C64>,
    /// Rotation by `π` about the 2-axis, `e^{iπ s²}`; real.
    pub r: Array2<C64>,
}

impl SpinRep {
    /// Representation of spin `two_s / 2`.
    pub fn new(two_s: usize) -> Self {
        let l = two_s + 1;
        let s = two_s as f64 / 2.0;
        let alpha: Vec<f64> = (1..=two_s)
            .map(|k| ((k * (two_s + 1 - k)) as f64).sqrt())
            .collect();
        let mut s_plus = Array2::zeros((l, l));
        for (k, &a) in alpha.iter().enumerate() {
            s_plus[[k, k + 1]] = C64::new(a, 0.0);
        }
        let s_minus = linalg::adjoint(&s_plus);
        let s3 = Array2::from_shape_fn((l, l), |(a, b)| {
            if a == b {
                C64::new(s - a as f64, 0.0)
            } else {
                ZERO
            }
        });
        let s1 = (&s_minus + &s_plus).mapv(|x| x * 0.5);
        let s2 = (&s_minus - &s_plus).mapv(|x| x * I * 0.5);
        let t_cross = Array2::from_shape_fn((l, l), |(a, b)| {
            // 0-based: a + b = L − 1, sign (−1)^{a}
            if a + b + 1 == l {
                C64::new(if a % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
            } else {
                ZERO
            }
        });
        let es = linalg::eigh(&s2).expect("spin matrices are hermitian");
        let r = es
            .apply_complex(|e| C64::from_polar(1.0, PI * e))
            .mapv(|x| C64::new(clean(x.re), 0.0));
        SpinRep {
            two_s,
            s1,
            s2,
            s3,
            s_plus,
            s_minus,
            alpha,
            t_cross,
            r,
        }
    }

    /// Representation on a fiber of dimension `L`.
    pub fn from_dim(l: usize) -> Self {
        assert!(l >= 1, "fiber dimension must be positive");
        Self::new(l - 1)
    }

    pub fn dim(&self) -> usize {
        self.two_s + 1
    }

    pub fn spin(&self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn half_integer(&self) -> bool {
        self.two_s % 2 == 1
    }

    pub fn component(&self, j: usize) -> &Array2<C64> {
        match j {
            1 => &self.s1,
            2 => &self.s2,
            3 => &self.s3,
            _ => panic!("spin component must be 1, 2 or 3"),
        }
    }
}

fn clean(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-12 {
        r
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, max_abs, max_abs_diff};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let r = SpinRep::new(1);
        let h = 0.5;
        assert_eq!(r.s1, ndarray::array![[ZERO, c(h, 0.0)], [c(h, 0.0), ZERO]]);
        assert_eq!(r.s2, ndarray::array![[ZERO, c(0.0, -h)], [c(0.0, h), ZERO]]);
        assert_eq!(r.s3, ndarray::array![[c(h, 0.0), ZERO], [ZERO, c(-h, 0.0)]]);
        assert_eq!(r.alpha, vec![1.0]);
        assert!(max_abs_diff(&r.t_cross, &r.s2.mapv(|x| x * 2.0 * I)) < 1e-15);
    }

    #[test]
    fn spin_one_values() {
        let r = SpinRep::new(2);
        let d: Vec<f64> = r.s3.diag().iter().map(|x| x.re).collect();
        assert_eq!(d, vec![1.0, 0.0, -1.0]);
        assert!((r.alpha[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((r.alpha[1] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn algebra_for_several_spins() {
        for two_s in 0..6 {
            let r = SpinRep::new(two_s);
            let l = r.dim();
            let pairs = [(1, 2, 3), (2, 3, 1), (3, 1, 2)];
            for (a, b, cc) in pairs {
                let lhs = commutator(r.component(a), r.component(b));
                let rhs = r.component(cc).mapv(|x| x * I);
                assert!(max_abs_diff(&lhs, &rhs) < 1e-13, "two_s = {two_s}");
            }
            for j in 1..=3 {
                let m = r.component(j);
                assert!(linalg::hermitian_residual(m) < 1e-15);
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                assert!(max_abs_diff(&linalg::conj(m), &m.mapv(|x| x * sign)) < 1e-15);
                assert!(linalg::trace(m).norm() < 1e-13);
            }
            // R real, R² = (−1)^{2s}
            assert!(r.r.iter().all(|x| x.im == 0.0));
            let sq = r.r.dot(&r.r);
            let sign = if two_s % 2 == 0 { 1.0 } else { -1.0 };
            assert!(max_abs_diff(&sq, &linalg::identity(l).mapv(|x| x * sign)) < 1e-12);
            // R inverts all spin components as a rotation by π about axis 2
            let rinv = linalg::adjoint(&r.r);
            let s3r = r.r.dot(&r.s3).dot(&rinv);
            assert!(max_abs_diff(&s3r, &r.s3.mapv(|x| -x)) < 1e-12);
            assert!(max_abs(&r.t_cross) <= 1.0);
        }
    }

    #[test]
    fn spin_half_rotation_matrix() {
        let r = SpinRep::new(1);
        assert_eq!(r.r, ndarray::array![[ZERO, c(1.0, 0.0)], [c(-1.0, 0.0), ZERO]]);
    }
}
