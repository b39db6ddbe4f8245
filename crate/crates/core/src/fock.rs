//! Exact fermionic Fock space for small mode counts.
//!
//! Matrices on `H_ph` here use the block grading `ψ = (c_1 … c_M, c*_1 … c*_M)`;
//! [`to_block_grading`] converts from the interleaved lattice layout.

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{fermi_dirac, BlockOperator};
use crate::linalg::{self, ONE, ZERO};

pub const MAX_MODES: usize = 14;
pub const MAX_GIBBS_MODES: usize = 10;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Duplicates are summed; exact zeros dropped.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            n,
            indptr,
            indices,
            values,
        }
        .pruned()
    }

    fn pruned(self) -> Self {
        let mut t = Vec::with_capacity(self.values.len());
        for (r, c, v) in self.iter() {
            if v != ZERO {
                t.push((r, c, v));
            }
        }
        if t.len() == self.values.len() {
            return self;
        }
        let mut indptr = vec![0; self.n + 1];
        for &(r, _, _) in &t {
            indptr[r + 1] += 1;
        }
        for r in 0..self.n {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            n: self.n,
            indptr,
            indices: t.iter().map(|x| x.1).collect(),
            values: t.iter().map(|x| x.2).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        SparseMatrix {
            n,
            indptr: vec![0; n + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, ONE)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |r| (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k])))
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut d = Array2::zeros((self.n, self.n));
        for (r, c, v) in self.iter() {
            d[[r, c]] += v;
        }
        d
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.n, self.iter().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn scale(&self, a: C64) -> Self {
        Self::from_triplets(self.n, self.iter().map(|(r, c, v)| (r, c, v * a)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self::from_triplets(self.n, self.iter().chain(other.iter()).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let mut t = Vec::new();
        let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
        for r in 0..self.n {
            acc.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    *acc.entry(c).or_insert(ZERO) += a * b;
                }
            }
            t.extend(acc.iter().map(|(&c, &v)| (r, c, v)));
        }
        Self::from_triplets(self.n, t)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        self.matmul(other).add(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn matvec(&self, x: &Array1<C64>) -> Array1<C64> {
        Array1::from_shape_fn(self.n, |r| self.row(r).map(|(c, v)| v * x[c]).sum())
    }
}

/// Fock space over `M` modes with the Jordan-Wigner ordering of the mode
/// labels: `c_m |n⟩ = (−1)^{n_1 + … + n_{m−1}} |n − e_m⟩`.
#[derive(Debug, Clone)]
pub struct FockSpace {
    pub modes: usize,
    pub dim: usize,
    annihilation: Vec<SparseMatrix>,
}

impl FockSpace {
    pub fn new(modes: usize) -> Result<Self> {
        if modes == 0 || modes > MAX_MODES {
            return Err(Error::Parameter(format!("mode count {modes} outside 1..={MAX_MODES}")));
        }
        let dim = 1usize << modes;
        let annihilation = (0..modes)
            .map(|m| {
                let t = (0..dim)
                    .filter_map(|st| apply(st, m, false).map(|(new, sg)| (new, st, C64::new(sg, 0.0))))
                    .collect();
                SparseMatrix::from_triplets(dim, t)
            })
            .collect();
        Ok(FockSpace {
            modes,
            dim,
            annihilation,
        })
    }

    pub fn c(&self, m: usize) -> &SparseMatrix {
        &self.annihilation[m]
    }

    pub fn c_dag(&self, m: usize) -> SparseMatrix {
        self.annihilation[m].adjoint()
    }

    pub fn number_op(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(
            self.dim,
            (0..self.dim).map(|st| (st, st, C64::new(st.count_ones() as f64, 0.0))).collect(),
        )
    }

    /// `(−1)^N`.
    pub fn parity(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(
            self.dim,
            (0..self.dim)
                .map(|st| (st, st, C64::new(if st.count_ones() % 2 == 0 { 1.0 } else { -1.0 }, 0.0)))
                .collect(),
        )
    }

    /// `ψ_b* ψ_a` as a sparse matrix, with `ψ = (c; c*)`.
    pub fn bilinear(&self, b: usize, a: usize) -> SparseMatrix {
        let m = self.modes;
        let t = (0..self.dim)
            .filter_map(|st| {
                let (s1, g1) = apply(st, a % m, a >= m)?;
                let (s2, g2) = apply(s1, b % m, b < m)?;
                Some((s2, st, C64::new(g1 * g2, 0.0)))
            })
            .collect();
        SparseMatrix::from_triplets(self.dim, t)
    }
}

/// Applies `c_m` (or `c*_m` when `create`) to a basis state.
fn apply(state: usize, m: usize, create: bool) -> Option<(usize, f64)> {
    let occupied = state >> m & 1 == 1;
    if occupied == create {
        return None;
    }
    let below = (state & ((1usize << m) - 1)).count_ones();
    let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
    Some((state ^ (1 << m), sign))
}

/// A quadratic operator `𝐀 = ½ ψ* A ψ`.
#[derive(Debug, Clone)]
pub struct QuadraticOp {
    pub a: Array2<C64>,
    pub bold: SparseMatrix,
}

/// Checks the `[[α, β], [γ, −αᵀ]]` form with antisymmetric `β`, `γ`.
fn check_graded(a: &Array2<C64>, modes: usize) -> Result<()> {
    let m = modes;
    if a.dim() != (2 * m, 2 * m) {
        return Err(Error::Parameter(format!("expected a {}x{} matrix", 2 * m, 2 * m)));
    }
    let alpha = a.slice(s![..m, ..m]);
    let beta = a.slice(s![..m, m..]);
    let gamma = a.slice(s![m.., ..m]);
    let delta = a.slice(s![m.., m..]);
    let mut sym = 0.0f64;
    let mut diag = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            sym = sym
                .max((beta[[i, j]] + beta[[j, i]]).norm() / 2.0)
                .max((gamma[[i, j]] + gamma[[j, i]]).norm() / 2.0);
            diag = diag.max((delta[[i, j]] + alpha[[j, i]]).norm());
        }
    }
    if sym > 1e-13 {
        return Err(Error::Parameter(format!("off-diagonal blocks have a symmetric part {sym:.3e}")));
    }
    if diag > 1e-13 {
        return Err(Error::Parameter(format!("lower-right block differs from -alpha^T by {diag:.3e}")));
    }
    Ok(())
}

pub fn second_quantize(a: &Array2<C64>, fock: &FockSpace) -> Result<QuadraticOp> {
    let m = fock.modes;
    check_graded(a, m)?;
    let mut t = Vec::new();
    for st in 0..fock.dim {
        for x in 0..2 * m {
            for y in 0..2 * m {
                let v = a[[x, y]];
                if v == ZERO {
                    continue;
                }
                // ψ_x* A_xy ψ_y
                let Some((s1, g1)) = apply(st, y % m, y >= m) else { continue };
                let Some((s2, g2)) = apply(s1, x % m, x < m) else { continue };
                t.push((s2, st, v * (0.5 * g1 * g2)));
            }
        }
    }
    Ok(QuadraticOp {
        a: a.clone(),
        bold: SparseMatrix::from_triplets(fock.dim, t),
    })
}

/// `‖[𝐀, 𝐀′] − bold([A, A′])‖_max`.
pub fn commutator_identity_check(a: &Array2<C64>, b: &Array2<C64>, fock: &FockSpace) -> Result<f64> {
    let qa = second_quantize(a, fock)?;
    let qb = second_quantize(b, fock)?;
    let qc = second_quantize(&linalg::commutator(a, b), fock)?;
    Ok(qa.bold.commutator(&qb.bold).sub(&qc.bold).max_abs())
}

/// Random `[[α, β], [γ, −αᵀ]]` with antisymmetric off-diagonal blocks, the
/// general form of an operator with a quadratic second quantization.
pub fn random_graded<R: Rng + ?Sized>(modes: usize, rng: &mut R) -> Array2<C64> {
    let mut z = || C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let alpha = Array2::from_shape_fn((modes, modes), |_| z());
    let b = Array2::from_shape_fn((modes, modes), |_| z());
    let g = Array2::from_shape_fn((modes, modes), |_| z());
    let mut a = Array2::zeros((2 * modes, 2 * modes));
    a.slice_mut(s![..modes, ..modes]).assign(&alpha);
    a.slice_mut(s![..modes, modes..]).assign(&(&b - &b.t()));
    a.slice_mut(s![modes.., ..modes]).assign(&(&g - &g.t()));
    a.slice_mut(s![modes.., modes..]).assign(&alpha.t().mapv(|x| -x));
    a
}

/// Permutes an interleaved `(site, spin, ph)` operator into the block grading.
pub fn to_block_grading(op: &BlockOperator) -> Array2<C64> {
    let d = op.data();
    let n = d.nrows();
    let m = n / 2;
    let idx = |k: usize| if k < m { 2 * k } else { 2 * (k - m) + 1 };
    Array2::from_shape_fn((n, n), |(r, c)| d[[idx(r), idx(c)]])
}

/// Inverse of [`to_block_grading`].
pub fn from_block_grading(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let m = n / 2;
    let idx = |k: usize| if k % 2 == 0 { k / 2 } else { m + k / 2 };
    Array2::from_shape_fn((n, n), |(r, c)| a[[idx(r), idx(c)]])
}

/// `K` in the block grading.
pub fn block_swap(m: usize) -> Array2<C64> {
    let mut k = Array2::zeros((2 * m, 2 * m));
    for i in 0..m {
        k[[i, m + i]] = ONE;
        k[[m + i, i]] = ONE;
    }
    k
}

#[derive(Debug, Clone)]
pub struct Bogoliubov {
    /// Canonical transformation with `W H W* = diag(D, −D)`.
    pub w: Array2<C64>,
    /// Nonnegative quasi-particle energies, sorted decreasing.
    pub d: Vec<f64>,
    /// Number of modes with `|E| < 1e-12`, paired by a deterministic rule.
    pub zero_modes: usize,
}

impl Bogoliubov {
    /// Residuals of `W W* = 1` and `K conj(W) K = W`.
    pub fn group_residuals(&self) -> (f64, f64) {
        let n = self.w.nrows();
        let k = block_swap(n / 2);
        let unit = linalg::max_abs_diff(&self.w.dot(&linalg::adjoint(&self.w)), &linalg::identity(n));
        let ph = linalg::max_abs_diff(&k.dot(&linalg::conj(&self.w)).dot(&k), &self.w);
        (unit, ph)
    }

    pub fn ground_energy(&self) -> f64 {
        -0.5 * self.d.iter().sum::<f64>()
    }
}

/// Diagonalizes a block-graded BdG matrix by an element of `𝒰`.
pub fn bogoliubov_diagonalize(h: &Array2<C64>) -> Result<Bogoliubov> {
    let n = h.nrows();
    let m = n / 2;
    if n % 2 != 0 || h.ncols() != n {
        return Err(Error::Parameter("BdG matrix must be square of even size".into()));
    }
    let k = block_swap(m);
    let phs = linalg::max_abs_diff(&k.dot(&linalg::conj(h)).dot(&k), &h.mapv(|x| -x));
    if phs > 1e-10 * linalg::max_abs(h).max(1.0) {
        return Err(Error::Symmetry {
            name: "PHS",
            residual: phs,
        });
    }
    let es = linalg::eigh(h)?;
    let cjk = |v: Array1<C64>| k.dot(&v.mapv(|x| x.conj()));
    let mut cols: Vec<(f64, Array1<C64>)> = Vec::with_capacity(m);
    for (i, &e) in es.values.iter().enumerate() {
        if e >= 1e-12 {
            cols.push((e, es.vectors.column(i).to_owned()));
        }
    }
    let zero: Vec<usize> = (0..n).filter(|&i| es.values[i].abs() < 1e-12).collect();
    let zero_modes = zero.len();
    if zero_modes % 2 != 0 {
        return Err(Error::ZeroModes(zero.iter().map(|&i| es.values[i]).collect()));
    }
    if zero_modes > 0 {
        // C-fixed real basis of the kernel, then φ = (m1 + i m2)/√2
        let mut real: Vec<Array1<C64>> = Vec::new();
        for &i in &zero {
            let z = es.vectors.column(i).to_owned();
            let cz = cjk(z.clone());
            for cand in [&z + &cz, (&z - &cz).mapv(|x| x * linalg::I)] {
                let mut v = cand;
                for u in &real {
                    let p: C64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                    v = &v - &u.mapv(|x| x * p.re);
                }
                let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if nrm > 1e-8 {
                    real.push(v.mapv(|x| x / nrm));
                }
            }
        }
        if real.len() != zero_modes {
            return Err(Error::ZeroModes(zero.iter().map(|&i| es.values[i]).collect()));
        }
        for pair in real.chunks(2) {
            let phi = (&pair[0] + &pair[1].mapv(|x| x * linalg::I)).mapv(|x| x / 2f64.sqrt());
            cols.push((0.0, phi));
        }
    }
    cols.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut wstar = Array2::zeros((n, n));
    for (j, (_, v)) in cols.iter().enumerate() {
        wstar.column_mut(j).assign(v);
        wstar.column_mut(m + j).assign(&cjk(v.clone()));
    }
    Ok(Bogoliubov {
        w: linalg::adjoint(&wstar),
        d: cols.iter().map(|c| c.0).collect(),
        zero_modes,
    })
}

/// `Γ_{ab} = ω_β(ψ_b* ψ_a)` computed from the many-body Gibbs state of
/// `𝐇 = ½ ψ* H ψ`; `β = ∞` gives the (averaged) ground state.
pub fn gibbs_two_point(h: &Array2<C64>, beta: f64, fock: &FockSpace) -> Result<Array2<C64>> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::Parameter(format!("inverse temperature {beta} must be >= 0")));
    }
    if fock.modes > MAX_GIBBS_MODES {
        return Err(Error::Parameter(format!(
            "Gibbs state needs at most {MAX_GIBBS_MODES} modes, got {}",
            fock.modes
        )));
    }
    let bold = second_quantize(h, fock)?.bold.to_dense();
    let es = linalg::eigh(&bold)?;
    let e0 = es.values[0];
    let mut w: Vec<f64> = es
        .values
        .iter()
        .map(|&e| {
            if beta.is_infinite() {
                if e - e0 < 1e-10 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-beta * (e - e0)).exp()
            }
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    let rho = es.apply_weights(&w);
    let n = 2 * fock.modes;
    let mut gamma = Array2::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            let op = fock.bilinear(b, a);
            gamma[[a, b]] = op.iter().map(|(r, c, v)| rho[[c, r]] * v).sum();
        }
    }
    Ok(gamma)
}

/// `f_β(H)` in the same grading, for comparison with [`gibbs_two_point`].
pub fn fermi_function(h: &Array2<C64>, beta: f64) -> Result<Array2<C64>> {
    Ok(linalg::eigh(h)?.apply(|e| fermi_dirac(beta, e)))
}

/// `ω(𝐀) = Tr(ρ 𝐀)` for a density matrix given by weights on the eigenbasis
/// of `𝐇`, used to compare with `½ Tr(Γ A)`.
pub fn expectation(bold: &SparseMatrix, rho: &Array2<C64>) -> C64 {
    bold.iter().map(|(r, c, v)| rho[[c, r]] * v).sum()
}

/// Many-body excitation energies above the ground state predicted by `D`.
pub fn predicted_spectrum(b: &Bogoliubov) -> Vec<f64> {
    let m = b.d.len();
    let e0 = b.ground_energy();
    let mut out: Vec<f64> = (0..1usize << m)
        .map(|st| e0 + (0..m).filter(|&k| st >> k & 1 == 1).map(|k| b.d[k]).sum::<f64>())
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn car_relations_are_exact() {
        let f = FockSpace::new(4).unwrap();
        let one = SparseMatrix::identity(f.dim);
        for a in 0..4 {
            for b in 0..4 {
                let ac = f.c(a).anticommutator(&f.c_dag(b));
                let want = if a == b { one.clone() } else { SparseMatrix::zeros(f.dim) };
                assert_eq!(ac.sub(&want).max_abs(), 0.0);
                assert_eq!(f.c(a).anticommutator(f.c(b)).max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn identity_grading_gives_number_operator() {
        let m = 3;
        let f = FockSpace::new(m).unwrap();
        let a = Array2::from_shape_fn((2 * m, 2 * m), |(i, j)| {
            if i != j {
                ZERO
            } else if i < m {
                ONE
            } else {
                -ONE
            }
        });
        let q = second_quantize(&a, &f).unwrap();
        let want = f.number_op().sub(&SparseMatrix::identity(f.dim).scale(c(m as f64 / 2.0)));
        assert!(q.bold.sub(&want).max_abs() < 1e-15);
        let z = second_quantize(&Array2::zeros((2 * m, 2 * m)), &f).unwrap();
        assert_eq!(z.bold.nnz(), 0);
    }

    #[test]
    fn spin_half_s3_eigenvalues() {
        let f = FockSpace::new(2).unwrap();
        // modes (up, down); S3 = diag(½, −½, −½, ½)
        let a = Array2::from_diag(&ndarray::arr1(&[c(0.5), c(-0.5), c(-0.5), c(0.5)]));
        let q = second_quantize(&a, &f).unwrap();
        let ev = linalg::eigvalsh(&q.bold.to_dense()).unwrap();
        let ev = ev.to_vec();
        let want = [-0.5, 0.0, 0.0, 0.5];
        for (x, y) in ev.iter().zip(want) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_pairing_rejected() {
        let f = FockSpace::new(2).unwrap();
        let mut a = Array2::zeros((4, 4));
        a[[0, 2]] = ONE;
        assert!(second_quantize(&a, &f).is_err());
    }

    #[test]
    fn pure_beta_gamma_commutator() {
        let f = FockSpace::new(3).unwrap();
        let mut a = Array2::zeros((6, 6));
        let mut b = Array2::zeros((6, 6));
        a[[0, 4]] = c(1.0);
        a[[1, 3]] = c(-1.0);
        a[[1, 5]] = I;
        a[[2, 4]] = -I;
        b[[3, 1]] = c(0.7);
        b[[4, 0]] = c(-0.7);
        b[[5, 0]] = C64::new(0.2, 0.3);
        b[[3, 2]] = C64::new(-0.2, -0.3);
        assert!(commutator_identity_check(&a, &b, &f).unwrap() < 1e-13);
    }

    #[test]
    fn bogoliubov_diagonal_input() {
        let h = Array2::from_diag(&ndarray::arr1(&[c(2.0), c(1.0), c(-2.0), c(-1.0)]));
        let b = bogoliubov_diagonalize(&h).unwrap();
        assert_eq!(b.d, vec![2.0, 1.0]);
        let (u, p) = b.group_residuals();
        assert!(u < 1e-14 && p < 1e-14);
    }

    #[test]
    fn one_site_s_wave_toy() {
        let (mu, d) = (0.6, 0.8);
        let h = ndarray::array![[c(-mu), c(d)], [c(d), c(mu)]];
        // one spin sector as a single mode is not PHS; embed two spins
        let mut full = Array2::zeros((4, 4));
        full[[0, 0]] = c(-mu);
        full[[1, 1]] = c(-mu);
        full[[2, 2]] = c(mu);
        full[[3, 3]] = c(mu);
        full[[0, 3]] = c(d);
        full[[1, 2]] = c(-d);
        full[[3, 0]] = c(d);
        full[[2, 1]] = c(-d);
        let b = bogoliubov_diagonalize(&full).unwrap();
        let want = (mu * mu + d * d).sqrt();
        assert!(b.d.iter().all(|x| (x - want).abs() < 1e-14));
        let ev = linalg::eigvalsh(&h).unwrap();
        assert!((ev[1] - want).abs() < 1e-14);
    }

    #[test]
    fn zero_modes_are_paired_deterministically() {
        let h = Array2::zeros((4, 4));
        let b = bogoliubov_diagonalize(&h).unwrap();
        assert_eq!(b.zero_modes, 4);
        let (u, p) = b.group_residuals();
        assert!(u < 1e-12 && p < 1e-12);
        let b2 = bogoliubov_diagonalize(&h).unwrap();
        assert_eq!(b.w, b2.w);
    }

    #[test]
    fn infinite_temperature_gibbs() {
        let f = FockSpace::new(2).unwrap();
        let h = Array2::from_diag(&ndarray::arr1(&[c(1.0), c(-0.3), c(-1.0), c(0.3)]));
        let g = gibbs_two_point(&h, 0.0, &f).unwrap();
        assert!(linalg::max_abs_diff(&g, &linalg::identity(4).mapv(|x| x * 0.5)) < 1e-14);
        assert!(gibbs_two_point(&h, -1.0, &f).is_err());
    }

    #[test]
    fn grading_round_trip() {
        let spec = crate::lattice::LatticeSpec::torus(2, 2, 1).unwrap();
        let data = Array2::from_shape_fn((8, 8), |(i, j)| C64::new(i as f64, j as f64));
        let op = BlockOperator::new(spec, data.clone());
        let b = to_block_grading(&op);
        assert_eq!(b[[0, 4]], data[[0, 1]]);
        assert_eq!(from_block_grading(&b), data);
    }
}
