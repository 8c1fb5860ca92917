//! Matrix Lie group/algebra kernels for `U(1)^k` and `SU(N)`.
//!
//! Algebra elements are anti-Hermitian complex matrices, group elements are
//! unitary matrices in the defining representation. The invariant inner
//! product is `<X, Y> = -c * Re Tr(XY)` with `c = 2` by default, which makes
//! the Pauli generators `i*sigma_a/2` orthonormal.

use crate::error::{Error, Result};
use crate::{C64, CMat};
use serde::{Deserialize, Serialize};

/// Tolerance for the anti-Hermiticity invariant of algebra elements.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance for the unitarity invariant of group elements.
pub const GROUP_TOL: f64 = 1e-10;
/// Group multiplications between unitarity re-projections in long products.
pub const REPROJECT_EVERY: usize = 64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Frobenius norm of a complex matrix.
pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance between two matrices.
pub fn fro_dist(a: &CMat, b: &CMat) -> f64 {
    fro_norm(&(a - b))
}

// ---------------------------------------------------------------------------
// Algebra elements
// ---------------------------------------------------------------------------

/// Anti-Hermitian matrix representing an element of the Lie algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    m: CMat,
}

impl AlgebraElement {
    /// Wraps a matrix after checking anti-Hermiticity within [`ALGEBRA_TOL`]
    /// (relative to the matrix scale for large inputs).
    pub fn new(m: CMat) -> Result<Self> {
        let dev = fro_dist(&m.adjoint(), &(-&m));
        let scale = fro_norm(&m).max(1.0);
        if dev > ALGEBRA_TOL * scale {
            return Err(Error::Validation(format!(
                "matrix is not anti-Hermitian: deviation {dev:.3e}"
            )));
        }
        Ok(Self { m })
    }

    /// Wraps a matrix that is anti-Hermitian by construction.
    pub fn new_unchecked(m: CMat) -> Self {
        Self { m }
    }

    pub fn zero(n: usize) -> Self {
        Self { m: CMat::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn norm(&self) -> f64 {
        fro_norm(&self.m)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { m: &self.m * c(a, 0.0) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { m: &self.m + &other.m }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { m: &self.m - &other.m }
    }

    /// Re-projects onto the anti-Hermitian subspace, `(X - X^†)/2`.
    pub fn anti_hermitize(&self) -> Self {
        Self { m: (&self.m - self.m.adjoint()) * c(0.5, 0.0) }
    }

    /// Complex trace in the defining representation.
    pub fn trace(&self) -> C64 {
        self.m.trace()
    }
}

/// Matrix exponential by scaling-and-squaring with a Taylor core.
///
/// The core series runs to machine precision, so for `|X| <= 1` the result
/// is accurate to ~1e-15 and all transport error stays quadrature-dominated.
pub fn exp_map(x: &AlgebraElement) -> Result<GroupElement> {
    // `AlgebraElement` enforces anti-Hermiticity at construction; re-assert
    // cheaply here because this is the boundary where unitarity is promised.
    let dev = fro_dist(&x.m.adjoint(), &(-&x.m));
    if dev > ALGEBRA_TOL * x.norm().max(1.0) {
        return Err(Error::Validation(format!(
            "exp_map input not anti-Hermitian: deviation {dev:.3e}"
        )));
    }
    Ok(GroupElement { m: exp_raw(&x.m) })
}

pub(crate) fn exp_raw(x: &CMat) -> CMat {
    let n = x.nrows();
    let norm = fro_norm(x);
    let theta = 0.25;
    let s = if norm > theta {
        (norm / theta).log2().ceil() as u32
    } else {
        0
    };
    let xs = x * c(0.5f64.powi(s as i32), 0.0);
    let mut sum = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..=32 {
        term = (&term * &xs) * c(1.0 / k as f64, 0.0);
        sum += &term;
        if fro_norm(&term) < 1e-18 * fro_norm(&sum) {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Principal matrix logarithm for group elements within the injectivity
/// radius `|g - I| < 1` (Frobenius). Inverse scaling-and-squaring: repeated
/// principal square roots followed by a Taylor log.
pub fn log_map(g: &GroupElement) -> Result<AlgebraElement> {
    let n = g.m.nrows();
    let id = CMat::identity(n, n);
    if fro_dist(&g.m, &id) >= 1.0 {
        return Err(Error::Domain(format!(
            "log_map: |g - I| = {:.3} is outside the injectivity radius",
            fro_dist(&g.m, &id)
        )));
    }
    let mut a = g.m.clone();
    let mut doublings = 0u32;
    while fro_dist(&a, &id) > 0.25 {
        a = sqrt_principal(&a)?;
        doublings += 1;
        if doublings > 40 {
            return Err(Error::Domain("log_map: square-root scaling failed".into()));
        }
    }
    let e = &a - &id;
    let mut sum = CMat::zeros(n, n);
    let mut pw = id.clone();
    for k in 1..=48 {
        pw = &pw * &e;
        let coef = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
        sum += &pw * c(coef, 0.0);
        if fro_norm(&pw) < 1e-18 {
            break;
        }
    }
    sum *= c(2.0f64.powi(doublings as i32), 0.0);
    // The exact log of a unitary matrix is anti-Hermitian; discard rounding.
    Ok(AlgebraElement::new_unchecked(
        (&sum - sum.adjoint()) * c(0.5, 0.0),
    ))
}

/// Principal square root via the Denman–Beavers iteration.
fn sqrt_principal(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = CMat::identity(n, n);
    for _ in 0..60 {
        let yi = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("matrix square root: singular iterate".into()))?;
        let zi = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("matrix square root: singular iterate".into()))?;
        let y_next = (&y + &zi) * c(0.5, 0.0);
        let z_next = (&z + &yi) * c(0.5, 0.0);
        let delta = fro_dist(&y_next, &y);
        y = y_next;
        z = z_next;
        if delta < 1e-15 * fro_norm(&y).max(1.0) {
            break;
        }
    }
    Ok(y)
}

/// Adjoint action `Ad_g X = g X g^{-1}` (the inverse is taken as `g^†`).
pub fn adjoint_act(g: &GroupElement, x: &AlgebraElement) -> AlgebraElement {
    AlgebraElement::new_unchecked(&g.m * &x.m * g.m.adjoint())
}

/// Matrix commutator `[X, Y] = XY - YX`.
pub fn bracket(x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
    AlgebraElement::new_unchecked(&x.m * &y.m - &y.m * &x.m)
}

// ---------------------------------------------------------------------------
// Group elements
// ---------------------------------------------------------------------------

/// Unitary matrix representing a group element.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    m: CMat,
}

impl GroupElement {
    /// Wraps a matrix after checking unitarity within [`GROUP_TOL`].
    pub fn new(m: CMat) -> Result<Self> {
        let n = m.nrows();
        let dev = fro_dist(&(m.adjoint() * &m), &CMat::identity(n, n));
        if dev > GROUP_TOL {
            return Err(Error::Validation(format!(
                "matrix is not unitary: deviation {dev:.3e}"
            )));
        }
        Ok(Self { m })
    }

    pub fn new_unchecked(m: CMat) -> Self {
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: CMat::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self { m: &self.m * &other.m }
    }

    /// Inverse through the adjoint; exact for unitary elements.
    pub fn inverse(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        fro_dist(&self.m, &other.m)
    }

    pub fn dist_identity(&self) -> f64 {
        let n = self.m.nrows();
        fro_dist(&self.m, &CMat::identity(n, n))
    }

    /// Deviation from unitarity, `|g^† g - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.m.nrows();
        fro_dist(&(self.m.adjoint() * &self.m), &CMat::identity(n, n))
    }

    /// Polar re-projection onto the unitary group (Newton iteration).
    /// Applied periodically inside long ordered products to bound drift.
    pub fn reproject(&self) -> Self {
        let mut u = self.m.clone();
        for _ in 0..4 {
            let ui = match u.clone().try_inverse() {
                Some(inv) => inv,
                None => return Self { m: u },
            };
            let next = (&u + ui.adjoint()) * c(0.5, 0.0);
            let delta = fro_dist(&next, &u);
            u = next;
            if delta < 1e-15 {
                break;
            }
        }
        Self { m: u }
    }

    pub fn conjugate(&self, x: &AlgebraElement) -> AlgebraElement {
        adjoint_act(self, x)
    }
}

/// Left-trivialized differential of the exponential: for `g = exp(xi)`,
/// `g^{-1} dg (u) = sum_k (-ad_xi)^k (d_u xi) / (k+1)!`.
pub fn dexp_left_inv(xi: &AlgebraElement, dxi: &AlgebraElement) -> AlgebraElement {
    let mut term = dxi.clone();
    let mut sum = dxi.clone();
    for k in 1..=24 {
        term = bracket(xi, &term).scale(-1.0);
        let coef = 1.0 / factorial(k + 1);
        sum = sum.add(&term.scale(coef));
        if term.norm() * coef < 1e-17 {
            break;
        }
    }
    sum
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product::<f64>().max(1.0)
}

// ---------------------------------------------------------------------------
// Group specification
// ---------------------------------------------------------------------------

/// Group family of the experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupFamily {
    /// `U(1)^k` realized as diagonal unitary `k x k` matrices.
    U1k,
    /// `SU(N)` in the defining representation.
    SuN,
}

/// Named generator sets addressable from the experiment config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorSet {
    Pauli,
    Gellmann,
    U1,
}

/// Group data: family, matrix dimension, generator basis and the Cartan
/// (commuting) subset used by reducibility checks.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub family: GroupFamily,
    pub n: usize,
    pub generator_set: GeneratorSet,
    pub generators: Vec<AlgebraElement>,
    pub cartan_indices: Vec<usize>,
    /// Inner product is `<X,Y> = -ip_norm * Re Tr(XY)`.
    pub ip_norm: f64,
}

impl GroupSpec {
    pub fn new(
        family: GroupFamily,
        n: usize,
        generator_set: GeneratorSet,
        cartan_indices: Vec<usize>,
        ip_norm: f64,
    ) -> Result<Self> {
        let generators = named_generators(generator_set, n)?;
        for &i in &cartan_indices {
            if i >= generators.len() {
                return Err(Error::Config(format!(
                    "cartan index {i} out of range for generator set of size {}",
                    generators.len()
                )));
            }
        }
        let spec = Self { family, n, generator_set, generators, cartan_indices, ip_norm };
        spec.check_cartan_commutes()?;
        Ok(spec)
    }

    /// `SU(2)` with Pauli generators, Cartan line `i sigma_3 / 2`.
    pub fn su2() -> Self {
        Self::new(GroupFamily::SuN, 2, GeneratorSet::Pauli, vec![2], 2.0).unwrap()
    }

    /// `SU(3)` with Gell-Mann generators, Cartan plane `{i l_3/2, i l_8/2}`.
    pub fn su3() -> Self {
        Self::new(GroupFamily::SuN, 3, GeneratorSet::Gellmann, vec![2, 7], 2.0).unwrap()
    }

    /// `U(1)^k` with the diagonal generator set.
    pub fn u1k(k: usize) -> Self {
        Self::new(GroupFamily::U1k, k, GeneratorSet::U1, (0..k).collect(), 2.0).unwrap()
    }

    /// Plain `U(1)`.
    pub fn u1() -> Self {
        Self::u1k(1)
    }

    fn check_cartan_commutes(&self) -> Result<()> {
        let basis = self.cartan_basis();
        for (i, x) in basis.iter().enumerate() {
            for y in basis.iter().skip(i + 1) {
                if bracket(x, y).norm() > ALGEBRA_TOL {
                    return Err(Error::Config(
                        "cartan basis elements do not commute".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn cartan_basis(&self) -> Vec<AlgebraElement> {
        self.cartan_indices
            .iter()
            .map(|&i| self.generators[i].clone())
            .collect()
    }

    /// Invariant inner product `<X,Y> = -ip_norm * Re Tr(XY)`.
    pub fn inner(&self, x: &AlgebraElement, y: &AlgebraElement) -> f64 {
        -self.ip_norm * (x.matrix() * y.matrix()).trace().re
    }

    pub fn algebra_zero(&self) -> AlgebraElement {
        AlgebraElement::zero(self.n)
    }

    pub fn group_identity(&self) -> GroupElement {
        GroupElement::identity(self.n)
    }

    /// Linear combination of the generator basis.
    pub fn from_coefficients(&self, coeffs: &[f64]) -> AlgebraElement {
        let mut m = CMat::zeros(self.n, self.n);
        for (g, &a) in self.generators.iter().zip(coeffs) {
            m += g.matrix() * c(a, 0.0);
        }
        AlgebraElement::new_unchecked(m)
    }

    /// Whether the family is abelian (path-ordering collapses).
    pub fn is_abelian(&self) -> bool {
        matches!(self.family, GroupFamily::U1k)
    }

    /// Validates the group-element invariants for this family
    /// (unitarity, and unit determinant for `SU(N)`).
    pub fn validate_group(&self, g: &GroupElement) -> Result<()> {
        if g.dim() != self.n {
            return Err(Error::Validation("group element has wrong dimension".into()));
        }
        if g.unitarity_defect() > GROUP_TOL {
            return Err(Error::Validation("group element is not unitary".into()));
        }
        if matches!(self.family, GroupFamily::SuN) {
            let det = g.matrix().determinant();
            if (det - c(1.0, 0.0)).norm() > GROUP_TOL {
                return Err(Error::Validation(format!(
                    "determinant {det} is not 1 for SU(N)"
                )));
            }
        }
        Ok(())
    }
}

/// Distance of `X` from the span of the Cartan basis under the invariant
/// inner product: `|X - P_T X|` with `P_T` the orthogonal projection.
pub fn cartan_residual(x: &AlgebraElement, spec: &GroupSpec) -> f64 {
    let basis = spec.cartan_basis();
    assert!(!basis.is_empty(), "cartan basis must be nonempty");
    let k = basis.len();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    for i in 0..k {
        for j in 0..k {
            gram[(i, j)] = spec.inner(&basis[i], &basis[j]);
        }
        rhs[i] = spec.inner(&basis[i], x);
    }
    let coeffs = gram
        .lu()
        .solve(&rhs)
        .expect("cartan basis must be linearly independent");
    let mut proj = AlgebraElement::zero(x.dim());
    for (b, &a) in basis.iter().zip(coeffs.iter()) {
        proj = proj.add(&b.scale(a));
    }
    // Norm induced by the invariant inner product.
    let r = x.sub(&proj);
    spec.inner(&r, &r).max(0.0).sqrt()
}

/// The named generator sets: `pauli` (su(2), `i sigma_a/2`), `gellmann`
/// (su(3), `i lambda_a/2`), `u1` (diagonal `i E_jj`).
pub fn named_generators(set: GeneratorSet, n: usize) -> Result<Vec<AlgebraElement>> {
    match set {
        GeneratorSet::Pauli => {
            if n != 2 {
                return Err(Error::Config("pauli generators require n = 2".into()));
            }
            Ok(pauli_generators())
        }
        GeneratorSet::Gellmann => {
            if n != 3 {
                return Err(Error::Config("gellmann generators require n = 3".into()));
            }
            Ok(gellmann_generators())
        }
        GeneratorSet::U1 => Ok((0..n)
            .map(|j| {
                let mut m = CMat::zeros(n, n);
                m[(j, j)] = c(0.0, 1.0);
                AlgebraElement::new_unchecked(m)
            })
            .collect()),
    }
}

/// `i sigma_a / 2` for the three Pauli matrices.
pub fn pauli_generators() -> Vec<AlgebraElement> {
    let s1 = CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
    let s2 = CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]);
    let s3 = CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]);
    [s1, s2, s3]
        .into_iter()
        .map(|s| AlgebraElement::new_unchecked(s * c(0.0, 0.5)))
        .collect()
}

/// `i lambda_a / 2` for the eight Gell-Mann matrices.
pub fn gellmann_generators() -> Vec<AlgebraElement> {
    let z = c(0., 0.);
    let o = c(1., 0.);
    let i = c(0., 1.);
    let r3 = 1.0 / 3.0f64.sqrt();
    let mats = [
        CMat::from_row_slice(3, 3, &[z, o, z, o, z, z, z, z, z]),
        CMat::from_row_slice(3, 3, &[z, -i, z, i, z, z, z, z, z]),
        CMat::from_row_slice(3, 3, &[o, z, z, z, -o, z, z, z, z]),
        CMat::from_row_slice(3, 3, &[z, z, o, z, z, z, o, z, z]),
        CMat::from_row_slice(3, 3, &[z, z, -i, z, z, z, i, z, z]),
        CMat::from_row_slice(3, 3, &[z, z, z, z, z, o, z, o, z]),
        CMat::from_row_slice(3, 3, &[z, z, z, z, z, -i, z, i, z]),
        CMat::from_row_slice(3, 3, &[o * c(r3, 0.), z, z, z, o * c(r3, 0.), z, z, z, o * c(-2.0 * r3, 0.)]),
    ];
    mats.into_iter()
        .map(|m| AlgebraElement::new_unchecked(m * c(0.0, 0.5)))
        .collect()
}
