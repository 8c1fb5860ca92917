//! Adjoint-valued differential forms on a single global chart of `R^d`,
//! `d` in {2, 3, 4}, with curvature, covariant exterior derivative, Hodge
//! star and the symmetry-group actions on pairs `(A, B)`.
//!
//! Forms are samplers `(point, p tangent vectors) -> algebra element`, not
//! stored grids; transports evaluate them along arbitrary curves. A form may
//! carry an analytic partial-derivative sampler; otherwise central finite
//! differences with the chart step `h_fd` are used.

use crate::error::{Error, Result};
use crate::liealg::{adjoint_act, bracket, AlgebraElement, GroupElement};
use crate::{C64, Coord};
use std::sync::Arc;

pub mod catalog;

pub type FormSampler = Arc<dyn Fn(&Coord, &[Coord]) -> AlgebraElement + Send + Sync>;
/// Partial derivative of the coefficient map: `(x, axis, tangents) ->
/// d/dx_axis [ y -> w(y)(tangents) ](x)` for fixed tangent vectors.
pub type FormDerivSampler = Arc<dyn Fn(&Coord, usize, &[Coord]) -> AlgebraElement + Send + Sync>;

/// Bounded chart `U` of `R^d` with the finite-difference step used whenever
/// a sampler has no analytic derivative.
#[derive(Debug, Clone)]
pub struct ChartDomain {
    pub dim: usize,
    /// Lower/upper bound per axis; axes beyond `dim` are ignored.
    pub bounds: [[f64; 2]; 4],
    pub h_fd: f64,
}

impl ChartDomain {
    pub fn new(dim: usize, bounds: [[f64; 2]; 4], h_fd: f64) -> Result<Self> {
        if !(2..=4).contains(&dim) {
            return Err(Error::Validation(format!("chart dimension {dim} not in 2..=4")));
        }
        if h_fd <= 0.0 {
            return Err(Error::Validation("h_fd must be positive".into()));
        }
        Ok(Self { dim, bounds, h_fd })
    }

    /// Symmetric box `[-r, r]^d` with the default step `1e-4`.
    pub fn symmetric(dim: usize, r: f64) -> Self {
        Self::new(dim, [[-r, r]; 4], 1e-4).unwrap()
    }

    pub fn contains(&self, x: &Coord) -> bool {
        (0..self.dim).all(|i| x[i] >= self.bounds[i][0] && x[i] <= self.bounds[i][1])
    }

    pub fn basis(&self) -> Vec<Coord> {
        (0..self.dim)
            .map(|i| {
                let mut e = Coord::zeros();
                e[i] = 1.0;
                e
            })
            .collect()
    }
}

/// Degree-`p` adjoint-valued form given by a sampler, with an optional
/// analytic partial-derivative sampler.
#[derive(Clone)]
pub struct AdjointForm {
    pub degree: usize,
    sampler: FormSampler,
    derivative: Option<FormDerivSampler>,
    /// Matrix dimension of the values, needed to produce zeros.
    pub algebra_dim: usize,
}

impl AdjointForm {
    pub fn new(degree: usize, algebra_dim: usize, sampler: FormSampler) -> Self {
        Self { degree, sampler, derivative: None, algebra_dim }
    }

    pub fn with_derivative(mut self, d: FormDerivSampler) -> Self {
        self.derivative = Some(d);
        self
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn zero(degree: usize, algebra_dim: usize) -> Self {
        let n = algebra_dim;
        Self {
            degree,
            algebra_dim,
            sampler: Arc::new(move |_, _| AlgebraElement::zero(n)),
            derivative: Some(Arc::new(move |_, _, _| AlgebraElement::zero(n))),
        }
    }

    pub fn eval(&self, x: &Coord, vs: &[Coord]) -> AlgebraElement {
        debug_assert_eq!(vs.len(), self.degree);
        (self.sampler)(x, vs)
    }

    /// `d/dx_axis [ y -> w(y)(vs) ](x)`, analytic when available, else a
    /// central difference with step `h_fd`.
    pub fn partial(&self, x: &Coord, axis: usize, vs: &[Coord], h_fd: f64) -> AlgebraElement {
        if let Some(d) = &self.derivative {
            return d(x, axis, vs);
        }
        let mut xp = *x;
        let mut xm = *x;
        xp[axis] += h_fd;
        xm[axis] -= h_fd;
        self.eval(&xp, vs)
            .sub(&self.eval(&xm, vs))
            .scale(1.0 / (2.0 * h_fd))
    }

    /// Directional derivative of the coefficient map along `u`.
    pub fn dir_partial(&self, x: &Coord, u: &Coord, vs: &[Coord], dim: usize, h_fd: f64) -> AlgebraElement {
        let mut acc = AlgebraElement::zero(self.algebra_dim);
        for axis in 0..dim {
            if u[axis] != 0.0 {
                acc = acc.add(&self.partial(x, axis, vs, h_fd).scale(u[axis]));
            }
        }
        acc
    }

    pub fn add(&self, other: &AdjointForm) -> AdjointForm {
        assert_eq!(self.degree, other.degree);
        let a = self.clone();
        let b = other.clone();
        let mut out = AdjointForm::new(
            self.degree,
            self.algebra_dim,
            Arc::new(move |x, vs| a.eval(x, vs).add(&b.eval(x, vs))),
        );
        if self.derivative.is_some() && other.derivative.is_some() {
            let da = self.clone();
            let db = other.clone();
            out = out.with_derivative(Arc::new(move |x, axis, vs| {
                da.partial(x, axis, vs, f64::NAN)
                    .add(&db.partial(x, axis, vs, f64::NAN))
            }));
        }
        out
    }

    pub fn scale(&self, a: f64) -> AdjointForm {
        let f = self.clone();
        let mut out = AdjointForm::new(
            self.degree,
            self.algebra_dim,
            Arc::new(move |x, vs| f.eval(x, vs).scale(a)),
        );
        if self.derivative.is_some() {
            let df = self.clone();
            out = out.with_derivative(Arc::new(move |x, axis, vs| {
                df.partial(x, axis, vs, f64::NAN).scale(a)
            }));
        }
        out
    }

    /// Random spot check of antisymmetry under swapping two tangent slots.
    pub fn antisymmetry_defect(&self, x: &Coord, vs: &[Coord], i: usize, j: usize) -> f64 {
        let mut swapped = vs.to_vec();
        swapped.swap(i, j);
        self.eval(x, vs).add(&self.eval(x, &swapped)).norm()
    }
}

/// Exterior derivative on constant tangent slots:
/// `dw(v_0..v_p) = sum_i (-1)^i D_{v_i} [w(.. v_i omitted ..)]`.
pub fn exterior_derivative(w: &AdjointForm, chart: &ChartDomain) -> AdjointForm {
    let inner = w.clone();
    let dim = chart.dim;
    let h = chart.h_fd;
    AdjointForm::new(
        w.degree + 1,
        w.algebra_dim,
        Arc::new(move |x, vs| {
            let mut acc = AlgebraElement::zero(inner.algebra_dim);
            for i in 0..vs.len() {
                let mut rest: Vec<Coord> = Vec::with_capacity(vs.len() - 1);
                rest.extend(vs.iter().take(i));
                rest.extend(vs.iter().skip(i + 1));
                let term = inner.dir_partial(x, &vs[i], &rest, dim, h);
                acc = if i % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
            }
            acc
        }),
    )
}

/// Graded bracket of a 1-form with a p-form:
/// `[a, w](v_0..v_p) = sum_i (-1)^i [a(v_i), w(.. v_i omitted ..)]`.
/// The sign convention is validated by the Bianchi identity test.
pub fn one_form_bracket(a: &AdjointForm, w: &AdjointForm) -> AdjointForm {
    assert_eq!(a.degree, 1);
    let a = a.clone();
    let w2 = w.clone();
    AdjointForm::new(
        w.degree + 1,
        w.algebra_dim,
        Arc::new(move |x, vs| {
            let mut acc = AlgebraElement::zero(w2.algebra_dim);
            for i in 0..vs.len() {
                let mut rest: Vec<Coord> = Vec::with_capacity(vs.len() - 1);
                rest.extend(vs.iter().take(i));
                rest.extend(vs.iter().skip(i + 1));
                let term = bracket(&a.eval(x, &vs[i..=i]), &w2.eval(x, &rest));
                acc = if i % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
            }
            acc
        }),
    )
}

/// Curvature `F_A = dA + (1/2)[A, A]`, i.e. `F(u,v) = dA(u,v) + [A(u), A(v)]`.
pub fn curvature_f(a: &AdjointForm, chart: &ChartDomain) -> AdjointForm {
    assert_eq!(a.degree, 1, "curvature needs a 1-form");
    let da = exterior_derivative(a, chart);
    let a2 = a.clone();
    AdjointForm::new(
        2,
        a.algebra_dim,
        Arc::new(move |x, vs| {
            let lin = da.eval(x, vs);
            let quad = bracket(&a2.eval(x, &vs[0..1]), &a2.eval(x, &vs[1..2]));
            lin.add(&quad)
        }),
    )
}

/// Covariant exterior derivative `d_A w = dw + [A, w]`; reduces to `dw`
/// when `A = 0` and to `dw` pointwise for abelian values.
pub fn cov_ext_derivative(a: &AdjointForm, w: &AdjointForm, chart: &ChartDomain) -> AdjointForm {
    assert!(w.degree <= 2, "covariant derivative implemented for p <= 2");
    exterior_derivative(w, chart).add(&one_form_bracket(a, w))
}

/// Hodge star on 2-forms of the Euclidean 4-dimensional chart with the
/// standard orientation; an involution (`** = +1`).
pub fn hodge_star(w: &AdjointForm, chart: &ChartDomain) -> Result<AdjointForm> {
    if chart.dim != 4 {
        return Err(Error::Unsupported(format!(
            "hodge star on 2-forms requires chart dimension 4, got {}",
            chart.dim
        )));
    }
    if w.degree != 2 {
        return Err(Error::Unsupported("hodge star implemented for 2-forms".into()));
    }
    // (*w)_{mn} = (1/2) eps_{mnrs} w_{rs}: the three dual pairs.
    // Pairs listed as ((m,n), (r,s), sign) with m<n, r<s.
    const DUAL: [((usize, usize), (usize, usize), f64); 6] = [
        ((0, 1), (2, 3), 1.0),
        ((0, 2), (1, 3), -1.0),
        ((0, 3), (1, 2), 1.0),
        ((1, 2), (0, 3), 1.0),
        ((1, 3), (0, 2), -1.0),
        ((2, 3), (0, 1), 1.0),
    ];
    let inner = w.clone();
    let star = move |x: &Coord, axis: Option<usize>, vs: &[Coord]| -> AlgebraElement {
        let comp = |r: usize, s: usize| -> AlgebraElement {
            let mut er = Coord::zeros();
            let mut es = Coord::zeros();
            er[r] = 1.0;
            es[s] = 1.0;
            match axis {
                None => inner.eval(x, &[er, es]),
                Some(ax) => inner.partial(x, ax, &[er, es], f64::NAN),
            }
        };
        let (u, v) = (&vs[0], &vs[1]);
        let mut acc = AlgebraElement::zero(inner.algebra_dim);
        for ((m, n), (r, s), sign) in DUAL {
            let coef = sign * (u[m] * v[n] - u[n] * v[m]);
            if coef != 0.0 {
                acc = acc.add(&comp(r, s).scale(coef));
            }
        }
        acc
    };
    let star_val = star.clone();
    let mut out = AdjointForm::new(
        2,
        w.algebra_dim,
        Arc::new(move |x, vs| star_val(x, None, vs)),
    );
    if w.has_analytic_derivative() {
        out = out.with_derivative(Arc::new(move |x, axis, vs| star(x, Some(axis), vs)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Gauge maps and the three actions on (A, B)
// ---------------------------------------------------------------------------

pub type GaugeSampler = Arc<dyn Fn(&Coord) -> GroupElement + Send + Sync>;
/// `(x, axis) -> d/dx_axis g(x)` as a raw matrix.
pub type GaugeDerivSampler = Arc<dyn Fn(&Coord, usize) -> crate::CMat + Send + Sync>;

/// Pointwise gauge transformation `x -> g(x)`, unitary-valued.
#[derive(Clone)]
pub struct GaugeMap {
    sampler: GaugeSampler,
    derivative: Option<GaugeDerivSampler>,
    pub algebra_dim: usize,
}

impl GaugeMap {
    pub fn new(algebra_dim: usize, sampler: GaugeSampler) -> Self {
        Self { sampler, derivative: None, algebra_dim }
    }

    pub fn with_derivative(mut self, d: GaugeDerivSampler) -> Self {
        self.derivative = Some(d);
        self
    }

    pub fn constant(g: GroupElement) -> Self {
        let n = g.dim();
        let gc = g.clone();
        Self {
            sampler: Arc::new(move |_| gc.clone()),
            derivative: Some(Arc::new(move |_, _| crate::CMat::zeros(n, n))),
            algebra_dim: n,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(GroupElement::identity(n))
    }

    pub fn eval(&self, x: &Coord) -> GroupElement {
        (self.sampler)(x)
    }

    /// Maurer-Cartan form `g^{-1} d g` evaluated on `u`.
    pub fn maurer(&self, x: &Coord, u: &Coord, dim: usize, h_fd: f64) -> AlgebraElement {
        let g = self.eval(x);
        let gi = g.inverse();
        let mut acc = crate::CMat::zeros(self.algebra_dim, self.algebra_dim);
        for axis in 0..dim {
            if u[axis] == 0.0 {
                continue;
            }
            let dg = match &self.derivative {
                Some(d) => d(x, axis),
                None => {
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[axis] += h_fd;
                    xm[axis] -= h_fd;
                    (self.eval(&xp).into_matrix() - self.eval(&xm).into_matrix())
                        * C64::new(1.0 / (2.0 * h_fd), 0.0)
                }
            };
            acc += dg * C64::new(u[axis], 0.0);
        }
        // g^{-1} dg of a unitary family is anti-Hermitian; strip rounding.
        AlgebraElement::new_unchecked(gi.matrix() * acc).anti_hermitize()
    }
}

/// Gauge action `(A, B) -> (Ad_{g^{-1}} A + g^{-1} dg, Ad_{g^{-1}} B)`.
pub fn act_gauge(
    a: &AdjointForm,
    b: &AdjointForm,
    g: &GaugeMap,
    chart: &ChartDomain,
) -> (AdjointForm, AdjointForm) {
    (gauge_connection(a, g, chart), gauge_adjoint(b, g))
}

fn gauge_connection(a: &AdjointForm, g: &GaugeMap, chart: &ChartDomain) -> AdjointForm {
    let a = a.clone();
    let g = g.clone();
    let dim = chart.dim;
    let h = chart.h_fd;
    AdjointForm::new(
        1,
        a.algebra_dim,
        Arc::new(move |x, vs| {
            let gx = g.eval(x);
            adjoint_act(&gx.inverse(), &a.eval(x, vs)).add(&g.maurer(x, &vs[0], dim, h))
        }),
    )
}

/// `Ad_{g^{-1}} w` for a tensorial form `w`, with analytic derivative when
/// both factors provide one.
pub fn gauge_adjoint(w: &AdjointForm, g: &GaugeMap) -> AdjointForm {
    let wi = w.clone();
    let gi = g.clone();
    let mut out = AdjointForm::new(
        w.degree,
        w.algebra_dim,
        Arc::new(move |x, vs| adjoint_act(&gi.eval(x).inverse(), &wi.eval(x, vs))),
    );
    if w.has_analytic_derivative() && g.derivative.is_some() {
        let wi = w.clone();
        let gd = g.clone();
        out = out.with_derivative(Arc::new(move |x, axis, vs| {
            let gx = gd.eval(x);
            let twisted_dw = adjoint_act(&gx.inverse(), &wi.partial(x, axis, vs, f64::NAN));
            let mut e = Coord::zeros();
            e[axis] = 1.0;
            let mc = gd.maurer(x, &e, 4, f64::NAN);
            let twisted_w = adjoint_act(&gx.inverse(), &wi.eval(x, vs));
            twisted_dw.add(&bracket(&twisted_w, &mc))
        }));
    }
    out
}

/// First semidirect action:
/// `(A, B) -> (A^g + eta, Ad_{g^{-1}} B - d_{A^g} eta - (1/2)[eta, eta])`.
pub fn act_first(
    a: &AdjointForm,
    b: &AdjointForm,
    g: &GaugeMap,
    eta: &AdjointForm,
    chart: &ChartDomain,
) -> (AdjointForm, AdjointForm) {
    let ag = gauge_connection(a, g, chart);
    let a_new = ag.add(eta);
    let d_eta = cov_ext_derivative(&ag, eta, chart);
    let eta2 = half_self_bracket(eta);
    let b_new = gauge_adjoint(b, g).add(&d_eta.scale(-1.0)).add(&eta2.scale(-1.0));
    (a_new, b_new)
}

/// Second semidirect action: `(A, B) -> (A^g, Ad_{g^{-1}} B - d_{A^g} eta)`.
pub fn act_second(
    a: &AdjointForm,
    b: &AdjointForm,
    g: &GaugeMap,
    eta: &AdjointForm,
    chart: &ChartDomain,
) -> (AdjointForm, AdjointForm) {
    let ag = gauge_connection(a, g, chart);
    let d_eta = cov_ext_derivative(&ag, eta, chart);
    let b_new = gauge_adjoint(b, g).add(&d_eta.scale(-1.0));
    (ag, b_new)
}

/// `(1/2)[eta, eta](u, v) = [eta(u), eta(v)]` for a 1-form.
pub fn half_self_bracket(eta: &AdjointForm) -> AdjointForm {
    assert_eq!(eta.degree, 1);
    let e = eta.clone();
    AdjointForm::new(
        2,
        eta.algebra_dim,
        Arc::new(move |x, vs| bracket(&e.eval(x, &vs[0..1]), &e.eval(x, &vs[1..2]))),
    )
}
