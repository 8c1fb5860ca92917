//! The special connection on the bundle of horizontal paths and its
//! transports: evaluation on path tangents, the surface ordered exponential
//! `k(s)` of a square, the end value `H = k(1)`, the holonomy of a loop of
//! paths `Hol = h_bottom(1) k(1)`, the tautological fast path, and the
//! once-iterated `(A, B, C)` connection on squares.
//!
//! All formulas are expressed in the chart trivialization: a tensorial form
//! evaluated on the lifted surface at `(s, t)` picks up the frame twist
//! `Ad` of the inverse of `h_{G(s,.)}(t) * h_{G(.,0)}(s) * k(s)`.

use crate::error::{Error, Result};
use crate::fields::{curvature_f, AdjointForm, ChartDomain};
use crate::geom::{boundary_loop, Path, Square};
use crate::liealg::{adjoint_act, exp_map, AlgebraElement, GroupElement, REPROJECT_EVERY};
use crate::transport::{frame_factor, FrameFactor};
use crate::Coord;
use rayon::prelude::*;
use std::sync::Arc;

/// The data `(A, eta, B)` of a special connection: base connection `A`, the
/// optional 1-form `eta` shifting the base-point connection to `A + eta`,
/// and the 2-form `B` integrated along each path.
#[derive(Clone)]
pub struct SpecialConnection {
    pub a: AdjointForm,
    pub eta: Option<AdjointForm>,
    pub b: AdjointForm,
}

impl SpecialConnection {
    pub fn pair(a: AdjointForm, b: AdjointForm) -> Self {
        Self { a, eta: None, b }
    }

    /// The trivial connection `(A, 0)`.
    pub fn trivial(a: AdjointForm) -> Self {
        let n = a.algebra_dim;
        Self { a, eta: None, b: AdjointForm::zero(2, n) }
    }

    /// The tautological connection `(A, -F_A)`, which transports endpoints.
    pub fn tautological(a: AdjointForm, chart: &ChartDomain) -> Self {
        let b = curvature_f(&a, chart).scale(-1.0);
        Self { a, eta: None, b }
    }

    pub fn algebra_dim(&self) -> usize {
        self.a.algebra_dim
    }
}

/// Tangent to the bundle of horizontal paths over one path: base vector
/// field `X(t)` plus the vertical component `xi(t)` propagated by the
/// curvature transport law. Constructed by `chen::lift_tangent`; the
/// vertical part is never supplied directly.
pub struct PathTangent {
    gamma: Path,
    x: Arc<dyn Fn(f64) -> Coord + Send + Sync>,
    xi_nodes: Vec<AlgebraElement>,
    frame: FrameFactor,
}

impl PathTangent {
    pub(crate) fn from_parts(
        gamma: Path,
        x: Arc<dyn Fn(f64) -> Coord + Send + Sync>,
        xi_nodes: Vec<AlgebraElement>,
        frame: FrameFactor,
    ) -> Self {
        Self { gamma, x, xi_nodes, frame }
    }

    /// Number of grid steps of the propagated vertical component.
    pub fn n(&self) -> usize {
        self.xi_nodes.len() - 1
    }

    pub fn gamma(&self) -> &Path {
        &self.gamma
    }

    pub fn x_at(&self, t: f64) -> Coord {
        (self.x)(t)
    }

    /// Vertical component at grid node `i`.
    pub fn xi(&self, i: usize) -> &AlgebraElement {
        &self.xi_nodes[i]
    }

    pub fn xi_start(&self) -> &AlgebraElement {
        &self.xi_nodes[0]
    }

    pub fn xi_end(&self) -> &AlgebraElement {
        self.xi_nodes.last().expect("tangent has nodes")
    }

    /// Frame factors of the base connection along the underlying path.
    pub fn frame(&self) -> &FrameFactor {
        &self.frame
    }
}

/// Grid sizes of a surface transport: `ns` ordered steps in the path-of-
/// paths variable, `nt` quadrature nodes along each path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurfaceGrids {
    pub ns: usize,
    pub nt: usize,
}

impl SurfaceGrids {
    pub fn square(n: usize) -> Self {
        Self { ns: n, nt: n }
    }
}

/// Result of transporting a square: the comparison path `k(s)` on the
/// `s`-grid, the bottom frame factors, and grid metadata.
pub struct SurfaceTransport {
    /// `k` at the `ns + 1` grid nodes of `s`.
    pub k_nodes: Vec<GroupElement>,
    /// Frames of the base connection along the bottom path `G(., 0)`.
    pub bottom: FrameFactor,
    /// The ordered-transport integrand at the `ns` step midpoints.
    pub integrands: Vec<AlgebraElement>,
    pub grids: SurfaceGrids,
}

impl SurfaceTransport {
    /// `k(1)`, the surface holonomy factor.
    pub fn k_end(&self) -> &GroupElement {
        self.k_nodes.last().expect("k grid nonempty")
    }

    /// `K(s_i) = h_bottom(s_i) k(s_i)`, the full transport operator of the
    /// special connection in the chart trivialization.
    pub fn capital_k(&self, i: usize) -> GroupElement {
        self.bottom.node(i).mul(&self.k_nodes[i])
    }

    /// `K(1)`; for a loop in `s` this is the holonomy of the pair.
    pub fn capital_k_end(&self) -> GroupElement {
        self.bottom.end().mul(self.k_end())
    }

    /// Second-order estimate of `k` at the midpoint of step `i`, by a half
    /// step with the stored midpoint integrand.
    pub fn k_mid(&self, i: usize) -> GroupElement {
        let ds = 1.0 / self.grids.ns as f64;
        let half = exp_map(&self.integrands[i].scale(-0.5 * ds)).expect("algebra integrand");
        half.mul(&self.k_nodes[i])
    }

    /// `K` at the midpoint of step `i`: `h_bottom(s_mid) k(s_mid)`.
    pub fn capital_k_mid(&self, i: usize) -> GroupElement {
        self.bottom.mid(i).mul(&self.k_mid(i))
    }

    /// Max-norm finite-difference residual of the ordered transport
    /// equation on the computed grid; a diagnostic of horizontality of the
    /// lifted square.
    pub fn horizontality_defect(&self) -> f64 {
        let ns = self.grids.ns;
        let ds = 1.0 / ns as f64;
        let mut worst: f64 = 0.0;
        for i in 0..ns {
            // Compare the step increment with the midpoint integrand.
            let kn = &self.k_nodes[i + 1];
            let pred =
                exp_map(&self.integrands[i].scale(-ds)).expect("integrand is algebra-valued");
            worst = worst.max(kn.dist(&pred.mul(&self.k_nodes[i])));
        }
        worst
    }
}

/// Value of the special connection on a path tangent, split into the
/// base-point term `Abar(X(0))` and the integrated `B` difference term.
pub struct ConnectionValue {
    /// `(sigma^* Abar)(X(0)) + xi(0)`, the base-point connection part.
    pub base: AlgebraElement,
    /// `eta(X(0)) + Int_0^1 Ad_{h^{-1}(t)} B(X(t), gamma'(t)) dt`, the
    /// difference from the trivial connection.
    pub difference: AlgebraElement,
}

impl ConnectionValue {
    /// Full connection value `A(X(0)) + xi(0) + difference`.
    pub fn full(&self) -> AlgebraElement {
        self.base.add(&self.difference)
    }
}

/// Evaluates the special connection on a path tangent along `gamma`.
pub fn eval_special_connection(
    conn: &SpecialConnection,
    tangent: &PathTangent,
    chart: &ChartDomain,
) -> Result<ConnectionValue> {
    let gamma = tangent.gamma();
    let n = tangent.n();
    let dt = 1.0 / n as f64;
    let x0 = gamma.at(0.0);
    if !chart.contains(&x0) {
        return Err(Error::Domain("path leaves the chart".into()));
    }
    let mut difference = match &conn.eta {
        Some(eta) => eta.eval(&x0, &[tangent.x_at(0.0)]),
        None => AlgebraElement::zero(conn.algebra_dim()),
    };
    let mut integral = AlgebraElement::zero(conn.algebra_dim());
    for j in 0..n {
        let t = (j as f64 + 0.5) * dt;
        let x = gamma.at(t);
        let val = conn.b.eval(&x, &[tangent.x_at(t), gamma.vel(t)]);
        integral = integral.add(&adjoint_act(&tangent.frame().mid(j).inverse(), &val));
    }
    difference = difference.add(&integral.scale(dt));
    let base = conn
        .a
        .eval(&x0, &[tangent.x_at(0.0)])
        .add(tangent.xi_start())
        .add(&match &conn.eta {
            Some(eta) => eta.eval(&x0, &[tangent.x_at(0.0)]),
            None => AlgebraElement::zero(conn.algebra_dim()),
        });
    Ok(ConnectionValue { base, difference })
}

/// Ordered integrand of the transport of a square at fixed `s`:
/// `Ad_{h_bottom^{-1}(s)} [ eta(G'(s,0)) + Int_0^1 Ad_{h_slice^{-1}(t)}
/// B(G'(s,t), G.(s,t)) dt ]`, optionally conjugated by a base frame shift.
fn slice_integrand(
    conn: &SpecialConnection,
    square: &Square,
    chart: &ChartDomain,
    s: f64,
    h_bottom_inv: &GroupElement,
    nt: usize,
    frame_shift: Option<&GroupElement>,
) -> Result<AlgebraElement> {
    let slice = square.slice_t(s);
    let h_slice = frame_factor(&conn.a, &slice, chart, nt)?;
    let dt = 1.0 / nt as f64;
    let mut inner = AlgebraElement::zero(conn.algebra_dim());
    for j in 0..nt {
        let t = (j as f64 + 0.5) * dt;
        let x = square.at(s, t);
        let val = conn.b.eval(&x, &[square.ds(s, t), square.dt(s, t)]);
        inner = inner.add(&adjoint_act(&h_slice.mid(j).inverse(), &val));
    }
    let mut m = inner.scale(dt);
    if let Some(eta) = &conn.eta {
        let x0 = square.at(s, 0.0);
        m = m.add(&eta.eval(&x0, &[square.ds(s, 0.0)]));
    }
    let mut twisted = adjoint_act(h_bottom_inv, &m);
    if let Some(g) = frame_shift {
        twisted = adjoint_act(&g.inverse(), &twisted);
    }
    Ok(twisted)
}

/// Transports a square under the special connection: the ordered
/// exponential in `s` of the doubly frame-twisted `B` integrand, with the
/// `eta` boundary term. Cost `O(ns * nt)`; independent `s`-slices are
/// evaluated concurrently and combined in grid order, so the result is
/// deterministic for fixed grids.
pub fn surface_transport(
    conn: &SpecialConnection,
    square: &Square,
    chart: &ChartDomain,
    grids: SurfaceGrids,
) -> Result<SurfaceTransport> {
    surface_transport_framed(conn, square, chart, grids, None)
}

/// Surface transport with all integrands conjugated by a fixed frame shift
/// `g`; realizes transporting from the translated base point `p0 g`.
pub fn surface_transport_framed(
    conn: &SpecialConnection,
    square: &Square,
    chart: &ChartDomain,
    grids: SurfaceGrids,
    frame_shift: Option<&GroupElement>,
) -> Result<SurfaceTransport> {
    let SurfaceGrids { ns, nt } = grids;
    if ns == 0 || nt == 0 {
        return Err(Error::Validation("surface transport needs ns, nt >= 1".into()));
    }
    let bottom = frame_factor(&conn.a, &square.slice_s(0.0), chart, ns)?;
    let ds = 1.0 / ns as f64;
    let integrands: Vec<AlgebraElement> = (0..ns)
        .into_par_iter()
        .map(|i| {
            let s = (i as f64 + 0.5) * ds;
            slice_integrand(conn, square, chart, s, &bottom.mid(i).inverse(), nt, frame_shift)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut k_nodes = Vec::with_capacity(ns + 1);
    let mut k = GroupElement::identity(conn.algebra_dim());
    k_nodes.push(k.clone());
    let mut since_reproject = 0;
    for m in &integrands {
        k = exp_map(&m.scale(-ds))?.mul(&k);
        since_reproject += 1;
        if since_reproject >= REPROJECT_EVERY {
            since_reproject = 0;
            k = k.reproject();
        }
        k_nodes.push(k.clone());
    }
    Ok(SurfaceTransport { k_nodes, bottom, integrands, grids })
}

/// The surface holonomy factor `H = k(1)` of a square.
pub fn h_map(
    conn: &SpecialConnection,
    square: &Square,
    chart: &ChartDomain,
    grids: SurfaceGrids,
) -> Result<GroupElement> {
    Ok(surface_transport(conn, square, chart, grids)?.k_end().clone())
}

/// `H` computed from the translated base frame `p0 g`; satisfies
/// `H(p0 g) = g^{-1} H(p0) g`.
pub fn h_map_framed(
    conn: &SpecialConnection,
    square: &Square,
    chart: &ChartDomain,
    grids: SurfaceGrids,
    frame_shift: &GroupElement,
) -> Result<GroupElement> {
    Ok(
        surface_transport_framed(conn, square, chart, grids, Some(frame_shift))?
            .k_end()
            .clone(),
    )
}

/// Holonomy of a loop of paths under the pair `(A, B)`:
/// `Hol = Hol_A(bottom loop) * H`, assembled as `K(1) = h_bottom(1) k(1)`.
pub fn hol_ab(
    conn: &SpecialConnection,
    square: &Square,
    chart: &ChartDomain,
    grids: SurfaceGrids,
) -> Result<GroupElement> {
    if !square.loop_s {
        return Err(Error::Validation("hol_ab needs a square closed in s".into()));
    }
    let st = surface_transport(conn, square, chart, grids)?;
    Ok(st.capital_k_end())
}

/// Norm of the defect between the endpoint-transport route and the surface
/// route for the tautological connection: `|H_{(A,-F_A)}(G) -
/// Hol_A(boundary(G))|`, second-order small in the grid spacing.
pub fn tautological_check(
    a: &AdjointForm,
    square: &Square,
    chart: &ChartDomain,
    grids: SurfaceGrids,
) -> Result<f64> {
    let conn = SpecialConnection::tautological(a.clone(), chart);
    let h = h_map(&conn, square, chart, grids)?;
    let bd = boundary_loop(square);
    // One quarter of the boundary per edge; match the edge resolutions.
    let n_bd = 4 * grids.ns.max(grids.nt);
    let hol = frame_factor(a, &bd, chart, n_bd)?.end().clone();
    Ok(h.dist(&hol))
}

/// Evaluation data of the once-iterated connection `(A, B, C)` on a square
/// tangent field.
pub struct IteratedEval {
    pub value: AlgebraElement,
    /// Residual of the transport equation of the underlying lift; a
    /// warning is attached when it exceeds the expected grid error.
    pub horizontality_defect: f64,
    pub warning: Option<String>,
}

/// Evaluates `A(X(0,0)) + Int_t B(X(0,t), G.(0,t)) + Int_{s,t} C(X, G', G.)`
/// on the lift of a square, with the frame twists of the chart
/// trivialization. `xi0` is the vertical component of the tangent at the
/// base point, when the tangent is not horizontal there.
pub fn iterated_connection_eval(
    a: &AdjointForm,
    b: &AdjointForm,
    c: &AdjointForm,
    square: &Square,
    x_field: &(dyn Fn(f64, f64) -> Coord + Sync),
    xi0: Option<&AlgebraElement>,
    chart: &ChartDomain,
    grids: SurfaceGrids,
) -> Result<IteratedEval> {
    if c.degree != 3 {
        return Err(Error::Validation("iterated connection needs a 3-form C".into()));
    }
    let conn = SpecialConnection::pair(a.clone(), b.clone());
    let st = surface_transport(&conn, square, chart, grids)?;
    let SurfaceGrids { ns, nt } = grids;
    let (ds, dt) = (1.0 / ns as f64, 1.0 / nt as f64);

    // Base-point term.
    let x00 = square.at(0.0, 0.0);
    let mut value = a.eval(&x00, &[x_field(0.0, 0.0)]);
    if let Some(xi) = xi0 {
        value = value.add(xi);
    }

    // B along the initial path (s = 0); K(0) = I so only the slice frames
    // twist.
    let slice0 = square.slice_t(0.0);
    let h0 = frame_factor(a, &slice0, chart, nt)?;
    let mut b_term = AlgebraElement::zero(a.algebra_dim);
    for j in 0..nt {
        let t = (j as f64 + 0.5) * dt;
        let x = square.at(0.0, t);
        let val = b.eval(&x, &[x_field(0.0, t), square.dt(0.0, t)]);
        b_term = b_term.add(&adjoint_act(&h0.mid(j).inverse(), &val));
    }
    value = value.add(&b_term.scale(dt));

    // C over the whole square with the full frame twist
    // h_slice(t) * K(s) at each cell midpoint.
    let cells: Vec<AlgebraElement> = (0..ns)
        .into_par_iter()
        .map(|i| {
            let s = (i as f64 + 0.5) * ds;
            let slice = square.slice_t(s);
            let h_slice = frame_factor(a, &slice, chart, nt)?;
            let cap_k_inv = st.capital_k_mid(i).inverse();
            let mut acc = AlgebraElement::zero(a.algebra_dim);
            for j in 0..nt {
                let t = (j as f64 + 0.5) * dt;
                let x = square.at(s, t);
                let val = c.eval(&x, &[x_field(s, t), square.ds(s, t), square.dt(s, t)]);
                let twisted = adjoint_act(&cap_k_inv, &adjoint_act(&h_slice.mid(j).inverse(), &val));
                acc = acc.add(&twisted);
            }
            Ok(acc.scale(ds * dt))
        })
        .collect::<Result<Vec<_>>>()?;
    for cell in cells {
        value = value.add(&cell);
    }

    // Horizontality diagnostic of the underlying lift.
    let defect = st.horizontality_defect();
    let tol = 10.0 * (ds * ds + dt * dt);
    let warning = (defect > tol).then(|| {
        format!("lift horizontality defect {defect:.3e} exceeds grid tolerance {tol:.3e}")
    });
    Ok(IteratedEval { value, horizontality_defect: defect, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog as fcat;
    use crate::geom::catalog as geo;
    use crate::liealg::GroupSpec;
    use crate::{C64, CMat};

    fn su2_chart3() -> (GroupSpec, ChartDomain) {
        (GroupSpec::su2(), ChartDomain::symmetric(3, 4.0))
    }

    #[test]
    fn trivial_connection_surface_holonomy_is_identity() {
        let (spec, chart) = su2_chart3();
        for seed in 0..4 {
            let a = fcat::random_fourier_one_form(&spec, &chart, seed, 3, 0.6);
            let sq = geo::lissajous_square(3, seed + 100, 0.3);
            let h = h_map(&SpecialConnection::trivial(a), &sq, &chart, SurfaceGrids::square(24)).unwrap();
            assert!(h.dist_identity() < 1e-12);
        }
    }

    #[test]
    fn degenerate_square_gives_identity() {
        // G(s, t) = gamma(t) for all s: the s-derivative vanishes and so
        // does the transport integrand.
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 5, 3, 0.6);
        let b = fcat::random_fourier_two_form(&spec, &chart, 6, 3, 0.6);
        let gamma = geo::lissajous_loop(3, 7, 1.0);
        let g2 = gamma.clone();
        let g3 = gamma.clone();
        let sq = Square::new(
            Arc::new(move |_s, t| gamma.at(t)),
            Arc::new(|_, _| Coord::zeros()),
            Arc::new(move |_s, t| g2.vel(t)),
            false,
            g3.closed,
        )
        .unwrap();
        let h = h_map(&SpecialConnection::pair(a, b), &sq, &chart, SurfaceGrids::square(16)).unwrap();
        assert!(h.dist_identity() < 1e-12);
    }

    #[test]
    fn abelian_surface_transport_matches_double_riemann() {
        // u(1): k(1) = exp(-Int_{[0,1]^2} B(G', G.)).
        let chart = ChartDomain::symmetric(3, 4.0);
        let b = {
            // i * (sin-profile) dx^dy + constant dy^dz term.
            let t = AlgebraElement::new_unchecked(CMat::from_row_slice(1, 1, &[C64::new(0.0, 1.0)]));
            let t2 = t.clone();
            AdjointForm::new(
                2,
                1,
                Arc::new(move |x: &Coord, vs: &[Coord]| {
                    let (u, v) = (&vs[0], &vs[1]);
                    let w01 = u[0] * v[1] - u[1] * v[0];
                    let w12 = u[1] * v[2] - u[2] * v[1];
                    t2.scale((1.3 * x[0]).sin() * w01 + 0.4 * w12)
                }),
            )
        };
        let a = AdjointForm::zero(1, 1);
        let sq = geo::lissajous_square(3, 31, 0.4);
        let k = h_map(&SpecialConnection::pair(a, b.clone()), &sq, &chart, SurfaceGrids::square(256)).unwrap();
        // Double Riemann oracle at high resolution.
        let m = 1200;
        let mut flux = 0.0;
        for i in 0..m {
            for j in 0..m {
                let s = (i as f64 + 0.5) / m as f64;
                let t = (j as f64 + 0.5) / m as f64;
                let val = b.eval(&sq.at(s, t), &[sq.ds(s, t), sq.dt(s, t)]);
                flux += val.matrix()[(0, 0)].im / (m * m) as f64;
            }
        }
        let expect = C64::new(0.0, -flux).exp();
        assert!(
            (k.matrix()[(0, 0)] - expect).norm() < 2e-5,
            "surface factor {} vs oracle {expect}",
            k.matrix()[(0, 0)]
        );
    }

    #[test]
    fn tautological_equals_boundary_holonomy_and_converges() {
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 13, 3, 0.5);
        let sq = geo::lissajous_square(3, 14, 0.3);
        let r32 = tautological_check(&a, &sq, &chart, SurfaceGrids::square(32)).unwrap();
        let r64 = tautological_check(&a, &sq, &chart, SurfaceGrids::square(64)).unwrap();
        let r128 = tautological_check(&a, &sq, &chart, SurfaceGrids::square(128)).unwrap();
        assert!(r128 < 1e-5, "residual at 128 too large: {r128:.3e}");
        let q1 = r32 / r64;
        let q2 = r64 / r128;
        assert!((3.5..=4.5).contains(&q1), "ratio {q1}");
        assert!((3.5..=4.5).contains(&q2), "ratio {q2}");
    }

    #[test]
    fn flat_tautological_residual_vanishes() {
        let chart = ChartDomain::symmetric(2, 3.0);
        let a = AdjointForm::zero(1, 1);
        let sq = geo::planar_square(
            Coord::zeros(),
            Coord::new(1.0, 0.0, 0.0, 0.0),
            Coord::new(0.0, 1.0, 0.0, 0.0),
        );
        let r = tautological_check(&a, &sq, &chart, SurfaceGrids::square(16)).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn u1_vortex_tautological_both_sides_match_flux() {
        let chart = ChartDomain::symmetric(2, 3.0);
        let c = 0.4;
        let a = fcat::u1_vortex(&chart, c);
        let sq = geo::planar_square(
            Coord::new(-0.8, -0.6, 0.0, 0.0),
            Coord::new(1.5, 0.0, 0.0, 0.0),
            Coord::new(0.0, 1.2, 0.0, 0.0),
        );
        let conn = SpecialConnection::tautological(a.clone(), &chart);
        let h = h_map(&conn, &sq, &chart, SurfaceGrids::square(64)).unwrap();
        // F = 2c dx^dy; the flux over the affine square is 2c * area. The
        // boundary quarters run up the left edge first, so the loop goes
        // clockwise in the (x, y) plane and Hol = exp(+i flux).
        let flux = 2.0 * c * 1.5 * 1.2;
        let expect_hol = C64::new(0.0, flux).exp();
        let got = h.matrix()[(0, 0)];
        let bd = boundary_loop(&sq);
        let hol = frame_factor(&a, &bd, &chart, 256).unwrap().end().clone();
        assert!(
            (hol.matrix()[(0, 0)] - expect_hol).norm() < 1e-6,
            "boundary holonomy {} vs {expect_hol}",
            hol.matrix()[(0, 0)]
        );
        assert!((got - expect_hol).norm() < 1e-6, "H {got} vs {expect_hol}");
    }

    #[test]
    fn hol_ab_reduces_to_bottom_holonomy_for_zero_b() {
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 17, 3, 0.5);
        let sq = geo::torus_square(1.2, 0.5);
        let grids = SurfaceGrids::square(48);
        let hol = hol_ab(&SpecialConnection::trivial(a.clone()), &sq, &chart, grids).unwrap();
        let bottom = sq.slice_s(0.0);
        let expect = frame_factor(&a, &bottom, &chart, grids.ns).unwrap().end().clone();
        assert!(hol.dist(&expect) < 1e-12);
    }

    #[test]
    fn hol_ab_rejects_open_in_s() {
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 18, 2, 0.4);
        let sq = geo::lissajous_square(3, 77, 0.2);
        assert!(matches!(
            hol_ab(&SpecialConnection::trivial(a), &sq, &chart, SurfaceGrids::square(8)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn loop_of_loops_tautological_four_factor_form() {
        // For a loop of loops with B = -F_A the surface factor is the
        // commutator of the two edge holonomies (composition ordered with
        // later factors on the left):
        // H = Hol_bottom^{-1} Hol_left^{-1} Hol_bottom Hol_left.
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 23, 3, 0.45);
        let sq = geo::torus_square(1.1, 0.45);
        let grids = SurfaceGrids { ns: 96, nt: 96 };
        let conn = SpecialConnection::tautological(a.clone(), &chart);
        let h = h_map(&conn, &sq, &chart, grids).unwrap();
        let n_edge = 256;
        let hol_b = frame_factor(&a, &sq.slice_s(0.0), &chart, n_edge).unwrap().end().clone();
        let hol_l = frame_factor(&a, &sq.slice_t(0.0), &chart, n_edge).unwrap().end().clone();
        let four = hol_b
            .inverse()
            .mul(&hol_l.inverse())
            .mul(&hol_b)
            .mul(&hol_l);
        assert!(
            h.dist(&four) < 5e-4,
            "four-factor defect {:.3e}",
            h.dist(&four)
        );
        // And Hol_{(A,B)} = Hol_bottom * H by construction.
        let st = surface_transport(&conn, &sq, &chart, grids).unwrap();
        assert!(st
            .capital_k_end()
            .dist(&st.bottom.end().mul(&h))
            .eq(&0.0));
    }

    #[test]
    fn abelian_flat_hol_ab_matches_flux_formula() {
        // Flat abelian A: Hol_{(A,B)} = Hol_A(bottom) exp(-Int G^*B).
        let chart = ChartDomain::symmetric(3, 4.0);
        let t = AlgebraElement::new_unchecked(CMat::from_row_slice(1, 1, &[C64::new(0.0, 1.0)]));
        let a = fcat::constant_one_form(&chart, &[Some(t.scale(0.3)), Some(t.scale(-0.2)), None], 1);
        let spec_u1 = GroupSpec::u1();
        let b = fcat::random_fourier_two_form(&spec_u1, &chart, 40, 3, 0.7);
        let sq = geo::torus_square(1.3, 0.5);
        let grids = SurfaceGrids::square(64);
        let hol = hol_ab(&SpecialConnection::pair(a.clone(), b.clone()), &sq, &chart, grids).unwrap();
        let m = 600;
        let mut flux = 0.0;
        for i in 0..m {
            for j in 0..m {
                let s = (i as f64 + 0.5) / m as f64;
                let t_ = (j as f64 + 0.5) / m as f64;
                let val = b.eval(&sq.at(s, t_), &[sq.ds(s, t_), sq.dt(s, t_)]);
                flux += val.matrix()[(0, 0)].im / (m * m) as f64;
            }
        }
        let hol_bottom = frame_factor(&a, &sq.slice_s(0.0), &chart, 512)
            .unwrap()
            .end()
            .clone();
        let expect = hol_bottom.matrix()[(0, 0)] * C64::new(0.0, -flux).exp();
        assert!((hol.matrix()[(0, 0)] - expect).norm() < 1e-6);
    }

    #[test]
    fn base_point_equivariance_of_h() {
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 55, 3, 0.5);
        let b = fcat::random_fourier_two_form(&spec, &chart, 56, 3, 0.5);
        let sq = geo::lissajous_square(3, 57, 0.3);
        let conn = SpecialConnection::pair(a, b);
        let grids = SurfaceGrids::square(32);
        let g = exp_map(&spec.from_coefficients(&[0.4, -0.7, 0.2])).unwrap();
        let h0 = h_map(&conn, &sq, &chart, grids).unwrap();
        let hg = h_map_framed(&conn, &sq, &chart, grids, &g).unwrap();
        let expect = g.inverse().mul(&h0).mul(&g);
        assert!(hg.dist(&expect) < 1e-11);
    }

    #[test]
    fn gauge_property_of_h() {
        // H of (A^psi, Ad_{psi^{-1}} eta, Ad_{psi^{-1}} B) equals
        // Ad_{psi(p0)^{-1}} H of (A, eta, B).
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 61, 3, 0.5);
        let b = fcat::random_fourier_two_form(&spec, &chart, 62, 3, 0.5);
        let eta = fcat::random_fourier_one_form(&spec, &chart, 63, 2, 0.3);
        let psi = fcat::random_fourier_gauge_map(&spec, &chart, 64, 2, 0.5);
        let sq = geo::lissajous_square(3, 65, 0.3);

        // The continuum identity is exact; the discrete defect shrinks at
        // second order in the common grid.
        let defect = |n: usize| {
            let grids = SurfaceGrids::square(n);
            let conn = SpecialConnection { a: a.clone(), eta: Some(eta.clone()), b: b.clone() };
            let h0 = h_map(&conn, &sq, &chart, grids).unwrap();
            let (ag, bg) = crate::fields::act_gauge(&a, &b, &psi, &chart);
            let eg = crate::fields::gauge_adjoint(&eta, &psi);
            let conn_g = SpecialConnection { a: ag, eta: Some(eg), b: bg };
            let hg = h_map(&conn_g, &sq, &chart, grids).unwrap();
            let g0 = psi.eval(&sq.at(0.0, 0.0));
            let expect = g0.inverse().mul(&h0).mul(&g0);
            hg.dist(&expect)
        };
        let d1 = defect(24);
        let d2 = defect(48);
        assert!(d2 < 5e-4, "gauge property defect {d2:.3e} at n = 48");
        assert!(d2 < d1 / 2.5, "defect must shrink: {d1:.3e} -> {d2:.3e}");
    }

    #[test]
    fn trace_of_hol_ab_is_base_point_independent() {
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 71, 3, 0.5);
        let b = fcat::random_fourier_two_form(&spec, &chart, 72, 3, 0.5);
        let sq = geo::torus_square(1.2, 0.4);
        let grids = SurfaceGrids::square(64);
        let conn = SpecialConnection::pair(a, b);
        let hol = hol_ab(&conn, &sq, &chart, grids).unwrap();

        // Shift the s-origin by a quarter turn.
        let sqc = sq.clone();
        let sqd = sq.clone();
        let sqe = sq.clone();
        let shifted = Square::new(
            Arc::new(move |s, t| {
                let u = s + 0.25;
                sqc.at(u - u.floor(), t)
            }),
            Arc::new(move |s, t| {
                let u = s + 0.25;
                sqd.ds(u - u.floor(), t)
            }),
            Arc::new(move |s, t| {
                let u = s + 0.25;
                sqe.dt(u - u.floor(), t)
            }),
            true,
            true,
        )
        .unwrap();
        let hol2 = hol_ab(&conn, &shifted, &chart, grids).unwrap();
        let d = (hol.trace() - hol2.trace()).norm();
        assert!(d < 1e-6, "trace changed by {d:.3e} under base-point shift");
    }

    #[test]
    fn iterated_connection_trivial_cases() {
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 81, 2, 0.4);
        let b = fcat::random_fourier_two_form(&spec, &chart, 82, 2, 0.4);
        let c0 = AdjointForm::zero(3, 2);
        let sq = geo::lissajous_square(3, 83, 0.2);
        let grids = SurfaceGrids::square(24);

        // C = 0 and a tangent field vanishing on the initial path: only the
        // A-term could contribute, and it vanishes with X(0,0) = 0.
        let x_zero_on_start = |s: f64, t: f64| Coord::new(0.0, 0.3 * s, 0.1 * s * t, 0.0) * s;
        let r = iterated_connection_eval(&a, &b, &c0, &sq, &x_zero_on_start, None, &chart, grids).unwrap();
        assert!(r.value.norm() < 1e-12);
        assert!(r.warning.is_none());

        // B = 0, C = 0: the A-term only.
        let b0 = AdjointForm::zero(2, 2);
        let x_any = |s: f64, t: f64| Coord::new(0.2 + 0.1 * t, -0.4 + 0.3 * s, 0.5, 0.0);
        let r = iterated_connection_eval(&a, &b0, &c0, &sq, &x_any, None, &chart, grids).unwrap();
        let expect = a.eval(&sq.at(0.0, 0.0), &[x_any(0.0, 0.0)]);
        assert!(r.value.sub(&expect).norm() < 1e-12);
    }

    #[test]
    fn iterated_connection_abelian_riemann_oracle() {
        let chart = ChartDomain::symmetric(3, 4.0);
        let t = AlgebraElement::new_unchecked(CMat::from_row_slice(1, 1, &[C64::new(0.0, 1.0)]));
        let a = fcat::constant_one_form(&chart, &[Some(t.scale(0.4)), None, None], 1);
        let spec_u1 = GroupSpec::u1();
        let b = fcat::random_fourier_two_form(&spec_u1, &chart, 90, 2, 0.5);
        // Constant-coefficient 3-form C = c dx^dy^dz.
        let tc = t.clone();
        let c = AdjointForm::new(
            3,
            1,
            Arc::new(move |_x: &Coord, vs: &[Coord]| {
                let (u, v, w) = (&vs[0], &vs[1], &vs[2]);
                let det = u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
                    + u[2] * (v[0] * w[1] - v[1] * w[0]);
                tc.scale(0.8 * det)
            }),
        );
        let sq = geo::lissajous_square(3, 91, 0.3);
        let x_field = |s: f64, t_: f64| Coord::new(0.3 * t_, 0.2 - 0.1 * s, 0.15 * s * t_, 0.0);
        let grids = SurfaceGrids::square(64);
        let r = iterated_connection_eval(&a, &b, &c, &sq, &x_field, None, &chart, grids).unwrap();

        // Riemann oracle: all Ad twists drop in u(1).
        let m = 500;
        let mut acc = a.eval(&sq.at(0.0, 0.0), &[x_field(0.0, 0.0)]).matrix()[(0, 0)];
        for j in 0..m {
            let tt = (j as f64 + 0.5) / m as f64;
            acc += b.eval(&sq.at(0.0, tt), &[x_field(0.0, tt), sq.dt(0.0, tt)]).matrix()[(0, 0)]
                / m as f64;
        }
        for i in 0..m {
            for j in 0..m {
                let ss = (i as f64 + 0.5) / m as f64;
                let tt = (j as f64 + 0.5) / m as f64;
                acc += c
                    .eval(&sq.at(ss, tt), &[x_field(ss, tt), sq.ds(ss, tt), sq.dt(ss, tt)])
                    .matrix()[(0, 0)]
                    / (m * m) as f64;
            }
        }
        assert!((r.value.matrix()[(0, 0)] - acc).norm() < 1e-5);
    }

    #[test]
    fn eval_special_connection_cases() {
        let (spec, chart) = su2_chart3();
        let a = fcat::random_fourier_one_form(&spec, &chart, 95, 2, 0.4);
        let gamma = geo::lissajous_loop(3, 96, 1.0);
        let rho = |t: f64| Coord::new(0.2 * (1.0 + t), -0.1, 0.3 * t, 0.0);
        let n = 64;
        let tangent = crate::chen::lift_tangent(&a, &gamma, &rho, None, &chart, n).unwrap();

        // B = 0, eta = 0: the difference part vanishes.
        let conn0 = SpecialConnection::trivial(a.clone());
        let v = eval_special_connection(&conn0, &tangent, &chart).unwrap();
        assert!(v.difference.norm() < 1e-14);

        // Zero tangent: everything vanishes.
        let zero_rho = |_t: f64| Coord::zeros();
        let zero_tan = crate::chen::lift_tangent(&a, &gamma, &zero_rho, None, &chart, n).unwrap();
        let b = fcat::random_fourier_two_form(&spec, &chart, 97, 2, 0.5);
        let conn = SpecialConnection::pair(a.clone(), b.clone());
        let v = eval_special_connection(&conn, &zero_tan, &chart).unwrap();
        assert!(v.full().norm() < 1e-14);

        // Abelian: Ad drops; plain Riemann integral of B(X, gamma').
        let chart2 = ChartDomain::symmetric(3, 4.0);
        let spec_u1 = GroupSpec::u1();
        let au = fcat::u1_vortex(&chart2, 0.3);
        let bu = fcat::random_fourier_two_form(&spec_u1, &chart2, 98, 3, 0.6);
        let tan_u = crate::chen::lift_tangent(&au, &gamma, &rho, None, &chart2, 4096).unwrap();
        let conn_u = SpecialConnection::pair(au, bu.clone());
        let v = eval_special_connection(&conn_u, &tan_u, &chart2).unwrap();
        let m = 200_000;
        let mut acc = 0.0;
        for j in 0..m {
            let t = (j as f64 + 0.5) / m as f64;
            acc += bu.eval(&gamma.at(t), &[rho(t), gamma.vel(t)]).matrix()[(0, 0)].im / m as f64;
        }
        assert!((v.difference.matrix()[(0, 0)].im - acc).abs() < 1e-6);
    }
}
