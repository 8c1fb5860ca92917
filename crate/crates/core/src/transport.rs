//! Ordered-exponential integration and ordinary parallel transport.
//!
//! Everything reduces to solving `dk/dt k^{-1} = -M(t)`, `k(a) = I` by
//! midpoint-exponential stepping `k <- exp(-dt M(t_mid)) k`, a second-order
//! geometric scheme. Later factors multiply on the left, so transport of a
//! concatenation is `h(second) * h(first)`. Frame factors are stored on a
//! half-step grid so inner midpoint quadratures can reuse them without any
//! re-transport.

use crate::error::{Error, Result};
use crate::fields::{AdjointForm, ChartDomain};
use crate::geom::Path;
use crate::liealg::{exp_map, AlgebraElement, GroupElement, REPROJECT_EVERY};
use crate::pathspace::PathTangent;

/// Bounded algebra-valued integrand `t -> M(t)` of the right-logarithmic
/// transport equation on `[a, b]`.
pub struct OrderedIntegrand<'f> {
    pub f: &'f (dyn Fn(f64) -> AlgebraElement + Sync),
    pub a: f64,
    pub b: f64,
}

/// Group value of a transport together with grid metadata.
#[derive(Debug, Clone)]
pub struct TransportResult {
    pub value: GroupElement,
    pub steps: usize,
    pub scheme_order: usize,
    /// Richardson estimate of the remaining error of `value`, when a
    /// coarse/fine pair was computed.
    pub error_estimate: Option<f64>,
}

/// Solves `dk/dt k^{-1} = -M(t)`, `k(a) = I`; global error `O((b-a)^2/N^2)`.
pub fn ordered_exp(m: &OrderedIntegrand, n: usize) -> Result<TransportResult> {
    if n == 0 {
        return Err(Error::Validation("ordered_exp needs at least one step".into()));
    }
    let dt = (m.b - m.a) / n as f64;
    let mut k: Option<GroupElement> = None;
    let mut since_reproject = 0;
    for i in 0..n {
        let t_mid = m.a + (i as f64 + 0.5) * dt;
        let step = exp_map(&(m.f)(t_mid).scale(-dt))?;
        k = Some(match k {
            None => step,
            Some(prev) => {
                since_reproject += 1;
                let next = step.mul(&prev);
                if since_reproject >= REPROJECT_EVERY {
                    since_reproject = 0;
                    next.reproject()
                } else {
                    next
                }
            }
        });
    }
    Ok(TransportResult {
        value: k.expect("n >= 1"),
        steps: n,
        scheme_order: 2,
        error_estimate: None,
    })
}

/// Same transport computed at `n` and `2n`; returns the fine value with the
/// Richardson error estimate `|k_n - k_2n| / 3`.
pub fn ordered_exp_richardson(m: &OrderedIntegrand, n: usize) -> Result<TransportResult> {
    let coarse = ordered_exp(m, n)?;
    let fine = ordered_exp(m, 2 * n)?;
    let est = coarse.value.dist(&fine.value) / 3.0;
    Ok(TransportResult {
        value: fine.value,
        steps: 2 * n,
        scheme_order: 2,
        error_estimate: Some(est),
    })
}

// ---------------------------------------------------------------------------
// Frame factors
// ---------------------------------------------------------------------------

/// Parallel-transport frames `h(gamma, t)` of a connection along one path,
/// sampled on a half-step grid (nodes and step midpoints). Piecewise paths
/// are integrated segment by segment with grids aligned to the breakpoints,
/// so corners contribute no error.
pub struct FrameFactor {
    segments: Vec<Segment>,
    /// Total number of base steps across all segments.
    pub steps: usize,
}

struct Segment {
    /// Frames at `t0 + j (t1-t0) / (2k)`, `j = 0..=2k`.
    values: Vec<GroupElement>,
}

impl FrameFactor {
    /// Frame at the end of the path, `h(gamma, 1)`.
    pub fn end(&self) -> &GroupElement {
        self.segments
            .last()
            .map(|s| s.values.last().expect("segment has frames"))
            .expect("frame factor has segments")
    }

    /// Number of base steps of the (single-segment) uniform grid.
    pub fn n(&self) -> usize {
        self.steps
    }

    fn single(&self) -> &Segment {
        debug_assert_eq!(self.segments.len(), 1, "uniform accessor on piecewise path");
        &self.segments[0]
    }

    /// Frame at grid node `i` of a smooth path, `t = i/N`.
    pub fn node(&self, i: usize) -> &GroupElement {
        &self.single().values[2 * i]
    }

    /// Frame at the midpoint of step `i` of a smooth path, `t = (i+1/2)/N`.
    pub fn mid(&self, i: usize) -> &GroupElement {
        &self.single().values[2 * i + 1]
    }
}

/// Ordered exponential of `-(sigma^* A)(gamma')` along a path: the frame
/// comparison between the transported lift and the chart section, with
/// `h(gamma, 0) = I`.
pub fn frame_factor(
    a: &AdjointForm,
    gamma: &Path,
    chart: &ChartDomain,
    n: usize,
) -> Result<FrameFactor> {
    if n == 0 {
        return Err(Error::Validation("frame_factor needs at least one step".into()));
    }
    let mut boundaries = vec![0.0];
    boundaries.extend(gamma.breakpoints.iter().copied());
    boundaries.push(1.0);

    let mut segments: Vec<Segment> = Vec::new();
    let mut carry = GroupElement::identity(a.algebra_dim);
    let mut total_steps = 0;
    for w in boundaries.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let len = t1 - t0;
        let k = ((n as f64) * len).round().max(1.0) as usize;
        total_steps += k;
        let dt = len / k as f64;
        let mut values = Vec::with_capacity(2 * k + 1);
        values.push(carry.clone());
        let mut cur = carry.clone();
        let mut since_reproject = 0;
        for j in 0..(2 * k) {
            let h = dt / 2.0;
            let t_mid = t0 + (j as f64 + 0.5) * h;
            let x = gamma.at(t_mid);
            if !chart.contains(&x) {
                return Err(Error::Domain(format!(
                    "path leaves the chart at t = {t_mid:.4}"
                )));
            }
            let m = a.eval(&x, &[gamma.vel(t_mid)]);
            cur = exp_map(&m.scale(-h))?.mul(&cur);
            since_reproject += 1;
            if since_reproject >= REPROJECT_EVERY {
                since_reproject = 0;
                cur = cur.reproject();
            }
            values.push(cur.clone());
        }
        carry = cur;
        segments.push(Segment { values });
    }
    Ok(FrameFactor { segments, steps: total_steps })
}

/// Holonomy of a closed path: the end frame `h(gamma, 1)` with a Richardson
/// error estimate from an `N`/`2N` pair.
pub fn holonomy_a(
    a: &AdjointForm,
    gamma: &Path,
    chart: &ChartDomain,
    n: usize,
) -> Result<TransportResult> {
    if !gamma.closed {
        return Err(Error::Validation("holonomy needs a closed path".into()));
    }
    let coarse = frame_factor(a, gamma, chart, n)?;
    let fine = frame_factor(a, gamma, chart, 2 * n)?;
    let est = coarse.end().dist(fine.end()) / 3.0;
    Ok(TransportResult {
        value: fine.end().clone(),
        steps: fine.steps,
        scheme_order: 2,
        error_estimate: Some(est),
    })
}

/// Single-grid holonomy without the Richardson pair.
pub fn holonomy_a_single(
    a: &AdjointForm,
    gamma: &Path,
    chart: &ChartDomain,
    n: usize,
) -> Result<TransportResult> {
    if !gamma.closed {
        return Err(Error::Validation("holonomy needs a closed path".into()));
    }
    let ff = frame_factor(a, gamma, chart, n)?;
    Ok(TransportResult {
        value: ff.end().clone(),
        steps: ff.steps,
        scheme_order: 2,
        error_estimate: None,
    })
}

/// Max-norm residual of the admissibility equation of a path tangent:
/// the grid derivative of the vertical component must balance the twisted
/// curvature contraction at every interior node. Second-order small for
/// tangents produced by the horizontal-lift construction.
pub fn horizontality_residual(
    f_a: &AdjointForm,
    tangent: &PathTangent,
    _chart: &ChartDomain,
) -> f64 {
    let n = tangent.n();
    let dt = 1.0 / n as f64;
    let mut worst: f64 = 0.0;
    for i in 1..n {
        let t = i as f64 / n as f64;
        let dxi = tangent.xi(i + 1).sub(&tangent.xi(i - 1)).scale(1.0 / (2.0 * dt));
        let x = tangent.gamma().at(t);
        let twisted = crate::liealg::adjoint_act(
            &tangent.frame().node(i).inverse(),
            &f_a.eval(&x, &[tangent.x_at(t), tangent.gamma().vel(t)]),
        );
        worst = worst.max(dxi.add(&twisted).norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::catalog as fcat;
    use crate::geom::catalog as geo;
    use crate::liealg::GroupSpec;
    use crate::{C64, CMat, Coord};
    use std::sync::Arc;

    fn su2_x(coeffs: [f64; 3]) -> AlgebraElement {
        GroupSpec::su2().from_coefficients(&coeffs)
    }

    #[test]
    fn ordered_exp_of_zero_is_identity() {
        let f = |_: f64| AlgebraElement::zero(2);
        let m = OrderedIntegrand { f: &f, a: 0.0, b: 1.0 };
        let r = ordered_exp(&m, 16).unwrap();
        assert!(r.value.dist_identity() < 1e-15);
    }

    #[test]
    fn ordered_exp_of_constant_is_exp_minus_x() {
        let x = su2_x([0.4, -0.2, 0.7]);
        let xc = x.clone();
        let f = move |_: f64| xc.clone();
        let m = OrderedIntegrand { f: &f, a: 0.0, b: 1.0 };
        let r = ordered_exp(&m, 64).unwrap();
        let expect = exp_map(&x.scale(-1.0)).unwrap();
        // The autonomous case is exact for the midpoint-exponential scheme
        // up to rounding.
        assert!(r.value.dist(&expect) < 1e-12);
    }

    #[test]
    fn ordered_exp_abelian_matches_riemann_oracle() {
        // u(1): M(t) = i f(t); k(1) = exp(-i Int f).
        let f = |t: f64| {
            AlgebraElement::new_unchecked(CMat::from_row_slice(
                1,
                1,
                &[C64::new(0.0, (3.0 * t).sin() + 0.25 * t * t)],
            ))
        };
        let m = OrderedIntegrand { f: &f, a: 0.0, b: 1.0 };
        let r = ordered_exp(&m, 2048).unwrap();
        // Riemann-sum oracle on a fine midpoint grid.
        let fine = 1_000_000;
        let mut integral = 0.0;
        for i in 0..fine {
            let t = (i as f64 + 0.5) / fine as f64;
            integral += ((3.0 * t).sin() + 0.25 * t * t) / fine as f64;
        }
        let expect = C64::new(0.0, -integral).exp();
        assert!((r.value.matrix()[(0, 0)] - expect).norm() < 1e-6);
    }

    #[test]
    fn ordered_exp_second_order_convergence() {
        let t1 = su2_x([1.0, 0.0, 0.0]);
        let t2 = su2_x([0.0, 1.0, 0.0]);
        let f = move |t: f64| t1.scale((2.0 * t).sin()).add(&t2.scale(t * t));
        let m = OrderedIntegrand { f: &f, a: 0.0, b: 1.0 };
        let k1 = ordered_exp(&m, 16).unwrap().value;
        let k2 = ordered_exp(&m, 32).unwrap().value;
        let k4 = ordered_exp(&m, 64).unwrap().value;
        let ratio = k1.dist(&k2) / k2.dist(&k4);
        assert!(
            (3.5..=4.5).contains(&ratio),
            "convergence ratio {ratio} outside [3.5, 4.5]"
        );
    }

    #[test]
    fn unitarity_drift_stays_small_over_many_steps() {
        let t1 = su2_x([0.9, 0.0, 0.0]);
        let t2 = su2_x([0.0, 0.8, 0.3]);
        let f = move |t: f64| t1.scale((5.0 * t).cos()).add(&t2.scale((3.0 * t).sin()));
        let m = OrderedIntegrand { f: &f, a: 0.0, b: 1.0 };
        let r = ordered_exp(&m, 10_000).unwrap();
        assert!(r.value.unitarity_defect() < 1e-8);
    }

    #[test]
    fn frame_factor_zero_connection_is_identity() {
        let chart = ChartDomain::symmetric(2, 3.0);
        let a = AdjointForm::zero(1, 2);
        let gamma = geo::circle(1.0, Coord::zeros(), (0, 1));
        let ff = frame_factor(&a, &gamma, &chart, 32).unwrap();
        for i in 0..=32 {
            assert!(ff.node(i).dist_identity() < 1e-15);
        }
    }

    #[test]
    fn frame_factor_constant_connection_closed_form() {
        // A = X dx along gamma(t) = (t, 0): h(t) = exp(-t X).
        let chart = ChartDomain::symmetric(2, 3.0);
        let x = su2_x([0.3, 0.5, -0.4]);
        let a = fcat::constant_one_form(&chart, &[Some(x.clone()), None, None], 2);
        let gamma = geo::segment(Coord::zeros(), Coord::new(1.0, 0.0, 0.0, 0.0));
        let ff = frame_factor(&a, &gamma, &chart, 64).unwrap();
        for &t in &[0.25, 0.5, 1.0] {
            let i = (t * 64.0) as usize;
            let expect = exp_map(&x.scale(-t)).unwrap();
            assert!(ff.node(i).dist(&expect) < 1e-12);
        }
    }

    #[test]
    fn concatenation_composes_left_of_first() {
        // Two-segment run against a single segment over the joined path.
        let chart = ChartDomain::symmetric(2, 3.0);
        let spec = GroupSpec::su2();
        let a = fcat::random_fourier_one_form(&spec, &chart, 77, 3, 0.6);
        let p_all = geo::segment(Coord::new(-1.0, 0.2, 0.0, 0.0), Coord::new(1.0, -0.4, 0.0, 0.0));
        let mid = p_all.at(0.5);
        let p1 = geo::segment(p_all.at(0.0), mid);
        let p2 = geo::segment(mid, p_all.at(1.0));
        let n = 128;
        let h_all = frame_factor(&a, &p_all, &chart, n).unwrap().end().clone();
        let h1 = frame_factor(&a, &p1, &chart, n / 2).unwrap().end().clone();
        let h2 = frame_factor(&a, &p2, &chart, n / 2).unwrap().end().clone();
        // Identical grids: the two routes agree to rounding, h = h2 * h1.
        assert!(h2.mul(&h1).dist(&h_all) < 1e-13);
    }

    #[test]
    fn piecewise_breakpoints_integrate_exactly() {
        // A path with an explicit breakpoint matches the two-segment product.
        let chart = ChartDomain::symmetric(2, 3.0);
        let spec = GroupSpec::su2();
        let a = fcat::random_fourier_one_form(&spec, &chart, 78, 3, 0.6);
        let p0 = Coord::new(-0.5, -0.5, 0.0, 0.0);
        let p1 = Coord::new(0.6, 0.1, 0.0, 0.0);
        let p2 = Coord::new(-0.2, 0.8, 0.0, 0.0);
        let seg1 = geo::segment(p0, p1);
        let seg2 = geo::segment(p1, p2);
        let s1 = seg1.clone();
        let s2 = seg2.clone();
        let joined = Path::new(
            Arc::new(move |t| if t <= 0.5 { s1.at(2.0 * t) } else { s2.at(2.0 * t - 1.0) }),
            {
                let s1 = seg1.clone();
                let s2 = seg2.clone();
                Arc::new(move |t| {
                    if t <= 0.5 {
                        s1.vel(2.0 * t) * 2.0
                    } else {
                        s2.vel(2.0 * t - 1.0) * 2.0
                    }
                })
            },
            false,
        )
        .unwrap()
        .with_breakpoints(vec![0.5]);
        let n = 64;
        let h = frame_factor(&a, &joined, &chart, n).unwrap().end().clone();
        let h1 = frame_factor(&a, &seg1, &chart, n / 2).unwrap().end().clone();
        let h2 = frame_factor(&a, &seg2, &chart, n / 2).unwrap().end().clone();
        assert!(h2.mul(&h1).dist(&h) < 1e-13);
    }

    #[test]
    fn chart_exit_is_a_domain_error() {
        let chart = ChartDomain::symmetric(2, 0.5);
        let a = AdjointForm::zero(1, 2);
        let gamma = geo::circle(1.0, Coord::zeros(), (0, 1));
        assert!(matches!(
            frame_factor(&a, &gamma, &chart, 8),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn holonomy_rejects_open_paths() {
        let chart = ChartDomain::symmetric(2, 3.0);
        let a = AdjointForm::zero(1, 2);
        let gamma = geo::segment(Coord::zeros(), Coord::new(1.0, 0.0, 0.0, 0.0));
        assert!(matches!(
            holonomy_a(&a, &gamma, &chart, 8),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn u1_vortex_holonomy_matches_stokes_flux() {
        // Classical Stokes: Hol = exp(-Int_disk F) for the abelian vortex.
        let chart = ChartDomain::symmetric(2, 3.0);
        let c = 0.35;
        let a = fcat::u1_vortex(&chart, c);
        let radius = 1.2;
        let gamma = geo::circle(radius, Coord::zeros(), (0, 1));
        let hol = holonomy_a(&a, &gamma, &chart, 512).unwrap();
        // Flux by polar midpoint quadrature of F = dA over the disk.
        let f = crate::fields::curvature_f(&a, &chart);
        let e = chart.basis();
        let m = 400;
        let mut flux = 0.0;
        for i in 0..m {
            for j in 0..m {
                let r = (i as f64 + 0.5) * radius / m as f64;
                let th = (j as f64 + 0.5) * std::f64::consts::TAU / m as f64;
                let v = f.eval(&Coord::new(r * th.cos(), r * th.sin(), 0.0, 0.0), &[e[0], e[1]]);
                flux += v.matrix()[(0, 0)].im * r * (radius / m as f64)
                    * (std::f64::consts::TAU / m as f64);
            }
        }
        let expect = C64::new(0.0, -flux).exp();
        let got = hol.value.matrix()[(0, 0)];
        assert!(
            (got - expect).norm() < 1e-6,
            "holonomy {got} vs flux oracle {expect}"
        );
        // Exact closed form of the flux for this field: 2 c pi R^2.
        let exact = C64::new(0.0, -2.0 * c * std::f64::consts::PI * radius * radius).exp();
        assert!((got - exact).norm() < 1e-6);
    }

    #[test]
    fn gauge_covariance_of_holonomy() {
        let chart = ChartDomain::symmetric(3, 3.0);
        let spec = GroupSpec::su2();
        let a = fcat::random_fourier_one_form(&spec, &chart, 3, 3, 0.5);
        let g = fcat::random_fourier_gauge_map(&spec, &chart, 4, 2, 0.6);
        let gamma = geo::lissajous_loop(3, 5, 1.0);
        let (ag, _) = crate::fields::act_gauge(&a, &AdjointForm::zero(2, 2), &g, &chart);
        let n = 256;
        let h = holonomy_a(&a, &gamma, &chart, n).unwrap();
        let hg = holonomy_a(&ag, &gamma, &chart, n).unwrap();
        let g0 = g.eval(&gamma.at(0.0));
        let expect = g0.inverse().mul(&h.value).mul(&g0);
        let tol = h.error_estimate.unwrap().max(hg.error_estimate.unwrap()).max(1e-9) * 10.0;
        assert!(
            hg.value.dist(&expect) < tol,
            "gauge covariance defect {} tol {tol}",
            hg.value.dist(&expect)
        );
    }

    #[test]
    fn reversal_gives_inverse_transport() {
        let chart = ChartDomain::symmetric(3, 3.0);
        let spec = GroupSpec::su2();
        let a = fcat::random_fourier_one_form(&spec, &chart, 21, 3, 0.7);
        let gamma = geo::lissajous_loop(3, 9, 1.1);
        let n = 128;
        let fwd = frame_factor(&a, &gamma, &chart, n).unwrap().end().clone();
        let bwd = frame_factor(&a, &gamma.reversed(), &chart, n).unwrap().end().clone();
        assert!(fwd.mul(&bwd).dist_identity() < 1e-10);
    }

    #[test]
    fn holonomy_reparam_invariance_within_estimate() {
        let chart = ChartDomain::symmetric(3, 3.0);
        let spec = GroupSpec::su2();
        let a = fcat::random_fourier_one_form(&spec, &chart, 33, 3, 0.6);
        let gamma = geo::lissajous_loop(3, 11, 1.0);
        let warped = gamma
            .reparam(
                Arc::new(|t| t + 0.35 * t * (1.0 - t)),
                Arc::new(|t| 1.0 + 0.35 * (1.0 - 2.0 * t)),
            )
            .unwrap();
        let n = 256;
        let h1 = holonomy_a(&a, &gamma, &chart, n).unwrap();
        let h2 = holonomy_a(&a, &warped, &chart, n).unwrap();
        let budget = h1.error_estimate.unwrap() + h2.error_estimate.unwrap();
        assert!(
            h1.value.dist(&h2.value) <= budget.max(1e-10) * 4.0,
            "reparam defect {} budget {budget}",
            h1.value.dist(&h2.value)
        );
    }

    #[test]
    fn horizontality_residual_flat_and_convergent() {
        let chart = ChartDomain::symmetric(3, 3.0);
        let spec = GroupSpec::su2();
        // Flat connection: zero. Horizontal tangent keeps xi constant.
        let a0 = AdjointForm::zero(1, 2);
        let f0 = crate::fields::curvature_f(&a0, &chart);
        let gamma = geo::lissajous_loop(3, 2, 1.0);
        let rho = |_t: f64| Coord::new(0.3, -0.1, 0.2, 0.0);
        let tangent = crate::chen::lift_tangent(&a0, &gamma, &rho, None, &chart, 64).unwrap();
        assert!(horizontality_residual(&f0, &tangent, &chart) < 1e-14);

        // Catalog su(2) field: residual falls at second order.
        let a = fcat::random_fourier_one_form(&spec, &chart, 51, 3, 0.6);
        let f = crate::fields::curvature_f(&a, &chart);
        let res = |n: usize| {
            let t = crate::chen::lift_tangent(&a, &gamma, &rho, None, &chart, n).unwrap();
            horizontality_residual(&f, &t, &chart)
        };
        let r1 = res(32);
        let r2 = res(64);
        let ratio = r1 / r2;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "horizontality residual ratio {ratio} (r1={r1:.3e}, r2={r2:.3e})"
        );
    }

    #[test]
    fn vertical_tangent_with_flat_field_keeps_xi_constant() {
        let chart = ChartDomain::symmetric(3, 3.0);
        let spec = GroupSpec::su2();
        // Flat but nonzero: Cartan constant connection has F = 0.
        let a = fcat::cartan_constant_one_form(&spec, &chart, 8, 0.5);
        let f = crate::fields::curvature_f(&a, &chart);
        let gamma = geo::lissajous_loop(3, 2, 1.0);
        let xi0 = spec.from_coefficients(&[0.2, -0.4, 0.1]);
        let rho = |_t: f64| Coord::zeros();
        let tangent = crate::chen::lift_tangent(&a, &gamma, &rho, Some(xi0.clone()), &chart, 48).unwrap();
        for i in 0..=48 {
            assert!(tangent.xi(i).sub(&xi0).norm() < 1e-12);
        }
        assert!(horizontality_residual(&f, &tangent, &chart) < 1e-10);
    }
}
