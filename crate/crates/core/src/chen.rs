//! Line integrals and ordered double integrals of adjoint-valued forms
//! along a path (Chen integrals and brackets), admissible path-tangent
//! construction, and the curvature of the path-space connection with an
//! independent small-square commutator oracle.

use crate::error::{Error, Result};
use crate::fields::{cov_ext_derivative, curvature_f, AdjointForm, ChartDomain};
use crate::geom::{Path, Square};
use crate::liealg::{adjoint_act, bracket, cartan_residual, log_map, AlgebraElement, GroupSpec};
use crate::pathspace::{surface_transport, PathTangent, SpecialConnection, SurfaceGrids};
use crate::transport::{frame_factor, FrameFactor};
use crate::Coord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Builds an admissible tangent along `gamma`: the base field `rho` sampled
/// on the half-step grid and the vertical component propagated by
/// `xi' = -Ad_{h^{-1}} F_A(rho, gamma')`, starting from `xi0` (zero when
/// omitted).
pub fn lift_tangent(
    a: &AdjointForm,
    gamma: &Path,
    rho: &(dyn Fn(f64) -> Coord + Sync),
    xi0: Option<AlgebraElement>,
    chart: &ChartDomain,
    n: usize,
) -> Result<PathTangent> {
    if n == 0 {
        return Err(Error::Validation("lift_tangent needs at least one step".into()));
    }
    let frame = frame_factor(a, gamma, chart, n)?;
    let f = curvature_f(a, chart);
    let dt = 1.0 / n as f64;
    let mut xi = xi0.unwrap_or_else(|| AlgebraElement::zero(a.algebra_dim));
    let mut xi_nodes = Vec::with_capacity(n + 1);
    xi_nodes.push(xi.clone());
    for i in 0..n {
        let t = (i as f64 + 0.5) * dt;
        let x = gamma.at(t);
        let val = f.eval(&x, &[rho(t), gamma.vel(t)]);
        let twisted = adjoint_act(&frame.mid(i).inverse(), &val);
        xi = xi.sub(&twisted.scale(dt));
        xi_nodes.push(xi.clone());
    }
    let x_vals: Vec<Coord> = (0..=2 * n).map(|j| rho(j as f64 / (2.0 * n as f64))).collect();
    let x_fn: Arc<dyn Fn(f64) -> Coord + Send + Sync> = {
        let vals = x_vals;
        let two_n = 2 * n;
        Arc::new(move |t| {
            let pos = t * two_n as f64;
            let idx = pos.round() as usize;
            debug_assert!(
                (pos - idx as f64).abs() < 1e-9,
                "tangent sampled off its half-step grid: t = {t}"
            );
            vals[idx.min(two_n)]
        })
    };
    Ok(PathTangent::from_parts(gamma.clone(), x_fn, xi_nodes, frame))
}

/// Frame-twisted line integral of a degree-`p` form along a path:
/// `Int_0^1 Ad_{h^{-1}(t)} w(X_1(t), .., X_{p-1}(t), gamma'(t)) dt`
/// by the midpoint rule on the frame grid.
pub fn chen_line(
    w: &AdjointForm,
    gamma: &Path,
    frame: &FrameFactor,
    tangents: &[&PathTangent],
    _chart: &ChartDomain,
) -> AlgebraElement {
    assert_eq!(w.degree, tangents.len() + 1, "degree / tangent count mismatch");
    let n = frame.n();
    for t in tangents {
        assert_eq!(t.n(), n, "tangent grids must match the frame grid");
    }
    let dt = 1.0 / n as f64;
    let mut acc = AlgebraElement::zero(w.algebra_dim);
    for j in 0..n {
        let t = (j as f64 + 0.5) * dt;
        let x = gamma.at(t);
        let mut args: Vec<Coord> = tangents.iter().map(|tan| tan.x_at(t)).collect();
        args.push(gamma.vel(t));
        let val = w.eval(&x, &args);
        acc = acc.add(&adjoint_act(&frame.mid(j).inverse(), &val));
    }
    acc.scale(dt)
}

/// How the measure factors of the ordered double integral are placed in
/// the wedge word when grading signs are computed; the two displays of the
/// bracket. Values agree once the trailing form carries its Koszul
/// prefactor `(-1)^(deg w2 - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketDisplay {
    /// Slot word `(w1-slots, dt1, w2-slots, dt2)`.
    DtInterleaved,
    /// Slot word `(w1-slots, w2-slots, dt1, dt2)` with the explicit
    /// prefactor `(-1)^(deg w2 - 1)`.
    DtTrailing,
}

/// Ordered double integral over `0 < t1 < t2 < 1` of
/// `[w1(.., gamma'(t1)), w2(.., gamma'(t2))]` with the path tangents
/// distributed over the form slots by shuffles. The plain-shuffle value
/// (no measure grading) is the one entering the curvature formula; it is
/// pinned by the identity `{B;B} = (1/2)[Int B, Int B]`.
pub fn chen_bracket(
    w1: &AdjointForm,
    w2: &AdjointForm,
    gamma: &Path,
    frame: &FrameFactor,
    tangents: &[&PathTangent],
    chart: &ChartDomain,
) -> AlgebraElement {
    bracket_impl(w1, w2, gamma, frame, tangents, chart, None)
}

/// The bracket computed with full graded bookkeeping of the measure slots
/// per the chosen display; used by the sign-identity tests.
pub fn chen_bracket_display(
    w1: &AdjointForm,
    w2: &AdjointForm,
    gamma: &Path,
    frame: &FrameFactor,
    tangents: &[&PathTangent],
    chart: &ChartDomain,
    display: BracketDisplay,
) -> AlgebraElement {
    bracket_impl(w1, w2, gamma, frame, tangents, chart, Some(display))
}

fn bracket_impl(
    w1: &AdjointForm,
    w2: &AdjointForm,
    gamma: &Path,
    frame: &FrameFactor,
    tangents: &[&PathTangent],
    _chart: &ChartDomain,
    display: Option<BracketDisplay>,
) -> AlgebraElement {
    let (p1, p2) = (w1.degree, w2.degree);
    assert!(p1 >= 1 && p2 >= 1, "bracket needs degrees >= 1");
    let k = tangents.len();
    assert_eq!(k, p1 + p2 - 2, "bracket needs deg w1 + deg w2 - 2 tangents");
    let n = frame.n();
    for t in tangents {
        assert_eq!(t.n(), n, "tangent grids must match the frame grid");
    }
    let dt = 1.0 / n as f64;

    // Twisted slice evaluation of one factor at a half-grid position
    // `j_half` (0..=2n), with the chosen tangents in the leading slots.
    let factor = |w: &AdjointForm, subset: &[usize], j_half: usize| -> AlgebraElement {
        let t = j_half as f64 / (2.0 * n as f64);
        let x = gamma.at(t);
        let mut args: Vec<Coord> = subset.iter().map(|&i| tangents[i].x_at(t)).collect();
        args.push(gamma.vel(t));
        let h = half_frame(frame, j_half);
        adjoint_act(&h.inverse(), &w.eval(&x, &args))
    };

    let mut total = AlgebraElement::zero(w1.algebra_dim);
    for (subset1, subset2) in shuffles(k, p1 - 1) {
        // Prefix sums of the first factor at outer midpoints: the t1
        // integral of the ordered region, with a trapezoid tail on the
        // half cell ending at each outer midpoint.
        let w1_nodes: Vec<AlgebraElement> =
            (0..=n).map(|i| factor(w1, &subset1, 2 * i)).collect();
        let w1_mids: Vec<AlgebraElement> =
            (0..n).map(|i| factor(w1, &subset1, 2 * i + 1)).collect();
        let mut prefix = AlgebraElement::zero(w1.algebra_dim);
        let mut acc = AlgebraElement::zero(w1.algebra_dim);
        for j in 0..n {
            // Int_0^{(j+1/2) dt} w1 = full cells + trapezoid half cell.
            let tail = w1_nodes[j].add(&w1_mids[j]).scale(0.25 * dt);
            let p_mid = prefix.add(&tail);
            let w2_mid = factor(w2, &subset2, 2 * j + 1);
            acc = acc.add(&bracket(&p_mid, &w2_mid));
            prefix = prefix.add(&w1_mids[j].scale(dt));
        }
        // Shuffle sign: the parity of the slot-word assignment. The plain
        // reading counts inversions of the tangent indices only; the two
        // graded displays insert the measure-slot indices `k`, `k + 1` at
        // their written positions, and the trailing display additionally
        // carries its explicit prefactor.
        let sign = match display {
            None => parity(subset1.iter().chain(subset2.iter()).copied()),
            Some(BracketDisplay::DtInterleaved) => parity(
                subset1
                    .iter()
                    .copied()
                    .chain(std::iter::once(k))
                    .chain(subset2.iter().copied())
                    .chain(std::iter::once(k + 1)),
            ),
            Some(BracketDisplay::DtTrailing) => {
                let prefactor = if (p2 - 1) % 2 == 1 { -1.0 } else { 1.0 };
                prefactor
                    * parity(
                        subset1
                            .iter()
                            .copied()
                            .chain(subset2.iter().copied())
                            .chain([k, k + 1]),
                    )
            }
        };
        total = total.add(&acc.scale(sign * dt));
    }
    total
}

/// Sign of the permutation given as a sequence of distinct indices.
fn parity(seq: impl Iterator<Item = usize>) -> f64 {
    let seq: Vec<usize> = seq.collect();
    let mut inversions = 0usize;
    for a in 0..seq.len() {
        for b in (a + 1)..seq.len() {
            if seq[a] > seq[b] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Frame at half-grid index `j` (0..=2n) of a single-segment frame factor.
fn half_frame(frame: &FrameFactor, j_half: usize) -> crate::liealg::GroupElement {
    if j_half % 2 == 0 {
        frame.node(j_half / 2).clone()
    } else {
        frame.mid(j_half / 2).clone()
    }
}

/// All `(subset, complement)` splittings of `0..k` with `m` elements going
/// to the first block in order.
fn shuffles(k: usize, m: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    let mut indices: Vec<usize> = Vec::new();
    fn rec(start: usize, k: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, Vec<usize>)>) {
        if cur.len() == m {
            let complement: Vec<usize> = (0..k).filter(|i| !cur.contains(i)).collect();
            out.push((cur.clone(), complement));
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, m, cur, out);
            cur.pop();
        }
    }
    rec(0, k, m, &mut indices, &mut out);
    out
}

/// The curvature of the pair `(A, B)` on path space, evaluated on two
/// admissible tangents:
/// `F_A(X(0), Y(0)) - Ad_{h(1)^{-1}} B(X(1), Y(1)) + B(X(0), Y(0))
///  + Int Ad_{h^{-1}} d_A B(X, Y, gamma') + {B + F_A ; B}(X, Y)`.
pub fn curvature_fab(
    a: &AdjointForm,
    b: &AdjointForm,
    x: &PathTangent,
    y: &PathTangent,
    chart: &ChartDomain,
) -> Result<AlgebraElement> {
    let n = x.n();
    if y.n() != n {
        return Err(Error::Validation("tangents must share one grid".into()));
    }
    let gamma = x.gamma();
    let frame = x.frame();
    let f_a = curvature_f(a, chart);

    let x0 = gamma.at(0.0);
    let x1 = gamma.at(1.0);
    let (xv0, yv0) = (x.x_at(0.0), y.x_at(0.0));
    let (xv1, yv1) = (x.x_at(1.0), y.x_at(1.0));

    let term_f0 = f_a.eval(&x0, &[xv0, yv0]);
    let h_end_inv = frame.end().inverse();
    let term_b1 = adjoint_act(&h_end_inv, &b.eval(&x1, &[xv1, yv1])).scale(-1.0);
    let term_b0 = b.eval(&x0, &[xv0, yv0]);

    let dab = cov_ext_derivative(a, b, chart);
    let term_dab = chen_line(&dab, gamma, frame, &[x, y], chart);

    let bpf = b.add(&f_a);
    let term_chen = chen_bracket(&bpf, b, gamma, frame, &[x, y], chart);

    Ok(term_f0
        .add(&term_b1)
        .add(&term_b0)
        .add(&term_dab)
        .add(&term_chen))
}

/// Independent oracle for the path-space curvature: the log of the ordered
/// product of surface transports around the `eps`-square in path space
/// spanned by two vector fields along `gamma`, normalized by `-eps^2`.
/// Agrees with `curvature_fab` to `O(eps)`.
pub struct VectorFieldAlongPath {
    pub val: Arc<dyn Fn(f64) -> Coord + Send + Sync>,
    pub dot: Arc<dyn Fn(f64) -> Coord + Send + Sync>,
}

pub fn commutator_loop_estimate(
    a: &AdjointForm,
    b: &AdjointForm,
    gamma: &Path,
    x: &VectorFieldAlongPath,
    y: &VectorFieldAlongPath,
    eps: f64,
    chart: &ChartDomain,
    grids: SurfaceGrids,
) -> Result<AlgebraElement> {
    let conn = SpecialConnection::pair(a.clone(), b.clone());
    // Edges of the (u, v) square, counterclockwise: u up, v up, u down,
    // v down. Each edge is itself a path of paths.
    let edge = |ux0: f64, vy0: f64, du: f64, dv: f64| -> Result<crate::liealg::GroupElement> {
        let g = gamma.clone();
        let g2 = gamma.clone();
        let (xv, xd) = (x.val.clone(), x.dot.clone());
        let (yv, yd) = (y.val.clone(), y.dot.clone());
        let (xv2, yv2) = (x.val.clone(), y.val.clone());
        let map: crate::geom::SurfaceSampler = Arc::new(move |s, t| {
            let u = (ux0 + s * du) * eps;
            let v = (vy0 + s * dv) * eps;
            g.at(t) + xv(t) * u + yv(t) * v
        });
        let d_s: crate::geom::SurfaceSampler =
            Arc::new(move |_s, t| xv2(t) * (du * eps) + yv2(t) * (dv * eps));
        let d_t: crate::geom::SurfaceSampler = Arc::new(move |s, t| {
            let u = (ux0 + s * du) * eps;
            let v = (vy0 + s * dv) * eps;
            g2.vel(t) + xd(t) * u + yd(t) * v
        });
        let sq = Square::new(map, d_s, d_t, false, false)?;
        Ok(surface_transport(&conn, &sq, chart, grids)?.capital_k_end())
    };
    let k1 = edge(0.0, 0.0, 1.0, 0.0)?;
    let k2 = edge(1.0, 0.0, 0.0, 1.0)?;
    let k3 = edge(1.0, 1.0, -1.0, 0.0)?;
    let k4 = edge(0.0, 1.0, 0.0, -1.0)?;
    let loop_el = k4.mul(&k3).mul(&k2).mul(&k1);
    Ok(log_map(&loop_el)?.scale(-1.0 / (eps * eps)))
}

/// Residual triple of the flatness conditions of the pair: the sampled sup
/// norms of `F_A` and `d_A B`, and the largest distance of sampled values
/// of `A` and `B` from the Cartan span.
#[derive(Debug, Clone, Copy)]
pub struct FlatnessResiduals {
    pub curvature: f64,
    pub covariant_db: f64,
    pub cartan: f64,
}

pub fn flatness_check(
    a: &AdjointForm,
    b: &AdjointForm,
    spec: &GroupSpec,
    chart: &ChartDomain,
    samples: usize,
    seed: u64,
) -> FlatnessResiduals {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = curvature_f(a, chart);
    let dab = cov_ext_derivative(a, b, chart);
    let mut r_f: f64 = 0.0;
    let mut r_dab: f64 = 0.0;
    let mut r_cartan: f64 = 0.0;
    for _ in 0..samples {
        let mut x = Coord::zeros();
        for i in 0..chart.dim {
            x[i] = rng.gen_range(chart.bounds[i][0] * 0.9..chart.bounds[i][1] * 0.9);
        }
        let mut vs: Vec<Coord> = Vec::new();
        for _ in 0..3 {
            let mut v = Coord::zeros();
            for i in 0..chart.dim {
                v[i] = rng.gen_range(-1.0..1.0);
            }
            vs.push(v);
        }
        r_f = r_f.max(f.eval(&x, &vs[0..2]).norm());
        if chart.dim >= 3 {
            r_dab = r_dab.max(dab.eval(&x, &vs[0..3]).norm());
        }
        r_cartan = r_cartan.max(cartan_residual(&a.eval(&x, &vs[0..1]), spec));
        r_cartan = r_cartan.max(cartan_residual(&b.eval(&x, &vs[0..2]), spec));
    }
    FlatnessResiduals { curvature: r_f, covariant_db: r_dab, cartan: r_cartan }
}
