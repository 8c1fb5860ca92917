//! Parametrized paths, squares (paths of paths) and isotopy families, all
//! with analytic derivatives so transport error stays quadrature-limited.

use crate::error::{Error, Result};
use crate::Coord;
use std::sync::Arc;

pub mod catalog;

pub type CurveSampler = Arc<dyn Fn(f64) -> Coord + Send + Sync>;
pub type SurfaceSampler = Arc<dyn Fn(f64, f64) -> Coord + Send + Sync>;

/// Closure tolerance for the loop flag.
pub const LOOP_TOL: f64 = 1e-12;

/// Smooth map `[0,1] -> R^d` with analytic velocity. Piecewise-smooth paths
/// record interior breakpoints; integrators align their grids to them so
/// corners contribute no extra error.
#[derive(Clone)]
pub struct Path {
    map: CurveSampler,
    velocity: CurveSampler,
    pub closed: bool,
    /// Sorted interior parameter values where the velocity may jump.
    pub breakpoints: Vec<f64>,
}

impl Path {
    pub fn new(map: CurveSampler, velocity: CurveSampler, closed: bool) -> Result<Self> {
        let p = Self { map, velocity, closed, breakpoints: Vec::new() };
        p.check_closure()?;
        Ok(p)
    }

    pub fn with_breakpoints(mut self, mut bps: Vec<f64>) -> Self {
        bps.retain(|&t| t > 0.0 && t < 1.0);
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        self.breakpoints = bps;
        self
    }

    fn check_closure(&self) -> Result<()> {
        if self.closed {
            let gap = (self.at(0.0) - self.at(1.0)).norm();
            if gap > LOOP_TOL {
                return Err(Error::Validation(format!(
                    "loop flag set but endpoints differ by {gap:.3e}"
                )));
            }
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Coord {
        (self.map)(t)
    }

    pub fn vel(&self, t: f64) -> Coord {
        (self.velocity)(t)
    }

    /// Same image traversed backwards.
    pub fn reversed(&self) -> Path {
        let m = self.map.clone();
        let v = self.velocity.clone();
        let bps = self.breakpoints.iter().rev().map(|t| 1.0 - t).collect();
        Path {
            map: Arc::new(move |t| m(1.0 - t)),
            velocity: Arc::new(move |t| -v(1.0 - t)),
            closed: self.closed,
            breakpoints: bps,
        }
    }

    /// Monotone reparameterization `t -> phi(t)` with fixed endpoints.
    pub fn reparam(&self, phi: Arc<dyn Fn(f64) -> f64 + Send + Sync>, dphi: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Result<Path> {
        check_monotone(&*phi)?;
        let m = self.map.clone();
        let v = self.velocity.clone();
        let phi2 = phi.clone();
        let bps = Vec::new();
        Ok(Path {
            map: Arc::new(move |t| m(phi(t))),
            velocity: Arc::new(move |t| v(phi2(t)) * dphi(t)),
            closed: self.closed,
            breakpoints: bps,
        })
    }
}

fn check_monotone(phi: &(dyn Fn(f64) -> f64 + Send + Sync)) -> Result<()> {
    if (phi(0.0)).abs() > 1e-12 || (phi(1.0) - 1.0).abs() > 1e-12 {
        return Err(Error::Validation("reparameterization must fix endpoints".into()));
    }
    let samples = 64;
    let mut prev = phi(0.0);
    for i in 1..=samples {
        let t = i as f64 / samples as f64;
        let cur = phi(t);
        if cur <= prev {
            return Err(Error::Validation("reparameterization must be strictly monotone".into()));
        }
        prev = cur;
    }
    Ok(())
}

/// Smooth map `[0,1]^2 -> R^d` with analytic partials. The first variable
/// `s` indexes the path of paths, the second `t` runs along each path.
#[derive(Clone)]
pub struct Square {
    map: SurfaceSampler,
    /// s-derivative.
    d_s: SurfaceSampler,
    /// t-derivative.
    d_t: SurfaceSampler,
    pub loop_s: bool,
    pub loop_t: bool,
}

impl Square {
    pub fn new(
        map: SurfaceSampler,
        d_s: SurfaceSampler,
        d_t: SurfaceSampler,
        loop_s: bool,
        loop_t: bool,
    ) -> Result<Self> {
        let sq = Self { map, d_s, d_t, loop_s, loop_t };
        sq.check_closure()?;
        Ok(sq)
    }

    fn check_closure(&self) -> Result<()> {
        for i in 0..=4 {
            let w = i as f64 / 4.0;
            if self.loop_s && (self.at(0.0, w) - self.at(1.0, w)).norm() > LOOP_TOL {
                return Err(Error::Validation("loop-in-s flag set but s-edges differ".into()));
            }
            if self.loop_t && (self.at(w, 0.0) - self.at(w, 1.0)).norm() > LOOP_TOL {
                return Err(Error::Validation("loop-in-t flag set but t-edges differ".into()));
            }
        }
        Ok(())
    }

    pub fn at(&self, s: f64, t: f64) -> Coord {
        (self.map)(s, t)
    }

    pub fn ds(&self, s: f64, t: f64) -> Coord {
        (self.d_s)(s, t)
    }

    pub fn dt(&self, s: f64, t: f64) -> Coord {
        (self.d_t)(s, t)
    }

    /// The path `t -> G(s, t)` at fixed `s`.
    pub fn slice_t(&self, s: f64) -> Path {
        let m = self.map.clone();
        let d = self.d_t.clone();
        Path {
            map: Arc::new(move |t| m(s, t)),
            velocity: Arc::new(move |t| d(s, t)),
            closed: self.loop_t,
            breakpoints: Vec::new(),
        }
    }

    /// The path `s -> G(s, t)` at fixed `t`.
    pub fn slice_s(&self, t: f64) -> Path {
        let m = self.map.clone();
        let d = self.d_s.clone();
        Path {
            map: Arc::new(move |s| m(s, t)),
            velocity: Arc::new(move |s| d(s, t)),
            closed: self.loop_s,
            breakpoints: Vec::new(),
        }
    }

    /// Largest mixed-partial asymmetry `|d_t G' - d_s G.|` over a coarse
    /// finite-difference grid; a diagnostic for hand-written samplers.
    pub fn mixed_partial_defect(&self, samples: usize) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 1..samples {
            for j in 1..samples {
                let s = i as f64 / samples as f64;
                let t = j as f64 / samples as f64;
                let dt_of_ds = (self.ds(s, t + h) - self.ds(s, t - h)) / (2.0 * h);
                let ds_of_dt = (self.dt(s + h, t) - self.dt(s - h, t)) / (2.0 * h);
                worst = worst.max((dt_of_ds - ds_of_dt).norm());
            }
        }
        worst
    }
}

/// Boundary loop of a square, traversed edge by edge in four quarters:
/// up the left edge, along the top, down the right edge reversed, back
/// along the bottom reversed. Velocities carry the chain-rule factor 4 and
/// the sign of reversed pieces. Corners are exact breakpoints.
pub fn boundary_loop(square: &Square) -> Path {
    let m = square.map.clone();
    let ds = square.d_s.clone();
    let dt = square.d_t.clone();
    let m2 = m.clone();
    let map: CurveSampler = Arc::new(move |tau| {
        if tau <= 0.25 {
            m2(0.0, 4.0 * tau)
        } else if tau <= 0.5 {
            m2(4.0 * tau - 1.0, 1.0)
        } else if tau <= 0.75 {
            m2(1.0, 3.0 - 4.0 * tau)
        } else {
            m2(4.0 - 4.0 * tau, 0.0)
        }
    });
    let velocity: CurveSampler = Arc::new(move |tau| {
        if tau <= 0.25 {
            dt(0.0, 4.0 * tau) * 4.0
        } else if tau <= 0.5 {
            ds(4.0 * tau - 1.0, 1.0) * 4.0
        } else if tau <= 0.75 {
            dt(1.0, 3.0 - 4.0 * tau) * -4.0
        } else {
            ds(4.0 - 4.0 * tau, 0.0) * -4.0
        }
    });
    Path { map, velocity, closed: true, breakpoints: vec![0.25, 0.5, 0.75] }
}

/// Reparameterization of a square by a monotone pair `(phi_s, phi_t)` with
/// fixed endpoints; same image, chain-rule partials.
pub struct MonotonePair {
    pub phi_s: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub dphi_s: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub phi_t: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub dphi_t: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl MonotonePair {
    pub fn identity() -> Self {
        Self {
            phi_s: Arc::new(|s| s),
            dphi_s: Arc::new(|_| 1.0),
            phi_t: Arc::new(|t| t),
            dphi_t: Arc::new(|_| 1.0),
        }
    }

    /// `phi(x) = x + a x (1 - x)`, monotone for `|a| < 1`.
    pub fn quadratic(a_s: f64, a_t: f64) -> Self {
        Self {
            phi_s: Arc::new(move |s| s + a_s * s * (1.0 - s)),
            dphi_s: Arc::new(move |s| 1.0 + a_s * (1.0 - 2.0 * s)),
            phi_t: Arc::new(move |t| t + a_t * t * (1.0 - t)),
            dphi_t: Arc::new(move |t| 1.0 + a_t * (1.0 - 2.0 * t)),
        }
    }
}

pub fn reparam_square(square: &Square, phi: &MonotonePair) -> Result<Square> {
    check_monotone(&*phi.phi_s)?;
    check_monotone(&*phi.phi_t)?;
    let m = square.map.clone();
    let ds = square.d_s.clone();
    let dt = square.d_t.clone();
    let (ps, dps) = (phi.phi_s.clone(), phi.dphi_s.clone());
    let (pt, dpt) = (phi.phi_t.clone(), phi.dphi_t.clone());
    let (ps2, pt2) = (ps.clone(), pt.clone());
    let (ps3, pt3) = (ps.clone(), pt.clone());
    Ok(Square {
        map: Arc::new(move |s, t| m(ps(s), pt(t))),
        d_s: Arc::new(move |s, t| ds(ps2(s), pt2(t)) * dps(s)),
        d_t: Arc::new(move |s, t| dt(ps3(s), pt3(t)) * dpt(t)),
        loop_s: square.loop_s,
        loop_t: square.loop_t,
    })
}

// ---------------------------------------------------------------------------
// Isotopy families
// ---------------------------------------------------------------------------

/// Conditions a family of squares may declare: fixed corner (g1), fixed
/// surface image (g2), fixed bottom-edge image (g3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GConditions {
    pub g1: bool,
    pub g2: bool,
    pub g3: bool,
}

/// Family of squares `r -> G_r` with the analytic deformation field
/// `Z_r(s,t) = d/dr G_r(s,t)`.
#[derive(Clone)]
pub struct IsotopyFamily {
    square_at: Arc<dyn Fn(f64) -> Square + Send + Sync>,
    z_field: Arc<dyn Fn(f64, f64, f64) -> Coord + Send + Sync>,
    pub conditions: GConditions,
}

impl IsotopyFamily {
    pub fn new(
        square_at: Arc<dyn Fn(f64) -> Square + Send + Sync>,
        z_field: Arc<dyn Fn(f64, f64, f64) -> Coord + Send + Sync>,
        conditions: GConditions,
    ) -> Self {
        Self { square_at, z_field, conditions }
    }

    pub fn square(&self, r: f64) -> Square {
        (self.square_at)(r)
    }

    /// Deformation velocity `Z_r(s, t)`.
    pub fn z(&self, r: f64, s: f64, t: f64) -> Coord {
        (self.z_field)(r, s, t)
    }

    /// Residuals of the declared conditions at sampled `(r, s, t)`:
    /// corner velocity, in-surface tangency defect, and the `Z_r(1,0)`
    /// norm, each maximized over the sample grid.
    pub fn condition_residuals(&self, samples: usize) -> (f64, f64, f64) {
        let mut corner: f64 = 0.0;
        let mut tangency: f64 = 0.0;
        let mut pinned_end: f64 = 0.0;
        for ir in 0..=samples {
            let r = ir as f64 / samples as f64;
            let sq = self.square(r);
            corner = corner.max(self.z(r, 0.0, 0.0).norm());
            pinned_end = pinned_end.max(self.z(r, 1.0, 0.0).norm());
            for is in 0..=samples {
                for it in 0..=samples {
                    let s = is as f64 / samples as f64;
                    let t = it as f64 / samples as f64;
                    let z = self.z(r, s, t);
                    let du = sq.ds(s, t);
                    let dv = sq.dt(s, t);
                    tangency = tangency.max(normal_component(&z, &du, &dv));
                }
            }
        }
        (corner, tangency, pinned_end)
    }
}

/// Norm of the component of `z` orthogonal to span{u, v}.
fn normal_component(z: &Coord, u: &Coord, v: &Coord) -> f64 {
    // Gram-Schmidt on the (possibly nearly dependent) pair.
    let uu = u.dot(u);
    if uu < 1e-30 {
        return z.norm();
    }
    let e1 = u / uu.sqrt();
    let mut w = v - e1 * v.dot(&e1);
    let mut res = z - e1 * z.dot(&e1);
    let ww = w.dot(&w);
    if ww > 1e-24 {
        w /= ww.sqrt();
        res -= w * res.dot(&w);
    }
    res.norm()
}

/// Kinds of isotopy constructible from a base square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsotopyKind {
    /// Edge-preserving reparameterization flow; satisfies g1, g2, g3.
    InSurfaceFlow,
    /// Flow fixing the whole parameter boundary pointwise; g1, g2, g3 and
    /// `Z` vanishes on the boundary.
    BoundaryFixingFlow,
}

/// In-surface reparameterization families of a base square.
///
/// Both kinds act by `G_r = G_0 (phi_r)` for a family of diffeomorphisms of
/// the parameter square, so the swept image never changes.
pub fn make_isotopy(kind: IsotopyKind, base: &Square, strength: f64) -> Result<IsotopyFamily> {
    if strength.abs() >= 0.9 {
        return Err(Error::Validation("isotopy strength must stay below 0.9".into()));
    }
    let conditions = GConditions { g1: true, g2: true, g3: true };
    match kind {
        IsotopyKind::InSurfaceFlow => {
            // u_r(s,t) = s + r k s(1-s)(1 + sin(pi t)/2)
            // w_r(s,t) = t + r k t(1-t)(1 + cos(pi s)/2)
            // Each edge of the parameter square maps into itself.
            let b = base.clone();
            let b2 = base.clone();
            let k = strength;
            let phi = move |r: f64, s: f64, t: f64| -> (f64, f64, f64, f64, f64, f64) {
                use std::f64::consts::PI;
                let u = s + r * k * s * (1.0 - s) * (1.0 + 0.5 * (PI * t).sin());
                let w = t + r * k * t * (1.0 - t) * (1.0 + 0.5 * (PI * s).cos());
                let du_ds = 1.0 + r * k * (1.0 - 2.0 * s) * (1.0 + 0.5 * (PI * t).sin());
                let du_dt = r * k * s * (1.0 - s) * 0.5 * PI * (PI * t).cos();
                let dw_ds = -r * k * t * (1.0 - t) * 0.5 * PI * (PI * s).sin();
                let dw_dt = 1.0 + r * k * (1.0 - 2.0 * t) * (1.0 + 0.5 * (PI * s).cos());
                (u, w, du_ds, du_dt, dw_ds, dw_dt)
            };
            let phi_r = phi;
            let square_at = Arc::new(move |r: f64| {
                let b = b.clone();
                let bm = b.clone();
                let bs = b.clone();
                let map: SurfaceSampler = Arc::new(move |s, t| {
                    let (u, w, ..) = phi_r(r, s, t);
                    bm.at(u, w)
                });
                let d_s: SurfaceSampler = Arc::new(move |s, t| {
                    let (u, w, du_ds, _, dw_ds, _) = phi_r(r, s, t);
                    bs.ds(u, w) * du_ds + bs.dt(u, w) * dw_ds
                });
                let bt = b.clone();
                let d_t: SurfaceSampler = Arc::new(move |s, t| {
                    let (u, w, _, du_dt, _, dw_dt) = phi_r(r, s, t);
                    bt.ds(u, w) * du_dt + bt.dt(u, w) * dw_dt
                });
                Square { map, d_s, d_t, loop_s: b.loop_s, loop_t: b.loop_t }
            });
            let z_field = Arc::new(move |r: f64, s: f64, t: f64| {
                use std::f64::consts::PI;
                let (u, w, ..) = phi(r, s, t);
                let du_dr = k * s * (1.0 - s) * (1.0 + 0.5 * (PI * t).sin());
                let dw_dr = k * t * (1.0 - t) * (1.0 + 0.5 * (PI * s).cos());
                b2.ds(u, w) * du_dr + b2.dt(u, w) * dw_dr
            });
            Ok(IsotopyFamily::new(square_at, z_field, conditions))
        }
        IsotopyKind::BoundaryFixingFlow => {
            // u_r = s + r k sin(pi s) sin(pi t) * s(1-s)-free variant that
            // still fixes the boundary pointwise in both variables.
            let b = base.clone();
            let b2 = base.clone();
            let k = strength / std::f64::consts::PI;
            let phi = move |r: f64, s: f64, t: f64| -> (f64, f64, f64, f64, f64, f64) {
                use std::f64::consts::PI;
                let bumps = (PI * s).sin();
                let bumpt = (PI * t).sin();
                let u = s + r * k * bumps * bumpt;
                let w = t - r * k * bumps * bumpt;
                let du_ds = 1.0 + r * k * PI * (PI * s).cos() * bumpt;
                let du_dt = r * k * bumps * PI * (PI * t).cos();
                let dw_ds = -r * k * PI * (PI * s).cos() * bumpt;
                let dw_dt = 1.0 - r * k * bumps * PI * (PI * t).cos();
                (u, w, du_ds, du_dt, dw_ds, dw_dt)
            };
            let phi_r = phi;
            let square_at = Arc::new(move |r: f64| {
                let b = b.clone();
                let bm = b.clone();
                let bs = b.clone();
                let map: SurfaceSampler = Arc::new(move |s, t| {
                    let (u, w, ..) = phi_r(r, s, t);
                    bm.at(u, w)
                });
                let d_s: SurfaceSampler = Arc::new(move |s, t| {
                    let (u, w, du_ds, _, dw_ds, _) = phi_r(r, s, t);
                    bs.ds(u, w) * du_ds + bs.dt(u, w) * dw_ds
                });
                let bt = b.clone();
                let d_t: SurfaceSampler = Arc::new(move |s, t| {
                    let (u, w, _, du_dt, _, dw_dt) = phi_r(r, s, t);
                    bt.ds(u, w) * du_dt + bt.dt(u, w) * dw_dt
                });
                Square { map, d_s, d_t, loop_s: b.loop_s, loop_t: b.loop_t }
            });
            let z_field = Arc::new(move |r: f64, s: f64, t: f64| {
                use std::f64::consts::PI;
                let (u, w, ..) = phi(r, s, t);
                let du_dr = k * (PI * s).sin() * (PI * t).sin();
                let dw_dr = -du_dr;
                b2.ds(u, w) * du_dr + b2.dt(u, w) * dw_dr
            });
            Ok(IsotopyFamily::new(square_at, z_field, conditions))
        }
    }
}

/// Circle-shift family on a square that is a loop in `t`: the bottom path
/// drifts to other `t`-circles, so the bottom-edge image is NOT preserved
/// (g3 fails) while the corner and the swept surface are (g1, g2).
pub fn make_t_shift_isotopy(base: &Square, strength: f64) -> Result<IsotopyFamily> {
    if !base.loop_t {
        return Err(Error::Validation("t-shift isotopy needs a loop-in-t square".into()));
    }
    let b = base.clone();
    let b2 = base.clone();
    let k = strength;
    // psi(0) = 0 keeps the base corner fixed.
    let psi = move |s: f64| k * s * (2.0 - s);
    let dpsi = move |s: f64| k * (2.0 - 2.0 * s);
    let wrap = |t: f64| t - t.floor();
    let square_at = Arc::new(move |r: f64| {
        let bm = b.clone();
        let bs = b.clone();
        let bt = b.clone();
        let map: SurfaceSampler = Arc::new(move |s, t| bm.at(s, wrap(t + r * psi(s))));
        let d_s: SurfaceSampler = Arc::new(move |s, t| {
            let w = wrap(t + r * psi(s));
            bs.ds(s, w) + bs.dt(s, w) * (r * dpsi(s))
        });
        let d_t: SurfaceSampler = Arc::new(move |s, t| bt.dt(s, wrap(t + r * psi(s))));
        Square { map, d_s, d_t, loop_s: b.loop_s, loop_t: true }
    });
    let z_field = Arc::new(move |r: f64, s: f64, t: f64| {
        let w = t + r * psi(s);
        b2.dt(s, w - w.floor()) * psi(s)
    });
    Ok(IsotopyFamily::new(
        square_at,
        z_field,
        GConditions { g1: true, g2: true, g3: false },
    ))
}

/// Negative control: displaces the surface along a fixed direction with an
/// interior bump, violating the fixed-image condition g2 (the corner stays
/// put, so g1 holds).
pub fn make_normal_displacement_family(base: &Square, direction: Coord, strength: f64) -> IsotopyFamily {
    let b = base.clone();
    let b2 = base.clone();
    let bump = |s: f64, t: f64| {
        use std::f64::consts::PI;
        (PI * s).sin() * (PI * t).sin()
    };
    let square_at = Arc::new(move |r: f64| {
        let bm = b.clone();
        let bs = b.clone();
        let bt = b.clone();
        let dir = direction;
        let map: SurfaceSampler = Arc::new(move |s, t| bm.at(s, t) + dir * (r * strength * bump(s, t)));
        let d_s: SurfaceSampler = Arc::new(move |s, t| {
            use std::f64::consts::PI;
            bs.ds(s, t) + dir * (r * strength * PI * (PI * s).cos() * (PI * t).sin())
        });
        let d_t: SurfaceSampler = Arc::new(move |s, t| {
            use std::f64::consts::PI;
            bt.dt(s, t) + dir * (r * strength * (PI * s).sin() * PI * (PI * t).cos())
        });
        Square { map, d_s, d_t, loop_s: false, loop_t: b.loop_t }
    });
    let z_field = Arc::new(move |_r: f64, s: f64, t: f64| {
        let _ = &b2;
        direction * (strength * bump(s, t))
    });
    IsotopyFamily::new(square_at, z_field, GConditions { g1: true, g2: false, g3: true })
}
