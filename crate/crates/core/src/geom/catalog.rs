//! Geometry constructors: circles and loops for ordinary holonomy, squares
//! for surface transport, everything with analytic derivatives.

use super::{Path, Square};
use crate::Coord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Circle of radius `r` centered at `c` in the coordinate plane `axes`.
pub fn circle(r: f64, c: Coord, axes: (usize, usize)) -> Path {
    let (i, j) = axes;
    Path::new(
        Arc::new(move |t| {
            let mut p = c;
            p[i] += r * (TAU * t).cos();
            p[j] += r * (TAU * t).sin();
            p
        }),
        Arc::new(move |t| {
            let mut v = Coord::zeros();
            v[i] = -r * TAU * (TAU * t).sin();
            v[j] = r * TAU * (TAU * t).cos();
            v
        }),
        true,
    )
    .expect("circle closes")
}

/// Straight segment from `a` to `b`.
pub fn segment(a: Coord, b: Coord) -> Path {
    Path::new(
        Arc::new(move |t| a + (b - a) * t),
        Arc::new(move |_| b - a),
        false,
    )
    .expect("segment is open")
}

/// Smooth closed Lissajous-style loop with seeded harmonics, contained in
/// a box of the given radius around the origin.
pub fn lissajous_loop(dim: usize, seed: u64, radius: f64) -> Path {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1155);
    let mut freq = [0.0; 4];
    let mut phase = [0.0; 4];
    let mut amp = [0.0; 4];
    for k in 0..dim {
        freq[k] = rng.gen_range(1..=3) as f64;
        phase[k] = rng.gen_range(0.0..TAU);
        amp[k] = radius * rng.gen_range(0.4..1.0);
    }
    Path::new(
        Arc::new(move |t| {
            let mut p = Coord::zeros();
            for k in 0..dim {
                p[k] = amp[k] * (TAU * freq[k] * t + phase[k]).sin();
            }
            p
        }),
        Arc::new(move |t| {
            let mut v = Coord::zeros();
            for k in 0..dim {
                v[k] = amp[k] * TAU * freq[k] * (TAU * freq[k] * t + phase[k]).cos();
            }
            v
        }),
        true,
    )
    .expect("harmonic loop closes")
}

/// Affine square `G(s,t) = origin + s u + t v`.
pub fn planar_square(origin: Coord, u: Coord, v: Coord) -> Square {
    Square::new(
        Arc::new(move |s, t| origin + u * s + v * t),
        Arc::new(move |_, _| u),
        Arc::new(move |_, _| v),
        false,
        false,
    )
    .expect("planar square is open")
}

/// Cylinder swept by circles: loop in `t`, open in `s` (the `s` variable
/// climbs the axis).
pub fn cylinder(radius: f64, height: f64) -> Square {
    Square::new(
        Arc::new(move |s, t| {
            Coord::new(radius * (TAU * t).cos(), radius * (TAU * t).sin(), height * s, 0.0)
        }),
        Arc::new(move |_, _| Coord::new(0.0, 0.0, height, 0.0)),
        Arc::new(move |_, t| {
            Coord::new(-radius * TAU * (TAU * t).sin(), radius * TAU * (TAU * t).cos(), 0.0, 0.0)
        }),
        false,
        true,
    )
    .expect("cylinder closes in t")
}

/// Torus square, loop in both variables (a loop of loops).
pub fn torus_square(major: f64, minor: f64) -> Square {
    Square::new(
        Arc::new(move |s, t| {
            let w = major + minor * (TAU * t).cos();
            Coord::new(w * (TAU * s).cos(), w * (TAU * s).sin(), minor * (TAU * t).sin(), 0.0)
        }),
        Arc::new(move |s, t| {
            let w = major + minor * (TAU * t).cos();
            Coord::new(-w * TAU * (TAU * s).sin(), w * TAU * (TAU * s).cos(), 0.0, 0.0)
        }),
        Arc::new(move |s, t| {
            let dw = -minor * TAU * (TAU * t).sin();
            Coord::new(
                dw * (TAU * s).cos(),
                dw * (TAU * s).sin(),
                minor * TAU * (TAU * t).cos(),
                0.0,
            )
        }),
        true,
        true,
    )
    .expect("torus closes in both variables")
}

/// Open square warped by seeded harmonics that vanish on no particular
/// edge; amplitude controls the distortion away from the flat square.
pub fn lissajous_square(dim: usize, seed: u64, amplitude: f64) -> Square {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x50a8);
    let mut fs = [0.0; 4];
    let mut ft = [0.0; 4];
    let mut ph = [0.0; 4];
    let mut amp = [0.0; 4];
    for k in 0..dim {
        fs[k] = rng.gen_range(1..=2) as f64;
        ft[k] = rng.gen_range(1..=2) as f64;
        ph[k] = rng.gen_range(0.0..TAU);
        amp[k] = amplitude * rng.gen_range(0.3..1.0);
    }
    let base = move |s: f64, t: f64| {
        let mut p = Coord::zeros();
        p[0] += s;
        if dim > 1 {
            p[1] += t;
        }
        for k in 0..dim {
            p[k] += amp[k] * (std::f64::consts::PI * fs[k] * s + ph[k]).sin()
                * (std::f64::consts::PI * ft[k] * t).sin();
        }
        p
    };
    Square::new(
        Arc::new(base),
        Arc::new(move |s, t| {
            use std::f64::consts::PI;
            let mut v = Coord::zeros();
            v[0] += 1.0;
            for k in 0..dim {
                v[k] += amp[k] * PI * fs[k] * (PI * fs[k] * s + ph[k]).cos() * (PI * ft[k] * t).sin();
            }
            v
        }),
        Arc::new(move |s, t| {
            use std::f64::consts::PI;
            let mut v = Coord::zeros();
            if dim > 1 {
                v[1] += 1.0;
            }
            for k in 0..dim {
                v[k] += amp[k] * (PI * fs[k] * s + ph[k]).sin() * PI * ft[k] * (PI * ft[k] * t).cos();
            }
            v
        }),
        false,
        false,
    )
    .expect("warped square is open")
}

/// Loop of loops obtained by sweeping a seeded closed loop around a torus
/// frame; closed in `s` and in `t`.
pub fn warped_torus_square(seed: u64, major: f64, minor: f64, amplitude: f64) -> Square {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70f5);
    let a1 = amplitude * rng.gen_range(0.2..1.0);
    let p1 = rng.gen_range(0.0..TAU);
    let f1 = rng.gen_range(1..=2) as f64;
    let g1 = rng.gen_range(1..=2) as f64;
    let warp = move |s: f64, t: f64| minor * (1.0 + a1 * (TAU * f1 * s + p1).sin() * (TAU * g1 * t).cos());
    let dwarp_ds = move |s: f64, t: f64| minor * a1 * TAU * f1 * (TAU * f1 * s + p1).cos() * (TAU * g1 * t).cos();
    let dwarp_dt = move |s: f64, t: f64| -minor * a1 * g1 * TAU * (TAU * f1 * s + p1).sin() * (TAU * g1 * t).sin();
    Square::new(
        Arc::new(move |s, t| {
            let rr = warp(s, t);
            let w = major + rr * (TAU * t).cos();
            Coord::new(w * (TAU * s).cos(), w * (TAU * s).sin(), rr * (TAU * t).sin(), 0.0)
        }),
        Arc::new(move |s, t| {
            let rr = warp(s, t);
            let drr = dwarp_ds(s, t);
            let w = major + rr * (TAU * t).cos();
            let dw = drr * (TAU * t).cos();
            Coord::new(
                dw * (TAU * s).cos() - w * TAU * (TAU * s).sin(),
                dw * (TAU * s).sin() + w * TAU * (TAU * s).cos(),
                drr * (TAU * t).sin(),
                0.0,
            )
        }),
        Arc::new(move |s, t| {
            let rr = warp(s, t);
            let drr = dwarp_dt(s, t);
            let dw = drr * (TAU * t).cos() - rr * TAU * (TAU * t).sin();
            Coord::new(
                dw * (TAU * s).cos(),
                dw * (TAU * s).sin(),
                drr * (TAU * t).sin() + rr * TAU * (TAU * t).cos(),
                0.0,
            )
        }),
        true,
        true,
    )
    .expect("warped torus closes in both variables")
}
