//! Named field constructors, deterministic given their parameters and seed.
//! Every entry carries an analytic derivative sampler so transports stay
//! quadrature-limited.

use super::{AdjointForm, ChartDomain, GaugeMap};
use crate::liealg::{dexp_left_inv, AlgebraElement, GroupSpec};
use crate::{C64, CMat, Coord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn u1_gen() -> AlgebraElement {
    AlgebraElement::new_unchecked(CMat::from_row_slice(1, 1, &[C64::new(0.0, 1.0)]))
}

/// Clone of a form with the analytic derivative removed; used to exercise
/// the finite-difference fallback in tests.
pub fn strip_derivative(w: &AdjointForm) -> AdjointForm {
    let inner = w.clone();
    AdjointForm::new(w.degree, w.algebra_dim, Arc::new(move |x, vs| inner.eval(x, vs)))
}

/// Constant-coefficient 1-form `A = sum_mu X_mu dx^mu`.
pub fn constant_one_form(
    chart: &ChartDomain,
    per_axis: &[Option<AlgebraElement>],
    algebra_dim: usize,
) -> AdjointForm {
    let coeffs: Vec<Option<AlgebraElement>> = per_axis.to_vec();
    let dim = chart.dim;
    let n = algebra_dim;
    AdjointForm::new(
        1,
        n,
        Arc::new(move |_x, vs| {
            let u = &vs[0];
            let mut acc = AlgebraElement::zero(n);
            for (mu, c) in coeffs.iter().enumerate().take(dim) {
                if let Some(x) = c {
                    if u[mu] != 0.0 {
                        acc = acc.add(&x.scale(u[mu]));
                    }
                }
            }
            acc
        }),
    )
    .with_derivative(Arc::new(move |_, _, _| AlgebraElement::zero(algebra_dim)))
}

/// Constant-coefficient 2-form `B = sum X_{mu nu} dx^mu ^ dx^nu` over the
/// listed `(mu, nu, X)` terms with `mu < nu`.
pub fn constant_two_form(
    _chart: &ChartDomain,
    terms: &[(usize, usize, AlgebraElement)],
    algebra_dim: usize,
) -> AdjointForm {
    let terms: Vec<(usize, usize, AlgebraElement)> = terms.to_vec();
    let n = algebra_dim;
    AdjointForm::new(
        2,
        n,
        Arc::new(move |_x, vs| {
            let (u, v) = (&vs[0], &vs[1]);
            let mut acc = AlgebraElement::zero(n);
            for (mu, nu, x) in &terms {
                let coef = u[*mu] * v[*nu] - u[*nu] * v[*mu];
                if coef != 0.0 {
                    acc = acc.add(&x.scale(coef));
                }
            }
            acc
        }),
    )
    .with_derivative(Arc::new(move |_, _, _| AlgebraElement::zero(algebra_dim)))
}

/// Linear-coefficient 1-form with seeded random coefficients:
/// `A = sum_{mu} (b_mu + sum_nu c_{mu nu} x^nu) T_{r(mu)} dx^mu`.
pub fn linear_one_form(spec: &GroupSpec, chart: &ChartDomain, seed: u64, scale: f64) -> AdjointForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11ea);
    let dim = chart.dim;
    let gens = spec.generators.clone();
    let n = spec.n;
    let mut consts = Vec::new();
    let mut linear = Vec::new();
    let mut which = Vec::new();
    for _ in 0..dim {
        consts.push(rng.gen_range(-scale..scale));
        let row: Vec<f64> = (0..dim).map(|_| rng.gen_range(-scale..scale)).collect();
        linear.push(row);
        which.push(rng.gen_range(0..gens.len()));
    }
    let gens2 = gens.clone();
    let (c2, l2, w2) = (consts.clone(), linear.clone(), which.clone());
    AdjointForm::new(
        1,
        n,
        Arc::new(move |x, vs| {
            let u = &vs[0];
            let mut acc = AlgebraElement::zero(n);
            for mu in 0..dim {
                if u[mu] == 0.0 {
                    continue;
                }
                let mut coef = consts[mu];
                for nu in 0..dim {
                    coef += linear[mu][nu] * x[nu];
                }
                acc = acc.add(&gens[which[mu]].scale(coef * u[mu]));
            }
            acc
        }),
    )
    .with_derivative(Arc::new(move |_x, axis, vs| {
        let u = &vs[0];
        let mut acc = AlgebraElement::zero(n);
        for mu in 0..dim {
            if u[mu] == 0.0 {
                continue;
            }
            let _ = &c2;
            acc = acc.add(&gens2[w2[mu]].scale(l2[mu][axis] * u[mu]));
        }
        acc
    }))
}

/// Abelian vortex `A = c (x dy - y dx)` valued in `i R`.
pub fn u1_vortex(_chart: &ChartDomain, c: f64) -> AdjointForm {
    let t = u1_gen();
    let t2 = t.clone();
    AdjointForm::new(
        1,
        1,
        Arc::new(move |x, vs| {
            let u = &vs[0];
            t.scale(c * (x[0] * u[1] - x[1] * u[0]))
        }),
    )
    .with_derivative(Arc::new(move |_x, axis, vs| {
        let u = &vs[0];
        let coef = match axis {
            0 => c * u[1],
            1 => -c * u[0],
            _ => 0.0,
        };
        t2.scale(coef)
    }))
}

/// `A = x dy` with the u(1) generator `i`; `dA = dx ^ dy`.
pub fn u1_monomial_x_dy(_chart: &ChartDomain) -> AdjointForm {
    let t = u1_gen();
    let t2 = t.clone();
    AdjointForm::new(1, 1, Arc::new(move |x, vs| t.scale(x[0] * vs[0][1])))
        .with_derivative(Arc::new(move |_x, axis, vs| {
            if axis == 0 {
                t2.scale(vs[0][1])
            } else {
                AlgebraElement::zero(1)
            }
        }))
}

/// `B = c x_1 dx^1 ^ dx^2` valued in `i R`.
pub fn u1_monomial_two_form(_chart: &ChartDomain, c: f64) -> AdjointForm {
    let t = u1_gen();
    let t2 = t.clone();
    AdjointForm::new(
        2,
        1,
        Arc::new(move |x, vs| {
            let (u, v) = (&vs[0], &vs[1]);
            t.scale(c * x[0] * (u[0] * v[1] - u[1] * v[0]))
        }),
    )
    .with_derivative(Arc::new(move |_x, axis, vs| {
        let (u, v) = (&vs[0], &vs[1]);
        if axis == 0 {
            t2.scale(c * (u[0] * v[1] - u[1] * v[0]))
        } else {
            AlgebraElement::zero(1)
        }
    }))
}

/// su(2) hedgehog `A^a_mu = scale * eps_{a mu nu} x^nu` on the first three
/// axes of the chart.
pub fn su2_hedgehog(spec: &GroupSpec, chart: &ChartDomain, scale: f64) -> AdjointForm {
    assert!(chart.dim >= 3, "hedgehog needs at least 3 chart axes");
    assert_eq!(spec.n, 2);
    let gens = spec.generators.clone();
    let gens2 = gens.clone();
    let eps = levi_civita3();
    AdjointForm::new(
        1,
        2,
        Arc::new(move |x, vs| {
            let u = &vs[0];
            let mut acc = AlgebraElement::zero(2);
            for a in 0..3 {
                let mut coef = 0.0;
                for mu in 0..3 {
                    for nu in 0..3 {
                        let e = eps[a][mu][nu];
                        if e != 0.0 {
                            coef += scale * e * x[nu] * u[mu];
                        }
                    }
                }
                if coef != 0.0 {
                    acc = acc.add(&gens[a].scale(coef));
                }
            }
            acc
        }),
    )
    .with_derivative(Arc::new(move |_x, axis, vs| {
        let u = &vs[0];
        let mut acc = AlgebraElement::zero(2);
        if axis < 3 {
            for a in 0..3 {
                let mut coef = 0.0;
                for mu in 0..3 {
                    let e = levi_civita3()[a][mu][axis];
                    if e != 0.0 {
                        coef += scale * e * u[mu];
                    }
                }
                if coef != 0.0 {
                    acc = acc.add(&gens2[a].scale(coef));
                }
            }
        }
        acc
    }))
}

fn levi_civita3() -> [[[f64; 3]; 3]; 3] {
    let mut e = [[[0.0; 3]; 3]; 3];
    e[0][1][2] = 1.0;
    e[1][2][0] = 1.0;
    e[2][0][1] = 1.0;
    e[0][2][1] = -1.0;
    e[2][1][0] = -1.0;
    e[1][0][2] = -1.0;
    e
}

struct FourierMode {
    wave: Coord,
    phase: f64,
    /// Generator coefficients per covector axis.
    coeff: Vec<Vec<f64>>,
}

fn fourier_modes(
    spec: &GroupSpec,
    chart: &ChartDomain,
    seed: u64,
    modes: usize,
    scale: f64,
    slots: usize,
) -> Vec<FourierMode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = chart.dim;
    let k = spec.generators.len();
    // Wavelengths are tied to the box size so the field stays smooth on
    // the chart scale.
    let width = chart.bounds[0][1] - chart.bounds[0][0];
    let base = std::f64::consts::PI / width.max(1e-9);
    (0..modes)
        .map(|m| {
            let mut wave = Coord::zeros();
            for i in 0..dim {
                wave[i] = base * (rng.gen_range(-2i32..=2) as f64);
            }
            let damp = scale / ((m + 1) as f64);
            let coeff = (0..slots)
                .map(|_| (0..k).map(|_| rng.gen_range(-damp..damp)).collect())
                .collect();
            FourierMode { wave, phase: rng.gen_range(0.0..std::f64::consts::TAU), coeff }
        })
        .collect()
}

/// Truncated random Fourier 1-form, reproducible from `(seed, modes, scale)`.
pub fn random_fourier_one_form(
    spec: &GroupSpec,
    chart: &ChartDomain,
    seed: u64,
    modes: usize,
    scale: f64,
) -> AdjointForm {
    let dim = chart.dim;
    let n = spec.n;
    let gens = spec.generators.clone();
    let ms = Arc::new(fourier_modes(spec, chart, seed, modes, scale, dim));
    let ms2 = ms.clone();
    let gens2 = gens.clone();
    AdjointForm::new(
        1,
        n,
        Arc::new(move |x, vs| {
            let u = &vs[0];
            let mut acc = AlgebraElement::zero(n);
            for m in ms.iter() {
                let s = (m.wave.dot(x) + m.phase).sin();
                for mu in 0..dim {
                    if u[mu] == 0.0 {
                        continue;
                    }
                    for (a, g) in gens.iter().enumerate() {
                        let c = m.coeff[mu][a];
                        if c != 0.0 {
                            acc = acc.add(&g.scale(c * s * u[mu]));
                        }
                    }
                }
            }
            acc
        }),
    )
    .with_derivative(Arc::new(move |x, axis, vs| {
        let u = &vs[0];
        let mut acc = AlgebraElement::zero(n);
        for m in ms2.iter() {
            let dc = (m.wave.dot(x) + m.phase).cos() * m.wave[axis];
            if dc == 0.0 {
                continue;
            }
            for mu in 0..dim {
                if u[mu] == 0.0 {
                    continue;
                }
                for (a, g) in gens2.iter().enumerate() {
                    let c = m.coeff[mu][a];
                    if c != 0.0 {
                        acc = acc.add(&g.scale(c * dc * u[mu]));
                    }
                }
            }
        }
        acc
    }))
}

/// Truncated random Fourier 2-form over the basis `dx^mu ^ dx^nu`, `mu < nu`.
pub fn random_fourier_two_form(
    spec: &GroupSpec,
    chart: &ChartDomain,
    seed: u64,
    modes: usize,
    scale: f64,
) -> AdjointForm {
    let dim = chart.dim;
    let n = spec.n;
    let gens = spec.generators.clone();
    let pairs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|i| ((i + 1)..dim).map(move |j| (i, j)))
        .collect();
    let ms = Arc::new(fourier_modes(spec, chart, seed, modes, scale, pairs.len()));
    let ms2 = ms.clone();
    let gens2 = gens.clone();
    let pairs2 = pairs.clone();
    AdjointForm::new(
        2,
        n,
        Arc::new(move |x, vs| {
            let (u, v) = (&vs[0], &vs[1]);
            let mut acc = AlgebraElement::zero(n);
            for m in ms.iter() {
                let s = (m.wave.dot(x) + m.phase).sin();
                for (p, (i, j)) in pairs.iter().enumerate() {
                    let wedge = u[*i] * v[*j] - u[*j] * v[*i];
                    if wedge == 0.0 {
                        continue;
                    }
                    for (a, g) in gens.iter().enumerate() {
                        let c = m.coeff[p][a];
                        if c != 0.0 {
                            acc = acc.add(&g.scale(c * s * wedge));
                        }
                    }
                }
            }
            acc
        }),
    )
    .with_derivative(Arc::new(move |x, axis, vs| {
        let (u, v) = (&vs[0], &vs[1]);
        let mut acc = AlgebraElement::zero(n);
        for m in ms2.iter() {
            let dc = (m.wave.dot(x) + m.phase).cos() * m.wave[axis];
            if dc == 0.0 {
                continue;
            }
            for (p, (i, j)) in pairs2.iter().enumerate() {
                let wedge = u[*i] * v[*j] - u[*j] * v[*i];
                if wedge == 0.0 {
                    continue;
                }
                for (a, g) in gens2.iter().enumerate() {
                    let c = m.coeff[p][a];
                    if c != 0.0 {
                        acc = acc.add(&g.scale(c * dc * wedge));
                    }
                }
            }
        }
        acc
    }))
}

/// Flat connection valued in the Cartan span: constant coefficients, so
/// `dA = 0` and all brackets vanish on the Cartan line.
pub fn cartan_constant_one_form(spec: &GroupSpec, chart: &ChartDomain, seed: u64, scale: f64) -> AdjointForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xca47a4);
    let basis = spec.cartan_basis();
    let per_axis: Vec<Option<AlgebraElement>> = (0..chart.dim)
        .map(|_| {
            let mut acc = AlgebraElement::zero(spec.n);
            for b in &basis {
                acc = acc.add(&b.scale(rng.gen_range(-scale..scale)));
            }
            Some(acc)
        })
        .collect();
    constant_one_form(chart, &per_axis, spec.n)
}

/// Closed Cartan-valued 2-form: each term `f(x_mu) dx^mu ^ dx^nu` depends
/// only on its own leading axis, so `dB = 0` identically.
pub fn cartan_closed_two_form(spec: &GroupSpec, chart: &ChartDomain, seed: u64, scale: f64) -> AdjointForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc105ed);
    let basis = spec.cartan_basis();
    let dim = chart.dim;
    let n = spec.n;
    let pairs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|i| ((i + 1)..dim).map(move |j| (i, j)))
        .collect();
    let width = chart.bounds[0][1] - chart.bounds[0][0];
    let freq = std::f64::consts::PI / width.max(1e-9);
    let params: Vec<(f64, f64, AlgebraElement)> = pairs
        .iter()
        .map(|_| {
            let amp = rng.gen_range(-scale..scale);
            let ph = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut t = AlgebraElement::zero(n);
            for b in &basis {
                t = t.add(&b.scale(rng.gen_range(-1.0..1.0)));
            }
            (amp, ph, t)
        })
        .collect();
    let pairs2 = pairs.clone();
    let params2 = params.clone();
    AdjointForm::new(
        2,
        n,
        Arc::new(move |x, vs| {
            let (u, v) = (&vs[0], &vs[1]);
            let mut acc = AlgebraElement::zero(n);
            for ((i, j), (amp, ph, t)) in pairs.iter().zip(params.iter()) {
                let wedge = u[*i] * v[*j] - u[*j] * v[*i];
                if wedge != 0.0 {
                    acc = acc.add(&t.scale(amp * (freq * x[*i] + ph).sin() * wedge));
                }
            }
            acc
        }),
    )
    .with_derivative(Arc::new(move |x, axis, vs| {
        let (u, v) = (&vs[0], &vs[1]);
        let mut acc = AlgebraElement::zero(n);
        for ((i, j), (amp, ph, t)) in pairs2.iter().zip(params2.iter()) {
            if *i != axis {
                continue;
            }
            let wedge = u[*i] * v[*j] - u[*j] * v[*i];
            if wedge != 0.0 {
                acc = acc.add(&t.scale(amp * freq * (freq * x[*i] + ph).cos() * wedge));
            }
        }
        acc
    }))
}

/// Compactly-peaked Gaussian profile 2-form
/// `B = amp * exp(-|x - c|^2 / width^2) dx^i ^ dx^j` times a generator.
pub fn gaussian_two_form(
    chart: &ChartDomain,
    axes: (usize, usize),
    center: Coord,
    width: f64,
    coeff: AlgebraElement,
    amp: f64,
) -> AdjointForm {
    let dim = chart.dim;
    let n = coeff.dim();
    let (i, j) = axes;
    let c2 = coeff.clone();
    let profile = move |x: &Coord| {
        let mut q = 0.0;
        for k in 0..dim {
            let d = x[k] - center[k];
            q += d * d;
        }
        amp * (-q / (width * width)).exp()
    };
    let p2 = profile;
    AdjointForm::new(
        2,
        n,
        Arc::new(move |x, vs| {
            let (u, v) = (&vs[0], &vs[1]);
            let wedge = u[i] * v[j] - u[j] * v[i];
            if wedge == 0.0 {
                AlgebraElement::zero(n)
            } else {
                coeff.scale(profile(x) * wedge)
            }
        }),
    )
    .with_derivative(Arc::new(move |x, axis, vs| {
        let (u, v) = (&vs[0], &vs[1]);
        let wedge = u[i] * v[j] - u[j] * v[i];
        if wedge == 0.0 || axis >= dim {
            return AlgebraElement::zero(n);
        }
        let d = -2.0 * (x[axis] - center[axis]) / (width * width);
        c2.scale(p2(x) * d * wedge)
    }))
}

/// Random Fourier gauge map `g(x) = exp(xi(x))` with the exact
/// left-trivialized derivative.
pub fn random_fourier_gauge_map(
    spec: &GroupSpec,
    chart: &ChartDomain,
    seed: u64,
    modes: usize,
    scale: f64,
) -> GaugeMap {
    let n = spec.n;
    let gens = spec.generators.clone();
    let ms = Arc::new(fourier_modes(spec, chart, seed ^ 0x6a06e, modes, scale, 1));
    let xi_at = {
        let ms = ms.clone();
        let gens = gens.clone();
        move |x: &Coord| {
            let mut acc = AlgebraElement::zero(n);
            for m in ms.iter() {
                let s = (m.wave.dot(x) + m.phase).sin();
                for (a, g) in gens.iter().enumerate() {
                    let c = m.coeff[0][a];
                    if c != 0.0 {
                        acc = acc.add(&g.scale(c * s));
                    }
                }
            }
            acc
        }
    };
    let dxi_at = {
        let ms = ms.clone();
        let gens = gens.clone();
        move |x: &Coord, axis: usize| {
            let mut acc = AlgebraElement::zero(n);
            for m in ms.iter() {
                let dc = (m.wave.dot(x) + m.phase).cos() * m.wave[axis];
                for (a, g) in gens.iter().enumerate() {
                    let c = m.coeff[0][a];
                    if c != 0.0 {
                        acc = acc.add(&g.scale(c * dc));
                    }
                }
            }
            acc
        }
    };
    let xi_val = xi_at.clone();
    let sampler: super::GaugeSampler = Arc::new(move |x| {
        crate::liealg::exp_map(&xi_val(x)).expect("catalog gauge maps are anti-Hermitian")
    });
    let deriv: super::GaugeDerivSampler = Arc::new(move |x, axis| {
        let xi = xi_at(x);
        let dxi = dxi_at(x, axis);
        let g = crate::liealg::exp_map(&xi).expect("catalog gauge maps are anti-Hermitian");
        // dg = g * (g^{-1} dg).
        g.matrix() * dexp_left_inv(&xi, &dxi).matrix()
    });
    GaugeMap::new(n, sampler).with_derivative(deriv)
}

/// Pointwise product of two gauge maps, `(g h)(x) = g(x) h(x)`.
pub fn compose_gauge_maps(g: &GaugeMap, h: &GaugeMap) -> GaugeMap {
    let n = g.algebra_dim;
    let (g1, h1) = (g.clone(), h.clone());
    let sampler: super::GaugeSampler = Arc::new(move |x| g1.eval(x).mul(&h1.eval(x)));
    let (g2, h2) = (g.clone(), h.clone());
    GaugeMap::new(n, sampler).with_derivative(Arc::new(move |x, axis| {
        let mut e = Coord::zeros();
        e[axis] = 1.0;
        // d(gh) = (dg) h + g (dh); recover dg from the Maurer-Cartan form.
        let gv = g2.eval(x);
        let hv = h2.eval(x);
        let dg = gv.matrix() * g2.maurer(x, &e, 4, 1e-4).matrix();
        let dh = hv.matrix() * h2.maurer(x, &e, 4, 1e-4).matrix();
        dg * hv.matrix() + gv.matrix() * dh
    }))
}
