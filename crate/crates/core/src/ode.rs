//! Dormand-Prince 5(4) integrator with dense output over fixed-size states.

use crate::error::{Error, Result};
use crate::math;

/// Right-hand side of `y' = f(s, y)`. Returning `false` signals that `y` has
/// left the domain of the field; the step is rejected and shrunk, and if the
/// step size collapses the integration stops with [`Error::BoundaryHit`],
/// reporting component 0 as the offending coordinate.
pub trait System<const N: usize> {
    fn rhs(&self, s: f64, y: &[f64; N], dy: &mut [f64; N]) -> bool;
}

impl<const N: usize, F: Fn(f64, &[f64; N], &mut [f64; N]) -> bool> System<N> for F {
    fn rhs(&self, s: f64, y: &[f64; N], dy: &mut [f64; N]) -> bool {
        self(s, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks one from the local scale of the field.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Options {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Options { rtol, atol, h_init: None, h_max: f64::INFINITY, h_min: 1e-14, max_steps: 1_000_000 }
    }
}

/// One accepted step with its quartic continuous extension.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStep<const N: usize> {
    pub s0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn s1(&self) -> f64 {
        self.s0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.cont[0]
    }

    pub fn end(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.cont[0][i] + self.cont[1][i];
        }
        y
    }

    /// State at `s` in `[s0, s0 + h]`.
    pub fn eval(&self, s: f64) -> [f64; N] {
        let th = (s - self.s0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.cont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i])));
        }
        y
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], o: &Options) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = o.atol + o.rtol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sc;
        acc += r * r;
    }
    math::sqrt(acc / N as f64)
}

fn initial_step<const N: usize, S: System<N>>(
    sys: &S,
    s0: f64,
    y0: &[f64; N],
    k1: &[f64; N],
    span: f64,
    o: &Options,
) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = o.atol + o.rtol * y0[i].abs();
        d0 += (y0[i] / sc) * (y0[i] / sc);
        d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    let (d0, d1) = (math::sqrt(d0 / N as f64), math::sqrt(d1 / N as f64));
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span).min(o.h_max);
    let y1 = combo(y0, h0, &[(1.0, k1)]);
    let mut k2 = [0.0; N];
    if !sys.rhs(s0 + h0, &y1, &mut k2) {
        return (h0 * 0.01).max(o.h_min * 10.0);
    }
    let mut d2 = 0.0;
    for i in 0..N {
        let sc = o.atol + o.rtol * y0[i].abs();
        let r = (k2[i] - k1[i]) / sc;
        d2 += r * r;
    }
    let d2 = math::sqrt(d2 / N as f64) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        math::powf(0.01 / d1.max(d2), 0.2)
    };
    (100.0 * h0).min(h1).min(span).min(o.h_max)
}

/// Integrates from `s0` to `s_end >= s0`, calling `on_step` for every accepted
/// step. Returns the final state.
pub fn integrate<const N: usize, S, F>(
    sys: &S,
    s0: f64,
    y0: [f64; N],
    s_end: f64,
    opts: &Options,
    mut on_step: F,
) -> Result<[f64; N]>
where
    S: System<N>,
    F: FnMut(&DenseStep<N>) -> Result<()>,
{
    if !(s_end >= s0) {
        return Err(Error::Domain { what: "integration horizon", value: s_end - s0 });
    }
    if s_end == s0 {
        return Ok(y0);
    }
    let mut k1 = [0.0; N];
    if !sys.rhs(s0, &y0, &mut k1) {
        return Err(Error::BoundaryHit { time: s0, m: y0[0] });
    }
    let span = s_end - s0;
    let mut h = match opts.h_init {
        Some(h) => h.min(span),
        None => initial_step(sys, s0, &y0, &k1, span, opts),
    };
    let mut s = s0;
    let mut y = y0;
    let mut steps = 0usize;
    let mut last_rejected = false;
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        ([0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N], [0.0; N]);

    while s < s_end {
        if steps >= opts.max_steps {
            return Err(Error::StepLimit { time: s, steps });
        }
        steps += 1;
        let near_end = s + 1.01 * h >= s_end;
        if near_end {
            h = s_end - s;
        }
        let ok = sys.rhs(s + C2 * h, &combo(&y, h, &[(A21, &k1)]), &mut k2)
            && sys.rhs(s + C3 * h, &combo(&y, h, &[(A31, &k1), (A32, &k2)]), &mut k3)
            && sys.rhs(s + C4 * h, &combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]), &mut k4)
            && sys.rhs(
                s + C5 * h,
                &combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
                &mut k5,
            )
            && sys.rhs(
                s + h,
                &combo(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
                &mut k6,
            );
        let y1 = combo(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let ok = ok && sys.rhs(s + h, &y1, &mut k7);
        if !ok {
            h *= 0.25;
            last_rejected = true;
            if h < opts.h_min * s.abs().max(1.0) {
                return Err(Error::BoundaryHit { time: s, m: y[0] });
            }
            continue;
        }
        let mut err = [0.0; N];
        for i in 0..N {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&err, &y, &y1, opts);
        if en.is_nan() {
            h *= 0.25;
            last_rejected = true;
            continue;
        }
        if en <= 1.0 {
            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k7[i] - bspl;
                cont[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = DenseStep { s0: s, h, cont };
            s = if near_end { s_end } else { s + h };
            y = y1;
            k1 = k7;
            on_step(&step)?;
            let mut fac = 0.9 * math::powf(en.max(1e-10), -0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h = (h * fac).min(opts.h_max);
        } else {
            let fac = (0.9 * math::powf(en, -0.2)).max(0.2);
            h *= fac;
            last_rejected = true;
        }
        if h < opts.h_min * s.abs().max(1.0) {
            return Err(Error::StepUnderflow { time: s, step: h });
        }
    }
    Ok(y)
}
