//! Convex transforms `γ` and concave gain functions `φ`.
//!
//! Every `γ` integrates exactly against atoms and uniform pieces except
//! `Power` with a non-integer exponent, which uses adaptive Gauss–Legendre
//! quadrature.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DomainInterval, Integrand, Piece, PieceMeasure};

/// Floor used when differentiating `φ` near its possible singularity at 0.
pub const PHI_DERIVATIVE_FLOOR: f64 = 1e-12;
/// Negative gains down to this size are treated as rounding and clamped to 0.
pub const GAIN_CLAMP_TOL: f64 = 1e-10;

const QUAD_REL_TOL: f64 = 1e-12;
const QUAD_MAX_DEPTH: u32 = 40;

/// Convex function `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gamma {
    /// `x ↦ -(2/τ) ln x` on `(0, ∞)`.
    #[serde(rename = "vixlog")]
    VixLog { tau: f64 },
    /// `x ↦ x²`.
    Quadratic,
    /// `x ↦ |x|^p`, `p ≥ 1`.
    Power { p: f64 },
    /// Continuous piecewise-linear function with value `intercept` at 0.
    ///
    /// `slopes[0]` applies left of `breakpoints[0]`, `slopes[k]` right of the last one.
    PiecewiseLinearConvex {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        intercept: f64,
    },
    /// `x ↦ α + βx`.
    Affine { alpha: f64, beta: f64 },
}

/// Concave nondecreasing function `φ` on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phi {
    Sqrt,
    /// `u ↦ u^q`, `0 < q < 1`.
    PowerConcave { q: f64 },
    /// `u ↦ u`.
    IdentityCapped,
    /// Continuous piecewise-linear function with `φ(0) = intercept`.
    ///
    /// Breakpoints are positive; `slopes[0]` applies on `[0, breakpoints[0]]`.
    PiecewiseLinearConcave {
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        intercept: f64,
    },
}

/// A validated pair `(γ, φ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGainSpec")]
pub struct GainSpec {
    pub gamma: Gamma,
    pub phi: Phi,
}

#[derive(Deserialize)]
struct RawGainSpec {
    gamma: Gamma,
    phi: Phi,
}

impl TryFrom<RawGainSpec> for GainSpec {
    type Error = Error;

    fn try_from(raw: RawGainSpec) -> Result<Self> {
        GainSpec::new(raw.gamma, raw.phi)
    }
}

impl GainSpec {
    pub fn new(gamma: Gamma, phi: Phi) -> Result<Self> {
        gamma.validate()?;
        phi.validate()?;
        Ok(Self { gamma, phi })
    }

    /// The VIX-futures gain `γ = -(2/τ) ln`, `φ = √`.
    pub fn vix(tau: f64) -> Result<Self> {
        Self::new(Gamma::VixLog { tau }, Phi::Sqrt)
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn phi(&self) -> &Phi {
        &self.phi
    }

    /// `φ(u - γ(a))` with `u = ν_a[γ]`, clamping rounding-level negative gains.
    pub fn conditional_gain(&self, integral: f64, gamma_at_atom: f64) -> Result<f64> {
        let u = integral - gamma_at_atom;
        let scale = 1.0 + integral.abs().max(gamma_at_atom.abs());
        if u < -GAIN_CLAMP_TOL * scale {
            return Err(Error::NegativeGain(u));
        }
        Ok(self.phi.eval(u.max(0.0)))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be finite, got {v}")))
    }
}

fn check_pl(breakpoints: &[f64], slopes: &[f64], intercept: f64) -> Result<()> {
    if slopes.len() != breakpoints.len() + 1 {
        return Err(Error::InvalidSpec(format!(
            "{} breakpoints need {} slopes, got {}",
            breakpoints.len(),
            breakpoints.len() + 1,
            slopes.len()
        )));
    }
    check_finite("intercept", intercept)?;
    for &v in breakpoints.iter().chain(slopes) {
        check_finite("breakpoints and slopes", v)?;
    }
    if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSpec("breakpoints must be strictly increasing".into()));
    }
    Ok(())
}

/// `∫_{x0}^{x1} s(t) dt` for the step function of slopes over `breakpoints`.
fn slope_integral(breakpoints: &[f64], slopes: &[f64], x0: f64, x1: f64) -> f64 {
    let (lo, hi, sign) = if x0 <= x1 { (x0, x1, 1.0) } else { (x1, x0, -1.0) };
    let mut total = 0.0;
    let mut left = f64::NEG_INFINITY;
    for (j, &s) in slopes.iter().enumerate() {
        let right = breakpoints.get(j).copied().unwrap_or(f64::INFINITY);
        let a = lo.max(left);
        let b = hi.min(right);
        if b > a {
            total += s * (b - a);
        }
        left = right;
    }
    sign * total
}

fn pl_eval(breakpoints: &[f64], slopes: &[f64], intercept: f64, x: f64) -> f64 {
    intercept + slope_integral(breakpoints, slopes, 0.0, x)
}

impl Gamma {
    pub fn validate(&self) -> Result<()> {
        match self {
            Gamma::VixLog { tau } => {
                if !(tau.is_finite() && *tau > 0.0) {
                    return Err(Error::InvalidSpec(format!("vixlog needs tau > 0, got {tau}")));
                }
            }
            Gamma::Quadratic => {}
            Gamma::Power { p } => {
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(Error::InvalidSpec(format!("power needs p >= 1, got {p}")));
                }
            }
            Gamma::PiecewiseLinearConvex {
                breakpoints,
                slopes,
                intercept,
            } => {
                check_pl(breakpoints, slopes, *intercept)?;
                if slopes.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidSpec(
                        "convex piecewise-linear slopes must be nondecreasing".into(),
                    ));
                }
            }
            Gamma::Affine { alpha, beta } => {
                check_finite("alpha", *alpha)?;
                check_finite("beta", *beta)?;
            }
        }
        Ok(())
    }

    /// Open interval on which `γ` is finite.
    pub fn domain(&self) -> DomainInterval {
        match self {
            Gamma::VixLog { .. } => DomainInterval::positive(),
            _ => DomainInterval::real_line(),
        }
    }

    /// Whether `γ` is bounded on its whole domain.
    pub fn is_bounded(&self) -> bool {
        match self {
            Gamma::VixLog { .. } | Gamma::Quadratic | Gamma::Power { .. } => false,
            Gamma::PiecewiseLinearConvex { slopes, .. } => slopes.iter().all(|&s| s == 0.0),
            Gamma::Affine { beta, .. } => *beta == 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Gamma::VixLog { tau } => -(2.0 / tau) * x.ln(),
            Gamma::Quadratic => x * x,
            Gamma::Power { p } => x.abs().powf(*p),
            Gamma::PiecewiseLinearConvex {
                breakpoints,
                slopes,
                intercept,
            } => pl_eval(breakpoints, slopes, *intercept, x),
            Gamma::Affine { alpha, beta } => alpha + beta * x,
        }
    }

    fn check_support(&self, lo: f64, hi: f64) -> Result<()> {
        let d = self.domain();
        if !(d.lo < lo && hi < d.hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::DomainViolation(format!(
                "support [{lo}, {hi}] not inside ({}, {})",
                d.lo, d.hi
            )));
        }
        Ok(())
    }

    /// Average of `γ` over `[lo, hi]`, `lo < hi`.
    fn uniform_average(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Gamma::VixLog { tau } => -(2.0 / tau) * mean_log(lo, hi),
            Gamma::Quadratic => (lo * lo + lo * hi + hi * hi) / 3.0,
            Gamma::Power { p } => {
                if p.fract() == 0.0 && *p <= 64.0 {
                    mean_abs_int_power(lo, hi, *p as u32)
                } else {
                    let p = *p;
                    let f = |x: f64| x.abs().powf(p);
                    let total = if lo < 0.0 && hi > 0.0 {
                        adaptive_gauss(&f, lo, 0.0) + adaptive_gauss(&f, 0.0, hi)
                    } else {
                        adaptive_gauss(&f, lo, hi)
                    };
                    total / (hi - lo)
                }
            }
            Gamma::PiecewiseLinearConvex {
                breakpoints,
                slopes,
                intercept,
            } => {
                let mut edges = vec![lo];
                edges.extend(breakpoints.iter().copied().filter(|&b| lo < b && b < hi));
                edges.push(hi);
                edges
                    .windows(2)
                    .map(|w| {
                        (w[1] - w[0]) * pl_eval(breakpoints, slopes, *intercept, 0.5 * (w[0] + w[1]))
                    })
                    .sum::<f64>()
                    / (hi - lo)
            }
            Gamma::Affine { alpha, beta } => alpha + beta * 0.5 * (lo + hi),
        }
    }

    /// `∫ γ` against one piece.
    pub fn integrate_piece(&self, piece: &Piece) -> Result<f64> {
        self.check_support(piece.left(), piece.right())?;
        Ok(match *piece {
            Piece::Atom { x, mass } => mass * self.eval(x),
            Piece::Uniform { lo, hi, mass } => mass * self.uniform_average(lo, hi),
        })
    }
}

impl Integrand for Gamma {
    fn integrate(&self, mu: &PieceMeasure) -> Result<f64> {
        mu.pieces().iter().map(|p| self.integrate_piece(p)).sum()
    }
}

impl Integrand for GainSpec {
    fn integrate(&self, mu: &PieceMeasure) -> Result<f64> {
        self.gamma.integrate(mu)
    }
}

/// `-f` for an integrand `f`.
pub struct Negated<'a, F: Integrand + ?Sized>(pub &'a F);

impl<F: Integrand + ?Sized> Integrand for Negated<'_, F> {
    fn integrate(&self, mu: &PieceMeasure) -> Result<f64> {
        Ok(-self.0.integrate(mu)?)
    }
}

/// Average of `ln` over `[lo, hi]`, `0 < lo < hi`.
fn mean_log(lo: f64, hi: f64) -> f64 {
    let m = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo) / m;
    if r < 1e-3 {
        // ln(m) + mean of ln(1 + r t) over t ∈ [-1, 1] = -Σ r^{2k} / (2k (2k + 1)).
        let r2 = r * r;
        let series = r2 / 6.0 + r2 * r2 / 20.0 + r2 * r2 * r2 / 42.0;
        m.ln() - series
    } else {
        let anti = |x: f64| x * x.ln() - x;
        (anti(hi) - anti(lo)) / (hi - lo)
    }
}

/// Average of `|x|^k` over `[lo, hi]` for integer `k`.
fn mean_abs_int_power(lo: f64, hi: f64, k: u32) -> f64 {
    // Same-sign interval: mean of t^k over [u, v] is Σ u^j v^{k-j} / (k+1).
    let same_sign = |u: f64, v: f64| -> f64 {
        let mut s = 0.0;
        for j in 0..=k {
            s += u.powi(j as i32) * v.powi((k - j) as i32);
        }
        s / (k as f64 + 1.0)
    };
    if lo >= 0.0 {
        same_sign(lo, hi)
    } else if hi <= 0.0 {
        same_sign(-hi, -lo)
    } else {
        let (wl, wr) = (-lo, hi);
        (wl * same_sign(0.0, wl) + wr * same_sign(0.0, wr)) / (wl + wr)
    }
}

/// Nodes and weights of the 10-point Gauss–Legendre rule on `[-1, 1]`.
fn gauss_legendre_10() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 10;
        (0..N)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=N {
                        let k = k as f64;
                        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = N as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

fn gauss_rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * gauss_legendre_10()
        .iter()
        .map(|&(x, w)| w * f(c + h * x))
        .sum::<f64>()
}

/// `∫_a^b f` to relative tolerance `1e-12` by interval halving.
fn adaptive_gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (gauss_rule(f, a, m), gauss_rule(f, m, b));
        let refined = l + r;
        if depth >= QUAD_MAX_DEPTH || (refined - whole).abs() <= QUAD_REL_TOL * refined.abs().max(f64::MIN_POSITIVE) {
            refined
        } else {
            recurse(f, a, m, l, depth + 1) + recurse(f, m, b, r, depth + 1)
        }
    }
    recurse(f, a, b, gauss_rule(f, a, b), 0)
}

impl Phi {
    pub fn validate(&self) -> Result<()> {
        match self {
            Phi::Sqrt | Phi::IdentityCapped => {}
            Phi::PowerConcave { q } => {
                if !(q.is_finite() && *q > 0.0 && *q < 1.0) {
                    return Err(Error::InvalidSpec(format!("power_concave needs 0 < q < 1, got {q}")));
                }
            }
            Phi::PiecewiseLinearConcave {
                breakpoints,
                slopes,
                intercept,
            } => {
                check_pl(breakpoints, slopes, *intercept)?;
                if breakpoints.first().is_some_and(|&b| b <= 0.0) {
                    return Err(Error::InvalidSpec("concave breakpoints must be positive".into()));
                }
                if slopes.windows(2).any(|w| w[0] < w[1]) {
                    return Err(Error::InvalidSpec(
                        "concave piecewise-linear slopes must be nonincreasing".into(),
                    ));
                }
                if slopes.last().is_some_and(|&s| s < 0.0) {
                    return Err(Error::InvalidSpec("phi must be nondecreasing".into()));
                }
            }
        }
        Ok(())
    }

    /// `φ(u)`; negative arguments are clamped to 0.
    pub fn eval(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match self {
            Phi::Sqrt => u.sqrt(),
            Phi::PowerConcave { q } => u.powf(*q),
            Phi::IdentityCapped => u,
            Phi::PiecewiseLinearConcave {
                breakpoints,
                slopes,
                intercept,
            } => pl_eval(breakpoints, slopes, *intercept, u),
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }

    /// Right derivative of `φ` at `max(u, 1e-12)`.
    pub fn derivative(&self, u: f64) -> f64 {
        let u = u.max(PHI_DERIVATIVE_FLOOR);
        match self {
            Phi::Sqrt => 0.5 / u.sqrt(),
            Phi::PowerConcave { q } => q * u.powf(q - 1.0),
            Phi::IdentityCapped => 1.0,
            Phi::PiecewiseLinearConcave {
                breakpoints,
                slopes,
                ..
            } => slopes[breakpoints.partition_point(|&b| b <= u)],
        }
    }

    /// Strictly increasing, continuous and unbounded.
    pub fn is_invertible(&self) -> bool {
        match self {
            Phi::Sqrt | Phi::PowerConcave { .. } | Phi::IdentityCapped => true,
            Phi::PiecewiseLinearConcave { slopes, .. } => slopes.last().is_some_and(|&s| s > 0.0),
        }
    }

    /// `φ⁻¹(v)` for `v ≥ φ(0)`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !self.is_invertible() {
            return Err(Error::NotInvertible);
        }
        let v0 = self.at_zero();
        if v < v0 {
            return Err(Error::DomainViolation(format!(
                "phi inverse needs v >= phi(0) = {v0}, got {v}"
            )));
        }
        Ok(match self {
            Phi::Sqrt => v * v,
            Phi::PowerConcave { q } => v.powf(1.0 / q),
            Phi::IdentityCapped => v,
            Phi::PiecewiseLinearConcave {
                breakpoints,
                slopes,
                intercept,
            } => {
                let mut u0 = 0.0;
                let mut val = *intercept;
                for (j, &s) in slopes.iter().enumerate() {
                    let next = breakpoints.get(j).copied();
                    if let Some(b) = next {
                        let val_next = val + s * (b - u0);
                        if v <= val_next {
                            return Ok(u0 + (v - val) / s);
                        }
                        u0 = b;
                        val = val_next;
                    } else {
                        return Ok(u0 + (v - val) / s);
                    }
                }
                unreachable!("slopes is never empty")
            }
        })
    }

    /// Largest maximizer `w(b)` of `b w - ψ⁻¹(w)` over `w ≥ 0`; `+∞` when unbounded.
    ///
    /// Nondecreasing in `b`: it is the right derivative of [`Phi::inverse_conjugate`].
    pub fn conjugate_argmax(&self, b: f64) -> Result<f64> {
        if !self.is_invertible() {
            return Err(Error::NotInvertible);
        }
        if b < 0.0 {
            return Err(Error::DomainViolation(format!("conjugate needs b >= 0, got {b}")));
        }
        Ok(match self {
            Phi::Sqrt => 0.5 * b,
            Phi::PowerConcave { q } => {
                let r = 1.0 / q;
                (b / r).powf(1.0 / (r - 1.0))
            }
            Phi::IdentityCapped => {
                if b < 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Phi::PiecewiseLinearConcave {
                breakpoints,
                slopes,
                ..
            } => {
                // Segment j of ψ⁻¹ has slope 1/s_j, nondecreasing in j.
                let k = slopes.iter().take_while(|&&s| b * s >= 1.0).count();
                if k == slopes.len() {
                    f64::INFINITY
                } else if k == 0 {
                    0.0
                } else {
                    self.eval(breakpoints[k - 1]) - self.at_zero()
                }
            }
        })
    }

    /// `(ψ⁻¹)*(b) = sup_{u ≥ 0} (b u - ψ⁻¹(u))` for `ψ = φ - φ(0)`; `+∞` when unbounded.
    pub fn inverse_conjugate(&self, b: f64) -> Result<f64> {
        if !self.is_invertible() {
            return Err(Error::NotInvertible);
        }
        if b < 0.0 {
            return Err(Error::DomainViolation(format!("conjugate needs b >= 0, got {b}")));
        }
        Ok(match self {
            Phi::Sqrt => 0.25 * b * b,
            Phi::PowerConcave { q } => {
                let r = 1.0 / q;
                let u = (b / r).powf(1.0 / (r - 1.0));
                b * u * (1.0 - 1.0 / r)
            }
            Phi::IdentityCapped => {
                if b <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Phi::PiecewiseLinearConcave {
                breakpoints,
                slopes,
                ..
            } => {
                // ψ⁻¹ is convex piecewise linear with slopes 1/s_j; the sup sits at a kink.
                if b > 1.0 / slopes[slopes.len() - 1] {
                    return Ok(f64::INFINITY);
                }
                let v0 = self.at_zero();
                let mut best = 0.0f64;
                for &kink in breakpoints {
                    let u = self.eval(kink) - v0;
                    best = best.max(b * u - kink);
                }
                best
            }
        })
    }
}
