use super::{Integrand, Piece, PieceMeasure};
use crate::error::{Error, Result};
use crate::Sense;

const QUANTILE_TOL: f64 = 1e-12;
const RANGE_TOL: f64 = 1e-10;
const MOMENT_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

/// Cumulative-mass view of a measure: piece `k` occupies quantile levels
/// `[starts[k], starts[k] + mass_k]`.
struct QuantileProfile<'a> {
    pieces: &'a [Piece],
    starts: Vec<f64>,
    moments: Vec<f64>,
    total: f64,
}

impl<'a> QuantileProfile<'a> {
    fn new(mu: &'a PieceMeasure) -> Self {
        let pieces = mu.pieces();
        let mut starts = Vec::with_capacity(pieces.len() + 1);
        let mut moments = Vec::with_capacity(pieces.len() + 1);
        let (mut s, mut m) = (0.0, 0.0);
        for p in pieces {
            starts.push(s);
            moments.push(m);
            s += p.mass();
            m += p.moment();
        }
        starts.push(s);
        moments.push(m);
        Self {
            pieces,
            starts,
            moments,
            total: s,
        }
    }

    /// Index of the piece whose window contains `u` (right-continuous).
    fn locate(&self, u: f64) -> usize {
        let k = self.starts.partition_point(|&s| s <= u);
        k.saturating_sub(1).min(self.pieces.len().saturating_sub(1))
    }

    /// `∫_0^u Q(t) dt`.
    fn integral(&self, u: f64) -> f64 {
        if self.pieces.is_empty() || u <= 0.0 {
            return 0.0;
        }
        if u >= self.total {
            return self.moments[self.pieces.len()];
        }
        let k = self.locate(u);
        let t = (u - self.starts[k]).clamp(0.0, self.pieces[k].mass());
        self.moments[k] + partial_moment(&self.pieces[k], t)
    }

    /// Right-limit of the quantile function at `u` as `(value, slope)`.
    fn quantile_affine(&self, u: f64) -> (f64, f64) {
        let k = self.locate(u);
        match self.pieces[k] {
            Piece::Atom { x, .. } => (x, 0.0),
            Piece::Uniform { lo, hi, mass } => {
                let slope = (hi - lo) / mass;
                (lo + slope * (u - self.starts[k]), slope)
            }
        }
    }

    fn window_moment(&self, c: f64, mass: f64) -> f64 {
        self.integral(c + mass) - self.integral(c)
    }
}

/// Moment of the lowest `t` units of mass of a piece.
fn partial_moment(p: &Piece, t: f64) -> f64 {
    match *p {
        Piece::Atom { x, .. } => x * t,
        Piece::Uniform { lo, hi, mass } => t * (lo + 0.5 * (hi - lo) * t / mass),
    }
}

/// The part of `gamma` between cumulative-mass levels `a` and `b`.
pub fn restrict_quantile(gamma: &PieceMeasure, a: f64, b: f64) -> Result<PieceMeasure> {
    let total = gamma.total_mass();
    let tol = QUANTILE_TOL * (1.0 + total);
    if a < -tol || b > total + tol || a > b + tol {
        return Err(Error::QuantileOutOfRange { a, b, mass: total });
    }
    let a = a.clamp(0.0, total);
    let b = b.clamp(a, total);
    Ok(restrict_unchecked(gamma, a, b))
}

fn restrict_unchecked(gamma: &PieceMeasure, a: f64, b: f64) -> PieceMeasure {
    let mut out = Vec::new();
    let mut s = 0.0;
    for p in gamma.pieces() {
        let m = p.mass();
        let (l, h) = (a.max(s), b.min(s + m));
        if h > l {
            let piece = match *p {
                Piece::Atom { x, .. } => Piece::atom(x, h - l),
                Piece::Uniform { lo, hi, .. } => {
                    let w = hi - lo;
                    let new_lo = if l <= s { lo } else { lo + w * (l - s) / m };
                    let new_hi = if h >= s + m { hi } else { lo + w * (h - s) / m };
                    Piece::uniform(new_lo, new_hi.min(hi).max(new_lo), h - l)
                }
            };
            out.push(piece);
        }
        s += m;
        if s >= b {
            break;
        }
    }
    PieceMeasure::from_sorted_unchecked(gamma.domain(), out)
}

/// Finds the leftmost window start `c` such that `gamma` restricted to the
/// quantile window `[c, c + mass]` has first moment `moment`.
///
/// Returns `(c, mass)` with `mass` clamped to `[0, gamma.total_mass()]`.
pub(crate) fn connected_window(gamma: &PieceMeasure, mass: f64, moment: f64) -> Result<(f64, f64)> {
    let total = gamma.total_mass();
    if mass < -RANGE_TOL * (1.0 + total) || mass > total + RANGE_TOL * (1.0 + total) {
        return Err(Error::QuantileOutOfRange {
            a: 0.0,
            b: mass,
            mass: total,
        });
    }
    let mass = mass.clamp(0.0, total);
    let profile = QuantileProfile::new(gamma);
    let span = total - mass;

    let lo_m = profile.window_moment(0.0, mass);
    let hi_m = profile.window_moment(span, mass);
    let tol = RANGE_TOL * (1.0 + moment.abs());
    if moment < lo_m - tol || moment > hi_m + tol {
        return Err(Error::MomentOutOfRange {
            mass,
            moment,
            lo: lo_m,
            hi: hi_m,
        });
    }
    if mass == 0.0 || span <= 0.0 {
        return Ok((0.0, mass));
    }
    let target = moment.clamp(lo_m, hi_m.max(lo_m));
    if lo_m >= target {
        return Ok((0.0, mass));
    }

    // Between consecutive candidates neither window end crosses a piece
    // boundary, so the moment is quadratic in the window start.
    let mut cands: Vec<f64> = profile
        .starts
        .iter()
        .flat_map(|&s| [s, s - mass])
        .filter(|&c| c > 0.0 && c < span)
        .collect();
    cands.push(0.0);
    cands.push(span);
    cands.sort_by(f64::total_cmp);
    cands.dedup();

    let j = cands.partition_point(|&c| profile.window_moment(c, mass) < target);
    let j = j.min(cands.len() - 1).max(1);
    let (c0, c1) = (cands[j - 1], cands[j]);
    let f0 = profile.window_moment(c0, mass);

    let (q1, r1) = profile.quantile_affine(c0);
    let (q2, r2) = profile.quantile_affine(c0 + mass);
    let d = target - f0;
    let b = q2 - q1;
    let a = 0.5 * (r2 - r1);
    let len = c1 - c0;
    let disc = b * b + 4.0 * a * d;
    let denom = b + disc.max(0.0).sqrt();
    let t = if denom > 0.0 { 2.0 * d / denom } else { len };
    let mut c = c0 + t.clamp(0.0, len);

    let accept = MOMENT_TOL * (1.0 + moment.abs());
    if (profile.window_moment(c, mass) - target).abs() > accept {
        let (mut lo, mut hi) = (c0, c1);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if profile.window_moment(mid, mass) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if (profile.window_moment(hi, mass) - target).abs() <= accept && hi - lo < 1e-15 {
                break;
            }
        }
        c = if (profile.window_moment(lo, mass) - target).abs()
            <= (profile.window_moment(hi, mass) - target).abs()
        {
            lo
        } else {
            hi
        };
    }
    Ok((c, mass))
}

fn with_mass(mu: PieceMeasure, mass: f64) -> PieceMeasure {
    let m = mu.total_mass();
    if m > 0.0 && mass > 0.0 {
        mu.scaled(mass / m)
    } else {
        mu
    }
}

/// The unique connected part of `gamma` with the given mass and first moment.
pub fn connected_part(gamma: &PieceMeasure, mass: f64, first_moment: f64) -> Result<PieceMeasure> {
    let (c, mass) = connected_window(gamma, mass, first_moment)?;
    Ok(with_mass(restrict_unchecked(gamma, c, c + mass), mass))
}

/// The unique co-connected part `gamma - gamma_c^{c+w}` with the given mass and first moment.
pub fn co_connected_part(
    gamma: &PieceMeasure,
    mass: f64,
    first_moment: f64,
) -> Result<PieceMeasure> {
    let total = gamma.total_mass();
    let width = total - mass;
    let (c, width) = connected_window(gamma, width, gamma.first_moment() - first_moment)?;
    let left = restrict_unchecked(gamma, 0.0, c);
    let right = restrict_unchecked(gamma, c + width, total);
    Ok(with_mass(left.add(&right), total - width))
}

/// Optimizes `μ[φ]` for concave `φ` over `{μ ≤ γ : μ[1] = mass, μ[id] = first_moment}`.
///
/// The maximum is attained at the connected part, the minimum at the co-connected part.
pub fn extremal_submeasure(
    gamma: &PieceMeasure,
    mass: f64,
    first_moment: f64,
    concave: &dyn Integrand,
    sense: Sense,
) -> Result<(PieceMeasure, f64)> {
    let part = match sense {
        Sense::Max => connected_part(gamma, mass, first_moment)?,
        Sense::Min => co_connected_part(gamma, mass, first_moment)?,
    };
    let value = concave.integrate(&part)?;
    Ok((part, value))
}
