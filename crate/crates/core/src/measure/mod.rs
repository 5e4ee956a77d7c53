//! Finite measures on an open interval with piecewise-linear CDFs.
//!
//! A [`PieceMeasure`] is a finite sum of point masses and uniform pieces. The
//! class is closed under quantile restriction, which is all the shadow
//! construction needs, and every operation keeps the piece list in a canonical
//! form: pieces sorted by left endpoint, supports disjoint except that an atom
//! may sit on a uniform endpoint, negligible pieces dropped.

mod convex_order;
mod discretize;
mod quantile;

pub use convex_order::{call_function, convex_order_leq, convex_order_violation};
pub use discretize::{discretize_conditional_mean, dyadic_cuts};
pub use quantile::{co_connected_part, connected_part, extremal_submeasure, restrict_quantile};
pub(crate) use quantile::connected_window;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pieces lighter than this fraction of the total mass are dropped.
pub const NEGLIGIBLE_MASS: f64 = 1e-14;
/// Probability masses are accepted within this distance of 1.
pub const PROBABILITY_TOL: f64 = 1e-10;

const POSITION_TOL: f64 = 1e-12;
const DENSITY_TOL: f64 = 1e-10;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= POSITION_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainInterval {
    pub lo: f64,
    pub hi: f64,
}

impl DomainInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidMeasure(format!("empty domain ({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn real_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn positive() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }
}

impl Default for DomainInterval {
    fn default() -> Self {
        Self::real_line()
    }
}

#[derive(Serialize, Deserialize)]
struct RawDomain {
    lo: Option<f64>,
    hi: Option<f64>,
}

impl Serialize for DomainInterval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawDomain {
            lo: self.lo.is_finite().then_some(self.lo),
            hi: self.hi.is_finite().then_some(self.hi),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DomainInterval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawDomain::deserialize(d)?;
        DomainInterval::new(
            raw.lo.unwrap_or(f64::NEG_INFINITY),
            raw.hi.unwrap_or(f64::INFINITY),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// A point mass or a uniform mass spread over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Piece {
    Atom { x: f64, mass: f64 },
    Uniform { lo: f64, hi: f64, mass: f64 },
}

impl Piece {
    pub fn atom(x: f64, mass: f64) -> Self {
        Piece::Atom { x, mass }
    }

    pub fn uniform(lo: f64, hi: f64, mass: f64) -> Self {
        Piece::Uniform { lo, hi, mass }
    }

    pub fn mass(&self) -> f64 {
        match *self {
            Piece::Atom { mass, .. } | Piece::Uniform { mass, .. } => mass,
        }
    }

    pub fn left(&self) -> f64 {
        match *self {
            Piece::Atom { x, .. } => x,
            Piece::Uniform { lo, .. } => lo,
        }
    }

    pub fn right(&self) -> f64 {
        match *self {
            Piece::Atom { x, .. } => x,
            Piece::Uniform { hi, .. } => hi,
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Piece::Atom { .. })
    }

    /// `∫ x dμ` over the piece.
    pub fn moment(&self) -> f64 {
        match *self {
            Piece::Atom { x, mass } => x * mass,
            Piece::Uniform { lo, hi, mass } => mass * 0.5 * (lo + hi),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        match *self {
            Piece::Atom { x, mass } => Piece::Atom { x, mass: mass * k },
            Piece::Uniform { lo, hi, mass } => Piece::Uniform {
                lo,
                hi,
                mass: mass * k,
            },
        }
    }

    /// Mass of the piece in `(-inf, x]`.
    fn cdf(&self, x: f64) -> f64 {
        match *self {
            Piece::Atom { x: a, mass } => {
                if a <= x {
                    mass
                } else {
                    0.0
                }
            }
            Piece::Uniform { lo, hi, mass } => {
                if x <= lo {
                    0.0
                } else if x >= hi {
                    mass
                } else {
                    mass * (x - lo) / (hi - lo)
                }
            }
        }
    }

    /// Mass of the piece in `(-inf, x)`.
    fn cdf_left(&self, x: f64) -> f64 {
        match *self {
            Piece::Atom { x: a, mass } => {
                if a < x {
                    mass
                } else {
                    0.0
                }
            }
            Piece::Uniform { .. } => self.cdf(x),
        }
    }

    fn sort_key(&self) -> (f64, u8) {
        (self.left(), if self.is_atom() { 0 } else { 1 })
    }
}

/// Anything that can be integrated against a [`PieceMeasure`].
pub trait Integrand {
    fn integrate(&self, mu: &PieceMeasure) -> Result<f64>;
}

/// Finite positive measure made of atoms and uniform pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPieceMeasure")]
pub struct PieceMeasure {
    domain: DomainInterval,
    pieces: Vec<Piece>,
}

#[derive(Deserialize)]
struct RawPieceMeasure {
    #[serde(default)]
    domain: DomainInterval,
    pieces: Vec<Piece>,
}

impl TryFrom<RawPieceMeasure> for PieceMeasure {
    type Error = Error;

    fn try_from(raw: RawPieceMeasure) -> Result<Self> {
        PieceMeasure::new(raw.domain, raw.pieces)
    }
}

impl PieceMeasure {
    /// Builds the canonical form of the sum of `pieces`.
    ///
    /// Overlapping pieces are superposed, atoms strictly inside a uniform piece
    /// split it, and adjacent uniforms of equal density are merged.
    pub fn new(domain: DomainInterval, pieces: Vec<Piece>) -> Result<Self> {
        for p in &pieces {
            validate_piece(&domain, p)?;
        }
        Ok(canonicalize(domain, pieces))
    }

    pub fn zero(domain: DomainInterval) -> Self {
        Self {
            domain,
            pieces: Vec::new(),
        }
    }

    pub fn dirac(domain: DomainInterval, x: f64) -> Result<Self> {
        Self::new(domain, vec![Piece::atom(x, 1.0)])
    }

    pub fn uniform(domain: DomainInterval, lo: f64, hi: f64, mass: f64) -> Result<Self> {
        Self::new(domain, vec![Piece::uniform(lo, hi, mass)])
    }

    /// Pieces already in canonical order and disjoint; only negligible pieces are dropped.
    pub(crate) fn from_sorted_unchecked(domain: DomainInterval, pieces: Vec<Piece>) -> Self {
        let total: f64 = pieces.iter().map(Piece::mass).sum();
        let floor = NEGLIGIBLE_MASS * total;
        let pieces = pieces
            .into_iter()
            .filter(|p| {
                p.mass() > floor
                    && match *p {
                        Piece::Uniform { lo, hi, .. } => hi > lo,
                        Piece::Atom { .. } => true,
                    }
            })
            .collect();
        Self { domain, pieces }
    }

    pub fn domain(&self) -> DomainInterval {
        self.domain
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.pieces.iter().map(Piece::mass).sum()
    }

    pub fn first_moment(&self) -> f64 {
        self.pieces.iter().map(Piece::moment).sum()
    }

    /// Barycenter; `NaN` for the zero measure.
    pub fn mean(&self) -> f64 {
        self.first_moment() / self.total_mass()
    }

    /// `μ((-inf, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.pieces.iter().map(|p| p.cdf(x)).sum()
    }

    /// `μ((-inf, x))`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.pieces.iter().map(|p| p.cdf_left(x)).sum()
    }

    /// Sorted, deduplicated piece endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| [p.left(), p.right()])
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Smallest closed interval carrying the measure.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let lo = self.pieces.iter().map(Piece::left).reduce(f64::min)?;
        let hi = self.pieces.iter().map(Piece::right).reduce(f64::max)?;
        Some((lo, hi))
    }

    pub fn is_discrete(&self) -> bool {
        self.pieces.iter().all(Piece::is_atom)
    }

    /// `(x, mass)` of every atom, in increasing order.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.pieces
            .iter()
            .filter_map(|p| match *p {
                Piece::Atom { x, mass } => Some((x, mass)),
                _ => None,
            })
            .collect()
    }

    pub fn scaled(&self, k: f64) -> Self {
        assert!(k >= 0.0, "negative scaling of a measure");
        Self::from_sorted_unchecked(
            self.domain,
            self.pieces.iter().map(|p| p.scaled(k)).collect(),
        )
    }

    /// Rescales to unit mass.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.total_mass())
    }

    pub fn add(&self, other: &PieceMeasure) -> Self {
        let mut pieces = self.pieces.clone();
        pieces.extend_from_slice(&other.pieces);
        canonicalize(self.domain, pieces)
    }

    /// `Σ w_k μ_k` for measures on a common domain.
    pub fn combination<'a>(
        domain: DomainInterval,
        terms: impl IntoIterator<Item = (f64, &'a PieceMeasure)>,
    ) -> Self {
        let pieces = terms
            .into_iter()
            .filter(|(w, _)| *w > 0.0)
            .flat_map(|(w, m)| m.pieces.iter().map(move |p| p.scaled(w)))
            .collect();
        canonicalize(domain, pieces)
    }

    /// Positional restriction to the cell `(lo, hi]`.
    pub fn restrict_interval(&self, lo: f64, hi: f64) -> Self {
        let mut out = Vec::new();
        for p in &self.pieces {
            match *p {
                Piece::Atom { x, .. } => {
                    if lo < x && x <= hi {
                        out.push(*p);
                    }
                }
                Piece::Uniform {
                    lo: a,
                    hi: b,
                    mass,
                } => {
                    let l = a.max(lo);
                    let h = b.min(hi);
                    if h > l {
                        out.push(Piece::uniform(l, h, mass * (h - l) / (b - a)));
                    }
                }
            }
        }
        Self::from_sorted_unchecked(self.domain, out)
    }

    /// Sup-distance between the CDFs, checked on both sides of every breakpoint.
    pub fn max_cdf_diff(&self, other: &PieceMeasure) -> f64 {
        let mut pts = self.breakpoints();
        pts.extend(other.breakpoints());
        pts.iter()
            .map(|&x| {
                let r = (self.cdf(x) - other.cdf(x)).abs();
                let l = (self.cdf_left(x) - other.cdf_left(x)).abs();
                r.max(l)
            })
            .fold(0.0, f64::max)
    }

    /// Piece-list equality with relative tolerance `tol`.
    pub fn approx_eq(&self, other: &PieceMeasure, tol: f64) -> bool {
        let near = |a: f64, b: f64| (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()));
        self.pieces.len() == other.pieces.len()
            && self
                .pieces
                .iter()
                .zip(&other.pieces)
                .all(|(p, q)| match (*p, *q) {
                    (Piece::Atom { x, mass }, Piece::Atom { x: y, mass: m }) => {
                        near(x, y) && near(mass, m)
                    }
                    (
                        Piece::Uniform { lo, hi, mass },
                        Piece::Uniform {
                            lo: l2,
                            hi: h2,
                            mass: m2,
                        },
                    ) => near(lo, l2) && near(hi, h2) && near(mass, m2),
                    _ => false,
                })
    }

    /// Fails unless the measure has unit mass within [`PROBABILITY_TOL`].
    pub fn ensure_probability(&self) -> Result<()> {
        let mass = self.total_mass();
        if (mass - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::NotProbability { mass });
        }
        Ok(())
    }
}

fn validate_piece(domain: &DomainInterval, p: &Piece) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidMeasure(msg));
    match *p {
        Piece::Atom { x, mass } => {
            if !x.is_finite() || !mass.is_finite() || mass < 0.0 {
                return bad(format!("bad atom at {x} with mass {mass}"));
            }
            if mass > 0.0 && !domain.contains(x) {
                return bad(format!("atom at {x} outside the domain"));
            }
        }
        Piece::Uniform { lo, hi, mass } => {
            if !(lo.is_finite() && hi.is_finite() && mass.is_finite()) || mass < 0.0 {
                return bad(format!("bad uniform piece [{lo}, {hi}] with mass {mass}"));
            }
            if lo >= hi {
                return bad(format!("uniform piece needs lo < hi, got [{lo}, {hi}]"));
            }
            if mass > 0.0 && !(domain.contains(lo) && domain.contains(hi)) {
                return bad(format!("uniform piece [{lo}, {hi}] leaves the domain"));
            }
        }
    }
    Ok(())
}

fn canonicalize(domain: DomainInterval, pieces: Vec<Piece>) -> PieceMeasure {
    let total: f64 = pieces.iter().map(Piece::mass).sum();
    let floor = NEGLIGIBLE_MASS * total;

    let mut atoms: Vec<(f64, f64)> = Vec::new();
    let mut uniforms: Vec<(f64, f64, f64)> = Vec::new();
    for p in pieces {
        if p.mass() <= floor {
            continue;
        }
        match p {
            Piece::Atom { x, mass } => atoms.push((x, mass)),
            Piece::Uniform { lo, hi, mass } => uniforms.push((lo, hi, mass)),
        }
    }

    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged_atoms: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (x, m) in atoms {
        match merged_atoms.last_mut() {
            Some(last) if close(last.0, x) => {
                let mass = last.1 + m;
                if last.0 != x {
                    last.0 = (last.0 * last.1 + x * m) / mass;
                }
                last.1 = mass;
            }
            _ => merged_atoms.push((x, m)),
        }
    }

    uniforms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let disjoint = uniforms.windows(2).all(|w| w[1].0 >= w[0].1);
    let mut segments: Vec<(f64, f64, f64)> = if disjoint {
        uniforms
    } else {
        superpose(&uniforms)
    };

    // Atoms strictly inside a segment split it so supports stay disjoint.
    if !merged_atoms.is_empty() && !segments.is_empty() {
        let mut split = Vec::with_capacity(segments.len() + merged_atoms.len());
        for (lo, hi, mass) in segments {
            let dens = mass / (hi - lo);
            let mut start = lo;
            for &(x, _) in &merged_atoms {
                if x > start && x < hi && !close(x, start) && !close(x, hi) {
                    split.push((start, x, dens * (x - start)));
                    start = x;
                }
            }
            split.push((start, hi, dens * (hi - start)));
        }
        segments = split;
    }

    // Merge touching segments of equal density unless an atom sits at the junction.
    let mut merged: Vec<(f64, f64, f64)> = Vec::with_capacity(segments.len());
    for (lo, hi, mass) in segments {
        if let Some(last) = merged.last_mut() {
            let d1 = last.2 / (last.1 - last.0);
            let d2 = mass / (hi - lo);
            let junction_atom = merged_atoms.iter().any(|&(x, _)| close(x, lo));
            if close(last.1, lo)
                && (d1 - d2).abs() <= DENSITY_TOL * d1.max(d2)
                && !junction_atom
            {
                last.1 = hi;
                last.2 += mass;
                continue;
            }
        }
        merged.push((lo, hi, mass));
    }

    let mut out: Vec<Piece> = merged_atoms
        .into_iter()
        .map(|(x, m)| Piece::atom(x, m))
        .chain(merged.into_iter().map(|(l, h, m)| Piece::uniform(l, h, m)))
        .collect();
    out.sort_by(|a, b| {
        let (ka, kb) = (a.sort_key(), b.sort_key());
        ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1))
    });
    PieceMeasure::from_sorted_unchecked(domain, out)
}

/// Splits overlapping uniform pieces on the union of their endpoints and sums densities.
fn superpose(uniforms: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    let mut ends: Vec<f64> = uniforms.iter().flat_map(|u| [u.0, u.1]).collect();
    ends.sort_by(f64::total_cmp);
    ends.dedup_by(|a, b| close(*a, *b));
    let mut out = Vec::new();
    for w in ends.windows(2) {
        let (l, h) = (w[0], w[1]);
        let mid = 0.5 * (l + h);
        let dens: f64 = uniforms
            .iter()
            .filter(|u| u.0 < mid && mid < u.1)
            .map(|u| u.2 / (u.1 - u.0))
            .sum();
        if dens > 0.0 {
            out.push((l, h, dens * (h - l)));
        }
    }
    out
}

/// Finitely supported probability with strictly increasing atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscrete")]
pub struct DiscreteMarginal {
    domain: DomainInterval,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDiscrete {
    #[serde(default)]
    domain: DomainInterval,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawDiscrete> for DiscreteMarginal {
    type Error = Error;

    fn try_from(raw: RawDiscrete) -> Result<Self> {
        DiscreteMarginal::new(raw.domain, raw.atoms, raw.weights)
    }
}

impl DiscreteMarginal {
    /// Weights must sum to one within `1e-12`; they are then renormalized exactly.
    pub fn new(domain: DomainInterval, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(
                "discrete marginal needs matching, non-empty atoms and weights".into(),
            ));
        }
        if atoms.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidMeasure(
                "atoms must be strictly increasing".into(),
            ));
        }
        if let Some(x) = atoms.iter().find(|x| !domain.contains(**x)) {
            return Err(Error::InvalidMeasure(format!("atom {x} outside the domain")));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotProbability { mass: total });
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            domain,
            atoms,
            weights,
        })
    }

    /// Sorts, merges coincident atoms and normalizes an arbitrary list of `(x, weight)`.
    pub fn from_pairs(domain: DomainInterval, mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        pairs.retain(|p| p.1 > 0.0);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (x, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let total: f64 = merged.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("no positive weight".into()));
        }
        let (atoms, weights) = merged.into_iter().map(|(x, w)| (x, w / total)).unzip();
        Self::new(domain, atoms, weights)
    }

    /// Reads a purely atomic probability measure.
    pub fn from_measure(mu: &PieceMeasure) -> Result<Self> {
        if !mu.is_discrete() {
            return Err(Error::InvalidMeasure(
                "measure has uniform pieces; discretize it first".into(),
            ));
        }
        mu.ensure_probability()?;
        Self::from_pairs(mu.domain(), mu.atoms())
    }

    pub fn domain(&self) -> DomainInterval {
        self.domain
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, p)| a * p).sum()
    }

    pub fn to_measure(&self) -> PieceMeasure {
        PieceMeasure::from_sorted_unchecked(
            self.domain,
            self.atoms
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| Piece::atom(x, w))
                .collect(),
        )
    }
}
