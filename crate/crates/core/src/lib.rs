//! Non-linear martingale optimal transport with a finitely supported first marginal.
//!
//! The problem is `sup_ν Σᵢ pᵢ φ(νᵢ[γ] − γ(aᵢ))` over martingale couplings `ν`
//! of `μ₁ = Σ pᵢ δ_{aᵢ}` and `μ₂`. It splits into two parts:
//!
//! - [`curtain`]: every curtain coupling is built by embedding the atoms of
//!   `μ₁` one after another as shadows in what is left of `μ₂`;
//! - [`solver`]: the attainable vectors `(νᵢ[γ])ᵢ` form the convex hull of the
//!   vectors of the curtain couplings, so the objective is maximized over a
//!   polytope with known vertices.
//!
//! [`oracle`] holds brute-force LP and projected-gradient cross-checks, and
//! [`superrep`] the dual side: lifted couplings and the static
//! superreplicating portfolio.

pub mod coupling;
pub mod curtain;
pub mod error;
pub mod gain;
pub mod measure;
pub mod oracle;
pub mod solver;
pub mod superrep;

pub use coupling::Coupling;
pub use error::{Error, ErrorClass, Result};
pub use gain::{GainSpec, Gamma, Phi};
pub use measure::{DiscreteMarginal, DomainInterval, Piece, PieceMeasure};

use serde::{Deserialize, Serialize};

/// Direction of optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Max,
    Min,
}

impl std::str::FromStr for Sense {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "max" => Ok(Sense::Max),
            "min" => Ok(Sense::Min),
            other => Err(format!("unknown sense `{other}` (expected max or min)")),
        }
    }
}
