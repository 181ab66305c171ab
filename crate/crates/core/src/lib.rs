//! Exact values of the normalized Whittaker newform of a generic irreducible
//! representation of `GL(2, Q_p)`, its sup-norm, and executable checks of the
//! local identities these rest on.

pub mod characters;
pub mod context;
pub mod engine;
pub mod error;
pub mod numerics;
pub mod padic;
pub mod reps;
pub mod verify;

pub use characters::{ExtendedCharacter, TildeCharacter};
pub use context::Context;
pub use engine::{default_t_max, CoefficientTable, Newform, Representative, Side, SupNorm};
pub use error::{Error, Result};
pub use numerics::{LaurentPoly, RationalFn, RootOfUnity, Scalar};
pub use padic::{LocalField, PAdicApprox};
pub use reps::{
    family, DiagonalProfile, EulerRoot, FamilySpec, OracleEntry, RepKind, Representation, SupercuspidalOracle,
    TwistData,
};
pub use verify::{CheckReport, Tolerances, MANIFEST};
