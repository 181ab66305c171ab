//! Fixtures shared by the benchmarks.

use gl2newform::{family, FamilySpec, Representation};

/// Principal series of conductor exactly `n` with the most ramified first character.
pub fn principal_series(p: u64, n: u32) -> Representation {
    let spec = FamilySpec { steinberg: false, ..FamilySpec::all(p, n) };
    family(&spec)
        .expect("family")
        .into_iter()
        .filter(|pi| pi.n() == n)
        .max_by_key(|pi| pi.m())
        .expect("a principal series of this conductor")
}
