//! Bundled reference maps used throughout the test suite and docs.

use crate::parser::parse_map;
use crate::poly::PolynomialMap;

/// `(z1^2, z2^2)` — squaring map; regular, topological degree 4.
pub fn squaring() -> PolynomialMap {
    parse_map("z1^2, z2^2").unwrap()
}

/// `(z1^6 - z2^4, z1^3 - 2*z2^2 + z2)` — not 2-regular, but semi-regular
/// after composing with `(z1^2, z2^3)`; topological degree 12.
pub fn semi_regular_deg12() -> PolynomialMap {
    parse_map("z1^6 - z2^4, z1^3 - 2*z2^2 + z2").unwrap()
}

/// `(z1^6 - z2^4, z1^3 - z2^2 + z2)` — fails the Newton-polygon criterion:
/// the two support-line restrictions share a zero direction.
pub fn shared_direction_deg12() -> PolynomialMap {
    parse_map("z1^6 - z2^4, z1^3 - z2^2 + z2").unwrap()
}

/// `(z1^2, z1 + 2*z2)` — triangular with an affine second component;
/// semi-regular with slope -1/2, topological degree 2.
pub fn triangular_affine() -> PolynomialMap {
    parse_map("z1^2, z1 + 2*z2").unwrap()
}

/// `(z1^4 + z2^2, z2^2)` — regular, topological degree 8.
pub fn regular_deg8() -> PolynomialMap {
    parse_map("z1^4 + z2^2, z2^2").unwrap()
}

/// All bundled maps with short stable names.
pub fn all() -> Vec<(&'static str, PolynomialMap)> {
    vec![
        ("squaring", squaring()),
        ("semi_regular_deg12", semi_regular_deg12()),
        ("shared_direction_deg12", shared_direction_deg12()),
        ("triangular_affine", triangular_affine()),
        ("regular_deg8", regular_deg8()),
    ]
}
