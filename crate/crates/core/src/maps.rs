//! Bundled maps.

use crate::projspace::mapfile::{parse_map, MapFileError};
use crate::projspace::{monomial_count, monomial_index, BaseMap, HomPolyMap};
use crate::C64;

/// Names accepted by [`bundled`].
pub const BUNDLED: [&str; 4] = ["power2", "power4", "lattes4", "lattes4susp"];

const POWER2: &str = include_str!("../../../maps/power2.map");
const POWER4: &str = include_str!("../../../maps/power4.map");
const LATTES4: &str = include_str!("../../../maps/lattes4.map");
const LATTES4SUSP: &str = include_str!("../../../maps/lattes4susp.map");

/// Looks up a bundled map by name.
pub fn bundled(name: &str) -> Option<Result<HomPolyMap, MapFileError>> {
    let text = match name {
        "power2" => POWER2,
        "power4" => POWER4,
        "lattes4" => LATTES4,
        "lattes4susp" => LATTES4SUSP,
        _ => return None,
    };
    Some(parse_map(text))
}

/// `[zᵈ : wᵈ : tᵈ]`, tagged fibered.
pub fn power(d: usize) -> HomPolyMap {
    let n = monomial_count(d);
    let zero = C64::new(0.0, 0.0);
    let mut comps = [vec![zero; n], vec![zero; n], vec![zero; n]];
    comps[0][monomial_index(d, d, 0)] = C64::new(1.0, 0.0);
    comps[1][monomial_index(d, 0, d)] = C64::new(1.0, 0.0);
    comps[2][monomial_index(d, 0, 0)] = C64::new(1.0, 0.0);
    HomPolyMap::new(d, comps)
        .and_then(HomPolyMap::into_fibered)
        .expect("power map is valid")
}

/// The degree-4 Lattès map `θ(ζ) = (ζ²+1)² / (4ζ(ζ²−1))` induced by doubling
/// on the square lattice, in homogeneous form
/// `[(z²+w²)² : 4zw(z²−w²)]`.
pub fn lattes4() -> BaseMap {
    let r = |x: f64| C64::new(x, 0.0);
    BaseMap::new(
        4,
        vec![r(1.0), r(0.0), r(2.0), r(0.0), r(1.0)],
        vec![r(0.0), r(-4.0), r(0.0), r(4.0), r(0.0)],
    )
    .expect("Lattès map is valid")
}

/// Suspension `[P : Q : t⁴]` of [`lattes4`].
pub fn lattes4_suspension() -> HomPolyMap {
    lattes4().suspension()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_files_match_constructors() {
        assert_eq!(bundled("power2").unwrap().unwrap(), power(2));
        assert_eq!(bundled("power4").unwrap().unwrap(), power(4));
        assert_eq!(bundled("lattes4").unwrap().unwrap(), lattes4_suspension());
        assert_eq!(bundled("lattes4susp").unwrap().unwrap(), lattes4_suspension());
        assert!(bundled("nope").is_none());
    }

    #[test]
    fn lattes_base_matches_rational_formula() {
        let theta = lattes4();
        for zeta in [C64::new(0.3, 0.7), C64::new(-1.2, 0.1), C64::new(2.0, -3.0)] {
            let [p, q] = theta.eval(zeta, C64::new(1.0, 0.0));
            let one = C64::new(1.0, 0.0);
            let expected = (zeta * zeta + one).powu(2) / (zeta * (zeta * zeta - one) * 4.0);
            assert!((p / q - expected).norm() < 1e-12 * expected.norm());
        }
    }
}
