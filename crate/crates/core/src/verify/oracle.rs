use serde::Serialize;

use crate::error::Result;
use crate::group::{CanonicalMaps, GroupSpec, Position};

/// Image of `p` computed from the real matrix of `g` about the grid centre,
/// independent of the integer tables used by [`CanonicalMaps`].
fn act_float(spec: &GroupSpec, g: crate::group::GroupElement, p: Position, n: usize) -> Result<Position> {
    let m = spec.matrix_of(g)?;
    let c = (n as f64 - 1.0) / 2.0;
    let (x, y) = (p.1 as f64 - c, p.0 as f64 - c);
    let x2 = m[0][0] * x + m[0][1] * y;
    let y2 = m[1][0] * x + m[1][1] * y;
    Ok(((y2 + c).round() as usize, (x2 + c).round() as usize))
}

/// Lexicographic minimum of the orbit of `p`, by enumerating every element.
pub fn brute_rep(spec: &GroupSpec, p: Position, n: usize) -> Result<Position> {
    spec.elements().into_iter().map(|g| act_float(spec, g, p, n)).try_fold((n, n), |best, q| Ok(best.min(q?)))
}

/// Lexicographic minimum of the diagonal orbit of `(a, b)`.
pub fn brute_pair(spec: &GroupSpec, a: Position, b: Position, n: usize) -> Result<(Position, Position)> {
    let mut best = ((n, n), (n, n));
    for g in spec.elements() {
        best = best.min((act_float(spec, g, a, n)?, act_float(spec, g, b, n)?));
    }
    Ok(best)
}

/// Mismatch counts between [`CanonicalMaps`] and the brute-force oracle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub positions_checked: usize,
    pub position_mismatches: usize,
    pub pairs_checked: usize,
    pub pair_mismatches: usize,
}

impl OracleReport {
    pub fn exact(&self) -> bool {
        self.position_mismatches == 0 && self.pair_mismatches == 0
    }
}

/// Checks every grid group on sides `1..=max_side` for positions and
/// `1..=max_pair_side` for D4 pairs.
pub fn orbit_oracle(max_side: usize, max_pair_side: usize) -> Result<OracleReport> {
    let mut r = OracleReport::default();
    let groups = [(1, false), (1, true), (2, false), (2, true), (4, false), (4, true)];
    for n in 1..=max_side {
        for &(t, refl) in &groups {
            let spec = GroupSpec::new(t, refl)?;
            let maps = CanonicalMaps::new(n, spec)?;
            for i in 0..n {
                for j in 0..n {
                    r.positions_checked += 1;
                    if maps.rep((i, j)) != brute_rep(&spec, (i, j), n)? {
                        r.position_mismatches += 1;
                    }
                }
            }
        }
    }
    let d4 = GroupSpec::d4();
    for n in 1..=max_pair_side {
        let maps = CanonicalMaps::with_pairs(n, d4, d4)?;
        let cells: Vec<Position> = (0..n * n).map(|x| (x / n, x % n)).collect();
        for &a in &cells {
            for &b in &cells {
                r.pairs_checked += 1;
                if maps.canonical_pair(a, b) != brute_pair(&d4, a, b, n)? {
                    r.pair_mismatches += 1;
                }
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grids_agree() {
        let r = orbit_oracle(5, 3).unwrap();
        assert!(r.exact(), "{r:?}");
        assert_eq!(r.pairs_checked, 1 + 16 + 81);
    }

    #[test]
    fn corner_orbit_under_d4() {
        assert_eq!(brute_rep(&GroupSpec::d4(), (3, 2), 4).unwrap(), (0, 1));
        assert_eq!(brute_pair(&GroupSpec::d4(), (1, 1), (0, 0), 2).unwrap(), ((0, 0), (1, 1)));
    }
}
