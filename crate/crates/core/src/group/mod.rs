//! Finite rotation / reflection groups acting on square grids.
//!
//! An element `g(k, m)` is the planar map `F^m R^k`, where `R` is the
//! rotation by `2π/t` and `F` is the mirror `x -> -x`. Its matrix is
//!
//! ```text
//! [ (-1)^m cos(2πk/t)   -(-1)^m sin(2πk/t) ]
//! [        sin(2πk/t)           cos(2πk/t) ]
//! ```
//!
//! Grid positions `(i, j)` are acted on through centered coordinates
//! `(x, y) = (j - c, i - c)` with `c = (N - 1) / 2`, which makes the rotation
//! generator send `(i, j)` to `(j, N - 1 - i)` and the mirror send `(i, j)`
//! to `(i, N - 1 - j)`.

mod orbit;

pub use orbit::{canonical_pair, canonical_rep, orbit, CanonicalMaps, Position};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Channel permutations use the left regular action: slot `h` of a
/// transformed feature holds what slot `g⁻¹ h` held before, i.e. the
/// permutation sends slot `h` to slot `g ∘ h`.
pub const CHANNEL_ACTION: RegularAction = RegularAction::Left;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularAction {
    Left,
}

/// Description of the cyclic group `C_t` or dihedral group `D_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGroupSpec")]
pub struct GroupSpec {
    t: usize,
    with_reflection: bool,
}

#[derive(Deserialize)]
struct RawGroupSpec {
    t: usize,
    #[serde(default)]
    with_reflection: bool,
}

impl TryFrom<RawGroupSpec> for GroupSpec {
    type Error = Error;

    fn try_from(raw: RawGroupSpec) -> Result<Self> {
        GroupSpec::new(raw.t, raw.with_reflection)
    }
}

/// One element `g(k, m)`; only meaningful together with its [`GroupSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement {
    pub k: usize,
    pub m: usize,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { k: 0, m: 0 };

    pub fn new(k: usize, m: usize) -> Self {
        GroupElement { k, m }
    }

    pub fn is_reflection(&self) -> bool {
        self.m == 1
    }
}

impl std::fmt::Display for GroupElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.m {
            0 => write!(f, "r{}", self.k),
            _ => write!(f, "mr{}", self.k),
        }
    }
}

/// Multiplication and inverse tables over element indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CayleyTable {
    pub compose: Vec<Vec<usize>>,
    pub inverse: Vec<usize>,
}

impl CayleyTable {
    pub fn is_latin_square(&self) -> bool {
        let n = self.compose.len();
        let perm = |vals: Vec<usize>| {
            let mut seen = vec![false; n];
            vals.len() == n && vals.into_iter().all(|v| v < n && !std::mem::replace(&mut seen[v], true))
        };
        (0..n).all(|r| perm(self.compose[r].clone()))
            && (0..n).all(|c| perm((0..n).map(|r| self.compose[r][c]).collect()))
    }
}

impl GroupSpec {
    pub fn new(t: usize, with_reflection: bool) -> Result<Self> {
        if t == 0 {
            return Err(domain("rotation order t must be at least 1"));
        }
        Ok(GroupSpec { t, with_reflection })
    }

    pub fn trivial() -> Self {
        GroupSpec { t: 1, with_reflection: false }
    }

    pub fn c4() -> Self {
        GroupSpec { t: 4, with_reflection: false }
    }

    pub fn d4() -> Self {
        GroupSpec { t: 4, with_reflection: true }
    }

    /// Parses `c1`, `c2`, `c4`, `d1`, `d2`, `d4` (case-insensitive).
    pub fn parse(name: &str) -> Result<Self> {
        let lower = name.to_ascii_lowercase();
        let (refl, digits) = match lower.split_at(1.min(lower.len())) {
            ("c", rest) => (false, rest),
            ("d", rest) => (true, rest),
            _ => return Err(domain(format!("unknown group {name:?}"))),
        };
        let t: usize = digits.parse().map_err(|_| domain(format!("unknown group {name:?}")))?;
        GroupSpec::new(t, refl)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn with_reflection(&self) -> bool {
        self.with_reflection
    }

    pub fn order(&self) -> usize {
        if self.with_reflection {
            2 * self.t
        } else {
            self.t
        }
    }

    pub fn name(&self) -> String {
        format!("{}{}", if self.with_reflection { "d" } else { "c" }, self.t)
    }

    /// Whether the group maps the integer square grid onto itself.
    pub fn acts_on_grid(&self) -> bool {
        matches!(self.t, 1 | 2 | 4)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::IDENTITY
    }

    /// Rotation generator `r = g(1, 0)`.
    pub fn rotation(&self) -> GroupElement {
        GroupElement::new(1 % self.t, 0)
    }

    /// Mirror generator `g(0, 1)`, if the group has reflections.
    pub fn mirror(&self) -> Option<GroupElement> {
        self.with_reflection.then_some(GroupElement::new(0, 1))
    }

    pub fn contains(&self, g: GroupElement) -> bool {
        g.k < self.t && (g.m == 0 || (g.m == 1 && self.with_reflection))
    }

    pub fn check(&self, g: GroupElement) -> Result<()> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(domain(format!("element (k={}, m={}) is not in group {}", g.k, g.m, self.name())))
        }
    }

    /// Element index `m * t + k`.
    pub fn index_of(&self, g: GroupElement) -> usize {
        debug_assert!(self.contains(g));
        g.m * self.t + g.k
    }

    pub fn element(&self, index: usize) -> GroupElement {
        debug_assert!(index < self.order());
        GroupElement::new(index % self.t, index / self.t)
    }

    /// All elements in index order (rotations first, then reflections).
    pub fn elements(&self) -> Vec<GroupElement> {
        (0..self.order()).map(|i| self.element(i)).collect()
    }

    /// Rotation/reflection generators of the group.
    pub fn generators(&self) -> Vec<GroupElement> {
        let mut gens = vec![self.rotation()];
        gens.extend(self.mirror());
        gens
    }

    /// `a ∘ b`, i.e. the element whose matrix is `matrix_of(a) · matrix_of(b)`.
    ///
    /// Uses `R^k F = F R^{-k}`:
    /// `F^{m1} R^{k1} F^{m2} R^{k2} = F^{m1+m2} R^{(-1)^{m2} k1 + k2}`.
    pub fn compose(&self, a: GroupElement, b: GroupElement) -> GroupElement {
        let t = self.t;
        let k1 = if b.m == 1 { (t - a.k % t) % t } else { a.k };
        GroupElement::new((k1 + b.k) % t, a.m ^ b.m)
    }

    pub fn inverse(&self, g: GroupElement) -> GroupElement {
        if g.m == 1 {
            g
        } else {
            GroupElement::new((self.t - g.k) % self.t, 0)
        }
    }

    /// `g` raised to an integer power.
    pub fn pow(&self, g: GroupElement, n: usize) -> GroupElement {
        (0..n).fold(self.identity(), |acc, _| self.compose(acc, g))
    }

    /// Exact integer matrix, available when `t ∈ {1, 2, 4}`.
    pub fn int_matrix(&self, g: GroupElement) -> Option<[[i64; 2]; 2]> {
        if !self.acts_on_grid() || !self.contains(g) {
            return None;
        }
        // quarter turns realised by R^k
        let q = g.k * (4 / self.t);
        let (c, s) = [(1, 0), (0, 1), (-1, 0), (0, -1)][q % 4];
        let sign = if g.m == 1 { -1 } else { 1 };
        Some([[sign * c, -sign * s], [s, c]])
    }

    /// The 2×2 real matrix of `g`. Entries are exact for `t ∈ {1, 2, 4}`.
    pub fn matrix_of(&self, g: GroupElement) -> Result<[[f64; 2]; 2]> {
        self.check(g)?;
        if let Some(m) = self.int_matrix(g) {
            return Ok(m.map(|row| row.map(|v| v as f64)));
        }
        let theta = 2.0 * std::f64::consts::PI * g.k as f64 / self.t as f64;
        let (s, c) = theta.sin_cos();
        let sign = if g.m == 1 { -1.0 } else { 1.0 };
        Ok([[sign * c, -sign * s], [s, c]])
    }

    /// Image of grid position `p` on an `n × n` grid.
    pub fn act_on_coords(&self, g: GroupElement, p: Position, n: usize) -> Result<Position> {
        self.check(g)?;
        if !self.acts_on_grid() {
            return Err(domain(format!("group {} does not map the square grid to itself", self.name())));
        }
        if p.0 >= n || p.1 >= n {
            return Err(domain(format!("position {p:?} outside {n}x{n} grid")));
        }
        Ok(self.act_unchecked(g, p, n))
    }

    /// [`act_on_coords`](Self::act_on_coords) without validation. Callers
    /// guarantee `p` is on the grid and the group acts on grids.
    pub(crate) fn act_unchecked(&self, g: GroupElement, p: Position, n: usize) -> Position {
        let m = self.int_matrix(g).expect("group acts on grid");
        let off = n as i64 - 1;
        // doubled centered coordinates keep everything integral
        let x = 2 * p.1 as i64 - off;
        let y = 2 * p.0 as i64 - off;
        let x2 = m[0][0] * x + m[0][1] * y;
        let y2 = m[1][0] * x + m[1][1] * y;
        (((y2 + off) / 2) as usize, ((x2 + off) / 2) as usize)
    }

    /// Permutation `σ` of group-axis slots with `σ(h) = index(g ∘ h)`.
    pub fn channel_permutation(&self, g: GroupElement) -> Result<Vec<usize>> {
        self.check(g)?;
        Ok((0..self.order()).map(|h| self.index_of(self.compose(g, self.element(h)))).collect())
    }

    pub fn cayley_table(&self) -> CayleyTable {
        let elems = self.elements();
        let compose =
            elems.iter().map(|&a| elems.iter().map(|&b| self.index_of(self.compose(a, b))).collect()).collect();
        let inverse = elems.iter().map(|&g| self.index_of(self.inverse(g))).collect();
        CayleyTable { compose, inverse }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }

    fn det(m: [[f64; 2]; 2]) -> f64 {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    #[test]
    fn matrix_examples() {
        let g = GroupSpec::d4();
        assert_eq!(g.matrix_of(GroupElement::new(0, 0)).unwrap(), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(g.matrix_of(GroupElement::new(1, 0)).unwrap(), [[0.0, -1.0], [1.0, 0.0]]);
        let m = g.matrix_of(GroupElement::new(0, 1)).unwrap();
        assert_eq!(m, [[-1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(det(m), -1.0);
        for e in g.elements() {
            let d = det(g.matrix_of(e).unwrap());
            assert_eq!(d, if e.m == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn invalid_elements_rejected() {
        let c4 = GroupSpec::c4();
        assert!(c4.matrix_of(GroupElement::new(0, 1)).is_err());
        assert!(c4.matrix_of(GroupElement::new(4, 0)).is_err());
        assert!(GroupSpec::new(0, false).is_err());
    }

    #[test]
    fn compose_matches_matrix_products() {
        for spec in [
            GroupSpec::d4(),
            GroupSpec::c4(),
            GroupSpec::new(2, true).unwrap(),
            GroupSpec::new(1, true).unwrap(),
            GroupSpec::new(3, true).unwrap(),
            GroupSpec::new(6, true).unwrap(),
        ] {
            let elems = spec.elements();
            for &a in &elems {
                for &b in &elems {
                    let want = mat_mul(spec.matrix_of(a).unwrap(), spec.matrix_of(b).unwrap());
                    let got = spec.matrix_of(spec.compose(a, b)).unwrap();
                    for i in 0..2 {
                        for j in 0..2 {
                            assert!((want[i][j] - got[i][j]).abs() < 1e-12, "{spec:?} {a} {b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn d4_table_is_exact_integer_products() {
        let spec = GroupSpec::d4();
        let mats: Vec<_> = spec.elements().iter().map(|&e| spec.int_matrix(e).unwrap()).collect();
        // all 8 matrices are distinct signed permutation matrices
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_ne!(mats[i], mats[j]);
                }
            }
        }
        let table = spec.cayley_table();
        for a in 0..8 {
            for b in 0..8 {
                let mut prod = [[0i64; 2]; 2];
                for r in 0..2 {
                    for c in 0..2 {
                        prod[r][c] = mats[a][r][0] * mats[b][0][c] + mats[a][r][1] * mats[b][1][c];
                    }
                }
                let idx = mats.iter().position(|m| *m == prod).unwrap();
                assert_eq!(table.compose[a][b], idx);
            }
        }
        assert!(table.is_latin_square());
    }

    #[test]
    fn compose_and_inverse_examples() {
        let spec = GroupSpec::c4();
        let r = spec.rotation();
        assert_eq!(spec.compose(r, r), GroupElement::new(2, 0));
        assert_eq!(spec.inverse(r), GroupElement::new(3, 0));
        assert_eq!(spec.inverse(spec.identity()), spec.identity());
        let d4 = GroupSpec::d4();
        for g in d4.elements() {
            assert_eq!(d4.compose(d4.identity(), g), g);
            assert_eq!(d4.compose(g, d4.inverse(g)), d4.identity());
        }
        let m = d4.mirror().unwrap();
        assert_eq!(d4.inverse(m), m);
        let sq = d4.int_matrix(m).unwrap();
        assert_eq!(
            [
                [sq[0][0] * sq[0][0] + sq[0][1] * sq[1][0], sq[0][0] * sq[0][1] + sq[0][1] * sq[1][1]],
                [sq[1][0] * sq[0][0] + sq[1][1] * sq[1][0], sq[1][0] * sq[0][1] + sq[1][1] * sq[1][1]]
            ],
            [[1, 0], [0, 1]]
        );
    }

    #[test]
    fn coordinate_action_examples() {
        let spec = GroupSpec::d4();
        let r = spec.rotation();
        assert_eq!(spec.act_on_coords(r, (0, 0), 4).unwrap(), (0, 3));
        assert_eq!(spec.act_on_coords(spec.identity(), (2, 1), 4).unwrap(), (2, 1));
        let mut p = (2, 1);
        for _ in 0..4 {
            p = spec.act_on_coords(r, p, 4).unwrap();
        }
        assert_eq!(p, (2, 1));
        assert_eq!(spec.act_on_coords(spec.mirror().unwrap(), (1, 0), 4).unwrap(), (1, 3));
        assert!(spec.act_on_coords(r, (4, 0), 4).is_err());
        let c3 = GroupSpec::new(3, false).unwrap();
        assert!(c3.act_on_coords(c3.rotation(), (0, 0), 4).is_err());
    }

    #[test]
    fn channel_permutation_examples() {
        let c4 = GroupSpec::c4();
        assert_eq!(c4.channel_permutation(c4.identity()).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(c4.channel_permutation(c4.rotation()).unwrap(), vec![1, 2, 3, 0]);
        let d4 = GroupSpec::d4();
        for a in d4.elements() {
            for b in d4.elements() {
                let pa = d4.channel_permutation(a).unwrap();
                let pb = d4.channel_permutation(b).unwrap();
                let pab = d4.channel_permutation(d4.compose(a, b)).unwrap();
                let composed: Vec<usize> = (0..8).map(|h| pa[pb[h]]).collect();
                assert_eq!(pab, composed);
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(GroupSpec::parse("D4").unwrap(), GroupSpec::d4());
        assert_eq!(GroupSpec::parse("c1").unwrap(), GroupSpec::trivial());
        assert!(GroupSpec::parse("x4").is_err());
        assert!(GroupSpec::parse("").is_err());
    }

    #[test]
    fn serde_round_trip_validates() {
        let s = serde_json::to_string(&GroupSpec::d4()).unwrap();
        assert_eq!(s, r#"{"t":4,"with_reflection":true}"#);
        let back: GroupSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, GroupSpec::d4());
        assert!(serde_json::from_str::<GroupSpec>(r#"{"t":0}"#).is_err());
    }
}
