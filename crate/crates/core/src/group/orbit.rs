use std::io::Write;

use super::GroupSpec;
use crate::error::{domain, Result};

/// Grid position `(i, j)` with row `i` and column `j`.
pub type Position = (usize, usize);

fn check_grid(spec: &GroupSpec, p: Position, n: usize) -> Result<()> {
    if !spec.acts_on_grid() {
        return Err(domain(format!("group {} does not act on square grids", spec.name())));
    }
    if p.0 >= n || p.1 >= n {
        return Err(domain(format!("position {p:?} outside {n}x{n} grid")));
    }
    Ok(())
}

/// The orbit `{g·p : g ∈ S}`, sorted lexicographically and deduplicated.
pub fn orbit(spec: &GroupSpec, p: Position, n: usize) -> Result<Vec<Position>> {
    check_grid(spec, p, n)?;
    let mut out: Vec<Position> = spec.elements().into_iter().map(|g| spec.act_unchecked(g, p, n)).collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Lexicographically smallest member of `orbit(p)`.
pub fn canonical_rep(spec: &GroupSpec, p: Position, n: usize) -> Result<Position> {
    Ok(orbit(spec, p, n)?[0])
}

/// Lexicographically smallest `(g·p_i, g·p_j)` over `g ∈ S`, comparing the
/// flattened tuple `(i1, j1, i2, j2)`. The same `g` moves both endpoints.
pub fn canonical_pair(spec: &GroupSpec, pi: Position, pj: Position, n: usize) -> Result<(Position, Position)> {
    check_grid(spec, pi, n)?;
    check_grid(spec, pj, n)?;
    Ok(spec
        .elements()
        .into_iter()
        .map(|g| (spec.act_unchecked(g, pi, n), spec.act_unchecked(g, pj, n)))
        .min()
        .expect("group is non-empty"))
}

/// Precomputed orbit-representative lookups for one grid side.
///
/// Built by scanning positions (and position pairs) in lexicographic order:
/// the first unseen member of an orbit is its lexicographic minimum, and its
/// orbit is flooded through the group generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalMaps {
    grid_side: usize,
    group: GroupSpec,
    /// position index `i * N + j` -> index of its representative
    position_to_rep: Vec<usize>,
    /// position index -> dense orbit id in `0..orbit_count`
    position_to_orbit: Vec<usize>,
    /// representative position index for each orbit id
    reps: Vec<usize>,
    pair_group: Option<GroupSpec>,
    /// pair index `a * N² + b` -> canonical pair index
    pair_to_canonical: Vec<usize>,
}

impl CanonicalMaps {
    /// Position tables only.
    pub fn new(grid_side: usize, group: GroupSpec) -> Result<Self> {
        if grid_side == 0 {
            return Err(domain("grid side must be positive"));
        }
        if !group.acts_on_grid() {
            return Err(domain(format!("group {} does not act on square grids", group.name())));
        }
        let n = grid_side;
        let gens = group.generators();
        let mut position_to_rep = vec![usize::MAX; n * n];
        let mut position_to_orbit = vec![usize::MAX; n * n];
        let mut reps = Vec::new();
        for start in 0..n * n {
            if position_to_rep[start] != usize::MAX {
                continue;
            }
            let id = reps.len();
            reps.push(start);
            let mut stack = vec![start];
            position_to_rep[start] = start;
            position_to_orbit[start] = id;
            while let Some(p) = stack.pop() {
                for &g in &gens {
                    let (i, j) = group.act_unchecked(g, (p / n, p % n), n);
                    let q = i * n + j;
                    if position_to_rep[q] == usize::MAX {
                        position_to_rep[q] = start;
                        position_to_orbit[q] = id;
                        stack.push(q);
                    }
                }
            }
        }
        Ok(CanonicalMaps {
            grid_side,
            group,
            position_to_rep,
            position_to_orbit,
            reps,
            pair_group: None,
            pair_to_canonical: Vec::new(),
        })
    }

    /// Position tables plus the pair table under `pair_group` (normally D4).
    pub fn with_pairs(grid_side: usize, group: GroupSpec, pair_group: GroupSpec) -> Result<Self> {
        let mut maps = Self::new(grid_side, group)?;
        if !pair_group.acts_on_grid() {
            return Err(domain(format!("group {} does not act on square grids", pair_group.name())));
        }
        let n = grid_side;
        let cells = n * n;
        let gens = pair_group.generators();
        let mut table = vec![usize::MAX; cells * cells];
        for start in 0..cells * cells {
            if table[start] != usize::MAX {
                continue;
            }
            table[start] = start;
            let mut stack = vec![start];
            while let Some(pair) = stack.pop() {
                let (a, b) = (pair / cells, pair % cells);
                for &g in &gens {
                    let (ai, aj) = pair_group.act_unchecked(g, (a / n, a % n), n);
                    let (bi, bj) = pair_group.act_unchecked(g, (b / n, b % n), n);
                    let q = (ai * n + aj) * cells + bi * n + bj;
                    if table[q] == usize::MAX {
                        table[q] = start;
                        stack.push(q);
                    }
                }
            }
        }
        maps.pair_group = Some(pair_group);
        maps.pair_to_canonical = table;
        Ok(maps)
    }

    pub fn grid_side(&self) -> usize {
        self.grid_side
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn pair_group(&self) -> Option<&GroupSpec> {
        self.pair_group.as_ref()
    }

    pub fn orbit_count(&self) -> usize {
        self.reps.len()
    }

    fn index(&self, p: Position) -> usize {
        assert!(p.0 < self.grid_side && p.1 < self.grid_side, "position {p:?} off grid");
        p.0 * self.grid_side + p.1
    }

    fn pos(&self, idx: usize) -> Position {
        (idx / self.grid_side, idx % self.grid_side)
    }

    pub fn rep(&self, p: Position) -> Position {
        self.pos(self.position_to_rep[self.index(p)])
    }

    /// Dense orbit id of `p`, ordered by representative.
    pub fn orbit_id(&self, p: Position) -> usize {
        self.position_to_orbit[self.index(p)]
    }

    /// Orbit ids for every position in row-major order.
    pub fn orbit_ids(&self) -> &[usize] {
        &self.position_to_orbit
    }

    pub fn representatives(&self) -> Vec<Position> {
        self.reps.iter().map(|&r| self.pos(r)).collect()
    }

    pub fn has_pairs(&self) -> bool {
        self.pair_group.is_some()
    }

    /// Canonical pair of `(pi, pj)`. Panics if the pair table was not built.
    pub fn canonical_pair(&self, pi: Position, pj: Position) -> (Position, Position) {
        assert!(self.has_pairs(), "pair table not built");
        let cells = self.grid_side * self.grid_side;
        let c = self.pair_to_canonical[self.index(pi) * cells + self.index(pj)];
        (self.pos(c / cells), self.pos(c % cells))
    }

    /// `p_jc - p_ic` for the canonical pair of `(pi, pj)`.
    pub fn canonical_displacement(&self, pi: Position, pj: Position) -> (isize, isize) {
        let (a, b) = self.canonical_pair(pi, pj);
        (b.0 as isize - a.0 as isize, b.1 as isize - a.1 as isize)
    }

    /// Writes `i,j,rep_i,rep_j` rows for every position.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "rep_i", "rep_j"])?;
        for idx in 0..self.grid_side * self.grid_side {
            let (i, j) = self.pos(idx);
            let (ri, rj) = self.pos(self.position_to_rep[idx]);
            w.write_record([i, j, ri, rj].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}
