//! Rank/cotype moduli of toral subgroups and the homotopy-group assembly
//! bookkeeping built on them.
//!
//! For the ambient `(ℤ/pˡ)ⁿ`, the moduli set `M[k,α](l)` collects the
//! subgroups whose quotient has rank `k` and cotype `α`; it is a single
//! `GL_n(ℤ/pˡ)`-orbit, so its size is a stabilizer index.  Lowering the
//! level through θ sends `M[k, θ(α)](l+1)` to `M[k, α](l)`, bijectively
//! once the level clears the cotype entries.
//!
//! The assembly formula pairs each moduli tower with a user-supplied table
//! of homotopy groups: a free generator contributes a tower `ℤ/pˡ` of
//! growing exponent over the orbit permutation module, a torsion summand
//! contributes itself tensored with the orbit.  Limits are never taken
//! symbolically; reports show the groups at every level `l ≤ l_max`
//! together with whether the θ-step has stabilized, and the reader can
//! take the limit where the tower is constant.
//!
//! The π₀ census of the restriction-limit is the open-sublattice count,
//! one free ℤ factor per sublattice of `ℤⁿ` grouped by index.

use crate::burnside::AbelianGroupInvariants;
use crate::lattice::{
    enumerate_subgroups, gl_orbits, open_sublattice_census, subgroups_by_rank_cotype, Subgroup,
    TorusLevel,
};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};

/// A cotype: `k` unordered nonnegative entries (levelwise entries of 0
/// are legal and flagged downstream rather than suppressed).
pub type Cotype = Vec<u32>;

fn normalized(alpha: &[u32]) -> Cotype {
    let mut a = alpha.to_vec();
    a.sort_unstable();
    a
}

/// User-suppliable table of homotopy groups, indexed by `(k, degree)`.
///
/// The shipped default carries only the forced bottom cell: in degree `k`
/// the group is free of rank one.
#[derive(Debug, Clone, Default)]
pub struct HomotopyTable {
    entries: HashMap<(u32, u32), AbelianGroupInvariants>,
}

impl HomotopyTable {
    /// Only the bottom cells `degree = k ↦ ℤ`.
    pub fn bottom_cells(max_k: u32) -> HomotopyTable {
        let mut t = HomotopyTable::default();
        for k in 1..=max_k {
            t.insert(k, k, AbelianGroupInvariants { free_rank: 1, torsion: vec![] });
        }
        t
    }

    pub fn insert(&mut self, k: u32, degree: u32, inv: AbelianGroupInvariants) {
        self.entries.insert((k, degree), inv);
    }

    pub fn get(&self, k: u32, degree: u32) -> Option<&AbelianGroupInvariants> {
        self.entries.get(&(k, degree))
    }

    /// Parses the JSON list format
    /// `[{"k":…, "degree":…, "rank":…, "torsion":[…]}, …]`.
    pub fn from_json(v: &serde_json::Value) -> Result<HomotopyTable> {
        let arr = v
            .as_array()
            .ok_or_else(|| Error::Parse("homotopy table must be a JSON array".into()))?;
        let mut t = HomotopyTable::default();
        for e in arr {
            let k = e["k"].as_u64().ok_or_else(|| Error::Parse("table entry k".into()))? as u32;
            let degree = e["degree"]
                .as_u64()
                .ok_or_else(|| Error::Parse("table entry degree".into()))? as u32;
            let rank = e["rank"].as_u64().unwrap_or(0) as usize;
            let torsion: Vec<u128> = e["torsion"]
                .as_array()
                .map(|a| a.iter().filter_map(|x| x.as_u64()).map(u128::from).collect())
                .unwrap_or_default();
            if degree < k {
                return Err(Error::Parse(format!(
                    "table entry below the connectivity line: degree {degree} < k {k}"
                )));
            }
            t.insert(k, degree, AbelianGroupInvariants { free_rank: rank, torsion });
        }
        Ok(t)
    }
}

/// Number of subgroups of `(ℤ/pˡ)ⁿ` with quotient rank `k` and cotype
/// `alpha`; equals the orbit size of any representative.
pub fn moduli_size(
    n: usize,
    p: u64,
    l: u32,
    k: usize,
    alpha: &[u32],
    budget: u128,
) -> Result<u128> {
    let level = TorusLevel::new(p, l, n)?;
    let map = subgroups_by_rank_cotype(level, budget)?;
    Ok(map
        .get(&(k, normalized(alpha)))
        .map_or(0, |v| v.len() as u128))
}

/// All members of `M[k,α](l)`.
pub fn moduli_members(
    n: usize,
    p: u64,
    l: u32,
    k: usize,
    alpha: &[u32],
    budget: u128,
) -> Result<Vec<Subgroup>> {
    let level = TorusLevel::new(p, l, n)?;
    let want = normalized(alpha);
    Ok(enumerate_subgroups(level, budget)?
        .into_iter()
        .filter(|s| {
            let (rank, ct) = s.rank_and_cotype();
            rank == k && ct.entries == want
        })
        .collect())
}

/// The θ-shift on cotypes: every entry grows by one.
pub fn theta_shift(alpha: &[u32]) -> Cotype {
    normalized(&alpha.iter().map(|&e| e + 1).collect::<Vec<u32>>())
}

/// The restriction map `M[k, θ(α)](l+1) → M[k, α](l)`, with basepoint
/// images recorded as `None`.
#[derive(Debug, Clone)]
pub struct ThetaModuli {
    /// each member of `M[k, θ(α)](l+1)` with its image, `None` when the
    /// rank drops and the subgroup maps to the basepoint
    pub pairs: Vec<(Subgroup, Option<Subgroup>)>,
    /// the target moduli set `M[k, α](l)`
    pub target: Vec<Subgroup>,
    pub bijective: bool,
}

/// Computes the θ-restriction between adjacent moduli levels.
pub fn theta_moduli(
    n: usize,
    p: u64,
    l: u32,
    k: usize,
    alpha: &[u32],
    budget: u128,
) -> Result<ThetaModuli> {
    let want = normalized(alpha);
    let source = moduli_members(n, p, l + 1, k, &theta_shift(&want), budget)?;
    let target = moduli_members(n, p, l, k, &want, budget)?;
    let mut pairs = Vec::with_capacity(source.len());
    let mut images: HashSet<Subgroup> = HashSet::new();
    let mut all_hit = true;
    for s in source {
        let down = s.restrict_theta(l)?;
        let (rank, ct) = down.rank_and_cotype();
        if rank == k && ct.entries == want {
            images.insert(down.clone());
            pairs.push((s, Some(down)));
        } else {
            all_hit = false;
            pairs.push((s, None));
        }
    }
    let injective = images.len() == pairs.len();
    let surjective = target.iter().all(|t| images.contains(t));
    Ok(ThetaModuli {
        bijective: all_hit && injective && surjective,
        pairs,
        target,
    })
}

/// The group `ℤ[orbit] ⊗ π/pˡ` at one level of an assembly tower.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelGroup {
    pub l: u32,
    pub moduli_size: u128,
    pub stabilizer_index: u128,
    /// torsion summands as exponent ↦ multiplicity (`C_{p^e}` each)
    pub summands: BTreeMap<u32, u128>,
    /// whether the θ-step from the next level down is a bijection
    pub theta_stabilized: bool,
}

/// One `(k, α)` factor of the assembly formula, reported levelwise.
#[derive(Debug, Clone, Serialize)]
pub struct PiFactorReport {
    pub k: u32,
    pub alpha: Cotype,
    pub degree: u32,
    pub levels: Vec<LevelGroup>,
    pub flagged_zero_cotype: bool,
}

/// Assembles the tower for one `(k, α, degree)`: for each level
/// `l ≤ l_max`, the finite group `ℤ[M[k,α](l)] ⊗ π_degree/pˡ`.
///
/// Free generators of the table entry contribute `ℤ/pˡ` towers; torsion
/// summands `C` contribute `C ⊗ ℤ[orbit]` (capped at `pˡ`).
pub fn assemble_pi(
    n: usize,
    p: u64,
    k: u32,
    alpha: &[u32],
    degree: u32,
    l_max: u32,
    table: &HomotopyTable,
    budget: u128,
) -> Result<PiFactorReport> {
    let entry = table
        .get(k, degree)
        .ok_or(Error::MissingTableEntry { k, degree })?;
    let alpha = normalized(alpha);
    if alpha.len() != k as usize {
        return Err(Error::DimensionMismatch(format!(
            "cotype size {} must equal rank {k}",
            alpha.len()
        )));
    }
    let l_min = alpha.iter().max().map_or(1, |&m| m + 1).max(1);
    let mut levels = Vec::new();
    for l in l_min..=l_max {
        let size = moduli_size(n, p, l, k as usize, &alpha, budget)?;
        let theta_ok = if l > l_min {
            theta_moduli(n, p, l - 1, k as usize, &alpha, budget)?.bijective
        } else {
            false
        };
        let mut summands: BTreeMap<u32, u128> = BTreeMap::new();
        if size > 0 {
            // free part: rank-many ℤ/pˡ per orbit point
            if entry.free_rank > 0 {
                *summands.entry(l).or_insert(0) += entry.free_rank as u128 * size;
            }
            // torsion part: each C_{p^v} caps at pˡ
            for &t in &entry.torsion {
                let v = p_power_exponent(t, p).ok_or_else(|| {
                    Error::Parse(format!("torsion summand {t} is not a power of {p}"))
                })?;
                let e = v.min(l);
                if e > 0 {
                    *summands.entry(e).or_insert(0) += size;
                }
            }
        }
        levels.push(LevelGroup {
            l,
            moduli_size: size,
            stabilizer_index: size,
            summands,
            theta_stabilized: theta_ok,
        });
    }
    Ok(PiFactorReport {
        k,
        flagged_zero_cotype: alpha.iter().any(|&e| e == 0),
        alpha,
        degree,
        levels,
    })
}

fn p_power_exponent(mut t: u128, p: u64) -> Option<u32> {
    let mut e = 0;
    while t > 1 {
        if t % p as u128 != 0 {
            return None;
        }
        t /= p as u128;
        e += 1;
    }
    Some(e)
}

/// The π₀ census of the restriction limit: one free ℤ factor per open
/// sublattice of `ℤⁿ`, grouped by index `p^e`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrCensus {
    pub n: usize,
    pub p: u64,
    /// counts\[e\] = number of factors of index `p^e`
    pub counts: Vec<u128>,
    pub total: u128,
}

pub fn tr_pi0(n: usize, p: u64, max_index_exponent: u32) -> TrCensus {
    let counts = open_sublattice_census(n, p, max_index_exponent);
    let total = counts.iter().sum();
    TrCensus { n, p, counts, total }
}

/// Primitive cotypes `O_k`: multisets of `k` positive integers with at
/// least one entry equal to 1, entries bounded.
pub fn primitive_cotypes(k: usize, bound: u32) -> Vec<Cotype> {
    let mut out = Vec::new();
    let mut cur = vec![1u32; k];
    fn rec(k: usize, bound: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Cotype>) {
        if pos == k {
            if cur.iter().any(|&e| e == 1) {
                out.push(cur.clone());
            }
            return;
        }
        let lo = if pos == 0 { 1 } else { cur[pos - 1] };
        for e in lo..=bound {
            cur[pos] = e;
            rec(k, bound, pos + 1, cur, out);
        }
    }
    rec(k, bound, 0, &mut cur, &mut out);
    out
}

/// All positive cotypes of size `k` with entries bounded.
pub fn positive_cotypes(k: usize, bound: u32) -> Vec<Cotype> {
    let mut out = Vec::new();
    let mut cur = vec![1u32; k];
    fn rec(k: usize, bound: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Cotype>) {
        if pos == k {
            out.push(cur.clone());
            return;
        }
        let lo = if pos == 0 { 1 } else { cur[pos - 1] };
        for e in lo..=bound {
            cur[pos] = e;
            rec(k, bound, pos + 1, cur, out);
        }
    }
    rec(k, bound, 0, &mut cur, &mut out);
    out
}

/// Decomposes a positive cotype as `α = θ^j(α₀)` with `α₀` primitive:
/// `j = min(α) − 1`.
pub fn theta_orbit(alpha: &[u32]) -> Result<(Cotype, u32)> {
    let a = normalized(alpha);
    let Some(&min) = a.first() else {
        return Err(Error::DimensionMismatch("empty cotype".into()));
    };
    if min == 0 {
        return Err(Error::DimensionMismatch(
            "θ-orbit decomposition needs positive entries".into(),
        ));
    }
    let j = min - 1;
    let base: Cotype = a.iter().map(|&e| e - j).collect();
    Ok((base, j))
}

/// Report for the diagonal filtration quotient: one assembly factor per
/// primitive cotype, implementing the equalizer collapse to θ-orbits.
#[derive(Debug, Clone, Serialize)]
pub struct TcDeltaReport {
    pub k: u32,
    pub degree: u32,
    pub factors: Vec<PiFactorReport>,
}

/// Product over primitive cotypes `O_k` (entries `≤ l_max − 1`) of the
/// assembly factors; an empty `O_k` yields the empty product.
pub fn tc_delta_quotient(
    n: usize,
    p: u64,
    k: u32,
    degree: u32,
    l_max: u32,
    table: &HomotopyTable,
    budget: u128,
) -> Result<TcDeltaReport> {
    let bound = l_max.saturating_sub(1);
    let mut factors = Vec::new();
    if bound >= 1 {
        for alpha in primitive_cotypes(k as usize, bound) {
            factors.push(assemble_pi(n, p, k, &alpha, degree, l_max, table, budget)?);
        }
    }
    Ok(TcDeltaReport { k, degree, factors })
}
