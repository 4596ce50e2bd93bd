//! The subgroup lattice of `(ℤ/pˡ)ⁿ`.
//!
//! Subgroups are represented by the canonical column Hermite form of a
//! generator matrix mod `p^l`, which gives O(1) equality, a total order,
//! and hashing.  A subgroup corresponds to the lattice `H·ℤⁿ + pˡ·ℤⁿ`
//! sandwiched between `pˡℤⁿ` and `ℤⁿ`; its quotient invariants are the
//! Smith exponents of that lattice.
//!
//! On top of the raw lattice sit the combinatorial invariants used by the
//! fixed-point bookkeeping: rank and cotype of the quotient, `GL_n(ℤ/pˡ)`
//! orbits with stabilizer indices, the level-restriction map θ, abelian
//! double-coset counts, and the census of open sublattices of `ℤⁿ`.

use crate::padic::{lcm_cert, PadicContext, PMatrix};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::{HashMap, HashSet};

/// Default enumeration budget: ambient group order `p^{ln}` must not
/// exceed this unless the caller raises it.
pub const DEFAULT_BUDGET: u128 = 1 << 16;

/// The ambient group `(ℤ/pˡ)ⁿ` (the `pˡ`-torsion of the p-adic n-torus).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TorusLevel {
    pub p: u64,
    pub l: u32,
    pub n: usize,
}

impl TorusLevel {
    pub fn new(p: u64, l: u32, n: usize) -> Result<Self> {
        if l == 0 || n == 0 {
            return Err(Error::DimensionMismatch("level and rank must be >= 1".into()));
        }
        // fail early if the modulus is unrepresentable
        PadicContext::new(p, l)?;
        Ok(TorusLevel { p, l, n })
    }

    /// Context for arithmetic mod `p^l`.
    pub fn ctx(&self) -> PadicContext {
        PadicContext::new(self.p, self.l).expect("validated at construction")
    }

    /// `p^{ln}`, the order of the ambient group.
    pub fn ambient_order(&self) -> u128 {
        let mut r: u128 = 1;
        for _ in 0..(self.l as usize * self.n) {
            r *= self.p as u128;
        }
        r
    }

    pub fn check_budget(&self, budget: u128) -> Result<()> {
        let needed = self.ambient_order();
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        Ok(())
    }

    /// Full group as a subgroup of itself.
    pub fn full_subgroup(&self) -> Subgroup {
        Subgroup::from_gens(*self, &PMatrix::identity(self.ctx(), self.n))
    }

    pub fn trivial_subgroup(&self) -> Subgroup {
        Subgroup::from_gens(*self, &PMatrix::zero(self.ctx(), self.n, self.n))
    }
}

/// A subgroup of `(ℤ/pˡ)ⁿ` in canonical generator form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subgroup {
    level: TorusLevel,
    /// canonical column Hermite generator matrix mod `p^l`
    gens: PMatrix,
    /// pivot exponent per row; `l` marks a zero column
    pivot_exps: Vec<u32>,
    /// Smith exponents of the lattice `H·ℤⁿ + pˡℤⁿ`: the quotient
    /// `(ℤ/pˡ)ⁿ / K` is `⊕ ℤ/p^{e_i}`, sorted ascending
    quot_exps: Vec<u32>,
    order: u128,
}

/// Rank and complementary exponents of the quotient by a subgroup.
///
/// Entries are `l - e_i` over the nonzero quotient exponents; a zero entry
/// (from a full-level cyclic factor) is legal levelwise and flagged rather
/// than suppressed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CotypeSignature {
    pub rank: usize,
    pub entries: Vec<u32>,
}

impl CotypeSignature {
    pub fn has_zero_entries(&self) -> bool {
        self.entries.iter().any(|&e| e == 0)
    }
}

/// One `GL_n(ℤ/pˡ)`-orbit of subgroups.
#[derive(Debug, Clone)]
pub struct OrbitReport {
    pub representative: Subgroup,
    pub orbit_size: u128,
    pub stabilizer_index: u128,
    /// abstract isomorphism type of the subgroups in the orbit, as the
    /// multiset of exponents of its cyclic decomposition
    pub iso_class: Vec<u32>,
}

impl PartialOrd for Subgroup {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Subgroup {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order
            .cmp(&other.order)
            .then_with(|| self.gens.to_int_rows().cmp(&other.gens.to_int_rows()))
    }
}

impl Subgroup {
    /// Canonicalizes an arbitrary generator matrix (columns generate).
    ///
    /// The subgroup corresponds to the lattice spanned by the generators
    /// together with `pˡℤⁿ`; both the Hermite form and the quotient
    /// invariants are computed one level up so that mod-`pˡ` wraparound
    /// (e.g. `2·(2,1) = (0,2)` in `(ℤ/4)²`) is accounted for.
    pub fn from_gens(level: TorusLevel, gens: &PMatrix) -> Subgroup {
        assert_eq!(gens.rows(), level.n, "generator rows must match rank");
        let n = level.n;
        let lift_ctx = PadicContext::new(level.p, level.l + 1).expect("level+1 precision");
        let low_mod = level.ctx().modulus();
        let mut lifted = PMatrix::zero(lift_ctx, n, gens.cols() + n);
        for i in 0..n {
            for j in 0..gens.cols() {
                lifted.set(i, j, gens.get(i, j) % low_mod);
            }
            lifted.set(i, gens.cols() + i, lift_ctx.p_pow(level.l));
        }
        let (h_lift, exps) = lifted.hermite_square();
        debug_assert!(exps.iter().all(|&e| e <= level.l));
        let mut quot = h_lift.smith().exps;
        quot.sort_unstable();
        let order = exps
            .iter()
            .fold(1u128, |acc, &e| acc * pow(level.p as u128, level.l - e));
        let h = h_lift.reduce_to(level.l).expect("reduce to level");
        Subgroup {
            level,
            gens: h,
            pivot_exps: exps,
            quot_exps: quot,
            order,
        }
    }

    /// Builds the subgroup generated by a list of element vectors.
    pub fn from_elements(level: TorusLevel, elems: &[Vec<u64>]) -> Subgroup {
        let ctx = level.ctx();
        let cols = elems.len().max(1);
        let mut m = PMatrix::zero(ctx, level.n, cols);
        for (j, e) in elems.iter().enumerate() {
            for i in 0..level.n {
                m.set(i, j, e[i] % ctx.modulus());
            }
        }
        Subgroup::from_gens(level, &m)
    }

    pub fn level(&self) -> TorusLevel {
        self.level
    }

    pub fn order(&self) -> u128 {
        self.order
    }

    pub fn gens(&self) -> &PMatrix {
        &self.gens
    }

    /// Quotient cyclic type: exponents `e_i` with
    /// `(ℤ/pˡ)ⁿ/K ≅ ⊕ ℤ/p^{e_i}`, ascending, zeros included.
    pub fn quotient_type(&self) -> &[u32] {
        &self.quot_exps
    }

    /// Cyclic type of the subgroup itself (trivial factors dropped).
    pub fn iso_class(&self) -> Vec<u32> {
        let mut t: Vec<u32> = self
            .quot_exps
            .iter()
            .filter(|&&e| e < self.level.l)
            .map(|&e| self.level.l - e)
            .collect();
        t.sort_unstable();
        t
    }

    /// Minimal number of generators of the quotient, and the multiset
    /// `{l - e_i}` over its nonzero exponents.
    pub fn rank_and_cotype(&self) -> (usize, CotypeSignature) {
        let mut entries: Vec<u32> = self
            .quot_exps
            .iter()
            .filter(|&&e| e > 0)
            .map(|&e| self.level.l - e)
            .collect();
        entries.sort_unstable();
        let rank = entries.len();
        (rank, CotypeSignature { rank, entries })
    }

    pub fn is_trivial(&self) -> bool {
        self.order == 1
    }

    pub fn is_full(&self) -> bool {
        self.order == self.level.ambient_order()
    }

    /// Membership test by forward substitution through the Hermite form.
    pub fn contains(&self, x: &[u64]) -> bool {
        let ctx = self.level.ctx();
        let n = self.level.n;
        let mut c = vec![0u64; n];
        for i in 0..n {
            let mut r = x[i] % ctx.modulus();
            for j in 0..i {
                r = ctx.sub(r, ctx.mul(self.gens.get(i, j), c[j]));
            }
            let e = self.pivot_exps[i];
            if e >= self.level.l {
                if r != 0 {
                    return false;
                }
            } else {
                if ctx.val(r) < e {
                    return false;
                }
                c[i] = r / ctx.p_pow(e);
            }
        }
        true
    }

    pub fn contains_subgroup(&self, other: &Subgroup) -> bool {
        (0..self.level.n).all(|j| self.contains(&other.gens.column(j)))
    }

    /// All elements, as coefficient sweeps over the pivot columns.
    pub fn elements(&self) -> Vec<Vec<u64>> {
        let ctx = self.level.ctx();
        let n = self.level.n;
        let mut out = vec![vec![0u64; n]];
        for i in 0..n {
            let e = self.pivot_exps[i];
            if e >= self.level.l {
                continue;
            }
            let reps = pow(self.level.p as u128, self.level.l - e) as u64;
            let col = self.gens.column(i);
            let mut next = Vec::with_capacity(out.len() * reps as usize);
            for base in &out {
                for k in 0..reps {
                    let v: Vec<u64> = (0..n)
                        .map(|r| ctx.add(base[r], ctx.mul(k, col[r])))
                        .collect();
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    /// Join (sum) of two subgroups of the same ambient group.
    pub fn join(&self, other: &Subgroup) -> Subgroup {
        assert_eq!(self.level, other.level);
        let m = self.gens.hconcat(&other.gens).expect("same level");
        Subgroup::from_gens(self.level, &m)
    }

    /// Intersection of two subgroups of the same ambient group.
    pub fn intersect(&self, other: &Subgroup) -> Subgroup {
        assert_eq!(self.level, other.level);
        let elems: Vec<Vec<u64>> = self
            .elements()
            .into_iter()
            .filter(|x| other.contains(x))
            .collect();
        Subgroup::from_elements(self.level, &elems)
    }

    /// Image under an ambient-linear map given by a matrix mod `p^l`.
    pub fn linear_image(&self, m: &PMatrix) -> Subgroup {
        let mapped = m.mul(&self.gens).expect("same context");
        Subgroup::from_gens(self.level, &mapped)
    }

    /// The level-restriction map `θ(l, l')(K) = K ∩ C_{p^{l'}}^{×n}`,
    /// landing in `(ℤ/p^{l'})ⁿ` via division by `p^{l-l'}`.
    pub fn restrict_theta(&self, l2: u32) -> Result<Subgroup> {
        let l = self.level.l;
        if l2 > l || l2 == 0 {
            return Err(Error::LevelTooSmall { needed: 1, got: l2 });
        }
        if l2 == l {
            return Ok(self.clone());
        }
        let target = TorusLevel::new(self.level.p, l2, self.level.n)?;
        let ctx = self.level.ctx();
        let shift = pow(self.level.p as u128, l - l2) as u64;
        let tors = pow(self.level.p as u128, l2) as u64;
        let elems: Vec<Vec<u64>> = self
            .elements()
            .into_iter()
            .filter(|x| x.iter().all(|&xi| ctx.mul(xi, tors) == 0))
            .map(|x| x.iter().map(|&xi| xi / shift).collect())
            .collect();
        Ok(Subgroup::from_elements(target, &elems))
    }

    /// JSON descriptor used by the CLI.
    pub fn descriptor(&self) -> serde_json::Value {
        let (_, ct) = self.rank_and_cotype();
        serde_json::json!({
            "p": self.level.p,
            "l": self.level.l,
            "n": self.level.n,
            "gens": self.gens.to_int_rows(),
            "order": self.order.to_string(),
            "quotient_type": self.quot_exps,
            "cotype": ct.entries,
        })
    }
}

fn pow(b: u128, e: u32) -> u128 {
    let mut r = 1u128;
    for _ in 0..e {
        r *= b;
    }
    r
}

/// Complete duplicate-free list of subgroups, canonical forms, sorted.
///
/// Enumeration runs over pivot-exponent profiles with reduced fill-in
/// entries; candidates are canonicalized and deduplicated, so the list is
/// exact.  The subset-closure method below is the oracle for tiny cases.
pub fn enumerate_subgroups(level: TorusLevel, budget: u128) -> Result<Vec<Subgroup>> {
    level.check_budget(budget)?;
    let ctx = level.ctx();
    let n = level.n;
    let l = level.l;
    let mut seen: HashSet<Subgroup> = HashSet::new();
    let mut profile = vec![0u32; n];
    loop {
        // positions below a live pivot, with their fill-in radix p^{e_row}
        let free_positions: Vec<(usize, usize, u64)> = (0..n)
            .flat_map(|j| (j + 1..n).map(move |i| (i, j)))
            .filter(|&(_, j)| profile[j] < l)
            .map(|(i, j)| (i, j, pow(level.p as u128, profile[i].min(l)) as u64))
            .collect();
        let mut counters = vec![0u64; free_positions.len()];
        loop {
            let mut h = PMatrix::zero(ctx, n, n);
            for j in 0..n {
                if profile[j] < l {
                    h.set(j, j, ctx.p_pow(profile[j]));
                }
            }
            for (k, &(i, j, _)) in free_positions.iter().enumerate() {
                h.set(i, j, counters[k]);
            }
            seen.insert(Subgroup::from_gens(level, &h));
            let mut k = 0;
            loop {
                if k == free_positions.len() {
                    break;
                }
                counters[k] += 1;
                if counters[k] < free_positions[k].2 {
                    break;
                }
                counters[k] = 0;
                k += 1;
            }
            if k == free_positions.len() {
                break;
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                break;
            }
            profile[k] += 1;
            if profile[k] <= l {
                break;
            }
            profile[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    let mut out: Vec<Subgroup> = seen.into_iter().collect();
    out.sort();
    Ok(out)
}

/// Brute-force closure enumeration, kept as an oracle for tiny instances.
pub fn enumerate_subgroups_closure(level: TorusLevel, budget: u128) -> Result<Vec<Subgroup>> {
    level.check_budget(budget)?;
    let all = level.full_subgroup().elements();
    let mut seen: HashSet<Subgroup> = HashSet::new();
    let mut work = vec![level.trivial_subgroup()];
    while let Some(s) = work.pop() {
        if !seen.insert(s.clone()) {
            continue;
        }
        for x in &all {
            if !s.contains(x) {
                let mut gens: Vec<Vec<u64>> = (0..level.n).map(|j| s.gens().column(j)).collect();
                gens.push(x.clone());
                work.push(Subgroup::from_elements(level, &gens));
            }
        }
    }
    let mut out: Vec<Subgroup> = seen.into_iter().collect();
    out.sort();
    Ok(out)
}

/// Order of `GL_n(ℤ/pˡ)`.
pub fn gl_order(level: TorusLevel) -> u128 {
    let p = level.p as u128;
    let n = level.n as u32;
    let mut r = pow(p, (level.l - 1) * n * n);
    for i in 0..n {
        r *= pow(p, n) - pow(p, i);
    }
    r
}

/// Generating set of `GL_n(ℤ/pˡ)`: transvections plus unit dilations.
pub fn gl_generators(level: TorusLevel) -> Vec<PMatrix> {
    let ctx = level.ctx();
    let n = level.n;
    let mut gens = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let mut t = PMatrix::identity(ctx, n);
                t.set(i, j, 1);
                gens.push(t);
            }
        }
    }
    for u in unit_group_generators(level.p, level.l) {
        let mut d = PMatrix::identity(ctx, n);
        d.set(0, 0, u);
        gens.push(d);
    }
    gens
}

fn unit_group_generators(p: u64, l: u32) -> Vec<u64> {
    let m = pow(p as u128, l) as u64;
    if p == 2 {
        return match l {
            1 => vec![],
            2 => vec![3],
            _ => vec![m - 1, 3],
        };
    }
    // (ℤ/pˡ)* is cyclic for odd p; find a generator
    let order = (m / p) * (p - 1);
    let mut factors = Vec::new();
    let mut o = order;
    let mut d = 2;
    while d * d <= o {
        if o % d == 0 {
            factors.push(d);
            while o % d == 0 {
                o /= d;
            }
        }
        d += 1;
    }
    if o > 1 {
        factors.push(o);
    }
    'outer: for g in 2..m {
        if g % p == 0 {
            continue;
        }
        for &q in &factors {
            if pow_mod(g, order / q, m) == 1 {
                continue 'outer;
            }
        }
        return vec![g];
    }
    unreachable!("cyclic unit group has a generator")
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = (r as u128 * b as u128 % m as u128) as u64;
        }
        b = (b as u128 * b as u128 % m as u128) as u64;
        e >>= 1;
    }
    r
}

/// Orbits of the `GL_n(ℤ/pˡ)` action on the subgroup lattice.
///
/// Each orbit's members share one abstract isomorphism class and distinct
/// orbits have distinct classes; the stabilizer index equals the orbit
/// size by orbit-stabilizer.
pub fn gl_orbits(level: TorusLevel, budget: u128) -> Result<Vec<OrbitReport>> {
    let subs = enumerate_subgroups(level, budget)?;
    let gens = gl_generators(level);
    let mut visited: HashSet<Subgroup> = HashSet::new();
    let mut reports = Vec::new();
    for s in &subs {
        if visited.contains(s) {
            continue;
        }
        let mut orbit: HashSet<Subgroup> = HashSet::new();
        let mut work = vec![s.clone()];
        while let Some(t) = work.pop() {
            if !orbit.insert(t.clone()) {
                continue;
            }
            for g in &gens {
                work.push(t.linear_image(g));
            }
        }
        let representative = orbit.iter().min().unwrap().clone();
        let orbit_size = orbit.len() as u128;
        visited.extend(orbit.into_iter());
        reports.push(OrbitReport {
            iso_class: representative.iso_class(),
            orbit_size,
            stabilizer_index: orbit_size,
            representative,
        });
    }
    reports.sort_by(|a, b| a.representative.cmp(&b.representative));
    Ok(reports)
}

/// Kernel subgroup `L_α ⊆ (ℤ/pˡ)ⁿ` of a monoid matrix, canonical form.
pub fn kernel_subgroup(alpha: &PMatrix, l: u32) -> Result<Subgroup> {
    let level = TorusLevel::new(alpha.context().prime(), l, alpha.rows())?;
    let gens = alpha.kernel_gen_matrix(l)?;
    Ok(Subgroup::from_gens(level, &gens))
}

/// Abelian double-coset count `|L_b̃ \ L_{lcm} / L_ã|` for a monoid pair,
/// computed as `|L_lcm| / |L_ã + L_b̃|`.
///
/// The working level is the maximal Smith exponent of the lcm.
pub fn double_coset_count(a: &PMatrix, b: &PMatrix) -> Result<u128> {
    let cert = lcm_cert(a, b)?;
    let exps = cert.lcm.monoid_exponents()?;
    let l = (*exps.iter().max().unwrap_or(&0)).max(1);
    let l_lcm = kernel_subgroup(&cert.lcm, l)?;
    let l_at = kernel_subgroup(&cert.ftilde, l)?;
    let l_bt = kernel_subgroup(&cert.gtilde, l)?;
    let sum = l_at.join(&l_bt);
    Ok(l_lcm.order() / sum.order())
}

/// Number of full-rank sublattices of `ℤⁿ` of index `p^e`, for `e` up to
/// `max_exponent`, by Hermite-profile counting.
pub fn open_sublattice_census(n: usize, p: u64, max_exponent: u32) -> Vec<u128> {
    let mut counts = vec![0u128; max_exponent as usize + 1];
    // a pivot-exponent profile (a_0..a_{n-1}) contributes prod_i p^{a_i * i}
    // lattices: column i carries a_i and has i earlier columns to fill
    let mut profile = vec![0u32; n];
    loop {
        let e: u32 = profile.iter().sum();
        if e <= max_exponent {
            let weight = profile
                .iter()
                .enumerate()
                .fold(1u128, |acc, (i, &a)| acc * pow(p as u128, a * i as u32));
            counts[e as usize] += weight;
        }
        let mut k = 0;
        loop {
            if k == n {
                return counts;
            }
            profile[k] += 1;
            if profile[k] <= max_exponent {
                break;
            }
            profile[k] = 0;
            k += 1;
        }
    }
}

/// Divisor-sum oracle for the census:
/// `Σ_{d_1⋯d_n = p^e} d_2·d_3²⋯d_n^{n-1}` over p-power divisors.
pub fn open_sublattice_divisor_oracle(n: usize, p: u64, e: u32) -> u128 {
    fn rec(n: usize, p: u128, e: u32, depth: usize) -> u128 {
        if depth == n - 1 {
            return pow(p, e * depth as u32);
        }
        (0..=e)
            .map(|a| pow(p, a * depth as u32) * rec(n, p, e - a, depth + 1))
            .sum()
    }
    rec(n, p as u128, e, 0)
}

/// Exhaustive census oracle: enumerate canonical sublattice forms mod p^{e+1}
/// and count distinct ones of index exactly `p^e`.
pub fn open_sublattice_brute(n: usize, p: u64, e: u32) -> Result<u128> {
    let level = TorusLevel::new(p, e + 1, n)?;
    let subs = enumerate_subgroups(level, u128::MAX >> 1)?;
    // sublattices of index p^e containing p^{e+1}ℤⁿ correspond to subgroups
    // of (ℤ/p^{e+1})ⁿ of index p^e, and every index-p^e sublattice contains
    // p^eℤⁿ ⊇ p^{e+1}ℤⁿ
    let target = level.ambient_order() / pow(p as u128, e);
    Ok(subs.iter().filter(|s| s.order() == target).count() as u128)
}

/// Groups subgroups by `(rank, cotype)`.
pub fn subgroups_by_rank_cotype(
    level: TorusLevel,
    budget: u128,
) -> Result<HashMap<(usize, Vec<u32>), Vec<Subgroup>>> {
    let mut map: HashMap<(usize, Vec<u32>), Vec<Subgroup>> = HashMap::new();
    for s in enumerate_subgroups(level, budget)? {
        let (rank, ct) = s.rank_and_cotype();
        map.entry((rank, ct.entries)).or_default().push(s);
    }
    Ok(map)
}
