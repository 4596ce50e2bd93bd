//! Burnside rings of finite abelian p-groups.
//!
//! A group is carried as a subgroup of an ambient `(ℤ/pˡ)ⁿ`; because the
//! group is abelian, conjugacy classes of subgroups are subgroups and the
//! Burnside ring `A(G)` is free on the subgroup lattice, with basis element
//! `[G/K]` for each subgroup `K ⊆ G`.  The three functors are
//!
//! * restriction along an inclusion `H ⊆ G`
//!   (`[G/K] ↦ ([G:K]/[H:K∩H])·[H/K∩H]`),
//! * induction along an inclusion (`[H/J] ↦ [G/J]`),
//! * fixed points along a surjection `f: G ↠ G'`
//!   (`[G/K] ↦ [G'/f(K)]` when `ker f ⊆ K`, else `0`).
//!
//! Multiplication goes through the table of marks: the mark of `[G/K]` at
//! `L` is `[G:K]` if `L ⊆ K` and `0` otherwise, marks are a ring map, and
//! the mark matrix is triangular with nonzero diagonal, so products are
//! recovered by an exact back-substitution.
//!
//! Everything here is double-checked against a brute-force oracle that
//! manipulates honest permutation representations of finite G-sets.

use crate::lattice::{enumerate_subgroups, Subgroup, TorusLevel};
use crate::padic::PMatrix;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

/// A finite abelian p-group realized as a subgroup of `(ℤ/pˡ)ⁿ`, with the
/// canonical ordered basis of its Burnside ring.
#[derive(Debug, Clone)]
pub struct PGroup {
    group: Subgroup,
    basis: Vec<Subgroup>,
    index: HashMap<Subgroup, usize>,
    marks: OnceLock<Vec<Vec<i64>>>,
}

impl PartialEq for PGroup {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group
    }
}

impl PGroup {
    /// Builds the group and its subgroup basis (sorted by order, then
    /// canonical form).
    pub fn new(group: Subgroup, budget: u128) -> Result<PGroup> {
        let level = group.level();
        let basis: Vec<Subgroup> = enumerate_subgroups(level, budget)?
            .into_iter()
            .filter(|s| group.contains_subgroup(s))
            .collect();
        let index = basis
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        Ok(PGroup {
            group,
            basis,
            index,
            marks: OnceLock::new(),
        })
    }

    pub fn full(level: TorusLevel, budget: u128) -> Result<PGroup> {
        PGroup::new(level.full_subgroup(), budget)
    }

    pub fn subgroup(&self) -> &Subgroup {
        &self.group
    }

    pub fn level(&self) -> TorusLevel {
        self.group.level()
    }

    pub fn order(&self) -> u128 {
        self.group.order()
    }

    pub fn basis(&self) -> &[Subgroup] {
        &self.basis
    }

    pub fn basis_index(&self, k: &Subgroup) -> Option<usize> {
        self.index.get(k).copied()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// `[G/K]` as a Burnside element.
    pub fn orbit(&self, k: &Subgroup) -> BurnsideElement {
        let i = self.basis_index(k).expect("subgroup of the group");
        BurnsideElement::single(self, i)
    }

    pub fn unit(&self) -> BurnsideElement {
        self.orbit(&self.group.clone())
    }

    pub fn free_orbit(&self) -> BurnsideElement {
        self.orbit(&self.level().trivial_subgroup())
    }

    /// Table of marks: `marks[l][k] = |(G/K_k)^{L_l}|`.
    pub fn mark_matrix(&self) -> &Vec<Vec<i64>> {
        self.marks.get_or_init(|| {
            let n = self.basis.len();
            let mut m = vec![vec![0i64; n]; n];
            for (kx, k) in self.basis.iter().enumerate() {
                let mark = (self.order() / k.order()) as i64;
                for (lx, l) in self.basis.iter().enumerate() {
                    if k.contains_subgroup(l) {
                        m[lx][kx] = mark;
                    }
                }
            }
            m
        })
    }
}

/// An element of the Burnside ring `A(G)`: an integer vector over the
/// subgroup basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BurnsideElement {
    /// sparse coefficients over the basis of the owning group
    pub coeffs: BTreeMap<usize, i64>,
    group: Subgroup,
}

/// Fixed-point counts of an element at every subgroup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkVector(pub Vec<i64>);

/// Free rank and invariant factors of a finitely generated abelian group.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct AbelianGroupInvariants {
    pub free_rank: usize,
    /// nontrivial invariant factors in divisibility order
    pub torsion: Vec<u128>,
}

impl BurnsideElement {
    pub fn zero(group: &PGroup) -> Self {
        BurnsideElement {
            coeffs: BTreeMap::new(),
            group: group.subgroup().clone(),
        }
    }

    fn single(group: &PGroup, i: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(i, 1);
        BurnsideElement {
            coeffs,
            group: group.subgroup().clone(),
        }
    }

    pub fn from_coeffs(group: &PGroup, v: &[i64]) -> Self {
        let mut coeffs = BTreeMap::new();
        for (i, &c) in v.iter().enumerate() {
            if c != 0 {
                coeffs.insert(i, c);
            }
        }
        BurnsideElement {
            coeffs,
            group: group.subgroup().clone(),
        }
    }

    pub fn dense(&self, group: &PGroup) -> Vec<i64> {
        let mut v = vec![0i64; group.rank()];
        for (&i, &c) in &self.coeffs {
            v[i] = c;
        }
        v
    }

    pub fn add(&self, other: &BurnsideElement) -> BurnsideElement {
        assert_eq!(self.group, other.group);
        let mut coeffs = self.coeffs.clone();
        for (&i, &c) in &other.coeffs {
            let e = coeffs.entry(i).or_insert(0);
            *e += c;
            if *e == 0 {
                coeffs.remove(&i);
            }
        }
        BurnsideElement {
            coeffs,
            group: self.group.clone(),
        }
    }

    pub fn scale(&self, c: i64) -> BurnsideElement {
        if c == 0 {
            return BurnsideElement {
                coeffs: BTreeMap::new(),
                group: self.group.clone(),
            };
        }
        let coeffs = self.coeffs.iter().map(|(&i, &x)| (i, x * c)).collect();
        BurnsideElement {
            coeffs,
            group: self.group.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Marks of an element: the injective ring map into `∏_L ℤ`.
pub fn marks(group: &PGroup, x: &BurnsideElement) -> MarkVector {
    let m = group.mark_matrix();
    let n = group.rank();
    let mut out = vec![0i64; n];
    for (&k, &c) in &x.coeffs {
        for (row, o) in out.iter_mut().enumerate() {
            *o += c * m[row][k];
        }
    }
    MarkVector(out)
}

/// Inverts the (triangular) mark matrix on a mark vector; panics if the
/// preimage is not integral, which cannot happen for genuine marks.
pub fn from_marks(group: &PGroup, phi: &MarkVector) -> BurnsideElement {
    let m = group.mark_matrix();
    let n = group.rank();
    let mut c = vec![0i128; n];
    for k in (0..n).rev() {
        let mut acc = phi.0[k] as i128;
        for (j, &cj) in c.iter().enumerate().skip(k + 1) {
            acc -= m[k][j] as i128 * cj;
        }
        let d = m[k][k] as i128;
        assert_eq!(acc % d, 0, "mark vector is not integral over the basis");
        c[k] = acc / d;
    }
    let dense: Vec<i64> = c.iter().map(|&x| i64::try_from(x).expect("coefficient fits")).collect();
    BurnsideElement::from_coeffs(group, &dense)
}

/// Product in the Burnside ring, via pointwise multiplication of marks.
pub fn multiply(group: &PGroup, x: &BurnsideElement, y: &BurnsideElement) -> BurnsideElement {
    let mx = marks(group, x);
    let my = marks(group, y);
    let prod = MarkVector(mx.0.iter().zip(&my.0).map(|(a, b)| a * b).collect());
    from_marks(group, &prod)
}

/// Restriction along an inclusion `H ⊆ G`, basiswise
/// `[G/K] ↦ ([G:K]/[H:K∩H])·[H/(K∩H)]`.
pub fn restrict(g: &PGroup, h: &PGroup, x: &BurnsideElement) -> BurnsideElement {
    assert!(
        g.subgroup().contains_subgroup(h.subgroup()),
        "restriction needs an inclusion"
    );
    let mut out = BurnsideElement::zero(h);
    for (&kx, &c) in &x.coeffs {
        let k = &g.basis()[kx];
        let kh = k.intersect(h.subgroup());
        let orbits = (g.order() / k.order()) / (h.order() / kh.order());
        let i = h.basis_index(&kh).expect("intersection lies in H");
        let mut term = BTreeMap::new();
        term.insert(i, c * orbits as i64);
        out = out.add(&BurnsideElement {
            coeffs: term,
            group: h.subgroup().clone(),
        });
    }
    out
}

/// Induction along an inclusion `H ⊆ G`, basiswise `[H/J] ↦ [G/J]`.
pub fn induce(g: &PGroup, h: &PGroup, x: &BurnsideElement) -> BurnsideElement {
    assert!(
        g.subgroup().contains_subgroup(h.subgroup()),
        "induction needs an inclusion"
    );
    let mut out = BurnsideElement::zero(g);
    for (&jx, &c) in &x.coeffs {
        let j = &h.basis()[jx];
        let i = g.basis_index(j).expect("subgroup of H is one of G");
        let mut term = BTreeMap::new();
        term.insert(i, c);
        out = out.add(&BurnsideElement {
            coeffs: term,
            group: g.subgroup().clone(),
        });
    }
    out
}

/// A surjection of ambient-compatible groups, given by a linear map of the
/// ambient `(ℤ/pˡ)ⁿ` carrying `source` onto `target`.
#[derive(Debug, Clone)]
pub struct Surjection {
    pub matrix: PMatrix,
    pub kernel: Subgroup,
    target: Subgroup,
}

impl Surjection {
    pub fn new(source: &PGroup, target: &PGroup, matrix: PMatrix) -> Result<Surjection> {
        let image = source.subgroup().linear_image(&matrix);
        if &image != target.subgroup() {
            return Err(Error::DimensionMismatch(
                "matrix does not carry source onto target".into(),
            ));
        }
        let level = source.level();
        let ker_elems: Vec<Vec<u64>> = source
            .subgroup()
            .elements()
            .into_iter()
            .filter(|x| apply(&matrix, x).iter().all(|&c| c == 0))
            .collect();
        let kernel = Subgroup::from_elements(level, &ker_elems);
        Ok(Surjection {
            matrix,
            kernel,
            target: target.subgroup().clone(),
        })
    }
}

fn apply(m: &PMatrix, x: &[u64]) -> Vec<u64> {
    let ctx = m.context();
    (0..m.rows())
        .map(|i| {
            let mut acc = 0u64;
            for (j, &xj) in x.iter().enumerate() {
                acc = ctx.add(acc, ctx.mul(m.get(i, j), xj));
            }
            acc
        })
        .collect()
}

/// Fixed points along a surjection: `[G/K] ↦ [G'/f(K)]` if `ker f ⊆ K`,
/// else `0`.
pub fn fixed_points(
    g: &PGroup,
    gprime: &PGroup,
    f: &Surjection,
    x: &BurnsideElement,
) -> BurnsideElement {
    assert_eq!(&f.target, gprime.subgroup());
    let mut out = BurnsideElement::zero(gprime);
    for (&kx, &c) in &x.coeffs {
        let k = &g.basis()[kx];
        if !k.contains_subgroup(&f.kernel) {
            continue;
        }
        let fk = k.linear_image(&f.matrix);
        let i = gprime.basis_index(&fk).expect("image subgroup in target");
        let mut term = BTreeMap::new();
        term.insert(i, c);
        out = out.add(&BurnsideElement {
            coeffs: term,
            group: gprime.subgroup().clone(),
        });
    }
    out
}

/// Matrix of a linear map `A(G) → A(H)` over the two bases
/// (`rows: H-basis`, `cols: G-basis`).
pub fn functor_matrix<F>(g: &PGroup, h: &PGroup, f: F) -> Vec<Vec<i64>>
where
    F: Fn(&BurnsideElement) -> BurnsideElement,
{
    let mut m = vec![vec![0i64; g.rank()]; h.rank()];
    for k in 0..g.rank() {
        let img = f(&BurnsideElement::single(g, k));
        for (&i, &c) in &img.coeffs {
            m[i][k] = c;
        }
    }
    m
}

// ---------------------------------------------------------------------------
// brute-force oracle on explicit permutation sets
// ---------------------------------------------------------------------------

/// An explicit finite G-set: points acted on by every element of the group.
#[derive(Debug, Clone)]
pub struct ExplicitGSet {
    /// group elements, in a fixed order
    pub elems: Vec<Vec<u64>>,
    /// action[e][x] = image of point x under element e
    pub action: Vec<Vec<usize>>,
}

impl ExplicitGSet {
    pub fn points(&self) -> usize {
        self.action.first().map_or(0, |row| row.len())
    }

    /// The coset space `G/K` as an explicit set.
    pub fn coset_space(g: &PGroup, k: &Subgroup) -> ExplicitGSet {
        let elems = g.subgroup().elements();
        let level = g.level();
        let ctx = level.ctx();
        // canonical coset key: lexicographically least member
        let key = |x: &[u64]| -> Vec<u64> {
            k.elements()
                .iter()
                .map(|s| {
                    x.iter()
                        .zip(s)
                        .map(|(&a, &b)| ctx.add(a, b))
                        .collect::<Vec<u64>>()
                })
                .min()
                .unwrap()
        };
        let mut reps: Vec<Vec<u64>> = Vec::new();
        let mut point_of: HashMap<Vec<u64>, usize> = HashMap::new();
        for x in &elems {
            let kx = key(x);
            if !point_of.contains_key(&kx) {
                point_of.insert(kx.clone(), reps.len());
                reps.push(kx);
            }
        }
        let action = elems
            .iter()
            .map(|e| {
                reps.iter()
                    .map(|r| {
                        let moved: Vec<u64> =
                            e.iter().zip(r).map(|(&a, &b)| ctx.add(a, b)).collect();
                        point_of[&key(&moved)]
                    })
                    .collect()
            })
            .collect();
        ExplicitGSet { elems, action }
    }

    /// Disjoint union.
    pub fn disjoint_union(&self, other: &ExplicitGSet) -> ExplicitGSet {
        assert_eq!(self.elems, other.elems);
        let n = self.points();
        let action = self
            .action
            .iter()
            .zip(&other.action)
            .map(|(a, b)| {
                a.iter()
                    .copied()
                    .chain(b.iter().map(|&x| x + n))
                    .collect::<Vec<usize>>()
            })
            .collect();
        ExplicitGSet {
            elems: self.elems.clone(),
            action,
        }
    }

    /// Restrict the action to a subgroup (elements must be members).
    pub fn restricted_to(&self, h: &PGroup) -> ExplicitGSet {
        let idx: HashMap<&Vec<u64>, usize> =
            self.elems.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let elems = h.subgroup().elements();
        let action = elems
            .iter()
            .map(|e| self.action[idx[e]].clone())
            .collect();
        ExplicitGSet { elems, action }
    }

    /// Induce up along `H ⊆ G`: the set `G ×_H X` with points
    /// `(coset rep of G/H, x)`.
    pub fn induced_up(&self, g: &PGroup, h: &PGroup) -> ExplicitGSet {
        let level = g.level();
        let ctx = level.ctx();
        let h_sub = h.subgroup();
        let h_idx: HashMap<Vec<u64>, usize> = self
            .elems
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        // coset reps of G/H
        let key = |x: &[u64]| -> Vec<u64> {
            h_sub
                .elements()
                .iter()
                .map(|s| {
                    x.iter()
                        .zip(s)
                        .map(|(&a, &b)| ctx.add(a, b))
                        .collect::<Vec<u64>>()
                })
                .min()
                .unwrap()
        };
        let g_elems = g.subgroup().elements();
        let mut reps: Vec<Vec<u64>> = Vec::new();
        let mut rep_of: HashMap<Vec<u64>, usize> = HashMap::new();
        for x in &g_elems {
            let kx = key(x);
            if !rep_of.contains_key(&kx) {
                rep_of.insert(kx.clone(), reps.len());
                reps.push(kx);
            }
        }
        let nx = self.points();
        let point = |c: usize, x: usize| c * nx + x;
        let action = g_elems
            .iter()
            .map(|e| {
                let mut row = vec![0usize; reps.len() * nx];
                for (c, r) in reps.iter().enumerate() {
                    let moved: Vec<u64> = e.iter().zip(r).map(|(&a, &b)| ctx.add(a, b)).collect();
                    let c2 = rep_of[&key(&moved)];
                    // h = moved - reps[c2] lies in H
                    let hvec: Vec<u64> = moved
                        .iter()
                        .zip(&reps[c2])
                        .map(|(&a, &b)| ctx.sub(a, b))
                        .collect();
                    let hx = h_idx[&hvec];
                    for x in 0..nx {
                        row[point(c, x)] = point(c2, self.action[hx][x]);
                    }
                }
                row
            })
            .collect();
        ExplicitGSet {
            elems: g_elems,
            action,
        }
    }

    /// Fixed points of the kernel, with the residual action through `f`.
    pub fn fixed_by_kernel(&self, f: &Surjection, gprime: &PGroup) -> ExplicitGSet {
        let ker = f.kernel.elements();
        let idx: HashMap<&Vec<u64>, usize> =
            self.elems.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let fixed: Vec<usize> = (0..self.points())
            .filter(|&x| ker.iter().all(|k| self.action[idx[k]][x] == x))
            .collect();
        let renumber: HashMap<usize, usize> =
            fixed.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        // a preimage in the source for each target element
        let gp_elems = gprime.subgroup().elements();
        let mut preimage: HashMap<Vec<u64>, usize> = HashMap::new();
        for (i, e) in self.elems.iter().enumerate() {
            let img = apply(&f.matrix, e);
            preimage.entry(img).or_insert(i);
        }
        let action = gp_elems
            .iter()
            .map(|e| {
                let src = preimage[e];
                fixed
                    .iter()
                    .map(|&x| renumber[&self.action[src][x]])
                    .collect()
            })
            .collect();
        ExplicitGSet {
            elems: gp_elems,
            action,
        }
    }
}

/// Decomposes an explicit permutation set over the orbit basis.
pub fn oracle_decompose(group: &PGroup, set: &ExplicitGSet) -> BurnsideElement {
    assert_eq!(set.elems, group.subgroup().elements(), "set carries the group action");
    let n = set.points();
    let mut seen = vec![false; n];
    let mut out = BurnsideElement::zero(group);
    for start in 0..n {
        if seen[start] {
            continue;
        }
        // orbit of start
        let mut orbit = Vec::new();
        for (e, _) in set.elems.iter().enumerate() {
            let img = set.action[e][start];
            if !seen[img] {
                seen[img] = true;
                orbit.push(img);
            }
        }
        // stabilizer (same for every point of an orbit: abelian)
        let stab_elems: Vec<Vec<u64>> = set
            .elems
            .iter()
            .enumerate()
            .filter(|(e, _)| set.action[*e][start] == start)
            .map(|(_, v)| v.clone())
            .collect();
        let stab = Subgroup::from_elements(group.level(), &stab_elems);
        let i = group.basis_index(&stab).expect("stabilizer in basis");
        let mut term = BTreeMap::new();
        term.insert(i, 1);
        out = out.add(&BurnsideElement {
            coeffs: term,
            group: group.subgroup().clone(),
        });
    }
    out
}

// ---------------------------------------------------------------------------
// invariant factors and the truncated Frobenius coequalizer
// ---------------------------------------------------------------------------

/// Invariant factors of the cokernel of an integer matrix
/// (`rows × cols`, cokernel of `ℤ^cols → ℤ^rows`).
pub fn cokernel_invariants(rows: usize, cols: usize, entries: &[i64]) -> AbelianGroupInvariants {
    let mut a: Vec<Vec<BigInt>> = (0..rows)
        .map(|i| (0..cols).map(|j| BigInt::from(entries[i * cols + j])).collect())
        .collect();
    let d = rows.min(cols);
    let mut factors: Vec<BigInt> = Vec::new();
    let mut k = 0;
    while k < d {
        // locate a minimal nonzero entry in the submatrix
        let mut best: Option<(usize, usize)> = None;
        for i in k..rows {
            for j in k..cols {
                if !a[i][j].is_zero()
                    && best.map_or(true, |(bi, bj)| a[i][j].abs() < a[bi][bj].abs())
                {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        a.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        // reduce row and column by the pivot until clean
        loop {
            let mut dirty = false;
            for i in k + 1..rows {
                if !a[i][k].is_zero() {
                    let q = div_round(&a[i][k], &a[k][k]);
                    for j in k..cols {
                        let v = &a[i][j] - &q * &a[k][j];
                        a[i][j] = v;
                    }
                    if !a[i][k].is_zero() {
                        a.swap(k, i);
                    }
                    dirty = true;
                }
            }
            for j in k + 1..cols {
                if !a[k][j].is_zero() {
                    let q = div_round(&a[k][j], &a[k][k]);
                    for i in k..rows {
                        let v = &a[i][j] - &q * &a[i][k];
                        a[i][j] = v;
                    }
                    if !a[k][j].is_zero() {
                        for row in a.iter_mut() {
                            row.swap(k, j);
                        }
                    }
                    dirty = true;
                }
            }
            if !dirty {
                break;
            }
        }
        // pivot must divide the rest of the submatrix
        let mut fixed = true;
        'scan: for i in k + 1..rows {
            for j in k + 1..cols {
                if !(&a[i][j] % &a[k][k]).is_zero() {
                    for col in k..cols {
                        let v = &a[k][col] + &a[i][col];
                        a[k][col] = v;
                    }
                    fixed = false;
                    break 'scan;
                }
            }
        }
        if !fixed {
            continue;
        }
        factors.push(a[k][k].abs());
        k += 1;
    }
    let rank = factors.len();
    let torsion: Vec<u128> = factors
        .iter()
        .filter(|f| **f > BigInt::from(1))
        .map(|f| {
            let (_, digits) = f.to_u64_digits();
            digits
                .iter()
                .rev()
                .fold(0u128, |acc, &d| (acc << 64) | d as u128)
        })
        .collect();
    AbelianGroupInvariants {
        free_rank: rows - rank,
        torsion,
    }
}

fn div_round(a: &BigInt, b: &BigInt) -> BigInt {
    // round-to-nearest (any signs) keeps remainders at most |b|/2
    let q = a / b;
    let r = a - &q * b;
    if r.abs() * 2 > b.abs() {
        if r.sign() == b.sign() {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

/// One inverse-system step of the Frobenius coequalizer: the invariant
/// factors of `coker(F - R : A(L_{α^{K+1}}) → A(L_{α^K}))`, where `F`
/// restricts along `L_{α^K} ⊆ L_{α^{K+1}}` and `R` takes fixed points
/// along multiplication by `α`.
pub fn witt_coequalizer(alpha: &PMatrix, k_trunc: u32, budget: u128) -> Result<AbelianGroupInvariants> {
    let n = alpha.rows();
    let mut upper = PMatrix::identity(alpha.context(), n);
    for _ in 0..=k_trunc {
        upper = upper.mul(alpha)?;
    }
    let lower = if k_trunc == 0 {
        PMatrix::identity(alpha.context(), n)
    } else {
        let mut m = PMatrix::identity(alpha.context(), n);
        for _ in 0..k_trunc {
            m = m.mul(alpha)?;
        }
        m
    };
    let exps = upper.monoid_exponents()?;
    let l = (*exps.iter().max().unwrap()).max(1);
    let level = TorusLevel::new(alpha.context().prime(), l, n)?;
    level.check_budget(budget)?;
    let g_upper = PGroup::new(crate::lattice::kernel_subgroup(&upper, l)?, budget)?;
    let g_lower = PGroup::new(crate::lattice::kernel_subgroup(&lower, l)?, budget)?;
    let alpha_mod = alpha.reduce_to(l)?;
    let surj = Surjection::new(&g_upper, &g_lower, alpha_mod)?;
    let f_mat = functor_matrix(&g_upper, &g_lower, |x| restrict(&g_upper, &g_lower, x));
    let r_mat = functor_matrix(&g_upper, &g_lower, |x| {
        fixed_points(&g_upper, &g_lower, &surj, x)
    });
    let rows = g_lower.rank();
    let cols = g_upper.rank();
    let entries: Vec<i64> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| f_mat[i][j] - r_mat[i][j])
        .collect();
    Ok(cokernel_invariants(rows, cols, &entries))
}
