//! Typed words in the restriction, Frobenius, Verschiebung, and
//! differential operators, and their normalization.
//!
//! A word is a composition string of generators
//!
//! * `V(α): T^m → T^{αm}`,
//! * `F(α): T^{αm} → T^m` (requires exact divisibility),
//! * `R(α): T^{mα} → T^m`,
//! * `d(v)`: a degree-raising endomorphism indexed by a vector,
//! * integer (or η-) scalars,
//!
//! written leftmost-outermost, over concrete monoid matrices at a fixed
//! precision.  Objects are concrete matrices; two objects describe the
//! same fixed-point ring exactly when they agree up to a left unit, which
//! is what [`ObjectId`] canonicalizes.
//!
//! Normalization rewrites every term into the canonical shape
//!
//! ```text
//! c · d(u₁)…d(u_a) · V(β) · F(γ) · d(w₁)…d(w_b) · R(δ)
//! ```
//!
//! using the operator relations: `R` slides to the right and composes;
//! `FV` pairs fuse through gcd/lcm certificates (producing the double
//! coset volume as a scalar); differentials caught between `F…V` split
//! through Bezout data; differentials left of `V` conjugate past it; and
//! differentials right of `F` split into a part that crosses leftward and
//! a canonical residue modulo `γ`.  Certificates come from a
//! [`ChoiceRegistry`] so one pair always yields identical data.
//!
//! Every rewrite is sound for the π₀ semantics on Burnside rings
//! ([`evaluate_burnside`]): `F` acts by restriction, `V` by induction,
//! `R` by fixed points, and `d` by zero.

use crate::burnside::{fixed_points, functor_matrix, induce, restrict, PGroup, Surjection};
use crate::lattice::kernel_subgroup;
use crate::padic::{gcd_cert, lcm_cert, PMatrix, PadicContext};
use crate::splitting::EtaScalar;
use crate::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

/// Canonical representative of a subgroup class: the left-unit canonical
/// form of a monoid matrix.  Two matrices get equal `ObjectId`s exactly
/// when their kernel subgroups agree at every admissible level.
///
/// Comparison happens at the precision both sides share, since exact
/// division legitimately lowers the precision of an object.
#[derive(Debug, Clone)]
pub struct ObjectId(pub PMatrix);

impl ObjectId {
    pub fn of(m: &PMatrix) -> ObjectId {
        ObjectId(m.left_class_rep())
    }
}

impl PartialEq for ObjectId {
    fn eq(&self, other: &Self) -> bool {
        let p = self
            .0
            .context()
            .precision()
            .min(other.0.context().precision());
        match (self.0.reduce_to(p), other.0.reduce_to(p)) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for ObjectId {}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "obj{}", self.0.render())
    }
}

/// A single generator of an operator word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Gen {
    Scalar(EtaScalar),
    R(PMatrix),
    F(PMatrix),
    V(PMatrix),
    D(Vec<u64>),
}

/// A composition string; `gens[0]` is the outermost (last applied)
/// generator, matching the written order `F[..] . d(..) . V[..]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperatorWord {
    pub gens: Vec<Gen>,
}

/// An integer-weighted formal sum of words sharing a source object.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCombo {
    pub terms: Vec<(EtaScalar, OperatorWord)>,
}

impl LinearCombo {
    pub fn single(w: OperatorWord) -> Self {
        LinearCombo {
            terms: vec![(EtaScalar::one(), w)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Source, target, and formal degree of a well-typed word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordType {
    pub source: PMatrix,
    pub target: PMatrix,
    pub source_id: ObjectId,
    pub target_id: ObjectId,
    pub degree: u32,
}

fn mat_vec(m: &PMatrix, v: &[u64]) -> Vec<u64> {
    let ctx = m.context();
    (0..m.rows())
        .map(|i| {
            let mut acc = 0u64;
            for (j, &x) in v.iter().enumerate() {
                acc = ctx.add(acc, ctx.mul(m.get(i, j), x % ctx.modulus()));
            }
            acc
        })
        .collect()
}

/// Typechecks a word against a concrete source object.
///
/// Composability is exact: `F(α)` needs the current object to be exactly
/// divisible by `α` on the left, `R(α)` on the right.
pub fn typecheck(word: &OperatorWord, source: &PMatrix) -> Result<WordType> {
    let mut cur = source.clone();
    cur.monoid_exponents()?;
    let mut degree = 0u32;
    for (pos, g) in word.gens.iter().enumerate().rev() {
        match g {
            Gen::Scalar(_) => {}
            Gen::D(v) => {
                if v.len() != cur.rows() {
                    return Err(Error::TypeMismatch {
                        position: pos,
                        reason: format!("d-vector length {} vs dimension {}", v.len(), cur.rows()),
                    });
                }
                degree += 1;
            }
            Gen::V(a) => {
                a.monoid_exponents().map_err(|e| Error::TypeMismatch {
                    position: pos,
                    reason: format!("V index not in monoid: {e}"),
                })?;
                cur = a.mul(&cur).map_err(|e| Error::TypeMismatch {
                    position: pos,
                    reason: e.to_string(),
                })?;
            }
            Gen::F(a) => {
                cur = a.solve_left(&cur).ok_or_else(|| Error::TypeMismatch {
                    position: pos,
                    reason: format!("F[{}] does not divide object {}", a.render(), cur.render()),
                })?;
            }
            Gen::R(a) => {
                cur = a.solve_right(&cur).ok_or_else(|| Error::TypeMismatch {
                    position: pos,
                    reason: format!("R[{}] does not divide object {}", a.render(), cur.render()),
                })?;
            }
        }
    }
    Ok(WordType {
        source: source.clone(),
        source_id: ObjectId::of(source),
        target_id: ObjectId::of(&cur),
        target: cur,
        degree,
    })
}

/// Memoized gcd/lcm certificates per unordered matrix pair, so that the
/// same pair always produces identical Bezout and pullback data.
#[derive(Debug, Default)]
pub struct ChoiceRegistry {
    map: Mutex<HashMap<(Vec<u64>, Vec<u64>), PairCerts>>,
}

/// Certificates oriented for the pair `(f, g)` in call order.
#[derive(Debug, Clone)]
pub struct PairCerts {
    pub d: PMatrix,
    pub fbar: PMatrix,
    pub gbar: PMatrix,
    pub s: PMatrix,
    pub t: PMatrix,
    pub ftilde: PMatrix,
    pub gtilde: PMatrix,
    pub lcm: PMatrix,
}

impl PairCerts {
    fn swapped(&self) -> PairCerts {
        PairCerts {
            d: self.d.clone(),
            fbar: self.gbar.clone(),
            gbar: self.fbar.clone(),
            s: self.t.clone(),
            t: self.s.clone(),
            ftilde: self.gtilde.clone(),
            gtilde: self.ftilde.clone(),
            lcm: self.lcm.clone(),
        }
    }
}

fn mat_key(m: &PMatrix) -> Vec<u64> {
    let mut k = vec![m.rows() as u64, m.context().precision() as u64];
    k.extend(m.to_int_rows().into_iter().flatten());
    k
}

impl ChoiceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Certificates for `(f, g)`; population is idempotent and the stored
    /// data is oriented by the sorted key, so both call orders agree.
    pub fn pair(&self, f: &PMatrix, g: &PMatrix) -> Result<PairCerts> {
        let kf = mat_key(f);
        let kg = mat_key(g);
        let flip = kf > kg;
        let key = if flip {
            (kg, kf)
        } else {
            (kf, kg)
        };
        {
            let map = self.map.lock().unwrap();
            if let Some(c) = map.get(&key) {
                return Ok(if flip { c.swapped() } else { c.clone() });
            }
        }
        let (lo, hi) = if flip { (g, f) } else { (f, g) };
        let gc = gcd_cert(lo, hi)?;
        let lc = lcm_cert(lo, hi)?;
        let certs = PairCerts {
            d: gc.d,
            fbar: gc.fbar,
            gbar: gc.gbar,
            s: gc.s,
            t: gc.t,
            ftilde: lc.ftilde,
            gtilde: lc.gtilde,
            lcm: lc.lcm,
        };
        let mut map = self.map.lock().unwrap();
        let stored = map.entry(key).or_insert(certs);
        Ok(if flip { stored.swapped() } else { stored.clone() })
    }
}

/// Rule-selection order for the sound rewriting stage; all strategies
/// must reach the same canonical combo (empirical confluence).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Leftmost,
    Rightmost,
    Seeded(u64),
}

/// The rewriting engine: a certificate registry plus the η mode.
pub struct Rewriter {
    pub registry: ChoiceRegistry,
    /// carry η-scalars (p = 2 mode); in odd mode η is zero
    pub two_mode: bool,
    /// d-vectors are kept canonical modulo this power of p
    vec_modulus: u64,
    vec_ctx: PadicContext,
}

#[derive(Debug, Clone)]
struct Term {
    coeff: EtaScalar,
    gens: Vec<Gen>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum RuleKind {
    IdErase,
    ScalarExtract,
    RSlide,
    RFuse,
    VFuse,
    FFuse,
    VD,
    DFflush,
    FV,
}

impl Rewriter {
    /// `vec_precision` is the precision at which d-vector identities are
    /// tracked; it must leave headroom below the context precision for
    /// the adjoint divisions performed by the FdV rule.
    pub fn new(ctx: PadicContext, two_mode: bool, vec_precision: u32) -> Result<Rewriter> {
        let vec_ctx = ctx.reduced(vec_precision.min(ctx.precision()))?;
        Ok(Rewriter {
            registry: ChoiceRegistry::new(),
            two_mode,
            vec_modulus: vec_ctx.modulus(),
            vec_ctx,
        })
    }

    fn reduce_vec(&self, v: &[u64]) -> Vec<u64> {
        v.iter().map(|&x| x % self.vec_modulus).collect()
    }

    /// Normal forms declare one working precision, so emitted labels are
    /// reduced to it; routes differing only in how much precision they
    /// consumed then agree literally.
    fn out_label(&self, m: &PMatrix) -> PMatrix {
        let p = self.vec_ctx.precision().min(m.context().precision());
        m.reduce_to(p).expect("label precision reduction")
    }

    fn reduce_scalar(&self, c: &EtaScalar, degree_positive: bool) -> EtaScalar {
        let mut out = c.clone();
        if !self.two_mode {
            out.eta.clear();
        }
        if degree_positive {
            let m = self.vec_modulus as i128;
            out.c0 = out.c0.rem_euclid(m);
        }
        out
    }

    /// Normalizes a combo to its canonical form with the default strategy.
    pub fn normalize(&self, combo: &LinearCombo, source: &PMatrix) -> Result<LinearCombo> {
        self.normalize_with(combo, source, Strategy::Leftmost)
    }

    /// Normalizes under an explicit rule-selection strategy.
    pub fn normalize_with(
        &self,
        combo: &LinearCombo,
        source: &PMatrix,
        strategy: Strategy,
    ) -> Result<LinearCombo> {
        use rand::{Rng, SeedableRng};
        let mut rng = match strategy {
            Strategy::Seeded(s) => Some(rand_chacha::ChaCha8Rng::seed_from_u64(s)),
            _ => None,
        };
        let mut done: Vec<Term> = Vec::new();
        let mut work: Vec<Term> = Vec::new();
        for (c, w) in &combo.terms {
            typecheck(w, source)?;
            work.push(Term {
                coeff: c.clone(),
                gens: w.gens.clone(),
            });
        }
        while let Some(term) = work.pop() {
            if term.coeff.is_zero() {
                continue;
            }
            let rules = self.applicable_rules(&term.gens);
            if rules.is_empty() {
                done.push(term);
                continue;
            }
            let pick = match strategy {
                Strategy::Leftmost => 0,
                Strategy::Rightmost => rules.len() - 1,
                Strategy::Seeded(_) => rng.as_mut().unwrap().gen_range(0..rules.len()),
            };
            let (kind, i, j) = rules[pick];
            let branches = self.apply_rule(&term, kind, i, j)?;
            work.extend(branches);
        }
        // deterministic final pass, independent of the strategy
        let mut finished: Vec<Term> = Vec::new();
        for t in done {
            finished.extend(self.final_pass(t)?);
        }
        Ok(self.collect(finished))
    }

    /// Scans for applicable sound rules, position-ordered.
    fn applicable_rules(&self, gens: &[Gen]) -> Vec<(RuleKind, usize, usize)> {
        let mut out = Vec::new();
        for (i, g) in gens.iter().enumerate() {
            match g {
                Gen::Scalar(_) => out.push((RuleKind::ScalarExtract, i, i)),
                Gen::F(a) | Gen::V(a) if a.is_identity() => out.push((RuleKind::IdErase, i, i)),
                Gen::R(_) => {
                    if let Some(next) = gens.get(i + 1) {
                        match next {
                            Gen::R(_) => out.push((RuleKind::RFuse, i, i + 1)),
                            Gen::F(_) | Gen::V(_) | Gen::D(_) => {
                                out.push((RuleKind::RSlide, i, i + 1))
                            }
                            Gen::Scalar(_) => {}
                        }
                    }
                }
                Gen::V(_) => match gens.get(i + 1) {
                    Some(Gen::V(_)) => out.push((RuleKind::VFuse, i, i + 1)),
                    Some(Gen::D(_)) => {
                        // when this V closes an F…V pattern the pair rule
                        // owns the differentials; moving them back in
                        // through V would cycle
                        let mut k = i;
                        while k > 0 && matches!(gens.get(k - 1), Some(Gen::D(_))) {
                            k -= 1;
                        }
                        let closes_fv = k > 0 && matches!(gens.get(k - 1), Some(Gen::F(_)));
                        if !closes_fv {
                            out.push((RuleKind::VD, i, i + 1));
                        }
                    }
                    _ => {}
                },
                Gen::F(_) => {
                    if let Some(Gen::F(_)) = gens.get(i + 1) {
                        out.push((RuleKind::FFuse, i, i + 1));
                    }
                    // F (D…D) V pattern
                    let mut j = i + 1;
                    while matches!(gens.get(j), Some(Gen::D(_))) {
                        j += 1;
                    }
                    if matches!(gens.get(j), Some(Gen::V(_))) {
                        out.push((RuleKind::FV, i, j));
                    }
                }
                Gen::D(_) => {
                    // a D trapped between two F's flushes right
                    if matches!(gens.get(i + 1), Some(Gen::F(_))) {
                        let mut k = i;
                        while k > 0 && matches!(gens.get(k - 1), Some(Gen::D(_))) {
                            k -= 1;
                        }
                        if k > 0 && matches!(gens.get(k - 1), Some(Gen::F(_))) {
                            out.push((RuleKind::DFflush, i, i + 1));
                        }
                    }
                }
            }
        }
        out.sort();
        out.sort_by_key(|&(_, i, _)| i);
        out
    }

    fn apply_rule(&self, term: &Term, kind: RuleKind, i: usize, j: usize) -> Result<Vec<Term>> {
        let gens = &term.gens;
        let mut mk = |new_gens: Vec<Gen>, coeff: EtaScalar| Term {
            coeff,
            gens: new_gens,
        };
        let out = match kind {
            RuleKind::ScalarExtract => {
                let Gen::Scalar(c) = &gens[i] else { unreachable!() };
                let mut g = gens.clone();
                g.remove(i);
                vec![mk(g, term.coeff.mul(c))]
            }
            RuleKind::IdErase => {
                let mut g = gens.clone();
                g.remove(i);
                vec![mk(g, term.coeff.clone())]
            }
            RuleKind::RSlide => {
                let mut g = gens.clone();
                g.swap(i, j);
                vec![mk(g, term.coeff.clone())]
            }
            RuleKind::RFuse => {
                let (Gen::R(a), Gen::R(b)) = (&gens[i], &gens[j]) else { unreachable!() };
                let ab = a.mul(b)?;
                let mut g = gens.clone();
                g.splice(i..=j, [Gen::R(ab)]);
                vec![mk(g, term.coeff.clone())]
            }
            RuleKind::VFuse => {
                let (Gen::V(a), Gen::V(b)) = (&gens[i], &gens[j]) else { unreachable!() };
                let ab = a.mul(b)?;
                let mut g = gens.clone();
                g.splice(i..=j, [Gen::V(ab)]);
                vec![mk(g, term.coeff.clone())]
            }
            RuleKind::FFuse => {
                let (Gen::F(a), Gen::F(b)) = (&gens[i], &gens[j]) else { unreachable!() };
                let ba = b.mul(a)?;
                let mut g = gens.clone();
                g.splice(i..=j, [Gen::F(ba)]);
                vec![mk(g, term.coeff.clone())]
            }
            RuleKind::VD => {
                let (Gen::V(a), Gen::D(v)) = (&gens[i], &gens[j]) else { unreachable!() };
                let av = self.reduce_vec(&mat_vec(a, v));
                let mut g = gens.clone();
                let a = a.clone();
                g.splice(i..=j, [Gen::D(av), Gen::V(a)]);
                vec![mk(g, term.coeff.clone())]
            }
            RuleKind::DFflush => {
                let (Gen::D(w), Gen::F(b)) = (&gens[i], &gens[j]) else { unreachable!() };
                let bw = self.reduce_vec(&mat_vec(b, w));
                let mut g = gens.clone();
                let b = b.clone();
                g.splice(i..=j, [Gen::F(b), Gen::D(bw)]);
                vec![mk(g, term.coeff.clone())]
            }
            RuleKind::FV => {
                let Gen::F(alpha) = &gens[i] else { unreachable!() };
                let Gen::V(beta) = &gens[j] else { unreachable!() };
                let certs = self.registry.pair(alpha, beta)?;
                if j == i + 1 {
                    // FV fusion through the double coset volume
                    let vol = certs.d.volume()? as i128;
                    let mut g = gens.clone();
                    g.splice(
                        i..=j,
                        [
                            Gen::Scalar(EtaScalar::from_int(vol)),
                            Gen::V(certs.gtilde.clone()),
                            Gen::F(certs.ftilde.clone()),
                        ],
                    );
                    vec![mk(g, term.coeff.clone())]
                } else {
                    // F d…d V: Bezout splitting of every differential,
                    // with the residual coprime F·V pair fused immediately
                    // so the right-hand differentials land right of F
                    let dagger = certs.d.adjoint()?;
                    let inner = self.registry.pair(&certs.fbar, &certs.gbar)?;
                    let ws: Vec<Vec<u64>> = gens[i + 1..j]
                        .iter()
                        .map(|g| {
                            let Gen::D(w) = g else { unreachable!() };
                            self.reduce_vec(&mat_vec(&dagger, w))
                        })
                        .collect();
                    let b = ws.len();
                    let mut branches = Vec::new();
                    for pmask in 0..(1usize << b) {
                        // positions in pmask move left, the rest stay right
                        let mut sign = 0usize;
                        let mut stay_seen = 0usize;
                        let mut left: Vec<Gen> = Vec::new();
                        let mut right: Vec<Gen> = Vec::new();
                        for (pos, w) in ws.iter().enumerate() {
                            if pmask >> pos & 1 == 1 {
                                sign += stay_seen;
                                left.push(Gen::D(self.reduce_vec(&mat_vec(&certs.s, w))));
                            } else {
                                stay_seen += 1;
                                right.push(Gen::D(self.reduce_vec(&mat_vec(&certs.t, w))));
                            }
                        }
                        // F(fbar)·V(gbar) = V(gtilde')·F(ftilde'), gcd = 1
                        let mut seg = left;
                        seg.push(Gen::V(inner.gtilde.clone()));
                        seg.push(Gen::F(inner.ftilde.clone()));
                        seg.extend(right);
                        let mut g = gens.clone();
                        g.splice(i..=j, seg);
                        let coeff = if sign % 2 == 0 {
                            term.coeff.clone()
                        } else {
                            term.coeff.neg()
                        };
                        branches.push(mk(g, coeff));
                    }
                    branches
                }
            }
        };
        Ok(out)
    }

    /// Deterministic canonicalization of a rule-free term: unit erasure,
    /// residue splitting right of `F`, and multilinear expansion of both
    /// d-blocks.
    fn final_pass(&self, term: Term) -> Result<Vec<Term>> {
        // erase non-identity unit V/F after conjugating differentials on
        // their left through them (always exactly divisible)
        let mut term = term;
        loop {
            let mut changed = false;
            let gens = term.gens.clone();
            for (i, g) in gens.iter().enumerate() {
                let (label, is_v) = match g {
                    Gen::V(a) if a.is_unit() && !a.is_identity() => (a.clone(), true),
                    Gen::F(a) if a.is_unit() && !a.is_identity() => (a.clone(), false),
                    _ => continue,
                };
                let conj = if is_v {
                    label.unit_inverse()?
                } else {
                    label.clone()
                };
                let mut g2: Vec<Gen> = Vec::with_capacity(gens.len() - 1);
                for (k, h) in gens.iter().enumerate() {
                    if k == i {
                        continue;
                    }
                    if k < i {
                        if let Gen::D(v) = h {
                            g2.push(Gen::D(self.reduce_vec(&mat_vec(&conj, v))));
                            continue;
                        }
                    }
                    g2.push(h.clone());
                }
                term = Term {
                    coeff: term.coeff.clone(),
                    gens: g2,
                };
                changed = true;
                break;
            }
            if !changed {
                break;
            }
            // unit erasure can re-enable sound rules (e.g. V·D moves)
            let mut work = vec![term.clone()];
            let mut settled = Vec::new();
            while let Some(t) = work.pop() {
                let rules = self.applicable_rules(&t.gens);
                if rules.is_empty() {
                    settled.push(t);
                } else {
                    let (kind, i, j) = rules[0];
                    work.extend(self.apply_rule(&t, kind, i, j)?);
                }
            }
            if settled.len() != 1 {
                // a unit erasure never branches, but rule replay can; feed
                // every branch back through the full final pass
                let mut out = Vec::new();
                for t in settled {
                    out.extend(self.final_pass(t)?);
                }
                return Ok(out);
            }
            term = settled.pop().unwrap();
        }

        // parse the shape d* V? F? d* R?
        let gens = term.gens;
        let mut idx = 0;
        let mut left: Vec<Vec<u64>> = Vec::new();
        while let Some(Gen::D(v)) = gens.get(idx) {
            left.push(v.clone());
            idx += 1;
        }
        let v_label = if let Some(Gen::V(a)) = gens.get(idx) {
            idx += 1;
            Some(a.clone())
        } else {
            None
        };
        let f_label = if let Some(Gen::F(a)) = gens.get(idx) {
            idx += 1;
            Some(a.clone())
        } else {
            None
        };
        let mut right: Vec<Vec<u64>> = Vec::new();
        while let Some(Gen::D(v)) = gens.get(idx) {
            right.push(v.clone());
            idx += 1;
        }
        let r_label = if let Some(Gen::R(a)) = gens.get(idx) {
            idx += 1;
            Some(a.clone())
        } else {
            None
        };
        debug_assert_eq!(idx, gens.len(), "normal shape parse");

        // residue-split the right block modulo the F index
        struct Branch {
            coeff: EtaScalar,
            left: Vec<Vec<u64>>,
            right: Vec<Vec<u64>>,
        }
        let mut branches = vec![Branch {
            coeff: term.coeff,
            left,
            right: Vec::new(),
        }];
        if let Some(gamma) = &f_label {
            let sf = gamma.smith();
            let a_basis = sf.u.unit_inverse()?; // γ·(V_smith e_i) = p^{d_i}·(U⁻¹ e_i)
            for w in &right {
                let coords = mat_vec(&sf.u, w);
                let mut next = Vec::new();
                for br in &branches {
                    for (i, &d_exp) in sf.exps.iter().enumerate() {
                        let ci = coords[i] % self.vec_modulus;
                        let pd = self.vec_ctx.p_pow(d_exp.min(self.vec_ctx.precision()));
                        let (q, r) = if pd == 0 {
                            (0, ci)
                        } else {
                            (ci / pd, ci % pd)
                        };
                        // divisible part crosses F (and V) leftward
                        if q != 0 {
                            let mut x = sf.v.column(i);
                            if let Some(beta) = &v_label {
                                x = mat_vec(beta, &x);
                            }
                            let x = self.reduce_vec(&x.iter().map(|&c| self.vec_ctx.mul(c, q)).collect::<Vec<u64>>());
                            let sign_flip = br.right.len() % 2 == 1;
                            let mut left2 = br.left.clone();
                            left2.push(x);
                            next.push(Branch {
                                coeff: if sign_flip { br.coeff.neg() } else { br.coeff.clone() },
                                left: left2,
                                right: br.right.clone(),
                            });
                        }
                        // residue part stays
                        if r != 0 {
                            let col = a_basis.column(i);
                            let x = self
                                .reduce_vec(&col.iter().map(|&c| self.vec_ctx.mul(c, r)).collect::<Vec<u64>>());
                            let mut right2 = br.right.clone();
                            right2.push(x);
                            next.push(Branch {
                                coeff: br.coeff.clone(),
                                left: br.left.clone(),
                                right: right2,
                            });
                        }
                    }
                }
                branches = next;
            }
        } else {
            // no F: the right block joins the left block unchanged
            for br in &mut branches {
                let mut l = br.left.clone();
                l.extend(right.iter().cloned());
                br.left = l;
            }
        }

        // expand the left block over standard basis vectors and sort both
        // monomials in the differential algebra
        let n = v_label
            .as_ref()
            .or(f_label.as_ref())
            .or(r_label.as_ref())
            .map(|m| m.rows())
            .or_else(|| branches.iter().flat_map(|b| b.left.first()).map(|v| v.len()).next())
            .unwrap_or(0);
        let mut out_terms: Vec<Term> = Vec::new();
        for br in branches {
            // multilinear expansion of left vectors into index monomials
            let mut expansions: Vec<(EtaScalar, Vec<usize>)> =
                vec![(br.coeff.clone(), Vec::new())];
            let mut dead = false;
            for w in &br.left {
                let mut next = Vec::new();
                for (c, mono) in &expansions {
                    for (i, &wi) in w.iter().enumerate() {
                        let wi = wi % self.vec_modulus;
                        if wi == 0 {
                            continue;
                        }
                        let mut m2 = mono.clone();
                        m2.push(i);
                        next.push((c.scale(wi as i128), m2));
                    }
                }
                expansions = next;
                if expansions.is_empty() {
                    dead = true;
                    break;
                }
            }
            if dead {
                continue;
            }
            // sort right-block vectors (anticommuting, collapsing squares)
            let (rsign, rcollapsed, reta) = match sort_d_list(&br.right, self.two_mode) {
                Some(x) => x,
                None => continue,
            };
            for (c, mono) in expansions {
                let Some((lsign, lmono, leta)) = sort_index_monomial(&mono, self.two_mode) else {
                    continue;
                };
                let mut coeff = c.clone();
                if (lsign * rsign) < 0 {
                    coeff = coeff.neg();
                }
                for _ in 0..(leta + reta) {
                    coeff = coeff.mul(&EtaScalar::eta_term(1, 1));
                }
                if coeff.is_zero() {
                    continue;
                }
                let degree_positive = !lmono.is_empty() || !rcollapsed.is_empty();
                let coeff = self.reduce_scalar(&coeff, degree_positive);
                if coeff.is_zero() {
                    continue;
                }
                let mut gens: Vec<Gen> = Vec::new();
                for &i in &lmono {
                    let mut e = vec![0u64; n];
                    e[i] = 1;
                    gens.push(Gen::D(e));
                }
                if let Some(v) = &v_label {
                    // the V index is a class label; canonicalize it when no
                    // twist-sensitive differentials sit to its left
                    if lmono.is_empty() {
                        gens.push(Gen::V(self.out_label(&v.left_class_rep())));
                    } else {
                        gens.push(Gen::V(self.out_label(v)));
                    }
                }
                if let Some(f) = &f_label {
                    gens.push(Gen::F(self.out_label(f)));
                }
                for w in &rcollapsed {
                    gens.push(Gen::D(w.clone()));
                }
                if let Some(r) = &r_label {
                    gens.push(Gen::R(self.out_label(r)));
                }
                out_terms.push(Term { coeff, gens });
            }
        }
        Ok(out_terms)
    }

    fn collect(&self, terms: Vec<Term>) -> LinearCombo {
        let mut map: HashMap<Vec<Gen>, EtaScalar> = HashMap::new();
        for t in terms {
            let e = map.entry(t.gens).or_insert_with(EtaScalar::zero);
            *e = e.add(&t.coeff);
        }
        let mut out: Vec<(EtaScalar, OperatorWord)> = map
            .into_iter()
            .map(|(gens, c)| {
                let degree_positive = gens.iter().any(|g| matches!(g, Gen::D(_)));
                (self.reduce_scalar(&c, degree_positive), gens)
            })
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, gens)| (c, OperatorWord { gens }))
            .collect();
        out.sort_by(|a, b| term_sort_key(&a.1).cmp(&term_sort_key(&b.1)));
        LinearCombo { terms: out }
    }
}

fn term_sort_key(w: &OperatorWord) -> Vec<Vec<u64>> {
    w.gens
        .iter()
        .map(|g| match g {
            Gen::Scalar(_) => vec![0],
            Gen::D(v) => {
                let mut k = vec![1];
                k.extend(v.iter().copied());
                k
            }
            Gen::V(m) => {
                let mut k = vec![2];
                k.extend(mat_key(m));
                k
            }
            Gen::F(m) => {
                let mut k = vec![3];
                k.extend(mat_key(m));
                k
            }
            Gen::R(m) => {
                let mut k = vec![4];
                k.extend(mat_key(m));
                k
            }
        })
        .collect()
}

/// Sorts an index monomial, returning `(sign, sorted, η-degree)`;
/// `None` when the monomial dies (repeated index in odd mode).
fn sort_index_monomial(mono: &[usize], two_mode: bool) -> Option<(i32, Vec<usize>, u32)> {
    let mut v = mono.to_vec();
    let mut sign = 1i32;
    // bubble sort counting transpositions
    for i in 0..v.len() {
        for j in (i + 1..v.len()).rev() {
            if v[j - 1] > v[j] {
                v.swap(j - 1, j);
                sign = -sign;
            }
        }
    }
    let mut eta = 0u32;
    let mut out = Vec::with_capacity(v.len());
    for x in v {
        if out.last() == Some(&x) {
            if !two_mode {
                return None;
            }
            eta += 1; // d² = d·η
        } else {
            out.push(x);
        }
    }
    Some((sign, out, eta))
}

/// Same collapse on literal vectors (the residue block).
fn sort_d_list(list: &[Vec<u64>], two_mode: bool) -> Option<(i32, Vec<Vec<u64>>, u32)> {
    let mut v = list.to_vec();
    let mut sign = 1i32;
    for i in 0..v.len() {
        for j in (i + 1..v.len()).rev() {
            if v[j - 1] > v[j] {
                v.swap(j - 1, j);
                sign = -sign;
            }
        }
    }
    let mut eta = 0u32;
    let mut out: Vec<Vec<u64>> = Vec::with_capacity(v.len());
    for x in v {
        if out.last() == Some(&x) {
            if !two_mode {
                return None;
            }
            eta += 1;
        } else {
            out.push(x);
        }
    }
    Some((sign, out, eta))
}

/// The two-term Bezout expansion of `F(α)·d(v)·V(β)`, further normalized.
pub fn fdv_expand(
    rw: &Rewriter,
    alpha: &PMatrix,
    v: &[u64],
    beta: &PMatrix,
) -> Result<(LinearCombo, PMatrix)> {
    // minimal well-typed source: β·source must be divisible by α, and the
    // pullback cofactor does exactly that
    let certs = rw.registry.pair(alpha, beta)?;
    let source = certs.ftilde.clone();
    let word = OperatorWord {
        gens: vec![
            Gen::F(alpha.clone()),
            Gen::D(v.to_vec()),
            Gen::V(beta.clone()),
        ],
    };
    let combo = rw.normalize(&LinearCombo::single(word), &source)?;
    Ok((combo, source))
}

/// Matrix of a combo on Burnside rings at a level: `F ↦ restriction`,
/// `V ↦ induction`, `R ↦ fixed points`, `d ↦ 0`.
///
/// Returns the matrix over the bases of `A(L_source)` (columns) and
/// `A(L_target)` (rows).
pub fn evaluate_burnside(
    combo: &LinearCombo,
    source: &PMatrix,
    level: u32,
    budget: u128,
) -> Result<Vec<Vec<i64>>> {
    let mut groups: HashMap<Vec<u64>, PGroup> = HashMap::new();
    let mut group_of = |m: &PMatrix| -> Result<PGroup> {
        let key = mat_key(m);
        if let Some(g) = groups.get(&key) {
            return Ok(g.clone());
        }
        let sub = kernel_subgroup(m, level)?;
        let g = PGroup::new(sub, budget)?;
        groups.insert(key, g.clone());
        Ok(g)
    };
    let src_group = group_of(source)?;
    let mut total: Option<Vec<Vec<i64>>> = None;
    let mut expected_target: Option<PMatrix> = None;
    for (coeff, word) in &combo.terms {
        let ty = typecheck(word, source)?;
        match &expected_target {
            None => expected_target = Some(ty.target.clone()),
            Some(t) => {
                if ObjectId::of(t) != ty.target_id {
                    return Err(Error::TypeMismatch {
                        position: 0,
                        reason: "terms of a combo must share their target class".into(),
                    });
                }
            }
        }
        // degree > 0 or η-content evaluates to zero at π₀
        if ty.degree > 0 || !coeff.eta.is_empty() {
            continue;
        }
        let mut cur = source.clone();
        let mut mat: Vec<Vec<i64>> = identity_mat(src_group.rank());
        for g in word.gens.iter().rev() {
            match g {
                Gen::Scalar(c) => {
                    if !c.eta.is_empty() {
                        mat = scale_mat(&mat, 0);
                    } else {
                        mat = scale_mat(&mat, i64::try_from(c.c0).expect("scalar fits"));
                    }
                }
                Gen::D(_) => unreachable!("degree checked"),
                Gen::V(a) => {
                    let from = group_of(&cur)?;
                    cur = a.mul(&cur)?;
                    let to = group_of(&cur)?;
                    let step = functor_matrix(&from, &to, |x| induce(&to, &from, x));
                    mat = mat_mul(&step, &mat);
                }
                Gen::F(a) => {
                    let from = group_of(&cur)?;
                    cur = a.solve_left(&cur).expect("typechecked");
                    let to = group_of(&cur)?;
                    let step = functor_matrix(&from, &to, |x| restrict(&from, &to, x));
                    mat = mat_mul(&step, &mat);
                }
                Gen::R(a) => {
                    let from = group_of(&cur)?;
                    cur = a.solve_right(&cur).expect("typechecked");
                    let to = group_of(&cur)?;
                    let amod = a.reduce_to(level)?;
                    let surj = Surjection::new(&from, &to, amod)?;
                    let step =
                        functor_matrix(&from, &to, |x| fixed_points(&from, &to, &surj, x));
                    mat = mat_mul(&step, &mat);
                }
            }
        }
        let c = i64::try_from(coeff.c0).expect("coefficient fits");
        let scaled = scale_mat(&mat, c);
        total = Some(match total {
            None => scaled,
            Some(t) => mat_add(&t, &scaled),
        });
    }
    let target = expected_target.unwrap_or_else(|| source.clone());
    let tgt_group = group_of(&target)?;
    Ok(total.unwrap_or_else(|| vec![vec![0; src_group.rank()]; tgt_group.rank()]))
}

fn identity_mat(n: usize) -> Vec<Vec<i64>> {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

fn scale_mat(m: &[Vec<i64>], c: i64) -> Vec<Vec<i64>> {
    m.iter()
        .map(|row| row.iter().map(|&x| x * c).collect())
        .collect()
}

fn mat_mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let rows = a.len();
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| (0..inner).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

fn mat_add(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

/// Outcome of the conjugation-compatibility search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdamsOutcome {
    /// every conjugate lies in the submonoid; witnesses are factorization
    /// index sequences into the J generators
    Compatible(Vec<Vec<usize>>),
    /// a definite counterexample: (γ index, β index)
    Incompatible(usize, usize),
}

/// Checks whether each `γ β γ⁻¹` lies in the submonoid generated by the
/// J generators, by bounded product search with valuation pruning.
///
/// Undecided searches report [`Error::BoundExceeded`], never `false`.
pub fn adams_compat(
    i_gens: &[PMatrix],
    j_gens: &[PMatrix],
    max_len: u32,
) -> Result<AdamsOutcome> {
    let mut witnesses = Vec::new();
    for (gi, gamma) in i_gens.iter().enumerate() {
        if !gamma.is_unit() {
            return Err(Error::NotInjective);
        }
        let ginv = gamma.unit_inverse()?;
        for (bi, beta) in j_gens.iter().enumerate() {
            let target = gamma.mul(beta)?.mul(&ginv)?;
            let tval = target.det_valuation()?;
            // breadth-first over products of J generators
            let mut queue: Vec<(PMatrix, Vec<usize>)> =
                vec![(PMatrix::identity(target.context(), target.rows()), vec![])];
            let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
            let mut found: Option<Vec<usize>> = None;
            let mut truncated = false;
            while let Some((m, word)) = queue.pop() {
                if m.to_int_rows() == target.to_int_rows() && !word.is_empty() {
                    found = Some(word);
                    break;
                }
                if word.len() as u32 >= max_len {
                    // could this node still extend toward the target?
                    if m.det_valuation()? <= tval {
                        truncated = true;
                    }
                    continue;
                }
                for (k, j) in j_gens.iter().enumerate() {
                    let next = m.mul(j)?;
                    if next.det_valuation()? > tval {
                        continue;
                    }
                    let key = mat_key(&next);
                    if seen.insert(key, ()).is_none() {
                        let mut w = word.clone();
                        w.push(k);
                        queue.push((next, w));
                    }
                }
            }
            match found {
                Some(w) => witnesses.push(w),
                None if truncated => return Err(Error::BoundExceeded(max_len)),
                None => return Ok(AdamsOutcome::Incompatible(gi, bi)),
            }
        }
    }
    Ok(AdamsOutcome::Compatible(witnesses))
}

// ---------------------------------------------------------------------------
// word syntax
// ---------------------------------------------------------------------------

/// Parses the word syntax `F[a,b;c,d] . d(v1,v2) . V[..] . R[..]`, with
/// leading integer scalars and `+`-joined terms.
pub fn parse_combo(s: &str, ctx: PadicContext) -> Result<LinearCombo> {
    let mut terms = Vec::new();
    for chunk in s.split('+') {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            return Err(Error::Parse("empty term".into()));
        }
        let mut coeff = EtaScalar::one();
        let mut gens = Vec::new();
        for piece in chunk.split('.') {
            let piece = piece.trim();
            if piece.is_empty() {
                continue;
            }
            if let Ok(c) = piece.parse::<i128>() {
                coeff = coeff.mul(&EtaScalar::from_int(c));
                continue;
            }
            if piece == "eta" {
                coeff = coeff.mul(&EtaScalar::eta_term(1, 1));
                continue;
            }
            let (head, rest) = piece.split_at(1);
            match head {
                "F" | "V" | "R" => {
                    let m = parse_bracket_matrix(rest, ctx)?;
                    gens.push(match head {
                        "F" => Gen::F(m),
                        "V" => Gen::V(m),
                        _ => Gen::R(m),
                    });
                }
                "d" => {
                    let inner = rest
                        .strip_prefix('(')
                        .and_then(|r| r.strip_suffix(')'))
                        .ok_or_else(|| Error::Parse(format!("bad differential: {piece}")))?;
                    let v: Vec<u64> = inner
                        .split(',')
                        .map(|x| {
                            x.trim()
                                .parse::<i64>()
                                .map(|n| ctx.reduce(n))
                                .map_err(|e| Error::Parse(format!("d entry: {e}")))
                        })
                        .collect::<Result<_>>()?;
                    gens.push(Gen::D(v));
                }
                _ => return Err(Error::Parse(format!("unknown generator: {piece}"))),
            }
        }
        terms.push((coeff, OperatorWord { gens }));
    }
    Ok(LinearCombo { terms })
}

fn parse_bracket_matrix(s: &str, ctx: PadicContext) -> Result<PMatrix> {
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("bad matrix literal: {s}")))?;
    let rows: Vec<Vec<i64>> = inner
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<i64>()
                        .map_err(|e| Error::Parse(format!("matrix entry: {e}")))
                })
                .collect::<Result<Vec<i64>>>()
        })
        .collect::<Result<_>>()?;
    PMatrix::from_int(ctx, &rows)
}

/// Renders a combo back into the word syntax.
pub fn render_combo(combo: &LinearCombo) -> String {
    if combo.terms.is_empty() {
        return "0".to_string();
    }
    combo
        .terms
        .iter()
        .map(|(c, w)| {
            let mut parts: Vec<String> = Vec::new();
            let one = EtaScalar::one();
            if c != &one || w.gens.is_empty() {
                parts.push(format!("{c}"));
            }
            for g in &w.gens {
                parts.push(match g {
                    Gen::Scalar(c) => format!("{c}"),
                    Gen::D(v) => format!(
                        "d({})",
                        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                    ),
                    Gen::V(m) => format!("V{}", semicolon_matrix(m)),
                    Gen::F(m) => format!("F{}", semicolon_matrix(m)),
                    Gen::R(m) => format!("R{}", semicolon_matrix(m)),
                });
            }
            parts.join(" . ")
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn semicolon_matrix(m: &PMatrix) -> String {
    let rows: Vec<String> = (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| m.get(i, j).to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    format!("[{}]", rows.join(";"))
}

/// JSON rendering of a combo's abstract syntax.
pub fn combo_to_json(combo: &LinearCombo) -> serde_json::Value {
    let terms: Vec<serde_json::Value> = combo
        .terms
        .iter()
        .map(|(c, w)| {
            let gens: Vec<serde_json::Value> = w
                .gens
                .iter()
                .map(|g| match g {
                    Gen::Scalar(c) => serde_json::json!({"scalar": c.to_string()}),
                    Gen::D(v) => serde_json::json!({"d": v}),
                    Gen::V(m) => serde_json::json!({"V": m.to_int_rows()}),
                    Gen::F(m) => serde_json::json!({"F": m.to_int_rows()}),
                    Gen::R(m) => serde_json::json!({"R": m.to_int_rows()}),
                })
                .collect();
            serde_json::json!({"coeff": c.to_string(), "word": gens})
        })
        .collect();
    serde_json::json!({"terms": terms})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DEFAULT_BUDGET;
    use rand::{Rng, SeedableRng};

    fn ctx(p: u64, n: u32) -> PadicContext {
        PadicContext::new(p, n).unwrap()
    }

    fn m1(ctx: PadicContext, x: i64) -> PMatrix {
        PMatrix::from_int(ctx, &vec![vec![x]]).unwrap()
    }

    fn word(gens: Vec<Gen>) -> OperatorWord {
        OperatorWord { gens }
    }

    #[test]
    fn typecheck_fv_endomorphism() {
        let c = ctx(3, 8);
        let w = word(vec![Gen::F(m1(c, 3)), Gen::V(m1(c, 3))]);
        let src = PMatrix::identity(c, 1);
        let ty = typecheck(&w, &src).unwrap();
        assert_eq!(ty.source_id, ty.target_id);
        assert_eq!(ty.degree, 0);
    }

    #[test]
    fn typecheck_rf_commute_endpoints() {
        let c = ctx(3, 8);
        let src = m1(c, 9);
        let rf = word(vec![Gen::R(m1(c, 3)), Gen::F(m1(c, 3))]);
        let fr = word(vec![Gen::F(m1(c, 3)), Gen::R(m1(c, 3))]);
        let t1 = typecheck(&rf, &src).unwrap();
        let t2 = typecheck(&fr, &src).unwrap();
        assert_eq!(t1.target_id, t2.target_id);
        assert_eq!(t1.source_id, t2.source_id);
    }

    #[test]
    fn typecheck_v_composition() {
        let c = ctx(2, 8);
        let a = PMatrix::from_int(c, &vec![vec![2, 1], vec![0, 2]]).unwrap();
        let b = PMatrix::from_int(c, &vec![vec![2, 0], vec![0, 1]]).unwrap();
        let src = PMatrix::identity(c, 2);
        let w = word(vec![Gen::V(a.clone()), Gen::V(b.clone())]);
        let ty = typecheck(&w, &src).unwrap();
        assert_eq!(ty.target_id, ObjectId::of(&a.mul(&b).unwrap()));
    }

    #[test]
    fn typecheck_rejects_indivisible() {
        let c = ctx(3, 8);
        let w = word(vec![Gen::F(m1(c, 3))]);
        let src = PMatrix::identity(c, 1);
        assert!(matches!(
            typecheck(&w, &src),
            Err(Error::TypeMismatch { .. })
        ));
    }

    #[test]
    fn normalize_fv_is_p() {
        let c = ctx(3, 10);
        let rw = Rewriter::new(c, false, 6).unwrap();
        let w = word(vec![Gen::F(m1(c, 3)), Gen::V(m1(c, 3))]);
        let src = PMatrix::identity(c, 1);
        let nf = rw.normalize(&LinearCombo::single(w), &src).unwrap();
        assert_eq!(nf.terms.len(), 1);
        let (coeff, word) = &nf.terms[0];
        assert_eq!(coeff.c0, 3);
        assert!(word.gens.is_empty());
    }

    #[test]
    fn normalize_fdv_is_d() {
        let c = ctx(3, 10);
        let rw = Rewriter::new(c, false, 6).unwrap();
        let w = word(vec![
            Gen::F(m1(c, 3)),
            Gen::D(vec![1]),
            Gen::V(m1(c, 3)),
        ]);
        let src = PMatrix::identity(c, 1);
        let nf = rw.normalize(&LinearCombo::single(w), &src).unwrap();
        assert_eq!(nf.terms.len(), 1);
        let (coeff, word) = &nf.terms[0];
        assert_eq!(coeff.c0, 1);
        assert_eq!(word.gens, vec![Gen::D(vec![1])]);
    }

    #[test]
    fn normalize_unit_conjugates_differential() {
        // F(h) d(v) V(h) → d(h⁻¹v) for a unit h
        let c = ctx(3, 10);
        let rw = Rewriter::new(c, false, 6).unwrap();
        let h = PMatrix::from_int(c, &vec![vec![2, 1], vec![1, 1]]).unwrap();
        assert!(h.is_unit());
        let v = vec![1u64, 2];
        let w = word(vec![Gen::F(h.clone()), Gen::D(v.clone()), Gen::V(h.clone())]);
        let src = PMatrix::identity(c, 2);
        let nf = rw.normalize(&LinearCombo::single(w), &src).unwrap();
        // expected: multilinear expansion of d(h⁻¹ v)
        let hinv = h.unit_inverse().unwrap();
        let hv = mat_vec(&hinv, &v);
        let mut expect: Vec<(Vec<u64>, i128)> = hv
            .iter()
            .enumerate()
            .filter(|(_, &x)| x % rw.vec_modulus != 0)
            .map(|(i, &x)| {
                let mut e = vec![0u64; 2];
                e[i] = 1;
                (e, x as i128 % rw.vec_modulus as i128)
            })
            .collect();
        expect.sort();
        assert_eq!(nf.terms.len(), expect.len());
        for ((c_got, w_got), (e_want, c_want)) in nf.terms.iter().zip(&expect) {
            assert_eq!(w_got.gens, vec![Gen::D(e_want.clone())]);
            assert_eq!(c_got.c0, *c_want);
        }
    }

    #[test]
    fn fdv_expand_equal_scalar_indices() {
        // α = β = p·id at odd p reduces to a unit multiple of d(v)
        let c = ctx(3, 10);
        let rw = Rewriter::new(c, false, 6).unwrap();
        let alpha = PMatrix::identity(c, 2).scalar_mul(3);
        let (combo, _src) = fdv_expand(&rw, &alpha, &[1, 0], &alpha).unwrap();
        // (p·id)† = p·id for n = 2, so expect 3·d(e₁)
        assert_eq!(combo.terms.len(), 1);
        assert_eq!(combo.terms[0].0.c0, 3);
        assert_eq!(combo.terms[0].1.gens, vec![Gen::D(vec![1, 0])]);
    }

    #[test]
    fn fdv_alternate_reduction_agrees() {
        // coprime indices: leftmost and rightmost strategies agree
        let c = ctx(3, 12);
        let rw = Rewriter::new(c, false, 6).unwrap();
        let alpha = PMatrix::from_int(c, &vec![vec![3, 0], vec![0, 1]]).unwrap();
        let beta = PMatrix::from_int(c, &vec![vec![1, 0], vec![0, 3]]).unwrap();
        let certs = rw.registry.pair(&alpha, &beta).unwrap();
        let src = certs.ftilde.clone();
        let w = word(vec![
            Gen::F(alpha.clone()),
            Gen::D(vec![1, 1]),
            Gen::V(beta.clone()),
        ]);
        let a = rw
            .normalize_with(&LinearCombo::single(w.clone()), &src, Strategy::Leftmost)
            .unwrap();
        let b = rw
            .normalize_with(&LinearCombo::single(w.clone()), &src, Strategy::Rightmost)
            .unwrap();
        let c3 = rw
            .normalize_with(&LinearCombo::single(w), &src, Strategy::Seeded(5))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c3);
    }

    #[test]
    fn normalize_d_squared_at_two() {
        // p = 2 symbolic reduction: d(1)·d(1) = η·d(1)
        let c = ctx(2, 10);
        let rw = Rewriter::new(c, true, 6).unwrap();
        let w = word(vec![Gen::D(vec![1]), Gen::D(vec![1])]);
        let src = PMatrix::identity(c, 1);
        let nf = rw.normalize(&LinearCombo::single(w), &src).unwrap();
        assert_eq!(nf.terms.len(), 1);
        let (coeff, word) = &nf.terms[0];
        assert_eq!(word.gens, vec![Gen::D(vec![1])]);
        assert_eq!(coeff.c0, 0);
        assert_eq!(coeff.eta.get(&1), Some(&1));
    }

    #[test]
    fn normalize_d_squared_odd_dies() {
        let c = ctx(3, 10);
        let rw = Rewriter::new(c, false, 6).unwrap();
        let w = word(vec![Gen::D(vec![1]), Gen::D(vec![1])]);
        let src = PMatrix::identity(c, 1);
        let nf = rw.normalize(&LinearCombo::single(w), &src).unwrap();
        assert!(nf.is_zero());
    }

    #[test]
    fn evaluate_identity_and_dzero() {
        let c = ctx(3, 10);
        let src = PMatrix::identity(c, 1).scalar_mul(3);
        let idw = word(vec![]);
        let m = evaluate_burnside(&LinearCombo::single(idw), &src, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(m, identity_mat(2)); // A(ℤ/3) has two subgroups
        let dw = word(vec![Gen::D(vec![1])]);
        let z = evaluate_burnside(&LinearCombo::single(dw), &src, 1, DEFAULT_BUDGET).unwrap();
        assert!(z.iter().flatten().all(|&x| x == 0));
    }

    #[test]
    fn evaluate_fv_is_multiplication_by_p() {
        let c = ctx(3, 10);
        let src = PMatrix::identity(c, 1);
        let w = word(vec![Gen::F(m1(c, 3)), Gen::V(m1(c, 3))]);
        let m = evaluate_burnside(&LinearCombo::single(w), &src, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(m, vec![vec![3]]);
    }

    #[test]
    fn rewrite_soundness_on_relations() {
        // both sides of each relation instance evaluate equally
        let c = ctx(2, 12);
        let rw = Rewriter::new(c, true, 6).unwrap();
        let p = 2i64;
        let a2 = PMatrix::identity(c, 2).scalar_mul(p as u64);
        let b2 = PMatrix::from_int(c, &vec![vec![2, 1], vec![0, 2]]).unwrap();
        // F^α V_β vs its normal form, evaluated at two levels; the source
        // is the pullback cofactor so the composite typechecks
        for alpha in [&a2, &b2] {
            let certs = rw.registry.pair(alpha, &b2).unwrap();
            let src = certs.ftilde.clone();
            let w = word(vec![Gen::F((*alpha).clone()), Gen::V(b2.clone())]);
            let combo = LinearCombo::single(w.clone());
            let nf = rw.normalize(&combo, &src).unwrap();
            for level in [2u32, 3] {
                let lhs = evaluate_burnside(&combo, &src, level, DEFAULT_BUDGET).unwrap();
                let rhs = evaluate_burnside(&nf, &src, level, DEFAULT_BUDGET).unwrap();
                assert_eq!(lhs, rhs, "level {level}");
            }
        }
    }

    #[test]
    fn random_words_confluent_and_sound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        let c = ctx(2, 14);
        let rw = Rewriter::new(c, true, 7).unwrap();
        let mut tested = 0;
        'outer: while tested < 25 {
            // random well-typed word over n = 1 with entries p-powers
            let len = rng.gen_range(1..=5);
            let mut gens = Vec::new();
            for _ in 0..len {
                match rng.gen_range(0..4) {
                    0 => gens.push(Gen::V(m1(c, 2))),
                    1 => gens.push(Gen::F(m1(c, 2))),
                    2 => gens.push(Gen::R(m1(c, 2))),
                    _ => gens.push(Gen::D(vec![rng.gen_range(1..4)])),
                }
            }
            let w = word(gens);
            // find a source that typechecks
            let mut src = None;
            for e in 0..=6u32 {
                let cand = m1(c, (2i64).pow(e));
                if typecheck(&w, &cand).is_ok() {
                    src = Some(cand);
                    break;
                }
            }
            let Some(src) = src else { continue 'outer };
            tested += 1;
            let combo = LinearCombo::single(w);
            let nf_l = rw.normalize_with(&combo, &src, Strategy::Leftmost).unwrap();
            let nf_r = rw.normalize_with(&combo, &src, Strategy::Rightmost).unwrap();
            let nf_s = rw
                .normalize_with(&combo, &src, Strategy::Seeded(tested as u64))
                .unwrap();
            assert_eq!(nf_l, nf_r, "confluence L/R");
            assert_eq!(nf_l, nf_s, "confluence L/seeded");
            // soundness whenever the levels are admissible; a combo that
            // died entirely compares as the zero map
            for level in [2u32, 3] {
                let lhs = evaluate_burnside(&combo, &src, level, DEFAULT_BUDGET);
                let rhs = evaluate_burnside(&nf_l, &src, level, DEFAULT_BUDGET);
                if let (Ok(a), Ok(b)) = (lhs, rhs) {
                    let zero =
                        |m: &Vec<Vec<i64>>| m.iter().flatten().all(|&x| x == 0);
                    assert!(a == b || (zero(&a) && zero(&b)), "level {level}");
                }
            }
        }
    }

    #[test]
    fn adams_examples() {
        let c = ctx(3, 8);
        // J = {p·id}: every unit conjugates into the submonoid
        let p_id = PMatrix::identity(c, 2).scalar_mul(3);
        let gamma = PMatrix::from_int(c, &vec![vec![1, 1], vec![1, 2]]).unwrap();
        let out = adams_compat(&[gamma.clone()], &[p_id], 4).unwrap();
        assert!(matches!(out, AdamsOutcome::Compatible(_)));

        // J = {diag(p,1)}: the swap conjugates out of the submonoid
        let d = PMatrix::from_int(c, &vec![vec![3, 0], vec![0, 1]]).unwrap();
        let swap = PMatrix::from_int(c, &vec![vec![0, 1], vec![1, 0]]).unwrap();
        let out = adams_compat(&[swap], &[d.clone()], 4).unwrap();
        assert!(matches!(out, AdamsOutcome::Incompatible(0, 0)));

        // I = {identity}: trivially compatible
        let id = PMatrix::identity(c, 2);
        let out = adams_compat(&[id], &[d], 4).unwrap();
        assert!(matches!(out, AdamsOutcome::Compatible(_)));
    }

    #[test]
    fn object_id_fidelity() {
        let c = ctx(2, 10);
        let a = PMatrix::from_int(c, &vec![vec![2, 1], vec![0, 2]]).unwrap();
        let h = PMatrix::from_int(c, &vec![vec![1, 0], vec![1, 1]]).unwrap();
        let ha = h.mul(&a).unwrap();
        assert_eq!(ObjectId::of(&a), ObjectId::of(&ha));
        for level in 2..=3 {
            assert_eq!(
                kernel_subgroup(&a, level).unwrap(),
                kernel_subgroup(&ha, level).unwrap()
            );
        }
        let b = PMatrix::identity(c, 2).scalar_mul(2);
        assert_ne!(ObjectId::of(&a), ObjectId::of(&b));
        assert_ne!(
            kernel_subgroup(&a, 2).unwrap(),
            kernel_subgroup(&b, 2).unwrap()
        );
    }

    #[test]
    fn parse_and_render_roundtrip() {
        let c = ctx(3, 8);
        let combo = parse_combo("F[3] . d(1) . V[3] + 2 . R[3]", c).unwrap();
        assert_eq!(combo.terms.len(), 2);
        let rendered = render_combo(&combo);
        assert!(rendered.contains("F[3]"));
        assert!(rendered.contains("d(1)"));
        let reparsed = parse_combo(&rendered, c).unwrap();
        assert_eq!(combo, reparsed);
    }

    #[test]
    fn registry_is_stable_and_symmetric() {
        let c = ctx(2, 12);
        let reg = ChoiceRegistry::new();
        let f = PMatrix::from_int(c, &vec![vec![2, 1], vec![0, 2]]).unwrap();
        let g = PMatrix::from_int(c, &vec![vec![2, 0], vec![0, 1]]).unwrap();
        let a = reg.pair(&f, &g).unwrap();
        let b = reg.pair(&f, &g).unwrap();
        assert_eq!(a.s, b.s);
        let sw = reg.pair(&g, &f).unwrap();
        assert_eq!(a.d, sw.d);
        assert_eq!(a.fbar, sw.gbar);
        assert_eq!(a.s, sw.t);
        assert_eq!(a.ftilde, sw.gtilde);
    }
}
