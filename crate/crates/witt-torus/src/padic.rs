//! Matrices over the p-adic integers at fixed precision.
//!
//! Every value lives in a [`PadicContext`] fixing the prime `p` and a
//! precision exponent `N`; all arithmetic is carried out modulo `p^N`.
//! Division is only ever performed by units or by exact powers of `p`, and
//! an operation that would need more precision than the context provides
//! reports [`Error::PrecisionExhausted`] instead of silently truncating.
//!
//! The monoid of interest is the set of square matrices over `ℤ_p` that are
//! invertible over `ℚ_p`, i.e. injective endomorphisms of `ℤ_pⁿ`.  For such
//! a matrix the module computes:
//!
//! * a diagonalization `U·α·V = diag(p^{e_1},…,p^{e_n})` with unimodular
//!   `U`, `V` ([`PMatrix::smith`]),
//! * the volume `|α| = p^{Σe_i}`, the cardinality of `ℤ_pⁿ/αℤ_pⁿ`,
//! * the adjoint `α†`, the unique matrix with `α·α† = |α|·I`,
//! * certified gcd/lcm factorizations with Bezout data
//!   ([`gcd_cert`], [`lcm_cert`]).
//!
//! The canonical representative of a lattice (the column span of a matrix)
//! is its column Hermite form with pure p-power pivots; this global choice
//! is what makes normal forms elsewhere in the crate well defined.

use crate::{Error, Result};
use serde::Serialize;

/// Fixed prime and precision for p-adic arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PadicContext {
    p: u64,
    prec: u32,
    #[serde(skip)]
    modulus: u64,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl PadicContext {
    /// Creates a context for arithmetic modulo `p^prec`.
    pub fn new(p: u64, prec: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if prec == 0 {
            return Err(Error::InvalidPrecision(prec));
        }
        let mut modulus: u64 = 1;
        for _ in 0..prec {
            modulus = modulus
                .checked_mul(p)
                .filter(|&m| m < (1 << 62))
                .ok_or(Error::InvalidPrecision(prec))?;
        }
        Ok(PadicContext { p, prec, modulus })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Same prime, lower precision.
    pub fn reduced(&self, prec: u32) -> Result<Self> {
        if prec == 0 || prec > self.prec {
            return Err(Error::InvalidPrecision(prec));
        }
        PadicContext::new(self.p, prec)
    }

    pub fn reduce(&self, x: i64) -> u64 {
        let m = self.modulus as i128;
        (((x as i128 % m) + m) % m) as u64
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = (a as u128 + b as u128) % self.modulus as u128;
        s as u64
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let m = self.modulus as u128;
        ((a as u128 + m - b as u128 % m) % m) as u64
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.modulus - a
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus as u128) as u64
    }

    /// p-adic valuation of the canonical residue; `prec` for zero.
    pub fn val(&self, x: u64) -> u32 {
        if x == 0 {
            return self.prec;
        }
        let mut v = 0;
        let mut y = x;
        while y % self.p == 0 {
            y /= self.p;
            v += 1;
        }
        v
    }

    /// p^e as an element of the context; `e >= prec` gives 0.
    pub fn p_pow(&self, e: u32) -> u64 {
        if e >= self.prec {
            return 0;
        }
        let mut r = 1u64;
        for _ in 0..e {
            r *= self.p;
        }
        r
    }

    /// Inverse of a unit modulo p^prec.
    pub fn inv_unit(&self, u: u64) -> Result<u64> {
        if self.val(u) != 0 {
            return Err(Error::PrecisionExhausted(self.prec));
        }
        // extended Euclid on (u, modulus)
        let (mut r0, mut r1) = (u as i128, self.modulus as i128);
        let (mut s0, mut s1) = (1i128, 0i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (s0, s1) = (s1, s0 - q * s1);
        }
        debug_assert_eq!(r0.abs(), 1);
        let m = self.modulus as i128;
        let inv = ((s0 * r0 % m) + m) % m;
        Ok(inv as u64)
    }
}

/// A matrix over `ℤ_p` reduced modulo `p^N`, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PMatrix {
    ctx: PadicContext,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

/// Diagonalization `U·α·V = diag(p^{e_1},…)` with unimodular `U`, `V`.
///
/// Exponents are nondecreasing; an exponent equal to the context precision
/// marks a pivot that could not be certified at this precision.
#[derive(Debug, Clone)]
pub struct SmithForm {
    pub u: PMatrix,
    pub v: PMatrix,
    pub exps: Vec<u32>,
}

/// Certified gcd factorization: `d·fbar = f`, `d·gbar = g`,
/// `fbar·s + gbar·t = I`, with `[fbar | gbar]` of full rank mod p.
#[derive(Debug, Clone, Serialize)]
pub struct GcdCert {
    pub d: PMatrix,
    pub fbar: PMatrix,
    pub gbar: PMatrix,
    pub s: PMatrix,
    pub t: PMatrix,
}

/// Certified lcm: `f·gtilde = g·ftilde = lcm`, where the column span of
/// `lcm` is the lattice intersection `fℤⁿ ∩ gℤⁿ`.
///
/// Equivalently the square formed by the cofactors is cartesian and the
/// kernel subgroups of `ftilde` and `gtilde` intersect trivially.  (The
/// cofactors of a cartesian square need not span `ℤⁿ` mod p; volumes are
/// the reliable certificate, via `|f||g| = |gcd||lcm|`.)
#[derive(Debug, Clone, Serialize)]
pub struct LcmCert {
    pub ftilde: PMatrix,
    pub gtilde: PMatrix,
    pub lcm: PMatrix,
}

impl PMatrix {
    pub fn zero(ctx: PadicContext, rows: usize, cols: usize) -> Self {
        PMatrix {
            ctx,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(ctx: PadicContext, n: usize) -> Self {
        let mut m = Self::zero(ctx, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from integer rows, reducing into the context.
    ///
    /// Square matrices with determinant exactly zero over ℤ are rejected:
    /// they can never belong to the monoid at any precision.
    pub fn from_int(ctx: PadicContext, rows: &[Vec<i64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        if r == c && int_det(rows) == 0 {
            return Err(Error::NotInjective);
        }
        let mut m = Self::zero(ctx, r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                m.set(i, j, ctx.reduce(x));
            }
        }
        Ok(m)
    }

    /// Diagonal matrix with the given p-power exponents.
    pub fn p_diag(ctx: PadicContext, exps: &[u32]) -> Self {
        let n = exps.len();
        let mut m = Self::zero(ctx, n, n);
        for (i, &e) in exps.iter().enumerate() {
            m.set(i, i, ctx.p_pow(e));
        }
        m
    }

    pub fn context(&self) -> PadicContext {
        self.ctx
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: u64) {
        self.data[i * self.cols + j] = x;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..self.cols).all(|j| self.get(i, j) == u64::from(i == j)))
    }

    /// Reduces all entries into a lower-precision context.
    pub fn reduce_to(&self, prec: u32) -> Result<PMatrix> {
        let ctx = self.ctx.reduced(prec.min(self.ctx.prec))?;
        let data = self.data.iter().map(|&x| x % ctx.modulus).collect();
        Ok(PMatrix {
            ctx,
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    fn common_ctx(&self, other: &PMatrix) -> Result<PadicContext> {
        if self.ctx.p != other.ctx.p {
            return Err(Error::ContextMismatch(format!(
                "primes differ: {} vs {}",
                self.ctx.p, other.ctx.p
            )));
        }
        self.ctx.reduced(self.ctx.prec.min(other.ctx.prec))
    }

    pub fn mul(&self, other: &PMatrix) -> Result<PMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let ctx = self.common_ctx(other)?;
        let mut out = PMatrix::zero(ctx, self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc: u128 = 0;
                for k in 0..self.cols {
                    acc += self.get(i, k) as u128 % ctx.modulus as u128
                        * (other.get(k, j) as u128 % ctx.modulus as u128)
                        % ctx.modulus as u128;
                }
                out.set(i, j, (acc % ctx.modulus as u128) as u64);
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &PMatrix) -> Result<PMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("add shape".into()));
        }
        let ctx = self.common_ctx(other)?;
        let mut out = PMatrix::zero(ctx, self.rows, self.cols);
        for i in 0..self.data.len() {
            out.data[i] = ctx.add(self.data[i] % ctx.modulus, other.data[i] % ctx.modulus);
        }
        Ok(out)
    }

    pub fn scalar_mul(&self, c: u64) -> PMatrix {
        let mut out = self.clone();
        for x in &mut out.data {
            *x = self.ctx.mul(*x, c % self.ctx.modulus);
        }
        out
    }

    pub fn transpose(&self) -> PMatrix {
        let mut out = PMatrix::zero(self.ctx, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hconcat(&self, other: &PMatrix) -> Result<PMatrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch("hconcat rows".into()));
        }
        let ctx = self.common_ctx(other)?;
        let mut out = PMatrix::zero(ctx, self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j) % ctx.modulus);
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j) % ctx.modulus);
            }
        }
        Ok(out)
    }

    pub fn column(&self, j: usize) -> Vec<u64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> PMatrix {
        let mut out = PMatrix::zero(self.ctx, r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                out.set(i - r0, j - c0, self.get(i, j));
            }
        }
        out
    }

    /// Rank of the reduction mod p.
    pub fn rank_mod_p(&self) -> usize {
        let p = self.ctx.p;
        let mut a: Vec<Vec<u64>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) % p).collect())
            .collect();
        let mut rank = 0;
        let mut row = 0;
        for col in 0..self.cols {
            if row >= self.rows {
                break;
            }
            if let Some(pr) = (row..self.rows).find(|&i| a[i][col] != 0) {
                a.swap(row, pr);
                let inv = mod_inv_prime(a[row][col], p);
                for j in col..self.cols {
                    a[row][j] = a[row][j] * inv % p;
                }
                for i in 0..self.rows {
                    if i != row && a[i][col] != 0 {
                        let f = a[i][col];
                        for j in col..self.cols {
                            a[i][j] = (a[i][j] + (p - f) * a[row][j]) % p;
                        }
                    }
                }
                row += 1;
                rank += 1;
            }
        }
        rank
    }

    /// Column Hermite normal form with transform: returns `(echelon, pivots, w)`
    /// where `self·w ≡ echelon`, `w` is unimodular, the pivot columns come
    /// first with strictly increasing pivot rows, pivots are pure p-powers,
    /// entries to the left of each pivot in its row are reduced below the
    /// pivot, and all non-pivot columns are zero.
    pub fn hermite_transform(&self) -> (PMatrix, Vec<(usize, u32)>, PMatrix) {
        let ctx = self.ctx;
        let n = self.rows;
        let m = self.cols;
        let mut a = self.clone();
        let mut w = PMatrix::identity(ctx, m);
        let mut pivots: Vec<(usize, u32)> = Vec::new();
        let mut next = 0usize;
        for row in 0..n {
            // pick the active column whose entry in this row has minimal valuation
            let mut best: Option<(usize, u32)> = None;
            for j in next..m {
                let e = ctx.val(a.get(row, j));
                if e < ctx.prec && best.map_or(true, |(_, be)| e < be) {
                    best = Some((j, e));
                }
            }
            let Some((jstar, e)) = best else { continue };
            a.swap_cols(next, jstar);
            w.swap_cols(next, jstar);
            // normalize pivot to p^e
            let unit = a.get(row, next) / ctx.p_pow(e);
            let inv = ctx.inv_unit(unit).expect("unit part is a unit");
            a.scale_col(next, inv);
            w.scale_col(next, inv);
            let pe = ctx.p_pow(e);
            // eliminate this row in all later columns
            for j in next + 1..m {
                let x = a.get(row, j);
                if x != 0 {
                    debug_assert!(ctx.val(x) >= e);
                    let q = x / pe;
                    a.axpy_col(j, next, ctx.neg(q));
                    w.axpy_col(j, next, ctx.neg(q));
                }
            }
            // reduce this row in earlier pivot columns
            for j in 0..next {
                let x = a.get(row, j);
                let q = x / pe;
                if q != 0 {
                    a.axpy_col(j, next, ctx.neg(q));
                    w.axpy_col(j, next, ctx.neg(q));
                }
            }
            pivots.push((row, e));
            next += 1;
        }
        (a, pivots, w)
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// column j *= c
    fn scale_col(&mut self, j: usize, c: u64) {
        for i in 0..self.rows {
            let x = self.get(i, j);
            self.set(i, j, self.ctx.mul(x, c));
        }
    }

    /// column j += c * column k
    fn axpy_col(&mut self, j: usize, k: usize, c: u64) {
        for i in 0..self.rows {
            let x = self.get(i, j);
            let y = self.get(i, k);
            self.set(i, j, self.ctx.add(x, self.ctx.mul(c, y)));
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn scale_row(&mut self, i: usize, c: u64) {
        for j in 0..self.cols {
            let x = self.get(i, j);
            self.set(i, j, self.ctx.mul(x, c));
        }
    }

    /// row i += c * row k
    fn axpy_row(&mut self, i: usize, k: usize, c: u64) {
        for j in 0..self.cols {
            let x = self.get(i, j);
            let y = self.get(k, j);
            self.set(i, j, self.ctx.add(x, self.ctx.mul(c, y)));
        }
    }

    /// Canonical square lattice form: the column Hermite form of the column
    /// span, padded with a zero column in every pivotless row.  Returns the
    /// square matrix together with per-row pivot exponents (`prec` for a
    /// pivotless row).
    pub fn hermite_square(&self) -> (PMatrix, Vec<u32>) {
        let (ech, pivots, _) = self.hermite_transform();
        let n = self.rows;
        let mut h = PMatrix::zero(self.ctx, n, n);
        let mut exps = vec![self.ctx.prec; n];
        for (col, &(row, e)) in pivots.iter().enumerate() {
            exps[row] = e;
            for i in 0..n {
                h.set(i, row, ech.get(i, col));
            }
        }
        (h, exps)
    }

    /// Canonical representative of the class `GL_n(ℤ_p)·self` (left unit
    /// multiplication); two monoid matrices get the same representative
    /// exactly when their kernel subgroups agree.
    pub fn left_class_rep(&self) -> PMatrix {
        let (h, _) = self.transpose().hermite_square();
        h.transpose()
    }

    /// Smith form over the context: `u·self·v = diag(p^{e_i})`.
    pub fn smith(&self) -> SmithForm {
        let ctx = self.ctx;
        let (r, c) = (self.rows, self.cols);
        let mut a = self.clone();
        let mut u = PMatrix::identity(ctx, r);
        let mut v = PMatrix::identity(ctx, c);
        let d = r.min(c);
        let mut exps = Vec::with_capacity(d);
        for k in 0..d {
            let mut best: Option<(usize, usize, u32)> = None;
            for i in k..r {
                for j in k..c {
                    let e = ctx.val(a.get(i, j));
                    if e < ctx.prec && best.map_or(true, |(_, _, be)| e < be) {
                        best = Some((i, j, e));
                    }
                }
            }
            let Some((pi, pj, e)) = best else {
                exps.extend(std::iter::repeat(ctx.prec).take(d - k));
                break;
            };
            a.swap_rows(k, pi);
            u.swap_rows(k, pi);
            a.swap_cols(k, pj);
            v.swap_cols(k, pj);
            let unit = a.get(k, k) / ctx.p_pow(e);
            let inv = ctx.inv_unit(unit).expect("unit part");
            a.scale_row(k, inv);
            u.scale_row(k, inv);
            let pe = ctx.p_pow(e);
            for i in k + 1..r {
                let x = a.get(i, k);
                if x != 0 {
                    let q = x / pe;
                    a.axpy_row(i, k, ctx.neg(q));
                    u.axpy_row(i, k, ctx.neg(q));
                }
            }
            for j in k + 1..c {
                let x = a.get(k, j);
                if x != 0 {
                    let q = x / pe;
                    a.axpy_col(j, k, ctx.neg(q));
                    v.axpy_col(j, k, ctx.neg(q));
                }
            }
            exps.push(e);
        }
        SmithForm { u, v, exps }
    }

    /// Smith exponents of a monoid member; errors if the matrix cannot be
    /// certified injective at this precision.
    pub fn monoid_exponents(&self) -> Result<Vec<u32>> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let sf = self.smith();
        if sf.exps.iter().any(|&e| e >= self.ctx.prec) {
            return Err(Error::PrecisionExhausted(self.ctx.prec));
        }
        Ok(sf.exps)
    }

    /// Valuation of the determinant.
    pub fn det_valuation(&self) -> Result<u32> {
        Ok(self.monoid_exponents()?.iter().sum())
    }

    /// `|α| = p^{v_p(det α)}`, the cardinality of the cokernel.
    pub fn volume(&self) -> Result<u128> {
        let v = self.det_valuation()?;
        let mut r: u128 = 1;
        for _ in 0..v {
            r = r
                .checked_mul(self.ctx.p as u128)
                .ok_or(Error::InvalidPrecision(v))?;
        }
        Ok(r)
    }

    pub fn is_unit(&self) -> bool {
        self.is_square()
            && self
                .monoid_exponents()
                .map_or(false, |e| e.iter().all(|&x| x == 0))
    }

    /// Inverse of a unimodular matrix.
    pub fn unit_inverse(&self) -> Result<PMatrix> {
        let sf = self.smith();
        if sf.exps.iter().any(|&e| e != 0) {
            return Err(Error::NotInjective);
        }
        sf.v.mul(&sf.u)
    }

    /// The adjoint `α†` with `α·α† = |α|·I`, at precision `N - v_p(det α)`.
    pub fn adjoint(&self) -> Result<PMatrix> {
        let sf = self.smith();
        if !self.is_square() {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if sf.exps.iter().any(|&e| e >= self.ctx.prec) {
            return Err(Error::PrecisionExhausted(self.ctx.prec));
        }
        let v_total: u32 = sf.exps.iter().sum();
        if v_total >= self.ctx.prec {
            return Err(Error::PrecisionExhausted(self.ctx.prec));
        }
        let comp: Vec<u32> = sf.exps.iter().map(|&e| v_total - e).collect();
        let mid = PMatrix::p_diag(self.ctx, &comp);
        let adj = sf.v.mul(&mid)?.mul(&sf.u)?;
        // entries are only determined modulo p^{N - v}
        adj.reduce_to(self.ctx.prec - v_total)
    }

    /// Solves `self · x = rhs` exactly, if a solution exists at precision.
    ///
    /// The result lives at precision `N - max(e_i)` where the `e_i` are the
    /// Smith exponents of `self`.
    pub fn solve_left(&self, rhs: &PMatrix) -> Option<PMatrix> {
        if !self.is_square() || self.rows != rhs.rows {
            return None;
        }
        let sf = self.smith();
        if sf.exps.iter().any(|&e| e >= self.ctx.prec) {
            return None;
        }
        let emax = *sf.exps.iter().max().unwrap_or(&0);
        let t = sf.u.mul(rhs).ok()?;
        let mut t2 = t.clone();
        for (i, &e) in sf.exps.iter().enumerate() {
            let pe = self.ctx.p_pow(e);
            for j in 0..t.cols {
                let x = t.get(i, j);
                if self.ctx.val(x) < e {
                    return None;
                }
                t2.set(i, j, x / pe);
            }
        }
        let x = sf.v.mul(&t2).ok()?;
        x.reduce_to(self.ctx.prec - emax).ok()
    }

    /// Solves `x · self = rhs` exactly, if a solution exists at precision.
    pub fn solve_right(&self, rhs: &PMatrix) -> Option<PMatrix> {
        self.transpose()
            .solve_left(&rhs.transpose())
            .map(|x| x.transpose())
    }

    /// Generator matrix of the kernel subgroup `L_α = α⁻¹ℤ_pⁿ/ℤ_pⁿ` inside
    /// `(ℤ/pˡ)ⁿ`: the columns of `p^l·α⁻¹` reduced mod `p^l`.
    pub fn kernel_gen_matrix(&self, level: u32) -> Result<PMatrix> {
        let exps = self.monoid_exponents()?;
        let emax = *exps.iter().max().unwrap_or(&0);
        let v: u32 = exps.iter().sum();
        if level < emax {
            return Err(Error::LevelTooSmall {
                needed: emax,
                got: level,
            });
        }
        if level + v > self.ctx.prec {
            return Err(Error::PrecisionExhausted(self.ctx.prec));
        }
        let sf = self.smith();
        let shifted: Vec<u32> = exps.iter().map(|&e| level - e).collect();
        let mid = PMatrix::p_diag(self.ctx, &shifted);
        let full = sf.v.mul(&mid)?.mul(&sf.u)?;
        full.reduce_to(level)
    }

    /// Renders in the row-major bracketed format `[[a,b],[c,d]]`.
    pub fn render(&self) -> String {
        let rows: Vec<String> = (0..self.rows)
            .map(|i| {
                let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
                format!("[{}]", row.join(","))
            })
            .collect();
        format!("[{}]", rows.join(","))
    }

    pub fn to_int_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

fn mod_inv_prime(a: u64, p: u64) -> u64 {
    // Fermat
    let mut r = 1u64;
    let mut b = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

/// Exact integer determinant by fraction-free elimination.
fn int_det(rows: &[Vec<i64>]) -> i128 {
    let n = rows.len();
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            let Some(swap) = (k + 1..n).find(|&i| a[i][k] != 0) else {
                return 0;
            };
            a.swap(k, swap);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[k][k] * a[i][j] - a[i][k] * a[k][j]) / prev;
            }
            a[i][k] = 0;
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Parses the row-major bracketed text format `[[a,b],[c,d]]`.
pub fn parse_int_matrix(s: &str) -> Result<Vec<Vec<i64>>> {
    let rows: Vec<Vec<i64>> =
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("matrix literal: {e}")))?;
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Parse("matrix literal must be rectangular".into()));
    }
    Ok(rows)
}

/// Certified greatest common divisor of two monoid matrices.
///
/// `d` is the canonical column Hermite basis of the lattice `fℤⁿ + gℤⁿ`,
/// so it is insensitive to right unit multiplication of `f` or `g`.
pub fn gcd_cert(f: &PMatrix, g: &PMatrix) -> Result<GcdCert> {
    f.monoid_exponents()?;
    g.monoid_exponents()?;
    let fg = f.hconcat(g)?;
    let (d, exps) = fg.hermite_square();
    let ctx = d.context();
    if exps.iter().any(|&e| e >= ctx.precision()) {
        return Err(Error::PrecisionExhausted(ctx.precision()));
    }
    let fbar = d.solve_left(f).ok_or(Error::PrecisionExhausted(ctx.precision()))?;
    let gbar = d.solve_left(g).ok_or(Error::PrecisionExhausted(ctx.precision()))?;
    let pair = fbar.hconcat(&gbar)?;
    let n = f.rows();
    if pair.rank_mod_p() != n {
        return Err(Error::PrecisionExhausted(ctx.precision()));
    }
    let (ech, pivots, w) = pair.hermite_transform();
    debug_assert!(pivots.iter().all(|&(_, e)| e == 0));
    debug_assert!(ech.submatrix(0, n, 0, n).is_identity());
    let s = w.submatrix(0, n, 0, n);
    let t = w.submatrix(n, 2 * n, 0, n);
    Ok(GcdCert { d, fbar, gbar, s, t })
}

/// Certified least common multiple of two monoid matrices.
///
/// When one lattice contains the other the pullback is chosen so that the
/// corresponding cofactor is exactly the identity; otherwise the lcm is the
/// canonical Hermite basis of the intersection lattice.
pub fn lcm_cert(f: &PMatrix, g: &PMatrix) -> Result<LcmCert> {
    f.monoid_exponents()?;
    g.monoid_exponents()?;
    let prec_err = || Error::PrecisionExhausted(f.context().precision());
    if let Some(q) = f.solve_left(g) {
        // gℤⁿ ⊆ fℤⁿ: lcm = g
        let lcm = g.reduce_to(q.context().precision())?;
        return Ok(LcmCert {
            ftilde: PMatrix::identity(q.context(), g.rows()),
            gtilde: q,
            lcm,
        });
    }
    if let Some(q) = g.solve_left(f) {
        // fℤⁿ ⊆ gℤⁿ: lcm = f
        let lcm = f.reduce_to(q.context().precision())?;
        return Ok(LcmCert {
            ftilde: q,
            gtilde: PMatrix::identity(f.context(), f.rows()),
            lcm,
        });
    }
    let n = f.rows();
    let fg = f.hconcat(g)?;
    let (_, pivots, w) = fg.hermite_transform();
    if pivots.len() != n {
        return Err(prec_err());
    }
    // the last n transform columns span the kernel of [f | g]
    let wtop = w.submatrix(0, n, n, 2 * n);
    let m_int = f.mul(&wtop)?;
    let (lcm, exps) = m_int.hermite_square();
    if exps.iter().any(|&e| e >= lcm.context().precision()) {
        return Err(prec_err());
    }
    let gtilde = f.solve_left(&lcm).ok_or_else(prec_err)?;
    let ftilde = g.solve_left(&lcm).ok_or_else(prec_err)?;
    let p = gtilde.context().precision().min(ftilde.context().precision());
    Ok(LcmCert {
        ftilde: ftilde.reduce_to(p)?,
        gtilde: gtilde.reduce_to(p)?,
        lcm: lcm.reduce_to(p)?,
    })
}

/// Whether `g = h·f` has a monoid solution `h` (equivalently the kernel
/// subgroup of `f` is contained in that of `g`).
pub fn left_divides(f: &PMatrix, g: &PMatrix) -> bool {
    f.solve_right(g).is_some()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn ctx(p: u64, n: u32) -> PadicContext {
        PadicContext::new(p, n).unwrap()
    }

    fn m(ctx: PadicContext, rows: &[&[i64]]) -> PMatrix {
        let v: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        PMatrix::from_int(ctx, &v).unwrap()
    }

    #[test]
    fn smith_identity() {
        let c = ctx(3, 4);
        let id = PMatrix::identity(c, 2);
        let sf = id.smith();
        assert_eq!(sf.exps, vec![0, 0]);
        let prod = sf.u.mul(&id).unwrap().mul(&sf.v).unwrap();
        assert!(prod.is_identity());
    }

    #[test]
    fn smith_diagonal() {
        let c = ctx(3, 6);
        let d = m(c, &[&[3, 0], &[0, 9]]);
        assert_eq!(d.smith().exps, vec![1, 2]);
    }

    #[test]
    fn smith_two_one_zero_two() {
        // content 1, determinant valuation 2
        let c = ctx(2, 6);
        let a = m(c, &[&[2, 1], &[0, 2]]);
        let sf = a.smith();
        assert_eq!(sf.exps, vec![0, 2]);
        let prod = sf.u.mul(&a).unwrap().mul(&sf.v).unwrap();
        assert_eq!(prod, PMatrix::p_diag(c, &[0, 2]));
    }

    #[test]
    fn smith_exponents_from_row_op_oracle() {
        // brute-force: the minimum valuation over all entries is the first
        // exponent, and det valuation fixes the second
        let c = ctx(2, 8);
        let a = m(c, &[&[2, 1], &[0, 2]]);
        let min_val = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| c.val(a.get(i, j)))
            .min()
            .unwrap();
        assert_eq!(min_val, 0);
        assert_eq!(a.det_valuation().unwrap(), 2);
    }

    #[test]
    fn volume_examples() {
        let c = ctx(3, 6);
        assert_eq!(PMatrix::identity(c, 2).volume().unwrap(), 1);
        assert_eq!(m(c, &[&[3, 0], &[0, 9]]).volume().unwrap(), 27);
        let c2 = ctx(2, 6);
        assert_eq!(m(c2, &[&[2, 1], &[0, 2]]).volume().unwrap(), 4);
    }

    #[test]
    fn volume_counts_cokernel() {
        // enumerate ℤ²/αℤ² at level 2^4 and count
        let c = ctx(2, 8);
        let a = m(c, &[&[2, 1], &[0, 2]]);
        let level = 16i64;
        let mut reach = std::collections::HashSet::new();
        for x in -level..level {
            for y in -level..level {
                let u = (2 * x + y).rem_euclid(level);
                let v = (2 * y).rem_euclid(level);
                reach.insert((u, v));
            }
        }
        let coker = (level * level) as u128 / reach.len() as u128;
        assert_eq!(coker, a.volume().unwrap());
    }

    #[test]
    fn adjoint_examples() {
        let c = ctx(3, 6);
        let id = PMatrix::identity(c, 2);
        assert!(id.adjoint().unwrap().is_identity());

        let one = m(c, &[&[3]]);
        let adj = one.adjoint().unwrap();
        assert_eq!(adj.get(0, 0), 1);

        let c2 = ctx(2, 8);
        let a = m(c2, &[&[2, 1], &[0, 2]]);
        let adj = a.adjoint().unwrap();
        let expect = PMatrix::from_int(adj.context(), &vec![vec![2, -1], vec![0, 2]]).unwrap();
        assert_eq!(adj, expect);
        let prod = a.mul(&adj).unwrap();
        let four_id = PMatrix::identity(prod.context(), 2).scalar_mul(4);
        assert_eq!(prod, four_id);
    }

    #[test]
    fn adjoint_precision_guard() {
        let c = ctx(2, 2);
        let a = m(c, &[&[4]]);
        assert!(matches!(a.adjoint(), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn gcd_identity_pair() {
        let c = ctx(3, 6);
        let id = PMatrix::identity(c, 2);
        let cert = gcd_cert(&id, &id).unwrap();
        assert!(cert.d.is_identity());
        assert!(cert.s.is_identity());
        assert!(cert.t.data.iter().all(|&x| x == 0));
    }

    #[test]
    fn gcd_scalar_pair() {
        let c = ctx(3, 6);
        let f = PMatrix::identity(c, 2).scalar_mul(3);
        let cert = gcd_cert(&f, &f).unwrap();
        assert_eq!(cert.d, f);
        assert!(cert.fbar.is_identity());
        assert!(cert.gbar.is_identity());
    }

    #[test]
    fn gcd_coprime_pair() {
        let c = ctx(3, 6);
        let f = m(c, &[&[3, 0], &[0, 1]]);
        let g = m(c, &[&[1, 0], &[0, 3]]);
        let cert = gcd_cert(&f, &g).unwrap();
        assert!(cert.d.is_identity());
        // [f|g] has full rank mod p
        assert_eq!(f.hconcat(&g).unwrap().rank_mod_p(), 2);
    }

    #[test]
    fn gcd_certificate_identities() {
        let c = ctx(2, 10);
        let f = m(c, &[&[2, 1], &[0, 4]]);
        let g = m(c, &[&[6, 1], &[2, 2]]);
        let cert = gcd_cert(&f, &g).unwrap();
        let cp = cert.fbar.context().precision();
        assert_eq!(cert.d.mul(&cert.fbar).unwrap(), f.reduce_to(cp).unwrap());
        assert_eq!(cert.d.mul(&cert.gbar).unwrap(), g.reduce_to(cp).unwrap());
        let one = cert
            .fbar
            .mul(&cert.s)
            .unwrap()
            .add(&cert.gbar.mul(&cert.t).unwrap())
            .unwrap();
        assert!(one.is_identity());
    }

    #[test]
    fn gcd_gl_invariance() {
        let c = ctx(2, 10);
        let f = m(c, &[&[2, 1], &[0, 4]]);
        let g = m(c, &[&[6, 1], &[2, 2]]);
        let u = m(c, &[&[1, 1], &[2, 3]]); // det 1
        let fu = f.mul(&u).unwrap();
        assert_eq!(gcd_cert(&fu, &g).unwrap().d, gcd_cert(&f, &g).unwrap().d);
    }

    #[test]
    fn lcm_equal_pair() {
        let c = ctx(3, 6);
        let f = m(c, &[&[3, 0], &[0, 9]]);
        let cert = lcm_cert(&f, &f).unwrap();
        assert!(cert.ftilde.is_identity());
        assert!(cert.gtilde.is_identity());
        assert_eq!(cert.lcm, f.reduce_to(cert.lcm.context().precision()).unwrap());
    }

    #[test]
    fn lcm_cross_diagonal() {
        let c = ctx(3, 8);
        let f = m(c, &[&[3, 0], &[0, 1]]);
        let g = m(c, &[&[1, 0], &[0, 3]]);
        let cert = lcm_cert(&f, &g).unwrap();
        assert_eq!(cert.lcm.volume().unwrap(), 9);
        assert_eq!(f.mul(&cert.gtilde).unwrap(), cert.lcm);
        assert_eq!(g.mul(&cert.ftilde).unwrap(), cert.lcm);
    }

    #[test]
    fn lcm_spans_intersection_by_enumeration() {
        // columns of lcm generate fℤ² ∩ gℤ² at level p^2
        let c = ctx(2, 10);
        let f = m(c, &[&[2, 1], &[0, 2]]);
        let g = m(c, &[&[2, 0], &[0, 1]]);
        let cert = lcm_cert(&f, &g).unwrap();
        let level = 8i64; // p^3
        let span = |mat: &PMatrix| {
            let mut s = std::collections::HashSet::new();
            for x in 0..level {
                for y in 0..level {
                    let u = (mat.get(0, 0) as i64 * x + mat.get(0, 1) as i64 * y).rem_euclid(level);
                    let v = (mat.get(1, 0) as i64 * x + mat.get(1, 1) as i64 * y).rem_euclid(level);
                    s.insert((u, v));
                }
            }
            s
        };
        let inter: std::collections::HashSet<_> =
            span(&f).intersection(&span(&g)).cloned().collect();
        assert_eq!(span(&cert.lcm), inter);
    }

    #[test]
    fn pleasant_equation_randomized() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for p in [2u64, 3] {
            let c = ctx(p, 12);
            for _ in 0..60 {
                let n = rng.gen_range(1..=2);
                let f = random_monoid(&mut rng, c, n, 2);
                let g = random_monoid(&mut rng, c, n, 2);
                let d = gcd_cert(&f, &g).unwrap();
                let l = lcm_cert(&f, &g).unwrap();
                assert_eq!(
                    f.volume().unwrap() * g.volume().unwrap(),
                    d.d.volume().unwrap() * l.lcm.volume().unwrap()
                );
            }
        }
    }

    pub(crate) fn random_monoid(
        rng: &mut impl rand::Rng,
        ctx: PadicContext,
        n: usize,
        max_exp: u32,
    ) -> PMatrix {
        // unit * p-power diagonal * unit keeps determinant valuation small
        loop {
            let mut rows = vec![vec![0i64; n]; n];
            for (i, r) in rows.iter_mut().enumerate() {
                for (j, x) in r.iter_mut().enumerate() {
                    let e: u32 = rng.gen_range(0..=max_exp);
                    let base: i64 = rng.gen_range(-4..=4);
                    *x = base * (ctx.prime() as i64).pow(e) + i64::from(i == j);
                }
            }
            if let Ok(mat) = PMatrix::from_int(ctx, &rows) {
                if mat
                    .monoid_exponents()
                    .map_or(false, |e| e.iter().sum::<u32>() + 2 < ctx.precision())
                {
                    return mat;
                }
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let c = ctx(2, 8);
        let id = PMatrix::identity(c, 2);
        let k = id.kernel_gen_matrix(1).unwrap();
        assert!(k.data.iter().all(|&x| x == 0));

        let p_id = PMatrix::identity(c, 2).scalar_mul(2);
        let k = p_id.kernel_gen_matrix(1).unwrap();
        assert!(k.is_identity());

        let a = m(c, &[&[2, 1], &[0, 2]]);
        let k = a.kernel_gen_matrix(2).unwrap();
        // columns of 4·α⁻¹ mod 4: α⁻¹ = 1/4·[[2,-1],[0,2]]
        let expect = PMatrix::from_int(k.context(), &vec![vec![2, -1], vec![0, 2]]).unwrap();
        assert_eq!(k, expect);
    }

    #[test]
    fn kernel_level_guards() {
        let c = ctx(2, 6);
        let a = PMatrix::identity(c, 2).scalar_mul(4);
        assert!(matches!(
            a.kernel_gen_matrix(1),
            Err(Error::LevelTooSmall { .. })
        ));
        assert!(matches!(
            a.kernel_gen_matrix(3),
            Err(Error::PrecisionExhausted(_))
        ));
    }

    #[test]
    fn left_class_rep_detects_same_kernel() {
        let c = ctx(2, 8);
        let a = m(c, &[&[2, 1], &[0, 2]]);
        let h = m(c, &[&[1, 1], &[0, 1]]);
        let ha = h.mul(&a).unwrap();
        assert_eq!(a.left_class_rep(), ha.left_class_rep());
        let b = m(c, &[&[2, 0], &[0, 2]]);
        assert_ne!(a.left_class_rep(), b.left_class_rep());
    }

    #[test]
    fn from_int_rejects_zero_determinant() {
        let c = ctx(3, 4);
        let r = PMatrix::from_int(c, &vec![vec![1, 2], vec![2, 4]]);
        assert!(matches!(r, Err(Error::NotInjective)));
    }

    #[test]
    fn parse_and_render_roundtrip() {
        let rows = parse_int_matrix("[[2,1],[0,2]]").unwrap();
        assert_eq!(rows, vec![vec![2, 1], vec![0, 2]]);
        let c = ctx(2, 6);
        let a = PMatrix::from_int(c, &rows).unwrap();
        assert_eq!(a.render(), "[[2,1],[0,2]]");
    }

    #[test]
    fn solve_left_rejects_indivisible() {
        let c = ctx(2, 6);
        let f = PMatrix::identity(c, 2).scalar_mul(2);
        let g = m(c, &[&[1, 0], &[0, 2]]);
        assert!(f.solve_left(&g).is_none());
        assert!(f.solve_left(&f).unwrap().is_identity());
    }

    #[test]
    fn hermite_square_is_lattice_invariant() {
        let c = ctx(2, 8);
        let a = m(c, &[&[2, 1], &[0, 4]]);
        let u = m(c, &[&[1, 3], &[2, 7]]); // det 1
        let au = a.mul(&u).unwrap();
        assert_eq!(a.hermite_square().0, au.hermite_square().0);
    }
}
