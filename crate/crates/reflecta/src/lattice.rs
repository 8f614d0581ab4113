//! Exact integer-lattice algebra.
//!
//! Lattices are stored in row Hermite normal form over arbitrary-precision
//! integers. On top of that sit unions of cosets of a lattice
//! ([`CosetUnion`]) and finite quotients ([`FiniteQuotient`]), which are the
//! two shapes every translation set in this crate takes.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An integer vector.
pub type IVec = Vec<BigInt>;

/// Builds an [`IVec`] from machine integers.
pub fn ivec(v: &[i64]) -> IVec {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

/// The zero vector of length `n`.
pub fn zero_vec(n: usize) -> IVec {
    vec![BigInt::zero(); n]
}

pub fn vadd(a: &[BigInt], b: &[BigInt]) -> IVec {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vsub(a: &[BigInt], b: &[BigInt]) -> IVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vneg(a: &[BigInt]) -> IVec {
    a.iter().map(|x| -x).collect()
}

pub fn vscale(c: &BigInt, a: &[BigInt]) -> IVec {
    a.iter().map(|x| c * x).collect()
}

fn axpy(y: &mut [BigInt], c: &BigInt, x: &[BigInt]) {
    if c.is_zero() {
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// Which precondition of the odd-index coset lemma was violated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyLemmaViolation {
    IndexNotPrime(BigInt),
    IndexTwo,
    ZeroNotInL,
    ZeroNotInLPrime,
    NotUnionOfDoubleCosets,
    HypothesisFails,
}

impl fmt::Display for KeyLemmaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IndexNotPrime(d) => write!(f, "index {d} of H is not prime"),
            Self::IndexTwo => write!(f, "index of H is 2"),
            Self::ZeroNotInL => write!(f, "0 is not in L"),
            Self::ZeroNotInLPrime => write!(f, "0 is not in L'"),
            Self::NotUnionOfDoubleCosets => write!(f, "L and L' must be unions of cosets of 2*Lambda inside Lambda"),
            Self::HypothesisFails => write!(f, "H intersect L is not contained in L'"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("empty input")]
    EmptyInput,
    #[error("inconsistent row lengths: expected {expected}, found {found}")]
    RaggedRows { expected: usize, found: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("not a sublattice")]
    NotSublattice,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("sublattice is not maximal: index {0}")]
    NotMaximal(BigInt),
    #[error("sublattice has infinite index")]
    InfiniteIndex,
    #[error("scale factor must be nonzero")]
    ZeroScale,
    #[error("quotient too large: {0} elements")]
    QuotientTooLarge(BigInt),
    #[error("key lemma precondition violated: {0}")]
    KeyLemma(KeyLemmaViolation),
}

pub type Result<T> = std::result::Result<T, LatticeError>;

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Primes up to and including `bound`.
pub fn primes_up_to(bound: u64) -> Vec<u64> {
    (2..=bound).filter(|&p| is_prime(p)).collect()
}

/// Row Hermite normal form of an arbitrary integer matrix; zero rows are dropped.
fn hermite_rows(mut m: Vec<IVec>, ncols: usize) -> Vec<IVec> {
    let mut r = 0;
    for col in 0..ncols {
        if r == m.len() {
            break;
        }
        let mut found = false;
        loop {
            let piv = (r..m.len())
                .filter(|&i| !m[i][col].is_zero())
                .min_by(|&a, &b| m[a][col].abs().cmp(&m[b][col].abs()));
            let Some(piv) = piv else { break };
            found = true;
            m.swap(r, piv);
            let mut clean = true;
            for i in r + 1..m.len() {
                if m[i][col].is_zero() {
                    continue;
                }
                let q = m[i][col].div_floor(&m[r][col]);
                let pivot_row = m[r].clone();
                axpy(&mut m[i], &-q, &pivot_row);
                if !m[i][col].is_zero() {
                    clean = false;
                }
            }
            if clean {
                break;
            }
        }
        if !found {
            continue;
        }
        if m[r][col].is_negative() {
            for x in m[r].iter_mut() {
                *x = -&*x;
            }
        }
        let pivot_row = m[r].clone();
        for i in 0..r {
            let q = m[i][col].div_floor(&pivot_row[col]);
            axpy(&mut m[i], &-q, &pivot_row);
        }
        r += 1;
    }
    m.truncate(r);
    m
}

fn pivot_col(row: &[BigInt]) -> usize {
    row.iter().position(|x| !x.is_zero()).expect("HNF rows are nonzero")
}

/// Exact determinant by fraction-free elimination.
fn bareiss_det(mut a: Vec<IVec>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            let Some(s) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, s);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * &a[n - 1][n - 1]
}

/// HNF of `[gens | I]`: the rows whose first `n` entries vanish describe the
/// relations among the generators; the others carry the transform used to
/// reach them. Used both to intersect lattices and to solve `x·G = t`.
struct SpanSolver {
    n: usize,
    /// (hnf row restricted to the first n entries, transform coefficients)
    echelon: Vec<(IVec, IVec)>,
    kernel: Vec<IVec>,
}

impl SpanSolver {
    fn new(gens: &[IVec], n: usize) -> Self {
        let k = gens.len();
        let aug: Vec<IVec> = gens
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut row = g.clone();
                row.extend((0..k).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
                row
            })
            .collect();
        let h = hermite_rows(aug, n + k);
        let mut echelon = Vec::new();
        let mut kernel = Vec::new();
        for row in h {
            if row[..n].iter().all(Zero::is_zero) {
                kernel.push(row[n..].to_vec());
            } else {
                echelon.push((row[..n].to_vec(), row[n..].to_vec()));
            }
        }
        SpanSolver { n, echelon, kernel }
    }

    /// Coefficients x with x·gens = t, if any.
    fn solve(&self, t: &[BigInt]) -> Option<IVec> {
        let k = self.echelon.first().map(|(_, c)| c.len()).unwrap_or(0);
        let mut rem = t.to_vec();
        let mut coef = zero_vec(k);
        for (h, c) in &self.echelon {
            let p = pivot_col(h);
            let (q, r) = rem[p].div_mod_floor(&h[p]);
            if !r.is_zero() {
                return None;
            }
            axpy(&mut rem, &-&q, h);
            axpy(&mut coef, &q, c);
        }
        if rem[..self.n].iter().all(Zero::is_zero) {
            Some(coef)
        } else {
            None
        }
    }
}

/// A lattice in Z^n given by its row Hermite normal form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lattice {
    dim: usize,
    rows: Vec<IVec>,
}

impl Lattice {
    /// Hermite normal form of the module spanned by `rows`.
    pub fn hnf(rows: &[IVec]) -> Result<Self> {
        let first = rows.first().ok_or(LatticeError::EmptyInput)?;
        let dim = first.len();
        if dim == 0 {
            return Err(LatticeError::EmptyInput);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(LatticeError::RaggedRows { expected: dim, found: bad.len() });
        }
        Ok(Self::from_gens(dim, rows.to_vec()))
    }

    /// Like [`Lattice::hnf`] but for machine-integer input.
    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let rows: Vec<IVec> = rows.iter().map(|r| ivec(r)).collect();
        Self::hnf(&rows)
    }

    /// Internal constructor: any generator list, possibly empty.
    pub(crate) fn from_gens(dim: usize, gens: Vec<IVec>) -> Self {
        Lattice { dim, rows: hermite_rows(gens, dim) }
    }

    /// Z^n.
    pub fn standard(dim: usize) -> Self {
        let rows = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
            .collect();
        Lattice { dim, rows }
    }

    /// The zero lattice in Z^n.
    pub fn zero(dim: usize) -> Self {
        Lattice { dim, rows: Vec::new() }
    }

    /// Diagonal lattice d_1 Z × ... × d_n Z (entries must be nonzero).
    pub fn diagonal(d: &[i64]) -> Self {
        let n = d.len();
        let gens = (0..n)
            .map(|i| (0..n).map(|j| BigInt::from(if i == j { d[i] } else { 0 })).collect())
            .collect();
        Self::from_gens(n, gens)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[IVec] {
        &self.rows
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.dim
    }

    /// det(B·Bᵗ) for the basis matrix B.
    pub fn determinant_sq(&self) -> BigInt {
        if self.is_full_rank() {
            let d: BigInt = self.rows.iter().enumerate().map(|(i, r)| r[i].clone()).product();
            return &d * &d;
        }
        let gram: Vec<IVec> = self
            .rows
            .iter()
            .map(|a| self.rows.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
            .collect();
        bareiss_det(gram)
    }

    /// |det B| for a full-rank lattice.
    pub fn determinant(&self) -> Option<BigInt> {
        self.is_full_rank()
            .then(|| self.rows.iter().enumerate().map(|(i, r)| r[i].clone()).product())
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim == n {
            Ok(())
        } else {
            Err(LatticeError::DimensionMismatch(self.dim, n))
        }
    }

    /// Coefficients of `v` with respect to the HNF rows, if `v` lies in the lattice.
    pub fn coordinates(&self, v: &[BigInt]) -> Option<IVec> {
        let mut rem = v.to_vec();
        let mut coef = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let p = pivot_col(row);
            let (q, r) = rem[p].div_mod_floor(&row[p]);
            if !r.is_zero() {
                return None;
            }
            axpy(&mut rem, &-&q, row);
            coef.push(q);
        }
        rem.iter().all(Zero::is_zero).then_some(coef)
    }

    pub fn member(&self, v: &[BigInt]) -> Result<bool> {
        self.check_dim(v.len())?;
        Ok(self.contains(v))
    }

    /// Membership without the dimension check.
    pub fn contains(&self, v: &[BigInt]) -> bool {
        self.coordinates(v).is_some()
    }

    /// Canonical residue of `v`: pivot coordinates reduced into `[0, pivot)`.
    pub fn reduce(&self, v: &[BigInt]) -> IVec {
        let mut rem = v.to_vec();
        for row in &self.rows {
            let p = pivot_col(row);
            let q = rem[p].div_floor(&row[p]);
            axpy(&mut rem, &-q, row);
        }
        rem
    }

    /// Whether `other ⊆ self`.
    pub fn contains_lattice(&self, other: &Lattice) -> bool {
        self.dim == other.dim && other.rows.iter().all(|r| self.contains(r))
    }

    pub fn sum(&self, other: &Lattice) -> Result<Lattice> {
        self.check_dim(other.dim)?;
        let gens = self.rows.iter().chain(&other.rows).cloned().collect();
        Ok(Self::from_gens(self.dim, gens))
    }

    /// The lattice spanned by `self` and extra vectors.
    pub fn extend(&self, extra: &[IVec]) -> Lattice {
        let gens = self.rows.iter().chain(extra).cloned().collect();
        Self::from_gens(self.dim, gens)
    }

    pub fn intersection(&self, other: &Lattice) -> Result<Lattice> {
        self.check_dim(other.dim)?;
        if self.rank() == 0 || other.rank() == 0 {
            return Ok(Lattice::zero(self.dim));
        }
        let r1 = self.rank();
        let gens: Vec<IVec> = self.rows.iter().cloned().chain(other.rows.iter().map(|r| vneg(r))).collect();
        let solver = SpanSolver::new(&gens, self.dim);
        let common = solver
            .kernel
            .iter()
            .map(|k| {
                let mut v = zero_vec(self.dim);
                for (c, row) in k[..r1].iter().zip(&self.rows) {
                    axpy(&mut v, c, row);
                }
                v
            })
            .collect();
        Ok(Self::from_gens(self.dim, common))
    }

    pub fn scale(&self, c: &BigInt) -> Result<Lattice> {
        if c.is_zero() {
            return Err(LatticeError::ZeroScale);
        }
        Ok(Self::from_gens(self.dim, self.rows.iter().map(|r| vscale(c, r)).collect()))
    }

    pub fn scale_i(&self, c: i64) -> Lattice {
        self.scale(&BigInt::from(c)).expect("nonzero scale")
    }

    /// `{t : n·t ∈ self}`.
    pub fn divide(&self, n: &BigInt) -> Result<Lattice> {
        if n.is_zero() {
            return Err(LatticeError::ZeroScale);
        }
        let nz = Lattice::standard(self.dim).scale(n)?;
        let inter = self.intersection(&nz)?;
        let gens = inter.rows.iter().map(|r| r.iter().map(|x| x / n).collect()).collect();
        Ok(Self::from_gens(self.dim, gens))
    }

    pub fn combine(&self, other: &Lattice, mode: &CombineMode) -> Result<Lattice> {
        match mode {
            CombineMode::Sum => self.sum(other),
            CombineMode::Intersection => self.intersection(other),
            CombineMode::Scale(c) => {
                self.check_dim(other.dim)?;
                self.scale(c)
            }
        }
    }

    /// `[self : sub]` for a sublattice of the same rank.
    pub fn index_of(&self, sub: &Lattice) -> Result<BigInt> {
        self.check_dim(sub.dim)?;
        if !self.contains_lattice(sub) {
            return Err(LatticeError::NotSublattice);
        }
        if sub.rank() != self.rank() {
            return Err(LatticeError::InfiniteIndex);
        }
        let ratio = sub.determinant_sq() / self.determinant_sq();
        Ok(ratio.sqrt())
    }

    /// A basis of `self` adapted to the sublattice `sub` (Smith normal form).
    pub fn stacked_basis(&self, sub: &Lattice) -> Result<StackedBasis> {
        self.check_dim(sub.dim)?;
        let coords: Vec<IVec> = sub
            .rows
            .iter()
            .map(|r| self.coordinates(r).ok_or(LatticeError::NotSublattice))
            .collect::<Result<_>>()?;
        Ok(smith(coords, self.rows.clone(), sub.rank()))
    }

    /// All sublattices of prime index `p`.
    pub fn maximal_sublattices(&self, p: u64) -> Result<Vec<Lattice>> {
        if !is_prime(p) {
            return Err(LatticeError::NotPrime(p));
        }
        let r = self.rank();
        let pb = BigInt::from(p);
        let mut out = Vec::new();
        for lead in 0..r {
            // functionals f with f_j = 0 for j < lead, f_lead = 1, f_j free for j > lead
            let free = r - lead - 1;
            let total = p.pow(free as u32);
            for code in 0..total {
                let mut f = vec![0u64; r];
                f[lead] = 1;
                let mut c = code;
                for j in lead + 1..r {
                    f[j] = c % p;
                    c /= p;
                }
                let mut gens: Vec<IVec> = Vec::with_capacity(r);
                gens.push(vscale(&pb, &self.rows[lead]));
                for i in 0..r {
                    if i == lead {
                        continue;
                    }
                    let fi = BigInt::from(f[i]);
                    gens.push(vsub(&self.rows[i], &vscale(&fi, &self.rows[lead])));
                }
                out.push(Self::from_gens(self.dim, gens));
            }
        }
        out.sort();
        Ok(out)
    }

    /// `Ok(q·self ⊆ m)` for a sublattice `m` of prime index.
    pub fn check_lemma_max_sublattice(&self, m: &Lattice, q: u64) -> Result<bool> {
        if !is_prime(q) {
            return Err(LatticeError::NotPrime(q));
        }
        let idx = self.index_of(m)?;
        let prime = idx.to_u64().map(is_prime).unwrap_or(false);
        if !prime {
            return Err(LatticeError::NotMaximal(idx));
        }
        Ok(m.contains_lattice(&self.scale(&BigInt::from(q))?))
    }

    /// Finite quotient `self / m` for a full-rank sublattice `m`.
    pub fn quotient(&self, m: &Lattice) -> Result<FiniteQuotient> {
        FiniteQuotient::new(self.clone(), m.clone())
    }

    /// Coset representatives of `self / sub` (finite index required).
    pub fn coset_reps(&self, sub: &Lattice) -> Result<Vec<IVec>> {
        if sub.rank() != self.rank() {
            return Err(LatticeError::InfiniteIndex);
        }
        let sb = self.stacked_basis(sub)?;
        let mut out = vec![zero_vec(self.dim)];
        for (a, d) in sb.basis.iter().zip(&sb.divisors) {
            if d.is_one() {
                continue;
            }
            let k = d.to_u64().ok_or_else(|| LatticeError::QuotientTooLarge(d.clone()))?;
            let mut next = Vec::with_capacity(out.len() * k as usize);
            for base in &out {
                for c in 0..k {
                    let mut v = base.clone();
                    axpy(&mut v, &BigInt::from(c), a);
                    next.push(v);
                }
            }
            out = next;
        }
        let mut reps: Vec<IVec> = out.iter().map(|v| sub.reduce(v)).collect();
        reps.sort();
        Ok(reps)
    }

    /// Checks the odd-index coset lemma on a concrete instance and returns `L ⊆ L'`.
    pub fn check_key_lemma(&self, l: &CosetUnion, l_prime: &CosetUnion, h: &Lattice) -> Result<bool> {
        use KeyLemmaViolation as V;
        let idx = self.index_of(h)?;
        if idx == BigInt::from(2) {
            return Err(LatticeError::KeyLemma(V::IndexTwo));
        }
        if !idx.to_u64().map(is_prime).unwrap_or(false) {
            return Err(LatticeError::KeyLemma(V::IndexNotPrime(idx)));
        }
        let double = self.scale_i(2);
        let whole = CosetUnion::lattice(self.clone());
        for u in [l, l_prime] {
            let ok = u.base().dim() == self.dim
                && (u.is_empty() || u.stabilizer().contains_lattice(&double))
                && u.subset_of(&whole)?;
            if !ok {
                return Err(LatticeError::KeyLemma(V::NotUnionOfDoubleCosets));
            }
        }
        let zero = zero_vec(self.dim);
        if !l.contains(&zero) {
            return Err(LatticeError::KeyLemma(V::ZeroNotInL));
        }
        if !l_prime.contains(&zero) {
            return Err(LatticeError::KeyLemma(V::ZeroNotInLPrime));
        }
        let hl = l.intersect(&CosetUnion::lattice(h.clone()))?;
        if !hl.subset_of(l_prime)? {
            return Err(LatticeError::KeyLemma(V::HypothesisFails));
        }
        l.subset_of(l_prime)
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "[{}]", r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))?;
        }
        write!(f, "]")
    }
}

/// Binary lattice operations exposed through [`Lattice::combine`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CombineMode {
    Sum,
    Intersection,
    Scale(BigInt),
}

/// A basis of a lattice together with elementary divisors of a sublattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StackedBasis {
    /// Basis a_1..a_r of the ambient lattice.
    pub basis: Vec<IVec>,
    /// d_1 | d_2 | ... with d_i a_i spanning the sublattice.
    pub divisors: Vec<BigInt>,
    /// Change of coordinates: HNF coefficients times this matrix gives
    /// coefficients in `basis`.
    pub transform: Vec<IVec>,
}

/// Smith normal form of `c` (rows = sublattice generators in ambient coordinates)
/// with column operations mirrored onto the ambient basis.
fn smith(mut c: Vec<IVec>, mut basis: Vec<IVec>, sub_rank: usize) -> StackedBasis {
    let nr = c.len();
    let nc = basis.len();
    let mut v: Vec<IVec> = (0..nc)
        .map(|i| (0..nc).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect();

    fn col_swap(c: &mut [IVec], basis: &mut [IVec], v: &mut [IVec], a: usize, b: usize) {
        if a == b {
            return;
        }
        for row in c.iter_mut() {
            row.swap(a, b);
        }
        for row in v.iter_mut() {
            row.swap(a, b);
        }
        basis.swap(a, b);
    }
    // col_j -= q col_t ; basis_t += q basis_j
    fn col_sub(c: &mut [IVec], basis: &mut [IVec], v: &mut [IVec], j: usize, t: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for row in c.iter_mut() {
            let d = q * &row[t];
            row[j] -= d;
        }
        for row in v.iter_mut() {
            let d = q * &row[t];
            row[j] -= d;
        }
        let bj = basis[j].clone();
        axpy(&mut basis[t], q, &bj);
    }

    let mut t = 0;
    while t < nr.min(nc) {
        let best = (t..nr)
            .flat_map(|i| (t..nc).map(move |j| (i, j)))
            .filter(|&(i, j)| !c[i][j].is_zero())
            .min_by(|&(a, b), &(x, y)| c[a][b].abs().cmp(&c[x][y].abs()));
        let Some((i0, j0)) = best else { break };
        c.swap(t, i0);
        col_swap(&mut c, &mut basis, &mut v, t, j0);
        loop {
            let mut dirty = false;
            for i in t + 1..nr {
                if c[i][t].is_zero() {
                    continue;
                }
                let q = c[i][t].div_floor(&c[t][t]);
                let rt = c[t].clone();
                axpy(&mut c[i], &-q, &rt);
                if !c[i][t].is_zero() {
                    dirty = true;
                }
            }
            for j in t + 1..nc {
                if c[t][j].is_zero() {
                    continue;
                }
                let q = c[t][j].div_floor(&c[t][t]);
                col_sub(&mut c, &mut basis, &mut v, j, t, &q);
                if !c[t][j].is_zero() {
                    dirty = true;
                }
            }
            if dirty {
                let best = (t..nr)
                    .map(|i| (i, t))
                    .chain((t..nc).map(|j| (t, j)))
                    .filter(|&(i, j)| !c[i][j].is_zero())
                    .min_by(|&(a, b), &(x, y)| c[a][b].abs().cmp(&c[x][y].abs()))
                    .expect("pivot row or column is nonzero");
                c.swap(t, best.0);
                col_swap(&mut c, &mut basis, &mut v, t, best.1);
                continue;
            }
            let bad = (t + 1..nr).find(|&i| (t + 1..nc).any(|j| !c[i][j].is_multiple_of(&c[t][t])));
            match bad {
                Some(i) => {
                    let ri = c[i].clone();
                    axpy(&mut c[t], &BigInt::one(), &ri);
                }
                None => break,
            }
        }
        if c[t][t].is_negative() {
            for x in c[t].iter_mut() {
                *x = -&*x;
            }
        }
        t += 1;
    }
    let divisors = (0..sub_rank).map(|i| c[i][i].clone()).collect();
    StackedBasis { basis, divisors, transform: v }
}

/// A finite union of cosets `reps + base`.
///
/// Construction always reduces representatives modulo `base`; use
/// [`CosetUnion::normalized`] to obtain the canonical presentation in which
/// `base` is the full stabilizer, so that structural equality is set equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CosetUnion {
    base: Lattice,
    reps: Vec<IVec>,
}

impl CosetUnion {
    pub fn new(reps: &[IVec], base: Lattice) -> Result<Self> {
        if let Some(r) = reps.iter().find(|r| r.len() != base.dim()) {
            return Err(LatticeError::DimensionMismatch(base.dim(), r.len()));
        }
        Ok(Self::from_parts(base, reps.iter().cloned()))
    }

    fn from_parts(base: Lattice, reps: impl IntoIterator<Item = IVec>) -> Self {
        let set: BTreeSet<IVec> = reps.into_iter().map(|r| base.reduce(&r)).collect();
        CosetUnion { base, reps: set.into_iter().collect() }
    }

    /// The lattice itself as a one-coset union.
    pub fn lattice(base: Lattice) -> Self {
        let z = zero_vec(base.dim());
        CosetUnion { base, reps: vec![z] }
    }

    pub fn coset(v: &[BigInt], base: Lattice) -> Self {
        Self::from_parts(base, [v.to_vec()])
    }

    pub fn empty(dim: usize) -> Self {
        CosetUnion { base: Lattice::standard(dim), reps: Vec::new() }
    }

    pub fn base(&self) -> &Lattice {
        &self.base
    }

    pub fn reps(&self) -> &[IVec] {
        &self.reps
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn contains(&self, v: &[BigInt]) -> bool {
        let r = self.base.reduce(v);
        self.reps.binary_search(&r).is_ok()
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(&zero_vec(self.dim()))
    }

    fn check_dim(&self, other: &CosetUnion) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(LatticeError::DimensionMismatch(self.dim(), other.dim()))
        }
    }

    /// Same set, presented over a finite-index sublattice of the base.
    pub fn rebase(&self, sub: &Lattice) -> Result<CosetUnion> {
        if sub == &self.base {
            return Ok(self.clone());
        }
        let offsets = self.base.coset_reps(sub)?;
        let reps = self.reps.iter().flat_map(|r| offsets.iter().map(move |o| vadd(r, o)));
        Ok(Self::from_parts(sub.clone(), reps))
    }

    pub fn minkowski(&self, other: &CosetUnion) -> Result<CosetUnion> {
        self.check_dim(other)?;
        let base = self.base.sum(&other.base)?;
        let reps = self.reps.iter().flat_map(|a| other.reps.iter().map(move |b| vadd(a, b)));
        Ok(Self::from_parts(base, reps))
    }

    pub fn negate(&self) -> CosetUnion {
        Self::from_parts(self.base.clone(), self.reps.iter().map(|r| vneg(r)))
    }

    pub fn scale(&self, c: &BigInt) -> Result<CosetUnion> {
        let base = self.base.scale(c)?;
        Ok(Self::from_parts(base, self.reps.iter().map(|r| vscale(c, r))))
    }

    pub fn scale_i(&self, c: i64) -> CosetUnion {
        self.scale(&BigInt::from(c)).expect("nonzero scale")
    }

    pub fn translate(&self, v: &[BigInt]) -> CosetUnion {
        Self::from_parts(self.base.clone(), self.reps.iter().map(|r| vadd(r, v)))
    }

    pub fn subset_of(&self, other: &CosetUnion) -> Result<bool> {
        self.check_dim(other)?;
        if self.is_empty() {
            return Ok(true);
        }
        let k = self.base.intersection(&other.base)?;
        if k.rank() < self.base.rank() {
            return Ok(false);
        }
        let a = self.rebase(&k)?;
        Ok(a.reps.iter().all(|r| other.contains(r)))
    }

    pub fn set_eq(&self, other: &CosetUnion) -> Result<bool> {
        Ok(self.subset_of(other)? && other.subset_of(self)?)
    }

    pub fn intersect(&self, other: &CosetUnion) -> Result<CosetUnion> {
        self.check_dim(other)?;
        let n = self.dim();
        let k = self.base.intersection(&other.base)?;
        let r1 = self.base.rank();
        let gens: Vec<IVec> =
            self.base.rows.iter().cloned().chain(other.base.rows.iter().map(|r| vneg(r))).collect();
        let solver = SpanSolver::new(&gens, n);
        let mut reps = Vec::new();
        for x in &self.reps {
            for y in &other.reps {
                // x + uA = y + wB  <=>  uA - wB = y - x
                if let Some(coef) = solver.solve(&vsub(y, x)) {
                    let mut z = x.clone();
                    for (c, row) in coef[..r1].iter().zip(&self.base.rows) {
                        axpy(&mut z, c, row);
                    }
                    reps.push(z);
                }
            }
        }
        if reps.is_empty() {
            return Ok(CosetUnion::empty(n));
        }
        Ok(Self::from_parts(k, reps))
    }

    /// Points of `self` outside `other`; needs finite index of the common base in `self.base`.
    pub fn difference(&self, other: &CosetUnion) -> Result<CosetUnion> {
        self.check_dim(other)?;
        if self.is_empty() {
            return Ok(self.clone());
        }
        let k = self.base.intersection(&other.base)?;
        let a = self.rebase(&k)?;
        let reps: Vec<IVec> = a.reps.into_iter().filter(|r| !other.contains(r)).collect();
        if reps.is_empty() {
            return Ok(CosetUnion::empty(self.dim()));
        }
        Ok(Self::from_parts(k, reps))
    }

    /// Union; bases are refined to their intersection.
    pub fn union(&self, other: &CosetUnion) -> Result<CosetUnion> {
        self.check_dim(other)?;
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        let k = self.base.intersection(&other.base)?;
        let a = self.rebase(&k)?;
        let b = other.rebase(&k)?;
        Ok(Self::from_parts(k, a.reps.into_iter().chain(b.reps)))
    }

    pub fn is_group(&self) -> Result<bool> {
        Ok(self.contains_zero() && self.minkowski(self)?.subset_of(self)? && self.negate().set_eq(self)?)
    }

    /// The subgroup generated by the set.
    pub fn generated(&self) -> Lattice {
        self.base.extend(&self.reps)
    }

    /// `{g : self + g = self}`.
    pub fn stabilizer(&self) -> Lattice {
        if self.is_empty() {
            return Lattice::standard(self.dim());
        }
        let r0 = &self.reps[0];
        let mut extra = Vec::new();
        for r in &self.reps[1..] {
            let t = vsub(r, r0);
            if self.translate(&t).reps == self.reps {
                extra.push(t);
            }
        }
        self.base.extend(&extra)
    }

    /// Canonical presentation: base is the full stabilizer, reps reduced and sorted.
    pub fn normalized(&self) -> CosetUnion {
        if self.is_empty() {
            return CosetUnion::empty(self.dim());
        }
        let stab = self.stabilizer();
        Self::from_parts(stab, self.reps.iter().cloned())
    }

    pub fn cu_algebra(&self, other: &CosetUnion, mode: CuMode) -> Result<CuValue> {
        Ok(match mode {
            CuMode::MinkowskiSum => CuValue::Set(self.minkowski(other)?),
            CuMode::Negate => CuValue::Set(self.negate()),
            CuMode::SubsetOf => CuValue::Bool(self.subset_of(other)?),
            CuMode::Intersect => CuValue::Set(self.intersect(other)?),
            CuMode::IsGroup => CuValue::Bool(self.is_group()?),
        })
    }
}

impl fmt::Display for CosetUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let reps: Vec<String> = self
            .reps
            .iter()
            .map(|r| format!("({})", r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        write!(f, "{{{}}}+{}", reps.join(","), self.base)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CuMode {
    MinkowskiSum,
    Negate,
    SubsetOf,
    Intersect,
    IsGroup,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CuValue {
    Set(CosetUnion),
    Bool(bool),
}

/// The finite abelian group `ambient / modulus`, with elements indexed
/// `0..size` in mixed radix over the Smith invariants.
#[derive(Clone, Debug)]
pub struct FiniteQuotient {
    ambient: Lattice,
    modulus: Lattice,
    basis: Vec<IVec>,
    transform: Vec<IVec>,
    /// Positions in the adapted basis with divisor > 1, and those divisors.
    slots: Vec<(usize, u64)>,
    size: usize,
}

/// Largest quotient this crate is willing to tabulate.
pub const MAX_QUOTIENT: u64 = 1 << 24;

impl FiniteQuotient {
    pub fn new(ambient: Lattice, modulus: Lattice) -> Result<Self> {
        if modulus.rank() != ambient.rank() {
            return Err(LatticeError::InfiniteIndex);
        }
        let sb = ambient.stacked_basis(&modulus)?;
        let mut slots = Vec::new();
        let mut size: u64 = 1;
        for (i, d) in sb.divisors.iter().enumerate() {
            if d.is_one() {
                continue;
            }
            let k = d.to_u64().filter(|&k| k <= MAX_QUOTIENT).ok_or_else(|| LatticeError::QuotientTooLarge(d.clone()))?;
            size = size.saturating_mul(k);
            if size > MAX_QUOTIENT {
                return Err(LatticeError::QuotientTooLarge(BigInt::from(size)));
            }
            slots.push((i, k));
        }
        Ok(FiniteQuotient {
            ambient,
            modulus,
            basis: sb.basis,
            transform: sb.transform,
            slots,
            size: size as usize,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn ambient(&self) -> &Lattice {
        &self.ambient
    }

    pub fn modulus(&self) -> &Lattice {
        &self.modulus
    }

    /// Invariant factors greater than one.
    pub fn invariants(&self) -> Vec<u64> {
        self.slots.iter().map(|&(_, k)| k).collect()
    }

    fn digits_of(&self, v: &[BigInt]) -> Option<Vec<u64>> {
        let c = self.ambient.coordinates(v)?;
        let digits = self
            .slots
            .iter()
            .map(|&(i, k)| {
                let x: BigInt = c.iter().zip(&self.transform).map(|(ci, row)| ci * &row[i]).sum();
                x.mod_floor(&BigInt::from(k)).to_u64().expect("residue fits")
            })
            .collect();
        Some(digits)
    }

    pub fn digits(&self, idx: usize) -> Vec<u64> {
        let mut x = idx as u64;
        self.slots
            .iter()
            .map(|&(_, k)| {
                let d = x % k;
                x /= k;
                d
            })
            .collect()
    }

    pub fn from_digits(&self, d: &[u64]) -> usize {
        let mut idx = 0u64;
        let mut mul = 1u64;
        for (&(_, k), &x) in self.slots.iter().zip(d) {
            idx += (x % k) * mul;
            mul *= k;
        }
        idx as usize
    }

    /// Index of the class of `v`, or `None` if `v` is not in the ambient lattice.
    pub fn index_of(&self, v: &[BigInt]) -> Option<usize> {
        self.digits_of(v).map(|d| self.from_digits(&d))
    }

    /// Canonical representative (residue modulo the modulus) of an element.
    pub fn element(&self, idx: usize) -> IVec {
        let d = self.digits(idx);
        let mut v = zero_vec(self.ambient.dim());
        for (&(i, _), x) in self.slots.iter().zip(d) {
            axpy(&mut v, &BigInt::from(x), &self.basis[i]);
        }
        self.modulus.reduce(&v)
    }

    pub fn elements(&self) -> Vec<IVec> {
        (0..self.size).map(|i| self.element(i)).collect()
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        let (da, db) = (self.digits(a), self.digits(b));
        let s: Vec<u64> = da.iter().zip(&db).map(|(x, y)| x + y).collect();
        self.from_digits(&s)
    }

    pub fn neg(&self, a: usize) -> usize {
        let d: Vec<u64> = self.digits(a).iter().zip(&self.slots).map(|(&x, &(_, k))| (k - x) % k).collect();
        self.from_digits(&d)
    }

    pub fn mul(&self, c: i64, a: usize) -> usize {
        let d: Vec<u64> = self
            .digits(a)
            .iter()
            .zip(&self.slots)
            .map(|(&x, &(_, k))| ((c.rem_euclid(k as i64) as u64) * x) % k)
            .collect();
        self.from_digits(&d)
    }

    /// Elements of the image of a lattice lying between modulus and ambient.
    pub fn image_of_lattice(&self, l: &Lattice) -> Vec<usize> {
        let mut seen = vec![false; self.size];
        let gens: Vec<usize> = l.rows().iter().filter_map(|r| self.index_of(r)).collect();
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut out = vec![0usize];
        while let Some(x) = stack.pop() {
            for &g in &gens {
                let y = self.add(x, g);
                if !seen[y] {
                    seen[y] = true;
                    out.push(y);
                    stack.push(y);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Membership mask of a coset union whose stabilizer contains the modulus.
    pub fn mask_of(&self, cu: &CosetUnion) -> Vec<bool> {
        (0..self.size).map(|i| cu.contains(&self.element(i))).collect()
    }
}

/// JSON form of an integer: a number when it fits in i64, a string otherwise.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonInt {
    Small(i64),
    Big(String),
}

impl From<&BigInt> for JsonInt {
    fn from(x: &BigInt) -> Self {
        match x.to_i64() {
            Some(v) => JsonInt::Small(v),
            None => JsonInt::Big(x.to_string()),
        }
    }
}

impl JsonInt {
    pub fn to_bigint(&self) -> std::result::Result<BigInt, String> {
        match self {
            JsonInt::Small(v) => Ok(BigInt::from(*v)),
            JsonInt::Big(s) => s.parse().map_err(|_| format!("not an integer: {s}")),
        }
    }
}

pub fn vec_to_json(v: &[BigInt]) -> Vec<JsonInt> {
    v.iter().map(JsonInt::from).collect()
}

pub fn vec_from_json(v: &[JsonInt]) -> std::result::Result<IVec, String> {
    v.iter().map(JsonInt::to_bigint).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeJson {
    pub dim: usize,
    pub hnf: Vec<Vec<JsonInt>>,
}

impl From<&Lattice> for LatticeJson {
    fn from(l: &Lattice) -> Self {
        LatticeJson { dim: l.dim, hnf: l.rows.iter().map(|r| vec_to_json(r)).collect() }
    }
}

impl LatticeJson {
    pub fn to_lattice(&self) -> std::result::Result<Lattice, String> {
        let rows: Vec<IVec> = self.hnf.iter().map(|r| vec_from_json(r)).collect::<std::result::Result<_, _>>()?;
        if let Some(r) = rows.iter().find(|r| r.len() != self.dim) {
            return Err(format!("row of length {} in a lattice of dimension {}", r.len(), self.dim));
        }
        Ok(Lattice::from_gens(self.dim, rows))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CosetUnionJson {
    pub base: LatticeJson,
    pub reps: Vec<Vec<JsonInt>>,
}

impl From<&CosetUnion> for CosetUnionJson {
    fn from(c: &CosetUnion) -> Self {
        CosetUnionJson { base: (&c.base).into(), reps: c.reps.iter().map(|r| vec_to_json(r)).collect() }
    }
}

impl CosetUnionJson {
    pub fn to_coset_union(&self) -> std::result::Result<CosetUnion, String> {
        let base = self.base.to_lattice()?;
        let reps: Vec<IVec> = self.reps.iter().map(|r| vec_from_json(r)).collect::<std::result::Result<_, _>>()?;
        CosetUnion::new(&reps, base).map_err(|e| e.to_string())
    }
}

impl Serialize for Lattice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LatticeJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lattice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        LatticeJson::deserialize(d)?.to_lattice().map_err(serde::de::Error::custom)
    }
}

impl Serialize for CosetUnion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CosetUnionJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CosetUnion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        CosetUnionJson::deserialize(d)?.to_coset_union().map_err(serde::de::Error::custom)
    }
}
