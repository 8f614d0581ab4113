//! Finite root systems in exact integer realizations.
//!
//! Roots are stored once, in a canonical sorted order, together with lookup
//! tables for reflections and pairings. Products of irreducible systems are
//! supported by concatenating coordinate blocks.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RootSystemError {
    #[error("invalid rank {rank} for family {family:?}")]
    InvalidRank { family: Family, rank: usize },
    #[error("cannot parse root system type {0:?}")]
    Parse(String),
    #[error("rank {0} exceeds the configured catalog bound {1}")]
    RankAboveBound(usize, usize),
    #[error("the non-reduced family BC has no dual")]
    NonReducedDual,
    #[error("pairing of roots {0} and {1} is not an integer")]
    NonIntegralPairing(usize, usize),
    #[error("inconsistent p-function at root {0}")]
    InconsistentP(usize),
    #[error("no root system given")]
    Empty,
}

pub type Result<T> = std::result::Result<T, RootSystemError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
    D,
    E6,
    E7,
    E8,
    F4,
    G2,
    BC,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RootSystemType {
    pub family: Family,
    pub rank: usize,
}

impl RootSystemType {
    pub fn new(family: Family, rank: usize) -> Result<Self> {
        let ok = match family {
            Family::A => rank >= 1,
            Family::B | Family::C | Family::BC => rank >= 2,
            Family::D => rank >= 4,
            Family::E6 => rank == 6,
            Family::E7 => rank == 7,
            Family::E8 => rank == 8,
            Family::F4 => rank == 4,
            Family::G2 => rank == 2,
        };
        if ok {
            Ok(RootSystemType { family, rank })
        } else {
            Err(RootSystemError::InvalidRank { family, rank })
        }
    }

    /// Ratio of long to short squared lengths (4 for the non-reduced family).
    pub fn lacing(&self) -> i64 {
        match self.family {
            Family::A | Family::D | Family::E6 | Family::E7 | Family::E8 => 1,
            Family::B | Family::C | Family::F4 => 2,
            Family::G2 => 3,
            Family::BC => 4,
        }
    }

    pub fn is_reduced(&self) -> bool {
        self.family != Family::BC
    }

    pub fn is_simply_laced(&self) -> bool {
        self.lacing() == 1
    }

    pub fn dual(&self) -> Result<Self> {
        let family = match self.family {
            Family::B => Family::C,
            Family::C => Family::B,
            Family::BC => return Err(RootSystemError::NonReducedDual),
            f => f,
        };
        Ok(RootSystemType { family, rank: self.rank })
    }
}

impl fmt::Display for RootSystemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::E6 | Family::E7 | Family::E8 | Family::F4 | Family::G2 => write!(f, "{:?}", self.family),
            fam => write!(f, "{:?}{}", fam, self.rank),
        }
    }
}

impl FromStr for RootSystemType {
    type Err = RootSystemError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        let err = || RootSystemError::Parse(s.to_string());
        let fixed = [("E6", Family::E6), ("E7", Family::E7), ("E8", Family::E8), ("F4", Family::F4), ("G2", Family::G2)];
        if let Some(&(_, fam)) = fixed.iter().find(|(n, _)| *n == t) {
            return RootSystemType::new(fam, t[1..].parse().map_err(|_| err())?);
        }
        let (fam, digits) = if let Some(d) = t.strip_prefix("BC") {
            (Family::BC, d)
        } else {
            let fam = match t.chars().next() {
                Some('A') => Family::A,
                Some('B') => Family::B,
                Some('C') => Family::C,
                Some('D') => Family::D,
                _ => return Err(err()),
            };
            (fam, &t[1..])
        };
        let rank = digits.parse().map_err(|_| err())?;
        RootSystemType::new(fam, rank)
    }
}

/// Parses a product such as `"B2xA1"`.
pub fn parse_product(s: &str) -> Result<Vec<RootSystemType>> {
    let parts: Vec<RootSystemType> =
        s.split(['x', 'X', '*', '+']).filter(|p| !p.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if parts.is_empty() {
        return Err(RootSystemError::Empty);
    }
    Ok(parts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthClass {
    Short,
    Long,
    Divisible,
}

impl LengthClass {
    pub fn symbol(&self) -> &'static str {
        match self {
            LengthClass::Short => "s",
            LengthClass::Long => "ℓ",
            LengthClass::Divisible => "d",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteRoot {
    pub coords: Vec<i64>,
    pub norm_sq: i64,
    pub class: LengthClass,
    pub component: usize,
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(n: usize, i: usize, c: i64) -> Vec<i64> {
    let mut v = vec![0; n];
    v[i] = c;
    v
}

fn signed_pairs(n: usize, scale: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for (a, b) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let mut v = vec![0; n];
                v[i] = a * scale;
                v[j] = b * scale;
                out.push(v);
            }
        }
    }
    out
}

fn signed_units(n: usize, scale: i64) -> Vec<Vec<i64>> {
    (0..n).flat_map(|i| [unit(n, i, scale), unit(n, i, -scale)]).collect()
}

fn e8_roots() -> Vec<Vec<i64>> {
    let mut out = signed_pairs(8, 2);
    for mask in 0u32..256 {
        if mask.count_ones() % 2 == 0 {
            out.push((0..8).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect());
        }
    }
    out
}

/// Coordinates of an irreducible system in its standard integer realization.
fn realize(t: RootSystemType) -> Vec<Vec<i64>> {
    let n = t.rank;
    match t.family {
        Family::A => {
            let mut out = Vec::new();
            for i in 0..=n {
                for j in 0..=n {
                    if i != j {
                        let mut v = vec![0; n + 1];
                        v[i] = 1;
                        v[j] = -1;
                        out.push(v);
                    }
                }
            }
            out
        }
        Family::B => [signed_units(n, 1), signed_pairs(n, 1)].concat(),
        Family::C => [signed_units(n, 2), signed_pairs(n, 1)].concat(),
        Family::D => signed_pairs(n, 1),
        Family::BC => [signed_units(n, 1), signed_units(n, 2), signed_pairs(n, 1)].concat(),
        Family::E8 => e8_roots(),
        Family::E7 => {
            let theta = vec![1; 8];
            e8_roots().into_iter().filter(|r| dot(r, &theta) == 0).collect()
        }
        Family::E6 => {
            let t1 = vec![1; 8];
            let t2 = {
                let mut v = vec![0; 8];
                v[0] = -2;
                v[1] = -2;
                v
            };
            e8_roots().into_iter().filter(|r| dot(r, &t1) == 0 && dot(r, &t2) == 0).collect()
        }
        Family::F4 => {
            let mut out = [signed_pairs(4, 2), signed_units(4, 2)].concat();
            for mask in 0u32..16 {
                out.push((0..4).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect());
            }
            out
        }
        Family::G2 => {
            let mut out = realize(RootSystemType { family: Family::A, rank: 2 });
            for i in 0..3 {
                let v: Vec<i64> = (0..3).map(|j| if i == j { 2 } else { -1 }).collect();
                out.push(v.iter().map(|x| -x).collect());
                out.push(v);
            }
            out
        }
    }
}

fn ambient_dim(t: RootSystemType) -> usize {
    match t.family {
        Family::A => t.rank + 1,
        Family::G2 => 3,
        Family::E6 | Family::E7 | Family::E8 => 8,
        _ => t.rank,
    }
}

/// Classical root counts, used as a construction-time sanity check.
pub fn classical_count(t: RootSystemType) -> usize {
    let n = t.rank;
    match t.family {
        Family::A => n * (n + 1),
        Family::B | Family::C => 2 * n * n,
        Family::D => 2 * n * (n - 1),
        Family::BC => 2 * n * n + 2 * n,
        Family::E6 => 72,
        Family::E7 => 126,
        Family::E8 => 240,
        Family::F4 => 48,
        Family::G2 => 12,
    }
}

/// A finite (possibly reducible) root system with precomputed tables.
#[derive(Clone, Debug)]
pub struct FiniteRootSystem {
    components: Vec<RootSystemType>,
    dim: usize,
    roots: Vec<FiniteRoot>,
    index: HashMap<Vec<i64>, usize>,
    reflect: Vec<u32>,
    pairing: Vec<i32>,
    neg: Vec<usize>,
    positive: Vec<bool>,
    simple: Vec<usize>,
}

impl FiniteRootSystem {
    pub fn build(t: RootSystemType) -> Self {
        Self::product(&[t]).expect("nonempty product")
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::product(&parse_product(s)?)
    }

    pub fn product(components: &[RootSystemType]) -> Result<Self> {
        if components.is_empty() {
            return Err(RootSystemError::Empty);
        }
        let dims: Vec<usize> = components.iter().map(|&t| ambient_dim(t)).collect();
        let dim: usize = dims.iter().sum();
        let mut roots = Vec::new();
        let mut offset = 0;
        for (c, &t) in components.iter().enumerate() {
            let raw = realize(t);
            debug_assert_eq!(raw.len(), classical_count(t));
            let min = raw.iter().map(|r| dot(r, r)).min().expect("roots exist");
            let mut local: Vec<FiniteRoot> = raw
                .into_iter()
                .map(|r| {
                    let norm_sq = dot(&r, &r);
                    let class = if t.family == Family::BC && norm_sq == 4 * min {
                        LengthClass::Divisible
                    } else if norm_sq > min {
                        LengthClass::Long
                    } else {
                        LengthClass::Short
                    };
                    let mut coords = vec![0; dim];
                    coords[offset..offset + dims[c]].copy_from_slice(&r);
                    FiniteRoot { coords, norm_sq, class, component: c }
                })
                .collect();
            local.sort_by(|a, b| a.coords.cmp(&b.coords));
            roots.extend(local);
            offset += dims[c];
        }
        let n = roots.len();
        let index: HashMap<Vec<i64>, usize> = roots.iter().enumerate().map(|(i, r)| (r.coords.clone(), i)).collect();
        let mut pairing = vec![0i32; n * n];
        let mut reflect = vec![0u32; n * n];
        for a in 0..n {
            for b in 0..n {
                let num = 2 * dot(&roots[b].coords, &roots[a].coords);
                let den = roots[a].norm_sq;
                if num % den != 0 {
                    return Err(RootSystemError::NonIntegralPairing(b, a));
                }
                let c = num / den;
                pairing[b * n + a] = c as i32;
                let img: Vec<i64> = roots[b].coords.iter().zip(&roots[a].coords).map(|(x, y)| x - c * y).collect();
                reflect[a * n + b] = index[&img] as u32;
            }
        }
        let neg = roots
            .iter()
            .map(|r| index[&r.coords.iter().map(|x| -x).collect::<Vec<_>>()])
            .collect();
        let big = 1 + roots.iter().flat_map(|r| r.coords.iter()).map(|x| x.abs()).max().unwrap_or(0) as i128;
        let weights: Vec<i128> = (0..dim).map(|i| big.pow((dim - 1 - i) as u32)).collect();
        let positive = roots
            .iter()
            .map(|r| r.coords.iter().zip(&weights).map(|(&x, w)| x as i128 * w).sum::<i128>() > 0)
            .collect();
        let mut sys = FiniteRootSystem {
            components: components.to_vec(),
            dim,
            roots,
            index,
            reflect,
            pairing,
            neg,
            positive,
            simple: Vec::new(),
        };
        sys.simple = sys.simple_system(&BitSet::full(n));
        Ok(sys)
    }

    pub fn components(&self) -> &[RootSystemType] {
        &self.components
    }

    /// The single component type, if irreducible.
    pub fn irreducible_type(&self) -> Option<RootSystemType> {
        (self.components.len() == 1).then(|| self.components[0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn roots(&self) -> &[FiniteRoot] {
        &self.roots
    }

    pub fn root(&self, i: usize) -> &FiniteRoot {
        &self.roots[i]
    }

    pub fn index_of(&self, coords: &[i64]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    pub fn class(&self, i: usize) -> LengthClass {
        self.roots[i].class
    }

    pub fn component(&self, i: usize) -> usize {
        self.roots[i].component
    }

    pub fn lacing(&self, component: usize) -> i64 {
        self.components[component].lacing()
    }

    pub fn is_reduced(&self) -> bool {
        self.components.iter().all(RootSystemType::is_reduced)
    }

    /// `s_a(b)`.
    #[inline]
    pub fn reflect(&self, a: usize, b: usize) -> usize {
        self.reflect[a * self.roots.len() + b] as usize
    }

    /// `⟨b, a∨⟩ = 2(b,a)/(a,a)`.
    #[inline]
    pub fn pairing(&self, b: usize, a: usize) -> i64 {
        self.pairing[b * self.roots.len() + a] as i64
    }

    #[inline]
    pub fn neg(&self, i: usize) -> usize {
        self.neg[i]
    }

    pub fn is_positive(&self, i: usize) -> bool {
        self.positive[i]
    }

    /// Simple roots of the whole system.
    pub fn simple_roots(&self) -> &[usize] {
        &self.simple
    }

    pub fn full(&self) -> BitSet {
        BitSet::full(self.len())
    }

    pub fn by_class(&self, class: LengthClass) -> BitSet {
        BitSet::from_indices(self.len(), (0..self.len()).filter(|&i| self.class(i) == class))
    }

    pub fn component_roots(&self, c: usize) -> BitSet {
        BitSet::from_indices(self.len(), (0..self.len()).filter(|&i| self.component(i) == c))
    }

    /// Index of `a + b` if it is a root.
    pub fn sum(&self, a: usize, b: usize) -> Option<usize> {
        let v: Vec<i64> = self.roots[a].coords.iter().zip(&self.roots[b].coords).map(|(x, y)| x + y).collect();
        self.index_of(&v)
    }

    /// Index of `2a` if it is a root.
    pub fn double(&self, a: usize) -> Option<usize> {
        self.sum(a, a)
    }

    /// Index of `a/2` if it is a root.
    pub fn half(&self, a: usize) -> Option<usize> {
        let c = &self.roots[a].coords;
        if c.iter().any(|x| x % 2 != 0) {
            return None;
        }
        self.index_of(&c.iter().map(|x| x / 2).collect::<Vec<_>>())
    }

    pub fn is_subsystem(&self, s: &BitSet) -> bool {
        let elems = s.to_vec();
        elems.iter().all(|&a| elems.iter().all(|&b| s.contains(self.reflect(a, b))))
    }

    /// Smallest subsystem containing `gens`.
    pub fn closure(&self, gens: &BitSet) -> BitSet {
        self.closure_from(&BitSet::new(self.len()), &gens.to_vec())
    }

    /// Closure of `base ∪ extra`, assuming `base` is already a subsystem.
    pub fn closure_from(&self, base: &BitSet, extra: &[usize]) -> BitSet {
        let mut set = base.clone();
        let mut elems = base.to_vec();
        let mut queue: VecDeque<usize> = extra.iter().copied().filter(|&x| !base.contains(x)).collect();
        while let Some(x) = queue.pop_front() {
            if !set.insert(x) {
                continue;
            }
            elems.push(x);
            for k in 0..elems.len() {
                let y = elems[k];
                for z in [self.reflect(x, y), self.reflect(y, x)] {
                    if !set.contains(z) {
                        queue.push_back(z);
                    }
                }
            }
        }
        set
    }

    /// Proper subsystem such that adjoining any further root generates everything.
    pub fn is_maximal(&self, s: &BitSet) -> bool {
        if !self.is_subsystem(s) || s.count() == self.len() {
            return false;
        }
        let full = self.full();
        (0..self.len())
            .filter(|&g| !s.contains(g) && self.is_positive(g))
            .all(|g| self.closure_from(s, &[g]) == full)
    }

    /// Indecomposable positive roots of a subsystem, under the fixed generic functional.
    pub fn simple_system(&self, s: &BitSet) -> Vec<usize> {
        let pos: Vec<usize> = s.iter().filter(|&i| self.is_positive(i)).collect();
        let mut decomposable = HashSet::new();
        for (k, &a) in pos.iter().enumerate() {
            for &b in &pos[k..] {
                if let Some(c) = self.sum(a, b) {
                    if s.contains(c) {
                        decomposable.insert(c);
                    }
                }
            }
        }
        pos.into_iter().filter(|i| !decomposable.contains(i)).collect()
    }

    /// Coefficients of every root in the simple roots of the whole system.
    pub fn simple_coefficients(&self) -> Vec<Vec<i64>> {
        let n = self.len();
        let r = self.simple.len();
        let mut coef: Vec<Option<Vec<i64>>> = vec![None; n];
        let mut queue = VecDeque::new();
        for (k, &s) in self.simple.iter().enumerate() {
            coef[s] = Some(unit(r, k, 1));
            queue.push_back(s);
        }
        while let Some(b) = queue.pop_front() {
            let cb = coef[b].clone().expect("queued roots have coefficients");
            for (k, &s) in self.simple.iter().enumerate() {
                if let Some(c) = self.sum(b, s) {
                    if coef[c].is_none() {
                        let mut v = cb.clone();
                        v[k] += 1;
                        coef[c] = Some(v);
                        queue.push_back(c);
                    }
                }
            }
        }
        for i in 0..n {
            if coef[i].is_none() {
                let p = coef[self.neg(i)].clone().expect("positive roots reached by simple additions");
                coef[i] = Some(p.iter().map(|x| -x).collect());
            }
        }
        coef.into_iter().map(|c| c.expect("all roots covered")).collect()
    }

    /// Image of a subset under `s_a`.
    pub fn reflect_set(&self, a: usize, s: &BitSet) -> BitSet {
        BitSet::from_indices(self.len(), s.iter().map(|b| self.reflect(a, b)))
    }

    /// All images of a subset under the Weyl group.
    pub fn weyl_orbit(&self, s: &BitSet) -> Vec<BitSet> {
        let mut seen: HashSet<BitSet> = HashSet::new();
        let mut queue = VecDeque::from([s.clone()]);
        seen.insert(s.clone());
        while let Some(x) = queue.pop_front() {
            for &a in &self.simple {
                let y = self.reflect_set(a, &x);
                if seen.insert(y.clone()) {
                    queue.push_back(y);
                }
            }
        }
        let mut out: Vec<BitSet> = seen.into_iter().collect();
        out.sort();
        out
    }

    /// Every subsystem, by breadth-first closure of single additions.
    pub fn all_subsystems(&self) -> Vec<BitSet> {
        let empty = BitSet::new(self.len());
        let mut seen: HashSet<BitSet> = HashSet::from([empty.clone()]);
        let mut queue = VecDeque::from([empty]);
        while let Some(s) = queue.pop_front() {
            for g in (0..self.len()).filter(|&g| self.is_positive(g) && !s.contains(g)) {
                let t = self.closure_from(&s, &[g]);
                if seen.insert(t.clone()) {
                    queue.push_back(t);
                }
            }
        }
        let mut out: Vec<BitSet> = seen.into_iter().collect();
        out.sort();
        out
    }

    /// Maximal subsystems by exhaustive enumeration (small systems only).
    pub fn brute_force_maximal(&self) -> Vec<BitSet> {
        let mut out: Vec<BitSet> = self.all_subsystems().into_iter().filter(|s| self.is_maximal(s)).collect();
        out.sort();
        out
    }

    /// Grows a subsystem until it is maximal.
    fn ascend(&self, mut s: BitSet) -> BitSet {
        let full = self.full();
        'outer: loop {
            for g in (0..self.len()).filter(|&g| self.is_positive(g) && !s.contains(g)) {
                let t = self.closure_from(&s, &[g]);
                if t != full {
                    s = t;
                    continue 'outer;
                }
            }
            return s;
        }
    }

    fn component_simple(&self, c: usize) -> Vec<usize> {
        self.simple.iter().copied().filter(|&s| self.component(s) == c).collect()
    }

    /// Highest root of a component among roots of the given class, with its
    /// coefficients on the component's simple roots.
    fn highest(&self, c: usize, class: LengthClass, coef: &[Vec<i64>]) -> (usize, Vec<i64>) {
        let simple = self.component_simple(c);
        let cols: Vec<usize> = simple.iter().map(|s| self.simple.iter().position(|x| x == s).expect("simple")).collect();
        let best = (0..self.len())
            .filter(|&i| self.component(i) == c && self.class(i) == class && self.is_positive(i))
            .max_by_key(|&i| coef[i].iter().sum::<i64>())
            .expect("class nonempty");
        (best, cols.iter().map(|&k| coef[best][k]).collect())
    }

    /// Named subsystems of the non-reduced family: `B^I` and `A_J`.
    pub fn bc_b_i(&self, c: usize) -> BitSet {
        BitSet::from_indices(
            self.len(),
            (0..self.len()).filter(|&i| self.component(i) == c && self.class(i) != LengthClass::Divisible),
        )
    }

    /// `A_J`: all divisible roots, `±ε_j` for j in J, and `±ε_k±ε_l` with k, l on the same side of J.
    pub fn bc_a_j(&self, c: usize, j: &[usize]) -> BitSet {
        let off = self.component_offset(c);
        let inj = |k: usize| j.contains(&(k - off));
        BitSet::from_indices(
            self.len(),
            (0..self.len()).filter(|&i| {
                if self.component(i) != c {
                    return false;
                }
                let support: Vec<usize> =
                    self.roots[i].coords.iter().enumerate().filter(|(_, &x)| x != 0).map(|(k, _)| k).collect();
                match self.class(i) {
                    LengthClass::Divisible => true,
                    LengthClass::Short => inj(support[0]),
                    LengthClass::Long => inj(support[0]) == inj(support[1]),
                }
            }),
        )
    }

    /// `BC_J × BC_{I∖J}`: `A_J` together with `±ε_k` for k outside J.
    ///
    /// For ∅ ≠ J ⊊ I the set `A_J` alone is not maximal: adjoining `±ε_k`
    /// (k ∉ J) stays proper. This product is the maximal subsystem containing it.
    pub fn bc_split(&self, c: usize, j: &[usize]) -> BitSet {
        let mut s = self.bc_a_j(c, j);
        s.union_with(&self.by_class(LengthClass::Short).tap_and(&self.component_roots(c)));
        s
    }

    /// `Ψ_J^B` in type B: short roots plus long roots supported inside J or inside its complement.
    pub fn b_psi_j(&self, c: usize, j: &[usize]) -> BitSet {
        let off = self.component_offset(c);
        let inj = |k: usize| j.contains(&(k - off));
        BitSet::from_indices(
            self.len(),
            (0..self.len()).filter(|&i| {
                if self.component(i) != c {
                    return false;
                }
                let support: Vec<usize> =
                    self.roots[i].coords.iter().enumerate().filter(|(_, &x)| x != 0).map(|(k, _)| k).collect();
                support.len() == 1 || inj(support[0]) == inj(support[1])
            }),
        )
    }

    pub fn component_offset(&self, c: usize) -> usize {
        self.components[..c].iter().map(|&t| ambient_dim(t)).sum()
    }

    fn catalog_seeds(&self, c: usize, coef: &[Vec<i64>]) -> Vec<BitSet> {
        let t = self.components[c];
        let n = self.len();
        let comp = self.component_roots(c);
        let mut seeds = Vec::new();
        if t.family == Family::BC {
            seeds.push(self.bc_b_i(c));
            seeds.push(self.bc_a_j(c, &[]));
            for mask in 1u32..(1 << t.rank) - 1 {
                let j: Vec<usize> = (0..t.rank).filter(|k| mask >> k & 1 == 1).collect();
                seeds.push(self.bc_split(c, &j));
            }
            return seeds;
        }
        let simple = self.component_simple(c);
        // (highest root, use coroot marks): the system's own extended diagram,
        // then the dual's, whose highest root is the coroot of the highest short root
        let mut tops = vec![(if t.is_simply_laced() { LengthClass::Short } else { LengthClass::Long }, false)];
        if !t.is_simply_laced() {
            tops.push((LengthClass::Short, true));
        }
        for (cls, coroot) in tops {
            let (theta, marks) = self.highest(c, cls, coef);
            for (i, &a) in simple.iter().enumerate() {
                let mark = if coroot { marks[i] * self.roots[a].norm_sq / self.roots[theta].norm_sq } else { marks[i] };
                let rest: Vec<usize> = simple.iter().copied().filter(|&x| x != a).collect();
                if mark == 1 {
                    seeds.push(self.closure(&BitSet::from_indices(n, rest.iter().copied())));
                }
                if mark > 1 && crate::lattice::is_prime(mark as u64) {
                    let mut g = rest;
                    g.push(self.neg(theta));
                    seeds.push(self.closure(&BitSet::from_indices(n, g)));
                }
            }
        }
        if !t.is_simply_laced() {
            seeds.push(self.by_class(LengthClass::Short).tap_and(&comp));
            seeds.push(self.by_class(LengthClass::Long).tap_and(&comp));
        }
        seeds.retain(|s| s != &comp);
        seeds
    }

    /// Maximal subsystems from a catalog: extended-diagram deletions for the
    /// system and its dual, length classes and, for the non-reduced family,
    /// `B^I` and `A_J`; each seed is grown to a maximal subsystem and its
    /// Weyl orbit collected.
    pub fn finite_maximal_subsystems(&self) -> Result<Vec<BitSet>> {
        if let Some(t) = self.components.iter().find(|t| t.rank > CATALOG_RANK_BOUND) {
            return Err(RootSystemError::RankAboveBound(t.rank, CATALOG_RANK_BOUND));
        }
        let coef = if self.is_reduced() { self.simple_coefficients() } else { Vec::new() };
        let mut found: HashSet<BitSet> = HashSet::new();
        for c in 0..self.components.len() {
            let mut others = self.full();
            others.difference_with(&self.component_roots(c));
            for seed in self.catalog_seeds(c, &coef) {
                let mut s = seed;
                s.union_with(&others);
                let m = self.ascend(s);
                if found.contains(&m) {
                    continue;
                }
                for o in self.weyl_orbit(&m) {
                    found.insert(o);
                }
            }
        }
        let mut out: Vec<BitSet> = found.into_iter().collect();
        out.sort();
        Ok(out)
    }

    /// Orbits of the reflection group generated by `gens` acting on `domain`.
    pub fn orbits_under(&self, gens: &[usize], domain: &BitSet) -> Vec<Vec<usize>> {
        let mut seen = BitSet::new(self.len());
        let mut out = Vec::new();
        for start in domain.iter() {
            if seen.contains(start) {
                continue;
            }
            let mut orbit = vec![start];
            seen.insert(start);
            let mut k = 0;
            while k < orbit.len() {
                let x = orbit[k];
                for &g in gens {
                    let y = self.reflect(g, x);
                    if seen.insert(y) {
                        orbit.push(y);
                    }
                }
                k += 1;
            }
            orbit.sort_unstable();
            out.push(orbit);
        }
        out
    }

    /// The dual system (coroots, rescaled into the standard realization of the
    /// dual type) and the index map `α ↦ α∨`.
    pub fn dual(&self) -> Result<(FiniteRootSystem, Vec<usize>)> {
        let types: Vec<RootSystemType> = self.components.iter().map(|t| t.dual()).collect::<Result<_>>()?;
        let d = FiniteRootSystem::product(&types)?;
        let r = self.simple.len();
        // Cartan entries of the coroot system are the transposed pairings.
        let want = |i: usize, j: usize| self.pairing(self.simple[j], self.simple[i]);
        let mut assign = vec![usize::MAX; r];
        let mut used = vec![false; r];
        fn search(
            k: usize,
            r: usize,
            assign: &mut Vec<usize>,
            used: &mut Vec<bool>,
            ok: &dyn Fn(usize, usize, usize, usize) -> bool,
        ) -> bool {
            if k == r {
                return true;
            }
            for cand in 0..r {
                if used[cand] || !(0..k).all(|j| ok(k, j, cand, assign[j]) && ok(j, k, assign[j], cand)) || !ok(k, k, cand, cand)
                {
                    continue;
                }
                used[cand] = true;
                assign[k] = cand;
                if search(k + 1, r, assign, used, ok) {
                    return true;
                }
                used[cand] = false;
            }
            false
        }
        let ok = |i: usize, j: usize, ci: usize, cj: usize| {
            d.pairing(d.simple[ci], d.simple[cj]) == want(i, j) && d.component(d.simple[ci]) == self.component(self.simple[i])
        };
        if !search(0, r, &mut assign, &mut used, &ok) {
            return Err(RootSystemError::NonReducedDual);
        }
        let coef = self.simple_coefficients();
        let map = (0..self.len())
            .map(|b| {
                let nb = self.roots[b].norm_sq;
                let mut v = vec![0i64; d.dim];
                for (i, &c) in coef[b].iter().enumerate() {
                    let ni = self.roots[self.simple[i]].norm_sq;
                    let cv = c * ni / nb;
                    let img = &d.roots[d.simple[assign[i]]].coords;
                    for (x, y) in v.iter_mut().zip(img) {
                        *x += cv * y;
                    }
                }
                d.index_of(&v).expect("coroot lands on a root of the dual")
            })
            .collect();
        Ok((d, map))
    }
}

/// Largest rank for which the maximal-subsystem catalog is offered.
pub const CATALOG_RANK_BOUND: usize = 8;

trait TapAnd {
    fn tap_and(self, other: &BitSet) -> BitSet;
}

impl TapAnd for BitSet {
    fn tap_and(mut self, other: &BitSet) -> BitSet {
        self.intersect_with(other);
        self
    }
}

/// A p-function: values on every root of a domain, built from simple-root data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PFunction {
    pub values: HashMap<usize, crate::lattice::IVec>,
}

/// Extends values on simple roots to the whole domain by the reflection rule
/// `p_{s_α β} = p_β − ⟨β, α∨⟩ p_α`, checking that every path agrees.
/// Roots not reachable by reflections (divisible roots) get the linear value `2 p_{α}`.
pub fn extend_p(
    sys: &FiniteRootSystem,
    simple: &[usize],
    values: &[crate::lattice::IVec],
    domain: &BitSet,
) -> Result<PFunction> {
    use crate::lattice::{vscale, vsub};
    use num_bigint::BigInt;
    let mut p: HashMap<usize, crate::lattice::IVec> = HashMap::new();
    let mut queue = VecDeque::new();
    for (&s, v) in simple.iter().zip(values) {
        p.insert(s, v.clone());
        queue.push_back(s);
    }
    while let Some(b) = queue.pop_front() {
        for (&a, pa) in simple.iter().zip(values) {
            let t = sys.reflect(a, b);
            let val = vsub(&p[&b], &vscale(&BigInt::from(sys.pairing(b, a)), pa));
            match p.get(&t) {
                Some(old) if old != &val => return Err(RootSystemError::InconsistentP(t)),
                Some(_) => {}
                None => {
                    p.insert(t, val);
                    queue.push_back(t);
                }
            }
        }
    }
    for i in domain.iter() {
        if p.contains_key(&i) {
            continue;
        }
        let h = sys.half(i).ok_or(RootSystemError::InconsistentP(i))?;
        let v = p.get(&h).ok_or(RootSystemError::InconsistentP(i))?;
        p.insert(i, vscale(&BigInt::from(2), v));
    }
    p.retain(|k, _| domain.contains(*k));
    Ok(PFunction { values: p })
}
