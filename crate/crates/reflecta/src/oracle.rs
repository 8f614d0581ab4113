//! Brute-force ground truth in a finite quotient.
//!
//! An affine reflection system is reduced modulo a full-rank lattice `M`
//! contained in `2m` times every base lattice in play. Real roots become pairs
//! `(α, g)` with `g ∈ ⟨Λ⟩/M`, reflections act by
//! `s_{(α,g)}(β,h) = (s_α β, h − ⟨β,α∨⟩g)`, and every `M`-periodic subsystem is
//! a finite reflection-closed set. Verdicts are exact statements about those
//! periodic subsystems.

use std::collections::HashSet;

use thiserror::Error;

use crate::ars::{AffineReflectionSystem, AffineRoot, ArsError, SubsystemSpec};
use crate::bitset::BitSet;
use crate::lattice::{CosetUnion, FiniteQuotient, Lattice, LatticeError};
use crate::rootsys::{LengthClass, RootSystemError};

pub const DEFAULT_BUDGET: usize = 4096;
pub const BUDGET_ENV: &str = "REFLECTA_ORACLE_BUDGET";
/// Upper bound on offset tuples visited for a single shape during enumeration.
const CANDIDATE_CAP: usize = 4_000_000;

/// Largest quotient order the oracle will build, from `REFLECTA_ORACLE_BUDGET` if set.
pub fn budget() -> usize {
    std::env::var(BUDGET_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("quotient of order {size} exceeds the oracle budget {budget}")]
    BudgetExceeded { size: String, budget: usize },
    #[error("translation set of root {0} is not periodic modulo the model lattice")]
    NotPeriodic(usize),
    #[error("set is not closed under its own reflections")]
    NotClosed,
    #[error("enumeration needs an irreducible gradient")]
    Reducible,
    #[error("{0} enumerated candidates failed the direct maximality check")]
    Inconsistent(usize),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Ars(#[from] ArsError),
    #[error(transparent)]
    RootSystem(#[from] RootSystemError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Index arithmetic in a product of cyclic groups (mixed radix, first slot fastest).
#[derive(Clone, Debug)]
struct Zg {
    radices: Vec<usize>,
    n: usize,
}

impl Zg {
    #[inline]
    fn add(&self, mut a: usize, mut b: usize) -> usize {
        let (mut out, mut mul) = (0, 1);
        for &k in &self.radices {
            out += ((a % k + b % k) % k) * mul;
            mul *= k;
            a /= k;
            b /= k;
        }
        out
    }

    #[inline]
    fn mul(&self, c: i64, mut a: usize) -> usize {
        let (mut out, mut mul) = (0, 1);
        for &k in &self.radices {
            let ck = c.rem_euclid(k as i64) as usize;
            out += ((a % k) * ck % k) * mul;
            mul *= k;
            a /= k;
        }
        out
    }

    #[inline]
    fn sub(&self, a: usize, b: usize) -> usize {
        self.add(a, self.mul(-1, b))
    }

    fn shift(&self, s: &BitSet, t: usize) -> BitSet {
        BitSet::from_indices(self.n, s.iter().map(|x| self.add(x, t)))
    }

    /// `seed + ⟨gens⟩`.
    fn saturate(&self, seed: &BitSet, gens: &[usize]) -> BitSet {
        let mut out = seed.clone();
        let mut stack: Vec<usize> = seed.iter().collect();
        while let Some(x) = stack.pop() {
            for &g in gens {
                let y = self.add(x, g);
                if out.insert(y) {
                    stack.push(y);
                }
            }
        }
        out
    }

    fn subgroup(&self, gens: &[usize]) -> BitSet {
        self.saturate(&BitSet::from_indices(self.n, [0]), gens)
    }

    fn complement(&self, s: &BitSet) -> BitSet {
        let mut c = BitSet::full(self.n);
        c.difference_with(s);
        c
    }

    /// `{δ : δ + (reps + ⟨base⟩) ⊆ z}`.
    fn good_offsets(&self, reps: &[usize], base: &[usize], z: &BitSet) -> BitSet {
        let bad = self.saturate(&self.complement(z), base);
        let interior = self.complement(&bad);
        let mut out = BitSet::full(self.n);
        for &r in reps {
            out.intersect_with(&self.shift(&interior, self.mul(-1, r)));
        }
        out
    }

    /// Representatives of `G / t`.
    fn coset_reps(&self, t: &BitSet) -> Vec<usize> {
        let mut covered = BitSet::new(self.n);
        let mut reps = Vec::new();
        for g in 0..self.n {
            if !covered.contains(g) {
                reps.push(g);
                covered.union_with(&self.shift(t, g));
            }
        }
        reps
    }
}

/// A candidate `Y'` set: `reps + ⟨base⟩` inside the group.
#[derive(Clone, Debug)]
struct Shape {
    mask: BitSet,
    base: Vec<usize>,
    reps: Vec<usize>,
}

/// Incremental reflection closure: the set and a generating set of its reflections.
#[derive(Clone, Debug)]
pub struct ClosureState {
    pub set: BitSet,
    gens: Vec<usize>,
}

/// Outcome of a maximality check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Maximality {
    Maximal,
    /// The set is the whole model.
    NotProper,
    /// Adding `witness` generates a proper subsystem of the given size.
    Extendable { witness: usize, closure_size: usize },
}

/// The finite image of an affine reflection system modulo a lattice.
#[derive(Clone, Debug)]
pub struct QuotientModel {
    ars: AffineReflectionSystem,
    group: FiniteQuotient,
    zg: Zg,
    lambda: Vec<BitSet>,
    full: BitSet,
}

impl QuotientModel {
    /// Builds the model with `M = 2m · ⋂(bases of the datum and extras)`.
    pub fn build(ars: &AffineReflectionSystem, extras: &[Lattice], budget: usize) -> Result<Self> {
        let k = ars.nullity();
        let m = ars.gradient().components().iter().map(|t| t.lacing()).max().unwrap_or(1);
        let mut inter = Lattice::standard(k);
        let mut ambient = Lattice::zero(k);
        for d in ars.data() {
            for b in d.bases() {
                inter = inter.intersection(&b)?;
            }
            for cu in [Some(&d.lambda_s), Some(&d.lambda_ell), d.lambda_d.as_ref()].into_iter().flatten() {
                ambient = ambient.sum(&cu.generated())?;
            }
        }
        for e in extras {
            inter = inter.intersection(e)?;
        }
        let modulus = inter.scale_i(2 * m);
        Self::with_modulus(ars, ambient, modulus, budget)
    }

    fn with_modulus(ars: &AffineReflectionSystem, ambient: Lattice, modulus: Lattice, budget: usize) -> Result<Self> {
        let group = match FiniteQuotient::new(ambient.clone(), modulus.clone()) {
            Ok(g) => g,
            Err(LatticeError::QuotientTooLarge(s)) => {
                return Err(OracleError::BudgetExceeded { size: s.to_string(), budget })
            }
            Err(e) => return Err(e.into()),
        };
        if group.size() > budget {
            return Err(OracleError::BudgetExceeded { size: group.size().to_string(), budget });
        }
        let radices: Vec<usize> = group.invariants().into_iter().map(|x| x as usize).collect();
        let zg = Zg { n: group.size(), radices };
        let sys = ars.gradient();
        let mut lambda = Vec::with_capacity(sys.len());
        let mut cache: Vec<(CosetUnion, BitSet)> = Vec::new();
        for i in 0..sys.len() {
            let l = ars.lambda(i);
            if let Some((_, mask)) = cache.iter().find(|(c, _)| c == l) {
                lambda.push(mask.clone());
                continue;
            }
            if !l.stabilizer().contains_lattice(&modulus) {
                return Err(OracleError::NotPeriodic(i));
            }
            let mask = bool_mask(&group.mask_of(l));
            cache.push((l.clone(), mask.clone()));
            lambda.push(mask);
        }
        let n = zg.n;
        let mut full = BitSet::new(sys.len() * n);
        for (i, mask) in lambda.iter().enumerate() {
            for g in mask.iter() {
                full.insert(i * n + g);
            }
        }
        Ok(QuotientModel { ars: ars.clone(), group, zg, lambda, full })
    }

    pub fn ars(&self) -> &AffineReflectionSystem {
        &self.ars
    }

    pub fn modulus(&self) -> &Lattice {
        self.group.modulus()
    }

    pub fn group_order(&self) -> usize {
        self.zg.n
    }

    /// Bits addressed by the model (finite roots times group order).
    pub fn capacity(&self) -> usize {
        self.full.capacity()
    }

    pub fn full(&self) -> &BitSet {
        &self.full
    }

    #[inline]
    fn reflect(&self, x: usize, y: usize) -> usize {
        let n = self.zg.n;
        let (a, ga) = (x / n, x % n);
        let (b, gb) = (y / n, y % n);
        let sys = self.ars.gradient();
        let c = sys.pairing(b, a);
        sys.reflect(a, b) * n + self.zg.sub(gb, self.zg.mul(c, ga))
    }

    /// Model index of an affine root.
    pub fn encode(&self, r: &AffineRoot) -> Option<usize> {
        let g = self.group.index_of(&r.translation)?;
        Some(r.root * self.zg.n + g)
    }

    /// Canonical affine root of a model element.
    pub fn decode(&self, x: usize) -> AffineRoot {
        AffineRoot { root: x / self.zg.n, translation: self.group.element(x % self.zg.n) }
    }

    /// Image of a subsystem; fails if some `Y_α` is not periodic modulo the model lattice.
    pub fn image(&self, spec: &SubsystemSpec) -> Result<BitSet> {
        let n = self.zg.n;
        let mut out = BitSet::new(self.capacity());
        let mut cache: Vec<(&CosetUnion, BitSet)> = Vec::new();
        for (i, y) in spec.y.iter().enumerate() {
            let Some(y) = y else { continue };
            let mask = match cache.iter().find(|(c, _)| *c == y) {
                Some((_, m)) => m.clone(),
                None => {
                    if !y.stabilizer().contains_lattice(self.modulus()) {
                        return Err(OracleError::NotPeriodic(i));
                    }
                    let m = bool_mask(&self.group.mask_of(y));
                    cache.push((y, m.clone()));
                    m
                }
            };
            for g in mask.iter() {
                if self.lambda[i].contains(g) {
                    out.insert(i * n + g);
                }
            }
        }
        Ok(out)
    }

    /// Translation sets of a model subset, as a spec.
    pub fn to_spec(&self, set: &BitSet, family: &str) -> Result<SubsystemSpec> {
        let n = self.zg.n;
        let sys = self.ars.gradient();
        let mut y = Vec::with_capacity(sys.len());
        for i in 0..sys.len() {
            let mask = BitSet::from_indices(n, (0..n).filter(|&g| set.contains(i * n + g)));
            if mask.is_empty() {
                y.push(None);
            } else if mask == self.lambda[i] {
                y.push(Some(self.ars.lambda(i).clone()));
            } else {
                let reps: Vec<_> = mask.iter().map(|g| self.group.element(g)).collect();
                y.push(Some(CosetUnion::new(&reps, self.modulus().clone())?));
            }
        }
        Ok(SubsystemSpec::new(family, y))
    }

    /// All model roots over a finite subset of the gradient.
    pub fn lift(&self, g: &BitSet) -> BitSet {
        let n = self.zg.n;
        let mut out = BitSet::new(self.capacity());
        for i in g.iter() {
            for x in self.lambda[i].iter() {
                out.insert(i * n + x);
            }
        }
        out
    }

    pub fn closure_state(&self, seed: &BitSet) -> ClosureState {
        let mut st = ClosureState { set: BitSet::new(self.capacity()), gens: Vec::new() };
        self.extend(&mut st, seed.iter());
        st
    }

    /// Adds elements and re-closes; new elements outside the current set become generators.
    pub fn extend(&self, st: &mut ClosureState, xs: impl IntoIterator<Item = usize>) {
        let mut queue: Vec<usize> = Vec::new();
        for x in xs {
            if !st.set.insert(x) {
                continue;
            }
            st.gens.push(x);
            queue.push(x);
            let snapshot: Vec<usize> = st.set.iter().collect();
            for y in snapshot {
                let z = self.reflect(x, y);
                if st.set.insert(z) {
                    queue.push(z);
                }
            }
            while let Some(y) = queue.pop() {
                for &g in &st.gens {
                    let z = self.reflect(g, y);
                    if st.set.insert(z) {
                        queue.push(z);
                    }
                }
            }
        }
    }

    /// Least reflection-closed superset.
    pub fn closure(&self, seed: &BitSet) -> BitSet {
        self.closure_state(seed).set
    }

    pub fn is_closed_under_reflections(&self, set: &BitSet) -> bool {
        &self.closure(set) == set
    }

    /// Decides maximality: for one element `γ` of every orbit of the set's own
    /// reflection group on the complement, the closure of `set ∪ {γ}` must be everything.
    pub fn is_maximal(&self, set: &BitSet) -> Result<Maximality> {
        let st = self.closure_state(set);
        if &st.set != set {
            return Err(OracleError::NotClosed);
        }
        if set == &self.full {
            return Ok(Maximality::NotProper);
        }
        let total = self.full.count();
        let mut seen = set.clone();
        for start in self.full.iter() {
            if seen.contains(start) {
                continue;
            }
            let mut stack = vec![start];
            seen.insert(start);
            while let Some(x) = stack.pop() {
                for &g in &st.gens {
                    let y = self.reflect(g, x);
                    if seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
            let mut trial = st.clone();
            self.extend(&mut trial, [start]);
            let size = trial.set.count();
            if size != total {
                return Ok(Maximality::Extendable { witness: start, closure_size: size });
            }
        }
        Ok(Maximality::Maximal)
    }

    /// Every maximal periodic subsystem of an irreducible system.
    ///
    /// Candidates are the lifts of the finite maximal subsystems and, for the
    /// full gradient, every choice of per-class sets `Y'` (unions of `2L`-cosets
    /// generating a subgroup `L`) with offsets linear on the simple roots.
    /// Shapes that can be enlarged in one class without losing any offset are
    /// skipped; the survivors are filtered by inclusion and each one is
    /// confirmed with [`QuotientModel::is_maximal`].
    pub fn enumerate_maximal(&self) -> Result<Vec<BitSet>> {
        let sys = self.ars.gradient();
        if sys.components().len() != 1 {
            return Err(OracleError::Reducible);
        }
        let mut cands: HashSet<BitSet> = HashSet::new();
        for g in sys.finite_maximal_subsystems()? {
            cands.insert(self.lift(&g));
        }
        if self.ars.nullity() > 0 {
            self.full_gradient_candidates(&mut cands)?;
        }
        let mut list: Vec<BitSet> = cands.into_iter().filter(|c| c != &self.full).collect();
        list.sort_by(|a, b| b.count().cmp(&a.count()).then_with(|| a.cmp(b)));
        let mut kept: Vec<BitSet> = Vec::new();
        for c in list {
            if !kept.iter().any(|k| c.is_subset(k)) {
                kept.push(c);
            }
        }
        let bad = kept
            .iter()
            .map(|k| self.is_maximal(k))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|v| v != &Maximality::Maximal)
            .count();
        if bad > 0 {
            return Err(OracleError::Inconsistent(bad));
        }
        kept.sort();
        Ok(kept)
    }

    fn shapes(&self) -> Result<Vec<Shape>> {
        let k = self.ars.nullity();
        let ambient = self.group.ambient().clone();
        let m_coords: Vec<Vec<num_bigint::BigInt>> = self
            .modulus()
            .rows()
            .iter()
            .map(|r| ambient.coordinates(r).expect("modulus inside ambient"))
            .collect();
        let m_lat = Lattice::hnf(&m_coords)?;
        let mut out: Vec<Shape> = Vec::new();
        let mut seen: HashSet<BitSet> = HashSet::new();
        for h in hnf_candidates(k, self.zg.n as u64) {
            let coords = Lattice::from_rows(&h)?;
            if !coords.contains_lattice(&m_lat) {
                continue;
            }
            let rows: Vec<_> = coords
                .rows()
                .iter()
                .map(|c| {
                    let mut v = crate::lattice::zero_vec(k);
                    for (ci, row) in c.iter().zip(ambient.rows()) {
                        v = crate::lattice::vadd(&v, &crate::lattice::vscale(ci, row));
                    }
                    v
                })
                .collect();
            let l = Lattice::hnf(&rows)?;
            let b = l.scale_i(2).sum(self.modulus())?;
            let base: Vec<usize> = b.rows().iter().filter_map(|r| self.group.index_of(r)).collect();
            let base_mask = self.zg.subgroup(&base);
            let reps = l.coset_reps(&b)?;
            let rep_idx: Vec<usize> = reps.iter().filter_map(|r| self.group.index_of(r)).collect();
            let zero_pos = reps.iter().position(|r| b.contains(r)).expect("zero coset present");
            let others: Vec<usize> = (0..reps.len()).filter(|&i| i != zero_pos).collect();
            for bits in 0u32..(1 << others.len()) {
                let chosen: Vec<usize> =
                    others.iter().enumerate().filter(|(j, _)| bits >> j & 1 == 1).map(|(_, &i)| i).collect();
                let gens: Vec<_> = b.rows().iter().cloned().chain(chosen.iter().map(|&i| reps[i].clone())).collect();
                if Lattice::hnf(&gens)? != l {
                    continue;
                }
                let mut mask = base_mask.clone();
                let mut sreps = vec![rep_idx[zero_pos]];
                for &i in &chosen {
                    mask.union_with(&self.zg.shift(&base_mask, rep_idx[i]));
                    sreps.push(rep_idx[i]);
                }
                if seen.insert(mask.clone()) {
                    out.push(Shape { mask, base: base.clone(), reps: sreps });
                }
            }
        }
        Ok(out)
    }

    fn full_gradient_candidates(&self, cands: &mut HashSet<BitSet>) -> Result<()> {
        let sys = self.ars.gradient();
        let zg = &self.zg;
        let n = zg.n;
        let nroots = sys.len();
        let mut classes: Vec<LengthClass> = Vec::new();
        for i in 0..nroots {
            if !classes.contains(&sys.class(i)) {
                classes.push(sys.class(i));
            }
        }
        classes.sort();
        let cls_pos = |c: LengthClass| classes.iter().position(|&x| x == c).expect("class present");
        let root_cls: Vec<usize> = (0..nroots).map(|i| cls_pos(sys.class(i))).collect();
        let lam: Vec<BitSet> = classes
            .iter()
            .map(|&c| self.lambda[(0..nroots).find(|&i| sys.class(i) == c).expect("class present")].clone())
            .collect();

        let shapes = self.shapes()?;
        let ns = shapes.len();
        let stab: Vec<BitSet> = shapes.iter().map(|s| zg.good_offsets(&s.reps, &s.base, &s.mask)).collect();
        // offsets v with v + Y' ⊆ Λ_x, per class and shape
        let valid: Vec<Vec<BitSet>> = lam
            .iter()
            .map(|l| shapes.iter().map(|s| zg.good_offsets(&s.reps, &s.base, l)).collect())
            .collect();
        let allowed: Vec<Vec<usize>> = (0..classes.len())
            .map(|x| (0..ns).filter(|&s| !valid[x][s].is_empty()).collect())
            .collect();

        // pair relations, grouped by class pattern
        let mut pairs: Vec<(usize, usize, i64, usize)> = Vec::new(); // (a, b, c, pattern)
        let mut patterns: Vec<(usize, i64, usize, usize)> = Vec::new(); // (class b, c, class a, class t)
        for a in 0..nroots {
            for b in 0..nroots {
                let c = sys.pairing(b, a);
                if c == 0 {
                    continue;
                }
                let t = sys.reflect(a, b);
                let key = (root_cls[b], c, root_cls[a], root_cls[t]);
                let pi = match patterns.iter().position(|p| p == &key) {
                    Some(i) => i,
                    None => {
                        patterns.push(key);
                        patterns.len() - 1
                    }
                };
                pairs.push((a, b, c, pi));
            }
        }
        let div = classes.iter().position(|&c| c == LengthClass::Divisible);
        let mut wcache: std::collections::HashMap<(usize, i64, usize, usize), BitSet> = Default::default();
        let mut w = |sb: usize, c: i64, sa: usize, st: usize| -> BitSet {
            wcache
                .entry((sb, c, sa, st))
                .or_insert_with(|| {
                    let (yb, ya) = (&shapes[sb], &shapes[sa]);
                    let mut reps: Vec<usize> = Vec::new();
                    for &rb in &yb.reps {
                        for &ra in &ya.reps {
                            let r = zg.sub(rb, zg.mul(c, ra));
                            if !reps.contains(&r) {
                                reps.push(r);
                            }
                        }
                    }
                    let mut base = yb.base.clone();
                    base.extend(ya.base.iter().map(|&g| zg.mul(c, g)).filter(|&g| g != 0));
                    zg.good_offsets(&reps, &base, &shapes[st].mask)
                })
                .clone()
        };
        let pattern_w = |d: &[usize], w: &mut dyn FnMut(usize, i64, usize, usize) -> BitSet| -> Vec<BitSet> {
            patterns.iter().map(|&(cb, c, ca, ct)| w(d[cb], c, d[ca], d[ct])).collect()
        };
        let feasible = |d: &[usize], ws: &[BitSet]| -> bool {
            patterns.iter().zip(ws).all(|(&(cb, _, ca, ct), wm)| {
                let touches_div = Some(cb) == div || Some(ca) == div || Some(ct) == div;
                if touches_div {
                    !wm.is_empty()
                } else {
                    wm.contains(0)
                }
            }) && d.iter().enumerate().all(|(x, &s)| !valid[x][s].is_empty())
        };

        // simple-root coordinates of the non-divisible roots
        let nd = BitSet::from_indices(nroots, (0..nroots).filter(|&i| sys.class(i) != LengthClass::Divisible));
        let simple = sys.simple_system(&nd);
        let r = simple.len();
        let mut coef: Vec<Option<Vec<i64>>> = vec![None; nroots];
        let mut queue: Vec<usize> = Vec::new();
        for (k, &s) in simple.iter().enumerate() {
            let mut v = vec![0; r];
            v[k] = 1;
            coef[s] = Some(v);
            queue.push(s);
        }
        let mut dstart = None;
        if div.is_some() {
            let d0 = (0..nroots).find(|&i| sys.class(i) == LengthClass::Divisible).expect("divisible root");
            coef[d0] = Some(vec![0; r]);
            queue.push(d0);
            dstart = Some(d0);
        }
        while let Some(b) = queue.pop() {
            let cb = coef[b].clone().expect("queued");
            for (k, &a) in simple.iter().enumerate() {
                let t = sys.reflect(a, b);
                if coef[t].is_none() {
                    let mut v = cb.clone();
                    v[k] -= sys.pairing(b, a);
                    coef[t] = Some(v);
                    queue.push(t);
                }
            }
        }
        let coef: Vec<Vec<i64>> = coef.into_iter().map(|c| c.expect("every root reached")).collect();

        let classes_n = classes.len();
        let mut d = vec![0usize; classes_n];
        let total: usize = allowed.iter().map(|a| a.len()).product();
        for flat in 0..total {
            let mut f = flat;
            for x in 0..classes_n {
                d[x] = allowed[x][f % allowed[x].len()];
                f /= allowed[x].len();
            }
            let ws = pattern_w(&d, &mut w);
            if !feasible(&d, &ws) {
                continue;
            }
            // one-class enlargement that keeps every offset valid and stays proper
            let dominated = (0..classes_n).any(|x| {
                allowed[x].iter().any(|&s2| {
                    if s2 == d[x] || !shapes[d[x]].mask.is_subset(&shapes[s2].mask) {
                        return false;
                    }
                    if !valid[x][d[x]].is_subset(&valid[x][s2]) {
                        return false;
                    }
                    let mut d2 = d.clone();
                    d2[x] = s2;
                    let ws2 = pattern_w(&d2, &mut w);
                    if !ws.iter().zip(&ws2).all(|(a, b)| a.is_subset(b)) {
                        return false;
                    }
                    (0..classes_n).any(|y| shapes[d2[y]].mask.count() < lam[y].count())
                })
            });
            if dominated {
                continue;
            }
            // offsets: p on simple roots modulo T_i, plus the divisible base point
            let tmask: Vec<BitSet> = (0..r)
                .map(|i| {
                    let mut needs: Vec<(i64, usize)> = Vec::new();
                    for (root, c) in coef.iter().enumerate() {
                        let key = (c[i], d[root_cls[root]]);
                        if key.0 != 0 && !needs.contains(&key) {
                            needs.push(key);
                        }
                    }
                    BitSet::from_indices(n, (0..n).filter(|&t| needs.iter().all(|&(c, s)| stab[s].contains(zg.mul(c, t)))))
                })
                .collect();
            let mut choice_lists: Vec<Vec<usize>> = tmask.iter().map(|t| zg.coset_reps(t)).collect();
            if let Some(x) = div {
                choice_lists.push(zg.coset_reps(&stab[d[x]]));
            }
            let count: usize = choice_lists.iter().map(|c| c.len()).product();
            if count > CANDIDATE_CAP {
                return Err(OracleError::BudgetExceeded { size: format!("{count} offset tuples"), budget: CANDIDATE_CAP });
            }
            let mut off = vec![0usize; nroots];
            for flat in 0..count {
                let mut f = flat;
                let mut vals = Vec::with_capacity(choice_lists.len());
                for cl in &choice_lists {
                    vals.push(cl[f % cl.len()]);
                    f /= cl.len();
                }
                for root in 0..nroots {
                    let mut o = if div.is_some() && sys.class(root) == LengthClass::Divisible { vals[r] } else { 0 };
                    for (i, &c) in coef[root].iter().enumerate() {
                        if c != 0 {
                            o = zg.add(o, zg.mul(c, vals[i]));
                        }
                    }
                    off[root] = o;
                }
                let _ = dstart;
                if !(0..nroots).all(|root| valid[root_cls[root]][d[root_cls[root]]].contains(off[root])) {
                    continue;
                }
                let ok = pairs.iter().all(|&(a, b, c, pi)| {
                    let t = sys.reflect(a, b);
                    let delta = zg.sub(zg.sub(off[b], zg.mul(c, off[a])), off[t]);
                    ws[pi].contains(delta)
                });
                if !ok {
                    continue;
                }
                let mut set = BitSet::new(nroots * n);
                for root in 0..nroots {
                    for y in shapes[d[root_cls[root]]].mask.iter() {
                        set.insert(root * n + zg.add(y, off[root]));
                    }
                }
                cands.insert(set);
            }
        }
        Ok(())
    }
}

fn bool_mask(v: &[bool]) -> BitSet {
    BitSet::from_indices(v.len(), v.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i))
}

fn divisors(n: u64) -> Vec<u64> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Upper-triangular HNF matrices of size `k` whose determinant divides `order`.
fn hnf_candidates(k: usize, order: u64) -> Vec<Vec<Vec<i64>>> {
    let mut diags: Vec<Vec<u64>> = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for d in &diags {
            let used: u64 = d.iter().product();
            for x in divisors(order / used) {
                let mut e = d.clone();
                e.push(x);
                next.push(e);
            }
        }
        diags = next;
    }
    let mut out = Vec::new();
    for d in diags {
        // entries above the diagonal in column j range over 0..d[j]
        let slots: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        let total: u64 = slots.iter().map(|&(_, j)| d[j]).product();
        for flat in 0..total {
            let mut f = flat;
            let mut m = vec![vec![0i64; k]; k];
            for i in 0..k {
                m[i][i] = d[i] as i64;
            }
            for &(i, j) in &slots {
                m[i][j] = (f % d[j]) as i64;
                f /= d[j];
            }
            out.push(m);
        }
    }
    out
}

/// Maximal sublattices of index at most `prime_bound` of every base and
/// generated lattice of the datum: the lattices a classification at that bound
/// can produce, so a model refining them sees every candidate.
pub fn refinement_lattices(ars: &AffineReflectionSystem, prime_bound: u64) -> Result<Vec<Lattice>> {
    let mut out: Vec<Lattice> = Vec::new();
    let primes = crate::lattice::primes_up_to(prime_bound);
    for d in ars.data() {
        let mut sources = d.bases();
        for cu in [Some(&d.lambda_s), Some(&d.lambda_ell), d.lambda_d.as_ref()].into_iter().flatten() {
            sources.push(cu.generated());
        }
        for src in sources {
            for &p in &primes {
                for h in src.maximal_sublattices(p)? {
                    if !out.contains(&h) {
                        out.push(h);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ars::ExtensionDatum;
    use crate::lattice::ivec;

    fn untwisted(t: &str, k: usize) -> AffineReflectionSystem {
        AffineReflectionSystem::irreducible(t.parse().unwrap(), ExtensionDatum::uniform(Lattice::standard(k))).unwrap()
    }

    #[test]
    fn model_sizes() {
        let b2 = untwisted("B2", 2);
        let m = QuotientModel::build(&b2, &[], DEFAULT_BUDGET).unwrap();
        assert_eq!(m.group_order(), 16);
        assert_eq!(m.modulus(), &Lattice::diagonal(&[4, 4]));
        let g2 = untwisted("G2", 1);
        let extras = [Lattice::diagonal(&[2]), Lattice::diagonal(&[3])];
        assert_eq!(QuotientModel::build(&g2, &extras, DEFAULT_BUDGET).unwrap().group_order(), 36);
        assert!(matches!(QuotientModel::build(&b2, &[Lattice::diagonal(&[100, 100])], 4096), Err(OracleError::BudgetExceeded { .. })));
    }

    #[test]
    fn closure_properties() {
        let b2 = untwisted("B2", 1);
        let m = QuotientModel::build(&b2, &[], DEFAULT_BUDGET).unwrap();
        let g = b2.gradient();
        let short = g.by_class(LengthClass::Short);
        let lifted = m.lift(&short);
        assert_eq!(m.closure(&lifted), lifted);
        let a = m.encode(&AffineRoot { root: g.index_of(&[1, 0]).unwrap(), translation: ivec(&[0]) }).unwrap();
        let pair = m.closure(&BitSet::from_indices(m.capacity(), [a]));
        assert_eq!(pair.count(), 2);
        assert_eq!(m.closure(m.full()), *m.full());
        let c = m.closure(&pair);
        assert_eq!(m.closure(&c), c);
    }

    #[test]
    fn maximality_verdicts() {
        let b3 = untwisted("B3", 1);
        let m = QuotientModel::build(&b3, &[], DEFAULT_BUDGET).unwrap();
        let short = m.lift(&b3.gradient().by_class(LengthClass::Short));
        assert!(matches!(m.is_maximal(&short).unwrap(), Maximality::Extendable { .. }));
        let long = m.lift(&b3.gradient().by_class(LengthClass::Long));
        assert_eq!(m.is_maximal(&long).unwrap(), Maximality::Maximal);
        assert_eq!(m.is_maximal(m.full()).unwrap(), Maximality::NotProper);
        let mut broken = m.full().clone();
        broken.remove(0);
        assert_eq!(m.is_maximal(&broken), Err(OracleError::NotClosed));
    }

    #[test]
    fn a2_affine_enumeration() {
        let a2 = untwisted("A2", 1);
        let extras = [Lattice::diagonal(&[2]), Lattice::diagonal(&[3])];
        let m = QuotientModel::build(&a2, &extras, DEFAULT_BUDGET).unwrap();
        let found = m.enumerate_maximal().unwrap();
        // 3 finite lifts, plus q = 2 (4 offset classes) and q = 3 (9 offset classes)
        let lifts = found.iter().filter(|s| s.count() < m.full().count() / 2 && s.count() % 2 == 0).count();
        assert!(lifts >= 3);
        assert_eq!(found.len(), 3 + 4 + 9);
    }

    #[test]
    fn nullity_zero_reduces_to_finite() {
        let b2 = AffineReflectionSystem::irreducible("B2".parse().unwrap(), ExtensionDatum::uniform(Lattice::standard(0))).unwrap();
        let m = QuotientModel::build(&b2, &[], DEFAULT_BUDGET).unwrap();
        assert_eq!(m.group_order(), 1);
        assert_eq!(m.enumerate_maximal().unwrap().len(), b2.gradient().finite_maximal_subsystems().unwrap().len());
    }
}
