//! Maximal subsystems of irreducible affine reflection systems, organised by
//! family: constructors with checked hypotheses, bounded enumeration, and
//! the closedness checks.
//!
//! A p-function is given by its values on a fixed list of simple roots (see
//! [`simple_roots`]); the value on any other root is the matching integer
//! combination. Family-specific sets are:
//!
//! | tag | gradient | translation sets |
//! |---|---|---|
//! | `L4_1_1` | not B | short `Λ_s`, long `p+S` |
//! | `L4_1_2` | not B | short `p+H`, long `Λ_ℓ` |
//! | `L4_1_3` | not B | short `p+H`, long `(p+H) ∩ Λ_ℓ` |
//! | `L5_1_1` | B | short `p+S`, long `Λ_ℓ` |
//! | `L5_1_2` | B | short `Λ_s`, long `p+H` |
//! | `L5_1_3` | B | short `p+S(p)`, long `p+H` |
//! | `T*` | any reduced | lift of a finite maximal subsystem |
//! | `NR_*` | BC | lifts, one-coset removals, and the B forms plus a divisible part |

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::ars::{dual_spec, subsystem_violation, AffineReflectionSystem, ArsError, SubsystemSpec};
use crate::bitset::BitSet;
use crate::lattice::{is_prime, primes_up_to, vadd, vneg, vscale, zero_vec, CosetUnion, IVec, Lattice, LatticeError};
use crate::oracle::{self, Maximality, OracleError, QuotientModel};
use crate::rootsys::{Family, FiniteRootSystem, LengthClass, RootSystemError, RootSystemType};

/// Default cap on p-function tuples tried per family instance.
pub const DEFAULT_P_VALUE_BOUND: usize = 2_000_000;

#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyId {
    L4_1_1,
    L4_1_2,
    L4_1_3,
    T4_3_2a,
    T4_3_2b,
    T4_3_2c,
    L5_1_1,
    L5_1_2,
    L5_1_3,
    T5_3_2a,
    T5_3_2b,
    NR_AJ,
    NR_PhiC,
    NR_PhiC_ext,
    NR_BI,
    NR_PhiB_ext,
    NR_P6_5_1,
    NR_P6_5_2,
    NR_P6_5_3a,
    NR_P6_5_3b,
}

impl FamilyId {
    pub const ALL: [FamilyId; 20] = [
        FamilyId::L4_1_1,
        FamilyId::L4_1_2,
        FamilyId::L4_1_3,
        FamilyId::T4_3_2a,
        FamilyId::T4_3_2b,
        FamilyId::T4_3_2c,
        FamilyId::L5_1_1,
        FamilyId::L5_1_2,
        FamilyId::L5_1_3,
        FamilyId::T5_3_2a,
        FamilyId::T5_3_2b,
        FamilyId::NR_AJ,
        FamilyId::NR_PhiC,
        FamilyId::NR_PhiC_ext,
        FamilyId::NR_BI,
        FamilyId::NR_PhiB_ext,
        FamilyId::NR_P6_5_1,
        FamilyId::NR_P6_5_2,
        FamilyId::NR_P6_5_3a,
        FamilyId::NR_P6_5_3b,
    ];

    pub fn as_str(&self) -> &'static str {
        use FamilyId::*;
        match self {
            L4_1_1 => "L4_1_1",
            L4_1_2 => "L4_1_2",
            L4_1_3 => "L4_1_3",
            T4_3_2a => "T4_3_2a",
            T4_3_2b => "T4_3_2b",
            T4_3_2c => "T4_3_2c",
            L5_1_1 => "L5_1_1",
            L5_1_2 => "L5_1_2",
            L5_1_3 => "L5_1_3",
            T5_3_2a => "T5_3_2a",
            T5_3_2b => "T5_3_2b",
            NR_AJ => "NR_AJ",
            NR_PhiC => "NR_PhiC",
            NR_PhiC_ext => "NR_PhiC_ext",
            NR_BI => "NR_BI",
            NR_PhiB_ext => "NR_PhiB_ext",
            NR_P6_5_1 => "NR_P6_5_1",
            NR_P6_5_2 => "NR_P6_5_2",
            NR_P6_5_3a => "NR_P6_5_3a",
            NR_P6_5_3b => "NR_P6_5_3b",
        }
    }

    /// Lifts of finite maximal subsystems (gradient proper, all translations kept).
    pub fn is_lift(&self) -> bool {
        use FamilyId::*;
        matches!(self, T4_3_2a | T4_3_2b | T4_3_2c | T5_3_2a | T5_3_2b | NR_AJ | NR_PhiC | NR_BI)
    }

    pub fn is_non_reduced(&self) -> bool {
        self.as_str().starts_with("NR_")
    }

    /// Whether members of the family are expected to be closed under root addition.
    pub fn closedness_expected(&self) -> bool {
        use FamilyId::*;
        match self {
            L4_1_2 | L4_1_3 | T4_3_2a | T4_3_2c | L5_1_1 | T5_3_2a | T5_3_2b => true,
            NR_AJ | NR_PhiC | NR_PhiC_ext | NR_P6_5_1 => true,
            L4_1_1 | T4_3_2b | L5_1_2 | L5_1_3 => false,
            NR_BI | NR_PhiB_ext | NR_P6_5_2 | NR_P6_5_3a | NR_P6_5_3b => false,
        }
    }

    /// Family of `Ψ∨` in the dual system. `gradient_c` says whether `Ψ`
    /// lives over a type C gradient (whose dual is type B).
    pub fn dual_family(&self, gradient_c: bool) -> Option<FamilyId> {
        use FamilyId::*;
        Some(match (self, gradient_c) {
            (L4_1_1, true) => L5_1_1,
            (L4_1_1, false) => L4_1_2,
            (L4_1_2, true) => L5_1_2,
            (L4_1_2, false) => L4_1_1,
            (L4_1_3, true) => L5_1_3,
            (L4_1_3, false) => L4_1_3,
            (T4_3_2a, true) => T5_3_2b,
            (T4_3_2a, false) => T4_3_2a,
            (T4_3_2b, true) => T5_3_2a,
            (T4_3_2b, false) => T4_3_2c,
            (T4_3_2c, true) => T5_3_2b,
            (T4_3_2c, false) => T4_3_2b,
            (L5_1_1, _) => L4_1_1,
            (L5_1_2, _) => L4_1_2,
            (L5_1_3, _) => L4_1_3,
            (T5_3_2a, _) => T4_3_2b,
            (T5_3_2b, _) => T4_3_2a,
            _ => return None,
        })
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyId {
    type Err = ClassifyError;
    fn from_str(s: &str) -> Result<Self> {
        FamilyId::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| ClassifyError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("unknown family tag {0:?}")]
    UnknownFamily(String),
    #[error("{family} does not apply: {reason}")]
    Precondition { family: FamilyId, reason: String },
    #[error("{family}: missing parameter {name}")]
    MissingParam { family: FamilyId, name: &'static str },
    #[error("type A1 has no family description; use the oracle")]
    A1Component,
    #[error("family constructors need an irreducible gradient")]
    Reducible,
    #[error("prime bound must be at least 2, got {0}")]
    BadBound(u64),
    #[error("{family}: {count} p-function tuples exceed the bound {bound}")]
    TooManyTuples { family: FamilyId, count: String, bound: usize },
    #[error("{family}: constructed set fails the subsystem relation for roots ({beta}, {alpha})")]
    NotSubsystem { family: FamilyId, beta: usize, alpha: usize },
    #[error(transparent)]
    Ars(#[from] ArsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    RootSystem(#[from] RootSystemError),
}

pub type Result<T> = std::result::Result<T, ClassifyError>;

/// Parameters of a family member. Which fields are needed depends on the family.
#[derive(Clone, Debug, Default)]
pub struct FamilyParams {
    /// The sublattice `H` (or the lattice `S` of the non-C first family).
    pub h: Option<Lattice>,
    /// The coset union `S`, when several maximal choices exist.
    pub s: Option<CosetUnion>,
    /// The subset `J` for split lifts (0-based coordinates).
    pub j: Option<Vec<usize>>,
    /// The finite subsystem for lifts.
    pub gradient: Option<BitSet>,
    /// p-function values on [`simple_roots`].
    pub p: Option<Vec<IVec>>,
    /// The divisible value `p'_{2ε_n}` for the last non-reduced family.
    pub q: Option<IVec>,
    /// The fixed translation set of the one-coset removal families.
    pub y: Option<CosetUnion>,
}

impl FamilyParams {
    pub fn with_h(mut self, h: Lattice) -> Self {
        self.h = Some(h);
        self
    }
    pub fn with_s(mut self, s: CosetUnion) -> Self {
        self.s = Some(s);
        self
    }
    pub fn with_j(mut self, j: Vec<usize>) -> Self {
        self.j = Some(j);
        self
    }
    pub fn with_gradient(mut self, g: BitSet) -> Self {
        self.gradient = Some(g);
        self
    }
    pub fn with_p(mut self, p: Vec<IVec>) -> Self {
        self.p = Some(p);
        self
    }
    pub fn with_q(mut self, q: IVec) -> Self {
        self.q = Some(q);
        self
    }
    pub fn with_y(mut self, y: CosetUnion) -> Self {
        self.y = Some(y);
        self
    }
}

/// The simple roots p-functions are given on: `ε_i − ε_{i+1}` and `ε_n` for
/// B and BC, the gradient's own simple system otherwise.
pub fn simple_roots(sys: &FiniteRootSystem) -> Result<Vec<usize>> {
    let t = sys.irreducible_type().ok_or(ClassifyError::Reducible)?;
    if matches!(t.family, Family::B | Family::BC) {
        let n = t.rank;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = vec![0i64; n];
            v[i] = 1;
            if i + 1 < n {
                v[i + 1] = -1;
            }
            out.push(sys.index_of(&v).expect("B realization has ε_i − ε_{i+1} and ε_n"));
        }
        Ok(out)
    } else {
        Ok(sys.simple_roots().to_vec())
    }
}

fn fmt_vec(v: &[BigInt]) -> String {
    format!("({})", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
}

fn fmt_vecs(vs: &[IVec]) -> String {
    vs.iter().map(|v| fmt_vec(v)).collect::<Vec<_>>().join(";")
}

/// `[L : h]` when `h ⊆ L` has prime index.
fn prime_index(l: &Lattice, h: &Lattice) -> Option<u64> {
    if h.dim() != l.dim() || !l.contains_lattice(h) {
        return None;
    }
    let idx = l.index_of(h).ok()?.to_u64()?;
    is_prime(idx).then_some(idx)
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// One family member shape before the p-function is chosen.
#[derive(Clone, Debug)]
struct Instance {
    family: FamilyId,
    h: Option<Lattice>,
    /// p values matter only modulo this lattice.
    t: Lattice,
}

#[derive(Clone, Debug)]
struct Realized {
    y: Vec<Option<CosetUnion>>,
    s: Option<CosetUnion>,
    q: Option<IVec>,
}

/// Everything about one irreducible system the constructions need.
struct Ctx<'a> {
    ars: &'a AffineReflectionSystem,
    sys: &'a FiniteRootSystem,
    t: RootSystemType,
    m: i64,
    ls: CosetUnion,
    ll: CosetUnion,
    ld: Option<CosetUnion>,
    gls: Lattice,
    gll: Lattice,
    ambient: Lattice,
    bases: Lattice,
    simple: Vec<usize>,
    coef: Vec<Vec<i64>>,
    short: Vec<usize>,
    long: Vec<usize>,
    div: Vec<usize>,
}

impl<'a> Ctx<'a> {
    fn new(ars: &'a AffineReflectionSystem) -> Result<Self> {
        let sys = ars.gradient();
        let t = sys.irreducible_type().ok_or(ClassifyError::Reducible)?;
        if t.family == Family::A && t.rank == 1 {
            return Err(ClassifyError::A1Component);
        }
        let d = ars.datum(0);
        let (ls, ll, ld) = (d.lambda_s.clone(), d.lambda_ell.clone(), d.lambda_d.clone());
        let gls = ls.generated();
        let gll = ll.generated();
        let mut ambient = gls.sum(&gll)?;
        if let Some(ld) = &ld {
            ambient = ambient.sum(&ld.generated())?;
        }
        let mut bases = Lattice::standard(d.nullity);
        for b in d.bases() {
            bases = bases.intersection(&b)?;
        }
        let simple = simple_roots(sys)?;
        let coef = Self::coefficients(sys, &simple);
        let of = |c: LengthClass| (0..sys.len()).filter(|&i| sys.class(i) == c).collect::<Vec<_>>();
        Ok(Ctx {
            ars,
            sys,
            t,
            m: t.lacing(),
            short: of(LengthClass::Short),
            long: of(LengthClass::Long),
            div: of(LengthClass::Divisible),
            ls,
            ll,
            ld,
            gls,
            gll,
            ambient,
            bases,
            simple,
            coef,
        })
    }

    /// Coefficients of every root over `simple`, found by reflecting the simple roots.
    fn coefficients(sys: &FiniteRootSystem, simple: &[usize]) -> Vec<Vec<i64>> {
        let r = simple.len();
        let mut coef: Vec<Option<Vec<i64>>> = vec![None; sys.len()];
        let mut stack = Vec::new();
        for (k, &s) in simple.iter().enumerate() {
            let mut c = vec![0; r];
            c[k] = 1;
            coef[s] = Some(c);
            stack.push(s);
        }
        while let Some(b) = stack.pop() {
            for (k, &a) in simple.iter().enumerate() {
                let t = sys.reflect(a, b);
                if coef[t].is_none() {
                    let mut c = coef[b].clone().expect("visited");
                    c[k] -= sys.pairing(b, a);
                    coef[t] = Some(c);
                    stack.push(t);
                }
            }
        }
        for i in 0..sys.len() {
            if coef[i].is_none() {
                let h = sys.half(i).expect("unreached roots are divisible");
                coef[i] = Some(coef[h].as_ref().expect("half reached").iter().map(|x| 2 * x).collect());
            }
        }
        coef.into_iter().map(|c| c.expect("all roots reached")).collect()
    }

    fn offsets(&self, p: &[IVec]) -> Vec<IVec> {
        let k = self.ars.nullity();
        self.coef
            .iter()
            .map(|c| {
                let mut v = zero_vec(k);
                for (ci, pi) in c.iter().zip(p) {
                    if *ci != 0 {
                        v = vadd(&v, &vscale(&BigInt::from(*ci), pi));
                    }
                }
                v
            })
            .collect()
    }

    fn is_b(&self) -> bool {
        self.t.family == Family::B
    }
    fn is_bc(&self) -> bool {
        self.t.family == Family::BC
    }
    fn is_c(&self) -> bool {
        self.t.family == Family::C
    }

    fn primes(&self, bound: u64) -> Vec<u64> {
        let mut ps = primes_up_to(bound);
        for p in prime_factors(2 * self.m as u64) {
            if !ps.contains(&p) {
                ps.push(p);
            }
        }
        ps.sort();
        ps
    }

    fn lift_family(&self, g: &BitSet) -> std::result::Result<FamilyId, String> {
        let sys = self.sys;
        let short = sys.by_class(LengthClass::Short);
        let long = sys.by_class(LengthClass::Long);
        let eq = |a: &CosetUnion, b: &CosetUnion| a.set_eq(b).unwrap_or(false);
        match self.t.family {
            Family::BC => {
                if g == &sys.bc_b_i(0) {
                    let two_ll = self.gll.scale_i(2);
                    let ld = self.ld.as_ref().expect("BC has divisible roots");
                    if ld.rebase(&two_ll.intersection(ld.base()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.reps().len()
                        == 1
                    {
                        Ok(FamilyId::NR_BI)
                    } else {
                        Err("Λ_d is not a single coset of 2Λ_ℓ".into())
                    }
                } else if g == &sys.bc_a_j(0, &[]) {
                    if eq(&self.ls, &self.ll) {
                        Ok(FamilyId::NR_PhiC)
                    } else {
                        Err("Λ_ℓ ≠ Λ_s".into())
                    }
                } else if (1..self.t.rank).any(|k| {
                    let j: Vec<usize> = (0..k).collect();
                    sys.weyl_orbit(&sys.bc_split(0, &j)).contains(g)
                }) {
                    Ok(FamilyId::NR_AJ)
                } else {
                    Err("not a recognised maximal subsystem of BC".into())
                }
            }
            Family::B => {
                if g == &long {
                    if eq(&self.ls, &self.ll) {
                        Ok(FamilyId::T5_3_2a)
                    } else {
                        Err("Λ_ℓ ≠ Λ_s".into())
                    }
                } else {
                    Ok(FamilyId::T5_3_2b)
                }
            }
            _ => {
                if self.m > 1 && g == &short {
                    if eq(&self.ll, &self.ls.scale_i(self.m)) {
                        Ok(FamilyId::T4_3_2b)
                    } else {
                        Err("Λ_ℓ ≠ mΛ_s".into())
                    }
                } else if self.m > 1 && g == &long {
                    if self.gll == self.gls {
                        Ok(FamilyId::T4_3_2c)
                    } else {
                        Err("⟨Λ_ℓ⟩ ≠ Λ_s".into())
                    }
                } else {
                    Ok(FamilyId::T4_3_2a)
                }
            }
        }
    }

    /// Checks the family hypotheses that do not involve the p-function.
    fn instance(&self, family: FamilyId, h: Option<&Lattice>) -> std::result::Result<Instance, String> {
        use FamilyId::*;
        let need_h = || h.cloned().ok_or_else(|| "the sublattice H is required".to_string());
        let bc_part = family.is_non_reduced();
        if bc_part != self.is_bc() {
            return Err(format!("needs a {} gradient", if bc_part { "BC" } else { "reduced" }));
        }
        let b_like = self.is_b() || self.is_bc();
        let eq = |a: &CosetUnion, b: &CosetUnion| a.set_eq(b).map_err(|e| e.to_string());
        let base = match family {
            L4_1_1 | L4_1_2 | L4_1_3 if b_like => return Err("needs a gradient other than B".into()),
            L5_1_1 | L5_1_2 | L5_1_3 if !self.is_b() => return Err("needs a B gradient".into()),
            L4_1_1 | L4_1_2 if self.m == 1 => return Err("needs long roots".into()),
            L4_1_1 => {
                if eq(&self.ll, &self.ls.scale_i(self.m))? {
                    return Err("Λ_ℓ = mΛ_s".into());
                }
                if self.is_c() {
                    if h.is_some() {
                        return Err("over C the set S is a coset union; pass it as S".into());
                    }
                    self.gls.scale_i(2)
                } else {
                    let s = need_h()?;
                    if prime_index(&self.gll, &s).is_none() {
                        return Err("S is not a maximal subgroup of Λ_ℓ".into());
                    }
                    if !s.contains_lattice(&self.gls.scale_i(self.m)) {
                        return Err("S does not contain mΛ_s".into());
                    }
                    s
                }
            }
            L4_1_2 => {
                if self.gll == self.gls {
                    return Err("⟨Λ_ℓ⟩ = Λ_s".into());
                }
                let h = need_h()?;
                if prime_index(&self.gls, &h).is_none() || !h.contains_lattice(&self.gll) {
                    return Err("H is not a maximal subgroup of Λ_s containing Λ_ℓ".into());
                }
                h
            }
            L4_1_3 => {
                let h = need_h()?;
                if prime_index(&self.gls, &h).is_none() {
                    return Err("H is not a maximal subgroup of Λ_s".into());
                }
                if h.contains_lattice(&self.gls.scale_i(self.m)) {
                    return Err("H contains mΛ_s".into());
                }
                h
            }
            L5_1_1 | NR_P6_5_1 => {
                if eq(&self.ls, &self.ll)? {
                    return Err("Λ_s = Λ_ℓ".into());
                }
                self.gll.clone()
            }
            L5_1_2 | NR_P6_5_2 => {
                let two = self.gls.scale_i(2);
                if self.gll == two {
                    return Err("Λ_ℓ = 2⟨Λ_s⟩".into());
                }
                let h = need_h()?;
                if prime_index(&self.gll, &h).is_none() || !h.contains_lattice(&two) {
                    return Err("H is not a maximal subgroup of Λ_ℓ containing 2⟨Λ_s⟩".into());
                }
                h
            }
            L5_1_3 | NR_P6_5_3a | NR_P6_5_3b => {
                let h = need_h()?;
                if prime_index(&self.gll, &h).is_none() {
                    return Err("H is not a maximal subgroup of Λ_ℓ".into());
                }
                if h.contains_lattice(&self.gls.scale_i(2)) {
                    return Err("H contains 2⟨Λ_s⟩".into());
                }
                if family != L5_1_3 {
                    let ld = self.ld.as_ref().expect("BC");
                    let inside = ld.subset_of(&CosetUnion::lattice(h.clone())).map_err(|e| e.to_string())?;
                    if inside != (family == NR_P6_5_3a) {
                        return Err(if inside { "Λ_d ⊆ H".into() } else { "Λ_d ⊄ H".into() });
                    }
                }
                h
            }
            _ => return Err("not a p-function family".into()),
        };
        let t = self.bases.intersection(&base).map_err(|e| e.to_string())?;
        let keeps_h = !matches!(family, L5_1_1 | NR_P6_5_1) && !(family == L4_1_1 && self.is_c());
        Ok(Instance { family, h: keeps_h.then(|| base.clone()), t })
    }

    /// Coset unions of `base` inside `outer` allowed by `targets` (each
    /// `o + c + base ⊆ Λ`) and `keep`. With `proper`, the maximal unions that
    /// leave some target `o + U ≠ Λ`: everything allowed, or everything but one
    /// nonzero coset and its negative.
    fn coset_unions(
        &self,
        outer: &Lattice,
        base: &Lattice,
        targets: &[(IVec, &CosetUnion)],
        keep: impl Fn(&IVec) -> bool,
        proper: bool,
    ) -> Result<Vec<CosetUnion>> {
        let mut ok = Vec::new();
        'reps: for r in outer.coset_reps(base)? {
            if !keep(&r) {
                continue;
            }
            for (o, lam) in targets {
                if !CosetUnion::coset(&vadd(o, &r), base.clone()).subset_of(lam)? {
                    continue 'reps;
                }
            }
            ok.push(r);
        }
        if !ok.iter().any(|r| base.contains(r)) {
            return Ok(Vec::new());
        }
        let all = CosetUnion::new(&ok, base.clone())?;
        if !proper {
            return Ok(vec![all]);
        }
        for (o, lam) in targets {
            if !all.translate(o).set_eq(lam)? {
                return Ok(vec![all]);
            }
        }
        let mut out: Vec<CosetUnion> = Vec::new();
        for r in ok.iter().filter(|r| !base.contains(r)) {
            let neg = base.reduce(&vneg(r));
            let rest: Vec<IVec> = ok.iter().filter(|x| *x != r && base.reduce(x) != neg).cloned().collect();
            let u = CosetUnion::new(&rest, base.clone())?;
            if !out.contains(&u) {
                out.push(u);
            }
        }
        Ok(out)
    }

    fn distinct_offsets(&self, roots: &[usize], off: &[IVec], t: &Lattice) -> Vec<IVec> {
        let mut out: Vec<IVec> = Vec::new();
        for &a in roots {
            let r = t.reduce(&off[a]);
            if !out.contains(&r) {
                out.push(r);
            }
        }
        out
    }

    /// B-part shapes shared by the B families and their non-reduced extensions.
    /// Returns `(short sets, long sets, S)` builders as one vector per choice.
    fn b_part(&self, inst: &Instance, off: &[IVec]) -> Result<Vec<(Vec<Option<CosetUnion>>, Option<CosetUnion>)>> {
        use FamilyId::*;
        let n = self.sys.len();
        let short_targets: Vec<IVec> = self.distinct_offsets(&self.short, off, &inst.t);
        let mut outs = Vec::new();
        match inst.family {
            L5_1_1 | NR_P6_5_1 => {
                let targets: Vec<(IVec, &CosetUnion)> = short_targets.iter().map(|o| (o.clone(), &self.ls)).collect();
                for s in self.coset_unions(&self.gls, &self.gll, &targets, |_| true, true)? {
                    let mut y = vec![None; n];
                    for &a in &self.short {
                        y[a] = Some(s.translate(&off[a]));
                    }
                    for &a in &self.long {
                        y[a] = Some(self.ll.clone());
                    }
                    outs.push((y, Some(s)));
                }
            }
            L5_1_2 | NR_P6_5_2 => {
                let h = inst.h.as_ref().expect("H");
                let mut y = vec![None; n];
                for &a in &self.short {
                    y[a] = Some(self.ls.clone());
                }
                for &a in &self.long {
                    y[a] = Some(CosetUnion::coset(&off[a], h.clone()));
                }
                outs.push((y, None));
            }
            L5_1_3 | NR_P6_5_3a | NR_P6_5_3b => {
                let h = inst.h.as_ref().expect("H");
                let targets: Vec<(IVec, &CosetUnion)> = short_targets.iter().map(|o| (o.clone(), &self.ls)).collect();
                let keep = |a: &IVec| h.contains(&vscale(&BigInt::from(2), a));
                for s in self.coset_unions(&self.gls, h, &targets, keep, false)? {
                    let mut y = vec![None; n];
                    for &a in &self.short {
                        y[a] = Some(s.translate(&off[a]));
                    }
                    for &a in &self.long {
                        y[a] = Some(CosetUnion::coset(&off[a], h.clone()));
                    }
                    outs.push((y, Some(s)));
                }
            }
            _ => unreachable!("not a B form"),
        }
        Ok(outs)
    }

    /// All members of an instance for one p-function (and optionally a fixed q).
    fn realize(&self, inst: &Instance, off: &[IVec], q: Option<&IVec>) -> Result<Vec<Realized>> {
        use FamilyId::*;
        let n = self.sys.len();
        for (cls, lam) in [(&self.short, &self.ls), (&self.long, &self.ll)] {
            if !cls.iter().all(|&a| lam.contains(&off[a])) {
                return Ok(Vec::new());
            }
        }
        let mut out = Vec::new();
        match inst.family {
            L4_1_1 => {
                let choices = if self.is_c() {
                    let long_targets = self.distinct_offsets(&self.long, off, &inst.t);
                    let targets: Vec<(IVec, &CosetUnion)> = long_targets.iter().map(|o| (o.clone(), &self.ll)).collect();
                    self.coset_unions(&self.gls, &self.gls.scale_i(2), &targets, |_| true, true)?
                } else {
                    vec![CosetUnion::lattice(inst.h.clone().expect("S"))]
                };
                for s in choices {
                    let mut y = vec![None; n];
                    for &a in &self.short {
                        y[a] = Some(self.ls.clone());
                    }
                    for &a in &self.long {
                        y[a] = Some(s.translate(&off[a]));
                    }
                    out.push(Realized { y, s: Some(s), q: None });
                }
            }
            L4_1_2 | L4_1_3 => {
                let h = inst.h.as_ref().expect("H");
                let mut y = vec![None; n];
                for &a in &self.short {
                    y[a] = Some(CosetUnion::coset(&off[a], h.clone()));
                }
                for &a in &self.long {
                    y[a] = Some(if inst.family == L4_1_2 {
                        self.ll.clone()
                    } else {
                        CosetUnion::coset(&off[a], h.clone()).intersect(&self.ll)?
                    });
                }
                out.push(Realized { y, s: None, q: None });
            }
            L5_1_1 | L5_1_2 | L5_1_3 => {
                for (y, s) in self.b_part(inst, off)? {
                    out.push(Realized { y, s, q: None });
                }
            }
            NR_P6_5_1 | NR_P6_5_3a => {
                let ld = self.ld.as_ref().expect("BC");
                for (mut y, s) in self.b_part(inst, off)? {
                    for &d in &self.div {
                        y[d] = Some(ld.clone());
                    }
                    out.push(Realized { y, s, q: None });
                }
            }
            NR_P6_5_2 => {
                let ld = self.ld.as_ref().expect("BC");
                let h = inst.h.as_ref().expect("H");
                'choice: for (mut y, s) in self.b_part(inst, off)? {
                    for &d in &self.div {
                        let yd = CosetUnion::coset(&off[d], h.clone()).intersect(ld)?;
                        if yd.is_empty() {
                            continue 'choice;
                        }
                        y[d] = Some(yd);
                    }
                    out.push(Realized { y, s, q: None });
                }
            }
            NR_P6_5_3b => {
                let h = inst.h.as_ref().expect("H");
                for (y, s) in self.b_part(inst, off)? {
                    let s = s.expect("S(p)");
                    let qs = match q {
                        Some(q) => vec![q.clone()],
                        None => self.q_candidates(h)?,
                    };
                    for q in qs {
                        if let Some(r) = self.extend_3b(h, off, &y, &s, &q)? {
                            out.push(r);
                        }
                    }
                }
            }
            _ => unreachable!("lift families have no p-function"),
        }
        // the stated hypothesis p_α ∈ Y_α
        out.retain(|r| {
            self.short.iter().chain(&self.long).all(|&a| r.y[a].as_ref().is_some_and(|y| y.contains(&off[a])))
        });
        Ok(out)
    }

    /// Members that satisfy the family hypotheses but sit inside a larger
    /// proper subsystem:
    /// - `S(p)` families with `S + Λ_ℓ = S` (exactly `[Λ_ℓ : H] = 2`): the long
    ///   sets can grow to `Λ_ℓ`;
    /// - `NR_P6_5_2` with `Y_d ≠ Λ_d`: full short sets force `Y_d ⊆ H`, and
    ///   `Φ_B` together with the same `Y_d` is a larger proper subsystem.
    fn known_not_maximal(&self, family: FamilyId, r: &Realized) -> Result<bool> {
        use FamilyId::*;
        match family {
            L5_1_3 | NR_P6_5_3a | NR_P6_5_3b => {
                let s = r.s.as_ref().expect("S(p)");
                Ok(s.minkowski(&CosetUnion::lattice(self.gll.clone()))?.set_eq(s)?)
            }
            NR_P6_5_2 => {
                let ld = self.ld.as_ref().expect("BC");
                for &d in &self.div {
                    match &r.y[d] {
                        Some(y) if y.set_eq(ld)? => {}
                        _ => return Ok(true),
                    }
                }
                Ok(false)
            }
            _ => Ok(false),
        }
    }

    fn q_candidates(&self, h: &Lattice) -> Result<Vec<IVec>> {
        let ld = self.ld.as_ref().expect("BC");
        let tq = h.scale_i(2).intersection(ld.base())?;
        Ok(self.ambient.coset_reps(&tq)?.into_iter().filter(|q| ld.contains(q)).collect())
    }

    /// Divisible part of the last family: `a_n = 2p_{ε_n} − q` shifts the
    /// divisible values, and `Y'` is the largest union of `2H`-cosets in `H`
    /// stable under `2a_n` with every shifted coset inside `Λ_d`.
    fn extend_3b(
        &self,
        h: &Lattice,
        off: &[IVec],
        y: &[Option<CosetUnion>],
        s: &CosetUnion,
        q: &IVec,
    ) -> Result<Option<Realized>> {
        let ld = self.ld.as_ref().expect("BC");
        if !ld.contains(q) {
            return Ok(None);
        }
        let two = BigInt::from(2);
        let en = *self.simple.last().expect("rank ≥ 1");
        let a_n = crate::lattice::vsub(&vscale(&two, &off[en]), q);
        let two_a = vscale(&two, &a_n);
        // the long/divisible relations force a_n ∈ H on top of the short/divisible ones
        if !h.contains(&a_n) || !h.contains(&two_a) || !s.translate(&a_n).subset_of(s)? {
            return Ok(None);
        }
        let last = self.simple.len() - 1;
        let pd: Vec<(usize, IVec)> = self
            .div
            .iter()
            .map(|&d| {
                let k = self.coef[d][last] / 2;
                (d, crate::lattice::vsub(&off[d], &vscale(&BigInt::from(k), &a_n)))
            })
            .collect();
        let two_h = h.scale_i(2);
        let mut allowed = Vec::new();
        'reps: for b in h.coset_reps(&two_h)? {
            for (_, p) in &pd {
                if !CosetUnion::coset(&vadd(p, &b), two_h.clone()).subset_of(ld)? {
                    continue 'reps;
                }
            }
            allowed.push(b);
        }
        let mut bset = CosetUnion::new(&allowed, two_h.clone())?;
        loop {
            let next = bset.intersect(&bset.translate(&vneg(&two_a)))?;
            if next.set_eq(&bset)? {
                break;
            }
            bset = next;
        }
        if !bset.contains_zero() {
            return Ok(None);
        }
        let mut y = y.to_vec();
        for (d, p) in &pd {
            y[*d] = Some(bset.translate(p));
        }
        Ok(Some(Realized { y, s: Some(s.clone()), q: Some(q.clone()) }))
    }

    /// One-coset removal sets: `Λ_s ∖ (c + Λ_ℓ)` or `Λ_d ∖ (c + 2Λ_ℓ)`.
    fn removal_sets(&self, family: FamilyId) -> Result<Vec<CosetUnion>> {
        let (set, base) = match family {
            FamilyId::NR_PhiC_ext => (&self.ls, self.gll.clone()),
            FamilyId::NR_PhiB_ext => (self.ld.as_ref().expect("BC"), self.gll.scale_i(2)),
            _ => unreachable!(),
        };
        let fine = set.rebase(&base.intersection(set.base())?)?;
        let coarse: Vec<IVec> = {
            let mut v: Vec<IVec> = Vec::new();
            for r in fine.reps() {
                let c = base.reduce(r);
                if !v.contains(&c) {
                    v.push(c);
                }
            }
            v
        };
        let mut out = Vec::new();
        for c in &coarse {
            if family == FamilyId::NR_PhiC_ext && base.contains(c) {
                continue;
            }
            let neg = base.reduce(&vneg(c));
            let removed = CosetUnion::new(&[c.clone(), neg], base.clone())?;
            let rest = set.difference(&removed)?;
            if !rest.is_empty() && !out.iter().any(|o: &CosetUnion| o.set_eq(&rest).unwrap_or(false)) {
                out.push(rest.normalized());
            }
        }
        Ok(out)
    }

    fn removal_spec(&self, family: FamilyId, set: &CosetUnion) -> Vec<Option<CosetUnion>> {
        let cls = if family == FamilyId::NR_PhiC_ext { LengthClass::Short } else { LengthClass::Divisible };
        (0..self.sys.len())
            .map(|i| Some(if self.sys.class(i) == cls { set.clone() } else { self.ars.lambda(i).clone() }))
            .collect()
    }

    fn check_removal(&self, family: FamilyId) -> std::result::Result<(), String> {
        match family {
            FamilyId::NR_PhiC_ext => {
                if self.ls.set_eq(&self.ll).map_err(|e| e.to_string())? {
                    return Err("Λ_ℓ = Λ_s".into());
                }
            }
            _ => {
                let ld = self.ld.as_ref().expect("BC");
                let two = self.gll.scale_i(2);
                let fine = ld.rebase(&two.intersection(ld.base()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
                let mut seen: Vec<IVec> = Vec::new();
                for r in fine.reps() {
                    let c = two.reduce(r);
                    if !seen.contains(&c) {
                        seen.push(c);
                    }
                }
                if seen.len() < 2 {
                    return Err("Λ_d is a single coset of 2Λ_ℓ".into());
                }
            }
        }
        Ok(())
    }

    fn candidate_sublattices(&self, family: FamilyId, primes: &[u64]) -> Result<Vec<Option<Lattice>>> {
        use FamilyId::*;
        let mut out = Vec::new();
        match family {
            L4_1_1 if self.is_c() => out.push(None),
            L4_1_1 => {
                if self.m > 1 && is_prime(self.m as u64) {
                    for h in self.gll.maximal_sublattices(self.m as u64)? {
                        out.push(Some(h));
                    }
                }
            }
            L4_1_2 | L4_1_3 => {
                for &p in primes {
                    out.extend(self.gls.maximal_sublattices(p)?.into_iter().map(Some));
                }
            }
            L5_1_1 | NR_P6_5_1 => out.push(None),
            _ => {
                for &p in primes {
                    out.extend(self.gll.maximal_sublattices(p)?.into_iter().map(Some));
                }
            }
        }
        Ok(out)
    }
}

fn family_params(spec: SubsystemSpec, h: Option<&Lattice>, r: &Realized, p: Option<&[IVec]>) -> SubsystemSpec {
    let mut spec = spec;
    if let Some(h) = h {
        spec = spec.with_param("H", h);
    }
    if let Some(s) = &r.s {
        spec = spec.with_param("S", s.normalized());
    }
    if let Some(p) = p {
        spec = spec.with_param("p", fmt_vecs(p));
    }
    if let Some(q) = &r.q {
        spec = spec.with_param("q", fmt_vec(q));
    }
    spec
}

fn check_subsystem(ars: &AffineReflectionSystem, family: FamilyId, spec: &SubsystemSpec) -> Result<()> {
    match subsystem_violation(ars, spec)? {
        None => Ok(()),
        Some((beta, alpha)) => Err(ClassifyError::NotSubsystem { family, beta, alpha }),
    }
}

/// Builds one member of a family, checking its hypotheses.
pub fn construct(ars: &AffineReflectionSystem, family: FamilyId, params: &FamilyParams) -> Result<SubsystemSpec> {
    use FamilyId::*;
    let ctx = Ctx::new(ars)?;
    let pre = |reason: String| ClassifyError::Precondition { family, reason };
    let spec = match family {
        _ if family.is_lift() => {
            if family.is_non_reduced() != ctx.is_bc() {
                return Err(pre("wrong gradient type".into()));
            }
            let g = match (family, &params.gradient, &params.j) {
                (_, Some(g), _) => g.clone(),
                (NR_AJ, None, Some(j)) => {
                    if j.is_empty() || j.len() >= ctx.t.rank || j.iter().any(|&k| k >= ctx.t.rank) {
                        return Err(pre("J must be a nonempty proper subset of the coordinates".into()));
                    }
                    ctx.sys.bc_split(0, j)
                }
                (NR_PhiC, None, _) => ctx.sys.bc_a_j(0, &[]),
                (NR_BI, None, _) => ctx.sys.bc_b_i(0),
                _ => return Err(ClassifyError::MissingParam { family, name: "gradient" }),
            };
            if !ctx.sys.finite_maximal_subsystems()?.contains(&g) {
                return Err(pre("the finite subsystem is not maximal".into()));
            }
            let found = ctx.lift_family(&g).map_err(pre)?;
            if found != family {
                return Err(pre(format!("this finite subsystem lifts to {found}")));
            }
            let mut spec = SubsystemSpec::lift(ars, &g, family.as_str());
            if let Some(j) = &params.j {
                spec = spec.with_param("J", format!("{j:?}"));
            }
            spec
        }
        NR_PhiC_ext | NR_PhiB_ext => {
            if !ctx.is_bc() {
                return Err(pre("needs a BC gradient".into()));
            }
            ctx.check_removal(family).map_err(pre)?;
            let cands = ctx.removal_sets(family)?;
            let set = match &params.y {
                Some(y) => cands
                    .iter()
                    .find(|c| c.set_eq(y).unwrap_or(false))
                    .cloned()
                    .ok_or_else(|| pre("Y is not a one-coset removal".into()))?,
                None if cands.len() == 1 => cands[0].clone(),
                None => return Err(ClassifyError::MissingParam { family, name: "y" }),
            };
            SubsystemSpec::new(family.as_str(), ctx.removal_spec(family, &set)).with_param("Y", &set)
        }
        _ => {
            let inst = ctx.instance(family, params.h.as_ref()).map_err(pre)?;
            let p = params.p.as_ref().ok_or(ClassifyError::MissingParam { family, name: "p" })?;
            if p.len() != ctx.simple.len() || p.iter().any(|v| v.len() != ars.nullity()) {
                return Err(pre(format!("p needs {} values of length {}", ctx.simple.len(), ars.nullity())));
            }
            if family == NR_P6_5_3b && params.q.is_none() {
                return Err(ClassifyError::MissingParam { family, name: "q" });
            }
            let off = ctx.offsets(p);
            let mut rs = ctx.realize(&inst, &off, params.q.as_ref())?;
            if rs.is_empty() {
                return Err(pre("no member for this p-function (some p_α ∉ Y_α or Λ_α)".into()));
            }
            let r = match &params.s {
                Some(s) => {
                    let i = rs
                        .iter()
                        .position(|r| r.s.as_ref().is_some_and(|x| x.set_eq(s).unwrap_or(false)))
                        .ok_or_else(|| pre("S is not a maximal choice for this p-function".into()))?;
                    rs.swap_remove(i)
                }
                None if rs.len() == 1 => rs.pop().expect("one"),
                None => return Err(ClassifyError::MissingParam { family, name: "s" }),
            };
            family_params(SubsystemSpec::new(family.as_str(), r.y.clone()), inst.h.as_ref(), &r, Some(p))
        }
    };
    check_subsystem(ars, family, &spec)?;
    Ok(spec)
}

/// Collects specs, merging tags of equal sets.
#[derive(Default)]
struct Collector {
    specs: Vec<SubsystemSpec>,
    index: HashMap<Vec<Option<CosetUnion>>, usize>,
    first: Vec<FamilyId>,
}

impl Collector {
    fn push(&mut self, family: FamilyId, spec: SubsystemSpec) {
        match self.index.get(&spec.y) {
            Some(&i) => {
                let s = &mut self.specs[i];
                if s.family != family.as_str() && !s.also.iter().any(|a| a == family.as_str()) {
                    s.also.push(family.as_str().to_string());
                }
            }
            None => {
                self.index.insert(spec.y.clone(), self.specs.len());
                self.specs.push(spec);
                self.first.push(family);
            }
        }
    }
}

fn enumerate_irreducible(ars: &AffineReflectionSystem, prime_bound: u64, p_value_bound: usize) -> Result<Vec<SubsystemSpec>> {
    use FamilyId::*;
    let ctx = Ctx::new(ars)?;
    let primes = ctx.primes(prime_bound);
    let mut col = Collector::default();

    for g in ctx.sys.finite_maximal_subsystems()? {
        if let Ok(f) = ctx.lift_family(&g) {
            col.push(f, SubsystemSpec::lift(ars, &g, f.as_str()));
        }
    }
    if ctx.is_bc() {
        for f in [NR_PhiC_ext, NR_PhiB_ext] {
            if ctx.check_removal(f).is_ok() {
                for set in ctx.removal_sets(f)? {
                    col.push(f, SubsystemSpec::new(f.as_str(), ctx.removal_spec(f, &set)).with_param("Y", &set));
                }
            }
        }
    }

    let families: &[FamilyId] = if ctx.is_bc() {
        &[NR_P6_5_1, NR_P6_5_2, NR_P6_5_3a, NR_P6_5_3b]
    } else if ctx.is_b() {
        &[L5_1_1, L5_1_2, L5_1_3]
    } else {
        &[L4_1_1, L4_1_2, L4_1_3]
    };
    let r = ctx.simple.len();
    for &family in families {
        for h in ctx.candidate_sublattices(family, &primes)? {
            let Ok(inst) = ctx.instance(family, h.as_ref()) else { continue };
            let reps = ctx.ambient.coset_reps(&inst.t)?;
            let total = (reps.len() as u128).checked_pow(r as u32).unwrap_or(u128::MAX);
            if total > p_value_bound as u128 {
                return Err(ClassifyError::TooManyTuples { family, count: total.to_string(), bound: p_value_bound });
            }
            let mut digits = vec![0usize; r];
            loop {
                let p: Vec<IVec> = digits.iter().map(|&d| reps[d].clone()).collect();
                let off = ctx.offsets(&p);
                for real in ctx.realize(&inst, &off, None)? {
                    if ctx.known_not_maximal(family, &real)? {
                        continue;
                    }
                    let spec = SubsystemSpec::new(family.as_str(), real.y.clone());
                    col.push(family, family_params(spec, inst.h.as_ref(), &real, Some(&p)));
                }
                let mut k = 0;
                while k < r {
                    digits[k] += 1;
                    if digits[k] < reps.len() {
                        break;
                    }
                    digits[k] = 0;
                    k += 1;
                }
                if k == r {
                    break;
                }
            }
        }
    }
    for (spec, &f) in col.specs.iter().zip(&col.first) {
        check_subsystem(ars, f, spec)?;
    }
    let mut keep = Vec::with_capacity(col.specs.len());
    for (i, spec) in col.specs.iter().enumerate() {
        let mut inside = false;
        for (j, other) in col.specs.iter().enumerate() {
            if i != j && spec.gradient().is_subset(&other.gradient()) && spec.is_contained_in(other)? {
                inside = true;
                break;
            }
        }
        if !inside {
            keep.push(spec.clone());
        }
    }
    Ok(keep)
}

/// Maximal subsystems of a type A1 system, from the oracle.
fn enumerate_a1(ars: &AffineReflectionSystem, prime_bound: u64) -> Result<Vec<SubsystemSpec>> {
    let extras = oracle::refinement_lattices(ars, prime_bound)?;
    let model = QuotientModel::build(ars, &extras, oracle::budget())?;
    model.enumerate_maximal()?.iter().map(|s| Ok(model.to_spec(s, "adhoc")?)).collect()
}

/// Every maximal subsystem the family descriptions produce, with sublattices of
/// prime index at most `prime_bound` (plus the primes dividing `2m`).
///
/// For a product gradient a maximal subsystem is maximal in one component and
/// full in the others; type A1 components are enumerated by the oracle.
///
/// Some family members satisfy the hypotheses but are not maximal: the `S(p)`
/// members with `[Λ_ℓ : H] = 2` (the long sets can grow to `Λ_ℓ`) and the
/// `NR_P6_5_2` members with `Y_d ≠ Λ_d`. They are left out here and still
/// available from [`construct`]. Any member strictly inside another one is
/// dropped as well (at rank 2 a split lift of BC can lack long roots and fall
/// inside a full-gradient member).
pub fn enumerate_maximal(ars: &AffineReflectionSystem, prime_bound: u64) -> Result<Vec<SubsystemSpec>> {
    enumerate_maximal_with(ars, prime_bound, DEFAULT_P_VALUE_BOUND)
}

pub fn enumerate_maximal_with(
    ars: &AffineReflectionSystem,
    prime_bound: u64,
    p_value_bound: usize,
) -> Result<Vec<SubsystemSpec>> {
    if prime_bound < 2 {
        return Err(ClassifyError::BadBound(prime_bound));
    }
    let sys = ars.gradient();
    let comps = sys.components();
    let single = |ars: &AffineReflectionSystem, t: RootSystemType| {
        if t.family == Family::A && t.rank == 1 {
            enumerate_a1(ars, prime_bound)
        } else {
            enumerate_irreducible(ars, prime_bound, p_value_bound)
        }
    };
    if comps.len() == 1 {
        return single(ars, comps[0]);
    }
    let mut out = Vec::new();
    for (c, &t) in comps.iter().enumerate() {
        let sub = AffineReflectionSystem::irreducible(t, ars.datum(c).clone())?;
        let off = sys.component_offset(c);
        let map: Vec<usize> = sub
            .gradient()
            .roots()
            .iter()
            .map(|r| {
                let mut v = vec![0i64; sys.dim()];
                v[off..off + r.coords.len()].copy_from_slice(&r.coords);
                sys.index_of(&v).expect("component root embeds")
            })
            .collect();
        for spec in single(&sub, t)? {
            let mut y: Vec<Option<CosetUnion>> =
                (0..sys.len()).map(|i| (sys.component(i) != c).then(|| ars.lambda(i).clone())).collect();
            for (i, yi) in spec.y.iter().enumerate() {
                y[map[i]] = yi.clone();
            }
            let mut lifted = SubsystemSpec::new(spec.family.clone(), y);
            lifted.also = spec.also.clone();
            lifted.params = spec.params.clone();
            lifted.params.insert("component".into(), c.to_string());
            out.push(lifted);
        }
    }
    Ok(out)
}

/// Family tags of a spec that name one of the known families.
pub fn spec_families(spec: &SubsystemSpec) -> Vec<FamilyId> {
    spec.tags().iter().filter_map(|t| t.parse().ok()).collect()
}

/// Outcome of the oracle maximality check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MaximalityVerdict {
    /// Maximal among subsystems periodic modulo the given lattice.
    Verified { modulus: String },
    /// The model would exceed the budget.
    Undecided { reason: String },
    NotMaximal,
}

impl MaximalityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaximalityVerdict::Verified { .. } => "verified",
            MaximalityVerdict::Undecided { .. } => "undecided",
            MaximalityVerdict::NotMaximal => "false",
        }
    }
}

/// Checks maximality in a finite model fine enough to see every translation set of `spec`.
pub fn is_maximal(ars: &AffineReflectionSystem, spec: &SubsystemSpec, budget: usize) -> Result<MaximalityVerdict> {
    let extras: Vec<Lattice> = spec.y.iter().flatten().map(|y| y.stabilizer()).collect();
    let model = match QuotientModel::build(ars, &extras, budget) {
        Ok(m) => m,
        Err(OracleError::BudgetExceeded { size, budget }) => {
            return Ok(MaximalityVerdict::Undecided { reason: format!("quotient of order {size} exceeds {budget}") })
        }
        Err(e) => return Err(e.into()),
    };
    let image = model.image(spec)?;
    Ok(match model.is_maximal(&image)? {
        Maximality::Maximal => MaximalityVerdict::Verified { modulus: model.modulus().to_string() },
        _ => MaximalityVerdict::NotMaximal,
    })
}

/// A pair of roots whose sum leaves the subsystem: `(Y_a + Y_b) ∩ Λ_c ⊄ Y_c` with `c = a + b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosureWitness {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    /// Translations of `c` reached by sums but missing from `Y_c`.
    pub excess: CosetUnion,
}

/// Closedness under addition of real roots; `None` when closed.
pub fn is_closed(ars: &AffineReflectionSystem, spec: &SubsystemSpec) -> Result<Option<ClosureWitness>> {
    let sys = ars.gradient();
    let g = spec.gradient().to_vec();
    for &a in &g {
        for &b in &g {
            let Some(c) = sys.sum(a, b) else { continue };
            let ya = spec.y[a].as_ref().expect("in gradient");
            let yb = spec.y[b].as_ref().expect("in gradient");
            let reached = ya.minkowski(yb)?.intersect(ars.lambda(c))?;
            let excess = match &spec.y[c] {
                Some(yc) => reached.difference(yc)?,
                None => reached,
            };
            if !excess.is_empty() {
                return Ok(Some(ClosureWitness { a, b, c, excess: excess.normalized() }));
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DualClosure {
    Both,
    ClosedHere,
    ClosedInDual,
    Neither,
}

impl DualClosure {
    pub fn holds(&self) -> bool {
        *self != DualClosure::Neither
    }
    pub fn as_str(&self) -> &'static str {
        match self {
            DualClosure::Both => "both",
            DualClosure::ClosedHere => "closed",
            DualClosure::ClosedInDual => "dual_closed",
            DualClosure::Neither => "neither",
        }
    }
}

/// Whether `Ψ` or `Ψ∨` is closed (reduced gradients only).
pub fn closed_or_dual_closed(ars: &AffineReflectionSystem, spec: &SubsystemSpec) -> Result<DualClosure> {
    let here = is_closed(ars, spec)?.is_none();
    let (dual, dspec) = dual_spec(ars, spec)?;
    let there = is_closed(&dual, &dspec)?.is_none();
    Ok(match (here, there) {
        (true, true) => DualClosure::Both,
        (true, false) => DualClosure::ClosedHere,
        (false, true) => DualClosure::ClosedInDual,
        (false, false) => DualClosure::Neither,
    })
}

/// Whether the gradient of `ars` is a single type C component.
pub fn is_type_c(ars: &AffineReflectionSystem) -> bool {
    ars.gradient().irreducible_type().is_some_and(|t| t.family == Family::C)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ars::ExtensionDatum;
    use crate::lattice::ivec;

    fn lat(rows: &[&[i64]]) -> Lattice {
        Lattice::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn family_tags_round_trip() {
        for f in FamilyId::ALL {
            assert_eq!(f.as_str().parse::<FamilyId>().unwrap(), f);
        }
        assert!("L9".parse::<FamilyId>().is_err());
    }

    #[test]
    fn coefficients_match_coordinates() {
        for t in ["B3", "C3", "G2", "BC2", "F4"] {
            let sys = FiniteRootSystem::parse(t).unwrap();
            let simple = simple_roots(&sys).unwrap();
            let coef = Ctx::coefficients(&sys, &simple);
            for (i, c) in coef.iter().enumerate() {
                let mut v = vec![0i64; sys.dim()];
                for (k, &s) in simple.iter().enumerate() {
                    for (x, y) in v.iter_mut().zip(&sys.root(s).coords) {
                        *x += c[k] * y;
                    }
                }
                assert_eq!(v, sys.root(i).coords, "{t} root {i}");
            }
        }
    }

    #[test]
    fn g2_l4_1_1_needs_lambda_ell_different_from_three_lambda_s() {
        let t: RootSystemType = "G2".parse().unwrap();
        let z = Lattice::standard(1);
        let ars = AffineReflectionSystem::irreducible(t, ExtensionDatum::uniform(z.clone())).unwrap();
        let spec = construct(&ars, FamilyId::L4_1_1, &FamilyParams::default().with_h(lat(&[&[3]])).with_p(vec![ivec(&[0]); 2]))
            .unwrap();
        assert!(crate::ars::is_subsystem(&ars, &spec).unwrap());
        let d = ExtensionDatum::new(CosetUnion::lattice(z), CosetUnion::lattice(lat(&[&[3]])), None);
        let ars = AffineReflectionSystem::irreducible(t, d).unwrap();
        let err = construct(&ars, FamilyId::L4_1_1, &FamilyParams::default().with_h(lat(&[&[9]])));
        assert!(matches!(err, Err(ClassifyError::Precondition { .. })));
    }
}
