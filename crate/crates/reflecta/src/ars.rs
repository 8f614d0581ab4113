//! Extension data, affine reflection systems and root subsystems described
//! by their translation sets.
//!
//! A real root is written `α ⊕ λ` with `α` a finite root and `λ ∈ Λ_α`, where
//! `Λ_α` depends only on the length class of `α` (and on its irreducible
//! component for products). A subsystem is stored as one translation set
//! `Y_α` per finite root, empty for roots outside its gradient.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitset::BitSet;
use crate::lattice::{
    vec_from_json, vec_to_json, vscale, vsub, CosetUnion, CosetUnionJson, IVec, JsonInt, Lattice, LatticeError,
    LatticeJson,
};
use crate::rootsys::{extend_p, Family, FiniteRootSystem, LengthClass, PFunction, RootSystemError, RootSystemType};

pub const SCHEMA: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArsError {
    #[error("invalid extension datum: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidDatum(Vec<Violation>),
    #[error("expected {expected} extension data (one per component), found {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error("duality is not defined for non-reduced gradients")]
    NonReduced,
    #[error("malformed subsystem description: {0}")]
    Malformed(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    RootSystem(#[from] RootSystemError),
}

pub type Result<T> = std::result::Result<T, ArsError>;

/// A named relation that an extension datum fails.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub component: usize,
    pub relation: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "component {}: {}", self.component, self.relation)
    }
}

/// Translation sets attached to the length classes of one irreducible gradient.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExtensionDatum {
    pub nullity: usize,
    pub lambda0: Lattice,
    pub lambda_s: CosetUnion,
    pub lambda_ell: CosetUnion,
    pub lambda_d: Option<CosetUnion>,
}

impl ExtensionDatum {
    /// Builds a datum; `Λ_0` defaults to the lattice generated by all the sets.
    pub fn new(lambda_s: CosetUnion, lambda_ell: CosetUnion, lambda_d: Option<CosetUnion>) -> Self {
        let nullity = lambda_s.dim();
        let mut gens: Vec<IVec> = Vec::new();
        for cu in [Some(&lambda_s), Some(&lambda_ell), lambda_d.as_ref()].into_iter().flatten() {
            gens.extend(cu.generated().rows().iter().cloned());
        }
        let lambda0 = Lattice::from_gens(nullity, gens);
        ExtensionDatum {
            nullity,
            lambda0,
            lambda_s: lambda_s.normalized(),
            lambda_ell: lambda_ell.normalized(),
            lambda_d: lambda_d.map(|d| d.normalized()),
        }
    }

    /// Datum with every set equal to the given lattice (divisible set `2L + ...` handled by caller).
    pub fn uniform(l: Lattice) -> Self {
        let cu = CosetUnion::lattice(l);
        Self::new(cu.clone(), cu, None)
    }

    pub fn get(&self, class: LengthClass) -> &CosetUnion {
        match class {
            LengthClass::Short => &self.lambda_s,
            LengthClass::Long => &self.lambda_ell,
            LengthClass::Divisible => self.lambda_d.as_ref().expect("divisible roots only occur with a divisible set"),
        }
    }

    pub fn scale(&self, c: i64) -> Self {
        ExtensionDatum {
            nullity: self.nullity,
            lambda0: self.lambda0.scale_i(c),
            lambda_s: self.lambda_s.scale_i(c).normalized(),
            lambda_ell: self.lambda_ell.scale_i(c).normalized(),
            lambda_d: self.lambda_d.as_ref().map(|d| d.scale_i(c).normalized()),
        }
    }

    /// All base lattices appearing in the datum.
    pub fn bases(&self) -> Vec<Lattice> {
        [Some(&self.lambda_s), Some(&self.lambda_ell), self.lambda_d.as_ref()]
            .into_iter()
            .flatten()
            .map(|c| c.base().clone())
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionDatumJson {
    /// Optional on input: inferred from the set dimension.
    #[serde(default)]
    pub nullity: Option<usize>,
    /// Optional on input: defaults to the lattice generated by the sets.
    #[serde(default)]
    pub lambda0: Option<LatticeJson>,
    pub lambda_s: CosetUnionJson,
    pub lambda_ell: CosetUnionJson,
    pub lambda_d: Option<CosetUnionJson>,
}

impl From<&ExtensionDatum> for ExtensionDatumJson {
    fn from(d: &ExtensionDatum) -> Self {
        ExtensionDatumJson {
            nullity: Some(d.nullity),
            lambda0: Some((&d.lambda0).into()),
            lambda_s: (&d.lambda_s).into(),
            lambda_ell: (&d.lambda_ell).into(),
            lambda_d: d.lambda_d.as_ref().map(Into::into),
        }
    }
}

impl ExtensionDatumJson {
    pub fn to_datum(&self) -> std::result::Result<ExtensionDatum, String> {
        let s = self.lambda_s.to_coset_union()?;
        let l = self.lambda_ell.to_coset_union()?;
        let d = self.lambda_d.as_ref().map(|d| d.to_coset_union()).transpose()?;
        let mut datum = ExtensionDatum::new(s, l, d);
        if let Some(l0) = &self.lambda0 {
            let lambda0 = l0.to_lattice()?;
            if lambda0.dim() != datum.nullity {
                return Err(format!("lambda0 has dimension {}, expected {}", lambda0.dim(), datum.nullity));
            }
            datum.lambda0 = lambda0;
        }
        if let Some(k) = self.nullity.filter(|&k| k != datum.nullity) {
            return Err(format!("nullity {k} disagrees with set dimension {}", datum.nullity));
        }
        Ok(datum)
    }
}

impl Serialize for ExtensionDatum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ExtensionDatumJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExtensionDatum {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ExtensionDatumJson::deserialize(d)?.to_datum().map_err(serde::de::Error::custom)
    }
}

fn rel_name(b: LengthClass, c: i64, a: LengthClass, t: LengthClass) -> String {
    let k = c.abs();
    let coef = if k == 1 { String::new() } else { k.to_string() };
    format!("Λ_{} + {}Λ_{} ⊆ Λ_{}", b.symbol(), coef, a.symbol(), t.symbol())
}

/// Every relation an extension datum must satisfy on one component of `gradient`,
/// returned as the list of those that fail.
pub fn validate_datum(gradient: &FiniteRootSystem, component: usize, datum: &ExtensionDatum) -> Vec<Violation> {
    let t = gradient.components()[component];
    let mut bad: Vec<String> = Vec::new();
    let k = datum.nullity;
    let sets: Vec<&CosetUnion> =
        [Some(&datum.lambda_s), Some(&datum.lambda_ell), datum.lambda_d.as_ref()].into_iter().flatten().collect();
    if sets.iter().any(|s| s.dim() != k) || datum.lambda0.dim() != k {
        bad.push(format!("all sets lie in Z^{k}"));
        return bad.into_iter().map(|relation| Violation { component, relation }).collect();
    }
    if datum.lambda_d.is_some() != (t.family == Family::BC) {
        bad.push("Λ_d is present exactly for the non-reduced family".into());
        return bad.into_iter().map(|relation| Violation { component, relation }).collect();
    }
    let zero = vec![BigInt::zero(); k];
    if !datum.lambda_s.contains(&zero) {
        bad.push("0 ∈ Λ_s".into());
    }
    if !datum.lambda_ell.contains(&zero) {
        bad.push("0 ∈ Λ_ℓ".into());
    }
    if let Some(d) = &datum.lambda_d {
        if d.is_empty() {
            bad.push("Λ_d ≠ ∅".into());
        }
    }
    for (name, set) in [("s", Some(&datum.lambda_s)), ("ℓ", Some(&datum.lambda_ell)), ("d", datum.lambda_d.as_ref())] {
        if let Some(set) = set {
            if set.negate().normalized() != set.normalized() {
                bad.push(format!("Λ_{name} = −Λ_{name}"));
            }
        }
    }
    if t.is_simply_laced() && datum.lambda_ell.normalized() != datum.lambda_s.normalized() {
        bad.push("Λ_ℓ = Λ_s (single root length)".into());
    }
    // Λ_β − ⟨β,α∨⟩Λ_α ⊆ Λ_{s_α β}, one check per class pattern
    let roots: Vec<usize> = (0..gradient.len()).filter(|&i| gradient.component(i) == component).collect();
    let mut seen: HashSet<(LengthClass, i64, LengthClass, LengthClass)> = HashSet::new();
    let mut failed: HashSet<String> = HashSet::new();
    for &a in &roots {
        for &b in &roots {
            let c = gradient.pairing(b, a);
            if c == 0 {
                continue;
            }
            let tg = gradient.reflect(a, b);
            let key = (gradient.class(b), c, gradient.class(a), gradient.class(tg));
            if !seen.insert(key) {
                continue;
            }
            let lb = datum.get(key.0);
            let la = datum.get(key.2);
            let lt = datum.get(key.3);
            let ok = lb
                .minkowski(&la.scale_i(-c))
                .and_then(|x| x.subset_of(lt))
                .unwrap_or(false);
            if !ok {
                let name = rel_name(key.0, c, key.2, key.3);
                if failed.insert(name.clone()) {
                    bad.push(name);
                }
            }
        }
    }
    if t.rank == 2 && matches!(t.family, Family::B | Family::BC) && !datum.lambda_ell.is_group().unwrap_or(false) {
        bad.push(format!("Λ_ℓ is a group for gradient {t}"));
    }
    let mut gens: Vec<IVec> = Vec::new();
    for s in &sets {
        gens.extend(s.generated().rows().iter().cloned());
    }
    if Lattice::from_gens(k, gens).rank() != k {
        bad.push(format!("the sets span Z^{k} up to finite index"));
    }
    bad.into_iter().map(|relation| Violation { component, relation }).collect()
}

/// A real root `α ⊕ λ`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineRoot {
    pub root: usize,
    pub translation: IVec,
}

/// An affine reflection system: a finite gradient plus one extension datum per component.
#[derive(Clone, Debug)]
pub struct AffineReflectionSystem {
    gradient: FiniteRootSystem,
    data: Vec<ExtensionDatum>,
}

impl AffineReflectionSystem {
    pub fn new(gradient: FiniteRootSystem, data: Vec<ExtensionDatum>) -> Result<Self> {
        let expected = gradient.components().len();
        if data.len() != expected {
            return Err(ArsError::ComponentCount { expected, found: data.len() });
        }
        let mut bad = Vec::new();
        for (c, d) in data.iter().enumerate() {
            bad.extend(validate_datum(&gradient, c, d));
        }
        let k = data[0].nullity;
        if data.iter().any(|d| d.nullity != k) {
            bad.push(Violation { component: 0, relation: "all components share the nullity".into() });
        }
        if !bad.is_empty() {
            return Err(ArsError::InvalidDatum(bad));
        }
        Ok(AffineReflectionSystem { gradient, data })
    }

    pub fn irreducible(t: RootSystemType, datum: ExtensionDatum) -> Result<Self> {
        Self::new(FiniteRootSystem::build(t), vec![datum])
    }

    pub fn gradient(&self) -> &FiniteRootSystem {
        &self.gradient
    }

    pub fn data(&self) -> &[ExtensionDatum] {
        &self.data
    }

    pub fn datum(&self, component: usize) -> &ExtensionDatum {
        &self.data[component]
    }

    pub fn nullity(&self) -> usize {
        self.data[0].nullity
    }

    /// `Λ_α` for a finite root index.
    pub fn lambda(&self, root: usize) -> &CosetUnion {
        self.data[self.gradient.component(root)].get(self.gradient.class(root))
    }

    pub fn is_reduced(&self) -> bool {
        self.gradient.is_reduced()
    }

    pub fn contains(&self, r: &AffineRoot) -> bool {
        r.root < self.gradient.len() && self.lambda(r.root).contains(&r.translation)
    }

    /// `s_{α⊕λ}(β⊕μ) = s_α β ⊕ (μ − ⟨β,α∨⟩λ)`.
    pub fn reflect_affine(&self, a: &AffineRoot, b: &AffineRoot) -> AffineRoot {
        let c = self.gradient.pairing(b.root, a.root);
        AffineRoot {
            root: self.gradient.reflect(a.root, b.root),
            translation: vsub(&b.translation, &vscale(&BigInt::from(c), &a.translation)),
        }
    }

    /// The dual system and the root map `α ↦ α∨`; short sets become `Λ_ℓ`, long sets `m·Λ_s`.
    pub fn dual(&self) -> Result<(AffineReflectionSystem, Vec<usize>)> {
        if !self.is_reduced() {
            return Err(ArsError::NonReduced);
        }
        let (g, map) = self.gradient.dual()?;
        let data = self
            .data
            .iter()
            .zip(self.gradient.components())
            .map(|(d, t)| {
                let m = t.lacing();
                if m == 1 {
                    d.clone()
                } else {
                    let mut nd = ExtensionDatum::new(d.lambda_ell.clone(), d.lambda_s.scale_i(m), None);
                    nd.lambda0 = d.lambda0.clone();
                    nd
                }
            })
            .collect();
        Ok((AffineReflectionSystem::new(g, data)?, map))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": SCHEMA,
            "gradient": self.gradient.components().iter().map(|t| t.to_string()).collect::<Vec<_>>().join("x"),
            "data": self.data,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let g = v
            .get("gradient")
            .and_then(|g| g.as_str())
            .ok_or_else(|| ArsError::Malformed("missing \"gradient\"".into()))?;
        let gradient = FiniteRootSystem::parse(g)?;
        let data: Vec<ExtensionDatum> = match (v.get("data"), v.get("datum")) {
            (Some(d), _) => serde_json::from_value(d.clone()).map_err(|e| ArsError::Malformed(e.to_string()))?,
            (None, Some(d)) => vec![serde_json::from_value(d.clone()).map_err(|e| ArsError::Malformed(e.to_string()))?],
            _ => return Err(ArsError::Malformed("missing \"data\"".into())),
        };
        Self::new(gradient, data)
    }
}

/// How far a subsystem has been checked.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Certification {
    Unchecked,
    Subsystem,
    /// Maximal among subsystems periodic modulo the given lattice (printed in HNF).
    VerifiedAtModulus { modulus: String },
    NotMaximal,
}

/// A root subsystem: one translation set per finite root (`None` off the gradient).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemSpec {
    pub family: String,
    pub also: Vec<String>,
    pub params: BTreeMap<String, String>,
    pub y: Vec<Option<CosetUnion>>,
}

impl SubsystemSpec {
    /// Builds a spec from per-root sets, normalizing them so that equality is set equality.
    pub fn new(family: impl Into<String>, y: Vec<Option<CosetUnion>>) -> Self {
        SubsystemSpec {
            family: family.into(),
            also: Vec::new(),
            params: BTreeMap::new(),
            y: y.into_iter().map(|c| c.filter(|c| !c.is_empty()).map(|c| c.normalized())).collect(),
        }
    }

    pub fn with_param(mut self, k: &str, v: impl fmt::Display) -> Self {
        self.params.insert(k.to_string(), v.to_string());
        self
    }

    /// The whole system.
    pub fn full(ars: &AffineReflectionSystem) -> Self {
        Self::lift(ars, &ars.gradient.full(), "FULL")
    }

    /// `Ĝ`: every root over a finite subsystem `g` with all translations.
    pub fn lift(ars: &AffineReflectionSystem, g: &BitSet, family: &str) -> Self {
        let y = (0..ars.gradient.len()).map(|i| g.contains(i).then(|| ars.lambda(i).clone())).collect();
        Self::new(family, y)
    }

    pub fn tags(&self) -> Vec<&str> {
        std::iter::once(self.family.as_str()).chain(self.also.iter().map(String::as_str)).collect()
    }

    pub fn has_tag(&self, t: &str) -> bool {
        self.family == t || self.also.iter().any(|a| a == t)
    }

    /// Same set of affine roots.
    pub fn same_roots(&self, other: &SubsystemSpec) -> bool {
        self.y == other.y
    }

    pub fn gradient(&self) -> BitSet {
        BitSet::from_indices(self.y.len(), (0..self.y.len()).filter(|&i| self.y[i].is_some()))
    }

    pub fn membership(&self, r: &AffineRoot) -> bool {
        self.y.get(r.root).and_then(|y| y.as_ref()).map(|y| y.contains(&r.translation)).unwrap_or(false)
    }

    /// `Y_α ⊆ Y'_α` for every root.
    pub fn is_contained_in(&self, other: &SubsystemSpec) -> Result<bool> {
        for (a, b) in self.y.iter().zip(&other.y) {
            match (a, b) {
                (None, _) => {}
                (Some(_), None) => return Ok(false),
                (Some(a), Some(b)) => {
                    if !a.subset_of(b)? {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Values of a p-function on the simple roots of the gradient (a canonical point of each `Y_α`).
    pub fn p_function(&self, ars: &AffineReflectionSystem) -> Result<(Vec<usize>, PFunction)> {
        let g = self.gradient();
        let sys = ars.gradient();
        let nd: BitSet = BitSet::from_indices(g.capacity(), g.iter().filter(|&i| sys.class(i) != LengthClass::Divisible));
        let simple = sys.simple_system(&nd);
        let values: Vec<IVec> = simple
            .iter()
            .map(|&i| self.y[i].as_ref().expect("simple roots lie in the gradient").reps()[0].clone())
            .collect();
        Ok((simple.clone(), extend_p(sys, &simple, &values, &nd)?))
    }
}

/// Checks that every translation set is nonempty, inside `Λ_α`, and that
/// `Y_β − ⟨β,α∨⟩Y_α ⊆ Y_{s_α β}` for all roots of the gradient.
pub fn is_subsystem(ars: &AffineReflectionSystem, spec: &SubsystemSpec) -> Result<bool> {
    Ok(subsystem_violation(ars, spec)?.is_none())
}

/// The first failing relation, as `(β, α)` root indices, or `None` for a subsystem.
/// A root outside `Λ` is reported as `(β, β)`.
pub fn subsystem_violation(ars: &AffineReflectionSystem, spec: &SubsystemSpec) -> Result<Option<(usize, usize)>> {
    let sys = ars.gradient();
    if spec.y.len() != sys.len() {
        return Err(ArsError::Malformed(format!("{} translation sets for {} roots", spec.y.len(), sys.len())));
    }
    for (i, y) in spec.y.iter().enumerate() {
        if let Some(y) = y {
            if y.dim() != ars.nullity() {
                return Err(ArsError::Malformed(format!("translation set of root {i} has the wrong dimension")));
            }
            if !y.subset_of(ars.lambda(i))? {
                return Ok(Some((i, i)));
            }
        }
    }
    let ids: Vec<Option<usize>> = {
        let mut table: HashMap<&CosetUnion, usize> = HashMap::new();
        spec.y
            .iter()
            .map(|y| {
                y.as_ref().map(|y| {
                    let n = table.len();
                    *table.entry(y).or_insert(n)
                })
            })
            .collect()
    };
    let g: Vec<usize> = spec.gradient().to_vec();
    let mut checked: HashSet<(usize, i64, usize, usize)> = HashSet::new();
    for &a in &g {
        for &b in &g {
            let c = sys.pairing(b, a);
            let t = sys.reflect(a, b);
            let Some(it) = ids[t] else { return Ok(Some((b, a))) };
            let key = (ids[b].expect("in gradient"), c, ids[a].expect("in gradient"), it);
            if !checked.insert(key) {
                continue;
            }
            let yb = spec.y[b].as_ref().expect("in gradient");
            let ya = spec.y[a].as_ref().expect("in gradient");
            let yt = spec.y[t].as_ref().expect("in gradient");
            let lhs = if c == 0 { yb.clone() } else { yb.minkowski(&ya.scale_i(-c))? };
            if !lhs.subset_of(yt)? {
                return Ok(Some((b, a)));
            }
        }
    }
    Ok(None)
}

/// Transports a subsystem to the dual system.
pub fn dual_spec(ars: &AffineReflectionSystem, spec: &SubsystemSpec) -> Result<(AffineReflectionSystem, SubsystemSpec)> {
    let (dual, map) = ars.dual()?;
    let sys = ars.gradient();
    let mut y = vec![None; sys.len()];
    for (i, yi) in spec.y.iter().enumerate() {
        if let Some(yi) = yi {
            let m = sys.lacing(sys.component(i));
            let scaled = if m > 1 && sys.class(i) == LengthClass::Short { yi.scale_i(m) } else { yi.clone() };
            y[map[i]] = Some(scaled);
        }
    }
    let mut out = SubsystemSpec::new(format!("{}∨", spec.family), y);
    out.params = spec.params.clone();
    Ok((dual, out))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum YJson {
    Full(String),
    Set(CosetUnionJson),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootSetJson {
    pub root: usize,
    pub set: YJson,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PValueJson {
    pub root: usize,
    pub value: Vec<JsonInt>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecJson {
    pub schema: String,
    pub family: String,
    #[serde(default)]
    pub also: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    pub gradient: Vec<usize>,
    #[serde(default)]
    pub p: Vec<PValueJson>,
    pub y: Vec<RootSetJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certification: Option<Certification>,
}

impl SubsystemSpec {
    pub fn to_json(&self, ars: &AffineReflectionSystem, cert: Option<Certification>) -> SpecJson {
        let y = self
            .y
            .iter()
            .enumerate()
            .filter_map(|(i, y)| {
                y.as_ref().map(|y| RootSetJson {
                    root: i,
                    set: if y == &ars.lambda(i).normalized() { YJson::Full("full".into()) } else { YJson::Set(y.into()) },
                })
            })
            .collect();
        let p = match self.p_function(ars) {
            Ok((simple, pf)) => {
                simple.iter().map(|&r| PValueJson { root: r, value: vec_to_json(&pf.values[&r]) }).collect()
            }
            Err(_) => Vec::new(),
        };
        SpecJson {
            schema: SCHEMA.into(),
            family: self.family.clone(),
            also: self.also.clone(),
            params: self.params.clone(),
            gradient: self.gradient().to_vec(),
            p,
            y,
            certification: cert,
        }
    }

    pub fn from_json(ars: &AffineReflectionSystem, j: &SpecJson) -> Result<Self> {
        if j.schema != SCHEMA {
            return Err(ArsError::Malformed(format!("unsupported schema {:?}", j.schema)));
        }
        let n = ars.gradient().len();
        let mut y = vec![None; n];
        for entry in &j.y {
            if entry.root >= n {
                return Err(ArsError::Malformed(format!("root index {} out of range", entry.root)));
            }
            y[entry.root] = Some(match &entry.set {
                YJson::Full(s) if s == "full" => ars.lambda(entry.root).clone(),
                YJson::Full(s) => return Err(ArsError::Malformed(format!("unknown marker {s:?}"))),
                YJson::Set(c) => c.to_coset_union().map_err(ArsError::Malformed)?,
            });
        }
        let mut spec = SubsystemSpec::new(j.family.clone(), y);
        if spec.gradient().to_vec() != j.gradient {
            return Err(ArsError::Malformed("gradient list disagrees with the translation sets".into()));
        }
        for pv in &j.p {
            let v = vec_from_json(&pv.value).map_err(ArsError::Malformed)?;
            if !spec.membership(&AffineRoot { root: pv.root, translation: v }) {
                return Err(ArsError::Malformed(format!("p value of root {} lies outside its set", pv.root)));
            }
        }
        spec.also = j.also.clone();
        spec.params = j.params.clone();
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ivec;

    fn z2() -> CosetUnion {
        CosetUnion::lattice(Lattice::standard(2))
    }

    fn three_cosets() -> CosetUnion {
        CosetUnion::new(&[ivec(&[0, 0]), ivec(&[1, 0]), ivec(&[0, 1])], Lattice::diagonal(&[2, 2])).unwrap()
    }

    fn ty(s: &str) -> FiniteRootSystem {
        FiniteRootSystem::parse(s).unwrap()
    }

    #[test]
    fn validation_examples() {
        let c = ExtensionDatum::new(z2(), three_cosets(), None);
        assert!(validate_datum(&ty("C3"), 0, &c).is_empty());
        assert!(validate_datum(&ty("C2"), 0, &c).is_empty());
        let bad = validate_datum(&ty("B2"), 0, &c);
        assert_eq!(bad.len(), 1, "{bad:?}");
        assert!(bad[0].relation.contains("group"));
        let d = ExtensionDatum::new(CosetUnion::lattice(Lattice::diagonal(&[2, 2])), z2(), None);
        let names: Vec<String> = validate_datum(&ty("B3"), 0, &d).into_iter().map(|v| v.relation).collect();
        assert!(names.contains(&"Λ_s + Λ_ℓ ⊆ Λ_s".to_string()), "{names:?}");
    }

    #[test]
    fn bc_relations_are_named() {
        let one = CosetUnion::lattice(Lattice::standard(1));
        let odd = CosetUnion::coset(&ivec(&[1]), Lattice::diagonal(&[2]));
        let ok = ExtensionDatum::new(one.clone(), one.clone(), Some(odd));
        assert!(validate_datum(&ty("BC2"), 0, &ok).is_empty());
        let bad = ExtensionDatum::new(one.clone(), CosetUnion::lattice(Lattice::diagonal(&[2])), Some(one));
        let names: Vec<String> = validate_datum(&ty("BC2"), 0, &bad).into_iter().map(|v| v.relation).collect();
        assert!(names.contains(&"Λ_ℓ + Λ_d ⊆ Λ_ℓ".to_string()), "{names:?}");
    }

    #[test]
    fn affine_reflection() {
        let ars = AffineReflectionSystem::irreducible("B2".parse().unwrap(), ExtensionDatum::uniform(Lattice::standard(2))).unwrap();
        let g = ars.gradient();
        let a = AffineRoot { root: g.index_of(&[1, -1]).unwrap(), translation: ivec(&[1, 0]) };
        let b = AffineRoot { root: g.index_of(&[0, 1]).unwrap(), translation: ivec(&[0, 0]) };
        let r = ars.reflect_affine(&a, &b);
        assert_eq!(r, AffineRoot { root: g.index_of(&[1, 0]).unwrap(), translation: ivec(&[1, 0]) });
        assert_eq!(ars.reflect_affine(&a, &r), b);
        let a0 = AffineRoot { root: a.root, translation: ivec(&[0, 0]) };
        let m = AffineRoot { root: b.root, translation: ivec(&[3, 1]) };
        assert_eq!(ars.reflect_affine(&a0, &m).translation, ivec(&[3, 1]));
    }

    #[test]
    fn duality() {
        let c = AffineReflectionSystem::irreducible("C3".parse().unwrap(), ExtensionDatum::new(z2(), three_cosets(), None)).unwrap();
        let (b, _) = c.dual().unwrap();
        assert_eq!(b.gradient().components()[0].family, Family::B);
        assert_eq!(b.datum(0).lambda_s, three_cosets().normalized());
        assert_eq!(b.datum(0).lambda_ell, CosetUnion::lattice(Lattice::diagonal(&[2, 2])));
        let (cc, _) = b.dual().unwrap();
        assert_eq!(cc.datum(0).lambda_s, c.datum(0).lambda_s.scale_i(2).normalized());
        let a = AffineReflectionSystem::irreducible("A2".parse().unwrap(), ExtensionDatum::uniform(Lattice::standard(2))).unwrap();
        assert_eq!(a.dual().unwrap().0.datum(0), a.datum(0));
        let one = CosetUnion::lattice(Lattice::standard(1));
        let bc = AffineReflectionSystem::irreducible(
            "BC2".parse().unwrap(),
            ExtensionDatum::new(one.clone(), one, Some(CosetUnion::coset(&ivec(&[1]), Lattice::diagonal(&[2])))),
        )
        .unwrap();
        assert_eq!(bc.dual().unwrap_err(), ArsError::NonReduced);
    }

    /// B gradient with Λ_ℓ = 2Z², Λ_s = {0, (1,0), (0,1)} + 2Z², and the subsystem
    /// with long sets H = 2Z × 4Z and short sets S = Λ_ℓ ∪ ({(1,0),(1,2)} + H).
    pub(crate) fn funnyex(rank: usize) -> (AffineReflectionSystem, SubsystemSpec) {
        let datum = ExtensionDatum::new(three_cosets(), CosetUnion::lattice(Lattice::diagonal(&[2, 2])), None);
        let ars = AffineReflectionSystem::irreducible(format!("B{rank}").parse().unwrap(), datum).unwrap();
        let h = Lattice::diagonal(&[2, 4]);
        let s = CosetUnion::lattice(Lattice::diagonal(&[2, 2]))
            .union(&CosetUnion::new(&[ivec(&[1, 0]), ivec(&[1, 2])], h.clone()).unwrap())
            .unwrap();
        let g = ars.gradient();
        let y = (0..g.len())
            .map(|i| Some(if g.class(i) == LengthClass::Short { s.clone() } else { CosetUnion::lattice(h.clone()) }))
            .collect();
        (ars, SubsystemSpec::new("L5_1_3", y))
    }

    #[test]
    fn subsystem_checks() {
        let (ars, spec) = funnyex(2);
        assert_eq!(is_subsystem(&ars, &SubsystemSpec::full(&ars)), Ok(true));
        assert_eq!(is_subsystem(&ars, &spec), Ok(true));
        let g = ars.gradient();
        let mut bigger = spec.clone();
        for i in 0..g.len() {
            if g.class(i) == LengthClass::Short {
                let extra = CosetUnion::coset(&ivec(&[1, 1]), Lattice::diagonal(&[2, 4]));
                bigger.y[i] = Some(bigger.y[i].as_ref().unwrap().union(&extra).unwrap().normalized());
            }
        }
        assert_eq!(is_subsystem(&ars, &bigger), Ok(false));
        let long = g.index_of(&[1, 1]).unwrap();
        assert!(spec.membership(&AffineRoot { root: long, translation: ivec(&[2, 4]) }));
        assert!(!spec.membership(&AffineRoot { root: long, translation: ivec(&[2, 2]) }));
        let short = g.index_of(&[1, 0]).unwrap();
        assert!(spec.membership(&AffineRoot { root: short, translation: ivec(&[1, 2]) }));
        assert!(!spec.membership(&AffineRoot { root: short, translation: ivec(&[0, 1]) }));
        assert_eq!(spec.gradient(), g.full());
    }

    #[test]
    fn p_function_on_full_b2() {
        let ars = AffineReflectionSystem::irreducible("B2".parse().unwrap(), ExtensionDatum::uniform(Lattice::standard(2))).unwrap();
        let g = ars.gradient();
        let simple = vec![g.index_of(&[1, -1]).unwrap(), g.index_of(&[0, 1]).unwrap()];
        let p = extend_p(g, &simple, &[ivec(&[0, 0]), ivec(&[1, 0])], &g.full()).unwrap();
        assert_eq!(p.values[&g.index_of(&[1, 0]).unwrap()], ivec(&[1, 0]));
        assert_eq!(p.values[&g.index_of(&[1, 1]).unwrap()], ivec(&[2, 0]));
        assert_eq!(p.values[&g.index_of(&[-1, 0]).unwrap()], ivec(&[-1, 0]));
    }

    #[test]
    fn json_round_trip() {
        let (ars, spec) = funnyex(3);
        let j = spec.to_json(&ars, None);
        let text = serde_json::to_string(&j).unwrap();
        let back: SpecJson = serde_json::from_str(&text).unwrap();
        assert_eq!(SubsystemSpec::from_json(&ars, &back).unwrap(), spec);
        assert!(!text.contains("\"full\""));
        let long = SubsystemSpec::lift(&ars, &ars.gradient().by_class(LengthClass::Long), "T5_3_2a");
        let text = serde_json::to_string(&long.to_json(&ars, None)).unwrap();
        assert!(text.contains("\"full\""));
        let back: SpecJson = serde_json::from_str(&text).unwrap();
        assert_eq!(SubsystemSpec::from_json(&ars, &back).unwrap(), long);
        let a = ars.to_json();
        let again = AffineReflectionSystem::from_json(&a).unwrap();
        assert_eq!(again.data(), ars.data());
    }
}
