//! Saito's nullity-2 extended affine root systems: the ten data classes, the
//! rank-2 normal forms of the `S` sets, and the catalog of maximal subsystem
//! families per class (shipped as a JSON fixture).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::ars::{AffineReflectionSystem, ArsError, Certification, ExtensionDatum, SubsystemSpec, SCHEMA};
use crate::classify::{self, ClassifyError, FamilyId, MaximalityVerdict};
use crate::lattice::{ivec, is_prime, CosetUnion, CosetUnionJson, IVec, Lattice, LatticeError, LatticeJson};
use crate::oracle;
use crate::rootsys::{Family, RootSystemType};

const TABLE_JSON: &str = include_str!("../fixtures/saito_table.json");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SaitoError {
    #[error("unknown Saito label {0:?}")]
    UnknownLabel(String),
    #[error("unknown gradient class {0:?} (expected B, C, other or BC)")]
    UnknownGradient(String),
    #[error("{name} does not exist over gradient class {gradient}")]
    Incompatible { name: SaitoName, gradient: GradientClass },
    #[error("rank {rank} is not available for gradient class {gradient}")]
    BadRank { gradient: GradientClass, rank: usize },
    #[error("catalog fixture: {0}")]
    Fixture(String),
    #[error("no catalog row for {name} over {gradient}")]
    MissingRow { name: SaitoName, gradient: GradientClass },
    #[error("H = {h} inside Λ_ℓ = {lambda_ell} has no rank-2 normal form: {reason}")]
    Shape { lambda_ell: String, h: String, reason: String },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Ars(#[from] ArsError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

pub type Result<T> = std::result::Result<T, SaitoError>;

/// The ten classes of nullity-2 data. `m` is the lacing number of the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SaitoName {
    /// `Φ^(1,1)`
    Phi11,
    /// `Φ^(1,m)`
    Phi1m,
    /// `Φ^(m,1)`
    PhiM1,
    /// `Φ^(m,m)`
    PhiMm,
    /// `B^(2,2)*`
    BStar,
    /// `C^(1,1)*`
    CStar,
    /// `BC^(2,1)`
    Bc21,
    /// `BC^(2,4)`
    Bc24,
    /// `BC^(2,2)(1)`
    Bc22First,
    /// `BC^(2,2)(2)`
    Bc22Second,
}

impl SaitoName {
    pub const ALL: [SaitoName; 10] = [
        SaitoName::Phi11,
        SaitoName::Phi1m,
        SaitoName::PhiM1,
        SaitoName::PhiMm,
        SaitoName::BStar,
        SaitoName::CStar,
        SaitoName::Bc21,
        SaitoName::Bc24,
        SaitoName::Bc22First,
        SaitoName::Bc22Second,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SaitoName::Phi11 => "Phi(1,1)",
            SaitoName::Phi1m => "Phi(1,m)",
            SaitoName::PhiM1 => "Phi(m,1)",
            SaitoName::PhiMm => "Phi(m,m)",
            SaitoName::BStar => "B(2,2)*",
            SaitoName::CStar => "C(1,1)*",
            SaitoName::Bc21 => "BC(2,1)",
            SaitoName::Bc24 => "BC(2,4)",
            SaitoName::Bc22First => "BC(2,2)(1)",
            SaitoName::Bc22Second => "BC(2,2)(2)",
        }
    }

    pub fn is_non_reduced(&self) -> bool {
        matches!(self, SaitoName::Bc21 | SaitoName::Bc24 | SaitoName::Bc22First | SaitoName::Bc22Second)
    }

    /// Gradient classes over which the name is defined.
    pub fn gradient_classes(&self) -> &'static [GradientClass] {
        use GradientClass::*;
        match self {
            SaitoName::Phi11 | SaitoName::Phi1m | SaitoName::PhiM1 | SaitoName::PhiMm => &[B, C, Other],
            SaitoName::BStar => &[B],
            SaitoName::CStar => &[C],
            _ => &[BC],
        }
    }
}

impl fmt::Display for SaitoName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SaitoName {
    type Err = SaitoError;

    /// Accepts `Phi(1,m)`, `Φ^(1,m)`, `Φ^{(1,m)}`, `BC^{(2,2)}(1)` and the like.
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .replace('Φ', "Phi")
            .chars()
            .filter(|c| !matches!(c, '^' | '{' | '}' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        SaitoName::ALL
            .into_iter()
            .find(|n| n.as_str().to_ascii_lowercase() == norm)
            .ok_or_else(|| SaitoError::UnknownLabel(s.to_string()))
    }
}

/// Gradient class of a Saito label. `Other` (neither B nor C) is realised by G2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GradientClass {
    B,
    C,
    Other,
    BC,
}

impl GradientClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            GradientClass::B => "B",
            GradientClass::C => "C",
            GradientClass::Other => "other",
            GradientClass::BC => "BC",
        }
    }

    /// Rank used when none is given: 3 except for G2. At rank 2 the long roots
    /// of B and the split lifts of BC are too sparse, and some catalog members
    /// stop being maximal.
    pub fn default_rank(&self) -> usize {
        match self {
            GradientClass::Other => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for GradientClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GradientClass {
    type Err = SaitoError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b" => Ok(GradientClass::B),
            "c" => Ok(GradientClass::C),
            "other" | "neither" | "g2" => Ok(GradientClass::Other),
            "bc" => Ok(GradientClass::BC),
            _ => Err(SaitoError::UnknownGradient(s.to_string())),
        }
    }
}

/// A Saito class over a concrete gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SaitoLabel {
    pub name: SaitoName,
    pub gradient: GradientClass,
    pub rank: usize,
}

impl SaitoLabel {
    pub fn new(name: SaitoName, gradient: GradientClass, rank: usize) -> Result<Self> {
        if !name.gradient_classes().contains(&gradient) {
            return Err(SaitoError::Incompatible { name, gradient });
        }
        let ok = match gradient {
            GradientClass::Other => rank == 2,
            _ => rank >= 2,
        };
        if !ok {
            return Err(SaitoError::BadRank { gradient, rank });
        }
        Ok(SaitoLabel { name, gradient, rank })
    }

    /// Every gradient class of `name` at its default rank.
    pub fn defaults(name: SaitoName) -> Vec<SaitoLabel> {
        name.gradient_classes().iter().map(|&g| SaitoLabel { name, gradient: g, rank: g.default_rank() }).collect()
    }

    pub fn root_system_type(&self) -> RootSystemType {
        let (family, rank) = match self.gradient {
            GradientClass::B => (Family::B, self.rank),
            GradientClass::C => (Family::C, self.rank),
            GradientClass::Other => (Family::G2, 2),
            GradientClass::BC => (Family::BC, self.rank),
        };
        RootSystemType::new(family, rank).expect("label ranks are valid")
    }

    pub fn lacing(&self) -> i64 {
        match self.gradient {
            GradientClass::Other => 3,
            _ => 2,
        }
    }

    pub fn system(&self) -> Result<AffineReflectionSystem> {
        Ok(AffineReflectionSystem::irreducible(self.root_system_type(), saito_datum(self))?)
    }
}

impl fmt::Display for SaitoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} over {}", self.name, self.root_system_type())
    }
}

fn lat(rows: &[&[i64]]) -> Lattice {
    Lattice::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).expect("2x2 integer rows")
}

fn union(reps: &[&[i64]], base: Lattice) -> CosetUnion {
    CosetUnion::new(&reps.iter().map(|r| ivec(r)).collect::<Vec<_>>(), base).expect("reps match the base dimension")
}

/// Translation sets of a label (independent of the rank).
pub fn saito_datum(label: &SaitoLabel) -> ExtensionDatum {
    let m = label.lacing();
    let z2 = || CosetUnion::lattice(Lattice::standard(2));
    let two = || Lattice::diagonal(&[2, 2]);
    let star = || union(&[&[0, 0], &[1, 0], &[0, 1]], two());
    let diag = |a: i64, b: i64| CosetUnion::lattice(Lattice::diagonal(&[a, b]));
    match label.name {
        SaitoName::Phi11 => ExtensionDatum::new(z2(), diag(1, 1), None),
        SaitoName::Phi1m => ExtensionDatum::new(z2(), diag(1, m), None),
        SaitoName::PhiM1 => ExtensionDatum::new(z2(), diag(m, 1), None),
        SaitoName::PhiMm => ExtensionDatum::new(z2(), diag(m, m), None),
        SaitoName::BStar => ExtensionDatum::new(star(), CosetUnion::lattice(two()), None),
        SaitoName::CStar => ExtensionDatum::new(z2(), star(), None),
        SaitoName::Bc21 => ExtensionDatum::new(z2(), z2(), Some(union(&[&[1, 0], &[1, 1]], two()))),
        SaitoName::Bc24 => {
            ExtensionDatum::new(z2(), diag(1, 2), Some(union(&[&[1, 0]], Lattice::diagonal(&[2, 4]))))
        }
        SaitoName::Bc22First => ExtensionDatum::new(z2(), z2(), Some(union(&[&[1, 0]], two()))),
        SaitoName::Bc22Second => ExtensionDatum::new(z2(), diag(1, 2), Some(union(&[&[1, 0]], two()))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TableFile {
    schema: String,
    rows: Vec<TableRow>,
}

/// One catalog row: the family tags expected for a label over a gradient class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub gradient: String,
    pub families: Vec<String>,
}

/// The catalog rows, parsed once from the bundled fixture.
pub fn table() -> Result<&'static [TableRow]> {
    static TABLE: OnceLock<std::result::Result<Vec<TableRow>, String>> = OnceLock::new();
    let parsed = TABLE.get_or_init(|| {
        let file: TableFile = serde_json::from_str(TABLE_JSON).map_err(|e| e.to_string())?;
        if file.schema != SCHEMA {
            return Err(format!("unsupported schema {:?}", file.schema));
        }
        Ok(file.rows)
    });
    parsed.as_deref().map_err(|e| SaitoError::Fixture(e.clone()))
}

/// Expected family tags for `name` over `gradient`.
pub fn expected_families(name: SaitoName, gradient: GradientClass) -> Result<BTreeSet<String>> {
    let row = table()?
        .iter()
        .find(|r| r.label.parse::<SaitoName>().ok() == Some(name) && r.gradient.parse::<GradientClass>().ok() == Some(gradient))
        .ok_or(SaitoError::MissingRow { name, gradient })?;
    Ok(row.families.iter().cloned().collect())
}

/// The tag a family is listed under in the catalog, or `None` if the catalog
/// leaves it out (lifts of finite subsystems over reduced gradients).
pub fn catalog_tag(f: FamilyId) -> Option<&'static str> {
    match f {
        FamilyId::NR_P6_5_3a | FamilyId::NR_P6_5_3b => Some("NR_P6_5_3"),
        f if f.is_non_reduced() => Some(f.as_str()),
        f if f.is_lift() => None,
        f => Some(f.as_str()),
    }
}

/// A normal form for the short translation sets of the `S(p)` family in nullity 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rank2Form {
    /// `"II.1"`, `"II.2"` (the two shapes with `Λ_ℓ = 2⟨Λ_s⟩`) or `"III"`.
    pub case: &'static str,
    pub p: u64,
    pub h: Lattice,
    /// Largest union of `H`-cosets allowed for `S` (before intersecting with `Λ_s`).
    pub s_bound: CosetUnion,
    pub h_prime: Lattice,
}

impl Rank2Form {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "case": self.case,
            "p": self.p,
            "h": LatticeJson::from(&self.h),
            "s_bound": CosetUnionJson::from(&self.s_bound),
            "h_prime": LatticeJson::from(&self.h_prime),
        })
    }
}

/// Normal form of `S` for a sublattice `H` of prime index in `Λ_ℓ`, with
/// `⟨Λ_s⟩` identified with `Z²` and `2Z² ⊊ Λ_ℓ ⊆ Z²` not both equal.
///
/// The result is checked against the direct description: `s_bound` must be
/// the group `{a : 2a ∈ H}` and equal to `h_prime`.
pub fn rank2_forms(lambda_ell: &Lattice, h: &Lattice) -> Result<Rank2Form> {
    let bad = |reason: &str| SaitoError::Shape {
        lambda_ell: lambda_ell.to_string(),
        h: h.to_string(),
        reason: reason.to_string(),
    };
    if lambda_ell.dim() != 2 || h.dim() != 2 || !lambda_ell.is_full_rank() {
        return Err(bad("rank 2 full lattices only"));
    }
    if !lambda_ell.contains_lattice(h) {
        return Err(bad("H is not inside Λ_ℓ"));
    }
    let p = lambda_ell.index_of(h)?.to_u64().filter(|&p| is_prime(p)).ok_or_else(|| bad("index is not prime"))?;
    let pi = p as i64;
    let (case, s_bound, h_prime) = if *lambda_ell == Lattice::diagonal(&[2, 2]) {
        if *h == Lattice::diagonal(&[2 * pi, 2]) {
            let s = if p == 2 {
                union(&[&[0, 0], &[2, 0], &[0, 1], &[2, 1]], h.clone())
            } else {
                union(&[&[0, 0], &[pi, 0], &[pi, 1], &[0, 1]], h.clone())
            };
            ("II.1", s, Lattice::diagonal(&[pi, 1]))
        } else {
            let x = (0..pi).find(|&x| *h == lat(&[&[2, 2 * x], &[0, 2 * pi]])).ok_or_else(|| bad("not an HNF shape"))?;
            let s = match (p, x) {
                (2, 0) => CosetUnion::lattice(lambda_ell.clone()).union(&union(&[&[1, 0], &[1, 2]], h.clone()))?,
                (2, _) => CosetUnion::lattice(lambda_ell.clone()).union(&union(&[&[1, 1], &[1, 3]], h.clone()))?,
                _ => union(&[&[0, 0], &[1, x], &[1, x + pi], &[0, pi]], h.clone()),
            };
            ("II.2", s, lat(&[&[1, x], &[0, pi]]))
        }
    } else if *lambda_ell == Lattice::diagonal(&[2, 1]) {
        let hp = if *h == Lattice::diagonal(&[2 * pi, 1]) {
            Lattice::diagonal(&[pi, 1])
        } else {
            let y = (0..pi).find(|&y| *h == lat(&[&[2, y], &[0, pi]])).ok_or_else(|| bad("not an HNF shape"))?;
            match (p, y % 2) {
                (2, 1) => Lattice::diagonal(&[2, 1]),
                (2, _) => return Err(bad("H + 2Z² is not Λ_ℓ")),
                (_, 1) => lat(&[&[1, (y + pi) / 2], &[0, pi]]),
                _ => lat(&[&[1, y / 2], &[0, pi]]),
            }
        };
        ("III", CosetUnion::lattice(hp.clone()), hp)
    } else if let Some(x) = (0..2).find(|&x| *lambda_ell == lat(&[&[1, x], &[0, 2]])) {
        let hp = if p != 2 && *h == lat(&[&[pi, pi * x], &[0, 2]]) {
            Lattice::diagonal(&[pi, 1])
        } else {
            let y = (0..pi)
                .find(|&y| *h == lat(&[&[1, x + 2 * y], &[0, 2 * pi]]))
                .ok_or_else(|| bad("not an HNF shape"))?;
            if p == 2 {
                lat(&[&[1, x], &[0, 2]])
            } else {
                lat(&[&[1, (x + 2 * y) % pi], &[0, pi]])
            }
        };
        ("III", CosetUnion::lattice(hp.clone()), hp)
    } else {
        return Err(bad("Λ_ℓ is neither 2Z² nor strictly between 2Z² and Z²"));
    };
    let halves = halving_set(h)?;
    if !s_bound.set_eq(&halves)? || !s_bound.set_eq(&CosetUnion::lattice(h_prime.clone()))? {
        return Err(bad("normal form disagrees with {a : 2a ∈ H}"));
    }
    Ok(Rank2Form { case, p, h: h.clone(), s_bound: s_bound.normalized(), h_prime })
}

/// `{a ∈ Z² : 2a ∈ H}` as a union of `H`-cosets.
fn halving_set(h: &Lattice) -> Result<CosetUnion> {
    let two = BigInt::from(2);
    let reps: Vec<IVec> = Lattice::standard(h.dim())
        .coset_reps(h)?
        .into_iter()
        .filter(|a| h.contains(&a.iter().map(|x| x * &two).collect::<Vec<_>>()))
        .collect();
    Ok(CosetUnion::new(&reps, h.clone())?)
}

/// Rank-2 forms for every admissible `H` of prime index at most `prime_bound`,
/// computed on the B side (the dual system for gradient C) and expressed in
/// coordinates of `⟨Λ_s⟩`. Empty when `Λ_ℓ` is `⟨Λ_s⟩` or not a group.
pub fn label_rank2_forms(label: &SaitoLabel, prime_bound: u64) -> Result<Vec<Rank2Form>> {
    let d = saito_datum(label);
    let (short, long) = match label.gradient {
        GradientClass::B => (d.lambda_s.clone(), d.lambda_ell.clone()),
        GradientClass::C => (d.lambda_ell.clone(), d.lambda_s.scale_i(2)),
        _ => return Ok(Vec::new()),
    };
    if !long.is_group()? {
        return Ok(Vec::new());
    }
    let gen = short.generated();
    let to_coords = |l: &Lattice| -> Result<Lattice> {
        let rows: Vec<IVec> = l.rows().iter().map(|r| gen.coordinates(r).expect("inside ⟨Λ_s⟩")).collect();
        Ok(Lattice::hnf(&rows)?)
    };
    let ell = to_coords(&long.generated())?;
    if ell == Lattice::standard(2) {
        return Ok(Vec::new());
    }
    let two = Lattice::diagonal(&[2, 2]);
    let mut out = Vec::new();
    for p in crate::lattice::primes_up_to(prime_bound) {
        for h in ell.maximal_sublattices(p)? {
            if h.sum(&two)? != ell {
                continue;
            }
            out.push(rank2_forms(&ell, &h)?);
        }
    }
    Ok(out)
}

/// A classified member together with its maximality verdict.
#[derive(Clone, Debug)]
pub struct VerifiedSpec {
    pub spec: SubsystemSpec,
    pub verdict: MaximalityVerdict,
}

#[derive(Clone, Debug)]
pub struct SaitoReport {
    pub label: SaitoLabel,
    pub prime_bound: u64,
    pub expected: BTreeSet<String>,
    pub found: BTreeSet<String>,
    pub specs: Vec<VerifiedSpec>,
    pub rank2_forms: Vec<Rank2Form>,
    system: AffineReflectionSystem,
}

impl SaitoReport {
    pub fn system(&self) -> &AffineReflectionSystem {
        &self.system
    }

    pub fn matches_table(&self) -> bool {
        self.expected == self.found
    }

    pub fn all_verified(&self) -> bool {
        self.specs.iter().all(|v| matches!(v.verdict, MaximalityVerdict::Verified { .. }))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let specs: Vec<_> = self
            .specs
            .iter()
            .map(|v| {
                let cert = match &v.verdict {
                    MaximalityVerdict::Verified { modulus } => Certification::VerifiedAtModulus { modulus: modulus.clone() },
                    MaximalityVerdict::Undecided { .. } => Certification::Subsystem,
                    MaximalityVerdict::NotMaximal => Certification::NotMaximal,
                };
                v.spec.to_json(&self.system, Some(cert))
            })
            .collect();
        json!({
            "schema": SCHEMA,
            "label": self.label.name.as_str(),
            "gradient_class": self.label.gradient.as_str(),
            "gradient": self.label.root_system_type().to_string(),
            "prime_bound": self.prime_bound,
            "datum": self.system.datum(0),
            "expected_families": self.expected,
            "found_families": self.found,
            "matches_table": self.matches_table(),
            "all_verified": self.all_verified(),
            "rank2_forms": self.rank2_forms.iter().map(Rank2Form::to_json).collect::<Vec<_>>(),
            "specs": specs,
        })
    }
}

/// Enumerates the maximal subsystems of a Saito class, checks each with the
/// oracle, and compares the family tags found with the catalog row.
pub fn saito_classify(label: &SaitoLabel, prime_bound: u64) -> Result<SaitoReport> {
    let system = label.system()?;
    let budget = oracle::budget();
    let specs = classify::enumerate_maximal(&system, prime_bound)?
        .into_iter()
        .map(|spec| {
            let verdict = classify::is_maximal(&system, &spec, budget)?;
            Ok(VerifiedSpec { spec, verdict })
        })
        .collect::<Result<Vec<_>>>()?;
    let found = specs
        .iter()
        .flat_map(|v| classify::spec_families(&v.spec))
        .filter_map(catalog_tag)
        .map(String::from)
        .collect();
    Ok(SaitoReport {
        label: *label,
        prime_bound,
        expected: expected_families(label.name, label.gradient)?,
        found,
        specs,
        rank2_forms: label_rank2_forms(label, prime_bound)?,
        system,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_spellings() {
        for s in ["Phi(1,1)", "Φ(1,1)", "Φ^(1,1)", "Φ^{(1,1)}"] {
            assert_eq!(s.parse::<SaitoName>().unwrap(), SaitoName::Phi11);
        }
        assert_eq!("BC^{(2,2)}(2)".parse::<SaitoName>().unwrap(), SaitoName::Bc22Second);
        assert_eq!("b(2,2)*".parse::<SaitoName>().unwrap(), SaitoName::BStar);
        assert!("BC(2,3)".parse::<SaitoName>().is_err());
        for n in SaitoName::ALL {
            assert_eq!(n.as_str().parse::<SaitoName>().unwrap(), n);
        }
    }

    #[test]
    fn labels_check_gradient() {
        assert!(SaitoLabel::new(SaitoName::BStar, GradientClass::C, 3).is_err());
        assert!(SaitoLabel::new(SaitoName::Phi11, GradientClass::Other, 3).is_err());
        assert!(SaitoLabel::new(SaitoName::Bc21, GradientClass::BC, 2).is_ok());
    }

    #[test]
    fn every_catalog_row_parses() {
        let rows = table().unwrap();
        assert_eq!(rows.len(), 18);
        for r in rows {
            let name: SaitoName = r.label.parse().unwrap();
            let g: GradientClass = r.gradient.parse().unwrap();
            assert!(name.gradient_classes().contains(&g));
        }
        for n in SaitoName::ALL {
            for &g in n.gradient_classes() {
                expected_families(n, g).unwrap();
            }
        }
    }
}
