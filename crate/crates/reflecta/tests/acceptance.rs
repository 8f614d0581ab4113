//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails. Thresholds are the constants below.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use reflecta::ars::{dual_spec, AffineReflectionSystem, ExtensionDatum, SubsystemSpec};
use reflecta::bitset::BitSet;
use reflecta::classify::{self, FamilyId, FamilyParams};
use reflecta::lattice::{ivec, primes_up_to, CosetUnion, KeyLemmaViolation, Lattice, LatticeError};
use reflecta::oracle::{self, QuotientModel};
use reflecta::rootsys::{FiniteRootSystem, LengthClass};
use reflecta::saito::{self, SaitoLabel, SaitoName, SaitoReport};

const HNF_SAMPLES: usize = 1000;
const HNF_LIMIT: Duration = Duration::from_secs(5);
const KEY_LEMMA_LIMIT: Duration = Duration::from_secs(10);
const FINITE_LIMIT: Duration = Duration::from_secs(60);
const NULLITY_ONE_BOUND: u64 = 5;
const NULLITY_ONE_LIMIT: Duration = Duration::from_secs(300);
/// Quotient cap for the oracle side of the nullity-1 comparison.
const NULLITY_ONE_BUDGET: usize = 1 << 17;
const SAITO_BOUND: u64 = 3;

struct Outcome {
    pass: bool,
    summary: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Outcome { pass, summary: summary.into(), notes: Vec::new() }
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("HNF and determinant suite", c1_hnf),
        ("maximal sublattices contain qL iff p = q", c2_max_sublattice),
        ("odd-index coset lemma on Z^2", c3_key_lemma),
        ("finite maximal subsystems vs brute force", c4_finite),
        ("nullity-1 classification vs oracle", c5_nullity_one),
        ("Saito nullity-2 catalog", c6_saito),
        ("closedness vs expected flags", c7_closedness),
        ("closed or dual closed", c8_dual_closed),
        ("duality and family correspondence", c9_duality),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = f();
        println!(
            "criterion {}: {} | {name} | {} | {:.1}s",
            i + 1,
            if out.pass { "PASS" } else { "FAIL" },
            out.summary,
            t.elapsed().as_secs_f64()
        );
        for n in &out.notes {
            println!("    {n}");
        }
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- shared data

/// Seeded xorshift; the suite is deterministic.
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }
    fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next() % (hi - lo + 1) as u64) as i64
    }
}

fn cu(d: &[i64]) -> CosetUnion {
    CosetUnion::lattice(Lattice::diagonal(d))
}

fn coset(v: &[i64], d: &[i64]) -> CosetUnion {
    CosetUnion::coset(&ivec(v), Lattice::diagonal(d))
}

struct Instance {
    name: String,
    ars: AffineReflectionSystem,
    specs: Vec<SubsystemSpec>,
}

/// The nullity-1 grid of criterion 5, enumerated once.
fn nullity_one() -> &'static [Instance] {
    static CELL: OnceLock<Vec<Instance>> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid: Vec<(&str, &str, ExtensionDatum)> = vec![
            ("A2", "untwisted (= twisted, m = 1)", ExtensionDatum::new(cu(&[1]), cu(&[1]), None)),
            ("C3", "untwisted", ExtensionDatum::new(cu(&[1]), cu(&[1]), None)),
            ("C3", "twisted", ExtensionDatum::new(cu(&[1]), cu(&[2]), None)),
            ("G2", "untwisted", ExtensionDatum::new(cu(&[1]), cu(&[1]), None)),
            ("G2", "twisted", ExtensionDatum::new(cu(&[1]), cu(&[3]), None)),
            ("BC2", "untwisted", ExtensionDatum::new(cu(&[1]), cu(&[1]), Some(coset(&[1], &[2])))),
            ("BC2", "twisted", ExtensionDatum::new(cu(&[1]), cu(&[2]), Some(coset(&[2], &[4])))),
        ];
        grid.into_iter()
            .map(|(t, kind, d)| {
                let ars = AffineReflectionSystem::irreducible(t.parse().unwrap(), d).unwrap();
                let specs = classify::enumerate_maximal(&ars, NULLITY_ONE_BOUND).unwrap();
                Instance { name: format!("{t} {kind}"), ars, specs }
            })
            .collect()
    })
}

/// Every Saito label at its default rank, classified once.
fn saito_reports() -> &'static [SaitoReport] {
    static CELL: OnceLock<Vec<SaitoReport>> = OnceLock::new();
    CELL.get_or_init(|| {
        SaitoName::ALL
            .iter()
            .flat_map(|&n| SaitoLabel::defaults(n))
            .map(|l| saito::saito_classify(&l, SAITO_BOUND).unwrap())
            .collect()
    })
}

fn report_name(r: &SaitoReport) -> String {
    format!("{} over {}", r.label.name.as_str(), r.label.root_system_type())
}

/// Translation sets in canonical form, for extensional comparison.
fn canonical(spec: &SubsystemSpec) -> Vec<Option<CosetUnion>> {
    spec.y.iter().map(|y| y.as_ref().map(CosetUnion::normalized)).collect()
}

// ---------------------------------------------------------------- criterion 1

/// Reference HNF by plain Euclidean row reduction, independent of the library.
fn reference_hnf(rows: &[Vec<i64>], n: usize) -> Vec<Vec<i128>> {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut top = 0;
    for col in 0..n {
        if top == m.len() {
            break;
        }
        loop {
            let nz: Vec<usize> = (top..m.len()).filter(|&i| m[i][col] != 0).collect();
            if nz.len() <= 1 {
                if let Some(&i) = nz.first() {
                    m.swap(top, i);
                }
                break;
            }
            let piv = *nz.iter().min_by_key(|&&i| m[i][col].abs()).unwrap();
            for &i in &nz {
                if i != piv {
                    let q = m[i][col] / m[piv][col];
                    for j in 0..n {
                        m[i][j] -= q * m[piv][j];
                    }
                }
            }
        }
        if m[top][col] == 0 {
            continue;
        }
        if m[top][col] < 0 {
            m[top].iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..top {
            let q = m[i][col].div_euclid(m[top][col]);
            for j in 0..n {
                m[i][j] -= q * m[top][j];
            }
        }
        top += 1;
    }
    m.truncate(top);
    m
}

/// det(G Gᵗ) by fraction-free elimination.
fn gram_det(rows: &[Vec<i128>]) -> i128 {
    let k = rows.len();
    if k == 0 {
        return 1;
    }
    let mut g: Vec<Vec<i128>> =
        (0..k).map(|i| (0..k).map(|j| rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum()).collect()).collect();
    let mut prev = 1i128;
    let mut sign = 1;
    for p in 0..k {
        if g[p][p] == 0 {
            match (p + 1..k).find(|&i| g[i][p] != 0) {
                Some(i) => {
                    g.swap(p, i);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in p + 1..k {
            for j in p + 1..k {
                g[i][j] = (g[i][j] * g[p][p] - g[i][p] * g[p][j]) / prev;
            }
        }
        prev = g[p][p];
    }
    sign * g[k - 1][k - 1]
}

fn to_i128(l: &Lattice) -> Vec<Vec<i128>> {
    l.rows().iter().map(|r| r.iter().map(|x| i128::try_from(x).unwrap()).collect()).collect()
}

fn c1_hnf() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng(0x9e37_79b9_7f4a_7c15);
    let mut failures: Vec<String> = Vec::new();
    for _ in 0..HNF_SAMPLES {
        let k = rng.range(1, 4) as usize;
        let n = rng.range(1, 5) as usize;
        let rows: Vec<Vec<i64>> = (0..k).map(|_| (0..n).map(|_| rng.range(-9, 9)).collect()).collect();
        let l = Lattice::from_rows(&rows).unwrap();
        let mut bad = Vec::new();
        if to_i128(&l) != reference_hnf(&rows, n) {
            bad.push("differs from reference reduction");
        }
        // The zero lattice has no rows to re-reduce.
        if l.rank() > 0 && Lattice::hnf(l.rows()).unwrap() != l {
            bad.push("not idempotent");
        }
        if !rows.iter().all(|r| l.member(&ivec(r)).unwrap()) {
            bad.push("input row outside span");
        }
        if BigInt::from(gram_det(&to_i128(&l))) != l.determinant_sq() {
            bad.push("determinant_sq differs from Gram determinant");
        }
        // Random unimodular recombination of the input rows.
        let mut u = rows.clone();
        for _ in 0..6 {
            let (i, j) = (rng.range(0, k as i64 - 1) as usize, rng.range(0, k as i64 - 1) as usize);
            match rng.range(0, 2) {
                0 if i != j => {
                    let c = rng.range(-3, 3);
                    let src = u[j].clone();
                    u[i].iter_mut().zip(&src).for_each(|(a, b)| *a += c * b);
                }
                1 => u.swap(i, j),
                _ => u[i].iter_mut().for_each(|x| *x = -*x),
            }
        }
        let lu = Lattice::from_rows(&u).unwrap();
        if lu != l || lu.determinant_sq() != l.determinant_sq() {
            bad.push("not invariant under unimodular row operations");
        }
        if !bad.is_empty() {
            failures.push(format!("{rows:?}: {}", bad.join(", ")));
        }
    }
    let example = Lattice::from_rows(&[vec![2, 4], vec![0, 2]]).unwrap() == Lattice::diagonal(&[2, 2]);
    let elapsed = start.elapsed();
    let mut out = Outcome::new(
        failures.is_empty() && example && elapsed < HNF_LIMIT,
        format!("{HNF_SAMPLES} matrices, {} failures, limit {:?}", failures.len(), HNF_LIMIT),
    );
    out.notes.extend(failures.into_iter().take(5));
    out
}

// ---------------------------------------------------------------- criterion 2

fn c2_max_sublattice() -> Outcome {
    let primes = primes_up_to(7);
    let mut checked = 0;
    let mut violations = Vec::new();
    for n in 1..=3usize {
        let l = Lattice::standard(n);
        for &p in &primes {
            let subs = l.maximal_sublattices(p).unwrap();
            // Hyperplanes of F_p^n.
            let expected = (p.pow(n as u32) - 1) / (p - 1);
            if subs.len() as u64 != expected {
                violations.push(format!("Z^{n}, p = {p}: {} sublattices, expected {expected}", subs.len()));
            }
            for m in &subs {
                if m.determinant() != Some(BigInt::from(p)) {
                    violations.push(format!("Z^{n}: {m} does not have index {p}"));
                }
                for &q in &primes {
                    checked += 1;
                    let direct = (0..n).all(|i| {
                        let mut v = vec![0i64; n];
                        v[i] = q as i64;
                        m.member(&ivec(&v)).unwrap()
                    });
                    let lib = l.check_lemma_max_sublattice(m, q).unwrap();
                    if direct != (p == q) || lib != direct {
                        violations.push(format!("Z^{n}, M = {m}, p = {p}, q = {q}"));
                    }
                }
            }
        }
    }
    let mut out = Outcome::new(violations.is_empty(), format!("{checked} (M, q) pairs, {} violations", violations.len()));
    out.notes.extend(violations.into_iter().take(5));
    out
}

// ---------------------------------------------------------------- criterion 3

fn c3_key_lemma() -> Outcome {
    let start = Instant::now();
    let z2 = Lattice::standard(2);
    let two = Lattice::diagonal(&[2, 2]);
    let nonzero = [[1i64, 0], [0, 1], [1, 1]];
    let unions: Vec<Vec<[i64; 2]>> = (0..8u32)
        .map(|mask| {
            let mut reps = vec![[0i64, 0]];
            reps.extend((0..3).filter(|b| mask >> b & 1 == 1).map(|b| nonzero[b]));
            reps
        })
        .collect();
    let as_cu = |reps: &[[i64; 2]]| CosetUnion::new(&reps.iter().map(|r| ivec(r)).collect::<Vec<_>>(), two.clone()).unwrap();
    let hs: Vec<(u64, Lattice)> =
        [3u64, 5].iter().flat_map(|&p| z2.maximal_sublattices(p).unwrap().into_iter().map(move |h| (p, h))).collect();
    let (mut applicable, mut violations) = (0, Vec::new());
    for (p, h) in &hs {
        let p = *p as i64;
        for l in &unions {
            for lp in &unions {
                // H ∩ L ⊆ L' is periodic modulo 2pZ^2: test it on one period.
                let holds = (0..2 * p).all(|x| {
                    (0..2 * p).all(|y| {
                        let parity = [x.rem_euclid(2), y.rem_euclid(2)];
                        !h.member(&ivec(&[x, y])).unwrap() || !l.contains(&parity) || lp.contains(&parity)
                    })
                });
                let lib = z2.check_key_lemma(&as_cu(l), &as_cu(lp), h);
                if holds {
                    applicable += 1;
                    let subset = l.iter().all(|r| lp.contains(r));
                    // k and r count the nonzero cosets.
                    if !subset || lp.len() < l.len() || lib != Ok(true) {
                        violations.push(format!("H = {h}, L = {l:?}, L' = {lp:?}"));
                    }
                } else if lib != Err(LatticeError::KeyLemma(KeyLemmaViolation::HypothesisFails)) {
                    violations.push(format!("H = {h}, L = {l:?}, L' = {lp:?}: library accepted a failing hypothesis"));
                }
            }
        }
    }
    let index_two = z2.maximal_sublattices(2).unwrap().into_iter().all(|h| {
        z2.check_key_lemma(&as_cu(&unions[0]), &as_cu(&unions[0]), &h)
            == Err(LatticeError::KeyLemma(KeyLemmaViolation::IndexTwo))
    });
    let elapsed = start.elapsed();
    let mut out = Outcome::new(
        violations.is_empty() && index_two && elapsed < KEY_LEMMA_LIMIT,
        format!(
            "{} sublattices H, {applicable} applicable (H, L, L') triples, {} violations, limit {:?}",
            hs.len(),
            violations.len(),
            KEY_LEMMA_LIMIT
        ),
    );
    out.notes.extend(violations.into_iter().take(5));
    out
}

// ---------------------------------------------------------------- criterion 4

fn c4_finite() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for t in ["A2", "A3", "B2", "B3", "C3", "G2", "BC2", "BC3"] {
        let sys = FiniteRootSystem::parse(t).unwrap();
        let mut lib = sys.finite_maximal_subsystems().unwrap();
        lib.sort();
        let brute = sys.brute_force_maximal();
        if lib != brute {
            ok = false;
            notes.push(format!("{t}: library {} vs brute force {}", lib.len(), brute.len()));
        } else {
            notes.push(format!("{t}: {} maximal subsystems", lib.len()));
        }
    }
    let elapsed = start.elapsed();
    Outcome { pass: ok && elapsed < FINITE_LIMIT, summary: format!("8 gradients, limit {FINITE_LIMIT:?}"), notes }
}

// ---------------------------------------------------------------- criterion 5

/// `Some(q)` when every translation set of `spec` is one coset of `qZ`.
fn single_modulus(spec: &SubsystemSpec) -> Option<i64> {
    let mut q = None;
    for y in spec.y.iter() {
        let y = y.as_ref()?;
        if y.reps().len() != 1 || y.base().rank() != 1 {
            return None;
        }
        let d = i64::try_from(&y.base().rows()[0][0]).ok()?;
        if q.is_some_and(|q| q != d) {
            return None;
        }
        q = Some(d);
    }
    q
}

/// Full-gradient shapes of the untwisted nullity-1 classification: short sets
/// full with long sets `p + mZ` (when `m > 1`), and `p + qZ` everywhere for primes `q ≠ m`.
fn untwisted_shapes(inst: &Instance, m: i64) -> std::result::Result<String, String> {
    let sys = inst.ars.gradient();
    let full: Vec<&SubsystemSpec> = inst.specs.iter().filter(|s| s.gradient() == sys.full()).collect();
    let mut qs = BTreeSet::new();
    let mut m_shape = 0;
    for s in &full {
        let fams = classify::spec_families(s);
        if let Some(q) = single_modulus(s) {
            if q == m || !fams.contains(&FamilyId::L4_1_3) {
                return Err(format!("p + {q}Z member tagged {:?}", s.tags()));
            }
            qs.insert(q);
            continue;
        }
        let short_full = (0..sys.len()).filter(|&i| sys.class(i) == LengthClass::Short).all(|i| {
            s.y[i].as_ref().is_some_and(|y| y.set_eq(inst.ars.lambda(i)).unwrap())
        });
        let long_m = (0..sys.len()).filter(|&i| sys.class(i) == LengthClass::Long).all(|i| {
            let y = s.y[i].as_ref().unwrap();
            y.reps().len() == 1 && y.base() == &Lattice::diagonal(&[m])
        });
        if m > 1 && short_full && long_m && fams.contains(&FamilyId::L4_1_1) {
            m_shape += 1;
        } else {
            return Err(format!("unexpected full-gradient member {:?}", s.tags()));
        }
    }
    let want: BTreeSet<i64> = primes_up_to(NULLITY_ONE_BOUND).into_iter().map(|p| p as i64).filter(|&p| p != m).collect();
    if qs != want {
        return Err(format!("q-shapes for {qs:?}, expected {want:?}"));
    }
    if (m > 1) != (m_shape > 0) {
        return Err(format!("{m_shape} members of the m-shape with m = {m}"));
    }
    Ok(format!("q in {qs:?} tagged L4_1_3, {m_shape} m-shape members tagged L4_1_1"))
}

fn c5_nullity_one() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for inst in nullity_one() {
        let mut extras = oracle::refinement_lattices(&inst.ars, NULLITY_ONE_BOUND).unwrap();
        extras.extend(inst.specs.iter().flat_map(|s| s.y.iter().flatten().map(|y| y.stabilizer())));
        let model = QuotientModel::build(&inst.ars, &extras, NULLITY_ONE_BUDGET).unwrap();
        let oracle_sets: HashSet<BitSet> = model.enumerate_maximal().unwrap().into_iter().collect();
        let mine: HashSet<BitSet> = inst.specs.iter().map(|s| model.image(s).unwrap()).collect();
        let equal = mine == oracle_sets && mine.len() == inst.specs.len();
        ok &= equal;
        let tags: BTreeSet<String> = inst.specs.iter().flat_map(|s| s.tags()).map(String::from).collect();
        notes.push(format!(
            "{}: classify {} / oracle {} in Z^1/{} {}; tags {:?}",
            inst.name,
            mine.len(),
            oracle_sets.len(),
            model.modulus(),
            if equal { "equal" } else { "DIFFER" },
            tags
        ));
        if inst.name.ends_with("untwisted") || inst.name.starts_with("A2") {
            let m = inst.ars.gradient().components()[0].lacing();
            if !inst.name.starts_with("BC") {
                match untwisted_shapes(inst, m) {
                    Ok(s) => notes.push(format!("    shapes: {s}")),
                    Err(e) => {
                        ok = false;
                        notes.push(format!("    shapes: {e}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: ok && elapsed < NULLITY_ONE_LIMIT,
        summary: format!("7 instances at prime bound {NULLITY_ONE_BOUND}, limit {NULLITY_ONE_LIMIT:?}"),
        notes,
    }
}

// ---------------------------------------------------------------- criterion 6

fn c6_saito() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for r in saito_reports() {
        let good = r.all_verified() && r.matches_table();
        ok &= good;
        let missing: Vec<_> = r.expected.difference(&r.found).collect();
        let extra: Vec<_> = r.found.difference(&r.expected).collect();
        notes.push(format!(
            "{}: {} specs, {}, table {}{}{}",
            report_name(r),
            r.specs.len(),
            if r.all_verified() { "all verified" } else { "NOT all verified" },
            if r.matches_table() { "matches" } else { "DIFFERS" },
            if missing.is_empty() { String::new() } else { format!(", missing {missing:?}") },
            if extra.is_empty() { String::new() } else { format!(", extra {extra:?}") },
        ));
    }
    Outcome { pass: ok, summary: format!("{} label rows at primes {{2, 3}}", saito_reports().len()), notes }
}

// ---------------------------------------------------------------- criterion 7

fn funnyex_witness() -> std::result::Result<(), String> {
    let ls = CosetUnion::new(&[ivec(&[0, 0]), ivec(&[1, 0]), ivec(&[0, 1])], Lattice::diagonal(&[2, 2])).unwrap();
    let ars = AffineReflectionSystem::irreducible("B2".parse().unwrap(), ExtensionDatum::new(ls, cu(&[2, 2]), None)).unwrap();
    let h = Lattice::diagonal(&[2, 4]);
    let s = cu(&[2, 2]).union(&CosetUnion::new(&[ivec(&[1, 0]), ivec(&[1, 2])], h.clone()).unwrap()).unwrap();
    let params = FamilyParams::default().with_h(h.clone()).with_s(s).with_p(vec![ivec(&[0, 0]); 2]);
    let spec = classify::construct(&ars, FamilyId::L5_1_3, &params).map_err(|e| e.to_string())?;
    let w = classify::is_closed(&ars, &spec).map_err(|e| e.to_string())?.ok_or("funnyex reported closed")?;
    let target = ivec(&[2, 2]);
    let sys = ars.gradient();
    if sys.class(w.c) == LengthClass::Long && w.excess.contains(&target) && !h.contains(&target) {
        Ok(())
    } else {
        Err(format!("witness {w:?} does not exhibit (2,2)"))
    }
}

fn c7_closedness() -> Outcome {
    // family -> (agreeing specs, disagreeing specs, first disagreeing instance)
    let mut tally: BTreeMap<FamilyId, (usize, usize, Option<String>)> = BTreeMap::new();
    let mut record = |name: &str, ars: &AffineReflectionSystem, spec: &SubsystemSpec| {
        let closed = classify::is_closed(ars, spec).unwrap().is_none();
        for f in classify::spec_families(spec) {
            let e = tally.entry(f).or_default();
            if closed == f.closedness_expected() {
                e.0 += 1;
            } else {
                e.1 += 1;
                e.2.get_or_insert_with(|| name.to_string());
            }
        }
    };
    for inst in nullity_one() {
        for s in &inst.specs {
            record(&inst.name, &inst.ars, s);
        }
    }
    for r in saito_reports() {
        for v in &r.specs {
            record(&report_name(r), r.system(), &v.spec);
        }
    }
    let mut notes = Vec::new();
    let mut ok = true;
    for (f, (agree, disagree, first)) in &tally {
        if *disagree > 0 {
            ok = false;
            notes.push(format!(
                "{f}: expected {} but {disagree} of {} members are {} (first in {})",
                if f.closedness_expected() { "closed" } else { "not closed" },
                agree + disagree,
                if f.closedness_expected() { "not closed" } else { "closed" },
                first.as_deref().unwrap_or("?")
            ));
        }
    }
    let agreeing = tally.values().filter(|t| t.1 == 0).count();
    match funnyex_witness() {
        Ok(()) => notes.push("funnyex: witness (2,2) in (S+S) ∩ Λ_ℓ outside H".into()),
        Err(e) => {
            ok = false;
            notes.push(format!("funnyex: {e}"));
        }
    }
    Outcome { pass: ok, summary: format!("{agreeing} of {} families agree", tally.len()), notes }
}

// ---------------------------------------------------------------- criterion 8

fn c8_dual_closed() -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut check = |name: &str, ars: &AffineReflectionSystem, spec: &SubsystemSpec| {
        checked += 1;
        if !classify::closed_or_dual_closed(ars, spec).unwrap().holds() {
            violations.push(format!("{name}: {:?}", spec.tags()));
        }
    };
    for inst in nullity_one().iter().filter(|i| i.ars.is_reduced()) {
        for s in &inst.specs {
            check(&inst.name, &inst.ars, s);
        }
    }
    for r in saito_reports().iter().filter(|r| !r.label.name.is_non_reduced()) {
        for v in &r.specs {
            check(&report_name(r), r.system(), &v.spec);
        }
    }
    let z = || ExtensionDatum::new(cu(&[1]), cu(&[1]), None);
    let z2 = || ExtensionDatum::new(cu(&[1, 1]), cu(&[1, 1]), None);
    let products: Vec<(&str, Vec<ExtensionDatum>)> = vec![
        ("A1", vec![z()]),
        ("A1xA1", vec![z(), z()]),
        ("A1xA2", vec![z(), z()]),
        ("A1xG2", vec![z(), ExtensionDatum::new(cu(&[1]), cu(&[3]), None)]),
        ("A1xC3", vec![z(), ExtensionDatum::new(cu(&[1]), cu(&[2]), None)]),
        ("A1xB3", vec![z2(), z2()]),
    ];
    let mut product_specs = 0;
    for (t, data) in products {
        let ars = AffineReflectionSystem::new(FiniteRootSystem::parse(t).unwrap(), data).unwrap();
        let specs = classify::enumerate_maximal(&ars, SAITO_BOUND).unwrap();
        product_specs += specs.len();
        for s in &specs {
            check(t, &ars, s);
        }
    }
    let mut out = Outcome::new(
        violations.is_empty(),
        format!("{checked} maximal specs ({product_specs} in systems with A1 factors), {} violations", violations.len()),
    );
    out.notes.extend(violations.into_iter().take(10));
    out
}

// ---------------------------------------------------------------- criterion 9

fn c9_duality() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let (mut pairs, mut matched) = (0, 0);
    for r in saito_reports().iter().filter(|r| !r.label.name.is_non_reduced()) {
        let name = report_name(r);
        let ars = r.system();
        let m = r.label.lacing();
        let (dual, map) = ars.dual().unwrap();
        let (back, map_back) = dual.dual().unwrap();
        let scaled = ars.datum(0).scale(m);
        let d = back.datum(0);
        let involution = (0..map.len()).all(|i| map_back[map[i]] == i);
        if back.gradient().components() != ars.gradient().components()
            || (&d.lambda_s, &d.lambda_ell) != (&scaled.lambda_s, &scaled.lambda_ell)
            || !involution
        {
            ok = false;
            notes.push(format!("{name}: dual of the dual is not the datum scaled by {m}"));
        }
        let gradient_c = classify::is_type_c(ars);
        let dual_specs: Vec<(Vec<Option<CosetUnion>>, Vec<FamilyId>)> = classify::enumerate_maximal(&dual, SAITO_BOUND)
            .unwrap()
            .iter()
            .map(|s| (canonical(s), classify::spec_families(s)))
            .collect();
        let mut bad = Vec::new();
        for v in &r.specs {
            let (_, ds) = dual_spec(ars, &v.spec).unwrap();
            let key = canonical(&ds);
            let found = dual_specs.iter().find(|(y, _)| y == &key);
            for f in classify::spec_families(&v.spec) {
                pairs += 1;
                let want = f.dual_family(gradient_c);
                match (found, want) {
                    (Some((_, tags)), Some(w)) if tags.contains(&w) => matched += 1,
                    (None, _) => bad.push(format!("{f}: dual member not among the dual's maximal subsystems")),
                    (Some((_, tags)), w) => bad.push(format!("{f}: dual tagged {tags:?}, expected {w:?}")),
                }
            }
        }
        if !bad.is_empty() {
            ok = false;
            bad.sort();
            bad.dedup();
            notes.push(format!("{name}: {}", bad.join("; ")));
        }
    }
    Outcome { pass: ok, summary: format!("{matched} of {pairs} family pairs correspond"), notes }
}

