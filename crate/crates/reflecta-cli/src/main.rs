//! `reflecta`: JSON front end for lattice algebra, subsystem classification and the quotient oracle.
//!
//! Every JSON argument may be given inline, as `@path` to read a file, or as `-` for stdin.
//! Output is one JSON document on stdout. Exit codes: 0 success, 2 invalid input, 3 oracle
//! budget exceeded.

use std::io::{Read, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use reflecta::ars::{self, AffineReflectionSystem, Certification, SpecJson, SubsystemSpec, SCHEMA};
use reflecta::classify::{self, ClassifyError, MaximalityVerdict};
use reflecta::lattice::{primes_up_to, vec_from_json, vec_to_json, CombineMode, IVec, JsonInt, Lattice, LatticeJson};
use reflecta::oracle::{self, Maximality, OracleError, QuotientModel};
use reflecta::saito::{self, GradientClass, SaitoError, SaitoLabel, SaitoName};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "reflecta", version, about = "Maximal root subsystems of affine reflection systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hermite normal form of the lattice spanned by integer rows.
    Hnf {
        #[arg(long)]
        rows: String,
    },
    /// Lattice operations on row-generated lattices.
    Lattice {
        #[command(subcommand)]
        op: LatticeOp,
    },
    /// Enumerate maximal subsystems of an irreducible system, each checked by the oracle.
    Classify {
        #[arg(long)]
        system: String,
        #[arg(long, default_value_t = 3)]
        prime_bound: u64,
    },
    /// Check a subsystem description: subsystem, maximality, closedness.
    Verify {
        #[arg(long)]
        system: String,
        #[arg(long)]
        spec: String,
    },
    /// Brute-force maximal subsystems in a finite quotient, or the verdict for one spec.
    Oracle {
        #[arg(long)]
        system: String,
        /// Refine the model by every maximal sublattice of index up to this prime.
        #[arg(long)]
        prime_bound: Option<u64>,
        #[arg(long)]
        spec: Option<String>,
    },
    /// The nullity-2 Saito classes.
    Saito {
        #[command(subcommand)]
        op: SaitoOp,
    },
    /// Dual system (reduced gradients only).
    Dual {
        #[arg(long)]
        system: String,
    },
}

#[derive(Subcommand)]
enum LatticeOp {
    /// Exact det(M Mᵗ) of the HNF basis.
    Det {
        #[arg(long)]
        rows: String,
    },
    Member {
        #[arg(long)]
        rows: String,
        #[arg(long)]
        vector: String,
    },
    Combine {
        #[arg(long)]
        rows: String,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Second lattice for sum and intersection.
        #[arg(long)]
        other: Option<String>,
        /// Factor for scale.
        #[arg(long, allow_hyphen_values = true)]
        factor: Option<i64>,
    },
    /// Maximal sublattices of index p.
    Maximal {
        #[arg(long)]
        rows: String,
        #[arg(long)]
        prime: u64,
    },
    /// Stacked basis and elementary divisors of a sublattice.
    Stacked {
        #[arg(long)]
        rows: String,
        #[arg(long)]
        sub: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sum,
    Intersection,
    Scale,
}

#[derive(Subcommand)]
enum SaitoOp {
    /// Labels and their gradient classes.
    List,
    /// Classify one label and compare with its catalog row.
    Classify {
        label: String,
        /// B, C, other or BC; required when the label has several.
        #[arg(long)]
        gradient: Option<String>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 3)]
        prime_bound: u64,
    },
}

/// A failure reported as a JSON error object.
#[derive(Debug)]
enum CliError {
    Json(String),
    Invalid(String),
    Budget(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Budget(_) => 3,
            _ => 2,
        }
    }

    fn to_json(&self) -> Value {
        let (kind, msg) = match self {
            CliError::Json(m) => ("malformed_json", m),
            CliError::Invalid(m) => ("validation", m),
            CliError::Budget(m) => ("budget_exceeded", m),
        };
        json!({ "schema": SCHEMA, "error": { "kind": kind, "message": msg } })
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::Oracle(o) => o.into(),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<SaitoError> for CliError {
    fn from(e: SaitoError) -> Self {
        match e {
            SaitoError::Classify(c) => c.into(),
            e => CliError::Invalid(e.to_string()),
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        }
    )*};
}
invalid_from!(ars::ArsError, reflecta::lattice::LatticeError);

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (doc, code) = match run(cli.command) {
        Ok(v) => (v, 0),
        Err(e) => (e.to_json(), e.code()),
    };
    // A closed pipe downstream is not our failure.
    let _ = writeln!(std::io::stdout().lock(), "{doc}");
    ExitCode::from(code)
}

/// Reads an argument that is inline JSON, `@file`, or `-` for stdin.
fn read_arg(arg: &str) -> Result<Value> {
    let text = if arg == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Invalid(format!("stdin: {e}")))?;
        s
    } else if let Some(path) = arg.strip_prefix('@') {
        std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{path}: {e}")))?
    } else {
        arg.to_string()
    };
    Ok(serde_json::from_str(&text)?)
}

fn parse_rows(arg: &str) -> Result<Vec<IVec>> {
    let rows: Vec<Vec<JsonInt>> = serde_json::from_value(read_arg(arg)?)?;
    rows.iter().map(|r| vec_from_json(r).map_err(CliError::Json)).collect()
}

/// A lattice given either as a row list or as `{"dim":..,"hnf":..}`.
fn parse_lattice(arg: &str) -> Result<Lattice> {
    let v = read_arg(arg)?;
    if v.is_object() {
        let lj: LatticeJson = serde_json::from_value(v)?;
        return lj.to_lattice().map_err(CliError::Invalid);
    }
    let rows: Vec<Vec<JsonInt>> = serde_json::from_value(v)?;
    let rows: Vec<IVec> = rows.iter().map(|r| vec_from_json(r).map_err(CliError::Json)).collect::<Result<_>>()?;
    Ok(Lattice::hnf(&rows)?)
}

fn parse_system(arg: &str) -> Result<AffineReflectionSystem> {
    let v = read_arg(arg)?;
    if !v.is_object() {
        return Err(CliError::Json("system must be a JSON object".into()));
    }
    Ok(AffineReflectionSystem::from_json(&v)?)
}

fn parse_spec(ars: &AffineReflectionSystem, arg: &str) -> Result<SubsystemSpec> {
    let j: SpecJson = serde_json::from_value(read_arg(arg)?)?;
    Ok(SubsystemSpec::from_json(ars, &j)?)
}

fn lattice_doc(l: &Lattice) -> Value {
    let mut v = serde_json::to_value(l).expect("lattices serialize");
    v["schema"] = json!(SCHEMA);
    v
}

fn certification(v: &MaximalityVerdict) -> Certification {
    match v {
        MaximalityVerdict::Verified { modulus } => Certification::VerifiedAtModulus { modulus: modulus.clone() },
        MaximalityVerdict::Undecided { .. } => Certification::Subsystem,
        MaximalityVerdict::NotMaximal => Certification::NotMaximal,
    }
}

fn run(cmd: Command) -> Result<Value> {
    match cmd {
        Command::Hnf { rows } => Ok(lattice_doc(&Lattice::hnf(&parse_rows(&rows)?)?)),
        Command::Lattice { op } => run_lattice(op),
        Command::Classify { system, prime_bound } => {
            let ars = parse_system(&system)?;
            let budget = oracle::budget();
            let specs = classify::enumerate_maximal(&ars, prime_bound)?
                .iter()
                .map(|s| Ok(s.to_json(&ars, Some(certification(&classify::is_maximal(&ars, s, budget)?)))))
                .collect::<Result<Vec<_>>>()?;
            Ok(json!({
                "schema": SCHEMA,
                "gradient": ars.to_json()["gradient"],
                "prime_bound": prime_bound,
                "specs": specs,
            }))
        }
        Command::Verify { system, spec } => {
            let ars = parse_system(&system)?;
            let spec = parse_spec(&ars, &spec)?;
            verify(&ars, &spec)
        }
        Command::Oracle { system, prime_bound, spec } => {
            let ars = parse_system(&system)?;
            let mut extras = match prime_bound {
                Some(p) => oracle::refinement_lattices(&ars, p)?,
                None => Vec::new(),
            };
            let spec = spec.map(|s| parse_spec(&ars, &s)).transpose()?;
            if let Some(s) = &spec {
                extras.extend(s.y.iter().flatten().map(|y| y.stabilizer()));
            }
            let model = QuotientModel::build(&ars, &extras, oracle::budget())?;
            let mut doc = json!({
                "schema": SCHEMA,
                "modulus": model.modulus(),
                "group_order": model.group_order(),
            });
            match spec {
                Some(s) => {
                    let image = model.image(&s)?;
                    let closed = model.is_closed_under_reflections(&image);
                    doc["is_subsystem"] = json!(closed);
                    doc["maximality"] = if !closed {
                        json!("not_subsystem")
                    } else {
                        match model.is_maximal(&image)? {
                            Maximality::Maximal => json!("maximal"),
                            Maximality::NotProper => json!("not_proper"),
                            Maximality::Extendable { witness, closure_size } => {
                                let r = model.decode(witness);
                                json!({
                                    "extendable": {
                                        "root": r.root,
                                        "translation": vec_to_json(&r.translation),
                                        "closure_size": closure_size,
                                    }
                                })
                            }
                        }
                    };
                }
                None => {
                    let maximal = model
                        .enumerate_maximal()?
                        .iter()
                        .map(|set| Ok(model.to_spec(set, "oracle")?.to_json(&ars, None)))
                        .collect::<Result<Vec<_>>>()?;
                    doc["maximal"] = json!(maximal);
                }
            }
            Ok(doc)
        }
        Command::Saito { op } => run_saito(op),
        Command::Dual { system } => {
            let ars = parse_system(&system)?;
            let (dual, map) = ars.dual()?;
            let mut doc = dual.to_json();
            doc["root_map"] = json!(map);
            Ok(doc)
        }
    }
}

fn verify(ars: &AffineReflectionSystem, spec: &SubsystemSpec) -> Result<Value> {
    let is_sub = ars::is_subsystem(ars, spec)?;
    let verdict = if is_sub {
        classify::is_maximal(ars, spec, oracle::budget())?
    } else {
        MaximalityVerdict::NotMaximal
    };
    let witness = classify::is_closed(ars, spec)?;
    let dual_closure = if ars.is_reduced() { Some(classify::closed_or_dual_closed(ars, spec)?.as_str()) } else { None };
    let mut doc = json!({
        "schema": SCHEMA,
        "is_subsystem": is_sub,
        "is_maximal": verdict.as_str(),
        "is_closed": witness.is_none(),
        "closed_or_dual_closed": dual_closure,
    });
    match &verdict {
        MaximalityVerdict::Verified { modulus } => doc["modulus"] = json!(modulus),
        MaximalityVerdict::Undecided { reason } => doc["undecided_reason"] = json!(reason),
        MaximalityVerdict::NotMaximal => {}
    }
    if let Some(w) = witness {
        doc["closure_witness"] = json!({ "a": w.a, "b": w.b, "c": w.c, "excess": w.excess });
    }
    Ok(doc)
}

fn run_lattice(op: LatticeOp) -> Result<Value> {
    Ok(match op {
        LatticeOp::Det { rows } => {
            let l = parse_lattice(&rows)?;
            json!({
                "schema": SCHEMA,
                "determinant_sq": JsonInt::from(&l.determinant_sq()),
                "determinant": l.determinant().as_ref().map(JsonInt::from),
            })
        }
        LatticeOp::Member { rows, vector } => {
            let l = parse_lattice(&rows)?;
            let v: Vec<JsonInt> = serde_json::from_value(read_arg(&vector)?)?;
            let v = vec_from_json(&v).map_err(CliError::Json)?;
            json!({ "schema": SCHEMA, "member": l.member(&v)? })
        }
        LatticeOp::Combine { rows, mode, other, factor } => {
            let l = parse_lattice(&rows)?;
            let mode = match mode {
                Mode::Scale => {
                    CombineMode::Scale(factor.ok_or_else(|| CliError::Invalid("scale needs --factor".into()))?.into())
                }
                Mode::Sum => CombineMode::Sum,
                Mode::Intersection => CombineMode::Intersection,
            };
            let other = match (&mode, other) {
                (CombineMode::Scale(_), _) => l.clone(),
                (_, Some(o)) => parse_lattice(&o)?,
                (_, None) => return Err(CliError::Invalid("sum and intersection need --other".into())),
            };
            lattice_doc(&l.combine(&other, &mode)?)
        }
        LatticeOp::Maximal { rows, prime } => {
            let l = parse_lattice(&rows)?;
            let subs = l.maximal_sublattices(prime)?;
            json!({ "schema": SCHEMA, "prime": prime, "sublattices": subs })
        }
        LatticeOp::Stacked { rows, sub } => {
            let l = parse_lattice(&rows)?;
            let s = parse_lattice(&sub)?;
            let sb = l.stacked_basis(&s)?;
            json!({
                "schema": SCHEMA,
                "basis": sb.basis.iter().map(|r| vec_to_json(r)).collect::<Vec<_>>(),
                "divisors": sb.divisors.iter().map(JsonInt::from).collect::<Vec<_>>(),
            })
        }
    })
}

fn run_saito(op: SaitoOp) -> Result<Value> {
    match op {
        SaitoOp::List => {
            let labels: Vec<Value> = SaitoName::ALL
                .iter()
                .map(|n| {
                    json!({
                        "label": n.as_str(),
                        "non_reduced": n.is_non_reduced(),
                        "gradient_classes": n.gradient_classes().iter().map(|g| g.as_str()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            Ok(json!({ "schema": SCHEMA, "labels": labels }))
        }
        SaitoOp::Classify { label, gradient, rank, prime_bound } => {
            let name: SaitoName = label.parse()?;
            let gradient = match gradient {
                Some(g) => g.parse::<GradientClass>()?,
                None => match name.gradient_classes() {
                    [g] => *g,
                    gs => {
                        return Err(CliError::Invalid(format!(
                            "{} needs --gradient (one of {})",
                            name.as_str(),
                            gs.iter().map(|g| g.as_str()).collect::<Vec<_>>().join(", ")
                        )))
                    }
                },
            };
            if primes_up_to(prime_bound).is_empty() {
                return Err(CliError::Invalid(format!("prime bound must be at least 2, got {prime_bound}")));
            }
            let label = SaitoLabel::new(name, gradient, rank.unwrap_or_else(|| gradient.default_rank()))?;
            Ok(saito::saito_classify(&label, prime_bound)?.to_json())
        }
    }
}
