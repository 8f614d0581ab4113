use std::sync::OnceLock;

use reflecta::ars::validate_datum;
use reflecta::rootsys::LengthClass;
use reflecta::lattice::{ivec, CosetUnion, Lattice};
use reflecta::saito::*;

fn lat(rows: &[&[i64]]) -> Lattice {
    Lattice::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn union(reps: &[&[i64]], base: &Lattice) -> CosetUnion {
    CosetUnion::new(&reps.iter().map(|r| ivec(r)).collect::<Vec<_>>(), base.clone()).unwrap()
}

#[test]
fn every_datum_validates() {
    for n in SaitoName::ALL {
        for label in SaitoLabel::defaults(n) {
            let sys = label.system().unwrap();
            assert!(validate_datum(sys.gradient(), 0, &saito_datum(&label)).is_empty(), "{label}");
        }
    }
}

#[test]
fn datum_examples() {
    let b = SaitoLabel::new(SaitoName::Phi1m, GradientClass::B, 3).unwrap();
    let d = saito_datum(&b);
    assert_eq!(d.lambda_s, CosetUnion::lattice(Lattice::standard(2)));
    assert_eq!(d.lambda_ell, CosetUnion::lattice(Lattice::diagonal(&[1, 2])));
    let g = SaitoLabel::new(SaitoName::PhiM1, GradientClass::Other, 2).unwrap();
    assert_eq!(saito_datum(&g).lambda_ell, CosetUnion::lattice(Lattice::diagonal(&[3, 1])));

    let two = Lattice::diagonal(&[2, 2]);
    let star = SaitoLabel::new(SaitoName::BStar, GradientClass::B, 2).unwrap();
    let d = saito_datum(&star);
    assert!(d.lambda_s.set_eq(&union(&[&[0, 0], &[1, 0], &[0, 1]], &two)).unwrap());
    assert_eq!(d.lambda_ell, CosetUnion::lattice(two.clone()));

    let bc = SaitoLabel::new(SaitoName::Bc24, GradientClass::BC, 2).unwrap();
    let d = saito_datum(&bc);
    assert_eq!(d.lambda_ell, CosetUnion::lattice(Lattice::diagonal(&[1, 2])));
    assert!(d.lambda_d.unwrap().set_eq(&union(&[&[1, 0]], &Lattice::diagonal(&[2, 4]))).unwrap());
}

#[test]
fn case_two_first_shape_odd_prime() {
    let h = Lattice::diagonal(&[6, 2]);
    let f = rank2_forms(&Lattice::diagonal(&[2, 2]), &h).unwrap();
    assert_eq!(f.case, "II.1");
    assert!(f.s_bound.set_eq(&union(&[&[0, 0], &[3, 0], &[3, 1], &[0, 1]], &h)).unwrap());
    assert_eq!(f.h_prime, Lattice::diagonal(&[3, 1]));
}

#[test]
fn case_two_second_shape_p2_x0() {
    let ell = Lattice::diagonal(&[2, 2]);
    let h = lat(&[&[2, 0], &[0, 4]]);
    let f = rank2_forms(&ell, &h).unwrap();
    let expect = CosetUnion::lattice(ell).union(&union(&[&[1, 0], &[1, 2]], &h)).unwrap();
    assert!(f.s_bound.set_eq(&expect).unwrap());
}

#[test]
fn case_three_even_y() {
    // Λ_ℓ = [[2,0],[0,1]], p = 5, y = 2
    let f = rank2_forms(&Lattice::diagonal(&[2, 1]), &lat(&[&[2, 2], &[0, 5]])).unwrap();
    assert_eq!(f.case, "III");
    assert_eq!(f.h_prime, lat(&[&[1, 1], &[0, 5]]));
}

#[test]
fn every_admissible_h_has_a_form() {
    let shapes = [lat(&[&[2, 0], &[0, 2]]), lat(&[&[2, 0], &[0, 1]]), lat(&[&[1, 0], &[0, 2]]), lat(&[&[1, 1], &[0, 2]])];
    let two = Lattice::diagonal(&[2, 2]);
    for ell in &shapes {
        for p in [2, 3, 5, 7] {
            for h in ell.maximal_sublattices(p).unwrap() {
                let r = rank2_forms(ell, &h);
                if h.sum(&two).unwrap() == *ell {
                    let f = r.unwrap_or_else(|e| panic!("{e}"));
                    assert!(f.h_prime.contains_lattice(&h));
                } else {
                    assert!(r.is_err());
                }
            }
        }
    }
}

#[test]
fn unrecognised_shape_is_an_error() {
    assert!(rank2_forms(&Lattice::standard(2), &Lattice::diagonal(&[3, 1])).is_err());
    assert!(rank2_forms(&Lattice::diagonal(&[2, 2]), &Lattice::diagonal(&[4, 4])).is_err());
}

fn reports() -> &'static [SaitoReport] {
    static REPORTS: OnceLock<Vec<SaitoReport>> = OnceLock::new();
    REPORTS.get_or_init(|| {
        SaitoName::ALL
            .iter()
            .flat_map(|&n| SaitoLabel::defaults(n))
            .map(|l| saito_classify(&l, 3).unwrap_or_else(|e| panic!("{l}: {e}")))
            .collect()
    })
}

#[test]
fn every_member_is_verified_maximal() {
    for r in reports() {
        assert!(!r.specs.is_empty(), "{}", r.label);
        for v in &r.specs {
            assert_eq!(v.verdict.as_str(), "verified", "{}: {} {:?}", r.label, v.spec.family, v.spec.params);
        }
    }
}

#[test]
fn reduced_classes_reproduce_their_catalog_rows() {
    for r in reports().iter().filter(|r| !r.label.name.is_non_reduced()) {
        assert_eq!(r.found, r.expected, "{}", r.label);
    }
}

#[test]
fn full_short_sets_confine_divisible_roots_to_h() {
    // Over a B part with full short sets, Y_d ⊆ H, so a maximal member needs Λ_d ⊆ H.
    for r in reports().iter().filter(|r| r.label.name.is_non_reduced()) {
        let d = saito_datum(&r.label);
        let ld = d.lambda_d.unwrap();
        let gll = d.lambda_ell.generated();
        let admits = [2, 3].iter().flat_map(|&p| gll.maximal_sublattices(p).unwrap()).any(|h| {
            h.contains_lattice(&Lattice::diagonal(&[2, 2])) && ld.subset_of(&CosetUnion::lattice(h)).unwrap()
        });
        assert_eq!(r.found.contains("NR_P6_5_2"), admits, "{}", r.label);
    }
}

#[test]
fn first_family_collapses_for_intermediate_long_lattice() {
    for r in reports() {
        let m = r.label.lacing();
        let collapses = matches!(r.label.gradient, GradientClass::C | GradientClass::Other)
            && matches!(r.label.name, SaitoName::Phi1m | SaitoName::PhiM1);
        if !collapses {
            continue;
        }
        let m_ls = Lattice::standard(2).scale_i(m);
        let sys = r.system().gradient();
        let mut seen = 0;
        for v in r.specs.iter().filter(|v| v.spec.has_tag("L4_1_1")) {
            for i in 0..sys.len() {
                if sys.class(i) == LengthClass::Long {
                    let y = v.spec.y[i].as_ref().unwrap();
                    assert_eq!(y.base(), &m_ls, "{}", r.label);
                    assert_eq!(y.reps().len(), 1, "{}", r.label);
                }
            }
            seen += 1;
        }
        assert!(seen > 0, "{}", r.label);
    }
}

#[test]
fn rank2_forms_match_enumerated_short_sets() {
    for r in reports().iter().filter(|r| r.label.gradient == GradientClass::B && !r.rank2_forms.is_empty()) {
        let sys = r.system().gradient();
        let ls = &saito_datum(&r.label).lambda_s;
        let short = (0..sys.len()).find(|&i| sys.class(i) == LengthClass::Short).unwrap();
        let long = (0..sys.len()).find(|&i| sys.class(i) == LengthClass::Long).unwrap();
        let members: Vec<_> = r.specs.iter().filter(|v| v.spec.has_tag("L5_1_3")).collect();
        for v in &members {
            let h = v.spec.y[long].as_ref().unwrap().base().clone();
            let form = r.rank2_forms.iter().find(|f| f.h == h).unwrap_or_else(|| panic!("{}: no form for {h}", r.label));
            let ys = v.spec.y[short].as_ref().unwrap();
            let hit = Lattice::standard(2).coset_reps(&h).unwrap().iter().any(|c| {
                form.s_bound.translate(c).intersect(ls).unwrap().set_eq(ys).unwrap()
            });
            assert!(hit, "{}: short set {ys:?} is not a translate of the bound for {h}", r.label);
        }
        for f in r.rank2_forms.iter().filter(|f| f.p != 2) {
            assert!(
                members.iter().any(|v| v.spec.y[long].as_ref().unwrap().base() == &f.h),
                "{}: form for {} has no member",
                r.label,
                f.h
            );
        }
    }
}

#[test]
fn report_json_is_versioned_and_stable() {
    let r = &reports()[0];
    let a = serde_json::to_string(&r.to_json()).unwrap();
    let b = serde_json::to_string(&r.to_json()).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema"], "v1");
    assert_eq!(v["label"], "Phi(1,1)");
}
