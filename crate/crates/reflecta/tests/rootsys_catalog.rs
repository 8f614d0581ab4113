use std::time::Instant;

use reflecta::rootsys::{FiniteRootSystem, LengthClass};

#[test]
fn catalog_matches_brute_force_on_small_systems() {
    for t in ["A1", "A2", "A3", "A4", "B2", "B3", "B4", "C3", "C4", "D4", "G2", "BC2", "BC3", "A1xA1", "B2xA1", "G2xA1"] {
        let s = FiniteRootSystem::parse(t).unwrap();
        let start = Instant::now();
        let brute = s.brute_force_maximal();
        let cat = s.finite_maximal_subsystems().unwrap();
        assert_eq!(cat, brute, "{t}");
        eprintln!("{t}: {} maximal subsystems, {:?}", cat.len(), start.elapsed());
    }
}

#[test]
fn b3_psi_j_are_maximal() {
    let b3 = FiniteRootSystem::parse("B3").unwrap();
    for mask in 1u32..8 {
        let j: Vec<usize> = (0..3).filter(|k| mask >> k & 1 == 1).collect();
        let psi = b3.b_psi_j(0, &j);
        if mask == 7 {
            assert_eq!(psi, b3.full());
        } else {
            assert!(b3.is_maximal(&psi), "{j:?}");
        }
    }
}

#[test]
fn large_catalogs_are_maximal() {
    for t in ["F4", "E6", "E7", "E8", "D5", "C5"] {
        let s = FiniteRootSystem::parse(t).unwrap();
        let start = Instant::now();
        let cat = s.finite_maximal_subsystems().unwrap();
        assert!(!cat.is_empty());
        for m in cat.iter().take(40) {
            assert!(s.is_maximal(m), "{t}");
        }
        let sizes: std::collections::BTreeSet<usize> = cat.iter().map(|m| m.count()).collect();
        eprintln!("{t}: {} maximal subsystems of sizes {sizes:?} in {:?}", cat.len(), start.elapsed());
    }
}

#[test]
fn length_classes_of_g2_and_c3_are_maximal() {
    let g2 = FiniteRootSystem::parse("G2").unwrap();
    assert!(g2.is_maximal(&g2.by_class(LengthClass::Short)));
    assert!(g2.is_maximal(&g2.by_class(LengthClass::Long)));
}
