#![no_main]
use ergodic_lab::lattice::ShiftFamily;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(family) = ShiftFamily::from_json_str(text) else { return };
    let back = ShiftFamily::from_json_str(&family.to_json_string()).expect("round trip");
    assert_eq!(family, back);
    if family.len() <= 8 && family.space().dims() <= 8 {
        // rank-nullity must hold for anything that parses
        let rank = family.rank();
        let kernel = family.relation_kernel();
        assert_eq!(rank + kernel.len(), family.len());
        for rel in &kernel {
            assert!(family.check_relation(&rel.coeffs));
        }
    }
});
