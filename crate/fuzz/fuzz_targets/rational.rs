#![no_main]
use ergodic_lab::lattice::{parse_rational, rotation_to_shift};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(ratio) = parse_rational(text) else { return };
    assert!(*ratio.denom() > 0, "parsed rationals are normalized");
    if ratio.numer().unsigned_abs() < ratio.denom().unsigned_abs()
        && *ratio.denom() <= 1 << 12
    {
        let family = rotation_to_shift(&[ratio], 1).expect("proper fraction conjugates");
        assert_eq!(family.space().dims(), 1);
    }
});
