#![no_main]
use ergodic_lab::space::{GridFunction, GridSpace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for moduli in [vec![4u64], vec![2, 3], vec![16]] {
        let space = GridSpace::new(moduli).expect("valid space");
        if let Ok(f) = GridFunction::parse_csv(space.clone(), data) {
            // whatever parsed must print and parse back to the same values
            let text = f.to_csv_string();
            let back = GridFunction::parse_csv(space, text.as_bytes()).expect("round trip");
            for i in 0..f.len() {
                assert_eq!(f.value(i).to_bits(), back.value(i).to_bits());
            }
        }
    }
});
