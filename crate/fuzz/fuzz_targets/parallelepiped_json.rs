#![no_main]
use ergodic_lab::geometry::{decompose, Parallelepiped};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(r) = Parallelepiped::from_json_str(text) else { return };
    let back = Parallelepiped::from_json_str(&r.to_json_string()).expect("round trip");
    assert_eq!(r.radii().len(), back.radii().len());
    if r.len() <= 8 && r.dim() <= 8 {
        if let Ok(d) = decompose(&r) {
            // the containment constant can never undercut the body itself
            assert!(d.containment >= 1.0 - 1e-6);
            assert!(!d.independent.is_empty());
        }
    }
});
