#![no_main]
use ergodic_lab::cli::{validate, ExperimentConfig, COMMANDS};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = ExperimentConfig::from_json_str(text) else { return };
    // validation must never panic, whatever the config says
    for command in COMMANDS {
        let _ = validate(&config, command);
    }
    // a parsed config reserializes and reparses to the same document
    let json = serde_json::to_string(&config).expect("config serializes");
    let _ = ExperimentConfig::from_json_str(&json).expect("round trip parses");
});
