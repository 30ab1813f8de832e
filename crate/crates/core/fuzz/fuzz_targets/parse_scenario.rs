#![no_main]

use libfuzzer_sys::fuzz_target;
use shapereg::simgen::ScenarioId;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(id) = text.parse::<ScenarioId>() {
        assert_eq!(id.to_string().parse::<ScenarioId>().unwrap(), id);
    }
    if let Ok(spec) = serde_json::from_str::<shapereg::ScenarioSpec>(text) {
        let _ = spec.validate();
    }
});
