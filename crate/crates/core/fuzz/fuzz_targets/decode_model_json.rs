#![no_main]

use libfuzzer_sys::fuzz_target;
use shapereg::decode_model_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = decode_model_json(text) {
        let d = model.model.dim();
        for q in [-1.0, 0.0, 0.5, 2.0] {
            let _ = model.model.predict(&vec![q; d]).unwrap();
        }
        let again = decode_model_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(again, model);
    }
});
