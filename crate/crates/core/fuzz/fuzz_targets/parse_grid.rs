#![no_main]

use libfuzzer_sys::fuzz_target;
use shapereg::AlphaGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = AlphaGrid::parse(text, true) {
        assert!(!grid.is_empty());
        assert!(grid.values().iter().flatten().all(|a| a.is_finite() && *a >= 0.0));
        let back = AlphaGrid::parse(&grid.to_string(), false).unwrap();
        assert_eq!(back.values(), grid.values());
    }
});
