#![no_main]

use libfuzzer_sys::fuzz_target;
use shapereg::data::{read_csv, read_numeric_csv, write_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = read_numeric_csv(data) {
        assert!(table.rows.iter().flatten().all(|v| v.is_finite()));
    }
    if let Ok((ds, _)) = read_csv(data, "y") {
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let (back, _) = read_csv(buf.as_slice(), "y").unwrap();
        assert_eq!(back.y(), ds.y());
        assert_eq!(back.x(), ds.x());
    }
});
