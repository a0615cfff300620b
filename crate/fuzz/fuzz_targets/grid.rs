#![no_main]

use libfuzzer_sys::fuzz_target;
use roundcount::grid::{parse_grid, parse_int_list};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(g) = parse_grid(s) {
        assert!(g.len() <= roundcount::grid::MAX_GRID_POINTS);
        assert!(g.iter().all(|v| v.is_finite()));
    }
    if let Ok(v) = parse_int_list(s) {
        assert!(v.len() <= roundcount::grid::MAX_GRID_POINTS);
    }
});
