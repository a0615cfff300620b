#![no_main]

use libfuzzer_sys::fuzz_target;
use roundcount::sim::ResultRow;
use roundcount::table::{parse_table, write_csv};

// Anything that parses must survive a write/parse round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(table) = parse_table::<ResultRow>(s) else { return };
    let config = table.config.clone().unwrap_or(serde_json::Value::Null);
    let again = parse_table::<ResultRow>(&write_csv(&config, &table.rows)).expect("re-parse");
    assert_eq!(again.rows.len(), table.rows.len());
});
