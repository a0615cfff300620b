#![no_main]

use libfuzzer_sys::fuzz_target;
use roundcount::table::parse_table;
use roundcount_cli::rows::{
    BinnedTestRow, ExcessRow, MleRow, MomentsRow, MseExactRow, MseRatioRow, PgfCheckRow, PmfRow,
    SignificanceRow,
};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let _ = parse_table::<PmfRow>(s);
    let _ = parse_table::<PgfCheckRow>(s);
    let _ = parse_table::<MomentsRow>(s);
    let _ = parse_table::<MleRow>(s);
    let _ = parse_table::<MseExactRow>(s);
    let _ = parse_table::<MseRatioRow>(s);
    let _ = parse_table::<BinnedTestRow>(s);
    let _ = parse_table::<SignificanceRow>(s);
    let _ = parse_table::<ExcessRow>(s);
});
