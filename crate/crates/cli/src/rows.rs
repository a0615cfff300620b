//! Output row types, one per subcommand.

use roundcount::apps::SignificanceMode;
use roundcount::estimation::EstimatorKind;
use roundcount::Family;
use serde::{Deserialize, Serialize};

pub use roundcount::sim::ResultRow as MseSimRow;

roundcount::csv_record! {
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct PmfRow {
        pub n: u64,
        pub u: u64,
        pub prob: f64,
    }
}

roundcount::csv_record! {
    /// `closed_*` are NaN where the point falls inside a guard radius.
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct PgfCheckRow {
        pub n: u64,
        pub s_re: f64,
        pub s_im: f64,
        pub closed_re: f64,
        pub closed_im: f64,
        pub series_re: f64,
        pub series_im: f64,
        pub abs_diff: f64,
        pub guarded: bool,
    }
}

roundcount::csv_record! {
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct MomentsRow {
        pub n: u64,
        pub method: String,
        pub mean: f64,
        pub variance: f64,
        pub imag_residual: f64,
    }
}

roundcount::csv_record! {
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct MleRow {
        pub u: u64,
        pub n: u64,
        pub method: String,
        pub value: f64,
        pub loglik: f64,
        pub converged: bool,
    }
}

roundcount::csv_record! {
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct MseExactRow {
        pub family: Family,
        pub param: f64,
        pub n: u64,
        pub estimator: EstimatorKind,
        pub mse: f64,
    }
}

roundcount::csv_record! {
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct MseRatioRow {
        pub family: Family,
        pub param: f64,
        pub n: u64,
        pub mse_rounded: f64,
        pub mse_unrounded: f64,
        pub psi: f64,
    }
}

roundcount::csv_record! {
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct BinnedTestRow {
        pub u: u64,
        pub m: u64,
        pub n: u64,
        pub phi0: f64,
        pub alpha: f64,
        pub reject: bool,
        pub true_level: f64,
        pub lower_critical: Option<u64>,
        pub upper_critical: Option<u64>,
    }
}

roundcount::csv_record! {
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct SignificanceRow {
        pub mode: SignificanceMode,
        pub m: u64,
        pub n: u64,
        pub alpha: f64,
        pub phi0: f64,
        pub true_level: f64,
    }
}

roundcount::csv_record! {
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct ExcessRow {
        pub n1: u64,
        pub n2: u64,
        pub theta: f64,
        pub beta: f64,
        pub mean_xi: f64,
        pub var_xi: f64,
        pub mean_xi_star: f64,
        pub var_xi_star: f64,
        pub u1: Option<u64>,
        pub u2: Option<u64>,
        pub xi: Option<f64>,
        pub xi_mle: Option<f64>,
    }
}
