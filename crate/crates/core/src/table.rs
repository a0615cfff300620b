//! Flat CSV tables with a resolved-config header.
//!
//! Layout: one `# config {json}` comment line, one header row, then data
//! rows, LF-terminated. Reals are written with 17 significant digits so a
//! table re-parses to bit-identical values.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// A value that occupies one CSV cell.
pub trait CsvField: Sized {
    fn to_field(&self) -> String;
    fn from_field(s: &str) -> Result<Self>;
}

impl CsvField for f64 {
    fn to_field(&self) -> String {
        if self.is_finite() {
            format!("{self:.16e}")
        } else {
            self.to_string()
        }
    }

    fn from_field(s: &str) -> Result<Self> {
        s.parse().map_err(|_| Error::Parse(format!("invalid number `{s}`")))
    }
}

macro_rules! int_field {
    ($($t:ty),*) => {$(
        impl CsvField for $t {
            fn to_field(&self) -> String {
                self.to_string()
            }

            fn from_field(s: &str) -> Result<Self> {
                s.parse().map_err(|_| Error::Parse(format!("invalid integer `{s}`")))
            }
        }
    )*};
}

int_field!(u64, i64, usize);

impl CsvField for bool {
    fn to_field(&self) -> String {
        self.to_string()
    }

    fn from_field(s: &str) -> Result<Self> {
        s.parse().map_err(|_| Error::Parse(format!("invalid boolean `{s}`")))
    }
}

impl CsvField for String {
    fn to_field(&self) -> String {
        self.clone()
    }

    fn from_field(s: &str) -> Result<Self> {
        Ok(s.to_owned())
    }
}

/// Empty cell for `None`.
impl<T: CsvField> CsvField for Option<T> {
    fn to_field(&self) -> String {
        self.as_ref().map(T::to_field).unwrap_or_default()
    }

    fn from_field(s: &str) -> Result<Self> {
        if s.is_empty() {
            Ok(None)
        } else {
            T::from_field(s).map(Some)
        }
    }
}

/// Implement [`CsvField`] through `Display` and `FromStr`.
#[macro_export]
macro_rules! display_field {
    ($($t:ty),* $(,)?) => {$(
        impl $crate::table::CsvField for $t {
            fn to_field(&self) -> String {
                self.to_string()
            }

            fn from_field(s: &str) -> $crate::Result<Self> {
                s.parse::<$t>().map_err(|e| $crate::Error::Parse(e.to_string()))
            }
        }
    )*};
}

display_field!(
    crate::dist::Family,
    crate::rounding::TieRule,
    crate::estimation::EstimatorKind,
    crate::estimation::Method,
    crate::apps::SignificanceMode,
);

impl std::str::FromStr for crate::estimation::Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-form" => Ok(Self::ClosedForm),
            "numeric" => Ok(Self::Numeric),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        }
    }
}

/// A row type whose fields map one-to-one onto CSV columns.
pub trait Record: Sized {
    const COLUMNS: &'static [&'static str];
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &[&str]) -> Result<Self>;
}

/// Declare a struct and implement [`Record`] for it, one column per field
/// in declaration order.
#[macro_export]
macro_rules! csv_record {
    (
        $(#[$meta:meta])*
        $vis:vis struct $name:ident {
            $($fvis:vis $field:ident : $ty:ty),* $(,)?
        }
    ) => {
        $(#[$meta])*
        $vis struct $name {
            $($fvis $field: $ty),*
        }

        impl $crate::table::Record for $name {
            const COLUMNS: &'static [&'static str] = &[$(stringify!($field)),*];

            fn to_fields(&self) -> Vec<String> {
                vec![$($crate::table::CsvField::to_field(&self.$field)),*]
            }

            fn from_fields(fields: &[&str]) -> $crate::Result<Self> {
                let expected = <Self as $crate::table::Record>::COLUMNS.len();
                if fields.len() != expected {
                    return Err($crate::Error::Parse(format!(
                        "expected {} fields, found {}", expected, fields.len()
                    )));
                }
                let mut it = fields.iter();
                Ok(Self {
                    $($field: <$ty as $crate::table::CsvField>::from_field(
                        it.next().expect("length checked"),
                    ).map_err(|e| $crate::Error::Parse(format!(
                        "column `{}`: {}", stringify!($field), e
                    )))?),*
                })
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format `{other}`"))),
        }
    }
}

const CONFIG_PREFIX: &str = "# config ";

/// CSV text for `rows`, preceded by the config comment line.
pub fn write_csv<T: Record>(config: &serde_json::Value, rows: &[T]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CONFIG_PREFIX}{config}");
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    w.write_record(T::COLUMNS).expect("writing to memory");
    for row in rows {
        w.write_record(row.to_fields()).expect("writing to memory");
    }
    let bytes = w.into_inner().expect("flushing to memory");
    out.push_str(std::str::from_utf8(&bytes).expect("fields are UTF-8"));
    out
}

/// `{"config": …, "rows": […]}` with a trailing newline.
pub fn write_json<T: Serialize>(config: &serde_json::Value, rows: &[T]) -> Result<String> {
    let doc = serde_json::json!({ "config": config, "rows": rows });
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_table<T: Record + Serialize>(
    config: &serde_json::Value,
    rows: &[T],
    format: Format,
) -> Result<String> {
    match format {
        Format::Csv => Ok(write_csv(config, rows)),
        Format::Json => write_json(config, rows),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable<T> {
    pub config: Option<serde_json::Value>,
    pub rows: Vec<T>,
}

/// Parse text produced by [`write_csv`]. The header row must list exactly
/// the columns of `T`.
pub fn parse_table<T: Record>(text: &str) -> Result<ParsedTable<T>> {
    let mut config = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(json) = line.strip_prefix(CONFIG_PREFIX) {
            let value = serde_json::from_str(json).map_err(|e| Error::Parse(format!("config line: {e}")))?;
            config = Some(value);
        }
    }
    let mut reader =
        csv::ReaderBuilder::new().comment(Some(b'#')).has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if header.iter().ne(T::COLUMNS.iter().copied()) {
        return Err(Error::Parse(format!(
            "header {:?} does not match expected columns {:?}",
            header.iter().collect::<Vec<_>>(),
            T::COLUMNS
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let fields: Vec<&str> = record.iter().collect();
        rows.push(T::from_fields(&fields)?);
    }
    Ok(ParsedTable { config, rows })
}
