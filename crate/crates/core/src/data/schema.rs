use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    /// Finite inclusive bounds; out-of-range cells are treated as missing.
    Numerical { min: f64, max: f64 },
    /// Ordered category list (lexicographic). Empty until observed.
    Categorical { categories: Vec<String> },
    /// Two-valued `N`/`Y` flag.
    Logical,
    /// Calendar date, consumed by feature engineering.
    Date,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub nullable: bool,
}

impl ColumnSchema {
    pub fn numerical(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numerical { min, max },
            nullable: true,
        }
    }

    pub fn categorical(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical { categories: vec![] },
            nullable: true,
        }
    }

    pub fn logical(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Logical,
            nullable: true,
        }
    }

    pub fn date(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Date,
            nullable: true,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.kind, ColumnKind::Numerical { .. })
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.kind {
            ColumnKind::Numerical { min, max } => Some((min, max)),
            _ => None,
        }
    }
}

pub const TARGET: &str = "Length Of Stay";
pub const LOS_MAX: f64 = 140.0;
pub const DATE_COLUMN: &str = "Admission Date";
pub const COSTS: &str = "Total Costs";
pub const SEVERITY: &str = "APR Severity Of Illness Code";

/// Columns whose neighbours drive imputation.
pub const IMPUTATION_KEYS: [&str; 4] = ["AgeGroup", "Gender", "Race", "Ethnicity"];

/// The admission schema, target included, in file order.
pub fn sparcs_schema() -> Vec<ColumnSchema> {
    use ColumnSchema as C;
    let mut s = vec![
        C::categorical("Hospital Service Area"),
        C::categorical("Hospital County"),
        C::categorical("AgeGroup"),
        C::numerical("ZipCode 3Digits", 100.0, 149.0),
        C::categorical("Gender"),
        C::categorical("Race"),
        C::categorical("Ethnicity"),
        C::categorical("Type Of Admission"),
        C::categorical(SEVERITY),
        C::categorical("APR Severity Of Illness Description"),
        C::categorical("Payment Typology 1"),
        C::numerical(COSTS, 100.0, 2e5),
        C::numerical(TARGET, 0.0, LOS_MAX),
        C::categorical("Patient Disposition"),
        C::categorical("CCSR Diagnosis Code"),
        C::categorical("CCSR Diagnosis Description"),
        C::categorical("APR DRG Code"),
        C::categorical("APR DRG Description"),
        C::categorical("APR MDC Code"),
        C::categorical("APR MDC Description"),
        C::categorical("APR Risk Of Mortality"),
        C::categorical("APR Medical Surgical Description"),
        C::logical("Emergency Department Indicator"),
    ];
    for c in &mut s {
        if c.name == TARGET {
            c.nullable = false;
        }
    }
    s
}

/// Lowercase alphanumerics only, so `Length of Stay`, `length_of_stay` and
/// `LengthOfStay` all match.
pub fn normalize_name(name: &str) -> String {
    name.chars().filter(char::is_ascii_alphanumeric).map(|c| c.to_ascii_lowercase()).collect()
}
