//! Seeded synthetic admissions over the SPARCS schema.
//!
//! Each row is drawn from its own counter-derived stream, so row `i` is the
//! same whatever `n` is. Length of stay is `floor(scale · e^η · G)` with a
//! latent severity score `η` and a mean-one gamma factor `G`; total costs
//! rise with length of stay under multiplicative log-normal noise.

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::dataset::{observed_categories, Column, Dataset};
use super::schema::{sparcs_schema, ColumnKind, ColumnSchema, COSTS, DATE_COLUMN, LOS_MAX, TARGET};
use super::DataError;
use crate::tensor::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthProfile {
    /// Per-cell probability that a nullable non-target cell is blank.
    pub missing_rate: f64,
    /// Emit an `Admission Date` column.
    pub include_date: bool,
    /// Multiplier from `e^η · G` to days.
    pub los_scale: f64,
    /// Shape of the mean-one gamma factor; smaller is more dispersed.
    pub gamma_shape: f64,
    pub cost_base: f64,
    pub cost_per_day: f64,
    /// Log-scale spread of the cost noise.
    pub cost_sigma: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self {
            missing_rate: 0.01,
            include_date: false,
            los_scale: 1.65,
            gamma_shape: 4.0,
            cost_base: 4000.0,
            cost_per_day: 2500.0,
            cost_sigma: 0.8,
        }
    }
}

const SERVICE_AREAS: [&str; 8] = [
    "Capital/Adirond",
    "Central NY",
    "Finger Lakes",
    "Hudson Valley",
    "Long Island",
    "New York City",
    "Southern Tier",
    "Western NY",
];
const AGE_GROUPS: [&str; 5] = ["0 to 17", "18 to 29", "30 to 49", "50 to 69", "70 or Older"];
const AGE_WEIGHTS: [f64; 5] = [0.15, 0.10, 0.17, 0.28, 0.30];
const GENDERS: [&str; 3] = ["F", "M", "U"];
const GENDER_WEIGHTS: [f64; 3] = [0.54, 0.45, 0.01];
const RACES: [&str; 4] = ["Black/African American", "Multi-racial", "Other Race", "White"];
const RACE_WEIGHTS: [f64; 4] = [0.18, 0.03, 0.24, 0.55];
const ETHNICITIES: [&str; 4] = ["Multi-ethnic", "Not Span/Hispanic", "Spanish/Hispanic", "Unknown"];
const ETHNICITY_WEIGHTS: [f64; 4] = [0.01, 0.78, 0.13, 0.08];
const ADMISSION_TYPES: [&str; 6] = ["Elective", "Emergency", "Newborn", "Not Available", "Trauma", "Urgent"];
const ADMISSION_WEIGHTS: [f64; 6] = [0.19, 0.62, 0.0, 0.01, 0.02, 0.16];
const SEVERITY: [&str; 4] = ["Minor", "Moderate", "Major", "Extreme"];
const PAYMENTS: [&str; 9] = [
    "Blue Cross/Blue Shield",
    "Department of Corrections",
    "Federal/State/Local/VA",
    "Managed Care, Unspecified",
    "Medicaid",
    "Medicare",
    "Miscellaneous/Other",
    "Private Health Insurance",
    "Self-Pay",
];
const DISPOSITIONS: [&str; 19] = [
    "Home or Self Care",
    "Home w/ Home Health Services",
    "Skilled Nursing Home",
    "Expired",
    "Left Against Medical Advice",
    "Short-term Hospital",
    "Inpatient Rehabilitation Facility",
    "Hospice - Medical Facility",
    "Hospice - Home",
    "Psychiatric Hospital or Unit of Hosp",
    "Facility w/ Custodial/Supportive Care",
    "Another Type Not Listed",
    "Cancer Center or Children's Hospital",
    "Medicare Cert Long Term Care Hospital",
    "Court/Law Enforcement",
    "Federal Health Care Facility",
    "Medicaid Cert Nursing Facility",
    "Critical Access Hospital",
    "Hosp Basd Medicare Approved Swing Bed",
];
const DISPOSITION_WEIGHTS: [f64; 19] = [
    0.58, 0.16, 0.08, 0.03, 0.02, 0.02, 0.03, 0.005, 0.005, 0.01, 0.01, 0.01, 0.005, 0.005, 0.005, 0.002, 0.003,
    0.002, 0.003,
];
const COUNTIES: usize = 57;
const DRGS: usize = 326;
const MDCS: usize = 24;
const CCSRS: usize = 471;

/// Stable per-code effect in `[-1, 1]`.
fn code_effect(code: usize, salt: u64) -> f64 {
    let mut z = (code as u64 ^ salt).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

fn county_name(i: usize) -> String {
    format!("County {:02}", i + 1)
}

fn drg_code(i: usize) -> String {
    format!("{:03}", 1 + 3 * i)
}

/// One synthetic admission before missingness is applied.
struct Row {
    county: usize,
    zip: f64,
    age: usize,
    gender: usize,
    race: usize,
    ethnicity: usize,
    admission: usize,
    severity: usize,
    payment: usize,
    costs: f64,
    los: f64,
    disposition: usize,
    ccsr: usize,
    drg: usize,
    mortality: usize,
    surgical: bool,
    emergency_dept: bool,
    date: NaiveDate,
}

fn draw_row(rng: &mut Rng, p: &SynthProfile) -> Row {
    let county = {
        // a few large counties dominate
        let w: Vec<f64> = (0..COUNTIES).map(|i| 1.0 / (1.0 + i as f64).powf(0.8)).collect();
        rng.categorical(&w)
    };
    let zip = (100 + (county * 7 + rng.below(5)) % 50) as f64;
    let age = rng.categorical(&AGE_WEIGHTS);
    let gender = rng.categorical(&GENDER_WEIGHTS);
    let race = rng.categorical(&RACE_WEIGHTS);
    let ethnicity = rng.categorical(&ETHNICITY_WEIGHTS);
    let admission = if age == 0 && rng.uniform() < 0.5 {
        2
    } else {
        rng.categorical(&ADMISSION_WEIGHTS)
    };
    let newborn = admission == 2;
    let severity = {
        let a = age as f64 / 4.0;
        let young = [0.45, 0.35, 0.15, 0.05];
        let old = [0.10, 0.36, 0.37, 0.17];
        let w: Vec<f64> = (0..4).map(|k| young[k] * (1.0 - a) + old[k] * a).collect();
        if newborn {
            rng.categorical(&[0.7, 0.2, 0.08, 0.02])
        } else {
            rng.categorical(&w)
        }
    };
    let surgical = !newborn && rng.uniform() < 0.25 / 0.93;
    let payment = {
        let mut w = [0.08, 0.005, 0.02, 0.05, 0.28, 0.30, 0.02, 0.22, 0.025];
        if age == 4 {
            w[5] = 1.6;
        } else if age == 0 {
            w[5] = 0.0;
            w[4] = 0.5;
        }
        rng.categorical(&w)
    };
    let drg = {
        // surgical groups are every fourth code
        let pool: Vec<usize> = (0..DRGS).filter(|d| (d % 4 == 0) == surgical).collect();
        let w: Vec<f64> = pool.iter().map(|&d| 1.5 + code_effect(d, 7)).collect();
        pool[rng.categorical(&w)]
    };
    let mdc = drg * MDCS / DRGS;
    let ccsr = (drg * 13 + rng.below(9)) % CCSRS;
    let mortality = {
        let shift = rng.categorical(&[0.15, 0.7, 0.15]) as isize - 1;
        (severity as isize + shift).clamp(0, 3) as usize
    };
    let disposition = {
        let mut w = DISPOSITION_WEIGHTS;
        let s = severity as f64;
        w[2] *= 1.0 + s + if age == 4 { 2.0 } else { 0.0 };
        w[3] *= (0.2 + s * s) * 0.5;
        w[6] *= 1.0 + s;
        rng.categorical(&w)
    };
    let emergency = admission == 1 || admission == 4;
    let emergency_dept = if emergency { rng.uniform() < 0.95 } else { rng.uniform() < 0.05 };
    let date = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + Duration::days(rng.below(365) as i64);

    let s = severity as f64;
    let long_disposition = matches!(disposition, 2 | 6 | 10 | 13 | 16);
    let weekend = date.weekday().num_days_from_monday() >= 5;
    let mut eta = 0.42 * s
        + 0.30 * f64::from(u8::from(surgical))
        + 0.10 * age as f64
        + 0.15 * f64::from(u8::from(emergency))
        + 0.35 * f64::from(u8::from(long_disposition))
        + 0.10 * f64::from(u8::from(weekend))
        + 0.12 * code_effect(mdc, 11)
        + 0.08 * code_effect(drg, 13);
    // interactions that an additive readout of the features cannot express
    if severity == 3 && age == 4 {
        eta += 0.45;
    }
    if surgical && severity >= 2 {
        eta += 0.35;
    }
    if newborn {
        eta -= 0.5 - 0.4 * s;
    }
    let g = rng.gamma(p.gamma_shape, 1.0 / p.gamma_shape);
    let los = (p.los_scale * eta.exp() * g).floor().clamp(0.0, LOS_MAX);
    let noise = (p.cost_sigma * rng.standard_normal() - 0.5 * p.cost_sigma * p.cost_sigma).exp();
    let surgical_markup = if surgical { 1.5 } else { 1.0 };
    let costs = ((p.cost_base + p.cost_per_day * los) * surgical_markup * noise).clamp(100.0, 2e5);
    Row {
        county,
        zip,
        age,
        gender,
        race,
        ethnicity,
        admission,
        severity,
        payment,
        costs: (costs * 100.0).round() / 100.0,
        los,
        disposition,
        ccsr,
        drg,
        mortality,
        surgical,
        emergency_dept,
        date,
    }
}

/// `n` rows over the admission schema (plus `Admission Date` when the
/// profile asks for it). Deterministic in `(n, seed, profile)`.
pub fn generate_synthetic(n: usize, seed: u64, profile: &SynthProfile) -> Result<Dataset, DataError> {
    if n == 0 {
        return Err(DataError::Invalid("row count must be at least 1".into()));
    }
    let mut schema = sparcs_schema();
    if profile.include_date {
        schema.push(ColumnSchema::date(DATE_COLUMN));
    }
    let mut text: Vec<Vec<Option<String>>> = vec![Vec::with_capacity(n); schema.len()];
    let mut nums: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(n); schema.len()];
    for i in 0..n {
        let mut rng = Rng::derive(seed, &[i as u64]);
        let r = draw_row(&mut rng, profile);
        let mdc = r.drg * MDCS / DRGS;
        for (c, s) in schema.iter().enumerate() {
            let blank = s.nullable && s.name != TARGET && profile.missing_rate > 0.0 && rng.uniform() < profile.missing_rate;
            let t = |v: String| if blank { None } else { Some(v) };
            let x = |v: f64| if blank { None } else { Some(v) };
            match s.name.as_str() {
                "Hospital Service Area" => text[c].push(t(SERVICE_AREAS[r.county % 8].into())),
                "Hospital County" => text[c].push(t(county_name(r.county))),
                "AgeGroup" => text[c].push(t(AGE_GROUPS[r.age].into())),
                "ZipCode 3Digits" => nums[c].push(x(r.zip)),
                "Gender" => text[c].push(t(GENDERS[r.gender].into())),
                "Race" => text[c].push(t(RACES[r.race].into())),
                "Ethnicity" => text[c].push(t(ETHNICITIES[r.ethnicity].into())),
                "Type Of Admission" => text[c].push(t(ADMISSION_TYPES[r.admission].into())),
                "APR Severity Of Illness Code" => text[c].push(t((r.severity + 1).to_string())),
                "APR Severity Of Illness Description" => text[c].push(t(SEVERITY[r.severity].into())),
                "Payment Typology 1" => text[c].push(t(PAYMENTS[r.payment].into())),
                COSTS => nums[c].push(x(r.costs)),
                TARGET => nums[c].push(Some(r.los)),
                "Patient Disposition" => text[c].push(t(DISPOSITIONS[r.disposition].into())),
                "CCSR Diagnosis Code" => text[c].push(t(format!("CCS{:03}", r.ccsr + 1))),
                "CCSR Diagnosis Description" => text[c].push(t(format!("Diagnosis group {:03}", r.ccsr + 1))),
                "APR DRG Code" => text[c].push(t(drg_code(r.drg))),
                "APR DRG Description" => text[c].push(t(format!("DRG group {}", drg_code(r.drg)))),
                "APR MDC Code" => text[c].push(t(format!("{mdc:02}"))),
                "APR MDC Description" => text[c].push(t(format!("Major diagnostic category {mdc:02}"))),
                "APR Risk Of Mortality" => text[c].push(t(SEVERITY[r.mortality].into())),
                "APR Medical Surgical Description" => {
                    text[c].push(t(if r.surgical { "Surgical" } else { "Medical" }.into()))
                }
                "Emergency Department Indicator" => text[c].push(t(if r.emergency_dept { "Y" } else { "N" }.into())),
                DATE_COLUMN => text[c].push(t(r.date.format("%Y-%m-%d").to_string())),
                other => unreachable!("generator has no rule for {other}"),
            }
        }
    }
    let columns = schema
        .iter_mut()
        .zip(text.into_iter().zip(nums))
        .map(|(s, (t, x))| match &mut s.kind {
            ColumnKind::Numerical { .. } => Column::Numeric(x),
            ColumnKind::Categorical { categories } => {
                *categories = observed_categories(&t);
                Column::Text(t)
            }
            _ => Column::Text(t),
        })
        .collect();
    Dataset::new(schema, columns, TARGET)
}

/// Headline shape of a length-of-stay sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosSummary {
    pub rows: usize,
    /// Fraction of stays longer than 20 days.
    pub over_20: f64,
    /// Pearson correlation of total costs and length of stay over rows with both present.
    pub cost_correlation: Option<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn los_summary(ds: &Dataset) -> LosSummary {
    let los = ds.target();
    let over = los.iter().filter(|&&v| v > 20.0).count();
    let pairs: Vec<(f64, f64)> = match ds.column(COSTS).and_then(Column::as_numeric) {
        Some(costs) => costs.iter().zip(&los).filter_map(|(c, &l)| c.map(|c| (c, l))).collect(),
        None => vec![],
    };
    LosSummary {
        rows: los.len(),
        over_20: over as f64 / los.len() as f64,
        cost_correlation: pearson(&pairs),
        min: los.iter().copied().fold(f64::INFINITY, f64::min),
        max: los.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let (ma, mb) = pairs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}
