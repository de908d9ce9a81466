//! Deterministic generator for the bundled synthetic warehouse: a
//! hospital-admissions star schema sized to order, written as CSVs plus a
//! schema manifest, with optional prefix partitions for scaling experiments.
//!
//! The same `(rows, seed)` pair always produces byte-identical files. A
//! partition of size `n` is exactly the first `n` admissions (and their
//! diagnosis rows) of the full run, so measurements across sizes compare the
//! same data at different volumes rather than different random draws.

use crate::catalog::{write_csv, Catalog, ColumnSpec, SchemaManifest, TableSpec};
use crate::error::{Error, Result};
use crate::relation::{Column, Relation};
use crate::value::{ColumnType, Value};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct DwGenConfig {
    /// Admissions (fact) rows. Diagnosis rows come out at one to five per
    /// admission.
    pub rows: usize,
    pub seed: u64,
    /// Additional prefix sizes to expose as their own manifests.
    pub partitions: Vec<usize>,
}

#[derive(Debug)]
pub struct GenReport {
    /// (table, row count) in manifest order.
    pub tables: Vec<(String, usize)>,
    /// The full manifest first, then one per partition.
    pub manifests: Vec<PathBuf>,
}

const ADMISSION_YEARS: (i32, i32) = (1998, 2007);

const ADMSOURCE: [&str; 8] = ["e", "h", "m", "n", "p", "s", "t", "w"];
const ADMTYPE: [&str; 8] = ["c", "l", "m", "o", "p", "s", "u", "x"];
const CARE_TYPE: [&str; 18] = [
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "a", "b", "c", "d", "e", "f", "g", "h",
];
const SEPARATION_MODE: [&str; 9] = ["a", "d", "e", "h", "l", "o", "s", "t", "x"];
const AGE_BANDS: [&str; 6] = ["0-14", "15-29", "30-44", "45-59", "60-74", "75+"];

/// One row per diagnosis chapter: first letter of the code range, range end,
/// description. Several descriptions deliberately share the prefix
/// "diseases" so prefix filters select a non-trivial subset.
const DIAGNOSIS_CHAPTERS: [(&str, &str); 21] = [
    ("a", "certain infectious and parasitic diseases"),
    ("b", "other bacterial and viral diseases"),
    ("c", "neoplasms"),
    ("d", "diseases of the blood and blood-forming organs"),
    ("e", "endocrine, nutritional and metabolic diseases"),
    ("f", "mental and behavioural disorders"),
    ("g", "diseases of the nervous system"),
    ("h", "diseases of the eye and adnexa"),
    ("i", "diseases of the circulatory system"),
    ("j", "diseases of the respiratory system"),
    ("k", "diseases of the digestive system"),
    ("l", "diseases of the skin and subcutaneous tissue"),
    ("m", "diseases of the musculoskeletal system and connective tissue"),
    ("n", "diseases of the genitourinary system"),
    ("o", "pregnancy, childbirth and the puerperium"),
    ("p", "certain conditions originating in the perinatal period"),
    ("q", "congenital malformations and chromosomal abnormalities"),
    ("r", "symptoms, signs and abnormal clinical findings"),
    ("s", "injury and poisoning"),
    ("t", "external consequences of injury"),
    ("z", "factors influencing health status"),
];

fn text(s: &str) -> Value {
    Value::Text(s.to_string())
}

fn two_col(name_a: &str, ty_a: ColumnType, name_b: &str) -> Relation {
    Relation::new(vec![Column::new(name_a, ty_a), Column::new(name_b, ColumnType::Text)])
        .expect("distinct column names")
}

/// The dimension tables. Pure data, identical for every seed.
fn dimensions() -> Vec<(String, Relation)> {
    let mut out = Vec::new();

    let mut gender = two_col("gender_number", ColumnType::Int, "description");
    for (n, d) in [(1, "male"), (2, "female"), (3, "not stated")] {
        gender.push_row(vec![Value::Int(n), text(d)]).unwrap();
    }
    out.push(("gender_dim".to_string(), gender));

    let mut admsource = two_col("vaed_value", ColumnType::Text, "description");
    for v in ADMSOURCE {
        admsource.push_row(vec![text(v), text(&format!("admitted from source {v}"))]).unwrap();
    }
    out.push(("admsource_dim".to_string(), admsource));

    let mut admtype = two_col("vaed_value", ColumnType::Text, "description");
    for v in ADMTYPE {
        admtype.push_row(vec![text(v), text(&format!("admission type {v}"))]).unwrap();
    }
    out.push(("admtype_dim".to_string(), admtype));

    let mut care = two_col("vaed_value", ColumnType::Text, "description");
    for v in CARE_TYPE {
        care.push_row(vec![text(v), text(&format!("care type {v}"))]).unwrap();
    }
    out.push(("care_type_dim".to_string(), care));

    let mut sep = two_col("vaed_value", ColumnType::Text, "description");
    for v in SEPARATION_MODE {
        sep.push_row(vec![text(v), text(&format!("separation mode {v}"))]).unwrap();
    }
    out.push(("separation_mode_dim".to_string(), sep));

    let mut age = two_col("age_category", ColumnType::Int, "description");
    for (i, band) in AGE_BANDS.iter().enumerate() {
        age.push_row(vec![Value::Int(i as i64 + 1), text(&format!("aged {band}"))]).unwrap();
    }
    out.push(("age_dim".to_string(), age));

    let mut diagnosis = Relation::new(vec![
        Column::new("code_range_start", ColumnType::Text),
        Column::new("code_range_end", ColumnType::Text),
        Column::new("diagnosis_desc", ColumnType::Text),
    ])
    .unwrap();
    for (letter, desc) in DIAGNOSIS_CHAPTERS {
        diagnosis
            .push_row(vec![text(&format!("{letter}00")), text(&format!("{letter}99")), text(desc)])
            .unwrap();
    }
    out.push(("diagnosis_dim".to_string(), diagnosis));

    let mut admtime = Relation::new(vec![
        Column::new("admtimeid", ColumnType::Text),
        Column::new("admyear", ColumnType::Int),
        Column::new("admmonth", ColumnType::Int),
    ])
    .unwrap();
    for year in ADMISSION_YEARS.0..=ADMISSION_YEARS.1 {
        for month in 1..=12 {
            admtime
                .push_row(vec![text(&format!("{year}{month:02}")), Value::Int(year as i64), Value::Int(month)])
                .unwrap();
        }
    }
    out.push(("admtime_dim".to_string(), admtime));

    out
}

/// The fact tables: `rows` admissions and their diagnosis rows, drawn from a
/// seeded generator. The draw order per admission is fixed, so a prefix of
/// admissions is independent of everything generated after it.
fn facts(rows: usize, seed: u64) -> (Relation, Relation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut admissions = Relation::new(vec![
        Column::new("pk", ColumnType::Int),
        Column::new("sex", ColumnType::Int),
        Column::new("admsourc", ColumnType::Text),
        Column::new("admtype", ColumnType::Text),
        Column::new("care", ColumnType::Text),
        Column::new("sepmode", ColumnType::Text),
        Column::new("age_category", ColumnType::Int),
        Column::new("admdate", ColumnType::Date),
    ])
    .unwrap();
    let mut diagnosis = Relation::new(vec![
        Column::new("admissions_pk", ColumnType::Int),
        Column::new("diag", ColumnType::Text),
    ])
    .unwrap();

    let base = NaiveDate::from_ymd_opt(ADMISSION_YEARS.0, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(ADMISSION_YEARS.1, 12, 31).unwrap();
    let day_span = (end - base).num_days() + 1;

    for pk in 1..=rows as i64 {
        let sex = rng.gen_range(1..=2);
        let admsourc = ADMSOURCE[rng.gen_range(0..ADMSOURCE.len())];
        let admtype = ADMTYPE[rng.gen_range(0..ADMTYPE.len())];
        let care = CARE_TYPE[rng.gen_range(0..CARE_TYPE.len())];
        let sepmode = SEPARATION_MODE[rng.gen_range(0..SEPARATION_MODE.len())];
        let age_category = rng.gen_range(1..=AGE_BANDS.len() as i64);
        let date = base + chrono::Duration::days(rng.gen_range(0..day_span));
        admissions
            .push_row(vec![
                Value::Int(pk),
                Value::Int(sex),
                text(admsourc),
                text(admtype),
                text(care),
                text(sepmode),
                Value::Int(age_category),
                Value::Date(date),
            ])
            .unwrap();

        for _ in 0..rng.gen_range(1..=5) {
            let (letter, _) = DIAGNOSIS_CHAPTERS[rng.gen_range(0..DIAGNOSIS_CHAPTERS.len())];
            let code = format!("{letter}{:02}", rng.gen_range(0..100));
            diagnosis.push_row(vec![Value::Int(pk), text(&code)]).unwrap();
        }
    }
    (admissions, diagnosis)
}

/// Generate the warehouse in memory (no files). Dimension tables plus
/// `admissions` and `diagnosis` facts.
pub fn build_catalog(rows: usize, seed: u64) -> Catalog {
    let mut catalog = Catalog::new();
    for (name, rel) in dimensions() {
        catalog.insert(&name, rel).expect("distinct dimension names");
    }
    let (admissions, diagnosis) = facts(rows, seed);
    catalog.insert("admissions", admissions).unwrap();
    catalog.insert("diagnosis", diagnosis).unwrap();
    catalog
}

fn table_spec(name: &str, file: String, rel: &Relation) -> TableSpec {
    TableSpec {
        name: name.to_string(),
        file,
        columns: rel
            .columns()
            .iter()
            .map(|c| ColumnSpec { name: c.name.clone(), ty: c.ty })
            .collect(),
    }
}

fn write_manifest(path: &Path, manifest: &SchemaManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Manifest(format!("serialization failed: {e}")))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

/// First `n` admissions and the diagnosis rows belonging to them. Diagnosis
/// rows are generated per admission in pk order, so both cuts are prefixes.
fn prefix(admissions: &Relation, diagnosis: &Relation, n: usize) -> (Relation, Relation) {
    let mut adm = Relation::new(admissions.columns().to_vec()).unwrap();
    for row in admissions.rows().iter().take(n) {
        adm.push_row(row.clone()).unwrap();
    }
    let mut diag = Relation::new(diagnosis.columns().to_vec()).unwrap();
    for row in diagnosis.rows() {
        match &row[0] {
            Value::Int(pk) if *pk <= n as i64 => diag.push_row(row.clone()).unwrap(),
            _ => break,
        }
    }
    (adm, diag)
}

/// Write the warehouse to `out_dir`: one CSV per table, `manifest.json`, and
/// for every configured partition size `n` the files `admissions_<n>.csv`,
/// `diagnosis_<n>.csv` and `manifest_<n>.json` (sharing the dimension CSVs).
pub fn generate(config: &DwGenConfig, out_dir: &Path) -> Result<GenReport> {
    for &p in &config.partitions {
        if p == 0 || p > config.rows {
            return Err(Error::Config(format!(
                "partition size {p} is outside 1..={}",
                config.rows
            )));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let dims = dimensions();
    let (admissions, diagnosis) = facts(config.rows, config.seed);

    let mut specs = Vec::new();
    let mut tables = Vec::new();
    for (name, rel) in &dims {
        let file = format!("{name}.csv");
        write_csv(&out_dir.join(&file), rel)?;
        specs.push(table_spec(name, file, rel));
        tables.push((name.clone(), rel.len()));
    }
    for (name, rel) in [("admissions", &admissions), ("diagnosis", &diagnosis)] {
        let file = format!("{name}.csv");
        write_csv(&out_dir.join(&file), rel)?;
        specs.push(table_spec(name, file, rel));
        tables.push((name.to_string(), rel.len()));
    }
    let mut manifests = vec![out_dir.join("manifest.json")];
    write_manifest(&manifests[0], &SchemaManifest { tables: specs })?;

    for &n in &config.partitions {
        let (adm, diag) = prefix(&admissions, &diagnosis, n);
        let mut specs: Vec<TableSpec> = dims
            .iter()
            .map(|(name, rel)| table_spec(name, format!("{name}.csv"), rel))
            .collect();
        let adm_file = format!("admissions_{n}.csv");
        let diag_file = format!("diagnosis_{n}.csv");
        write_csv(&out_dir.join(&adm_file), &adm)?;
        write_csv(&out_dir.join(&diag_file), &diag)?;
        specs.push(table_spec("admissions", adm_file, &adm));
        specs.push(table_spec("diagnosis", diag_file, &diag));
        let path = out_dir.join(format!("manifest_{n}.json"));
        write_manifest(&path, &SchemaManifest { tables: specs })?;
        manifests.push(path);
    }
    Ok(GenReport { tables, manifests })
}
