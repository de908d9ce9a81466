//! Reference workload for the bundled synthetic hospital-admissions warehouse
//! (see [`crate::dwgen`]). Six queries covering the dialect's stress axes:
//! join-heavy, group-by-heavy, selection-heavy, all three combined, and row
//! functions in selections and in grouping. The CLI's bench and simulate
//! examples, the benchmarks and the acceptance suite all draw from here.

/// Ten-way join counting admissions by sex and age band.
pub const JOIN_HEAVY: &str = "select a.sex, a.age_category, sum(1) from admissions a, diagnosis d, admsource_dim ads, admtime_dim adt, admtype_dim atp, age_dim ag, gender_dim g, care_type_dim c, separation_mode_dim s, diagnosis_dim dm where a.pk = d.admissions_pk and a.sex = g.gender_number and a.admsourc = ads.vaed_value and a.admtype = atp.vaed_value and a.care = c.vaed_value and a.sepmode = s.vaed_value and a.age_category = ag.age_category and to_char(a.admdate, 'yyyymm') = adt.admtimeid and substr(d.diag, 1, 1) = substr(dm.code_range_start, 1, 1) group by a.sex, a.age_category";

/// Eight group-by attributes over admissions joined to the time dimension.
pub const GROUP_HEAVY: &str = "select a.sex, a.admsourc, a.admtype, a.care, a.sepmode, a.age_category, adt.admyear, adt.admmonth, sum(1) from admissions a, admtime_dim adt where to_char(a.admdate, 'yyyymm') = adt.admtimeid group by a.sex, a.admsourc, a.admtype, a.care, a.sepmode, a.age_category, adt.admyear, adt.admmonth";

/// Six selection conditions on a single table.
pub const SELECTION_HEAVY: &str = "select a.age_category, sum(1) from admissions a where a.admsourc = 'h' and a.admtype = 'x' and a.care = '4' and a.sepmode = 'h' and to_char(a.admdate, 'yyyy') = '2007' and to_char(a.admdate, 'mm') = '12' group by a.age_category";

/// Joins, selections and a wide group-by all at once.
pub const MIXED: &str = "select a.sex, a.admsourc, a.admtype, a.care, a.sepmode, a.age_category, adt.admyear, adt.admmonth, sum(1) from admissions a, diagnosis d, admsource_dim ads, admtime_dim adt, admtype_dim atp, age_dim ag, gender_dim g, care_type_dim c, separation_mode_dim s, diagnosis_dim dm where a.pk = d.admissions_pk and a.sex = g.gender_number and a.admsourc = ads.vaed_value and a.admtype = atp.vaed_value and a.care = c.vaed_value and a.sepmode = s.vaed_value and a.age_category = ag.age_category and a.admsourc = 'h' and a.admtype = 'x' and a.care = '4' and a.sepmode = 'h' and to_char(a.admdate, 'yyyymm') = adt.admtimeid and substr(d.diag, 1, 1) = substr(dm.code_range_start, 1, 1) and dm.diagnosis_desc like 'diseases%' group by a.sex, a.admsourc, a.admtype, a.care, a.sepmode, a.age_category, adt.admyear, adt.admmonth";

/// Row functions (`substr`, LIKE) inside the selection conditions.
pub const FUNC_SELECTIONS: &str = "select sex, sum(1) from admissions a, diagnosis d, diagnosis_dim dm where a.pk = d.admissions_pk and substr(d.diag, 1, 1) = substr(dm.code_range_start, 1, 1) and dm.diagnosis_desc like 'diseases%' group by sex";

/// Row functions (`to_char`) as group-by attributes.
pub const FUNC_GROUPING: &str = "select to_char(admdate, 'yyyy'), to_char(admdate, 'mm'), sum(1) from admissions group by to_char(admdate, 'yyyy'), to_char(admdate, 'mm')";

/// The whole workload, in a stable order.
pub fn all() -> [&'static str; 6] {
    [
        JOIN_HEAVY,
        GROUP_HEAVY,
        SELECTION_HEAVY,
        MIXED,
        FUNC_SELECTIONS,
        FUNC_GROUPING,
    ]
}
