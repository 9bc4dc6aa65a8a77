//! The shipped standard-view definitions. Adding a view means adding a JSON
//! document; nothing here is view-specific.

use super::{ViewDefinition, ViewError};

const VIEWS: &[(&str, &str)] = &[
    ("ME4CH", include_str!("../../views/me4ch.json")),
    ("ME5CH", include_str!("../../views/me5ch.json")),
    ("ME_MV_COMMISSURAL", include_str!("../../views/me_mv_commissural.json")),
    ("ME2CH", include_str!("../../views/me2ch.json")),
    ("ME_LAX", include_str!("../../views/me_lax.json")),
    ("ME_AV_LAX", include_str!("../../views/me_av_lax.json")),
    ("ME_AV_SAX", include_str!("../../views/me_av_sax.json")),
    ("ME_RV_INFLOW_OUTFLOW", include_str!("../../views/me_rv_inflow_outflow.json")),
    ("ME_BICAVAL", include_str!("../../views/me_bicaval.json")),
    ("ME_ASC_AORTIC_LAX", include_str!("../../views/me_asc_aortic_lax.json")),
    ("ME_ASC_AORTIC_SAX", include_str!("../../views/me_asc_aortic_sax.json")),
    ("ME_RIGHT_PULMONARY_VEINS", include_str!("../../views/me_right_pulmonary_veins.json")),
    ("ME_LEFT_PULMONARY_VEINS", include_str!("../../views/me_left_pulmonary_veins.json")),
    ("ME_LAA", include_str!("../../views/me_laa.json")),
    ("TG_BASAL_SAX", include_str!("../../views/tg_basal_sax.json")),
    ("TG_MID_SAX", include_str!("../../views/tg_mid_sax.json")),
    ("TG_APICAL_SAX", include_str!("../../views/tg_apical_sax.json")),
    ("DESC_AORTIC_SAX", include_str!("../../views/desc_aortic_sax.json")),
    ("DESC_AORTIC_LAX", include_str!("../../views/desc_aortic_lax.json")),
];

pub const BUILTIN_VIEW_NAMES: [&str; 19] = [
    "ME4CH",
    "ME5CH",
    "ME_MV_COMMISSURAL",
    "ME2CH",
    "ME_LAX",
    "ME_AV_LAX",
    "ME_AV_SAX",
    "ME_RV_INFLOW_OUTFLOW",
    "ME_BICAVAL",
    "ME_ASC_AORTIC_LAX",
    "ME_ASC_AORTIC_SAX",
    "ME_RIGHT_PULMONARY_VEINS",
    "ME_LEFT_PULMONARY_VEINS",
    "ME_LAA",
    "TG_BASAL_SAX",
    "TG_MID_SAX",
    "TG_APICAL_SAX",
    "DESC_AORTIC_SAX",
    "DESC_AORTIC_LAX",
];

pub fn builtin_view(name: &str) -> Result<ViewDefinition, ViewError> {
    let (_, text) = VIEWS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| ViewError::UnknownView(name.to_string()))?;
    ViewDefinition::from_json(name, text)
}

pub fn builtin_views() -> Vec<ViewDefinition> {
    BUILTIN_VIEW_NAMES
        .iter()
        .map(|n| builtin_view(n).expect("shipped view definitions parse"))
        .collect()
}
