//! Energy unit conversions.

/// Terajoules in one gigawatt-hour.
pub const TJ_PER_GWH: f64 = 3.6;

pub fn gwh_to_tj(gwh: f64) -> f64 {
    gwh * TJ_PER_GWH
}

pub fn tj_to_gwh(tj: f64) -> f64 {
    tj / TJ_PER_GWH
}

/// kg × TJ⁻¹ × TJ → million tonnes.
pub fn kg_to_mt(kg: f64) -> f64 {
    kg / 1e9
}
