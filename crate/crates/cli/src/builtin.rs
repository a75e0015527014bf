//! Scenarios shipped with the binary, one per acceptance check.

pub const BUILTINS: &[(&str, &str)] = &[
    ("c1_kappa2_chain", include_str!("../scenarios/c1_kappa2_chain.toml")),
    ("c2_one_mode_scaling", include_str!("../scenarios/c2_one_mode_scaling.toml")),
    ("c3_three_mode", include_str!("../scenarios/c3_three_mode.toml")),
    ("c3_three_mode_low_chi", include_str!("../scenarios/c3_three_mode_low_chi.toml")),
    ("c4_one_mode", include_str!("../scenarios/c4_one_mode.toml")),
    ("c4_two_mode", include_str!("../scenarios/c4_two_mode.toml")),
    ("c5_phaseflip", include_str!("../scenarios/c5_phaseflip.toml")),
    ("c6_semiclassical", include_str!("../scenarios/c6_semiclassical.toml")),
    ("c7_parity_conservation", include_str!("../scenarios/c7_parity_conservation.toml")),
    ("c8_kappa2_cal", include_str!("../scenarios/c8_kappa2_cal.toml")),
    ("c8_drive_cal", include_str!("../scenarios/c8_drive_cal.toml")),
    ("c9_wigner", include_str!("../scenarios/c9_wigner.toml")),
];

pub fn find(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// First comment line of each scenario.
pub fn summary(text: &str) -> &str {
    text.lines().next().and_then(|l| l.strip_prefix("# ")).unwrap_or("")
}
