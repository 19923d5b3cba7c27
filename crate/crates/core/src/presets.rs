//! Economies shipped with the repository under `configs/`.

use serde::Deserialize;

use crate::model::ModelSpec;

#[derive(Deserialize)]
struct ModelOnly {
    model: ModelSpec,
}

fn parse(name: &str, text: &str) -> ModelSpec {
    let file: ModelOnly =
        toml::from_str(text).unwrap_or_else(|e| panic!("shipped config {name} is malformed: {e}"));
    file.model
}

pub const REFERENCE_TOML: &str = include_str!("../../../configs/reference.toml");
pub const REFERENCE_FISCAL_TOML: &str = include_str!("../../../configs/reference_fiscal.toml");
pub const NO_TRAP_TOML: &str = include_str!("../../../configs/no_trap.toml");
pub const TWICE_BENT_TOML: &str = include_str!("../../../configs/twice_bent.toml");
pub const THRICE_BENT_TOML: &str = include_str!("../../../configs/thrice_bent.toml");

/// One trap window; IS crosses only the repelling middle arc.
pub fn reference() -> ModelSpec {
    parse("reference.toml", REFERENCE_TOML)
}

/// Reference money market with a steep IS curve that can cut all three arcs.
pub fn reference_fiscal() -> ModelSpec {
    parse("reference_fiscal.toml", REFERENCE_FISCAL_TOML)
}

/// Reference economy without a liquidity trap.
pub fn no_trap() -> ModelSpec {
    parse("no_trap.toml", NO_TRAP_TOML)
}

/// Two trap windows, five arcs.
pub fn twice_bent() -> ModelSpec {
    parse("twice_bent.toml", TWICE_BENT_TOML)
}

/// Three trap windows, seven arcs.
pub fn thrice_bent() -> ModelSpec {
    parse("thrice_bent.toml", THRICE_BENT_TOML)
}

/// Look up a shipped economy by file stem.
pub fn by_name(name: &str) -> Option<ModelSpec> {
    match name {
        "reference" => Some(reference()),
        "reference_fiscal" => Some(reference_fiscal()),
        "no_trap" => Some(no_trap()),
        "twice_bent" => Some(twice_bent()),
        "thrice_bent" => Some(thrice_bent()),
        _ => None,
    }
}
