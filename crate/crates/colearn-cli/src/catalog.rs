//! The fixed experiment catalog, in the order `list` prints it.

use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    /// Slug of the property the experiment exercises.
    pub claim: &'static str,
    pub summary: &'static str,
}

pub const CATALOG: [CatalogEntry; 7] = [
    CatalogEntry {
        name: "byzantine_absolute",
        claim: "bounded-common-vector",
        summary: "the common vector stays inside a closed-form ball under any data flood",
    },
    CatalogEntry {
        name: "byzantine_majority",
        claim: "majority-drift-cap",
        summary: "an honest weight majority caps the common drift caused by adversarial users",
    },
    CatalogEntry {
        name: "gradient_pac",
        claim: "gradient-pac-margin",
        summary: "empirical gradients concentrate around the population pull as data grows",
    },
    CatalogEntry {
        name: "manipulability",
        claim: "smooth-coupling-steering",
        summary: "one attacker with coupling power above 1 steers the common or a victim vector anywhere",
    },
    CatalogEntry {
        name: "negative_example",
        claim: "strategyproofness-counterexample",
        summary: "a two-user instance where a crafted report is meant to beat truthful play",
    },
    CatalogEntry {
        name: "pac_curve",
        claim: "personalized-recovery-rate",
        summary: "a user's error falls at the expected rate, with or without flooded co-users",
    },
    CatalogEntry {
        name: "strategyproof_1d",
        claim: "one-dim-truthfulness",
        summary: "with power-1 couplings a scalar report sweep never beats honesty",
    },
];

pub fn known_names() -> String {
    CATALOG.iter().map(|e| e.name).collect::<Vec<_>>().join(", ")
}
