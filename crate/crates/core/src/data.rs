//! Embedded tables and their checksum manifest.

use sha2::{Digest, Sha256};

pub const CW_GENERATORS: &str = include_str!("../data/cw_generators.txt");
pub const CLASSES: &str = include_str!("../data/classes.txt");
pub const CLOSED_FORMS: &str = include_str!("../data/closed_forms.txt");
pub const CHARACTER: &str = include_str!("../data/character.txt");
pub const IDENTITIES: &str = include_str!("../data/identities.txt");
pub const MANIFEST: &str = include_str!("../data/MANIFEST.sha256");

/// Every embedded file with its name in the manifest.
pub fn files() -> [(&'static str, &'static str); 5] {
    [
        ("cw_generators.txt", CW_GENERATORS),
        ("classes.txt", CLASSES),
        ("closed_forms.txt", CLOSED_FORMS),
        ("character.txt", CHARACTER),
        ("identities.txt", IDENTITIES),
    ]
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Names whose digest disagrees with the manifest, or that it does not list.
pub fn verify_manifest() -> Vec<String> {
    let listed: Vec<(&str, &str)> = MANIFEST
        .lines()
        .filter_map(|l| l.split_once("  "))
        .map(|(h, n)| (n.trim(), h.trim()))
        .collect();
    files()
        .iter()
        .filter(|(name, text)| !listed.iter().any(|(n, h)| n == name && *h == sha256_hex(text)))
        .map(|(name, _)| name.to_string())
        .collect()
}

/// Non-comment, non-blank lines.
pub fn rows(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}
