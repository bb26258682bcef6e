use std::path::Path;

use rics::config::{parse_config, Config};

#[test]
fn shipped_default_matches_builtin_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(parse_config(&path).unwrap(), Config::default());
}
