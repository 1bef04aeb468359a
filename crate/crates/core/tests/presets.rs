use std::path::PathBuf;

use formation_core::scenarios::{self, Scenario, PRESETS};

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

#[test]
fn shipped_files_match_presets() {
    for name in PRESETS {
        let path = shipped(name);
        if std::env::var_os("FORMLAB_WRITE_PRESETS").is_some() {
            std::fs::write(&path, scenarios::preset(name).unwrap().to_json()).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let from_file = Scenario::from_json(&text, &path.display().to_string()).unwrap();
        assert_eq!(from_file, scenarios::preset(name).unwrap(), "{name}");
    }
}

#[test]
fn files_load_by_path() {
    for name in PRESETS {
        let exp = scenarios::load_scenario(shipped(name).to_str().unwrap()).unwrap();
        assert!(exp.rank.is_inf_rigid);
    }
}

#[test]
fn unknown_field_is_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&scenarios::preset("rectangle").unwrap().to_json()).unwrap();
    v["omgea"] = 3.0.into();
    let err = Scenario::from_json(&v.to_string(), "typo.json").unwrap_err().to_string();
    assert!(err.contains("typo.json") && err.contains("omgea"), "{err}");
}
