use std::path::Path;

use tempfile::TempDir;

use super::*;

/// Copy of the shipped data directory with `edit` applied to the parsed
/// default config.
fn edited(edit: impl FnOnce(&mut toml::Table)) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let data = default_config_path().parent().unwrap().to_owned();
    for entry in fs::read_dir(&data).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    let path = dir.path().join("default.toml");
    let mut table: toml::Table = fs::read_to_string(&path).unwrap().parse().unwrap();
    edit(&mut table);
    fs::write(&path, toml::to_string(&table).unwrap()).unwrap();
    (dir, path)
}

fn section<'a>(table: &'a mut toml::Table, name: &str) -> &'a mut toml::Table {
    table
        .entry(name)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .unwrap()
}

fn diagnostics(path: &Path) -> Vec<String> {
    validate_config(path).unwrap()
}

#[test]
fn shipped_config_is_clean() {
    assert_eq!(diagnostics(&default_config_path()), Vec::<String>::new());
    let loaded = load(&default_config_path()).unwrap();
    assert_eq!(loaded.longterm_catalog.items.len(), 17);
    assert_eq!(loaded.run_params().perception, loaded.config.perception);
}

#[test]
fn unchanged_copy_is_clean() {
    let (_dir, path) = edited(|_| {});
    assert!(diagnostics(&path).is_empty());
}

#[test]
fn unknown_order_item_is_named() {
    let (_dir, path) = edited(|t| {
        let line: toml::Table = toml::from_str("item = \"ghost_item\"\ntarget = \"box_1\"").unwrap();
        section(t, "pick").insert("order".into(), toml::Value::Array(vec![toml::Value::Table(line)]));
    });
    let found = diagnostics(&path);
    assert_eq!(found.len(), 1, "{found:?}");
    assert!(found[0].contains("ghost_item"));
}

#[test]
fn order_into_a_non_box_is_rejected() {
    let loaded = load(&default_config_path()).unwrap();
    let item = loaded.catalog.items[0].id.clone();
    let (_dir, path) = edited(|t| {
        let mut line = toml::Table::new();
        line.insert("item".into(), item.into());
        line.insert("target".into(), "tote".into());
        section(t, "pick").insert("order".into(), toml::Value::Array(vec![line.into()]));
    });
    let found = diagnostics(&path);
    assert_eq!(found.len(), 1, "{found:?}");
    assert!(found[0].contains("not a shipping box"));
}

#[test]
fn penalties_over_the_cap_are_reported() {
    let (_dir, path) = edited(|t| {
        let grasp = section(t, "grasp");
        grasp.insert("height_penalty_max".into(), 0.15.into());
        grasp.insert("wall_angle_penalty_max".into(), 0.10.into());
        grasp.insert("penalty_cap".into(), 0.20.into());
    });
    let found = diagnostics(&path);
    assert_eq!(found.len(), 1, "{found:?}");
    assert!(found[0].contains("grasp.penalty_cap"));
}

#[test]
fn weight_tolerance_must_exceed_the_scale_noise() {
    let (_dir, path) = edited(|t| {
        section(t, "world").insert("scale_noise_g".into(), 3.0.into());
    });
    let found = diagnostics(&path);
    assert!(found.iter().any(|d| d.contains("weight_tolerance_g")), "{found:?}");
}

#[test]
fn unsupported_schema_is_an_error() {
    let (_dir, path) = edited(|t| {
        t.insert("schema_version".into(), 2.into());
    });
    match load(&path) {
        Err(ConfigError::Schema { found, .. }) => assert_eq!(found, 2),
        other => panic!("expected a schema error, got {other:?}"),
    }
    let (_dir, path) = edited(|t| {
        t.remove("schema_version");
    });
    let found = diagnostics(&path);
    assert!(found[0].contains("schema_version"));
}

#[test]
fn type_errors_name_the_field() {
    let (_dir, path) = edited(|t| {
        section(t, "world").insert("scale_noise_g".into(), "loud".into());
    });
    match load(&path) {
        Err(ConfigError::Field { field, .. }) => assert_eq!(field, "world.scale_noise_g"),
        other => panic!("expected a field error, got {other:?}"),
    }
    let (_dir, path) = edited(|t| {
        section(t, "perception").insert("sharpness".into(), 1.into());
    });
    match load(&path) {
        Err(ConfigError::Field { field, message, .. }) => {
            assert!(field.starts_with("perception"), "{field}");
            assert!(message.contains("sharpness"), "{message}");
        }
        other => panic!("expected a field error, got {other:?}"),
    }
}

#[test]
fn several_problems_are_reported_together() {
    let (_dir, path) = edited(|t| {
        section(t, "perception").insert("confusion_prob".into(), 1.5.into());
        section(t, "finals").insert("order_items".into(), 99.into());
        section(t, "longrun").insert("sim_hours".into(), 0.0.into());
    });
    let found = diagnostics(&path);
    assert_eq!(found.len(), 3, "{found:?}");
    assert!(matches!(load(&path), Err(ConfigError::Invalid(_))));
}

#[test]
fn missing_files_are_reported() {
    let dir = TempDir::new().unwrap();
    assert!(validate_config(&dir.path().join("absent.toml")).is_err());
    let (dir, path) = edited(|_| {});
    fs::remove_file(dir.path().join("score_table.toml")).unwrap();
    let found = diagnostics(&path);
    assert_eq!(found.len(), 1);
    assert!(found[0].contains("score_table.toml"));
}

#[test]
fn config_round_trips_through_toml() {
    let loaded = load(&default_config_path()).unwrap();
    let text = toml::to_string(&loaded.config).unwrap();
    let back: SimConfig = parse_toml(&text, Path::new("inline.toml")).unwrap();
    assert_eq!(back, loaded.config);
}

#[test]
fn task_shapes_follow_the_config() {
    let loaded = load(&default_config_path()).unwrap();
    let finals = loaded.finals_task(4);
    assert_eq!(finals.manifest.len(), 32);
    assert_eq!(finals.order.len(), 10);
    assert_eq!(finals.stow_budget_s, Some(900.0));
    assert_eq!(loaded.stow_task(4).manifest.len(), 12);
    let pick = loaded.pick_task(4);
    assert_eq!((pick.manifest.len(), pick.order.len()), (16, 8));
    assert_eq!(loaded.finals_task(4), finals);
}
