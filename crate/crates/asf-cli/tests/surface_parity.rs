//! Surface parity: every CLI subcommand / REST route pair must return
//! semantically identical JSON for the same underlying call. Outputs are
//! normalized for volatile values (wall-clock fields, run ids) and then
//! compared against shared golden files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use asf_cli::rest::app;
use asf_cli::state::ServiceState;
use asf_core::config::ServiceConfig;
use asf_core::registry::fixtures::populated_entry;
use asf_core::registry::{EntryClass, ServiceEntry};
use axum::body::Body;
use axum::http::{header, Request};
use axum::Router;
use tower::util::ServiceExt;

const ADMIN: &str = "demo-admin-token";

/// Keys whose values depend on the wall clock or fresh identifiers.
const VOLATILE_KEYS: &[&str] = &[
    "date",
    "time",
    "checked_at",
    "ts",
    "timestamp",
    "run_id",
    "updated_at",
];

fn normalize(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            for (key, val) in map.iter_mut() {
                if VOLATILE_KEYS.contains(&key.as_str()) {
                    *val = serde_json::Value::String("<volatile>".into());
                } else {
                    normalize(val);
                }
            }
        }
        serde_json::Value::Array(items) => {
            for item in items {
                normalize(item);
            }
        }
        _ => {}
    }
}

/// Deterministic fixture entries with fixed ids.
fn fixture_entries() -> Vec<ServiceEntry> {
    let translate = populated_entry(EntryClass::InstantiatedService);

    let mut forecast = populated_entry(EntryClass::InstantiatedService);
    forecast.id = Some("11111111-2222-4333-8444-555555555555".into());
    forecast.name = Some("forecast".into());
    forecast.title = Some("Weather forecast".into());
    forecast.description = Some("Predicts weather from observations".into());
    forecast.tags = Some(vec!["weather".into()]);
    forecast.categories = Some(vec!["Science".into()]);
    forecast.specification_schema =
        Some("https://example.org/schemas/11111111-2222-4333-8444-555555555555.json".into());

    let mut library = populated_entry(EntryClass::Library);
    library.id = Some("99999999-8888-4777-8666-555555555544".into());
    library.name = Some("cluster-lib".into());
    library.title = Some("Clustering library".into());
    library.public = Some(false);
    library.endpoint = None;
    library.heartbeat = None;
    library.caching_interval = None;
    library.specification_schema =
        Some("https://example.org/schemas/99999999-8888-4777-8666-555555555544.json".into());

    vec![translate, forecast, library]
}

/// A seeded service environment (fresh per surface, identical content).
fn seeded_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig::at_dir(dir.path());
    std::fs::write(
        &config.store_file,
        serde_json::to_string_pretty(&fixture_entries()).unwrap(),
    )
    .unwrap();
    let config_yaml = format!(
        "store_file: {}\ntoken_file: {}\naudit_log: {}\n",
        config.store_file.display(),
        config.token_file.display(),
        config.audit_log.display()
    );
    std::fs::write(dir.path().join("asf.yaml"), config_yaml).unwrap();
    dir
}

fn cli_json(dir: &Path, args: &[&str]) -> serde_json::Value {
    let config = dir.join("asf.yaml");
    let mut argv = vec![
        "asf".to_string(),
        "--config".to_string(),
        config.display().to_string(),
        "--token".to_string(),
        ADMIN.to_string(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = asf_cli::run_with(&argv, &mut out, &mut err);
    assert_eq!(
        code,
        0,
        "cli {:?} failed: {}",
        args,
        String::from_utf8_lossy(&err)
    );
    serde_json::from_slice(&out).expect("cli output is JSON")
}

fn cli_text(dir: &Path, args: &[&str]) -> String {
    let config = dir.join("asf.yaml");
    let mut argv = vec![
        "asf".to_string(),
        "--config".to_string(),
        config.display().to_string(),
        "--token".to_string(),
        ADMIN.to_string(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = asf_cli::run_with(&argv, &mut out, &mut err);
    assert_eq!(code, 0, "cli {args:?} failed: {}", String::from_utf8_lossy(&err));
    String::from_utf8(out).unwrap()
}

fn rest_router(dir: &Path) -> Router {
    let config = ServiceConfig::load(&dir.join("asf.yaml")).unwrap();
    let state = Arc::new(ServiceState::open(config).unwrap());
    app(state)
}

async fn rest_json(
    router: &Router,
    method: &str,
    uri: &str,
    body: Option<serde_json::Value>,
) -> serde_json::Value {
    let mut request = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::AUTHORIZATION, format!("Bearer {ADMIN}"));
    let request = match body {
        Some(body) => request
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body.to_string()))
            .unwrap(),
        None => request.body(Body::empty()).unwrap(),
    };
    let response = router.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = axum::body::to_bytes(response.into_body(), usize::MAX)
        .await
        .unwrap();
    assert!(
        status.is_success(),
        "{method} {uri}: {status} {}",
        String::from_utf8_lossy(&bytes)
    );
    serde_json::from_slice(&bytes).expect("rest output is JSON")
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Compare both surfaces against each other and against the shared golden
/// file. Set UPDATE_GOLDENS=1 to rewrite goldens.
fn assert_parity(name: &str, cli: serde_json::Value, rest: serde_json::Value) {
    let mut cli = cli;
    let mut rest = rest;
    normalize(&mut cli);
    normalize(&mut rest);
    assert_eq!(cli, rest, "{name}: CLI and REST outputs diverge");

    let path = golden_path(name);
    if std::env::var("UPDATE_GOLDENS").is_ok() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&cli).unwrap()).unwrap();
    }
    let golden: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(&path)
            .unwrap_or_else(|_| panic!("missing golden {name}; run with UPDATE_GOLDENS=1")),
    )
    .unwrap();
    assert_eq!(cli, golden, "{name}: output diverges from golden");
}

#[tokio::test]
async fn registry_search_parity() {
    let cli_dir = seeded_dir();
    let rest_dir = seeded_dir();
    let cli = cli_json(
        cli_dir.path(),
        &["registry", "search", "--keyword", "translate", "--tag", "nlp"],
    );
    let router = rest_router(rest_dir.path());
    let rest = rest_json(&router, "GET", "/search?keywords=translate&tags=nlp", None).await;
    assert_parity("registry_search.json", cli, rest);
}

#[tokio::test]
async fn registry_get_parity() {
    let id = "6b7f1d7a-9a1c-4c3a-8f0e-2d5a3f9b1c44";
    let cli_dir = seeded_dir();
    let rest_dir = seeded_dir();
    let cli = cli_json(cli_dir.path(), &["registry", "get", id]);
    let router = rest_router(rest_dir.path());
    let rest = rest_json(&router, "GET", &format!("/entries/{id}"), None).await;
    assert_parity("registry_get.json", cli, rest);
}

#[tokio::test]
async fn registry_add_parity() {
    let mut entry = populated_entry(EntryClass::InstantiatedService);
    entry.id = Some("aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee".into());
    entry.name = Some("fresh".into());
    entry.specification_schema =
        Some("https://example.org/schemas/aaaaaaaa-bbbb-4ccc-8ddd-eeeeeeeeeeee.json".into());

    let cli_dir = seeded_dir();
    let entry_file = cli_dir.path().join("fresh.json");
    std::fs::write(&entry_file, serde_json::to_string(&entry).unwrap()).unwrap();
    let cli = cli_json(
        cli_dir.path(),
        &["registry", "add", entry_file.to_str().unwrap()],
    );

    let rest_dir = seeded_dir();
    let router = rest_router(rest_dir.path());
    let rest = rest_json(
        &router,
        "POST",
        "/entries",
        Some(serde_json::to_value(&entry).unwrap()),
    )
    .await;
    assert_parity("registry_add.json", cli, rest);
}

#[tokio::test]
async fn catalog_export_parity() {
    let cli_dir = seeded_dir();
    let rest_dir = seeded_dir();
    let cli = cli_json(cli_dir.path(), &["catalog", "export"]);
    let router = rest_router(rest_dir.path());
    let rest = rest_json(&router, "GET", "/catalog", None).await;
    assert_parity("catalog_export.json", cli, rest);
}

#[tokio::test]
async fn fair_audit_parity() {
    let entry = populated_entry(EntryClass::InstantiatedService);
    let cli_dir = seeded_dir();
    let entry_file = cli_dir.path().join("entry.json");
    std::fs::write(&entry_file, serde_json::to_string(&entry).unwrap()).unwrap();
    let cli = cli_json(
        cli_dir.path(),
        &["fair", "audit", entry_file.to_str().unwrap()],
    );

    let rest_dir = seeded_dir();
    let router = rest_router(rest_dir.path());
    let rest = rest_json(
        &router,
        "POST",
        "/fair/audit",
        Some(serde_json::json!({ "entry": serde_json::to_value(&entry).unwrap() })),
    )
    .await;
    assert_parity("fair_audit.json", cli, rest);
}

#[tokio::test]
async fn nlp_translate_parity() {
    let cli_dir = seeded_dir();
    let rest_dir = seeded_dir();
    let cli = cli_json(
        cli_dir.path(),
        &[
            "nlp",
            "translate",
            "--provider",
            "local",
            "--from",
            "en",
            "--to",
            "de",
            "hello",
            "world",
        ],
    );
    let router = rest_router(rest_dir.path());
    let rest = rest_json(
        &router,
        "POST",
        "/translate",
        Some(serde_json::json!({
            "text": "hello world",
            "from": "en",
            "to": "de",
            "provider": "local",
        })),
    )
    .await;
    assert_parity("nlp_translate.json", cli, rest);
}

#[tokio::test]
async fn federation_search_parity() {
    let members = [
        ("A", fixture_entries()),
        ("B", {
            let mut entry = populated_entry(EntryClass::InstantiatedService);
            entry.id = Some("12121212-3434-4545-8686-787878787878".into());
            entry.name = Some("translate-b".into());
            entry.specification_schema = Some(
                "https://example.org/schemas/12121212-3434-4545-8686-787878787878.json".into(),
            );
            vec![entry]
        }),
    ];

    let cli_dir = seeded_dir();
    let mut member_args = Vec::new();
    for (label, entries) in &members {
        let path = cli_dir.path().join(format!("member_{label}.json"));
        std::fs::write(&path, serde_json::to_string(entries).unwrap()).unwrap();
        member_args.push(format!("{label}={}", path.display()));
    }
    let cli = cli_json(
        cli_dir.path(),
        &[
            "fed",
            "search",
            "--member",
            &member_args[0],
            "--member",
            &member_args[1],
            "--keyword",
            "translate",
        ],
    );

    let rest_dir = seeded_dir();
    let router = rest_router(rest_dir.path());
    let rest = rest_json(
        &router,
        "POST",
        "/federation/search",
        Some(serde_json::json!({
            "members": members
                .iter()
                .map(|(label, entries)| serde_json::json!({
                    "label": label,
                    "entries": serde_json::to_value(entries).unwrap(),
                }))
                .collect::<Vec<_>>(),
            "query": { "keywords": ["translate"] },
        })),
    )
    .await;
    assert_parity("federation_search.json", cli, rest);
}

#[tokio::test]
async fn audit_trail_parity() {
    // Identical guarded sequences on both surfaces produce identical
    // audit trails (timestamps aside).
    let cli_dir = seeded_dir();
    cli_json(cli_dir.path(), &["registry", "search"]);
    cli_json(cli_dir.path(), &["catalog", "export"]);
    let cli = cli_json(cli_dir.path(), &["admin", "audit"]);

    let rest_dir = seeded_dir();
    let router = rest_router(rest_dir.path());
    rest_json(&router, "GET", "/search", None).await;
    rest_json(&router, "GET", "/catalog", None).await;
    let rest = rest_json(&router, "GET", "/audit", None).await;
    assert_parity("audit_trail.json", cli, rest);
}

#[tokio::test]
async fn workflow_status_parity() {
    let yaml = "\
name: parity
jobs:
  - name: a
    kind: noop
  - name: b
    kind: noop
    depends_on: [a]
";
    let cli_dir = seeded_dir();
    let wf_file = cli_dir.path().join("wf.yaml");
    std::fs::write(&wf_file, yaml).unwrap();
    let cli = cli_json(
        cli_dir.path(),
        &["workflow", "run", wf_file.to_str().unwrap()],
    );

    let rest_dir = seeded_dir();
    let router = rest_router(rest_dir.path());
    let request = Request::builder()
        .method("POST")
        .uri("/workflows")
        .header(header::AUTHORIZATION, format!("Bearer {ADMIN}"))
        .body(Body::from(yaml))
        .unwrap();
    let response = router.clone().oneshot(request).await.unwrap();
    let bytes = axum::body::to_bytes(response.into_body(), usize::MAX)
        .await
        .unwrap();
    let run_id = serde_json::from_slice::<serde_json::Value>(&bytes).unwrap()["run_id"]
        .as_str()
        .unwrap()
        .to_string();
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(10);
    let rest = loop {
        let status = rest_json(
            &router,
            "GET",
            &format!("/workflows/{run_id}/status"),
            None,
        )
        .await;
        if status["finished"].as_bool().unwrap() {
            break status;
        }
        assert!(std::time::Instant::now() < deadline);
        tokio::time::sleep(std::time::Duration::from_millis(10)).await;
    };
    assert_parity("workflow_status.json", cli, rest);
}

#[tokio::test]
async fn ee_generate_parity() {
    let config_yaml = "\
name: study
parameters:
  data: /tmp/in
experiments:
  a: [1, 2]
  b: [x, y, z]
";
    let template = "echo a={a} b={b} data={data}";

    let cli_dir = seeded_dir();
    let config_file = cli_dir.path().join("config.yaml");
    let template_file = cli_dir.path().join("template.sh");
    std::fs::write(&config_file, config_yaml).unwrap();
    std::fs::write(&template_file, template).unwrap();
    let outdir = cli_dir.path().join("runs");
    let text = cli_text(
        cli_dir.path(),
        &[
            "ee",
            "generate",
            config_file.to_str().unwrap(),
            template_file.to_str().unwrap(),
            outdir.to_str().unwrap(),
        ],
    );
    assert_eq!(text.trim(), "6 experiments generated");
    let index = std::fs::read_to_string(outdir.join("index.txt")).unwrap();
    let cli_slugs: Vec<&str> = index.lines().collect();

    let rest_dir = seeded_dir();
    let router = rest_router(rest_dir.path());
    let rest_out = rest_dir.path().join("runs");
    let rest = rest_json(
        &router,
        "POST",
        "/ee/generate",
        Some(serde_json::json!({
            "config": config_yaml,
            "template": template,
            "outdir": rest_out.to_str().unwrap(),
        })),
    )
    .await;
    assert_eq!(rest["generated"], 6);
    let rest_slugs: Vec<&str> = rest["slugs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s.as_str().unwrap())
        .collect();
    assert_eq!(cli_slugs, rest_slugs);
    assert_parity(
        "ee_generate.json",
        serde_json::json!({ "generated": cli_slugs.len(), "slugs": cli_slugs }),
        rest,
    );
}
