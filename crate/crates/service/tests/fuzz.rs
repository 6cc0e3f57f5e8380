//! Arbitrary request bodies must never produce a 5xx, and every non-2xx
//! reply must carry a well-formed error body.

mod common;

use std::sync::OnceLock;

use axum::Router;
use proptest::prelude::*;
use serde_json::{Map, Value};

use common::*;

fn runtime() -> &'static tokio::runtime::Runtime {
    static RT: OnceLock<tokio::runtime::Runtime> = OnceLock::new();
    RT.get_or_init(|| {
        tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .unwrap()
    })
}

fn shared_app() -> &'static Router {
    static APP: OnceLock<Router> = OnceLock::new();
    APP.get_or_init(app)
}

const KEYS: [&str; 10] = [
    "n",
    "p",
    "k",
    "temperature",
    "humidity",
    "ph",
    "rainfall",
    "crop",
    "label",
    "",
];

fn json_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        any::<f64>()
            .prop_map(|f| serde_json::Number::from_f64(f).map_or(Value::Null, Value::Number)),
        "[a-z0-9 .eE+-]{0,12}".prop_map(Value::from),
        Just(Value::from("rice")),
        Just(Value::from("NaN")),
        Just(Value::from("1e999")),
    ];
    leaf.prop_recursive(2, 8, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-z]{1,4}", inner, 0..3)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn json_body() -> impl Strategy<Value = Vec<u8>> {
    let object = prop::collection::vec((prop::sample::select(KEYS.to_vec()), json_value()), 0..9)
        .prop_map(|fields| {
            let mut map = Map::new();
            for (k, v) in fields {
                map.insert(k.to_string(), v);
            }
            serde_json::to_vec(&Value::Object(map)).unwrap()
        });
    prop_oneof![
        4 => object,
        1 => json_value().prop_map(|v| serde_json::to_vec(&v).unwrap()),
        1 => prop::collection::vec(any::<u8>(), 0..64),
    ]
}

fn check(reply: &Reply) -> Result<(), TestCaseError> {
    prop_assert!(
        !reply.status.is_server_error(),
        "server error {}: {}",
        reply.status,
        String::from_utf8_lossy(&reply.bytes)
    );
    if !reply.status.is_success() {
        let body: Value =
            serde_json::from_slice(&reply.bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let errors: Vec<String> = schema("error")
            .iter_errors(&body)
            .map(|e| e.to_string())
            .collect();
        prop_assert!(errors.is_empty(), "{errors:?}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, ..ProptestConfig::default() })]

    #[test]
    fn json_endpoints_survive_fuzzed_bodies(body in json_body()) {
        let app = shared_app();
        for path in ["/api/crop-recommend", "/api/fertilizer-recommend"] {
            let reply = runtime().block_on(post_json(app, path, body.clone()));
            check(&reply)?;
            if reply.status.is_success() {
                let name = path.trim_start_matches("/api/");
                let json: Value = serde_json::from_slice(&reply.bytes).unwrap();
                let errors: Vec<String> = schema(&format!("{name}.response")).iter_errors(&json).map(|e| e.to_string()).collect();
                prop_assert!(errors.is_empty(), "{errors:?}");
            }
        }
    }

    #[test]
    fn upload_endpoints_survive_fuzzed_forms(
        image in prop::option::of(prop::collection::vec(any::<u8>(), 0..256)),
        n_samples in prop::option::of("[0-9a-z-]{0,6}"),
        raw in prop::collection::vec(any::<u8>(), 0..128),
        use_raw in any::<bool>(),
    ) {
        let app = shared_app();
        for path in ["/api/disease-predict", "/api/explain"] {
            let reply = if use_raw {
                runtime().block_on(send(app, axum::http::Request::post(path)
                    .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
                    .body(axum::body::Body::from(raw.clone()))
                    .unwrap()))
            } else {
                let mut parts: Vec<(&str, Option<&str>, &[u8])> = Vec::new();
                if let Some(img) = &image {
                    parts.push(("image", Some("f.png"), img));
                }
                if let Some(n) = &n_samples {
                    parts.push(("n_samples", None, n.as_bytes()));
                }
                runtime().block_on(post_multipart(app, path, &parts))
            };
            check(&reply)?;
        }
    }
}
