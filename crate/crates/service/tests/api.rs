use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use whatif_core::catalog::ObjectClass;
use whatif_core::effects::{EffectsModel, PoseStats, Thresholds};
use whatif_core::pipeline::Models;
use whatif_core::scene::{Scene, SceneObject, Table};
use whatif_service::{router, AppState, TRANSPORT_STRIDE};

fn models() -> Models {
    Models {
        parser: None,
        effects: EffectsModel {
            stats: PoseStats::identity(),
            thresholds: Thresholds {
                tau_t: 1e-4,
                tau_r: 1e-4,
            },
        },
    }
}

fn app() -> (Arc<AppState>, Router) {
    let st = Arc::new(AppState::new(models()));
    (st.clone(), router(st))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

fn parse(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn spread() -> Scene {
    Scene {
        id: "spread".into(),
        table: Table::default(),
        objects: vec![
            SceneObject::resting(ObjectClass::Banana, -0.3, -0.3, 0.0),
            SceneObject::resting(ObjectClass::CoffeeCan, 0.3, -0.3, 0.0),
            SceneObject::resting(ObjectClass::FoamBrick, 0.0, 0.0, 0.0),
            SceneObject::resting(ObjectClass::Softball, -0.3, 0.3, 0.0),
            SceneObject::resting(ObjectClass::Screwdriver, 0.3, 0.3, 0.0),
        ],
    }
}

#[tokio::test]
async fn healthz() {
    let (_, app) = app();
    let (status, _) = call(&app, "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn seeded_scenes_get_fresh_ids() {
    let (_, app) = app();
    let (s1, a) = call(&app, "POST", "/scenes", Some(json!({ "seed": 7 }))).await;
    let (s2, b) = call(&app, "POST", "/scenes", Some(json!({ "seed": 7 }))).await;
    assert_eq!((s1, s2), (StatusCode::CREATED, StatusCode::CREATED));
    let (a, b) = (parse(&a), parse(&b));
    assert_ne!(a["id"], b["id"]);
    assert_eq!(a["scene"], b["scene"]);
    assert_eq!(a["scene"]["objects"].as_array().unwrap().len(), 5);

    let (status, got) = call(
        &app,
        "GET",
        &format!("/scenes/{}", a["id"].as_str().unwrap()),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parse(&got)["scene"], a["scene"]);
}

#[tokio::test]
async fn unknown_and_deleted_ids_are_404() {
    let (_, app) = app();
    assert_eq!(
        call(&app, "GET", "/scenes/nope", None).await.0,
        StatusCode::NOT_FOUND
    );
    let body = json!({ "text": "the robot removes the banana" });
    assert_eq!(
        call(&app, "POST", "/scenes/nope/whatif", Some(body))
            .await
            .0,
        StatusCode::NOT_FOUND
    );

    let (_, created) = call(&app, "POST", "/scenes", Some(json!({ "scene": spread() }))).await;
    let id = parse(&created)["id"].as_str().unwrap().to_string();
    assert_eq!(
        call(&app, "DELETE", &format!("/scenes/{id}"), None).await.0,
        StatusCode::NO_CONTENT
    );
    assert_eq!(
        call(&app, "GET", &format!("/scenes/{id}"), None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&app, "DELETE", &format!("/scenes/{id}"), None).await.0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn schema_violations_name_the_path() {
    let (_, app) = app();
    let bad = json!({ "scene": { "id": "x", "table": { "half_extents": [0.5, 0.5, 0.025] } } });
    let (status, body) = call(&app, "POST", "/scenes", Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse(&body)["path"], ".scene.objects");

    let (_, created) = call(&app, "POST", "/scenes", Some(json!({ "scene": spread() }))).await;
    let id = parse(&created)["id"].as_str().unwrap().to_string();
    let (status, body) = call(
        &app,
        "POST",
        &format!("/scenes/{id}/whatif"),
        Some(json!({ "text": 3 })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse(&body)["path"], ".text");
    let req = json!({ "text": "the robot removes the banana", "backend": "neural" });
    let (status, body) = call(&app, "POST", &format!("/scenes/{id}/whatif"), Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse(&body)["path"], ".backend");
}

#[tokio::test]
async fn overlapping_scene_is_rejected() {
    let (_, app) = app();
    let mut s = spread();
    s.objects[1] = SceneObject::resting(ObjectClass::CoffeeCan, -0.3, -0.3, 0.0);
    let (status, body) = call(&app, "POST", "/scenes", Some(json!({ "scene": s }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(parse(&body)["path"], ".scene");
}

#[tokio::test]
async fn parse_failures_are_422_with_stage() {
    let (_, app) = app();
    let (_, created) = call(&app, "POST", "/scenes", Some(json!({ "scene": spread() }))).await;
    let id = parse(&created)["id"].as_str().unwrap().to_string();
    let uri = format!("/scenes/{id}/whatif");
    let (status, body) = call(
        &app,
        "POST",
        &uri,
        Some(json!({ "text": "blorp fizzle wug" })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(parse(&body)["stage"], "parse");

    // No parser model was loaded.
    let req = json!({ "text": "the robot removes the banana", "backend": "linear" });
    let (status, body) = call(&app, "POST", &uri, Some(req)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(parse(&body)["stage"], "parse");

    let (status, body) = call(
        &app,
        "POST",
        &uri,
        Some(json!({ "text": "the robot removes the mug" })),
    )
    .await;
    assert_eq!(
        status,
        StatusCode::UNPROCESSABLE_ENTITY,
        "{}",
        String::from_utf8_lossy(&body)
    );
}

#[tokio::test]
async fn removed_object_has_no_trajectory() {
    let (st, app) = app();
    let (_, created) = call(&app, "POST", "/scenes", Some(json!({ "scene": spread() }))).await;
    let id = parse(&created)["id"].as_str().unwrap().to_string();
    let req = json!({ "text": "the robot removes the banana" });
    let (status, body) = call(&app, "POST", &format!("/scenes/{id}/whatif"), Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    let v = parse(&body);
    assert_eq!(v["action"]["kind"], "remove");
    let trs = v["trajectories_30hz"].as_array().unwrap();
    assert_eq!(trs.len(), 4);
    assert!(trs.iter().all(|t| t["class"] != "banana"));
    let descriptions = v["descriptions"].as_array().unwrap();
    assert_eq!(descriptions.len(), 4);
    assert!(descriptions.iter().all(|d| d["text"] == "nothing"));

    // Every transported sample is the matching full-rate sample.
    let full = st.last_simulation(&id).unwrap();
    for t in trs {
        let class: ObjectClass = t["class"].as_str().unwrap().parse().unwrap();
        let samples = t["samples"].as_array().unwrap();
        let tr = &full.trajectories[&class];
        assert_eq!(t["rate_hz"], 30);
        assert_eq!(samples.len(), tr.samples.len().div_ceil(TRANSPORT_STRIDE));
        for (k, s) in samples.iter().enumerate() {
            let want = &tr.samples[k * TRANSPORT_STRIDE];
            assert_eq!(s["t"].as_f64().unwrap().to_bits(), want.t.to_bits());
            let t3: Vec<f64> = serde_json::from_value(s["t3"].clone()).unwrap();
            assert_eq!(t3, want.pose.translation.as_slice());
        }
    }
}

fn question(scene: &Value, k: usize) -> String {
    let class: ObjectClass = scene["objects"][k % 5]["class"]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    let name = class.display_name();
    match k % 4 {
        0 => format!("the robot pushes the {name} to the left"),
        1 => format!("the robot rotates the {name} clockwise"),
        2 => format!("the robot removes the {name}"),
        _ => {
            let other: ObjectClass = scene["objects"][(k + 1) % 5]["class"]
                .as_str()
                .unwrap()
                .parse()
                .unwrap();
            format!(
                "the robot drops the {name} onto the {}",
                other.display_name()
            )
        }
    }
}

async fn eight_scenes(app: &Router) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for seed in 0..8u64 {
        let (_, created) = call(app, "POST", "/scenes", Some(json!({ "seed": seed + 100 }))).await;
        let v = parse(&created);
        out.push((
            v["id"].as_str().unwrap().to_string(),
            question(&v["scene"], seed as usize),
        ));
    }
    out
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_match_serial() {
    let (_, serial_app) = app();
    let jobs = eight_scenes(&serial_app).await;
    let mut serial = Vec::new();
    for (id, text) in &jobs {
        let r = call(
            &serial_app,
            "POST",
            &format!("/scenes/{id}/whatif"),
            Some(json!({ "text": text })),
        )
        .await;
        serial.push(r);
    }

    let (_, conc_app) = app();
    let jobs2 = eight_scenes(&conc_app).await;
    assert_eq!(jobs, jobs2);
    let handles: Vec<_> = jobs
        .iter()
        .map(|(id, text)| {
            let app = conc_app.clone();
            let uri = format!("/scenes/{id}/whatif");
            let body = json!({ "text": text });
            tokio::spawn(async move { call(&app, "POST", &uri, Some(body)).await })
        })
        .collect();
    for (h, want) in handles.into_iter().zip(&serial) {
        let got = h.await.unwrap();
        assert_eq!(got.0, StatusCode::OK, "{}", String::from_utf8_lossy(&got.1));
        assert_eq!(&got, want);
    }
}

#[tokio::test]
async fn persistent_store_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let st = Arc::new(AppState::persistent(models(), dir.path().to_path_buf()).unwrap());
    let app = router(st);
    let (_, created) = call(&app, "POST", "/scenes", Some(json!({ "scene": spread() }))).await;
    let id = parse(&created)["id"].as_str().unwrap().to_string();

    let app = router(Arc::new(
        AppState::persistent(models(), dir.path().to_path_buf()).unwrap(),
    ));
    let (status, got) = call(&app, "GET", &format!("/scenes/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parse(&got)["scene"], parse(&created)["scene"]);
    let (_, next) = call(&app, "POST", "/scenes", Some(json!({ "scene": spread() }))).await;
    assert_ne!(parse(&next)["id"], json!(id));
}
