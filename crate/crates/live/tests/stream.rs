//! Websocket and HTTP behaviour of a running server on an ephemeral port.

use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};
use wrs_core::image::to_u8;
use wrs_core::{render_procedural, DisplayGeometry, SceneKind, SceneSpec};
use wrs_live::{bind, replay, FramePacket, LiveConfig, LiveError, PacketMethod, ServerHandle};

type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn config() -> LiveConfig {
    let mut cfg = LiveConfig::new(
        SceneSpec::new(SceneKind::Checker).with_scale(6.0),
        DisplayGeometry::new(96, 64, 6.0).unwrap(),
    );
    cfg.tick_hz = 60.0;
    cfg.seed = 11;
    cfg
}

async fn start(cfg: LiveConfig) -> ServerHandle {
    let addr: SocketAddr = "127.0.0.1:0".parse().unwrap();
    bind(cfg, addr).await.unwrap().spawn().unwrap()
}

async fn connect(handle: &ServerHandle) -> Socket {
    let (ws, _) = connect_async(format!("ws://{}/stream", handle.addr))
        .await
        .unwrap();
    ws
}

enum Incoming {
    Packet(FramePacket),
    Text(String),
}

async fn next(ws: &mut Socket) -> Incoming {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("no message within 10 s")
            .unwrap()
            .unwrap();
        match msg {
            Message::Binary(b) => return Incoming::Packet(FramePacket::decode(&b).unwrap()),
            Message::Text(t) => return Incoming::Text(t.to_string()),
            _ => continue,
        }
    }
}

async fn next_packet(ws: &mut Socket) -> FramePacket {
    loop {
        if let Incoming::Packet(p) = next(ws).await {
            return p;
        }
    }
}

async fn http_get(addr: SocketAddr, path: &str) -> String {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n");
    s.write_all(req.as_bytes()).await.unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).await.unwrap();
    out
}

#[tokio::test]
async fn healthz_and_index() {
    let h = start(config()).await;
    let health = http_get(h.addr, "/healthz").await;
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    assert!(health.ends_with("\r\n\r\nok"), "{health}");
    let index = http_get(h.addr, "/").await;
    assert!(index.starts_with("HTTP/1.1 200"));
    assert!(index.contains("/stream"));
    h.shutdown();
}

#[tokio::test]
async fn packets_arrive_in_order() {
    let h = start(config()).await;
    let mut ws = connect(&h).await;
    let mut last = None;
    for _ in 0..6 {
        let p = next_packet(&mut ws).await;
        assert_eq!((p.width, p.height, p.rgb.len()), (96, 64, 96 * 64 * 3));
        assert_eq!(p.method, PacketMethod::Wrs);
        if let Some(prev) = last {
            assert!(p.frame_index > prev);
        }
        last = Some(p.frame_index);
    }
    h.shutdown();
}

#[tokio::test]
async fn method_toggle_shows_up_on_the_next_tick() {
    let h = start(config()).await;
    let mut ws = connect(&h).await;
    next_packet(&mut ws).await;
    ws.send(Message::text(r#"{"type":"config","method":"fov"}"#))
        .await
        .unwrap();
    // the packet already in flight may predate the message; the one after must not
    let mut seen = 0;
    loop {
        let p = next_packet(&mut ws).await;
        seen += 1;
        if p.method == PacketMethod::Fov {
            break;
        }
        assert!(seen < 3, "method byte unchanged after {seen} packets");
    }
    h.shutdown();
}

#[tokio::test]
async fn malformed_messages_get_an_error_and_keep_the_connection() {
    let h = start(config()).await;
    let mut ws = connect(&h).await;
    ws.send(Message::text("{not json")).await.unwrap();
    let detail = loop {
        if let Incoming::Text(t) = next(&mut ws).await {
            break t;
        }
    };
    let v: serde_json::Value = serde_json::from_str(&detail).unwrap();
    assert_eq!(v["type"], "error");
    // a well-formed message with an invalid value is rejected by the tick loop
    ws.send(Message::text(r#"{"type":"config","fovea_deg":-2}"#))
        .await
        .unwrap();
    loop {
        if let Incoming::Text(t) = next(&mut ws).await {
            assert!(t.contains("fovea_deg"), "{t}");
            break;
        }
    }
    next_packet(&mut ws).await;
    h.shutdown();
}

#[tokio::test]
async fn gaze_jump_recentres_the_fovea_within_three_ticks() {
    let cfg = config();
    let truth = render_procedural(&cfg.scene, 0, &cfg.geometry)
        .unwrap()
        .color;
    let h = start(cfg.clone()).await;
    let mut ws = connect(&h).await;
    let (bx, by) = (84usize, 10usize);
    let sharp_at_b = |p: &FramePacket| {
        (by - 3..=by + 3)
            .all(|y| (bx - 3..=bx + 3).all(|x| p.pixel(x, y) == truth.get(x, y).map(to_u8)))
    };
    let before = next_packet(&mut ws).await;
    assert!(
        !sharp_at_b(&before),
        "target region already sharp before the jump"
    );
    ws.send(Message::text(format!(
        r#"{{"type":"gaze","x":{bx}.5,"y":{by}.5}}"#
    )))
    .await
    .unwrap();
    let mut ticks = 0;
    loop {
        let p = next_packet(&mut ws).await;
        ticks += 1;
        if sharp_at_b(&p) {
            break;
        }
        assert!(ticks < 3, "fovea not at the new gaze after {ticks} ticks");
    }
    h.shutdown();
}

#[tokio::test]
async fn busy_port_is_a_bind_error() {
    let h = start(config()).await;
    match bind(config(), h.addr).await {
        Err(LiveError::Bind { addr, .. }) => assert_eq!(addr, h.addr),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("second bind on {} succeeded", h.addr),
    }
    h.shutdown();
}

#[tokio::test]
async fn recorded_session_replays_byte_for_byte() {
    let cfg = config();
    let h = start(cfg.clone()).await;
    let mut ws = connect(&h).await;
    let mut received = Vec::new();
    let script = [
        r#"{"type":"gaze","x":10,"y":12}"#,
        r#"{"type":"config","method":"side_by_side"}"#,
        r#"{"type":"gaze","x":70,"y":40,"t_ms":5}"#,
        r#"{"type":"config","fovea_deg":3}"#,
    ];
    for msg in script {
        ws.send(Message::text(msg)).await.unwrap();
        for _ in 0..2 {
            received.push(next_packet(&mut ws).await);
        }
    }
    for _ in 0..3 {
        received.push(next_packet(&mut ws).await);
    }
    let log = h.message_log();
    h.shutdown();
    assert_eq!(log.len(), script.len());
    let last = received.last().unwrap().frame_index;
    let replayed = replay(cfg, &log, last + 1).unwrap();
    for p in &received {
        assert_eq!(
            p.encode(),
            replayed[p.frame_index as usize],
            "frame {}",
            p.frame_index
        );
    }
}
