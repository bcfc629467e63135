use std::io::{BufRead, BufReader};
use std::process::{Command, Stdio};
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use tract_forge::engine::{EngineConfig, DEFAULT_BLOCK_SIZE};
use tract_forge::protocol::decode_audio_frame;
use tract_forge::server::{serve, ServeOptions};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

const NEUTRAL: &str = r#"{"type":"control","r":0.5,"theta":0,"fingers":[0,0,0,0,0],"f0":120,"tenseness":0.6,"voiced":true}"#;
const THUMB: &str = r#"{"type":"control","r":0.5,"theta":0,"fingers":[1,0,0,0,0],"f0":120,"tenseness":0.6,"voiced":true}"#;

async fn start() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let options = ServeOptions {
        config: EngineConfig::default(),
        seed: 99,
        assets: None,
    };
    tokio::spawn(serve(listener, options));
    format!("ws://{addr}/ws")
}

async fn connect(url: &str) -> Ws {
    connect_async(url).await.expect("websocket handshake").0
}

async fn next(ws: &mut Ws) -> Message {
    tokio::time::timeout(Duration::from_secs(5), ws.next())
        .await
        .expect("message within 5 s")
        .expect("stream open")
        .expect("valid frame")
}

fn json(msg: &Message) -> serde_json::Value {
    let text = msg.to_text().unwrap();
    assert!(text.ends_with('\n'), "lines are newline-terminated");
    serde_json::from_str(text).unwrap()
}

/// Skips ahead to the next state line and returns it with its audio frame.
async fn next_block(ws: &mut Ws) -> (serde_json::Value, Vec<i16>) {
    loop {
        let msg = next(ws).await;
        if msg.is_text() && json(&msg)["type"] == "state" {
            let state = json(&msg);
            let audio = next(ws).await;
            assert!(audio.is_binary(), "audio follows its state line");
            return (state, decode_audio_frame(&audio.into_data()));
        }
    }
}

async fn send(ws: &mut Ws, text: &str) {
    ws.send(Message::Text(text.into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn neutral_control_yields_state_and_audio() {
    let url = start().await;
    let mut ws = connect(&url).await;
    send(&mut ws, NEUTRAL).await;
    let (state, audio) = next_block(&mut ws).await;
    assert_eq!(state["areas"].as_array().unwrap().len(), 44);
    assert_eq!(state["constriction"]["class"], "open");
    assert!(state["constriction"]["index"].as_u64().unwrap() < 44);
    assert!(state["rms"].as_f64().unwrap() >= 0.0);
    assert_eq!(audio.len(), DEFAULT_BLOCK_SIZE);

    // audio is flowing once the voice has had a few blocks to start
    let mut loud = false;
    for _ in 0..10 {
        let (state, audio) = next_block(&mut ws).await;
        loud |= state["rms"].as_f64().unwrap() > 0.01 && audio.iter().any(|&s| s != 0);
    }
    assert!(loud);
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_message_gets_an_error_and_the_session_survives() {
    let url = start().await;
    let mut ws = connect(&url).await;
    for bad in ["{oops", r#"{"type":"control","r":3,"theta":0,"fingers":[0,0,0,0,0]}"#] {
        send(&mut ws, bad).await;
        let error = loop {
            let msg = next(&mut ws).await;
            if msg.is_text() && json(&msg)["type"] == "error" {
                break json(&msg);
            }
        };
        assert!(!error["message"].as_str().unwrap().is_empty());
    }
    ws.send(Message::Binary(vec![1, 2, 3].into())).await.unwrap();

    // still open and still obeying controls
    send(&mut ws, THUMB).await;
    let mut occluded = false;
    for _ in 0..40 {
        let (state, _) = next_block(&mut ws).await;
        if state["constriction"]["class"] == "occluded" {
            occluded = true;
            break;
        }
    }
    assert!(occluded);
}

#[tokio::test(flavor = "multi_thread")]
async fn several_lines_in_one_frame() {
    let url = start().await;
    let mut ws = connect(&url).await;
    send(&mut ws, &format!("{NEUTRAL}\nnot json\n{THUMB}\n")).await;
    let mut errors = 0;
    let mut occluded = false;
    for _ in 0..120 {
        let msg = next(&mut ws).await;
        if msg.is_text() {
            let v = json(&msg);
            errors += usize::from(v["type"] == "error");
            occluded |= v["type"] == "state" && v["constriction"]["class"] == "occluded";
        }
        if occluded {
            break;
        }
    }
    assert_eq!(errors, 1);
    assert!(occluded, "the last line in the frame wins");
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_sessions_have_independent_noise() {
    let url = start().await;
    let mut a = connect(&url).await;
    let mut b = connect(&url).await;
    send(&mut a, NEUTRAL).await;
    send(&mut b, NEUTRAL).await;
    let mut ra = Vec::new();
    let mut rb = Vec::new();
    for _ in 0..20 {
        ra.extend(next_block(&mut a).await.1);
        rb.extend(next_block(&mut b).await.1);
    }
    assert_ne!(ra, rb);
}

#[tokio::test(flavor = "multi_thread")]
async fn index_page_and_health() {
    let url = start().await;
    let http = url.replace("ws://", "").replace("/ws", "");
    let get = |path: &'static str| {
        let http = http.clone();
        async move {
            use tokio::io::{AsyncReadExt, AsyncWriteExt};
            let mut s = TcpStream::connect(&http).await.unwrap();
            let req = format!("GET {path} HTTP/1.1\r\nHost: {http}\r\nConnection: close\r\n\r\n");
            s.write_all(req.as_bytes()).await.unwrap();
            let mut body = String::new();
            s.read_to_string(&mut body).await.unwrap();
            body
        }
    };
    assert!(get("/health").await.ends_with("ok"));
    assert!(get("/").await.contains("/ws"));
}

#[test]
fn serve_binary_speaks_the_protocol() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_tract-forge"))
        .args(["serve", "--port", &port.to_string(), "--sr", "44100"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    assert!(line.contains("listening"), "{line}");

    let rt = tokio::runtime::Runtime::new().unwrap();
    let result = rt.block_on(async {
        let mut ws = connect(&format!("ws://127.0.0.1:{port}/ws")).await;
        send(&mut ws, NEUTRAL).await;
        next_block(&mut ws).await
    });
    let _ = child.kill();
    let _ = child.wait();
    assert_eq!(result.0["areas"].as_array().unwrap().len(), 44);
    assert_eq!(result.1.len(), DEFAULT_BLOCK_SIZE);
}
