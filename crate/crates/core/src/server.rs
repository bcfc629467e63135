//! WebSocket server for live control. Every connection gets its own engine,
//! rendered at the audio block rate and streamed back as state lines plus
//! binary audio frames.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::time::MissedTickBehavior;
use tower_http::services::ServeDir;

use crate::engine::{Engine, EngineConfig};
use crate::glottis::GlottalControls;
use crate::protocol::{audio_frame, parse_client_lines, ClientMessage, ProtocolError, ServerMessage};

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub config: EngineConfig,
    /// Sessions draw their engine seeds from this one.
    pub seed: u64,
    /// Directory of UI files served at `/`; a placeholder page otherwise.
    pub assets: Option<PathBuf>,
}

struct Shared {
    options: ServeOptions,
    sessions: AtomicU64,
}

/// Distinct for distinct session indices.
pub fn session_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn router(options: ServeOptions) -> Router {
    let assets = options.assets.clone();
    let shared = Arc::new(Shared {
        options,
        sessions: AtomicU64::new(0),
    });
    let router = Router::new()
        .route("/ws", get(upgrade))
        .route("/health", get(|| async { "ok" }))
        .with_state(shared);
    match assets {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router.route("/", get(|| async { Html(INDEX) })),
    }
}

pub async fn serve(listener: TcpListener, options: ServeOptions) -> std::io::Result<()> {
    axum::serve(listener, router(options)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    let index = shared.sessions.fetch_add(1, Ordering::Relaxed);
    let mut config = shared.options.config.clone();
    config.seed = session_seed(shared.options.seed, index);
    ws.on_upgrade(move |socket| session(socket, config))
}

async fn session(socket: WebSocket, config: EngineConfig) {
    let (mut tx, mut rx) = socket.split();
    let block = Duration::from_secs_f64(config.block_size as f64 / config.sample_rate as f64);
    let mut engine = match Engine::new(config) {
        Ok(e) => e,
        Err(e) => {
            let msg = ServerMessage::Error { message: e.to_string() };
            let _ = tx.send(Message::Text(msg.to_line().into())).await;
            return;
        }
    };
    let mut controls = engine.control_sender().expect("fresh engine has its sender");
    let mut glottal = GlottalControls::default();
    let mut ticker = tokio::time::interval(block);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);

    loop {
        tokio::select! {
            incoming = rx.next() => {
                let errors: Vec<ProtocolError> = match incoming {
                    Some(Ok(Message::Text(text))) => parse_client_lines(&text)
                        .into_iter()
                        .filter_map(|parsed| match parsed {
                            Ok(ClientMessage::Control(c)) => {
                                let snapshot = c.to_snapshot(glottal);
                                glottal = snapshot.glottal;
                                controls.push(snapshot);
                                None
                            }
                            Err(e) => Some(e),
                        })
                        .collect(),
                    Some(Ok(Message::Binary(_))) => {
                        vec![ProtocolError::Malformed("binary frames are not accepted".into())]
                    }
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => Vec::new(),
                    Some(Ok(Message::Close(_)) | Err(_)) | None => break,
                };
                for e in errors {
                    let line = ServerMessage::error(&e).to_line();
                    if tx.send(Message::Text(line.into())).await.is_err() {
                        return;
                    }
                }
            }
            _ = ticker.tick() => {
                let block = engine.render_block();
                let state = ServerMessage::state(&block).to_line();
                if tx.send(Message::Text(state.into())).await.is_err()
                    || tx.send(Message::Binary(audio_frame(&block.samples).into())).await.is_err()
                {
                    return;
                }
            }
        }
    }
}

const INDEX: &str = r#"<!doctype html>
<html>
<head><meta charset="utf-8"><title>tract-forge</title></head>
<body>
<h1>tract-forge</h1>
<p>Connect a WebSocket to <code>/ws</code>. Send control lines such as</p>
<pre>{"type":"control","r":0.5,"theta":0,"fingers":[0,0,0,0,0],"f0":120,"tenseness":0.6,"voiced":true}</pre>
<p>Each audio block comes back as a <code>state</code> line followed by a binary frame of 16-bit little-endian samples.
Start the server with <code>--assets DIR</code> to serve a UI from here instead.</p>
</body>
</html>
"#;
