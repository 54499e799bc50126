//! Queries an OpenAI-compatible completion endpoint. Without arguments a
//! throwaway local server plays the endpoint, failing once to show a retry.
//!
//! ```bash
//! cargo run --example http_endpoint
//! MY_TOKEN=... cargo run --example http_endpoint -- https://api.example.com my-model MY_TOKEN
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use chess_modulo::chess::Position;
use chess_modulo::model::{GenerationParams, HttpEndpoint, HttpModel, TextModel};
use chess_modulo::runner::{build_prompt, InferenceMode};

/// Answers the first request with 503 and the rest with a fixed move.
fn local_server() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    thread::spawn(move || {
        for (i, stream) in listener.incoming().enumerate() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut header = String::new();
                reader.read_line(&mut header).unwrap();
                if header.trim().is_empty() {
                    break;
                }
                if let Some(v) = header.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let (status, reply) = if i == 0 {
                ("503 Service Unavailable", "{}".to_owned())
            } else {
                ("200 OK", r#"{"choices":[{"text":" d8d1"}],"usage":{"completion_tokens":2}}"#.to_owned())
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    url
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("debug")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = match args.as_slice() {
        [url, model, rest @ ..] => {
            let mut c = HttpEndpoint::new(url.as_str(), model.as_str());
            c.auth_env = rest.first().cloned();
            c
        }
        _ => HttpEndpoint::new(local_server(), "stub"),
    };
    cfg.backoff_ms = 50;

    let p = Position::from_fen("3r4/6Rp/pk6/1p3B2/5N2/P3pbP1/1P5P/4K3 b - - 3 36").unwrap();
    let prompt = build_prompt(&p, InferenceMode::Normal, None).unwrap();
    let mut model = HttpModel::new(cfg).expect("client builds");
    let r = model.complete(&prompt, &GenerationParams::default()).expect("completion");
    println!("{:?} after {} retries, {:?} tokens, {:?}", r.text, r.retries, r.token_usage, r.latency);
}
