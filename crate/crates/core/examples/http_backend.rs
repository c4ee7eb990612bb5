// Reranking through the HTTP backend. A toy model server runs in-process:
// it prefers the passage sharing more words with the query.
//
// Against a real server, point `HttpBackendConfig::new` at its base URL.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;

use prp::backend::{Backend, HttpBackend, HttpBackendConfig};
use prp::comparator::{ComparatorConfig, PairwiseComparator};
use prp::model::{Passage, Query};
use prp::strategy::rank_heapsort;
use prp::Mode;

fn overlap(query: &str, passage: &str) -> usize {
    let words = |s: &str| -> std::collections::HashSet<String> {
        s.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
    };
    words(query).intersection(&words(passage)).count()
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> &'a str {
    let from = text.find(start).map_or(0, |i| i + start.len());
    let to = text[from..].find(end).map_or(text.len(), |i| from + i);
    &text[from..to]
}

/// Answers the pairwise prompt by word overlap, in either protocol.
fn answer(path: &str, body: &serde_json::Value) -> serde_json::Value {
    let prompt = body["prompt"].as_str().unwrap_or_default();
    let query = between(prompt, "Given a query \"", "\", which");
    let a = overlap(query, between(prompt, "Passage A: ", "\n\nPassage B:"));
    let b = overlap(query, between(prompt, "Passage B: ", "\n\nOutput"));
    let (la, lb) = match a.cmp(&b) {
        std::cmp::Ordering::Greater => (-0.1, -2.5),
        std::cmp::Ordering::Less => (-2.5, -0.1),
        std::cmp::Ordering::Equal => (-0.7, -0.7),
    };
    if path == "/score" {
        serde_json::json!({ "scores": [la, lb] })
    } else {
        let text = if la > lb { "Passage A" } else if lb > la { "Passage B" } else { "Both seem relevant" };
        serde_json::json!({ "text": text })
    }
}

/// Serves requests until the listener is dropped with the process.
fn serve(listener: TcpListener) {
    for stream in listener.incoming() {
        let Ok(mut stream) = stream else { continue };
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).ok();
            let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
            let mut length = 0;
            loop {
                let mut header = String::new();
                if reader.read_line(&mut header).unwrap_or(0) == 0 || header == "\r\n" {
                    break;
                }
                if let Some((name, value)) = header.split_once(':') {
                    if name.eq_ignore_ascii_case("content-length") {
                        length = value.trim().parse().unwrap_or(0);
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).ok();
            let json = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
            let reply = answer(&path, &json).to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        });
    }
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let endpoint = format!("http://{}", listener.local_addr()?);
    std::thread::spawn(move || serve(listener));

    let query = Query::new("q", "when did the apollo 11 mission land on the moon")?;
    let candidates = vec![
        Passage::new("p1", "The Saturn V rocket was developed at Marshall Space Flight Center.")?,
        Passage::new("p2", "Apollo 11 landed on the moon on July 20, 1969.")?,
        Passage::new("p3", "The Apollo program included eleven crewed missions.")?,
    ];

    let backend: Arc<dyn Backend> = Arc::new(HttpBackend::new(HttpBackendConfig::new(endpoint)));
    for mode in [Mode::Scoring, Mode::Generation] {
        let config = ComparatorConfig {
            mode,
            ..ComparatorConfig::default()
        };
        let judge = PairwiseComparator::new(backend.clone(), config)?;
        let (ranking, counter) = rank_heapsort(&query, &candidates, &judge)?;
        println!("{:<10} {}  ({} requests)", mode.as_str(), ranking.ordered_passage_ids.join(" > "), counter.unit_calls);
        assert_eq!(ranking.ordered_passage_ids[0], "p2");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
