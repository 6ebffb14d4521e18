use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::Arc;

use lexverify_gateway::prompts::{block, GEN_QUERIES};
use lexverify_gateway::{
    filter_useful, gen_queries, AssistError, BaseArticle, CompletionParams, CompletionPort, HttpConfig, HttpPort, LlmFilter,
    LlmQueries, MockPort, PortError, ScriptedPort,
};
use lexverify_text::retrieval::IdentityReranker;
use lexverify_text::{expand_article, read_corpus_jsonl, Doc, HashEmbedder, Index, Ports, DEFAULT_ALPHA};

fn root(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn two_clause() -> BaseArticle {
    serde_json::from_str(&std::fs::read_to_string(root("gateway/two_clause_article.json")).unwrap()).unwrap()
}

fn params() -> CompletionParams {
    CompletionParams::default()
}

#[test]
fn mock_queries_for_a_two_clause_article() {
    let expected: Vec<String> = serde_json::from_str(&std::fs::read_to_string(root("gateway/two_clause_queries.json")).unwrap()).unwrap();
    assert_eq!(gen_queries(&two_clause(), &MockPort, &params()).unwrap(), expected);
}

#[test]
fn empty_article_yields_empty_generation_after_a_retry() {
    let empty = BaseArticle { doc_id: "x".into(), ..Default::default() };
    assert_eq!(gen_queries(&empty, &MockPort, &params()), Err(AssistError::EmptyGeneration("x".into())));
    let port = ScriptedPort::new(["[]", "no list here"]);
    assert!(matches!(gen_queries(&two_clause(), &port, &params()), Err(AssistError::EmptyGeneration(_))));
    assert_eq!(port.prompts().len(), 2);
    let port = ScriptedPort::new(["[]", "[\"capital plan\"]"]);
    assert_eq!(gen_queries(&two_clause(), &port, &params()).unwrap(), vec!["capital plan"]);
}

#[test]
fn duplicate_generations_are_removed() {
    let port = ScriptedPort::new([r#"Sure: ["capital plan", "capital plan", " fines ", "fines", ""]"#]);
    assert_eq!(gen_queries(&two_clause(), &port, &params()).unwrap(), vec!["capital plan", "fines"]);
}

fn docs() -> Vec<Doc> {
    vec![
        Doc::new("d1", "Restriction on the purchase of assets by insurers."),
        Doc::new("d2", "Customer identity verification and transaction records."),
        Doc::new("d3", "Deadline for an improvement plan."),
    ]
}

#[test]
fn mock_filter_keeps_shared_vocabulary() {
    let kept = filter_useful(&docs(), &two_clause(), &MockPort, &params()).unwrap();
    assert_eq!(kept.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(), vec!["d1", "d3"]);
    let relevant: Vec<Doc> = docs().into_iter().filter(|d| d.doc_id != "d2").collect();
    assert_eq!(filter_useful(&relevant, &two_clause(), &MockPort, &params()).unwrap(), relevant);
}

#[test]
fn invented_ids_are_ignored() {
    let port = ScriptedPort::new([r#"["ghost", "d3", "d1"]"#]);
    let kept = filter_useful(&docs(), &two_clause(), &port, &params()).unwrap();
    assert_eq!(kept.iter().map(|d| d.doc_id.as_str()).collect::<Vec<_>>(), vec!["d1", "d3"]);
}

#[test]
fn mock_is_a_function_of_prompt_and_seed() {
    let a = MockPort.complete("free text", &CompletionParams { seed: Some(1), ..params() }).unwrap();
    let b = MockPort.complete("free text", &CompletionParams { seed: Some(1), ..params() }).unwrap();
    let c = MockPort.complete("free text", &CompletionParams { seed: Some(2), ..params() }).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    // FNV-1a of the prompt bytes then the little-endian seed, computed outside Rust.
    assert_eq!(a, "mock-837a000dd4ca60f3");
}

#[test]
fn mock_expansion_stays_inside_the_corpus() {
    let file = std::fs::File::open(root("retrieval/corpus.jsonl")).unwrap();
    let corpus = read_corpus_jsonl(BufReader::new(file)).unwrap();
    let index = Index::build(corpus, Arc::new(HashEmbedder::default())).unwrap();
    let port: Arc<dyn CompletionPort> = Arc::new(MockPort);
    let queries = LlmQueries { port: port.clone(), params: params() };
    let filter = LlmFilter { port, params: params() };
    let ports = Ports { query_gen: &queries, reranker: &IdentityReranker, filter: &filter };
    let base = index.doc("ins-143-6").unwrap().clone();
    let s = expand_article(&base, &index, &ports, DEFAULT_ALPHA, 5).unwrap();
    assert!(!s.docs.is_empty());
    assert!(s.docs.iter().all(|d| index.doc(&d.doc_id) == Some(d)));
    assert_eq!(s, expand_article(&base, &index, &ports, DEFAULT_ALPHA, 5).unwrap());
    assert_eq!(s.queries[0].query, "Insurance Act Article 143-6");
}

/// Serves one canned HTTP response and hands back the raw request.
fn one_shot_server(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let response = format!("HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len());
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut head = String::new();
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            head.push_str(&line);
            if line == "\r\n" {
                break;
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        reader.get_mut().write_all(response.as_bytes()).unwrap();
        head + &String::from_utf8(body).unwrap()
    });
    (url, handle)
}

#[test]
fn http_port_speaks_chat_completions() {
    let (url, server) = one_shot_server("200 OK", r#"{"choices": [{"message": {"role": "assistant", "content": "[\"q\"]"}}]}"#);
    let mut cfg = HttpConfig::new(&url, "test-model");
    cfg.api_key_env = "LEXV_TEST_HTTP_PORT_KEY".into();
    std::env::set_var("LEXV_TEST_HTTP_PORT_KEY", "secret-token");
    let port = HttpPort::new(cfg);
    let prompt = GEN_QUERIES.render(&[("article", "{}")]);
    assert_eq!(port.complete(&prompt, &CompletionParams { seed: Some(9), ..params() }).unwrap(), "[\"q\"]");
    let request = server.join().unwrap();
    assert!(request.starts_with("POST /v1/chat/completions"));
    assert!(request.to_ascii_lowercase().contains("authorization: bearer secret-token"));
    let body: serde_json::Value = serde_json::from_str(&request[request.find("\r\n\r\n").unwrap() + 4..]).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["seed"], 9);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(block(body["messages"][0]["content"].as_str().unwrap(), "article"), Some("{}"));
}

#[test]
fn http_errors_surface() {
    let (url, server) = one_shot_server("503 Service Unavailable", r#"{"error": "overloaded"}"#);
    let port = HttpPort::new(HttpConfig::new(&url, "m"));
    match port.complete("hi", &params()) {
        Err(PortError::Http { status: 503, body }) => assert!(body.contains("overloaded")),
        other => panic!("unexpected {other:?}"),
    }
    server.join().unwrap();
    let port = HttpPort::new(HttpConfig { timeout_ms: 2_000, ..HttpConfig::new("http://127.0.0.1:9/none", "m") });
    assert!(matches!(port.complete("hi", &params()), Err(PortError::Transport(_))));
}
