//! Local HTTP servers for exercising the connectors without network access.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub method: String,
    pub path: String,
    pub params: Vec<(String, String)>,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Request {
    pub fn param(&self, name: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: String,
    pub body: String,
}

impl Response {
    pub fn ok(content_type: &str, body: impl Into<String>) -> Self {
        Response {
            status: 200,
            content_type: content_type.into(),
            body: body.into(),
        }
    }

    pub fn json(v: &Value) -> Self {
        Response::ok("application/json", v.to_string())
    }

    pub fn status(status: u16, body: impl Into<String>) -> Self {
        Response {
            status,
            content_type: "text/plain".into(),
            body: body.into(),
        }
    }
}

type Handler = dyn Fn(&Request) -> Response + Send + Sync;

/// A one-thread-per-connection HTTP/1.1 server on 127.0.0.1. Stops on drop.
pub struct MockServer {
    addr: String,
    hits: Arc<AtomicUsize>,
    log: Arc<Mutex<Vec<Request>>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(handler: impl Fn(&Request) -> Response + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let addr = listener.local_addr().expect("local addr").to_string();
        let handler: Arc<Handler> = Arc::new(handler);
        let hits = Arc::new(AtomicUsize::new(0));
        let log = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let (h, l, s) = (hits.clone(), log.clone(), stop.clone());
        let thread = thread::spawn(move || {
            for stream in listener.incoming() {
                if s.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let (handler, h, l) = (handler.clone(), h.clone(), l.clone());
                thread::spawn(move || serve(stream, &*handler, &h, &l));
            }
        });
        MockServer {
            addr,
            hits,
            log,
            stop,
            thread: Some(thread),
        }
    }

    /// Base URL without a trailing slash.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<Request> {
        self.log.lock().expect("log lock").clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(&self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn serve(stream: TcpStream, handler: &Handler, hits: &AtomicUsize, log: &Mutex<Vec<Request>>) {
    let mut reader = BufReader::new(match stream.try_clone() {
        Ok(s) => s,
        Err(_) => return,
    });
    let mut stream = stream;
    loop {
        let Some(req) = read_request(&mut reader) else {
            return;
        };
        hits.fetch_add(1, Ordering::SeqCst);
        log.lock().expect("log lock").push(req.clone());
        let resp = handler(&req);
        let head = format!(
            "HTTP/1.1 {} X\r\ncontent-type: {}\r\ncontent-length: {}\r\n\r\n",
            resp.status,
            resp.content_type,
            resp.body.len()
        );
        if stream.write_all(head.as_bytes()).is_err()
            || stream.write_all(resp.body.as_bytes()).is_err()
        {
            return;
        }
        let _ = stream.flush();
    }
}

fn read_request(reader: &mut BufReader<TcpStream>) -> Option<Request> {
    let mut line = String::new();
    if reader.read_line(&mut line).ok()? == 0 {
        return None;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let target = parts.next()?.to_string();
    let mut headers = Vec::new();
    let mut length = 0usize;
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            let (k, v) = (k.trim().to_ascii_lowercase(), v.trim().to_string());
            if k == "content-length" {
                length = v.parse().unwrap_or(0);
            }
            headers.push((k, v));
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    let body = String::from_utf8_lossy(&body).into_owned();
    let (path, query) = target.split_once('?').unwrap_or((&target, ""));
    let mut params: Vec<(String, String)> = url::form_urlencoded::parse(query.as_bytes())
        .into_owned()
        .collect();
    let form = headers
        .iter()
        .any(|(k, v)| k == "content-type" && v.starts_with("application/x-www-form-urlencoded"));
    if form {
        params.extend(url::form_urlencoded::parse(body.as_bytes()).into_owned());
    }
    Some(Request {
        method,
        path: path.to_string(),
        params,
        headers,
        body,
    })
}

/// A SPARQL protocol endpoint over an in-memory store loaded from Turtle.
/// CONSTRUCT results are returned as N-Triples.
pub fn sparql_endpoint(turtle: &str) -> MockServer {
    use oxigraph::io::RdfFormat;
    use oxigraph::sparql::QueryResults;
    use oxigraph::store::Store;

    let store = Store::new().expect("in-memory store");
    store
        .load_from_reader(RdfFormat::Turtle, turtle.as_bytes())
        .expect("fixture parses");
    MockServer::start(move |req| {
        let Some(q) = req.param("query") else {
            return Response::status(400, "missing query");
        };
        match store.query(q) {
            Ok(QueryResults::Graph(triples)) => {
                let mut out = String::new();
                for t in triples {
                    match t {
                        Ok(t) => {
                            out.push_str(&t.to_string());
                            out.push_str(" .\n");
                        }
                        Err(e) => return Response::status(500, e.to_string()),
                    }
                }
                Response::ok("application/n-triples", out)
            }
            Ok(QueryResults::Boolean(b)) => Response::json(&json!({ "boolean": b })),
            Ok(QueryResults::Solutions(_)) => {
                Response::status(400, "only CONSTRUCT and ASK are served")
            }
            Err(e) => Response::status(400, e.to_string()),
        }
    })
}

/// A MediaWiki Action API stand-in: `list=search` pages through the ranked ids
/// registered for a search string; `wbgetentities` returns the given entities.
pub fn wikidata_api(search: BTreeMap<String, Vec<String>>, entities: Vec<Value>) -> MockServer {
    let by_id: BTreeMap<String, Value> = entities
        .into_iter()
        .filter_map(|e| Some((e.get("id")?.as_str()?.to_string(), e)))
        .collect();
    MockServer::start(move |req| match req.param("action") {
        Some("query") if req.param("list") == Some("search") => {
            let term = req.param("srsearch").unwrap_or("");
            let offset: usize = req
                .param("sroffset")
                .and_then(|v| v.parse().ok())
                .unwrap_or(0);
            let limit: usize = req
                .param("srlimit")
                .and_then(|v| v.parse().ok())
                .unwrap_or(10);
            let all = search.get(term).cloned().unwrap_or_default();
            let page: Vec<Value> = all
                .iter()
                .skip(offset)
                .take(limit)
                .map(|id| json!({ "ns": 0, "title": id }))
                .collect();
            let mut body = json!({ "batchcomplete": true, "query": { "search": page } });
            if offset + limit < all.len() {
                body["continue"] = json!({ "sroffset": offset + limit, "continue": "-||" });
            }
            Response::json(&body)
        }
        Some("wbgetentities") => {
            let mut out = serde_json::Map::new();
            for id in req
                .param("ids")
                .unwrap_or("")
                .split('|')
                .filter(|s| !s.is_empty())
            {
                let v = by_id
                    .get(id)
                    .cloned()
                    .unwrap_or_else(|| json!({ "id": id, "missing": "" }));
                out.insert(id.to_string(), v);
            }
            Response::json(&json!({ "entities": out, "success": 1 }))
        }
        _ => Response::json(
            &json!({ "error": { "code": "badvalue", "info": "unsupported action" } }),
        ),
    })
}

/// A minimal entity object in `wbgetentities` shape.
pub fn entity(
    id: &str,
    labels: &[(&str, &str)],
    descriptions: &[(&str, &str)],
    p31: &[&str],
    p279: &[&str],
) -> Value {
    let lang_map = |pairs: &[(&str, &str)]| -> Value {
        pairs
            .iter()
            .map(|(l, v)| (l.to_string(), json!({ "language": l, "value": v })))
            .collect::<serde_json::Map<_, _>>()
            .into()
    };
    let claims = |ids: &[&str]| -> Value {
        ids.iter()
            .map(|q| json!({ "mainsnak": { "snaktype": "value", "datavalue": { "type": "wikibase-entityid", "value": { "entity-type": "item", "id": q } } } }))
            .collect::<Vec<_>>()
            .into()
    };
    json!({
        "id": id,
        "labels": lang_map(labels),
        "descriptions": lang_map(descriptions),
        "aliases": {},
        "claims": { "P31": claims(p31), "P279": claims(p279) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(url: &str) -> (u16, String) {
        let rest = url.strip_prefix("http://").unwrap();
        let (host, path) = rest
            .split_once('/')
            .map(|(h, p)| (h, format!("/{p}")))
            .unwrap_or((rest, "/".into()));
        let mut s = TcpStream::connect(host).unwrap();
        write!(
            s,
            "GET {path} HTTP/1.1\r\nhost: {host}\r\nconnection: close\r\n\r\n"
        )
        .unwrap();
        let mut r = BufReader::new(s);
        let mut status = String::new();
        r.read_line(&mut status).unwrap();
        let mut len = 0;
        loop {
            let mut h = String::new();
            r.read_line(&mut h).unwrap();
            if h.trim().is_empty() {
                break;
            }
            if let Some(v) = h.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
        }
        let mut body = vec![0; len];
        r.read_exact(&mut body).unwrap();
        (
            status.split_whitespace().nth(1).unwrap().parse().unwrap(),
            String::from_utf8(body).unwrap(),
        )
    }

    #[test]
    fn sparql_construct() {
        let server =
            sparql_endpoint("<http://a> <http://p> \"x\"@en . <http://b> <http://p> \"y\"@nl .");
        let q =
            "CONSTRUCT { ?s <http://p> ?o } WHERE { ?s <http://p> ?o FILTER(lang(?o) = \"en\") }";
        let url = format!(
            "{}/sparql?{}",
            server.url(),
            url::form_urlencoded::Serializer::new(String::new())
                .append_pair("query", q)
                .finish()
        );
        let (status, body) = get(&url);
        assert_eq!(status, 200);
        assert_eq!(body, "<http://a> <http://p> \"x\"@en .\n");
        assert_eq!(server.hits(), 1);
    }

    #[test]
    fn wikidata_paging() {
        let ids: Vec<String> = (1..=5).map(|i| format!("Q{i}")).collect();
        let server = wikidata_api(
            [("t".to_string(), ids)].into(),
            vec![entity("Q1", &[("en", "one")], &[], &[], &[])],
        );
        let (_, body) = get(&format!(
            "{}/w/api.php?action=query&list=search&srsearch=t&srlimit=2&sroffset=2",
            server.url()
        ));
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["query"]["search"][0]["title"], "Q3");
        assert_eq!(v["continue"]["sroffset"], 4);
        let (_, body) = get(&format!(
            "{}/w/api.php?action=wbgetentities&ids=Q1%7CQ9",
            server.url()
        ));
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v["entities"]["Q1"]["labels"]["en"]["value"], "one");
        assert!(v["entities"]["Q9"].get("missing").is_some());
    }
}
