//! In-process stand-in for the E-utilities service.
//!
//! [`FixtureEutils`] answers esearch/efetch URLs from a fixed article set,
//! either directly as a [`Transport`] or over loopback HTTP via
//! [`FixtureEutils::serve`].

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use quick_xml::escape::escape;
use serde::{Deserialize, Serialize};
use url::Url;

use super::client::{HttpResponse, Transport, TransportError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureArticle {
    pub pmid: String,
    pub journal: String,
    pub title: String,
    /// (label, text) sections; empty means no `<Abstract>` element.
    pub sections: Vec<(Option<String>, String)>,
    pub year: i32,
}

impl FixtureArticle {
    pub fn new(pmid: &str, journal: &str, year: i32, abstract_text: &str) -> Self {
        FixtureArticle {
            pmid: pmid.into(),
            journal: journal.into(),
            title: format!("Article {pmid}"),
            sections: vec![(None, abstract_text.into())],
            year,
        }
    }

    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        out.push_str("<PubmedArticle><MedlineCitation Status=\"MEDLINE\" Owner=\"NLM\">");
        out.push_str(&format!(
            "<PMID Version=\"1\">{}</PMID>",
            escape(&self.pmid)
        ));
        out.push_str(
            "<Article PubModel=\"Print\"><Journal><JournalIssue CitedMedium=\"Internet\">",
        );
        out.push_str(&format!(
            "<PubDate><Year>{}</Year></PubDate></JournalIssue>",
            self.year
        ));
        out.push_str(&format!(
            "<Title>{}</Title></Journal>",
            escape(&self.journal)
        ));
        out.push_str(&format!(
            "<ArticleTitle>{}</ArticleTitle>",
            escape(&self.title)
        ));
        if !self.sections.is_empty() {
            out.push_str("<Abstract>");
            for (label, text) in &self.sections {
                match label {
                    Some(l) => out.push_str(&format!("<AbstractText Label=\"{}\">", escape(l))),
                    None => out.push_str("<AbstractText>"),
                }
                out.push_str(&escape(text));
                out.push_str("</AbstractText>");
            }
            out.push_str("</Abstract>");
        }
        out.push_str("</Article></MedlineCitation></PubmedArticle>\n");
        out
    }
}

/// Fixture service state. Cloning shares the article set and request log.
#[derive(Debug, Clone, Default)]
pub struct FixtureEutils {
    articles: Arc<BTreeMap<String, FixtureArticle>>,
    by_journal: Arc<BTreeMap<String, Vec<String>>>,
    requests: Arc<Mutex<Vec<String>>>,
    injected: Arc<Mutex<VecDeque<u16>>>,
}

fn journal_key(name: &str) -> String {
    crate::partition::normalize_journal(name)
}

impl FixtureEutils {
    pub fn new(articles: Vec<FixtureArticle>) -> Self {
        let mut by_journal: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut map = BTreeMap::new();
        for a in articles {
            by_journal
                .entry(journal_key(&a.journal))
                .or_default()
                .push(a.pmid.clone());
            map.insert(a.pmid.clone(), a);
        }
        FixtureEutils {
            articles: Arc::new(map),
            by_journal: Arc::new(by_journal),
            ..Default::default()
        }
    }

    /// Loads articles from a JSON array file.
    pub fn from_json(json: &str) -> serde_json::Result<Self> {
        Ok(Self::new(serde_json::from_str(json)?))
    }

    /// Queues statuses returned (with empty bodies) before normal service resumes.
    pub fn inject_statuses(&self, statuses: &[u16]) {
        self.injected.lock().unwrap().extend(statuses);
    }

    pub fn request_log(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    fn esearch(&self, params: &BTreeMap<String, String>) -> HttpResponse {
        let term = params.get("term").cloned().unwrap_or_default();
        let journal = term.split('"').nth(1).unwrap_or_default();
        let ids = self
            .by_journal
            .get(&journal_key(journal))
            .cloned()
            .unwrap_or_default();
        let start: usize = params
            .get("retstart")
            .and_then(|s| s.parse().ok())
            .unwrap_or(0);
        let max: usize = params
            .get("retmax")
            .and_then(|s| s.parse().ok())
            .unwrap_or(20);
        let page: Vec<&String> = ids.iter().skip(start).take(max).collect();
        let mut body = format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n<eSearchResult><Count>{}</Count><RetMax>{}</RetMax><RetStart>{}</RetStart><IdList>",
            ids.len(),
            page.len(),
            start
        );
        for id in page {
            body.push_str(&format!("<Id>{id}</Id>"));
        }
        body.push_str("</IdList></eSearchResult>\n");
        HttpResponse {
            status: 200,
            body: body.into_bytes(),
        }
    }

    fn efetch(&self, params: &BTreeMap<String, String>) -> HttpResponse {
        let mut body = String::from("<?xml version=\"1.0\" ?>\n<PubmedArticleSet>\n");
        for id in params
            .get("id")
            .map(String::as_str)
            .unwrap_or("")
            .split(',')
        {
            if let Some(a) = self.articles.get(id.trim()) {
                body.push_str(&a.to_xml());
            }
        }
        body.push_str("</PubmedArticleSet>\n");
        HttpResponse {
            status: 200,
            body: body.into_bytes(),
        }
    }

    /// Answers a full request URL.
    pub fn respond(&self, url: &str) -> HttpResponse {
        self.requests.lock().unwrap().push(url.to_string());
        if let Some(status) = self.injected.lock().unwrap().pop_front() {
            return HttpResponse {
                status,
                body: Vec::new(),
            };
        }
        let Ok(parsed) = Url::parse(url) else {
            return HttpResponse {
                status: 400,
                body: b"bad url".to_vec(),
            };
        };
        let params: BTreeMap<String, String> = parsed.query_pairs().into_owned().collect();
        let path = parsed.path();
        if path.ends_with("/esearch.fcgi") {
            self.esearch(&params)
        } else if path.ends_with("/efetch.fcgi") {
            self.efetch(&params)
        } else {
            HttpResponse {
                status: 404,
                body: Vec::new(),
            }
        }
    }

    /// Serves over loopback HTTP/1.1 until the handle is dropped.
    pub fn serve(&self) -> std::io::Result<FixtureServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let service = self.clone();
        let stop_flag = stop.clone();
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(stream) = stream {
                    let _ = service.handle_connection(stream, addr);
                }
            }
        });
        Ok(FixtureServer {
            addr,
            stop,
            thread: Some(thread),
        })
    }

    fn handle_connection(&self, stream: TcpStream, addr: SocketAddr) -> std::io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut request_line = String::new();
        reader.read_line(&mut request_line)?;
        loop {
            let mut header = String::new();
            if reader.read_line(&mut header)? == 0 || header == "\r\n" || header == "\n" {
                break;
            }
        }
        let target = request_line.split_whitespace().nth(1).unwrap_or("/");
        let resp = self.respond(&format!("http://{addr}{target}"));
        let reason = match resp.status {
            200 => "OK",
            429 => "Too Many Requests",
            404 => "Not Found",
            _ => "Status",
        };
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {} {reason}\r\nContent-Type: text/xml\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
            resp.status,
            resp.body.len()
        )?;
        stream.write_all(&resp.body)?;
        stream.flush()
    }
}

impl Transport for FixtureEutils {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        Ok(self.respond(url))
    }
}

/// Running loopback server; stops on drop.
pub struct FixtureServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl FixtureServer {
    /// Base URL to hand to the client (`http://127.0.0.1:<port>/entrez/eutils`).
    pub fn base_url(&self) -> String {
        format!("http://{}/entrez/eutils", self.addr)
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // unblock accept()
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pubmed::xml::{parse_esearch, parse_pubmed_xml};

    fn service() -> FixtureEutils {
        FixtureEutils::new(vec![
            FixtureArticle::new("1", "Gut", 2015, "Fibre lowers colitis risk."),
            FixtureArticle::new("2", "Gut", 2016, "Probiotics & <b> markup survive."),
            FixtureArticle::new("3", "Blood", 2017, "Other journal."),
        ])
    }

    #[test]
    fn esearch_pages_by_journal() {
        let s = service();
        let r = s.respond(
            "http://x/esearch.fcgi?db=pubmed&term=%22gut%22%5BJournal%5D&retstart=1&retmax=5",
        );
        let parsed = parse_esearch(&r.body).unwrap();
        assert_eq!(parsed.total_count, 2);
        assert_eq!(parsed.ids, ["2"]);
    }

    #[test]
    fn efetch_roundtrips_text() {
        let s = service();
        let r = s.respond("http://x/efetch.fcgi?db=pubmed&id=1,2");
        let parsed = parse_pubmed_xml(&r.body).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(
            parsed.records[1].abstract_text,
            "Probiotics & <b> markup survive."
        );
    }

    #[test]
    fn injected_status_then_normal() {
        let s = service();
        s.inject_statuses(&[429]);
        assert_eq!(s.respond("http://x/efetch.fcgi?id=1").status, 429);
        assert_eq!(s.respond("http://x/efetch.fcgi?id=1").status, 200);
        assert_eq!(s.request_count(), 2);
    }
}
