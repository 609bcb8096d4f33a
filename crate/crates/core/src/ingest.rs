//! Phase 1 (specification discovery and indexing) and Phase 2 (subgraph
//! extraction with RFC 2119 invariant tagging).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::backend::{complete_with_retry, Backend, BackendError, PromptSection, ReasoningRequest};
use crate::model::{
    DocType, FrontierEntry, FrontierStatus, InvariantAnnotation, ModalStrength, Phase,
    SpecDocument, SpecIndex, Subgraph, Transition,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("discovery produced no documents: all seeds unreachable or filtered")]
    DiscoveryEmpty,
    #[error("subgraph extraction failed: {0}")]
    Extraction(#[from] BackendError),
    #[error("extracted subgraph invalid: {0}")]
    InvalidSubgraph(String),
}

/// Fetch abstraction so the crawler can run against local fixture sites and
/// live HTTP alike.
pub trait Fetcher {
    fn fetch(&self, url: &Url) -> Result<String, String>;
}

/// Default fetcher: `file://` URLs read from disk, `http(s)://` via HTTP GET.
pub struct DefaultFetcher {
    client: reqwest::blocking::Client,
}

impl DefaultFetcher {
    pub fn new() -> Self {
        DefaultFetcher {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Default for DefaultFetcher {
    fn default() -> Self {
        Self::new()
    }
}

impl Fetcher for DefaultFetcher {
    fn fetch(&self, url: &Url) -> Result<String, String> {
        match url.scheme() {
            "file" => {
                let path = url
                    .to_file_path()
                    .map_err(|_| format!("invalid file url: {url}"))?;
                std::fs::read_to_string(&path).map_err(|e| format!("read {}: {e}", path.display()))
            }
            "http" | "https" => self
                .client
                .get(url.clone())
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.text())
                .map_err(|e| e.to_string()),
            other => Err(format!("unsupported scheme: {other}")),
        }
    }
}

/// Crawl policy: host allowlist, depth bound, and per-host politeness delay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrawlConfig {
    /// Hosts allowed by the domain filter. `file://` URLs have the empty host.
    pub allowed_hosts: Vec<String>,
    pub max_depth: u32,
    #[serde(default)]
    pub politeness_delay_ms: u64,
}

fn host_of(url: &Url) -> String {
    url.host_str().unwrap_or("").to_string()
}

fn normalize(mut url: Url) -> Url {
    url.set_fragment(None);
    url
}

/// Extract raw link targets from markdown and HTML content.
fn extract_links(content: &str) -> Vec<String> {
    let md = regex::Regex::new(r"\[[^\]]*\]\(([^)\s]+)\)").unwrap();
    let href = regex::Regex::new(r#"href\s*=\s*["']([^"']+)["']"#).unwrap();
    let mut links = Vec::new();
    for cap in md.captures_iter(content) {
        links.push(cap[1].to_string());
    }
    for cap in href.captures_iter(content) {
        links.push(cap[1].to_string());
    }
    links
        .into_iter()
        .filter(|l| !l.starts_with('#') && !l.starts_with("mailto:"))
        .collect()
}

fn extract_title(content: &str, url: &Url) -> String {
    for line in content.lines() {
        if let Some(rest) = line.trim().strip_prefix("# ") {
            return rest.trim().to_string();
        }
    }
    let html_title = regex::Regex::new(r"(?is)<title>(.*?)</title>").unwrap();
    if let Some(cap) = html_title.captures(content) {
        return cap[1].trim().to_string();
    }
    url.path_segments()
        .and_then(|mut s| s.next_back())
        .filter(|s| !s.is_empty())
        .unwrap_or("untitled")
        .to_string()
}

fn classify_doc(url: &Url, title: &str) -> DocType {
    let hay = format!("{} {}", url.path().to_lowercase(), title.to_lowercase());
    if hay.contains("eip") {
        DocType::Eip
    } else if hay.contains("scope") {
        DocType::Scope
    } else if hay.contains("spec") {
        DocType::Spec
    } else {
        DocType::Other
    }
}

/// Crawl from the seed URLs, following links breadth-first within the host
/// allowlist up to `max_depth`. Every considered URI is logged once in the
/// frontier log with its disposition. Unreachable seeds are recorded and the
/// crawl continues; a crawl in which no document could be indexed fails with
/// [`IngestError::DiscoveryEmpty`].
pub fn discover(
    seed_urls: &[String],
    config: &CrawlConfig,
    fetcher: &dyn Fetcher,
) -> Result<SpecIndex, IngestError> {
    let allowed: BTreeSet<&str> = config.allowed_hosts.iter().map(|h| h.as_str()).collect();
    let mut queue: VecDeque<(Url, u32)> = VecDeque::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut log: Vec<FrontierEntry> = Vec::new();
    let mut documents: Vec<SpecDocument> = Vec::new();
    let mut last_fetch: BTreeMap<String, Instant> = BTreeMap::new();

    for seed in seed_urls {
        match Url::parse(seed) {
            Ok(u) => {
                let u = normalize(u);
                if seen.insert(u.to_string()) {
                    queue.push_back((u, 0));
                }
            }
            Err(e) => log.push(FrontierEntry {
                url: seed.clone(),
                status: FrontierStatus::Failed,
                depth: 0,
                detail: Some(format!("unparseable seed: {e}")),
            }),
        }
    }

    while let Some((url, depth)) = queue.pop_front() {
        let host = host_of(&url);
        if !allowed.contains(host.as_str()) {
            log.push(FrontierEntry {
                url: url.to_string(),
                status: FrontierStatus::Filtered,
                depth,
                detail: Some(format!("host {host:?} not in domain filter")),
            });
            continue;
        }
        // Single-host politeness: wait out the configured delay since the
        // last fetch to the same host. File URLs are exempt.
        if config.politeness_delay_ms > 0 && url.scheme() != "file" {
            if let Some(prev) = last_fetch.get(&host) {
                let min_gap = Duration::from_millis(config.politeness_delay_ms);
                let elapsed = prev.elapsed();
                if elapsed < min_gap {
                    std::thread::sleep(min_gap - elapsed);
                }
            }
            last_fetch.insert(host.clone(), Instant::now());
        }
        let content = match fetcher.fetch(&url) {
            Ok(c) => c,
            Err(e) => {
                log.push(FrontierEntry {
                    url: url.to_string(),
                    status: FrontierStatus::Failed,
                    depth,
                    detail: Some(e),
                });
                continue;
            }
        };
        let title = extract_title(&content, &url);
        let doc_type = classify_doc(&url, &title);
        let id = format!("doc-{:04}", documents.len() + 1);
        log.push(FrontierEntry {
            url: url.to_string(),
            status: FrontierStatus::Indexed,
            depth,
            detail: None,
        });
        if depth < config.max_depth {
            for raw in extract_links(&content) {
                if let Ok(child) = url.join(&raw) {
                    let child = normalize(child);
                    if seen.insert(child.to_string()) {
                        queue.push_back((child, depth + 1));
                    }
                }
            }
        }
        documents.push(SpecDocument {
            id,
            url: url.to_string(),
            title,
            doc_type,
            content,
        });
    }

    if documents.is_empty() {
        return Err(IngestError::DiscoveryEmpty);
    }
    Ok(SpecIndex {
        documents,
        crawl_frontier_log: log,
    })
}

/// Modal-verb matching policy. Uppercase-only is the RFC 2119 convention and
/// the default; the switch admits lowercase normative verbs for documents
/// that do not follow the convention.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TaggingConfig {
    pub uppercase_only: bool,
}

impl Default for TaggingConfig {
    fn default() -> Self {
        TaggingConfig {
            uppercase_only: true,
        }
    }
}

/// Normative phrases in match-priority order: negated forms before their
/// prefixes so `MUST NOT` never matches as `MUST`. `SHALL NOT` carries the
/// same strength as `MUST NOT`.
const MODAL_PHRASES: &[(&str, ModalStrength)] = &[
    ("MUST NOT", ModalStrength::MustNot),
    ("SHALL NOT", ModalStrength::MustNot),
    ("SHOULD NOT", ModalStrength::ShouldNot),
    ("MUST", ModalStrength::Must),
    ("SHALL", ModalStrength::Shall),
    ("SHOULD", ModalStrength::Should),
    ("MAY", ModalStrength::May),
];

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Find the first normative modal phrase in a sentence, if any.
fn first_modal(sentence: &str, config: &TaggingConfig) -> Option<ModalStrength> {
    let haystack: Vec<char> = sentence.chars().collect();
    for start in 0..haystack.len() {
        if start > 0 && is_word_char(haystack[start - 1]) {
            continue;
        }
        for (phrase, strength) in MODAL_PHRASES {
            let pchars: Vec<char> = phrase.chars().collect();
            if start + pchars.len() > haystack.len() {
                continue;
            }
            let window = &haystack[start..start + pchars.len()];
            let matches = if config.uppercase_only {
                window.iter().copied().eq(pchars.iter().copied())
            } else {
                window
                    .iter()
                    .map(|c| c.to_ascii_uppercase())
                    .eq(pchars.iter().copied())
            };
            if !matches {
                continue;
            }
            let end = start + pchars.len();
            if end < haystack.len() && is_word_char(haystack[end]) {
                continue;
            }
            return Some(*strength);
        }
    }
    None
}

/// A sentence with the markdown section heading it falls under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub section: String,
}

/// Split text into sentences: a boundary is `.`, `?` or `!` followed by
/// whitespace and a capital letter. Markdown headings set the current section
/// and are not themselves sentences. Simplistic by design, so an independent
/// oracle can reproduce it.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let mut section = String::new();
    for block in text.lines() {
        let trimmed = block.trim();
        if let Some(heading) = trimmed.strip_prefix('#') {
            section = heading.trim_start_matches('#').trim().to_string();
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let chars: Vec<char> = trimmed.chars().collect();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let c = chars[i];
            if c == '.' || c == '?' || c == '!' {
                let mut j = i + 1;
                let mut saw_ws = false;
                while j < chars.len() && chars[j].is_whitespace() {
                    saw_ws = true;
                    j += 1;
                }
                if saw_ws && j < chars.len() && chars[j].is_uppercase() {
                    let sentence: String = chars[start..=i].iter().collect();
                    let sentence = sentence.trim().to_string();
                    if !sentence.is_empty() {
                        out.push(Sentence {
                            text: sentence,
                            section: section.clone(),
                        });
                    }
                    start = j;
                    i = j;
                    continue;
                }
            }
            i += 1;
        }
        let tail: String = chars[start..].iter().collect();
        let tail = tail.trim().to_string();
        if !tail.is_empty() {
            out.push(Sentence {
                text: tail,
                section: section.clone(),
            });
        }
    }
    out
}

/// Tag one annotation per sentence containing a normative RFC 2119 modal
/// verb; labels are assigned `INV-001`, `INV-002`, ... in document order.
pub fn tag_invariants(text: &str) -> Vec<InvariantAnnotation> {
    tag_invariants_with(text, &TaggingConfig::default())
}

pub fn tag_invariants_with(text: &str, config: &TaggingConfig) -> Vec<InvariantAnnotation> {
    let mut out = Vec::new();
    for sentence in split_sentences(text) {
        if let Some(strength) = first_modal(&sentence.text, config) {
            out.push(InvariantAnnotation {
                label: format!("INV-{:03}", out.len() + 1),
                modal_strength: strength,
                source_sentence: sentence.text,
                spec_section: sentence.section,
            });
        }
    }
    out
}

/// One subgraph as described by the extraction worker. The pipeline attaches
/// invariant annotations and the source document id itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedSubgraph {
    pub id: String,
    pub states: Vec<String>,
    pub transitions: Vec<Transition>,
    /// Spec sections this subgraph covers; annotations whose source sentences
    /// fall in these sections are attached to the subgraph.
    pub sections: Vec<String>,
    pub dataflow_constraints: Vec<String>,
}

/// Response payload of the subgraph-extraction worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphExtraction {
    pub subgraphs: Vec<ExtractedSubgraph>,
}

pub const SUBGRAPH_EXTRACTOR_ROLE: &str = "subgraph-extractor";

/// Build the Phase 2 extraction request for one document.
pub fn extraction_request(
    doc: &SpecDocument,
    annotations: &[InvariantAnnotation],
    budget_tokens: u64,
) -> ReasoningRequest {
    let rendered: String = annotations
        .iter()
        .map(|a| {
            format!(
                "{} [{}] ({}): {}\n",
                a.label,
                a.modal_strength.phrase(),
                a.spec_section,
                a.source_sentence
            )
        })
        .collect();
    ReasoningRequest {
        phase: Phase::P2,
        role: SUBGRAPH_EXTRACTOR_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Decompose the specification document into program graphs: \
                 states and transitions, the invariant annotations each graph \
                 covers (by section), and data flow constraints.",
            ),
            PromptSection::new("document", &doc.content),
            PromptSection::new("tagged-invariants", rendered),
        ],
        response_schema_id: "subgraph_extraction".into(),
        budget_tokens,
    }
}

/// Phase 2: decompose one document into subgraphs. The worker controls the
/// split; this function tags invariants, attaches each annotation to the
/// subgraphs covering its section, and validates the result.
pub fn extract_subgraphs(
    doc: &SpecDocument,
    backend: &dyn Backend,
    tagging: &TaggingConfig,
    budget_tokens: u64,
) -> Result<Vec<Subgraph>, IngestError> {
    let annotations = tag_invariants_with(&doc.content, tagging);
    let request = extraction_request(doc, &annotations, budget_tokens);
    let response = complete_with_retry(backend, &request)?;
    let extraction: SubgraphExtraction = serde_json::from_value(response.payload)
        .map_err(|e| IngestError::InvalidSubgraph(e.to_string()))?;
    let mut out = Vec::new();
    for ex in extraction.subgraphs {
        let sections: BTreeSet<&str> = ex.sections.iter().map(|s| s.as_str()).collect();
        let attached: Vec<InvariantAnnotation> = annotations
            .iter()
            .filter(|a| sections.contains(a.spec_section.as_str()))
            .cloned()
            .collect();
        let subgraph = Subgraph {
            id: ex.id,
            source_doc: doc.id.clone(),
            states: ex.states,
            transitions: ex.transitions,
            invariant_annotations: attached,
            dataflow_constraints: ex.dataflow_constraints,
        };
        let validation = crate::schema::validate_value(&subgraph, "subgraph")
            .expect("subgraph schema registered");
        if !validation.is_pass() {
            return Err(IngestError::InvalidSubgraph(format!(
                "{}: {:?}",
                subgraph.id, validation.violations
            )));
        }
        out.push(subgraph);
    }
    Ok(out)
}

/// Render a subgraph as a graph-description diagram file: a metadata
/// frontmatter block delimited by `---` lines (id, source document, INV
/// labels) followed by the state-diagram body.
pub fn render_diagram(subgraph: &Subgraph) -> String {
    let mut out = String::from("---\n");
    out.push_str(&format!("id: {}\n", subgraph.id));
    out.push_str(&format!("source_doc: {}\n", subgraph.source_doc));
    out.push_str("invariants:\n");
    for a in &subgraph.invariant_annotations {
        out.push_str(&format!("  - {}\n", a.label));
    }
    out.push_str("---\n");
    out.push_str("stateDiagram-v2\n");
    for state in &subgraph.states {
        out.push_str(&format!("  {}\n", state.replace(' ', "_")));
    }
    for t in &subgraph.transitions {
        out.push_str(&format!(
            "  {} --> {}: {}\n",
            t.from.replace(' ', "_"),
            t.to.replace(' ', "_"),
            t.trigger
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    struct MapFetcher {
        pages: HashMap<String, String>,
    }

    impl Fetcher for MapFetcher {
        fn fetch(&self, url: &Url) -> Result<String, String> {
            self.pages
                .get(url.as_str())
                .cloned()
                .ok_or_else(|| "404 not found".into())
        }
    }

    fn cfg(hosts: &[&str], depth: u32) -> CrawlConfig {
        CrawlConfig {
            allowed_hosts: hosts.iter().map(|s| s.to_string()).collect(),
            max_depth: depth,
            politeness_delay_ms: 0,
        }
    }

    #[test]
    fn depth_zero_indexes_exactly_the_seed() {
        let mut pages = HashMap::new();
        pages.insert(
            "https://specs.local/index.md".to_string(),
            "# Index\n[next](page2.md)".to_string(),
        );
        let fetcher = MapFetcher { pages };
        let index = discover(
            &["https://specs.local/index.md".into()],
            &cfg(&["specs.local"], 0),
            &fetcher,
        )
        .unwrap();
        assert_eq!(index.documents.len(), 1);
        assert_eq!(index.documents[0].title, "Index");
        assert_eq!(index.documents[0].id, "doc-0001");
    }

    #[test]
    fn fixture_site_five_pages_two_offhost_filtered() {
        // Hand-enumerated oracle: index links a,b; a links c and one off-host;
        // b links d and another off-host; c and d are leaves. Five on-host
        // pages, two filtered off-host links.
        let mut pages = HashMap::new();
        pages.insert(
            "https://specs.local/index.md".into(),
            "# Root\n[a](a.md) [b](b.md)".into(),
        );
        pages.insert(
            "https://specs.local/a.md".into(),
            "# A\n[c](c.md) [ext](https://external.example.org/x)".into(),
        );
        pages.insert(
            "https://specs.local/b.md".into(),
            "# B\n[d](d.md) [ext2](https://other.example.net/y)".into(),
        );
        pages.insert("https://specs.local/c.md".into(), "# C\ndone.".into());
        pages.insert("https://specs.local/d.md".into(), "# D\ndone.".into());
        let fetcher = MapFetcher { pages };
        let index = discover(
            &["https://specs.local/index.md".into()],
            &cfg(&["specs.local"], 3),
            &fetcher,
        )
        .unwrap();
        assert_eq!(index.documents.len(), 5);
        let filtered: Vec<_> = index
            .crawl_frontier_log
            .iter()
            .filter(|e| e.status == FrontierStatus::Filtered)
            .collect();
        assert_eq!(filtered.len(), 2);
    }

    #[test]
    fn sole_unreachable_seed_is_discovery_empty() {
        let fetcher = MapFetcher {
            pages: HashMap::new(),
        };
        let err = discover(
            &["https://specs.local/missing.md".into()],
            &cfg(&["specs.local"], 1),
            &fetcher,
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::DiscoveryEmpty));
    }

    #[test]
    fn unreachable_seed_logged_run_continues() {
        let mut pages = HashMap::new();
        pages.insert("https://specs.local/ok.md".into(), "# Ok\nfine.".into());
        let fetcher = MapFetcher { pages };
        let index = discover(
            &[
                "https://specs.local/missing.md".into(),
                "https://specs.local/ok.md".into(),
            ],
            &cfg(&["specs.local"], 0),
            &fetcher,
        )
        .unwrap();
        assert_eq!(index.documents.len(), 1);
        assert!(index
            .crawl_frontier_log
            .iter()
            .any(|e| e.status == FrontierStatus::Failed));
    }

    #[test]
    fn cyclic_links_terminate() {
        let mut pages = HashMap::new();
        pages.insert("https://specs.local/a.md".into(), "[b](b.md)".into());
        pages.insert("https://specs.local/b.md".into(), "[a](a.md)".into());
        let fetcher = MapFetcher { pages };
        let index = discover(
            &["https://specs.local/a.md".into()],
            &cfg(&["specs.local"], 10),
            &fetcher,
        )
        .unwrap();
        assert_eq!(index.documents.len(), 2);
    }

    #[test]
    fn doc_type_classification() {
        let mut pages = HashMap::new();
        pages.insert(
            "https://specs.local/eip-7594.md".into(),
            "# EIP-7594\nbody.".into(),
        );
        let fetcher = MapFetcher { pages };
        let index = discover(
            &["https://specs.local/eip-7594.md".into()],
            &cfg(&["specs.local"], 0),
            &fetcher,
        )
        .unwrap();
        assert_eq!(index.documents[0].doc_type, DocType::Eip);
    }

    #[test]
    fn tags_custody_sentence_as_inv_001_must() {
        let anns =
            tag_invariants("Nodes MUST maintain custody of at least CUSTODY_REQUIREMENT columns.");
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].label, "INV-001");
        assert_eq!(anns[0].modal_strength, ModalStrength::Must);
        assert_eq!(
            anns[0].source_sentence,
            "Nodes MUST maintain custody of at least CUSTODY_REQUIREMENT columns."
        );
    }

    #[test]
    fn no_modals_yields_empty() {
        assert!(tag_invariants("The sky is blue. Water is wet.").is_empty());
    }

    #[test]
    fn uppercase_only_skips_lowercase_must() {
        // Hand-count oracle: 2 MUST + 1 SHOULD NOT + 1 lowercase "must".
        let text = "Nodes MUST validate input. Peers MUST respond in time. \
                    Clients SHOULD NOT cache stale data. Agents must be polite.";
        let anns = tag_invariants(text);
        assert_eq!(anns.len(), 3);
        assert_eq!(
            anns.iter().map(|a| a.label.as_str()).collect::<Vec<_>>(),
            vec!["INV-001", "INV-002", "INV-003"]
        );
        assert_eq!(anns[2].modal_strength, ModalStrength::ShouldNot);

        let all = tag_invariants_with(
            text,
            &TaggingConfig {
                uppercase_only: false,
            },
        );
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn negated_phrase_takes_priority() {
        let anns = tag_invariants("Peers MUST NOT advertise columns they do not custody.");
        assert_eq!(anns[0].modal_strength, ModalStrength::MustNot);
        let anns = tag_invariants("Implementations SHALL NOT reuse nonces.");
        assert_eq!(anns[0].modal_strength, ModalStrength::MustNot);
    }

    #[test]
    fn modal_must_be_a_whole_word() {
        assert!(tag_invariants("Add MUSTARD to taste.").is_empty());
        assert!(tag_invariants("The MAYOR spoke.").is_empty());
    }

    #[test]
    fn sections_tracked_from_headings() {
        let text = "# Custody\nNodes MUST keep columns.\n\n## Rotation\nNodes SHOULD rotate sets.";
        let anns = tag_invariants(text);
        assert_eq!(anns.len(), 2);
        assert_eq!(anns[0].spec_section, "Custody");
        assert_eq!(anns[1].spec_section, "Rotation");
    }

    #[test]
    fn labels_strictly_increase_in_source_order() {
        let text = "A MUST x. B SHOULD y. C MAY z.";
        let anns = tag_invariants(text);
        let labels: Vec<u32> = anns
            .iter()
            .map(|a| a.label[4..].parse().unwrap())
            .collect();
        assert!(labels.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn abbreviation_mid_sentence_does_not_split_before_lowercase() {
        // "e.g. lower" has no capital after the period, so no boundary.
        let s = split_sentences("Nodes MUST, e.g. when syncing, keep columns.");
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn diagram_has_frontmatter_and_body() {
        let sg = Subgraph {
            id: "SG-001".into(),
            source_doc: "doc-0002".into(),
            states: vec!["idle".into(), "serving".into()],
            transitions: vec![Transition {
                from: "idle".into(),
                to: "serving".into(),
                trigger: "request [INV-001]".into(),
            }],
            invariant_annotations: vec![InvariantAnnotation {
                label: "INV-001".into(),
                modal_strength: ModalStrength::Must,
                source_sentence: "Nodes MUST serve.".into(),
                spec_section: "Serving".into(),
            }],
            dataflow_constraints: vec![],
        };
        let mmd = render_diagram(&sg);
        assert!(mmd.starts_with("---\nid: SG-001\n"));
        assert!(mmd.contains("source_doc: doc-0002"));
        assert!(mmd.contains("  - INV-001"));
        assert!(mmd.contains("stateDiagram-v2"));
        assert!(mmd.contains("idle --> serving: request [INV-001]"));
    }
}
