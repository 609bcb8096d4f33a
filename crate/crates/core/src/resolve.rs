//! Phase 4: symbol indexing of a target repository and pre-resolution of each
//! property to enforcement code.
//!
//! The indexer is a depth-tracking lexical scanner with pluggable per-language
//! profiles. It records function definitions with line spans, syntactic call
//! sites (no dynamic dispatch resolution), and an exported flag per symbol;
//! test code is classified purely by path pattern.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{complete_with_retry, Backend, BackendError, PromptSection, ReasoningRequest};
use crate::model::{
    CodeLocation, CodeScope, Phase, Property, Provenance, PropertyOrigin, ResolutionStatus,
    ScopeDocument, ScopedLocation, Severity, Subgraph,
};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("symbol index failure: {0}")]
    IndexFailure(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("resolution output invalid: {0}")]
    Malformed(String),
}

/// Default path patterns recognized as test code.
pub const DEFAULT_TEST_PATTERNS: &[&str] = &["tests/", "test/", "*_test.*", "*.test.*"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Function,
    Type,
    Constant,
    Other,
}

/// One definition site of a symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub file: String,
    pub line_start: u32,
    pub line_end: u32,
    pub kind: SymbolKind,
    pub exported: bool,
    pub is_test: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
}

/// Syntax-derived symbol table and call graph for one repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolIndex {
    pub repo_id: String,
    pub symbols: BTreeMap<String, Vec<SymbolEntry>>,
    pub call_edges: Vec<CallEdge>,
    pub test_paths: Vec<String>,
}

impl SymbolIndex {
    /// Distinct callers of `symbol` that have at least one non-test
    /// definition site. This is the gate-facing dead-code query, computable
    /// from the index alone.
    pub fn non_test_callers(&self, symbol: &str) -> Vec<&str> {
        let mut out: BTreeSet<&str> = BTreeSet::new();
        for edge in &self.call_edges {
            if edge.callee == symbol {
                let caller_non_test = self
                    .symbols
                    .get(&edge.caller)
                    .is_some_and(|entries| entries.iter().any(|e| !e.is_test));
                if caller_non_test {
                    out.insert(&edge.caller);
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn callers_of(&self, symbol: &str) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .call_edges
            .iter()
            .filter(|e| e.callee == symbol)
            .map(|e| e.caller.as_str())
            .collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn callees_of(&self, symbol: &str) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .call_edges
            .iter()
            .filter(|e| e.caller == symbol)
            .map(|e| e.callee.as_str())
            .collect();
        set.into_iter().map(String::from).collect()
    }

    /// A symbol is part of the public API when a definition site is exported
    /// per its language profile and lives under the scope's included
    /// components. Conservative toward treating a symbol as public.
    pub fn is_public_api(&self, symbol: &str, scope: &ScopeDocument) -> bool {
        self.symbols.get(symbol).is_some_and(|entries| {
            entries.iter().any(|e| {
                e.exported
                    && scope
                        .included_components
                        .iter()
                        .any(|p| path_matches(p, &e.file))
            })
        })
    }
}

/// Simple `*`-glob match; a pattern without `*` matches as a path prefix.
pub fn path_matches(pattern: &str, path: &str) -> bool {
    if pattern.contains('*') {
        let mut re = String::from("^");
        for part in pattern.split('*') {
            if !re.ends_with('^') || pattern.starts_with('*') {
                // separator between literal parts
            }
            re.push_str(&regex::escape(part));
            re.push_str(".*");
        }
        // Drop the trailing wildcard added after the last literal part
        // unless the pattern itself ends with `*`.
        if !pattern.ends_with('*') {
            re.truncate(re.len() - 2);
            re.push('$');
        }
        regex::Regex::new(&re).map(|r| r.is_match(path)).unwrap_or(false)
    } else {
        path.starts_with(pattern)
    }
}

/// True when the relative path is test code per the configured patterns.
/// This is a pure function of the path.
pub fn is_test_path(path: &str, patterns: &[String]) -> bool {
    let file_name = Path::new(path)
        .file_name()
        .and_then(|f| f.to_str())
        .unwrap_or(path);
    for pattern in patterns {
        if pattern.contains('*') {
            if path_matches(pattern, file_name) || path_matches(pattern, path) {
                return true;
            }
        } else if path.split('/').any(|seg| {
            let with_slash = format!("{seg}/");
            with_slash == *pattern || seg == pattern.trim_end_matches('/')
        }) {
            return true;
        }
    }
    false
}

/// A pluggable language profile: which files it handles and how definitions
/// and call sites are recognized.
pub trait LanguageProfile: Send + Sync {
    fn name(&self) -> &str;
    fn handles(&self, path: &Path) -> bool;
    /// Scan one file, returning definitions and the call references inside
    /// each definition body.
    fn scan(&self, content: &str) -> ScanResult;
}

#[derive(Debug, Default)]
pub struct ScanResult {
    pub definitions: Vec<Definition>,
    /// (enclosing definition name, callee name)
    pub calls: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct Definition {
    pub name: String,
    pub kind: SymbolKind,
    pub exported: bool,
    pub line_start: u32,
    pub line_end: u32,
}

/// Look up built-in profiles by name.
pub fn profile_by_name(name: &str) -> Option<Box<dyn LanguageProfile>> {
    match name {
        "rust" => Some(Box::new(LexicalProfile::rust())),
        "go" => Some(Box::new(LexicalProfile::go())),
        "c" => Some(Box::new(LexicalProfile::c())),
        _ => None,
    }
}

/// Shared depth-tracking scanner configured per language.
pub struct LexicalProfile {
    name: &'static str,
    extensions: &'static [&'static str],
    keywords: &'static [&'static str],
    flavor: Flavor,
}

enum Flavor {
    Rust,
    Go,
    C,
}

impl LexicalProfile {
    pub fn rust() -> Self {
        LexicalProfile {
            name: "rust",
            extensions: &["rs"],
            keywords: &[
                "if", "else", "for", "while", "loop", "match", "return", "fn", "let", "mut",
                "impl", "struct", "enum", "trait", "mod", "use", "pub", "unsafe", "move", "Some",
                "Ok", "Err", "None",
            ],
            flavor: Flavor::Rust,
        }
    }

    pub fn go() -> Self {
        LexicalProfile {
            name: "go",
            extensions: &["go"],
            keywords: &[
                "if", "else", "for", "switch", "case", "return", "func", "var", "const", "type",
                "range", "defer", "go", "select", "make", "new", "len", "cap", "append", "panic",
                "copy", "delete",
            ],
            flavor: Flavor::Go,
        }
    }

    pub fn c() -> Self {
        LexicalProfile {
            name: "c",
            extensions: &["c", "h"],
            keywords: &[
                "if", "else", "for", "while", "switch", "case", "return", "sizeof", "typedef",
                "struct", "enum", "union", "static", "const", "do", "goto", "defined",
            ],
            flavor: Flavor::C,
        }
    }

    /// Strip line/block comments and string literals, preserving length-ish
    /// layout so later scans cannot match inside them.
    fn strip(&self, content: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut in_block_comment = false;
        for line in content.lines() {
            let mut cleaned = String::with_capacity(line.len());
            let mut chars = line.chars().peekable();
            let mut in_string: Option<char> = None;
            while let Some(c) = chars.next() {
                if in_block_comment {
                    if c == '*' && chars.peek() == Some(&'/') {
                        chars.next();
                        in_block_comment = false;
                    }
                    continue;
                }
                if let Some(quote) = in_string {
                    if c == '\\' {
                        chars.next();
                    } else if c == quote {
                        in_string = None;
                    }
                    continue;
                }
                match c {
                    '/' if chars.peek() == Some(&'/') => break,
                    '/' if chars.peek() == Some(&'*') => {
                        chars.next();
                        in_block_comment = true;
                    }
                    '"' => {
                        in_string = Some('"');
                        cleaned.push(' ');
                    }
                    '\'' if matches!(self.flavor, Flavor::Go | Flavor::C) => {
                        in_string = Some('\'');
                        cleaned.push(' ');
                    }
                    _ => cleaned.push(c),
                }
            }
            out.push(cleaned);
        }
        out
    }

    fn is_keyword(&self, ident: &str) -> bool {
        self.keywords.contains(&ident)
    }

    /// Try to read a function definition head from a cleaned line.
    fn match_definition(&self, line: &str, depth: i32) -> Option<(String, bool)> {
        let trimmed = line.trim_start();
        match self.flavor {
            Flavor::Rust => {
                let (exported, rest) = if let Some(r) = trimmed.strip_prefix("pub ") {
                    (true, r.trim_start())
                } else if trimmed.starts_with("pub(") {
                    let after = trimmed.split_once(") ").map(|(_, r)| r)?;
                    (true, after.trim_start())
                } else {
                    (false, trimmed)
                };
                let rest = rest
                    .strip_prefix("async ")
                    .unwrap_or(rest)
                    .trim_start();
                let rest = rest.strip_prefix("fn ")?;
                let name: String = rest
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                    .collect();
                (!name.is_empty()).then_some((name, exported))
            }
            Flavor::Go => {
                let rest = trimmed.strip_prefix("func ")?;
                let rest = if rest.starts_with('(') {
                    rest.split_once(')')?.1.trim_start()
                } else {
                    rest
                };
                let name: String = rest
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                    .collect();
                if name.is_empty() {
                    return None;
                }
                let exported = name.chars().next().is_some_and(|c| c.is_ascii_uppercase());
                Some((name, exported))
            }
            Flavor::C => {
                if depth != 0 || trimmed.starts_with('#') {
                    return None;
                }
                // identifier followed by ( ... and an opening brace on the
                // same or a following line; control keywords excluded.
                let re = regex::Regex::new(r"^[A-Za-z_][A-Za-z0-9_ \t\*]*?([A-Za-z_][A-Za-z0-9_]*)\s*\(").unwrap();
                let cap = re.captures(trimmed)?;
                let name = cap[1].to_string();
                if self.is_keyword(&name) {
                    return None;
                }
                if !trimmed.contains('{') && !trimmed.trim_end().ends_with(')') {
                    return None;
                }
                if trimmed.trim_end().ends_with(';') {
                    return None; // prototype, not a definition
                }
                let exported = !trimmed.trim_start().starts_with("static ");
                Some((name, exported))
            }
        }
    }

    fn match_type_or_const(&self, line: &str, depth: i32) -> Option<(String, SymbolKind)> {
        if depth != 0 {
            return None;
        }
        let trimmed = line.trim_start();
        match self.flavor {
            Flavor::Rust => {
                let rest = trimmed.strip_prefix("pub ").unwrap_or(trimmed);
                if let Some(r) = rest.strip_prefix("struct ").or_else(|| rest.strip_prefix("enum ")) {
                    let name: String = r
                        .chars()
                        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                        .collect();
                    return (!name.is_empty()).then_some((name, SymbolKind::Type));
                }
                if let Some(r) = rest.strip_prefix("const ") {
                    let name: String = r
                        .chars()
                        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                        .collect();
                    return (!name.is_empty()).then_some((name, SymbolKind::Constant));
                }
                None
            }
            Flavor::Go => {
                if let Some(r) = trimmed.strip_prefix("type ") {
                    let name: String = r
                        .chars()
                        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                        .collect();
                    return (!name.is_empty()).then_some((name, SymbolKind::Type));
                }
                if let Some(r) = trimmed.strip_prefix("const ") {
                    let name: String = r
                        .chars()
                        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                        .collect();
                    return (!name.is_empty()).then_some((name, SymbolKind::Constant));
                }
                None
            }
            Flavor::C => {
                if let Some(r) = trimmed.strip_prefix("#define ") {
                    let name: String = r
                        .chars()
                        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                        .collect();
                    return (!name.is_empty()).then_some((name, SymbolKind::Constant));
                }
                None
            }
        }
    }
}

impl LanguageProfile for LexicalProfile {
    fn name(&self) -> &str {
        self.name
    }

    fn handles(&self, path: &Path) -> bool {
        path.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|ext| self.extensions.contains(&ext))
    }

    fn scan(&self, content: &str) -> ScanResult {
        let lines = self.strip(content);
        let call_re = regex::Regex::new(r"([A-Za-z_][A-Za-z0-9_]*)\s*\(").unwrap();
        let mut result = ScanResult::default();
        // Stack of (definition index, depth at which its body closes).
        let mut open: Vec<(usize, i32)> = Vec::new();
        let mut depth: i32 = 0;
        for (i, line) in lines.iter().enumerate() {
            let line_no = (i + 1) as u32;
            let def = self.match_definition(line, depth);
            if let Some((name, kind)) = self.match_type_or_const(line, depth) {
                result.definitions.push(Definition {
                    name,
                    kind,
                    exported: true,
                    line_start: line_no,
                    line_end: line_no,
                });
            }
            let mut scan_text: &str = line;
            let mut head_len = 0usize;
            if let Some((name, exported)) = def {
                // Record the definition; its body closes when depth returns
                // to the current level.
                result.definitions.push(Definition {
                    name: name.clone(),
                    kind: SymbolKind::Function,
                    exported,
                    line_start: line_no,
                    line_end: line_no,
                });
                open.push((result.definitions.len() - 1, depth));
                // Skip the definition head so the defined name is not taken
                // as a call site.
                if let Some(pos) = line.find(&name) {
                    head_len = pos + name.len();
                }
                scan_text = &line[head_len.min(line.len())..];
            }
            for cap in call_re.captures_iter(scan_text) {
                let callee = cap[1].to_string();
                if self.is_keyword(&callee) {
                    continue;
                }
                if let Some(&(def_idx, _)) = open.last() {
                    let caller = result.definitions[def_idx].name.clone();
                    if caller != callee {
                        result.calls.push((caller, callee));
                    }
                }
            }
            for c in line.chars() {
                match c {
                    '{' => depth += 1,
                    '}' => {
                        depth -= 1;
                        while let Some(&(def_idx, open_depth)) = open.last() {
                            if depth <= open_depth {
                                result.definitions[def_idx].line_end = line_no;
                                open.pop();
                            } else {
                                break;
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        // Close any definition left open at EOF.
        let last_line = lines.len() as u32;
        while let Some((def_idx, _)) = open.pop() {
            result.definitions[def_idx].line_end = last_line;
        }
        result
    }
}

fn walk_files(root: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        let path = entry.path();
        let name = entry.file_name();
        if name.to_str().is_some_and(|n| n.starts_with('.')) {
            continue;
        }
        if path.is_dir() {
            walk_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Build the symbol index for a repository. Files not valid UTF-8 are skipped
/// with a warning; an unreadable repository root is an index failure.
pub fn build_symbol_index(
    repo_root: &Path,
    repo_id: &str,
    profiles: &[Box<dyn LanguageProfile>],
    test_patterns: &[String],
) -> Result<(SymbolIndex, Vec<String>), ResolveError> {
    if profiles.is_empty() {
        return Err(ResolveError::IndexFailure(
            "at least one language profile required".into(),
        ));
    }
    let mut files = Vec::new();
    walk_files(repo_root, &mut files)
        .map_err(|e| ResolveError::IndexFailure(format!("{}: {e}", repo_root.display())))?;
    files.sort();
    let mut warnings = Vec::new();
    let mut symbols: BTreeMap<String, Vec<SymbolEntry>> = BTreeMap::new();
    let mut raw_edges: BTreeSet<(String, String)> = BTreeSet::new();
    for file in files {
        let Some(profile) = profiles.iter().find(|p| p.handles(&file)) else {
            continue;
        };
        let rel = file
            .strip_prefix(repo_root)
            .unwrap_or(&file)
            .to_string_lossy()
            .replace('\\', "/");
        let content = match std::fs::read_to_string(&file) {
            Ok(c) => c,
            Err(e) => {
                warnings.push(format!("skipped {rel}: {e}"));
                continue;
            }
        };
        let scan = profile.scan(&content);
        let test = is_test_path(&rel, test_patterns);
        for def in scan.definitions {
            symbols.entry(def.name).or_default().push(SymbolEntry {
                file: rel.clone(),
                line_start: def.line_start,
                line_end: def.line_end,
                kind: def.kind,
                exported: def.exported,
                is_test: test,
            });
        }
        for (caller, callee) in scan.calls {
            raw_edges.insert((caller, callee));
        }
    }
    // Call edges reference indexed symbols only.
    let call_edges: Vec<CallEdge> = raw_edges
        .into_iter()
        .filter(|(caller, callee)| symbols.contains_key(caller) && symbols.contains_key(callee))
        .map(|(caller, callee)| CallEdge { caller, callee })
        .collect();
    Ok((
        SymbolIndex {
            repo_id: repo_id.to_string(),
            symbols,
            call_edges,
            test_paths: test_patterns.to_vec(),
        },
        warnings,
    ))
}

/// Response payload of the code-resolver worker: the symbols it identifies as
/// enforcement locations for the property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeResolution {
    pub enforcement_symbols: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub const CODE_RESOLVER_ROLE: &str = "code-resolver";

/// Render the symbol inventory presented to the resolver worker.
pub fn symbol_inventory(index: &SymbolIndex) -> String {
    let mut out = String::new();
    for (name, entries) in &index.symbols {
        for e in entries {
            out.push_str(&format!(
                "{name} ({kind:?}) {file}:{start}-{end}{test}\n",
                kind = e.kind,
                file = e.file,
                start = e.line_start,
                end = e.line_end,
                test = if e.is_test { " [test]" } else { "" },
            ));
        }
    }
    out
}

/// Build the Phase 4 resolution request for one property.
pub fn resolution_request(
    property: &Property,
    index: &SymbolIndex,
    budget_tokens: u64,
) -> ReasoningRequest {
    ReasoningRequest {
        phase: Phase::P4,
        role: CODE_RESOLVER_ROLE.into(),
        prompt_sections: vec![
            PromptSection::new(
                "task",
                "Identify the primary enforcement location(s) for this property \
                 by matching specification concepts to source symbols from the \
                 inventory. Name only symbols that appear in the inventory.",
            ),
            PromptSection::new(
                "property",
                serde_json::to_string_pretty(property).unwrap(),
            ),
            PromptSection::new("symbol-inventory", symbol_inventory(index)),
        ],
        response_schema_id: "code_resolution".into(),
        budget_tokens,
    }
}

/// Phase 4: link one property to enforcement code plus its caller/callee
/// neighborhood. A property naming no indexable symbol resolves to
/// `unresolved`, which is recorded rather than treated as an error.
pub fn resolve_property(
    property: &Property,
    index: &SymbolIndex,
    backend: &dyn Backend,
    budget_tokens: u64,
) -> Result<CodeScope, ResolveError> {
    let request = resolution_request(property, index, budget_tokens);
    let response = complete_with_retry(backend, &request)?;
    let resolution: CodeResolution = serde_json::from_value(response.payload)
        .map_err(|e| ResolveError::Malformed(e.to_string()))?;
    let mut locations = Vec::new();
    let mut missing = Vec::new();
    for symbol in &resolution.enforcement_symbols {
        match index.symbols.get(symbol) {
            Some(entries) => {
                for e in entries {
                    locations.push(ScopedLocation {
                        location: CodeLocation {
                            file: e.file.clone(),
                            symbol: symbol.clone(),
                            line_start: e.line_start,
                            line_end: e.line_end,
                        },
                        callers: index.callers_of(symbol),
                        callees: index.callees_of(symbol),
                    });
                }
            }
            None => missing.push(symbol.clone()),
        }
    }
    let status = if locations.is_empty() {
        ResolutionStatus::Unresolved
    } else {
        ResolutionStatus::Resolved
    };
    let note = match (status, missing.is_empty(), resolution.note) {
        (ResolutionStatus::Unresolved, true, None) => {
            Some("no enforcement symbols identified".to_string())
        }
        (_, false, note) => {
            let mut text = format!("symbols not in index: {}", missing.join(", "));
            if let Some(n) = note {
                text.push_str("; ");
                text.push_str(&n);
            }
            Some(text)
        }
        (_, true, note) => note,
    };
    Ok(CodeScope {
        property_id: property.id.clone(),
        enforcement_locations: locations,
        resolution_status: status,
        note,
    })
}

/// Partition properties into (kept, dropped): dropped is exactly the
/// Informational ones.
pub fn filter_informational(properties: Vec<Property>) -> (Vec<Property>, Vec<Property>) {
    properties
        .into_iter()
        .partition(|p| p.severity != Severity::Informational)
}

/// One property-to-code mapping in the subgraph index artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyMapping {
    pub property_id: String,
    pub enforcement_locations: Vec<CodeLocation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphIndexEntry {
    pub subgraph_id: String,
    pub mappings: Vec<PropertyMapping>,
}

/// The `01b_SUBGRAPH_INDEX.json` artifact: specification-level concepts
/// mapped to implementation artifacts, per subgraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphIndexArtifact {
    pub repo_id: String,
    pub entries: Vec<SubgraphIndexEntry>,
}

/// Build the subgraph index: every resolved property appears under its
/// subgraph with its enforcement locations. Dangling references are an error.
pub fn build_subgraph_index(
    subgraphs: &[Subgraph],
    properties: &[Property],
    code_scopes: &[CodeScope],
    repo_id: &str,
) -> Result<SubgraphIndexArtifact, ResolveError> {
    let by_id: BTreeMap<&str, &Property> =
        properties.iter().map(|p| (p.id.as_str(), p)).collect();
    let known_subgraphs: BTreeSet<&str> = subgraphs.iter().map(|s| s.id.as_str()).collect();
    let mut grouped: BTreeMap<String, Vec<PropertyMapping>> = subgraphs
        .iter()
        .map(|s| (s.id.clone(), Vec::new()))
        .collect();
    for scope in code_scopes {
        let Some(property) = by_id.get(scope.property_id.as_str()) else {
            return Err(ResolveError::IndexFailure(format!(
                "code scope references unknown property {}",
                scope.property_id
            )));
        };
        if scope.resolution_status != ResolutionStatus::Resolved {
            continue;
        }
        let Provenance { subgraph, .. } = &property.provenance;
        if !known_subgraphs.contains(subgraph.as_str()) {
            if property.origin == PropertyOrigin::Auto {
                return Err(ResolveError::IndexFailure(format!(
                    "property {} references unknown subgraph {subgraph}",
                    property.id
                )));
            }
            // Manual properties may cite a subgraph outside the extracted
            // set; give them their own entry.
            grouped.entry(subgraph.clone()).or_default();
        }
        grouped
            .entry(subgraph.clone())
            .or_default()
            .push(PropertyMapping {
                property_id: scope.property_id.clone(),
                enforcement_locations: scope
                    .enforcement_locations
                    .iter()
                    .map(|l| l.location.clone())
                    .collect(),
            });
    }
    let entries = grouped
        .into_iter()
        .map(|(subgraph_id, mut mappings)| {
            mappings.sort_by(|a, b| a.property_id.cmp(&b.property_id));
            SubgraphIndexEntry {
                subgraph_id,
                mappings,
            }
        })
        .collect();
    Ok(SubgraphIndexArtifact {
        repo_id: repo_id.to_string(),
        entries,
    })
}

/// Read the text of one indexed location (full body lines).
pub fn location_text(repo_root: &Path, location: &CodeLocation) -> String {
    let path = repo_root.join(&location.file);
    let Ok(content) = std::fs::read_to_string(&path) else {
        return String::new();
    };
    let start = location.line_start.saturating_sub(1) as usize;
    let end = location.line_end as usize;
    content
        .lines()
        .skip(start)
        .take(end.saturating_sub(start))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The code text presented to the Phase 5 audit for a resolved property:
/// full bodies of the enforcement locations plus their callers and callees.
pub fn scope_code_text(scope: &CodeScope, index: &SymbolIndex, repo_root: &Path) -> String {
    let mut seen: BTreeSet<(String, u32)> = BTreeSet::new();
    let mut out = String::new();
    let mut emit = |loc: &CodeLocation, out: &mut String| {
        if seen.insert((format!("{}#{}", loc.file, loc.symbol), loc.line_start)) {
            out.push_str(&format!(
                "// {} ({}:{}-{})\n",
                loc.symbol, loc.file, loc.line_start, loc.line_end
            ));
            out.push_str(&location_text(repo_root, loc));
            out.push_str("\n\n");
        }
    };
    for scoped in &scope.enforcement_locations {
        emit(&scoped.location, &mut out);
        let neighborhood: Vec<&String> =
            scoped.callers.iter().chain(scoped.callees.iter()).collect();
        for symbol in neighborhood {
            if let Some(entries) = index.symbols.get(symbol) {
                for e in entries {
                    emit(
                        &CodeLocation {
                            file: e.file.clone(),
                            symbol: symbol.clone(),
                            line_start: e.line_start,
                            line_end: e.line_end,
                        },
                        &mut out,
                    );
                }
            }
        }
    }
    out
}

/// The whole-repository prompt text an unresolved audit would need: all
/// profiled files in full.
pub fn whole_repo_text(
    repo_root: &Path,
    profiles: &[Box<dyn LanguageProfile>],
) -> Result<String, ResolveError> {
    let mut files = Vec::new();
    walk_files(repo_root, &mut files)
        .map_err(|e| ResolveError::IndexFailure(format!("{}: {e}", repo_root.display())))?;
    files.sort();
    let mut out = String::new();
    for file in files {
        if !profiles.iter().any(|p| p.handles(&file)) {
            continue;
        }
        let rel = file
            .strip_prefix(repo_root)
            .unwrap_or(&file)
            .to_string_lossy()
            .replace('\\', "/");
        if let Ok(content) = std::fs::read_to_string(&file) {
            out.push_str(&format!("// file: {rel}\n"));
            out.push_str(&content);
            out.push('\n');
        }
    }
    Ok(out)
}
