//! Capability catalog: maps every knowledge unit to its key capabilities and
//! every capability to the syntactic patterns that detect it.
//!
//! The catalog is a TOML document. Each `[[rule]]` names one capability and
//! lists one or more `[[rule.patterns]]`:
//!
//! ```toml
//! [[rule]]
//! ku = 11
//! capability = 1
//! description = "Create a try-catch block"
//!
//! [[rule.patterns]]
//! node_kind = "try_statement"
//! ```
//!
//! Pattern predicates:
//!
//! * `name`: space-separated alternatives matched against the node's name.
//!   An alternative may start or end with `*`. Alternatives containing a `.`
//!   are matched against the qualified form (`Files.copy`, `System.out.println`).
//!   A leading `!` negates the whole list.
//! * `keyword`: space-separated tokens of which at least one must occur among
//!   the node's modifiers, operator tokens or `this`/`super` children.
//!   Annotations in a modifier list appear as `@Name`. A leading `!` negates.
//! * `import_prefix`: space-separated package prefixes. The name must resolve
//!   into one of them through the file's imports. Files without any import
//!   accept the match; `java.lang` is implicitly imported.
//!
//! A catalog file may start with `extends = "builtin"`; the rules it lists
//! then replace the built-in rules of the knowledge units they mention.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ku::{CapabilityId, KuId};

const BUILTIN_CATALOG: &str = include_str!("../data/catalog.toml");

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed catalog: {0}")]
    Syntax(String),
    #[error("malformed rule #{position} ({label}): {message}")]
    Rule {
        position: usize,
        label: String,
        message: String,
    },
    #[error("invalid catalog: {0}")]
    Validation(String),
}

/// Coarse syntax-node category a [`NodeKind`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeCategory {
    Declaration,
    Statement,
    Expression,
    Type,
    Annotation,
    Invocation,
}

/// Syntax-node selector of a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    // declarations
    ImportDeclaration,
    ClassDeclaration,
    InterfaceDeclaration,
    EnumDeclaration,
    RecordDeclaration,
    NestedClassDeclaration,
    AnonymousClass,
    MethodDeclaration,
    ConstructorDeclaration,
    OverloadedMethod,
    OverloadedConstructor,
    FieldDeclaration,
    LocalVariableDeclaration,
    FormalParameter,
    VarargsParameter,
    StaticInitializer,
    TypeParameters,
    Superclass,
    SuperInterface,
    ThrowsClause,
    SingletonClass,
    ImmutableClass,
    PolymorphicAssignment,
    // statements
    IfStatement,
    SwitchStatement,
    WhileStatement,
    ForStatement,
    EnhancedForStatement,
    DoStatement,
    BreakStatement,
    ContinueStatement,
    ReturnStatement,
    TryStatement,
    TryWithResourcesStatement,
    CatchClause,
    FinallyClause,
    ThrowStatement,
    AssertStatement,
    SynchronizedStatement,
    ExplicitConstructorInvocation,
    // expressions
    BinaryExpression,
    AssignmentExpression,
    UpdateExpression,
    UnaryExpression,
    TernaryExpression,
    CastExpression,
    InstanceofExpression,
    ObjectCreation,
    ArrayCreation,
    MultiDimensionalArrayCreation,
    ArrayInitializer,
    ArrayAccess,
    FieldAccess,
    LambdaExpression,
    MethodReference,
    // types
    TypeReference,
    GenericType,
    ArrayType,
    MultiDimensionalArrayType,
    // annotations
    Annotation,
    // invocations
    MethodInvocation,
    StreamOperation,
}

impl NodeKind {
    pub fn category(self) -> NodeCategory {
        use NodeKind::*;
        match self {
            ImportDeclaration
            | ClassDeclaration
            | InterfaceDeclaration
            | EnumDeclaration
            | RecordDeclaration
            | NestedClassDeclaration
            | AnonymousClass
            | MethodDeclaration
            | ConstructorDeclaration
            | OverloadedMethod
            | OverloadedConstructor
            | FieldDeclaration
            | LocalVariableDeclaration
            | FormalParameter
            | VarargsParameter
            | StaticInitializer
            | TypeParameters
            | Superclass
            | SuperInterface
            | ThrowsClause
            | SingletonClass
            | ImmutableClass
            | PolymorphicAssignment => NodeCategory::Declaration,
            IfStatement
            | SwitchStatement
            | WhileStatement
            | ForStatement
            | EnhancedForStatement
            | DoStatement
            | BreakStatement
            | ContinueStatement
            | ReturnStatement
            | TryStatement
            | TryWithResourcesStatement
            | CatchClause
            | FinallyClause
            | ThrowStatement
            | AssertStatement
            | SynchronizedStatement
            | ExplicitConstructorInvocation => NodeCategory::Statement,
            BinaryExpression
            | AssignmentExpression
            | UpdateExpression
            | UnaryExpression
            | TernaryExpression
            | CastExpression
            | InstanceofExpression
            | ObjectCreation
            | ArrayCreation
            | MultiDimensionalArrayCreation
            | ArrayInitializer
            | ArrayAccess
            | FieldAccess
            | LambdaExpression
            | MethodReference => NodeCategory::Expression,
            TypeReference | GenericType | ArrayType | MultiDimensionalArrayType => NodeCategory::Type,
            Annotation => NodeCategory::Annotation,
            MethodInvocation | StreamOperation => NodeCategory::Invocation,
        }
    }
}

/// Glob-style alternatives over a node name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NameMatcher {
    negated: bool,
    alternatives: Vec<String>,
}

impl NameMatcher {
    /// `simple` is the unqualified name, `qualified` the dotted form when one exists.
    pub fn matches(&self, simple: &str, qualified: &str) -> bool {
        let hit = self.alternatives.iter().any(|alt| {
            let target = if alt.contains('.') { qualified } else { simple };
            glob_match(alt, target)
        });
        hit != self.negated
    }
}

fn glob_match(pattern: &str, text: &str) -> bool {
    if pattern == "*" {
        return true;
    }
    match (pattern.strip_prefix('*'), pattern.strip_suffix('*')) {
        (Some(suffix), _) if !suffix.ends_with('*') => text.ends_with(suffix),
        (Some(inner), _) => text.contains(inner.trim_end_matches('*')),
        (None, Some(prefix)) => text.starts_with(prefix),
        (None, None) => text == pattern,
    }
}

fn parse_alternatives(raw: &str) -> Result<(bool, Vec<String>), String> {
    let trimmed = raw.trim();
    let (negated, body) = match trimmed.strip_prefix('!') {
        Some(rest) => (true, rest),
        None => (false, trimmed),
    };
    let alternatives: Vec<String> = body.split_whitespace().map(str::to_owned).collect();
    if alternatives.is_empty() {
        return Err(format!("empty matcher {raw:?}"));
    }
    Ok((negated, alternatives))
}

fn render_alternatives(negated: bool, alternatives: &[String]) -> String {
    let body = alternatives.join(" ");
    if negated {
        format!("!{body}")
    } else {
        body
    }
}

impl FromStr for NameMatcher {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (negated, alternatives) = parse_alternatives(s)?;
        Ok(NameMatcher { negated, alternatives })
    }
}

impl TryFrom<String> for NameMatcher {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<NameMatcher> for String {
    fn from(m: NameMatcher) -> String {
        render_alternatives(m.negated, &m.alternatives)
    }
}

/// Exact-token alternatives over the keywords attached to a node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct KeywordMatcher {
    negated: bool,
    alternatives: Vec<String>,
}

impl KeywordMatcher {
    pub fn matches<'a>(&self, mut keywords: impl Iterator<Item = &'a str>) -> bool {
        let hit = keywords.any(|k| self.alternatives.iter().any(|a| a == k));
        hit != self.negated
    }
}

impl FromStr for KeywordMatcher {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (negated, alternatives) = parse_alternatives(s)?;
        Ok(KeywordMatcher { negated, alternatives })
    }
}

impl TryFrom<String> for KeywordMatcher {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<KeywordMatcher> for String {
    fn from(m: KeywordMatcher) -> String {
        render_alternatives(m.negated, &m.alternatives)
    }
}

/// Package prefixes a name has to resolve into.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ImportPrefix(Vec<String>);

impl ImportPrefix {
    pub fn prefixes(&self) -> &[String] {
        &self.0
    }

    /// Segment-aware prefix test: `java.util` covers `java.util.List`, not `java.utility`.
    pub fn covers(&self, path: &str) -> bool {
        self.0
            .iter()
            .any(|p| path == p || (path.starts_with(p.as_str()) && path[p.len()..].starts_with('.')))
    }

    pub fn includes_java_lang(&self) -> bool {
        self.covers("java.lang")
    }
}

impl FromStr for ImportPrefix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<String> = s.split_whitespace().map(str::to_owned).collect();
        if parts.is_empty() {
            return Err(format!("empty import prefix {s:?}"));
        }
        Ok(ImportPrefix(parts))
    }
}

impl TryFrom<String> for ImportPrefix {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ImportPrefix> for String {
    fn from(p: ImportPrefix) -> String {
        p.0.join(" ")
    }
}

/// A node-kind selector plus optional predicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AstPattern {
    pub node_kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<NameMatcher>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword: Option<KeywordMatcher>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub import_prefix: Option<ImportPrefix>,
}

impl AstPattern {
    pub fn of(node_kind: NodeKind) -> Self {
        AstPattern {
            node_kind,
            name: None,
            keyword: None,
            import_prefix: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    ku: i64,
    capability: i64,
    description: String,
    #[serde(default = "default_true")]
    enabled: bool,
    #[serde(default)]
    patterns: Vec<AstPattern>,
}

fn default_true() -> bool {
    true
}

/// One key capability of one knowledge unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityRule {
    pub id: CapabilityId,
    pub description: String,
    pub patterns: Vec<AstPattern>,
    pub enabled: bool,
}

impl CapabilityRule {
    fn to_raw(&self) -> RawRule {
        RawRule {
            ku: self.id.ku.index() as i64,
            capability: self.id.cap_index as i64,
            description: self.description.clone(),
            enabled: self.enabled,
            patterns: self.patterns.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct RawCatalogOut<'a> {
    rule: &'a [RawRule],
}

/// Validated, immutable set of capability rules ordered by `(ku, cap_index)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityCatalog {
    rules: Vec<CapabilityRule>,
}

impl CapabilityCatalog {
    /// The catalog embedded in the crate.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_CATALOG).expect("embedded catalog is valid")
    }

    /// Loads `path`, or the built-in catalog when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CatalogError> {
        match path {
            None => Ok(Self::builtin()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| CatalogError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                Self::from_toml_str(&text)
            }
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CatalogError> {
        let doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CatalogError::Syntax(e.to_string()))?;

        let mut extends_builtin = false;
        let mut raw_rules = Vec::new();
        for (key, value) in doc {
            match key.as_str() {
                "extends" => match value.as_str() {
                    Some("builtin") => extends_builtin = true,
                    Some("none") => {}
                    _ => {
                        return Err(CatalogError::Syntax(format!(
                            "`extends` must be \"builtin\" or \"none\", got {value}"
                        )))
                    }
                },
                "rule" => {
                    let toml::Value::Array(items) = value else {
                        return Err(CatalogError::Syntax("`rule` must be an array of tables".into()));
                    };
                    raw_rules = items;
                }
                other => return Err(CatalogError::Syntax(format!("unknown top-level key `{other}`"))),
            }
        }

        let mut parsed = Vec::with_capacity(raw_rules.len());
        for (i, value) in raw_rules.into_iter().enumerate() {
            parsed.push(parse_rule(i + 1, value)?);
        }

        let rules = if extends_builtin {
            let overridden: BTreeSet<KuId> = parsed.iter().map(|r| r.id.ku).collect();
            let mut merged: Vec<CapabilityRule> = Self::builtin()
                .rules
                .into_iter()
                .filter(|r| !overridden.contains(&r.id.ku))
                .collect();
            merged.extend(parsed);
            merged
        } else {
            parsed
        };
        Self::from_rules(rules)
    }

    /// Validates and sorts `rules`.
    pub fn from_rules(mut rules: Vec<CapabilityRule>) -> Result<Self, CatalogError> {
        rules.sort_by_key(|r| r.id);
        for pair in rules.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(CatalogError::Validation(format!(
                    "capability {} is defined twice",
                    pair[0].id
                )));
            }
        }
        for rule in &rules {
            if rule.enabled && rule.patterns.is_empty() {
                return Err(CatalogError::Validation(format!(
                    "enabled capability {} has no pattern",
                    rule.id
                )));
            }
        }
        let covered: BTreeSet<KuId> = rules.iter().filter(|r| r.enabled).map(|r| r.id.ku).collect();
        let missing: Vec<String> = KuId::all()
            .filter(|k| !covered.contains(k))
            .map(|k| k.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(CatalogError::Validation(format!(
                "knowledge units without an enabled rule: {}",
                missing.join(", ")
            )));
        }
        Ok(CapabilityCatalog { rules })
    }

    pub fn rules(&self) -> &[CapabilityRule] {
        &self.rules
    }

    pub fn enabled_rules(&self) -> impl Iterator<Item = &CapabilityRule> {
        self.rules.iter().filter(|r| r.enabled)
    }

    pub fn rules_for(&self, ku: KuId) -> impl Iterator<Item = &CapabilityRule> {
        self.rules.iter().filter(move |r| r.id.ku == ku)
    }

    pub fn rule(&self, id: CapabilityId) -> Option<&CapabilityRule> {
        self.rules
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.rules[i])
    }

    /// Complete, self-contained TOML rendering (never uses `extends`).
    pub fn to_toml_string(&self) -> String {
        let raw: Vec<RawRule> = self.rules.iter().map(CapabilityRule::to_raw).collect();
        toml::to_string(&RawCatalogOut { rule: &raw }).expect("catalog serializes")
    }

    /// Hex SHA-256 of the canonical rendering; keys detection caches.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    /// Number of enabled rules per knowledge unit.
    pub fn coverage(&self) -> BTreeMap<KuId, usize> {
        let mut out: BTreeMap<KuId, usize> = KuId::all().map(|k| (k, 0)).collect();
        for r in self.enabled_rules() {
            *out.entry(r.id.ku).or_default() += 1;
        }
        out
    }
}

fn rule_label(value: &toml::Value) -> String {
    let ku = value.get("ku").and_then(toml::Value::as_integer);
    let cap = value.get("capability").and_then(toml::Value::as_integer);
    match (ku, cap) {
        (Some(k), Some(c)) => format!("K{k}.C{c}"),
        (Some(k), None) => format!("K{k}.C?"),
        _ => "unidentified".to_owned(),
    }
}

fn parse_rule(position: usize, value: toml::Value) -> Result<CapabilityRule, CatalogError> {
    let label = rule_label(&value);
    let fail = |message: String| CatalogError::Rule {
        position,
        label: label.clone(),
        message,
    };
    let raw: RawRule = value
        .try_into()
        .map_err(|e: toml::de::Error| fail(e.message().to_owned()))?;
    let ku = KuId::try_from(raw.ku).map_err(|e| fail(e.to_string()))?;
    let cap_index = u16::try_from(raw.capability)
        .ok()
        .filter(|c| *c >= 1)
        .ok_or_else(|| fail(format!("capability index {} must be >= 1", raw.capability)))?;
    Ok(CapabilityRule {
        id: CapabilityId::new(ku, cap_index),
        description: raw.description,
        patterns: raw.patterns,
        enabled: raw.enabled,
    })
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        match s.as_ref().and_then(|v| v.as_str()) {
            Some(name) => f.write_str(name),
            None => write!(f, "{self:?}"),
        }
    }
}
