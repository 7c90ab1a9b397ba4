//! Java parsing and knowledge-unit detection.
//!
//! A file is parsed into a concrete syntax tree, flattened into a list of
//! [`Candidate`] nodes tagged with catalog [`NodeKind`]s, and every enabled
//! catalog rule is evaluated against those candidates. A capability counts
//! each distinct syntax node at most once, however many of its patterns match.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use tree_sitter::{Node, Parser, Tree};

use crate::catalog::{AstPattern, CapabilityCatalog, ImportPrefix, NodeKind};
use crate::ku::{CapabilityId, KuVector};

/// Input that cannot be treated as Java source at all.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unparseable input at byte {offset}: {reason}")]
pub struct ParseError {
    pub offset: usize,
    pub reason: String,
}

/// A parsed compilation unit. Localized syntax errors are kept as error nodes.
pub struct SyntaxTree {
    source: String,
    tree: Tree,
}

impl std::fmt::Debug for SyntaxTree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SyntaxTree")
            .field("bytes", &self.source.len())
            .field("type_declarations", &self.type_declaration_count())
            .field("error_nodes", &self.error_node_count())
            .finish()
    }
}

const TYPE_DECLARATIONS: [&str; 5] = [
    "class_declaration",
    "interface_declaration",
    "enum_declaration",
    "record_declaration",
    "annotation_type_declaration",
];

impl SyntaxTree {
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of top-level type declarations.
    pub fn type_declaration_count(&self) -> usize {
        let root = self.tree.root_node();
        let mut cursor = root.walk();
        let count = root
            .named_children(&mut cursor)
            .filter(|n| TYPE_DECLARATIONS.contains(&n.kind()))
            .count();
        count
    }

    /// Number of `ERROR` and `MISSING` nodes produced by error recovery.
    pub fn error_node_count(&self) -> usize {
        let mut count = 0;
        let mut stack = vec![self.tree.root_node()];
        while let Some(node) = stack.pop() {
            if node.is_error() || node.is_missing() {
                count += 1;
            }
            if node.has_error() {
                let mut cursor = node.walk();
                stack.extend(node.children(&mut cursor));
            }
        }
        count
    }

    pub fn has_errors(&self) -> bool {
        self.tree.root_node().has_error()
    }

    fn root(&self) -> Node<'_> {
        self.tree.root_node()
    }
}

thread_local! {
    static PARSER: RefCell<Parser> = RefCell::new({
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_java::LANGUAGE.into())
            .expect("bundled Java grammar is compatible");
        parser
    });
}

/// Parses Java source. Binary content (NUL bytes or invalid UTF-8) is rejected.
pub fn parse_java(source: impl AsRef<[u8]>) -> Result<SyntaxTree, ParseError> {
    let bytes = source.as_ref();
    if let Some(offset) = bytes.iter().position(|&b| b == 0) {
        return Err(ParseError {
            offset,
            reason: "NUL byte in source".into(),
        });
    }
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError {
        offset: e.valid_up_to(),
        reason: "invalid UTF-8".into(),
    })?;
    let tree = PARSER
        .with(|p| p.borrow_mut().parse(text, None))
        .ok_or_else(|| ParseError {
            offset: 0,
            reason: "parser gave up".into(),
        })?;
    Ok(SyntaxTree {
        source: text.to_owned(),
        tree,
    })
}

/// Match counts per capability. Only capabilities with at least one hit are stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CapabilityHits(BTreeMap<CapabilityId, u64>);

/// Serialized as a map keyed by `K8.C2`-style names.
impl Serialize for CapabilityHits {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_map(self.0.iter().map(|(k, v)| (k.to_string(), v)))
    }
}

impl CapabilityHits {
    pub fn get(&self, id: CapabilityId) -> u64 {
        self.0.get(&id).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (CapabilityId, u64)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sums hits per knowledge unit.
    pub fn to_ku_vector(&self) -> KuVector {
        let mut v = KuVector::zero();
        for (id, n) in &self.0 {
            v.add_to(id.ku, *n);
        }
        v
    }
}

/// Runs every enabled rule of `catalog` over `tree`.
pub fn detect_capabilities(tree: &SyntaxTree, catalog: &CapabilityCatalog) -> CapabilityHits {
    let src = tree.source().as_bytes();
    let facts = FileFacts::collect(tree.root(), src);
    let mut hits = BTreeMap::new();
    for rule in catalog.enabled_rules() {
        let mut nodes: BTreeSet<usize> = BTreeSet::new();
        for pattern in &rule.patterns {
            for cand in facts.by_kind(pattern.node_kind) {
                if pattern_matches(pattern, cand, &facts.imports) {
                    nodes.insert(cand.node_id);
                }
            }
        }
        if !nodes.is_empty() {
            hits.insert(rule.id, nodes.len() as u64);
        }
    }
    CapabilityHits(hits)
}

/// Parses `source` and returns its knowledge-unit vector.
pub fn detect_kus(source: impl AsRef<[u8]>, catalog: &CapabilityCatalog) -> Result<KuVector, ParseError> {
    let tree = parse_java(source)?;
    Ok(detect_capabilities(&tree, catalog).to_ku_vector())
}

fn pattern_matches(pattern: &AstPattern, cand: &Candidate, imports: &ImportTable) -> bool {
    if let Some(name) = &pattern.name {
        if !name.matches(&cand.simple, &cand.qualified) {
            return false;
        }
    }
    if let Some(keyword) = &pattern.keyword {
        if !keyword.matches(cand.keywords.iter().map(String::as_str)) {
            return false;
        }
    }
    if let Some(prefix) = &pattern.import_prefix {
        if !imports.resolves(prefix, cand.type_name.as_deref(), cand.package_qualified.as_deref()) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone)]
struct Import {
    path: String,
    wildcard: bool,
}

/// Imports of one compilation unit.
#[derive(Debug, Clone, Default)]
pub struct ImportTable {
    imports: Vec<Import>,
    single: HashMap<String, String>,
}

impl ImportTable {
    fn push(&mut self, path: String, wildcard: bool) {
        if !wildcard {
            if let Some(last) = path.rsplit('.').next() {
                self.single.insert(last.to_owned(), path.clone());
            }
        }
        self.imports.push(Import { path, wildcard });
    }

    pub fn is_empty(&self) -> bool {
        self.imports.is_empty()
    }

    pub fn paths(&self) -> impl Iterator<Item = (&str, bool)> {
        self.imports.iter().map(|i| (i.path.as_str(), i.wildcard))
    }

    /// Whether a name resolves into one of `prefix`'s packages.
    ///
    /// `type_name` is the simple type the name refers to, when known;
    /// `package_qualified` is set when the source spells the full package.
    pub fn resolves(&self, prefix: &ImportPrefix, type_name: Option<&str>, package_qualified: Option<&str>) -> bool {
        if let Some(fq) = package_qualified {
            return prefix.covers(fq);
        }
        if self.imports.is_empty() {
            return true;
        }
        if let Some(simple) = type_name {
            if let Some(path) = self.single.get(simple) {
                return prefix.covers(path);
            }
        }
        if prefix.includes_java_lang() {
            return true;
        }
        self.imports.iter().any(|i| prefix.covers(&i.path))
    }
}

/// One syntax node viewed as an instance of a catalog node kind.
#[derive(Debug, Clone)]
struct Candidate {
    node_id: usize,
    simple: String,
    qualified: String,
    keywords: Vec<String>,
    /// Simple type name to resolve through imports.
    type_name: Option<String>,
    /// Fully package-qualified spelling, when written that way in source.
    package_qualified: Option<String>,
}

struct FileFacts {
    imports: ImportTable,
    candidates: HashMap<NodeKind, Vec<Candidate>>,
}

const EMPTY: &[Candidate] = &[];

const PRIMITIVES: [&str; 8] = ["int", "long", "short", "byte", "char", "float", "double", "boolean"];

const STREAM_FACTORIES: [&str; 4] = ["Stream", "IntStream", "LongStream", "DoubleStream"];

const STREAM_SOURCES: [&str; 4] = ["stream", "parallelStream", "chars", "codePoints"];

const STREAM_TERMINALS: [&str; 20] = [
    "collect",
    "forEach",
    "forEachOrdered",
    "reduce",
    "count",
    "min",
    "max",
    "sum",
    "average",
    "findFirst",
    "findAny",
    "anyMatch",
    "allMatch",
    "noneMatch",
    "toArray",
    "toList",
    "summaryStatistics",
    "iterator",
    "spliterator",
    "close",
];

impl FileFacts {
    fn by_kind(&self, kind: NodeKind) -> &[Candidate] {
        self.candidates.get(&kind).map(Vec::as_slice).unwrap_or(EMPTY)
    }

    fn collect(root: Node<'_>, src: &[u8]) -> FileFacts {
        let mut facts = FileFacts {
            imports: ImportTable::default(),
            candidates: HashMap::new(),
        };
        // (node, number of enclosing type bodies)
        let mut stack: Vec<(Node<'_>, u32)> = vec![(root, 0)];
        while let Some((node, depth)) = stack.pop() {
            let child_depth = facts.visit(node, depth, src);
            let mut cursor = node.walk();
            let skip_type_children = node.kind() == "scoped_type_identifier";
            let children: Vec<Node<'_>> = node.named_children(&mut cursor).collect();
            for child in children.into_iter().rev() {
                if skip_type_children && matches!(child.kind(), "type_identifier" | "scoped_type_identifier") {
                    continue;
                }
                stack.push((child, child_depth));
            }
        }
        facts
    }

    fn push(
        &mut self,
        kind: NodeKind,
        node: Node<'_>,
        simple: impl Into<String>,
        qualified: impl Into<String>,
    ) -> &mut Candidate {
        let list = self.candidates.entry(kind).or_default();
        list.push(Candidate {
            node_id: node.id(),
            simple: simple.into(),
            qualified: qualified.into(),
            keywords: Vec::new(),
            type_name: None,
            package_qualified: None,
        });
        list.last_mut().expect("just pushed")
    }

    fn push_plain(&mut self, kind: NodeKind, node: Node<'_>) -> &mut Candidate {
        self.push(kind, node, node.kind(), node.kind())
    }

    fn push_type(&mut self, kind: NodeKind, node: Node<'_>, type_node: Node<'_>, src: &[u8]) -> &mut Candidate {
        let (simple, qualified) = type_names(type_node, src);
        let pq = package_qualified(&qualified);
        let cand = self.push(kind, node, simple.clone(), qualified);
        cand.type_name = Some(simple);
        cand.package_qualified = pq;
        cand
    }

    /// Records candidates for `node` and returns the nesting depth for its children.
    fn visit(&mut self, node: Node<'_>, depth: u32, src: &[u8]) -> u32 {
        use NodeKind as K;
        match node.kind() {
            "import_declaration" => {
                let mut cursor = node.walk();
                let mut path = String::new();
                let mut wildcard = false;
                for child in node.children(&mut cursor) {
                    match child.kind() {
                        "scoped_identifier" | "identifier" => path = compact(text(child, src)),
                        "asterisk" => wildcard = true,
                        _ => {}
                    }
                }
                if !path.is_empty() {
                    let simple = path.rsplit('.').next().unwrap_or_default().to_owned();
                    self.push(K::ImportDeclaration, node, simple, path.clone());
                    self.imports.push(path, wildcard);
                }
                depth
            }
            "class_declaration" | "interface_declaration" | "enum_declaration" | "record_declaration" => {
                let kind = match node.kind() {
                    "class_declaration" => K::ClassDeclaration,
                    "interface_declaration" => K::InterfaceDeclaration,
                    "enum_declaration" => K::EnumDeclaration,
                    _ => K::RecordDeclaration,
                };
                let name = field_text(node, "name", src);
                let keywords = modifier_keywords(node, src);
                self.push(kind, node, name.clone(), name.clone()).keywords = keywords.clone();
                if depth > 0 {
                    self.push(K::NestedClassDeclaration, node, name.clone(), name.clone())
                        .keywords = keywords.clone();
                }
                if let Some(tp) = node.child_by_field_name("type_parameters") {
                    self.push_plain(K::TypeParameters, tp);
                }
                if let Some(sc) = node.child_by_field_name("superclass") {
                    if let Some(ty) = sc.named_child(0) {
                        self.push_type(K::Superclass, sc, ty, src);
                    }
                }
                self.super_interfaces(node, src);
                if node.kind() == "class_declaration" {
                    self.class_shape(node, &name, &keywords, src);
                }
                self.overloads(node, src);
                depth + 1
            }
            "object_creation_expression" => {
                if let Some(ty) = node.child_by_field_name("type") {
                    self.push_type(K::ObjectCreation, node, ty, src);
                    let anonymous = {
                        let mut cursor = node.walk();
                        let found = node.named_children(&mut cursor).any(|c| c.kind() == "class_body");
                        found
                    };
                    if anonymous {
                        self.push_type(K::AnonymousClass, node, ty, src);
                        return depth + 1;
                    }
                }
                depth
            }
            "method_declaration" => {
                let name = field_text(node, "name", src);
                let mut keywords = modifier_keywords(node, src);
                let mut cursor = node.walk();
                for child in node.children(&mut cursor) {
                    if matches!(child.kind(), "annotation" | "marker_annotation") {
                        keywords.push(format!("@{}", annotation_names(child, src).0));
                    }
                }
                self.push(K::MethodDeclaration, node, name.clone(), name).keywords = keywords;
                if let Some(tp) = node.child_by_field_name("type_parameters") {
                    self.push_plain(K::TypeParameters, tp);
                }
                depth
            }
            "constructor_declaration" => {
                let name = field_text(node, "name", src);
                let keywords = modifier_keywords(node, src);
                self.push(K::ConstructorDeclaration, node, name.clone(), name).keywords = keywords;
                depth
            }
            "throws" => {
                self.push_plain(K::ThrowsClause, node);
                depth
            }
            "field_declaration" | "local_variable_declaration" => {
                let kind = if node.kind() == "field_declaration" {
                    K::FieldDeclaration
                } else {
                    K::LocalVariableDeclaration
                };
                let keywords = modifier_keywords(node, src);
                if let Some(ty) = node.child_by_field_name("type") {
                    self.push_type(kind, node, ty, src).keywords = keywords;
                    self.polymorphic(node, ty, src);
                } else {
                    self.push_plain(kind, node).keywords = keywords;
                }
                depth
            }
            "formal_parameter" => {
                let keywords = modifier_keywords(node, src);
                match node.child_by_field_name("type") {
                    Some(ty) => self.push_type(K::FormalParameter, node, ty, src).keywords = keywords,
                    None => self.push_plain(K::FormalParameter, node).keywords = keywords,
                }
                depth
            }
            "spread_parameter" => {
                let keywords = modifier_keywords(node, src);
                self.push_plain(K::VarargsParameter, node).keywords = keywords;
                depth
            }
            "static_initializer" => {
                self.push_plain(K::StaticInitializer, node);
                depth
            }
            "type_identifier" => {
                let t = text(node, src).to_owned();
                let cand = self.push(K::TypeReference, node, t.clone(), t.clone());
                cand.type_name = Some(t);
                depth
            }
            "scoped_type_identifier" => {
                self.push_type(K::TypeReference, node, node, src);
                depth
            }
            "generic_type" => {
                self.push_type(K::GenericType, node, node, src);
                depth
            }
            "array_type" => {
                let dims = node
                    .child_by_field_name("dimensions")
                    .map(|d| count_brackets(d, src))
                    .unwrap_or(1);
                let kind = if dims >= 2 {
                    K::MultiDimensionalArrayType
                } else {
                    K::ArrayType
                };
                match node.child_by_field_name("element") {
                    Some(el) => self.push_type(kind, node, el, src),
                    None => self.push_plain(kind, node),
                };
                depth
            }
            "array_creation_expression" => {
                let mut cursor = node.walk();
                let mut dims = 0;
                for child in node.children(&mut cursor) {
                    match child.kind() {
                        "dimensions_expr" => dims += 1,
                        "dimensions" => dims += count_brackets(child, src),
                        _ => {}
                    }
                }
                let kind = if dims >= 2 {
                    K::MultiDimensionalArrayCreation
                } else {
                    K::ArrayCreation
                };
                match node.child_by_field_name("type") {
                    Some(ty) => self.push_type(kind, node, ty, src),
                    None => self.push_plain(kind, node),
                };
                depth
            }
            "array_initializer" => {
                let nested = node.parent().is_some_and(|p| p.kind() == "array_initializer");
                if !nested {
                    self.push_plain(K::ArrayInitializer, node);
                }
                depth
            }
            "array_access" => {
                self.push_plain(K::ArrayAccess, node);
                depth
            }
            "field_access" => {
                let field = field_text(node, "field", src);
                let qualified = compact(text(node, src));
                let receiver = node.child_by_field_name("object");
                let mut keywords = Vec::new();
                if let Some(obj) = receiver {
                    if matches!(obj.kind(), "super" | "this") {
                        keywords.push(obj.kind().to_owned());
                    }
                }
                let type_name = receiver.and_then(|o| leading_type_name(o, src));
                let cand = self.push(K::FieldAccess, node, field, qualified);
                cand.keywords = keywords;
                cand.type_name = type_name;
                depth
            }
            "if_statement" => self.plain(K::IfStatement, node, depth),
            "switch_expression" | "switch_statement" => self.plain(K::SwitchStatement, node, depth),
            "while_statement" => self.plain(K::WhileStatement, node, depth),
            "for_statement" => self.plain(K::ForStatement, node, depth),
            "enhanced_for_statement" => self.plain(K::EnhancedForStatement, node, depth),
            "do_statement" => self.plain(K::DoStatement, node, depth),
            "break_statement" => self.plain(K::BreakStatement, node, depth),
            "continue_statement" => self.plain(K::ContinueStatement, node, depth),
            "return_statement" => self.plain(K::ReturnStatement, node, depth),
            "try_statement" => self.plain(K::TryStatement, node, depth),
            "try_with_resources_statement" => self.plain(K::TryWithResourcesStatement, node, depth),
            "catch_clause" => self.plain(K::CatchClause, node, depth),
            "finally_clause" => self.plain(K::FinallyClause, node, depth),
            "throw_statement" => self.plain(K::ThrowStatement, node, depth),
            "assert_statement" => self.plain(K::AssertStatement, node, depth),
            "synchronized_statement" => self.plain(K::SynchronizedStatement, node, depth),
            "ternary_expression" => self.plain(K::TernaryExpression, node, depth),
            "lambda_expression" => self.plain(K::LambdaExpression, node, depth),
            "method_reference" => self.plain(K::MethodReference, node, depth),
            "instanceof_expression" => {
                match node.child_by_field_name("right") {
                    Some(ty) => self.push_type(K::InstanceofExpression, node, ty, src),
                    None => self.push_plain(K::InstanceofExpression, node),
                };
                depth
            }
            "explicit_constructor_invocation" => {
                let ctor = node
                    .child_by_field_name("constructor")
                    .map(|c| c.kind().to_owned())
                    .unwrap_or_default();
                self.push(K::ExplicitConstructorInvocation, node, ctor.clone(), ctor.clone())
                    .keywords = vec![ctor.clone()];
                depth
            }
            "binary_expression" | "assignment_expression" | "unary_expression" => {
                let kind = match node.kind() {
                    "binary_expression" => K::BinaryExpression,
                    "assignment_expression" => K::AssignmentExpression,
                    _ => K::UnaryExpression,
                };
                let op = node
                    .child_by_field_name("operator")
                    .map(|o| o.kind().to_owned())
                    .unwrap_or_default();
                self.push(kind, node, op.clone(), op.clone()).keywords = vec![op.clone()];
                depth
            }
            "update_expression" => {
                let mut cursor = node.walk();
                let ops: Vec<String> = node
                    .children(&mut cursor)
                    .filter(|c| !c.is_named())
                    .map(|c| c.kind().to_owned())
                    .collect();
                let op = ops.first().cloned().unwrap_or_default();
                self.push(K::UpdateExpression, node, op.clone(), op).keywords = ops;
                depth
            }
            "cast_expression" => {
                match node.child_by_field_name("type") {
                    Some(ty) => self.push_type(K::CastExpression, node, ty, src),
                    None => self.push_plain(K::CastExpression, node),
                };
                depth
            }
            "annotation" | "marker_annotation" => {
                let (simple, qualified) = annotation_names(node, src);
                let pq = package_qualified(&qualified);
                let cand = self.push(K::Annotation, node, simple.clone(), qualified);
                cand.type_name = Some(simple);
                cand.package_qualified = pq;
                depth
            }
            "method_invocation" => {
                self.invocation(node, src);
                depth
            }
            _ => depth,
        }
    }

    fn plain(&mut self, kind: NodeKind, node: Node<'_>, depth: u32) -> u32 {
        self.push_plain(kind, node);
        depth
    }

    fn invocation(&mut self, node: Node<'_>, src: &[u8]) {
        let name = field_text(node, "name", src);
        let receiver = node.child_by_field_name("object");
        let qualified = match receiver {
            Some(obj) => format!("{}.{}", compact(text(obj, src)), name),
            None => name.clone(),
        };
        let mut keywords = Vec::new();
        if let Some(obj) = receiver {
            if matches!(obj.kind(), "super" | "this") {
                keywords.push(obj.kind().to_owned());
            }
        }
        let type_name = receiver.and_then(|o| leading_type_name(o, src));
        let on_stream = receiver.is_some_and(|o| is_stream(o, src));
        let cand = self.push(NodeKind::MethodInvocation, node, name.clone(), qualified.clone());
        cand.keywords = keywords.clone();
        cand.type_name = type_name.clone();
        if on_stream {
            let cand = self.push(NodeKind::StreamOperation, node, name, qualified);
            cand.keywords = keywords;
            cand.type_name = type_name;
        }
    }

    fn super_interfaces(&mut self, decl: Node<'_>, src: &[u8]) {
        let mut cursor = decl.walk();
        let holders: Vec<Node<'_>> = decl
            .named_children(&mut cursor)
            .filter(|c| matches!(c.kind(), "super_interfaces" | "extends_interfaces"))
            .collect();
        for holder in holders {
            let mut c2 = holder.walk();
            let lists: Vec<Node<'_>> = holder.named_children(&mut c2).collect();
            for list in lists {
                let mut c3 = list.walk();
                let types: Vec<Node<'_>> = list.named_children(&mut c3).collect();
                for ty in types {
                    self.push_type(NodeKind::SuperInterface, ty, ty, src);
                }
            }
        }
    }

    /// Methods (and constructors) sharing a name with a sibling in the same body.
    fn overloads(&mut self, decl: Node<'_>, src: &[u8]) {
        let Some(body) = decl.child_by_field_name("body") else {
            return;
        };
        let mut methods: BTreeMap<String, Vec<Node<'_>>> = BTreeMap::new();
        let mut ctors: Vec<Node<'_>> = Vec::new();
        let mut cursor = body.walk();
        for member in body.named_children(&mut cursor) {
            match member.kind() {
                "method_declaration" => methods.entry(field_text(member, "name", src)).or_default().push(member),
                "constructor_declaration" => ctors.push(member),
                "enum_body_declarations" => {
                    let mut c2 = member.walk();
                    for inner in member.named_children(&mut c2) {
                        match inner.kind() {
                            "method_declaration" => {
                                methods.entry(field_text(inner, "name", src)).or_default().push(inner)
                            }
                            "constructor_declaration" => ctors.push(inner),
                            _ => {}
                        }
                    }
                }
                _ => {}
            }
        }
        for (name, group) in methods {
            if group.len() >= 2 {
                for m in group {
                    self.push(NodeKind::OverloadedMethod, m, name.clone(), name.clone());
                }
            }
        }
        if ctors.len() >= 2 {
            for c in ctors {
                let name = field_text(c, "name", src);
                self.push(NodeKind::OverloadedConstructor, c, name.clone(), name);
            }
        }
    }

    /// Singleton and immutable-class shapes of a class declaration.
    fn class_shape(&mut self, decl: Node<'_>, name: &str, class_keywords: &[String], src: &[u8]) {
        let Some(body) = decl.child_by_field_name("body") else {
            return;
        };
        let mut instance_fields = 0;
        let mut all_private_final = true;
        let mut has_setter = false;
        let mut private_ctor = false;
        let mut public_ctor = false;
        let mut static_self_field = false;
        let mut static_self_method = false;

        let mut cursor = body.walk();
        for member in body.named_children(&mut cursor) {
            let mods = modifier_keywords(member, src);
            let has = |k: &str| mods.iter().any(|m| m == k);
            match member.kind() {
                "field_declaration" => {
                    let ty = member
                        .child_by_field_name("type")
                        .map(|t| type_names(t, src).0)
                        .unwrap_or_default();
                    if has("static") {
                        static_self_field |= ty == name;
                    } else {
                        instance_fields += 1;
                        all_private_final &= has("private") && has("final");
                    }
                }
                "method_declaration" => {
                    let mname = field_text(member, "name", src);
                    has_setter |= mname.starts_with("set");
                    let ret = member
                        .child_by_field_name("type")
                        .map(|t| type_names(t, src).0)
                        .unwrap_or_default();
                    static_self_method |= has("static") && ret == name;
                }
                "constructor_declaration" => {
                    if has("private") {
                        private_ctor = true;
                    } else {
                        public_ctor = true;
                    }
                }
                _ => {}
            }
        }

        let is_final = class_keywords.iter().any(|k| k == "final");
        if is_final && instance_fields > 0 && all_private_final && !has_setter {
            self.push(NodeKind::ImmutableClass, decl, name, name);
        }
        if private_ctor && !public_ctor && static_self_field && static_self_method {
            self.push(NodeKind::SingletonClass, decl, name, name);
        }
    }

    /// `Base x = new Derived()` declarators.
    fn polymorphic(&mut self, decl: Node<'_>, declared: Node<'_>, src: &[u8]) {
        let (declared_name, _) = type_names(declared, src);
        if declared_name == "var" || PRIMITIVES.contains(&declared_name.as_str()) {
            return;
        }
        let mut cursor = decl.walk();
        let declarators: Vec<Node<'_>> = decl.children_by_field_name("declarator", &mut cursor).collect();
        for d in declarators {
            let Some(value) = d.child_by_field_name("value") else {
                continue;
            };
            if value.kind() != "object_creation_expression" {
                continue;
            }
            let Some(ty) = value.child_by_field_name("type") else {
                continue;
            };
            let (created, _) = type_names(ty, src);
            if created != declared_name {
                self.push(NodeKind::PolymorphicAssignment, d, created, declared_name.clone());
            }
        }
    }
}

fn text<'a>(node: Node<'_>, src: &'a [u8]) -> &'a str {
    node.utf8_text(src).unwrap_or_default()
}

fn field_text(node: Node<'_>, field: &str, src: &[u8]) -> String {
    node.child_by_field_name(field)
        .map(|n| text(n, src).to_owned())
        .unwrap_or_default()
}

fn compact(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Drops type arguments and array brackets: `java.util.List<String>[]` → `java.util.List`.
fn strip_type_decorations(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut depth = 0u32;
    for c in s.chars() {
        match c {
            '<' => depth += 1,
            '>' => depth = depth.saturating_sub(1),
            '[' | ']' => {}
            c if c.is_whitespace() => {}
            c if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

/// `(simple, qualified)` names of a type node.
fn type_names(node: Node<'_>, src: &[u8]) -> (String, String) {
    let target = match node.kind() {
        "array_type" => node.child_by_field_name("element").unwrap_or(node),
        _ => node,
    };
    let qualified = strip_type_decorations(text(target, src));
    let qualified = strip_annotations(&qualified);
    let simple = qualified.rsplit('.').next().unwrap_or_default().to_owned();
    (simple, qualified)
}

fn strip_annotations(s: &str) -> String {
    if !s.contains('@') {
        return s.to_owned();
    }
    s.split('.')
        .filter(|seg| !seg.starts_with('@'))
        .collect::<Vec<_>>()
        .join(".")
}

/// Package-qualified spelling such as `java.util.List`; a lowercase first segment marks a package.
fn package_qualified(qualified: &str) -> Option<String> {
    let first = qualified.split('.').next()?;
    let lower = first.chars().next().is_some_and(|c| c.is_ascii_lowercase());
    (qualified.contains('.') && lower).then(|| qualified.to_owned())
}

fn annotation_names(node: Node<'_>, src: &[u8]) -> (String, String) {
    let qualified = node
        .child_by_field_name("name")
        .map(|n| compact(text(n, src)))
        .unwrap_or_default();
    let simple = qualified.rsplit('.').next().unwrap_or_default().to_owned();
    (simple, qualified)
}

/// Modifier tokens and `@Annotation` markers of a declaration.
fn modifier_keywords(node: Node<'_>, src: &[u8]) -> Vec<String> {
    let mut out = Vec::new();
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if child.kind() != "modifiers" {
            continue;
        }
        let mut c2 = child.walk();
        for m in child.children(&mut c2) {
            match m.kind() {
                "annotation" | "marker_annotation" => out.push(format!("@{}", annotation_names(m, src).0)),
                _ if !m.is_named() => out.push(m.kind().to_owned()),
                _ => {}
            }
        }
    }
    out
}

fn count_brackets(node: Node<'_>, src: &[u8]) -> usize {
    text(node, src).matches('[').count()
}

/// Capitalised leading identifier of a receiver (`Files` in `Files.copy`).
fn leading_type_name(receiver: Node<'_>, src: &[u8]) -> Option<String> {
    let t = compact(text(receiver, src));
    let first = t.split(['.', '(', '<']).next()?;
    let capital = first.chars().next().is_some_and(|c| c.is_ascii_uppercase());
    (capital && first.chars().all(|c| c.is_alphanumeric() || c == '_')).then(|| first.to_owned())
}

/// Whether an expression evaluates to a stream, judged syntactically.
fn is_stream(expr: Node<'_>, src: &[u8]) -> bool {
    let mut current = expr;
    loop {
        if current.kind() != "method_invocation" {
            return false;
        }
        let name = field_text(current, "name", src);
        let receiver = current.child_by_field_name("object");
        if STREAM_SOURCES.contains(&name.as_str()) {
            return true;
        }
        if let Some(obj) = receiver {
            // Qualified receivers such as `java.util.stream.Stream` match by simple name.
            let obj_text = text(obj, src).rsplit('.').next().unwrap_or_default();
            if STREAM_FACTORIES.contains(&obj_text) || (obj_text == "Arrays" && name == "stream") {
                return true;
            }
        }
        if STREAM_TERMINALS.contains(&name.as_str()) {
            return false;
        }
        match receiver {
            Some(obj) => current = obj,
            None => return false,
        }
    }
}
