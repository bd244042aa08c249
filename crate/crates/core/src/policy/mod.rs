//! Threshold access-policy trees.
//!
//! Policies are written as a postfix token stream. Each token is either an
//! attribute (`department:cs`) or a gate `KofN`, which pops the last `N`
//! operands and requires at least `K` of them. `and` and `or` are accepted as
//! sugar for `2of2` and `1of2`. For example
//! `designation:professor department:cs file-type:pdf 3of3` requires all three
//! attributes.

pub mod oracle;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub const DEFAULT_MAX_DEPTH: usize = 32;
pub const DEFAULT_MAX_LEAVES: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("policy is empty")]
    EmptyPolicy,
    #[error("arity error: {0}")]
    ArityError(String),
    #[error("bad token {token:?}: {reason}")]
    BadToken { token: String, reason: &'static str },
    #[error("policy exceeds limit: {0}")]
    LimitExceeded(String),
}

/// A normalized attribute token.
///
/// Normalization trims surrounding whitespace and lowercases; the result must
/// match `[a-z0-9_\-:.]+` and must not collide with gate syntax.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttributeName(String);

impl AttributeName {
    pub fn new(raw: &str) -> Result<Self, PolicyError> {
        let token = raw.trim().to_ascii_lowercase();
        let bad = |reason| PolicyError::BadToken { token: raw.to_string(), reason };
        if token.is_empty() {
            return Err(bad("empty attribute"));
        }
        if !token
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'_' | b'-' | b':' | b'.'))
        {
            return Err(bad("attribute contains characters outside [a-z0-9_-:.]"));
        }
        if token == "and" || token == "or" || parse_gate(&token).is_some() {
            return Err(bad("attribute collides with gate syntax"));
        }
        Ok(Self(token))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for AttributeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for AttributeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for AttributeName {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl AsRef<str> for AttributeName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

pub type AttributeSet = BTreeSet<AttributeName>;

/// Parses a comma- or whitespace-separated attribute list. Duplicates collapse.
pub fn parse_attribute_list(text: &str) -> Result<AttributeSet, PolicyError> {
    text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(AttributeName::new).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyNode {
    Leaf(AttributeName),
    Gate { threshold: usize, children: Vec<PolicyNode> },
}

impl PolicyNode {
    pub fn leaf_count(&self) -> usize {
        match self {
            PolicyNode::Leaf(_) => 1,
            PolicyNode::Gate { children, .. } => children.iter().map(Self::leaf_count).sum(),
        }
    }

    /// Number of gate levels on the longest root-to-leaf path. A bare leaf
    /// has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            PolicyNode::Leaf(_) => 0,
            PolicyNode::Gate { children, .. } => 1 + children.iter().map(Self::depth).max().unwrap_or(0),
        }
    }

    fn write_postfix(&self, out: &mut String) {
        match self {
            PolicyNode::Leaf(a) => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(a.as_str());
            }
            PolicyNode::Gate { threshold, children } => {
                for c in children {
                    c.write_postfix(out);
                }
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&format!("{threshold}of{}", children.len()));
            }
        }
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a AttributeName>) {
        match self {
            PolicyNode::Leaf(a) => out.push(a),
            PolicyNode::Gate { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyLimits {
    pub max_depth: usize,
    pub max_leaves: usize,
}

impl Default for PolicyLimits {
    fn default() -> Self {
        Self { max_depth: DEFAULT_MAX_DEPTH, max_leaves: DEFAULT_MAX_LEAVES }
    }
}

/// A validated policy tree together with its canonical postfix text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTree {
    root: PolicyNode,
    source_text: String,
}

impl PolicyTree {
    /// Builds a tree from a node, validating gate arity and the default limits.
    pub fn from_root(root: PolicyNode) -> Result<Self, PolicyError> {
        Self::from_root_with_limits(root, PolicyLimits::default())
    }

    pub fn from_root_with_limits(root: PolicyNode, limits: PolicyLimits) -> Result<Self, PolicyError> {
        validate(&root)?;
        check_limits(&root, limits)?;
        let mut source_text = String::new();
        root.write_postfix(&mut source_text);
        Ok(Self { root, source_text })
    }

    pub fn root(&self) -> &PolicyNode {
        &self.root
    }

    /// Canonical postfix text.
    pub fn text(&self) -> &str {
        &self.source_text
    }

    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Leaves in left-to-right order. Ciphertext components follow this order.
    pub fn leaves(&self) -> Vec<&AttributeName> {
        let mut out = Vec::with_capacity(self.leaf_count());
        self.root.collect_leaves(&mut out);
        out
    }

    /// Distinct leaf attributes, sorted.
    pub fn vocabulary(&self) -> AttributeSet {
        self.leaves().into_iter().cloned().collect()
    }
}

impl fmt::Display for PolicyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text)
    }
}

impl std::str::FromStr for PolicyTree {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_policy(s)
    }
}

fn validate(node: &PolicyNode) -> Result<(), PolicyError> {
    if let PolicyNode::Gate { threshold, children } = node {
        if children.is_empty() {
            return Err(PolicyError::ArityError("gate without children".into()));
        }
        if *threshold == 0 || *threshold > children.len() {
            return Err(PolicyError::ArityError(format!("threshold {threshold} outside 1..={}", children.len())));
        }
        children.iter().try_for_each(validate)?;
    }
    Ok(())
}

fn check_limits(root: &PolicyNode, limits: PolicyLimits) -> Result<(), PolicyError> {
    let leaves = root.leaf_count();
    if leaves > limits.max_leaves {
        return Err(PolicyError::LimitExceeded(format!("{leaves} leaves > {}", limits.max_leaves)));
    }
    let depth = root.depth();
    if depth > limits.max_depth {
        return Err(PolicyError::LimitExceeded(format!("depth {depth} > {}", limits.max_depth)));
    }
    Ok(())
}

/// Recognizes `KofN` (digits only, both parts non-empty).
fn parse_gate(token: &str) -> Option<(usize, usize)> {
    let (k, n) = token.split_once("of")?;
    if k.is_empty() || n.is_empty() || !k.bytes().all(|b| b.is_ascii_digit()) || !n.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    // Absurdly long digit strings saturate and then fail the arity check.
    let k = k.parse().unwrap_or(usize::MAX);
    let n = n.parse().unwrap_or(usize::MAX);
    Some((k, n))
}

pub fn parse_policy(text: &str) -> Result<PolicyTree, PolicyError> {
    parse_policy_with_limits(text, PolicyLimits::default())
}

pub fn parse_policy_with_limits(text: &str, limits: PolicyLimits) -> Result<PolicyTree, PolicyError> {
    // (node, depth, leaves) so limits are enforced while parsing rather than
    // after building an arbitrarily large tree.
    let mut stack: Vec<(PolicyNode, usize, usize)> = Vec::new();
    let mut total_leaves = 0usize;

    for raw in text.split_whitespace() {
        let token = raw.to_ascii_lowercase();
        let gate = match token.as_str() {
            "and" => Some((2, 2)),
            "or" => Some((1, 2)),
            t => parse_gate(t),
        };
        match gate {
            Some((k, n)) => {
                if n == 0 || k == 0 || k > n {
                    return Err(PolicyError::ArityError(format!("gate {raw}: need 1 <= K <= N")));
                }
                if n > stack.len() {
                    return Err(PolicyError::ArityError(format!(
                        "gate {raw} needs {n} operands, {} available",
                        stack.len()
                    )));
                }
                let operands = stack.split_off(stack.len() - n);
                let depth = 1 + operands.iter().map(|(_, d, _)| *d).max().unwrap_or(0);
                if depth > limits.max_depth {
                    return Err(PolicyError::LimitExceeded(format!("depth {depth} > {}", limits.max_depth)));
                }
                let leaves = operands.iter().map(|(_, _, l)| *l).sum();
                let children = operands.into_iter().map(|(node, _, _)| node).collect();
                stack.push((PolicyNode::Gate { threshold: k, children }, depth, leaves));
            }
            None => {
                let attr = AttributeName::new(&token)?;
                total_leaves += 1;
                if total_leaves > limits.max_leaves {
                    return Err(PolicyError::LimitExceeded(format!("more than {} leaves", limits.max_leaves)));
                }
                stack.push((PolicyNode::Leaf(attr), 0, 1));
            }
        }
    }

    match stack.len() {
        0 => Err(PolicyError::EmptyPolicy),
        1 => {
            let (root, _, _) = stack.pop().expect("len checked");
            let mut source_text = String::new();
            root.write_postfix(&mut source_text);
            Ok(PolicyTree { root, source_text })
        }
        n => Err(PolicyError::ArityError(format!("{n} operands left on the stack"))),
    }
}

pub fn format_policy(tree: &PolicyTree) -> String {
    let mut out = String::new();
    tree.root.write_postfix(&mut out);
    out
}

/// Satisfied subtree with the children chosen to reconstruct each gate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    /// Index into [`PolicyTree::leaves`].
    Leaf { leaf_index: usize },
    /// `(child index, child selection)` pairs, exactly `threshold` of them,
    /// in ascending child order.
    Gate { children: Vec<(usize, Selection)> },
}

impl Selection {
    /// Selected leaf indices, left to right.
    pub fn leaf_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk_leaves(&mut out);
        out
    }

    fn walk_leaves(&self, out: &mut Vec<usize>) {
        match self {
            Selection::Leaf { leaf_index } => out.push(*leaf_index),
            Selection::Gate { children } => children.iter().for_each(|(_, s)| s.walk_leaves(out)),
        }
    }

    /// Chosen child indices of every selected gate, in pre-order.
    pub fn gate_choices(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.walk_gates(&mut out);
        out
    }

    fn walk_gates(&self, out: &mut Vec<Vec<usize>>) {
        if let Selection::Gate { children } = self {
            out.push(children.iter().map(|(i, _)| *i).collect());
            children.iter().for_each(|(_, s)| s.walk_gates(out));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Satisfaction {
    pub selection: Option<Selection>,
}

impl Satisfaction {
    pub fn is_satisfied(&self) -> bool {
        self.selection.is_some()
    }
}

/// Evaluates `tree` against `attrs`. When satisfied, every gate on the
/// selected path picks its lowest-indexed satisfied children.
pub fn satisfies(tree: &PolicyTree, attrs: &AttributeSet) -> Satisfaction {
    let mut next_leaf = 0;
    Satisfaction { selection: select(&tree.root, attrs, &mut next_leaf) }
}

fn select(node: &PolicyNode, attrs: &AttributeSet, next_leaf: &mut usize) -> Option<Selection> {
    match node {
        PolicyNode::Leaf(a) => {
            let leaf_index = *next_leaf;
            *next_leaf += 1;
            attrs.contains(a).then_some(Selection::Leaf { leaf_index })
        }
        PolicyNode::Gate { threshold, children } => {
            // Every child is visited so leaf numbering stays aligned.
            let mut chosen = Vec::with_capacity(*threshold);
            for (i, child) in children.iter().enumerate() {
                let sel = select(child, attrs, next_leaf);
                if let Some(sel) = sel {
                    if chosen.len() < *threshold {
                        chosen.push((i, sel));
                    }
                }
            }
            (chosen.len() == *threshold).then_some(Selection::Gate { children: chosen })
        }
    }
}
