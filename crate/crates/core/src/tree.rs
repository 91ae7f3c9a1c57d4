//! Labeled ordered trees and their parenthetical notation.
//!
//! A tree is written either as a bare label (`X`) or as
//! `(LABEL child child ...)`, e.g. `(A (B W1) (C (D W2) (E W3)))`.
//! Labels are case-sensitive tokens without whitespace or parentheses.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Default upper bound on the number of nodes accepted by the parser.
pub const DEFAULT_MAX_NODES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("empty label")]
    Empty,
    #[error("label {0:?} contains whitespace or parentheses")]
    InvalidChar(String),
}

/// A node label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(String);

impl Label {
    pub fn new(text: impl Into<String>) -> Result<Self, LabelError> {
        let text = text.into();
        if text.is_empty() {
            return Err(LabelError::Empty);
        }
        if text.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
            return Err(LabelError::InvalidChar(text));
        }
        Ok(Label(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Label {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    UnbalancedParentheses,
    EmptyLabel,
    TrailingInput,
    TooManyNodes(usize),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyInput => f.write_str("empty input"),
            ParseErrorKind::UnbalancedParentheses => f.write_str("unbalanced parentheses"),
            ParseErrorKind::EmptyLabel => f.write_str("empty label"),
            ParseErrorKind::TrailingInput => f.write_str("trailing input after the root expression"),
            ParseErrorKind::TooManyNodes(max) => write!(f, "tree exceeds the {max}-node guard"),
        }
    }
}

/// A parse failure with the character offset at which it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at character {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

/// A labeled ordered tree. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tree {
    label: Label,
    children: Vec<Tree>,
}

/// A grammar rule read off a non-terminal node: its label and the ordered
/// labels of all its children.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Production {
    pub parent: Label,
    pub children: Vec<Label>,
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ->", self.parent)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        Ok(())
    }
}

impl Tree {
    pub fn leaf(label: Label) -> Self {
        Tree { label, children: Vec::new() }
    }

    pub fn node(label: Label, children: Vec<Tree>) -> Self {
        Tree { label, children }
    }

    pub fn label(&self) -> &Label {
        &self.label
    }

    pub fn children(&self) -> &[Tree] {
        &self.children
    }

    pub fn is_terminal(&self) -> bool {
        self.children.is_empty()
    }

    /// True for a non-terminal whose children are all terminals.
    pub fn is_preterminal(&self) -> bool {
        !self.children.is_empty() && self.children.iter().all(Tree::is_terminal)
    }

    pub fn node_count(&self) -> usize {
        self.preorder().len()
    }

    /// Number of non-terminal nodes.
    pub fn internal_count(&self) -> usize {
        self.preorder().iter().filter(|n| !n.is_terminal()).count()
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(self, 1usize)];
        while let Some((n, d)) = stack.pop() {
            best = best.max(d);
            stack.extend(n.children.iter().map(|c| (c, d + 1)));
        }
        best
    }

    /// The production of this node, or `None` for a terminal.
    pub fn production(&self) -> Option<Production> {
        if self.is_terminal() {
            return None;
        }
        Some(Production {
            parent: self.label.clone(),
            children: self.children.iter().map(|c| c.label.clone()).collect(),
        })
    }

    /// Depth-first preorder visit, children left to right.
    pub fn preorder(&self) -> Vec<&Tree> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }

    /// One entry per non-terminal node, in preorder.
    pub fn productions(&self) -> Vec<(&Tree, Production)> {
        self.preorder()
            .into_iter()
            .filter_map(|n| n.production().map(|p| (n, p)))
            .collect()
    }

    /// Parenthetical notation with single spaces between siblings.
    pub fn serialize(&self) -> String {
        enum Step<'a> {
            Open(&'a Tree),
            Close,
        }
        let mut out = String::new();
        let mut stack = vec![Step::Open(self)];
        while let Some(step) = stack.pop() {
            match step {
                Step::Close => out.push(')'),
                Step::Open(n) => {
                    if !out.is_empty() && !out.ends_with('(') {
                        out.push(' ');
                    }
                    if n.is_terminal() {
                        out.push_str(n.label.as_str());
                    } else {
                        out.push('(');
                        out.push_str(n.label.as_str());
                        stack.push(Step::Close);
                        stack.extend(n.children.iter().rev().map(Step::Open));
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

impl FromStr for Tree {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_tree(s)
    }
}

/// Preorder-indexed view of a tree. Every child index is greater than its
/// parent's, so iterating indices in reverse visits children before parents.
#[derive(Debug)]
pub struct IndexedTree<'a> {
    pub nodes: Vec<&'a Tree>,
    pub children: Vec<Vec<usize>>,
}

impl<'a> IndexedTree<'a> {
    pub fn new(root: &'a Tree) -> Self {
        let mut nodes = Vec::new();
        let mut children: Vec<Vec<usize>> = Vec::new();
        // (node, parent index)
        let mut stack: Vec<(&Tree, Option<usize>)> = vec![(root, None)];
        while let Some((n, parent)) = stack.pop() {
            let idx = nodes.len();
            nodes.push(n);
            children.push(Vec::with_capacity(n.children.len()));
            if let Some(p) = parent {
                children[p].push(idx);
            }
            stack.extend(n.children.iter().rev().map(|c| (c, Some(idx))));
        }
        IndexedTree { nodes, children }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Parses a single tree with the default node guard.
pub fn parse_tree(text: &str) -> Result<Tree, ParseError> {
    parse_tree_with_limit(text, DEFAULT_MAX_NODES)
}

pub fn parse_tree_with_limit(text: &str, max_nodes: usize) -> Result<Tree, ParseError> {
    let chars: Vec<(usize, char)> = text.chars().enumerate().collect();
    let end = chars.len();
    let err = |kind, offset| Err(ParseError { kind, offset });

    let mut pos = 0;
    let skip_ws = |pos: &mut usize| {
        while *pos < end && chars[*pos].1.is_whitespace() {
            *pos += 1;
        }
    };
    let read_label = |pos: &mut usize| -> String {
        let start = *pos;
        while *pos < end {
            let c = chars[*pos].1;
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            *pos += 1;
        }
        chars[start..*pos].iter().map(|&(_, c)| c).collect()
    };

    skip_ws(&mut pos);
    if pos == end {
        return err(ParseErrorKind::EmptyInput, pos);
    }

    let mut nodes = 0usize;
    let root = if chars[pos].1 == ')' {
        return err(ParseErrorKind::UnbalancedParentheses, pos);
    } else if chars[pos].1 != '(' {
        Tree::leaf(Label(read_label(&mut pos)))
    } else {
        // Open frames: (label, children so far, offset of '(').
        let mut stack: Vec<(Label, Vec<Tree>, usize)> = Vec::new();
        let mut done: Option<Tree> = None;
        while done.is_none() {
            skip_ws(&mut pos);
            if pos == end {
                let open = stack.last().map_or(end, |f| f.2);
                return err(ParseErrorKind::UnbalancedParentheses, open);
            }
            match chars[pos].1 {
                '(' => {
                    let open = pos;
                    pos += 1;
                    skip_ws(&mut pos);
                    if pos == end {
                        return err(ParseErrorKind::UnbalancedParentheses, open);
                    }
                    if matches!(chars[pos].1, '(' | ')') {
                        return err(ParseErrorKind::EmptyLabel, pos);
                    }
                    let label = read_label(&mut pos);
                    nodes += 1;
                    if nodes > max_nodes {
                        return err(ParseErrorKind::TooManyNodes(max_nodes), open);
                    }
                    stack.push((Label(label), Vec::new(), open));
                }
                ')' => {
                    pos += 1;
                    let (label, children, _) = stack.pop().expect("frame is open while parsing");
                    let t = Tree::node(label, children);
                    match stack.last_mut() {
                        Some(parent) => parent.1.push(t),
                        None => done = Some(t),
                    }
                }
                _ => {
                    let label = read_label(&mut pos);
                    nodes += 1;
                    if nodes > max_nodes {
                        return err(ParseErrorKind::TooManyNodes(max_nodes), pos);
                    }
                    stack
                        .last_mut()
                        .expect("frame is open while parsing")
                        .1
                        .push(Tree::leaf(Label(label)));
                }
            }
        }
        done.expect("loop exits with a root")
    };

    skip_ws(&mut pos);
    if pos < end {
        let kind = if chars[pos].1 == ')' {
            ParseErrorKind::UnbalancedParentheses
        } else {
            ParseErrorKind::TrailingInput
        };
        return err(kind, pos);
    }
    Ok(root)
}

/// A corpus line that failed to parse.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {error}")]
pub struct CorpusLineError {
    pub line: usize,
    pub error: ParseError,
}

/// Parses a corpus: one tree per line, `#` comments and blank lines skipped.
/// Returns the trees (with their 1-based line numbers) and the failures.
pub fn parse_corpus(text: &str) -> (Vec<(usize, Tree)>, Vec<CorpusLineError>) {
    let mut trees = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_tree(line) {
            Ok(t) => trees.push((i + 1, t)),
            Err(error) => errors.push(CorpusLineError { line: i + 1, error }),
        }
    }
    (trees, errors)
}
