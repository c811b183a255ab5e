use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operator {
    Sequence,
    Choice,
    Parallel,
    Loop,
}

impl Operator {
    pub fn keyword(self) -> &'static str {
        match self {
            Operator::Sequence => "SEQ",
            Operator::Choice => "XOR",
            Operator::Parallel => "AND",
            Operator::Loop => "LOOP",
        }
    }
}

/// Block-structured process model.
///
/// `Loop` nodes carry exactly two children: the body ("do") and the
/// back-path ("redo"). Text form: `SEQ(a,XOR(b,tau),LOOP(c,d))`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessTree {
    Leaf(String),
    Silent,
    Node(Operator, Vec<ProcessTree>),
}

pub const SILENT_KEYWORD: &str = "tau";

impl ProcessTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        ProcessTree::Leaf(label.into())
    }

    pub fn seq(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Node(Operator::Sequence, children)
    }

    pub fn xor(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Node(Operator::Choice, children)
    }

    pub fn and(children: Vec<ProcessTree>) -> Self {
        ProcessTree::Node(Operator::Parallel, children)
    }

    pub fn looped(body: ProcessTree, redo: ProcessTree) -> Self {
        ProcessTree::Node(Operator::Loop, vec![body, redo])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessTree::Leaf(l) if l.is_empty() => Err(Error::schema("leaf with empty label")),
            ProcessTree::Leaf(_) | ProcessTree::Silent => Ok(()),
            ProcessTree::Node(Operator::Loop, ch) if ch.len() != 2 => Err(Error::schema(format!(
                "LOOP needs exactly 2 children, found {}",
                ch.len()
            ))),
            ProcessTree::Node(op, ch) if ch.is_empty() => {
                Err(Error::schema(format!("{} without children", op.keyword())))
            }
            ProcessTree::Node(_, ch) => ch.iter().try_for_each(ProcessTree::validate),
        }
    }

    /// Distinct visible labels.
    pub fn activities(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_activities(&mut out);
        out
    }

    fn collect_activities<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            ProcessTree::Leaf(l) => {
                out.insert(l);
            }
            ProcessTree::Silent => {}
            ProcessTree::Node(_, ch) => ch.iter().for_each(|c| c.collect_activities(out)),
        }
    }

    /// Number of levels; a single leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            ProcessTree::Node(_, ch) => 1 + ch.iter().map(ProcessTree::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            ProcessTree::Node(_, ch) => 1 + ch.iter().map(ProcessTree::node_count).sum::<usize>(),
            _ => 1,
        }
    }
}

impl fmt::Display for ProcessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessTree::Leaf(l) => f.write_str(l),
            ProcessTree::Silent => f.write_str(SILENT_KEYWORD),
            ProcessTree::Node(op, ch) => {
                write!(f, "{}(", op.keyword())?;
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct TreeParser<'a> {
    src: &'a str,
    pos: usize,
}

impl TreeParser<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: 1,
            message: format!("{} at column {}", msg.into(), self.pos + 1),
        }
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn token(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| c == '(' || c == ')' || c == ',' || c.is_whitespace())
            .unwrap_or(rest.len());
        self.pos += len;
        &self.src[start..start + len]
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {c:?}")))
        }
    }

    fn node(&mut self) -> Result<ProcessTree> {
        let tok = self.token().to_string();
        if tok.is_empty() {
            return Err(self.err("expected a label or operator"));
        }
        let op = match tok.as_str() {
            "SEQ" => Some(Operator::Sequence),
            "XOR" => Some(Operator::Choice),
            "AND" => Some(Operator::Parallel),
            "LOOP" => Some(Operator::Loop),
            _ => None,
        };
        match op {
            Some(op) if self.peek() == Some('(') => {
                self.expect('(')?;
                let mut children = vec![self.node()?];
                while self.peek() == Some(',') {
                    self.pos += 1;
                    children.push(self.node()?);
                }
                self.expect(')')?;
                Ok(ProcessTree::Node(op, children))
            }
            _ if tok == SILENT_KEYWORD => Ok(ProcessTree::Silent),
            _ => Ok(ProcessTree::Leaf(tok)),
        }
    }
}

impl FromStr for ProcessTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = TreeParser { src: s, pos: 0 };
        let tree = p.node()?;
        if p.peek().is_some() {
            return Err(p.err("trailing input"));
        }
        tree.validate()?;
        Ok(tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let src = "SEQ(a,XOR(b,tau),LOOP(AND(c,d),e))";
        let t: ProcessTree = src.parse().unwrap();
        assert_eq!(t.to_string(), src);
        assert_eq!(t.depth(), 4);
        assert_eq!(
            t.activities().into_iter().collect::<Vec<_>>(),
            vec!["a", "b", "c", "d", "e"]
        );
    }

    #[test]
    fn whitespace_tolerated() {
        let t: ProcessTree = " XOR( b , c ) ".parse().unwrap();
        assert_eq!(t, ProcessTree::xor(vec![ProcessTree::leaf("b"), ProcessTree::leaf("c")]));
    }

    #[test]
    fn malformed_text() {
        assert!("SEQ(a,b".parse::<ProcessTree>().is_err());
        assert!("SEQ(a,b))".parse::<ProcessTree>().is_err());
        assert!("LOOP(a)".parse::<ProcessTree>().is_err());
        assert!("".parse::<ProcessTree>().is_err());
    }
}
