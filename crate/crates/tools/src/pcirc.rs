//! The `.pcirc` text format.
//!
//! ```text
//! pcirc 1
//! semantics likelihood
//! vars 2
//! n0 var x1
//! n1 const 2/25
//! n2 sum 1/2:n0 3:n1
//! output n2
//! ```
//!
//! Node lines are `const <rational>`, `var x<i>`, `var ~x<i>`, `sum <w>:n<id> ...`,
//! `mul n<id> ...` or `div n<id> n<id>`, and may only refer to nodes defined above them.
//! `#` starts a comment. Written files are canonical: nodes renumbered densely in
//! depth-first order of first use, rationals in lowest terms.

use std::collections::HashMap;
use std::fmt::Write as _;

use polysem::{Circuit, Node, NodeId, Rational, Semantics, VarRef};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

fn parse_id(word: &str, line: usize) -> Result<&str, ParseError> {
    match word.strip_prefix('n') {
        Some(rest) if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) => Ok(rest),
        _ => Err(err(line, format!("expected a node id like `n3`, found `{word}`"))),
    }
}

fn parse_var(word: &str, line: usize) -> Result<VarRef, ParseError> {
    let (bar, rest) = match word.strip_prefix('~') {
        Some(rest) => (true, rest),
        None => (false, word),
    };
    let index = rest
        .strip_prefix('x')
        .and_then(|i| i.parse::<u32>().ok())
        .filter(|i| *i > 0)
        .ok_or_else(|| err(line, format!("expected a variable like `x1` or `~x1`, found `{word}`")))?;
    Ok(if bar { VarRef::bar(index) } else { VarRef::plain(index) })
}

fn parse_rational(word: &str, line: usize) -> Result<Rational, ParseError> {
    word.parse().map_err(|_| err(line, format!("bad rational `{word}`")))
}

pub fn parse(text: &str) -> Result<Circuit, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut header =
        |what: &str| lines.next().ok_or_else(|| err(text.lines().count().max(1), format!("missing `{what}` line")));
    let (line, magic) = header("pcirc 1")?;
    if magic.split_whitespace().collect::<Vec<_>>() != ["pcirc", "1"] {
        return Err(err(line, "expected `pcirc 1`"));
    }
    let (line, sem) = header("semantics")?;
    let semantics: Semantics = sem
        .strip_prefix("semantics")
        .ok_or_else(|| err(line, "expected `semantics <tag>`"))?
        .trim()
        .parse()
        .map_err(|e| err(line, format!("{e}")))?;
    let (line, vars) = header("vars")?;
    let n: usize = match vars.split_whitespace().collect::<Vec<_>>()[..] {
        ["vars", n] => n.parse().map_err(|_| err(line, format!("bad variable count `{n}`")))?,
        _ => return Err(err(line, "expected `vars <n>`")),
    };

    let mut nodes: Vec<Node> = Vec::new();
    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut lines_of: Vec<usize> = Vec::new();
    let mut output: Option<(usize, NodeId)> = None;
    for (line, body) in lines {
        if output.is_some() {
            return Err(err(line, "content after `output`"));
        }
        let words: Vec<&str> = body.split_whitespace().collect();
        let lookup = |word: &str| -> Result<NodeId, ParseError> {
            let key = parse_id(word, line)?;
            ids.get(key).copied().ok_or_else(|| err(line, format!("`{word}` is not defined above")))
        };
        if words[0] == "output" {
            if words.len() != 2 {
                return Err(err(line, "expected `output n<id>`"));
            }
            output = Some((line, lookup(words[1])?));
            continue;
        }
        let key = parse_id(words[0], line)?;
        let kind = words.get(1).copied().unwrap_or("");
        let args = &words[2.min(words.len())..];
        let node = match kind {
            "const" if args.len() == 1 => Node::Const(parse_rational(args[0], line)?),
            "var" if args.len() == 1 => {
                let var = parse_var(args[0], line)?;
                if var.index as usize > n {
                    return Err(err(line, format!("{var} exceeds `vars {n}`")));
                }
                if var.is_bar() && !semantics.admits_bar() {
                    return Err(err(line, format!("{var} is not allowed in {semantics} circuits")));
                }
                Node::Var(var)
            }
            "sum" if !args.is_empty() => Node::Sum(
                args.iter()
                    .map(|a| {
                        let (w, id) = a
                            .split_once(':')
                            .ok_or_else(|| err(line, format!("expected `<weight>:n<id>`, found `{a}`")))?;
                        Ok((parse_rational(w, line)?, lookup(id)?))
                    })
                    .collect::<Result<_, ParseError>>()?,
            ),
            "mul" if !args.is_empty() => Node::Product(args.iter().map(|a| lookup(a)).collect::<Result<_, _>>()?),
            "div" if args.len() == 2 => Node::Div(lookup(args[0])?, lookup(args[1])?),
            "const" | "var" | "sum" | "mul" | "div" => {
                return Err(err(line, format!("wrong number of operands for `{kind}`")))
            }
            other => return Err(err(line, format!("unknown node kind `{other}`"))),
        };
        if ids.insert(key.to_string(), NodeId(nodes.len() as u32)).is_some() {
            return Err(err(line, format!("`{}` is defined twice", words[0])));
        }
        nodes.push(node);
        lines_of.push(line);
    }
    let (out_line, root) = output.ok_or_else(|| err(text.lines().count().max(1), "missing `output` line"))?;
    let divisions = nodes.iter().any(|node| matches!(node, Node::Div(..)));
    Circuit::build_with(nodes, root, n, semantics, divisions).map(|c| c.canonical()).map_err(|e| {
        let line = match &e {
            polysem::CircuitError::MultipleRoots { node } => lines_of[node.index()],
            _ => out_line,
        };
        err(line, e.to_string())
    })
}

pub fn serialize(c: &Circuit) -> String {
    let c = c.canonical();
    let mut out = String::new();
    writeln!(out, "pcirc 1").unwrap();
    writeln!(out, "semantics {}", c.semantics()).unwrap();
    writeln!(out, "vars {}", c.n()).unwrap();
    for id in c.ids() {
        write!(out, "{id} ").unwrap();
        match c.node(id) {
            Node::Const(v) => write!(out, "const {v}"),
            Node::Var(v) => write!(out, "var {v}"),
            Node::Sum(terms) => {
                out.push_str("sum");
                terms.iter().try_for_each(|(w, ch)| write!(out, " {w}:{ch}"))
            }
            Node::Product(factors) => {
                out.push_str("mul");
                factors.iter().try_for_each(|ch| write!(out, " {ch}"))
            }
            Node::Div(a, b) => write!(out, "div {a} {b}"),
        }
        .unwrap();
        out.push('\n');
    }
    writeln!(out, "output {}", c.root()).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use polysem::fixtures;

    #[test]
    fn example_round_trip() {
        let c = fixtures::two_var_likelihood();
        let text = serialize(&c);
        assert!(text.starts_with("pcirc 1\nsemantics likelihood\nvars 2\n"));
        let back = parse(&text).unwrap();
        assert_eq!(back, c.canonical());
        assert_eq!(serialize(&back), text);
    }

    #[test]
    fn decimals_comments_and_sparse_ids() {
        let text = "# a comment\npcirc 1\nsemantics raw\nvars 1\n\nn7 var x1   # leaf\nn3 const 0.25\nn9 sum 2:n7 -1.5:n3\noutput n9\n";
        let c = parse(text).unwrap();
        assert_eq!(
            serialize(&c),
            "pcirc 1\nsemantics raw\nvars 1\nn0 var x1\nn1 const 1/4\nn2 sum 2:n0 -3/2:n1\noutput n2\n"
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("pcirc 2\n", 1),
            ("pcirc 1\nsemantics nope\n", 2),
            ("pcirc 1\nsemantics raw\nvars x\n", 3),
            ("pcirc 1\nsemantics raw\nvars 1\nn0 var x2\noutput n0\n", 4),
            ("pcirc 1\nsemantics generating\nvars 1\nn0 var ~x1\noutput n0\n", 4),
            ("pcirc 1\nsemantics raw\nvars 1\nn0 var x1\nn1 mul n0 n5\noutput n1\n", 5),
            ("pcirc 1\nsemantics raw\nvars 1\nn0 var x1\nn0 const 1\noutput n0\n", 5),
            ("pcirc 1\nsemantics raw\nvars 1\nn0 var x1\nn1 const 1\noutput n0\n", 5),
            ("pcirc 1\nsemantics raw\nvars 1\nn0 var x1\n", 4),
            ("pcirc 1\nsemantics raw\nvars 1\nn0 sum x:n0\noutput n0\n", 4),
        ];
        for (text, line) in cases {
            assert_eq!(parse(text).unwrap_err().line, line, "{text}");
        }
    }

    #[test]
    fn divisions_round_trip() {
        let text = "pcirc 1\nsemantics raw\nvars 1\nn0 var x1\nn1 var ~x1\nn2 div n0 n1\noutput n2\n";
        let c = parse(text).unwrap();
        assert!(c.has_divisions());
        assert_eq!(serialize(&c), text);
    }
}
