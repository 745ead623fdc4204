//! Text form of averaging specs.
//!
//! ```text
//! spec   := "sum" ids ";" "ext" ids ";" "Q:" ("-" | ids) ";" "w:" weight ";" term+
//! term   := ("g" | "g*" | "ginv") "(" id "," id ")"
//! weight := factor ("*"? factor)* | "sum" id ":" weight
//! factor := "1/N" | "s(" id "," id ")"
//! ```
//!
//! Weight indices that are neither declared vertices nor bound dummies are
//! kept as named parameters.

use super::{AdmissibleGraph, Atom, AveragingMode, AveragingSpec, Edge, Factor, GraphError, Weight, WeightIndex};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Int(String),
    Semi,
    Colon,
    LParen,
    RParen,
    Comma,
    Star,
    Slash,
    Dash,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, GraphError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let tok = match c {
            c if c.is_ascii_whitespace() => {
                i += 1;
                continue;
            }
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '-' => Tok::Dash,
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Word(text[start..i].to_string())));
                continue;
            }
            c if c.is_ascii_digit() => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((start, Tok::Int(text[start..i].to_string())));
                continue;
            }
            other => {
                return Err(GraphError::Parse {
                    position: start,
                    message: format!("unexpected character {other:?}"),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

fn is_id(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, GraphError> {
        Err(GraphError::Parse {
            position: self.here(),
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), GraphError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), GraphError> {
        match self.peek() {
            Some(Tok::Word(w)) if w == word => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(format!("expected `{word}`")),
        }
    }

    fn id(&mut self) -> Result<(usize, String), GraphError> {
        let at = self.here();
        match self.peek() {
            Some(Tok::Word(w)) if is_id(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok((at, w))
            }
            _ => self.err("expected an index name [a-z][a-z0-9_]*"),
        }
    }

    /// Identifiers up to the next `;`, optionally comma separated.
    fn ids(&mut self) -> Result<Vec<(usize, String)>, GraphError> {
        let mut out = Vec::new();
        while self.peek() != Some(&Tok::Semi) {
            if self.peek().is_none() {
                return self.err("expected `;`");
            }
            out.push(self.id()?);
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            }
        }
        self.pos += 1;
        Ok(out)
    }
}

struct WeightScope<'a> {
    graph_names: &'a [String],
    dummies: Vec<String>,
    params: Vec<String>,
}

impl WeightScope<'_> {
    fn resolve(&mut self, name: &str) -> WeightIndex {
        if let Some(v) = self.graph_names.iter().position(|n| n == name) {
            WeightIndex::Vertex(v)
        } else if let Some(d) = self.dummies.iter().position(|n| n == name) {
            WeightIndex::Dummy(d)
        } else if let Some(p) = self.params.iter().position(|n| n == name) {
            WeightIndex::Param(p)
        } else {
            self.params.push(name.to_string());
            WeightIndex::Param(self.params.len() - 1)
        }
    }
}

fn parse_weight(p: &mut Parser, scope: &mut WeightScope) -> Result<Vec<Factor>, GraphError> {
    if matches!(p.peek(), Some(Tok::Word(w)) if w == "sum") {
        p.pos += 1;
        let (at, name) = p.id()?;
        if scope.dummies.contains(&name) || scope.graph_names.contains(&name) {
            return Err(GraphError::Parse {
                position: at,
                message: format!("duplicate dummy index {name}"),
            });
        }
        p.expect(Tok::Colon, "`:` after dummy index")?;
        scope.dummies.push(name);
        return parse_weight(p, scope);
    }
    let mut factors = Vec::new();
    loop {
        match p.peek() {
            Some(Tok::Int(v)) if v == "1" => {
                p.pos += 1;
                p.expect(Tok::Slash, "`/` in 1/N")?;
                match p.peek() {
                    Some(Tok::Word(w)) if w == "N" => p.pos += 1,
                    _ => return p.err("malformed weight: expected `N` in 1/N"),
                }
                factors.push(Factor::InvN);
            }
            Some(Tok::Word(w)) if w == "s" && p.peek_at(1) == Some(&Tok::LParen) => {
                p.pos += 2;
                let (_, x) = p.id()?;
                p.expect(Tok::Comma, "`,` in s(x,y)")?;
                let (_, y) = p.id()?;
                p.expect(Tok::RParen, "`)`")?;
                let x = scope.resolve(&x);
                let y = scope.resolve(&y);
                factors.push(Factor::S(x, y));
            }
            _ => return p.err("malformed weight: expected `1/N` or `s(x,y)`"),
        }
        match p.peek() {
            Some(Tok::Semi) => {
                p.pos += 1;
                return Ok(factors);
            }
            Some(Tok::Star) => p.pos += 1,
            _ => {}
        }
    }
}

/// Parses one spec in Q-average mode.
pub fn parse_monomial(text: &str) -> Result<AveragingSpec, GraphError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        end: text.len(),
    };
    p.keyword("sum")?;
    let sum_at = p.here();
    let sums = p.ids()?;
    if sums.is_empty() {
        return Err(GraphError::Parse {
            position: sum_at,
            message: "no summation vertex".into(),
        });
    }
    p.keyword("ext")?;
    let exts = p.ids()?;
    let mut names: Vec<String> = Vec::new();
    for (at, n) in sums.iter().chain(&exts) {
        if names.contains(n) {
            return Err(GraphError::Parse {
                position: *at,
                message: format!("index {n} declared twice"),
            });
        }
        names.push(n.clone());
    }
    let n_sum = sums.len();

    p.keyword("Q")?;
    p.expect(Tok::Colon, "`:` after Q")?;
    let q_ids = if p.peek() == Some(&Tok::Dash) {
        p.pos += 1;
        p.expect(Tok::Semi, "`;`")?;
        Vec::new()
    } else {
        p.ids()?
    };
    let mut q_set = Vec::new();
    for (at, q) in q_ids {
        match names.iter().position(|n| *n == q) {
            Some(v) if v < n_sum && !q_set.contains(&v) => q_set.push(v),
            Some(v) if v < n_sum => {
                return Err(GraphError::Parse {
                    position: at,
                    message: format!("{q} listed twice in Q"),
                })
            }
            _ => {
                return Err(GraphError::Parse {
                    position: at,
                    message: format!("Q index {q} is not a summation index"),
                })
            }
        }
    }
    q_set.sort_unstable();

    p.keyword("w")?;
    p.expect(Tok::Colon, "`:` after w")?;
    let mut scope = WeightScope {
        graph_names: &names,
        dummies: Vec::new(),
        params: Vec::new(),
    };
    let factors = parse_weight(&mut p, &mut scope)?;
    let weight = Weight {
        dummies: scope.dummies,
        factors,
    };
    let params = scope.params;

    let mut edges = Vec::new();
    let terms_at = p.here();
    while p.peek().is_some() {
        let at = p.here();
        let atom = match p.peek() {
            Some(Tok::Word(w)) if w == "g" => {
                p.pos += 1;
                if p.peek() == Some(&Tok::Star) {
                    p.pos += 1;
                    Atom::GStar
                } else {
                    Atom::G
                }
            }
            Some(Tok::Word(w)) if w == "ginv" => {
                p.pos += 1;
                Atom::GInv
            }
            _ => return p.err("expected a term g(x,y), g*(x,y) or ginv(x,x)"),
        };
        p.expect(Tok::LParen, "`(`")?;
        let (xa, x) = p.id()?;
        p.expect(Tok::Comma, "`,`")?;
        let (ya, y) = p.id()?;
        p.expect(Tok::RParen, "`)`")?;
        let lookup = |name: &str, at: usize| {
            names.iter().position(|n| n == name).ok_or(GraphError::Parse {
                position: at,
                message: format!("unknown index {name}"),
            })
        };
        let source = lookup(&x, xa)?;
        let target = lookup(&y, ya)?;
        if source >= n_sum && target >= n_sum {
            return Err(GraphError::Parse {
                position: at,
                message: format!("edge between two external indices {x} and {y}"),
            });
        }
        if atom == Atom::GInv && source != target {
            return Err(GraphError::Parse {
                position: at,
                message: "ginv is diagonal-only".into(),
            });
        }
        edges.push(Edge { source, target, atom });
    }
    if edges.is_empty() {
        return Err(GraphError::Parse {
            position: terms_at,
            message: "empty edge list".into(),
        });
    }
    let ext_names = names[n_sum..].to_vec();
    let graph = AdmissibleGraph::new(names[..n_sum].to_vec(), ext_names, edges).map_err(|e| match e {
        GraphError::Invalid(message) => GraphError::Parse {
            position: terms_at,
            message,
        },
        other => other,
    })?;
    Ok(AveragingSpec {
        graph,
        q_set,
        weight,
        params,
        mode: AveragingMode::QAverage,
    })
}

/// Canonical text form; `parse_monomial(print_monomial(s))` reproduces `s`
/// up to the mode.
pub fn print_monomial(spec: &AveragingSpec) -> String {
    let g = &spec.graph;
    let names = |r: std::ops::Range<usize>| r.map(|v| g.name(v).to_string()).collect::<Vec<_>>().join(" ");
    let q = if spec.q_set.is_empty() {
        "-".to_string()
    } else {
        spec.q_set.iter().map(|&v| g.name(v)).collect::<Vec<_>>().join(" ")
    };
    let w = &spec.weight;
    let ix = |i: WeightIndex| match i {
        WeightIndex::Vertex(v) => g.name(v).to_string(),
        WeightIndex::Dummy(d) => w.dummies[d].clone(),
        WeightIndex::Param(p) => spec.params[p].clone(),
    };
    let mut weight = String::new();
    for d in &w.dummies {
        weight.push_str(&format!("sum {d}: "));
    }
    let factors: Vec<String> = w
        .factors
        .iter()
        .map(|f| match *f {
            Factor::InvN => "1/N".to_string(),
            Factor::S(x, y) => format!("s({},{})", ix(x), ix(y)),
        })
        .collect();
    weight.push_str(&factors.join(" * "));
    let terms: Vec<String> = g
        .edges()
        .iter()
        .map(|e| {
            let head = match e.atom {
                Atom::G => "g",
                Atom::GStar => "g*",
                Atom::GInv => "ginv",
            };
            format!("{head}({},{})", g.name(e.source), g.name(e.target))
        })
        .collect();
    let ext = names(g.externals());
    let ext = if ext.is_empty() { "ext;".to_string() } else { format!("ext {ext};") };
    format!(
        "sum {}; {ext} Q: {q}; w: {weight}; {}",
        names(g.summation()),
        terms.join(" ")
    )
}
