//! Join queries, variable orders and the text format they are written in.
//!
//! ```text
//! # comments run to end of line
//! Q(x1,x2,x3) :- R(x1,x2), S(x2,x3).
//! ORDER x2,x1,x3
//! ```
//!
//! The head lists every variable exactly once and doubles as the
//! lexicographic order unless an `ORDER` clause overrides it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::hypergraph::{Hypergraph, Vertex, VertexSet};

/// Index of a variable in the query head.
pub type VarId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("variable `{0}` occurs in the body but not in the head (projections are not supported)")]
    NotInHead(String),
    #[error("head variable `{0}` does not occur in any atom")]
    NotInBody(String),
    #[error("variable `{0}` is repeated in the head")]
    DuplicateHeadVariable(String),
    #[error("relation `{relation}` used with arity {found}, but earlier with arity {expected}")]
    ArityConflict { relation: String, expected: usize, found: usize },
    #[error("invalid variable order: {0}")]
    InvalidOrder(String),
    #[error("a join query needs at least one atom")]
    NoAtoms,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: String,
    /// One variable per column; a variable may repeat within an atom.
    pub vars: Vec<VarId>,
}

impl Atom {
    pub fn scope(&self) -> VertexSet {
        self.vars.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinQuery {
    name: String,
    variables: Vec<String>,
    atoms: Vec<Atom>,
}

/// A permutation of the query variables defining the lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VariableOrder {
    order: Vec<VarId>,
    position: Vec<usize>,
}

impl VariableOrder {
    pub fn new(order: Vec<VarId>, num_vars: usize) -> Result<Self, QueryError> {
        if order.len() != num_vars {
            return Err(QueryError::InvalidOrder(format!(
                "expected {num_vars} variables, got {}",
                order.len()
            )));
        }
        let mut position = vec![usize::MAX; num_vars];
        for (i, &v) in order.iter().enumerate() {
            if v >= num_vars {
                return Err(QueryError::InvalidOrder(format!("unknown variable id {v}")));
            }
            if position[v] != usize::MAX {
                return Err(QueryError::InvalidOrder(format!("variable id {v} repeated")));
            }
            position[v] = i;
        }
        Ok(VariableOrder { order, position })
    }

    pub fn identity(num_vars: usize) -> Self {
        VariableOrder::new((0..num_vars).collect(), num_vars).expect("identity is a permutation")
    }

    pub fn as_slice(&self) -> &[VarId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Variable at position `i` of the order.
    pub fn var(&self, i: usize) -> VarId {
        self.order[i]
    }

    pub fn position(&self, v: VarId) -> usize {
        self.position[v]
    }
}

impl JoinQuery {
    /// Validates the join-query invariants: every variable occurs both in
    /// the head and in some atom, and repeated relation symbols agree on
    /// arity.
    pub fn new(name: impl Into<String>, variables: Vec<String>, atoms: Vec<Atom>) -> Result<Self, QueryError> {
        if atoms.is_empty() {
            return Err(QueryError::NoAtoms);
        }
        let mut seen = HashMap::new();
        for (i, v) in variables.iter().enumerate() {
            if seen.insert(v.as_str(), i).is_some() {
                return Err(QueryError::DuplicateHeadVariable(v.clone()));
            }
        }
        let mut used = vec![false; variables.len()];
        let mut arities: HashMap<&str, usize> = HashMap::new();
        for atom in &atoms {
            for &v in &atom.vars {
                match used.get_mut(v) {
                    Some(u) => *u = true,
                    None => return Err(QueryError::NotInHead(format!("#{v}"))),
                }
            }
            let expected = *arities.entry(atom.relation.as_str()).or_insert(atom.vars.len());
            if expected != atom.vars.len() {
                return Err(QueryError::ArityConflict {
                    relation: atom.relation.clone(),
                    expected,
                    found: atom.vars.len(),
                });
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(QueryError::NotInBody(variables[i].clone()));
        }
        Ok(JoinQuery { name: name.into(), variables, atoms })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.variables[v]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn head_order(&self) -> VariableOrder {
        VariableOrder::identity(self.num_vars())
    }

    /// Builds an order from variable names.
    pub fn order_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<VariableOrder, QueryError> {
        let ids = names
            .iter()
            .map(|n| {
                self.var_id(n.as_ref())
                    .ok_or_else(|| QueryError::InvalidOrder(format!("unknown variable `{}`", n.as_ref())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        VariableOrder::new(ids, self.num_vars())
    }

    /// One edge per atom scope, normalized.
    pub fn hypergraph(&self) -> Hypergraph {
        Hypergraph::new(0..self.num_vars(), self.atoms.iter().map(Atom::scope))
            .expect("atom variables are head variables")
    }

    pub fn is_self_join_free(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.atoms.iter().all(|a| seen.insert(a.relation.as_str()))
    }

    pub fn disruptive_trios(&self, order: &VariableOrder) -> Vec<(VarId, VarId, VarId)> {
        disruptive_trios_in(&self.hypergraph(), order.as_slice())
    }

    /// Renders the query in the text format; the `ORDER` clause is emitted
    /// only when it differs from the head order.
    pub fn to_text(&self, order: &VariableOrder) -> String {
        let mut out = format!("{}({}) :- ", self.name, self.variables.join(","));
        let atoms: Vec<String> = self
            .atoms
            .iter()
            .map(|a| {
                let vars: Vec<&str> = a.vars.iter().map(|&v| self.var_name(v)).collect();
                format!("{}({})", a.relation, vars.join(","))
            })
            .collect();
        out.push_str(&atoms.join(", "));
        out.push('.');
        if order.as_slice() != self.head_order().as_slice() {
            let names: Vec<&str> = order.as_slice().iter().map(|&v| self.var_name(v)).collect();
            out.push_str("\nORDER ");
            out.push_str(&names.join(","));
        }
        out.push('\n');
        out
    }
}

impl fmt::Display for JoinQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_text(&self.head_order()).trim_end())
    }
}

/// All `(x1, x2, x3)` such that `x3` comes after `x1` and `x2` in `order`,
/// `x1` and `x2` share no edge, and `x3` shares an edge with each of them.
/// Triples are listed by position of `x3`, then `x1`, then `x2`, with `x1`
/// before `x2` in the order.
pub fn disruptive_trios_in(h: &Hypergraph, order: &[Vertex]) -> Vec<(Vertex, Vertex, Vertex)> {
    let n = order.len();
    let mut adjacent = vec![vec![false; n]; n];
    let position: BTreeMap<Vertex, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    for e in h.edges() {
        let members: Vec<usize> = e.iter().filter_map(|v| position.get(v).copied()).collect();
        for &a in &members {
            for &b in &members {
                if a != b {
                    adjacent[a][b] = true;
                }
            }
        }
    }
    let mut trios = Vec::new();
    for third in 0..n {
        let earlier: Vec<usize> = (0..third).filter(|&i| adjacent[i][third]).collect();
        for (idx, &first) in earlier.iter().enumerate() {
            for &second in &earlier[idx + 1..] {
                if !adjacent[first][second] {
                    trios.push((order[first], order[second], order[third]));
                }
            }
        }
    }
    trios
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Name(String),
    LParen,
    RParen,
    Comma,
    Implies,
    Dot,
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Name(n) => write!(f, "`{n}`"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::Comma => f.write_str("`,`"),
            Token::Implies => f.write_str("`:-`"),
            Token::Dot => f.write_str("`.`"),
            Token::Eof => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1, column: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, line: usize, column: usize, message: String) -> QueryError {
        QueryError::Syntax { line, column, message }
    }

    fn tokens(mut self) -> Result<Vec<(Token, usize, usize)>, QueryError> {
        let mut out = Vec::new();
        loop {
            while let Some(&c) = self.chars.peek() {
                if c == '#' {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                } else if c.is_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            let (line, column) = (self.line, self.column);
            let Some(c) = self.bump() else {
                out.push((Token::Eof, line, column));
                return Ok(out);
            };
            let token = match c {
                '(' => Token::LParen,
                ')' => Token::RParen,
                ',' => Token::Comma,
                '.' => Token::Dot,
                ':' => {
                    if self.bump() != Some('-') {
                        return Err(self.error(line, column, "expected `:-`".into()));
                    }
                    Token::Implies
                }
                c if c.is_ascii_alphanumeric() || c == '_' => {
                    let mut name = String::from(c);
                    while let Some(&c) = self.chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            name.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Token::Name(name)
                }
                other => return Err(self.error(line, column, format!("unexpected character `{other}`"))),
            };
            out.push((token, line, column));
        }
    }
}

struct Parser {
    tokens: Vec<(Token, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn next(&mut self) -> (Token, usize, usize) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> QueryError {
        let (tok, line, column) = &self.tokens[self.pos];
        QueryError::Syntax { line: *line, column: *column, message: format!("expected {expected}, found {tok}") }
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), QueryError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn name(&mut self) -> Result<(String, usize, usize), QueryError> {
        match self.peek().clone() {
            Token::Name(n) => {
                let (_, line, column) = self.next();
                Ok((n, line, column))
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    fn varlist(&mut self) -> Result<Vec<(String, usize, usize)>, QueryError> {
        let mut vars = vec![self.name()?];
        while *self.peek() == Token::Comma {
            self.next();
            vars.push(self.name()?);
        }
        Ok(vars)
    }

    fn parenthesized(&mut self) -> Result<Vec<(String, usize, usize)>, QueryError> {
        self.expect(Token::LParen, "`(`")?;
        let vars = self.varlist()?;
        self.expect(Token::RParen, "`)` or `,`")?;
        Ok(vars)
    }
}

/// Parses a query file. The head order is the lexicographic order unless an
/// `ORDER` clause follows the query.
pub fn parse_query(text: &str) -> Result<(JoinQuery, VariableOrder), QueryError> {
    let tokens = Lexer::new(text).tokens()?;
    let mut p = Parser { tokens, pos: 0 };
    let (name, _, _) = p.name()?;
    let head = p.parenthesized()?;
    p.expect(Token::Implies, "`:-`")?;

    let mut variables: Vec<String> = Vec::new();
    for (v, line, column) in &head {
        if variables.contains(v) {
            return Err(QueryError::Syntax {
                line: *line,
                column: *column,
                message: format!("variable `{v}` is repeated in the head"),
            });
        }
        variables.push(v.clone());
    }

    let mut atoms = Vec::new();
    loop {
        let (relation, _, _) = p.name()?;
        let vars = p
            .parenthesized()?
            .into_iter()
            .map(|(v, _, _)| variables.iter().position(|h| *h == v).ok_or(QueryError::NotInHead(v)))
            .collect::<Result<Vec<_>, _>>()?;
        atoms.push(Atom { relation, vars });
        match p.peek() {
            Token::Comma => {
                p.next();
            }
            Token::Dot => {
                p.next();
                break;
            }
            _ => return Err(p.unexpected("`,` or `.`")),
        }
    }
    let query = JoinQuery::new(name, variables, atoms)?;

    let order = match p.peek().clone() {
        Token::Name(kw) if kw == "ORDER" => {
            p.next();
            let names: Vec<String> = p.varlist()?.into_iter().map(|(n, _, _)| n).collect();
            if *p.peek() == Token::Dot {
                p.next();
            }
            query.order_from_names(&names)?
        }
        _ => query.head_order(),
    };
    if *p.peek() != Token::Eof {
        return Err(p.unexpected("end of input"));
    }
    Ok((query, order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: &str = "Q(x1,x2,x3,x4,x5) :- R1(x1,x5), R2(x2,x4), R3(x3,x4), R4(x3,x5).";

    fn brute_force_trios(q: &JoinQuery, l: &VariableOrder) -> Vec<(VarId, VarId, VarId)> {
        let share = |a: VarId, b: VarId| q.atoms().iter().any(|at| at.vars.contains(&a) && at.vars.contains(&b));
        let n = q.num_vars();
        let mut out = Vec::new();
        for x1 in 0..n {
            for x2 in 0..n {
                for x3 in 0..n {
                    let distinct = x1 != x2 && x2 != x3 && x1 != x3;
                    if distinct
                        && l.position(x1) < l.position(x2)
                        && l.position(x2) < l.position(x3)
                        && !share(x1, x2)
                        && share(x1, x3)
                        && share(x2, x3)
                    {
                        out.push((x1, x2, x3));
                    }
                }
            }
        }
        out.sort_by_key(|&(a, b, c)| (l.position(c), l.position(a), l.position(b)));
        out
    }

    #[test]
    fn parses_example_query() {
        let (q, l) = parse_query(EXAMPLE).unwrap();
        assert_eq!(q.name(), "Q");
        assert_eq!(q.num_vars(), 5);
        assert_eq!(q.atoms().len(), 4);
        assert_eq!(l.as_slice(), &[0, 1, 2, 3, 4]);
        assert_eq!(q.atoms()[3], Atom { relation: "R4".into(), vars: vec![2, 4] });
    }

    #[test]
    fn parses_single_atom() {
        let (q, l) = parse_query("Q(x) :- R(x).").unwrap();
        assert_eq!(q.atoms().len(), 1);
        assert_eq!(l.as_slice(), &[0]);
    }

    #[test]
    fn rejects_projection() {
        assert_eq!(parse_query("Q(x) :- R(x,y)."), Err(QueryError::NotInHead("y".into())));
        assert_eq!(parse_query("Q(x,y) :- R(x)."), Err(QueryError::NotInBody("y".into())));
    }

    #[test]
    fn rejects_arity_conflict() {
        let err = parse_query("Q(a,b) :- R(a,b), R(a).").unwrap_err();
        assert!(matches!(err, QueryError::ArityConflict { expected: 2, found: 1, .. }));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_query("# header\nQ(x) :- R(x)\n").unwrap_err();
        assert_eq!(
            err,
            QueryError::Syntax { line: 3, column: 1, message: "expected `,` or `.`, found end of input".into() }
        );
        let err = parse_query("Q(x) :- R(x$).").unwrap_err();
        assert!(matches!(err, QueryError::Syntax { line: 1, column: 12, .. }));
    }

    #[test]
    fn order_clause_overrides_head() {
        let (q, l) = parse_query("Q(a,b,c) :- R(a,b), S(b,c). # path\nORDER c, a, b").unwrap();
        assert_eq!(l.as_slice(), &[2, 0, 1]);
        assert_eq!(l.position(0), 1);
        assert!(parse_query("Q(a,b) :- R(a,b). ORDER a").is_err());
        assert!(parse_query("Q(a,b) :- R(a,b). ORDER a,a").is_err());
        assert_eq!(q.to_text(&l), "Q(a,b,c) :- R(a,b), S(b,c).\nORDER c,a,b\n");
    }

    #[test]
    fn hypergraph_of_queries() {
        let (q, _) = parse_query(EXAMPLE).unwrap();
        let h = q.hypergraph();
        let expected: Vec<VertexSet> = [[0, 4], [1, 3], [2, 3], [2, 4]]
            .iter()
            .map(|e| e.iter().copied().collect())
            .collect();
        assert_eq!(h.edges(), expected.as_slice());

        let (q, _) = parse_query("Q(a,b,c) :- R(a,b), R(b,c).").unwrap();
        assert_eq!(q.hypergraph().edges().len(), 2);
        assert!(!q.is_self_join_free());

        let (q, _) = parse_query("Q(a,b) :- R(a,b), S(b,a).").unwrap();
        assert_eq!(q.hypergraph().edges().len(), 1);
        assert!(q.is_self_join_free());
    }

    #[test]
    fn trio_examples() {
        let (q, l) = parse_query("Q(x1,x2,x3) :- R(x1,x3), S(x2,x3).").unwrap();
        assert_eq!(q.disruptive_trios(&l), vec![(0, 1, 2)]);

        let (q, l) = parse_query(EXAMPLE).unwrap();
        let trios = q.disruptive_trios(&l);
        assert!(trios.contains(&(0, 2, 4)));
        assert_eq!(trios, brute_force_trios(&q, &l));

        let (q, l) = parse_query("Q(x1,x2,x3) :- R(x1,x2), S(x2,x3).").unwrap();
        assert!(q.disruptive_trios(&l).is_empty());
    }

    fn arb_query() -> impl Strategy<Value = (JoinQuery, VariableOrder)> {
        (1usize..=6)
            .prop_flat_map(|n| {
                let atom = (0usize..4, prop::collection::vec(0..n, 1..=3));
                (Just(n), prop::collection::vec(atom, 1..=5), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
            })
            .prop_filter_map("every variable used", |(n, atoms, perm)| {
                let atoms: Vec<Atom> = atoms
                    .into_iter()
                    .map(|(r, vars)| Atom { relation: format!("R{r}_{}", vars.len()), vars })
                    .collect();
                let vars = (0..n).map(|i| format!("v{i}")).collect();
                let q = JoinQuery::new("Q", vars, atoms).ok()?;
                let l = VariableOrder::new(perm, n).ok()?;
                Some((q, l))
            })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip((q, l) in arb_query()) {
            let text = q.to_text(&l);
            let (q2, l2) = parse_query(&text).unwrap();
            prop_assert_eq!(q2, q);
            prop_assert_eq!(l2, l);
        }

        #[test]
        fn trios_agree_with_brute_force((q, l) in arb_query()) {
            prop_assert_eq!(q.disruptive_trios(&l), brute_force_trios(&q, &l));
        }
    }
}
