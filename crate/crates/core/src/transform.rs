//! The twelve transformations between the six distribution encodings, and routes through
//! them.
//!
//! | edge | from | to | how |
//! |---|---|---|---|
//! | 1* | generating | network | division elimination |
//! | 2 | network | generating | `~x := 1` |
//! | 3 | network | likelihood | `~x := 1 - x` |
//! | 4* | likelihood | network | division elimination |
//! | 5 | likelihood | likelihood_pm | `x := (1 - x) / 2` |
//! | 6 | likelihood_pm | likelihood | `x := 1 - 2x` |
//! | 7* | likelihood_pm | fourier_ind | division elimination |
//! | 8 | fourier_ind | likelihood_pm | `~x := 1` |
//! | 9 | fourier_ind | fourier | `~x := 1 - x` |
//! | 10* | fourier | fourier_ind | division elimination |
//! | 11 | fourier | generating | `x := (1 - x) / 2`, then scale by `2^n` |
//! | 12 | generating | fourier | scale by `2^-n`, then `x := 1 - 2x` |
//!
//! Starred edges go through division elimination and grow circuits by a factor `O(n^2)`;
//! the others rewrite leaves and grow them by `O(n)` at most.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::circuit::{Circuit, CircuitError, Semantics};
use crate::{division, leaf};

/// One of the twelve transformations, numbered 1 to 12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(u8);

impl Edge {
    pub const ALL: [Edge; 12] =
        [Edge(1), Edge(2), Edge(3), Edge(4), Edge(5), Edge(6), Edge(7), Edge(8), Edge(9), Edge(10), Edge(11), Edge(12)];

    pub fn new(number: u8) -> Option<Edge> {
        (1..=12).contains(&number).then_some(Edge(number))
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn source(self) -> Semantics {
        self.endpoints().0
    }

    pub fn target(self) -> Semantics {
        self.endpoints().1
    }

    /// Whether the edge needs division elimination.
    pub fn is_starred(self) -> bool {
        matches!(self.0, 1 | 4 | 7 | 10)
    }

    fn endpoints(self) -> (Semantics, Semantics) {
        use Semantics::*;
        match self.0 {
            1 => (Generating, Network),
            2 => (Network, Generating),
            3 => (Network, Likelihood),
            4 => (Likelihood, Network),
            5 => (Likelihood, LikelihoodPm),
            6 => (LikelihoodPm, Likelihood),
            7 => (LikelihoodPm, FourierIndicator),
            8 => (FourierIndicator, LikelihoodPm),
            9 => (FourierIndicator, Fourier),
            10 => (Fourier, FourierIndicator),
            11 => (Fourier, Generating),
            12 => (Generating, Fourier),
            _ => unreachable!("edge numbers are checked on construction"),
        }
    }

    /// Edges leaving `tag`, in increasing order.
    pub fn out_of(tag: Semantics) -> impl Iterator<Item = Edge> {
        Edge::ALL.into_iter().filter(move |e| e.source() == tag)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("expected a {expected} circuit, found {found}")]
    SemanticsMismatch { expected: Semantics, found: Semantics },
    #[error("input contains division nodes")]
    HasDivisions,
    #[error("input contains barred leaves")]
    HasBarLeaves,
    #[error("{0} is not one of the six distribution encodings")]
    NotAVertex(Semantics),
    #[error("edge {edge} starts at {expected}, but the route is at {found}")]
    RouteMismatch { edge: Edge, expected: Semantics, found: Semantics },
    #[error("route ends at {found}, not {expected}")]
    RouteEnd { expected: Semantics, found: Semantics },
    #[error("the denominator vanishes at the shift point")]
    SingularShift,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

pub(crate) fn expect_semantics(c: &Circuit, expected: Semantics) -> Result<(), TransformError> {
    if c.semantics() != expected {
        return Err(TransformError::SemanticsMismatch { expected, found: c.semantics() });
    }
    if c.has_divisions() {
        return Err(TransformError::HasDivisions);
    }
    Ok(())
}

/// A sequence of edges, written as comma-separated edge numbers such as `1,3`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Route(pub Vec<Edge>);

impl Route {
    pub fn edges(&self) -> &[Edge] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks that consecutive edges compose and that the route leads from `from` to `to`.
    pub fn check(&self, from: Semantics, to: Semantics) -> Result<(), TransformError> {
        let mut at = from;
        for &edge in &self.0 {
            if edge.source() != at {
                return Err(TransformError::RouteMismatch { edge, expected: edge.source(), found: at });
            }
            at = edge.target();
        }
        if at != to {
            return Err(TransformError::RouteEnd { expected: to, found: at });
        }
        Ok(())
    }

    pub fn starred_count(&self) -> usize {
        self.0.iter().filter(|e| e.is_starred()).count()
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{0}` is not a comma-separated list of edge numbers 1-12")]
pub struct ParseRouteError(pub alloc::string::String);

impl FromStr for Route {
    type Err = ParseRouteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Route::default());
        }
        s.split(',')
            .map(|part| part.trim().parse::<u8>().ok().and_then(Edge::new))
            .collect::<Option<Vec<_>>>()
            .map(Route)
            .ok_or_else(|| ParseRouteError(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Objective {
    /// Prefer leaf rewrites; each starred edge costs as much as many unstarred ones.
    MinSize,
    /// Fewest edges.
    MinEdges,
}

/// Cost of a starred edge under [`Objective::MinSize`], in units of unstarred edges.
pub const STARRED_COST: u32 = 100;

/// Cheapest route between two distribution encodings. Ties go to the lexicographically
/// smallest edge sequence.
pub fn plan_route(from: Semantics, to: Semantics, objective: Objective) -> Result<Route, TransformError> {
    for tag in [from, to] {
        if !tag.is_distribution() {
            return Err(TransformError::NotAVertex(tag));
        }
    }
    let cost = |e: Edge| match objective {
        Objective::MinEdges => 1,
        Objective::MinSize if e.is_starred() => STARRED_COST,
        Objective::MinSize => 1,
    };
    // The graph has six vertices, so enumerating simple paths is cheap and makes the
    // tie-break exact.
    let mut best: Option<(u32, Vec<Edge>)> = None;
    let mut path = Vec::new();
    let mut visited = Vec::from([from]);
    fn search(
        at: Semantics,
        to: Semantics,
        spent: u32,
        cost: &dyn Fn(Edge) -> u32,
        path: &mut Vec<Edge>,
        visited: &mut Vec<Semantics>,
        best: &mut Option<(u32, Vec<Edge>)>,
    ) {
        if at == to {
            let better = match best {
                None => true,
                Some((c, p)) => spent < *c || (spent == *c && path.as_slice() < p.as_slice()),
            };
            if better {
                *best = Some((spent, path.clone()));
            }
            return;
        }
        for e in Edge::out_of(at) {
            if visited.contains(&e.target()) {
                continue;
            }
            path.push(e);
            visited.push(e.target());
            search(e.target(), to, spent + cost(e), cost, path, visited, best);
            visited.pop();
            path.pop();
        }
    }
    search(from, to, 0, &cost, &mut path, &mut visited, &mut best);
    Ok(Route(best.expect("the graph is strongly connected").1))
}

/// Applies one edge. The input must carry the edge's source tag and be division-free.
pub fn apply_edge(c: &Circuit, edge: Edge) -> Result<Circuit, TransformError> {
    match edge.0 {
        1 | 4 | 7 | 10 => division::edge_transform(c, edge),
        2 => leaf::network_to_generating(c),
        3 => leaf::network_to_likelihood(c),
        5 => leaf::likelihood_to_pm(c),
        6 => leaf::pm_to_likelihood(c),
        8 => leaf::fourier_ind_collapse(c, leaf::Collapse::ToPm),
        9 => leaf::fourier_ind_collapse(c, leaf::Collapse::ToFourier),
        11 => leaf::fourier_to_generating(c),
        12 => leaf::generating_to_fourier(c),
        _ => unreachable!(),
    }
}

/// Applies the edges of `route` in order, returning every intermediate circuit
/// (the last one is the result; an empty route returns an empty list).
pub fn apply_route(c: &Circuit, route: &Route) -> Result<Vec<Circuit>, TransformError> {
    route.check(c.semantics(), route.0.last().map_or(c.semantics(), |e| e.target()))?;
    let mut out: Vec<Circuit> = Vec::with_capacity(route.0.len());
    for &edge in &route.0 {
        let next = apply_edge(out.last().unwrap_or(c), edge)?;
        out.push(next);
    }
    Ok(out)
}

/// Transforms `c` into the encoding `to` along `route`, or along the planned route when
/// none is given.
pub fn transform_to(
    c: &Circuit,
    to: Semantics,
    route: Option<&Route>,
    objective: Objective,
) -> Result<(Route, Circuit), TransformError> {
    let route = match route {
        Some(r) => r.clone(),
        None => plan_route(c.semantics(), to, objective)?,
    };
    route.check(c.semantics(), to)?;
    let result = apply_route(c, &route)?.pop().unwrap_or_else(|| c.clone());
    Ok((route, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Semantics::*;

    #[test]
    fn edges_match_their_endpoints() {
        assert_eq!(Edge::new(2).unwrap().source(), Network);
        assert_eq!(Edge::new(2).unwrap().target(), Generating);
        assert!(Edge::new(0).is_none() && Edge::new(13).is_none());
        for tag in Semantics::DISTRIBUTION_TAGS {
            assert_eq!(Edge::out_of(tag).count(), 2);
        }
        let starred: Vec<u8> = Edge::ALL.iter().filter(|e| e.is_starred()).map(|e| e.number()).collect();
        assert_eq!(starred, [1, 4, 7, 10]);
    }

    #[test]
    fn planned_routes() {
        let r = |a, b, o| plan_route(a, b, o).unwrap().to_string();
        assert_eq!(r(Network, Generating, Objective::MinSize), "2");
        assert_eq!(r(Likelihood, Likelihood, Objective::MinSize), "");
        assert_eq!(r(Generating, Likelihood, Objective::MinEdges), "1,3");
        assert_eq!(r(Likelihood, Generating, Objective::MinEdges), "4,2");
        assert_eq!(r(Likelihood, Generating, Objective::MinSize), "4,2");
        assert!(plan_route(Raw, Network, Objective::MinSize).is_err());
    }

    #[test]
    fn every_pair_has_a_route_that_composes() {
        for a in Semantics::DISTRIBUTION_TAGS {
            for b in Semantics::DISTRIBUTION_TAGS {
                for o in [Objective::MinSize, Objective::MinEdges] {
                    plan_route(a, b, o).unwrap().check(a, b).unwrap();
                }
            }
        }
    }

    #[test]
    fn route_text_round_trips() {
        let route: Route = "1, 3".parse().unwrap();
        assert_eq!(route.to_string(), "1,3");
        assert!("1,13".parse::<Route>().is_err());
        assert!("".parse::<Route>().unwrap().is_empty());
        assert!(matches!(route.check(Network, Likelihood), Err(TransformError::RouteMismatch { .. })));
    }
}
