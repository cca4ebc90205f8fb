//! One PASS/FAIL line per acceptance criterion. Runs without the libtest harness so the
//! lines show up in `cargo test` output; the process fails if any criterion does.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polysem::circuit::{EvalError, Node, Point};
use polysem::division::{
    builtin_shift, eliminate_division, homogenize, introduce_gadgets, pull_up, translate_inputs, GadgetKind, Shift,
};
use polysem::fixtures;
use polysem::gen::{perturb_weight, random_dist, random_matrix, random_mixture, random_raw, MixtureShape};
use polysem::hardness::{coefficient_of_all_ones, sparsify, sparsify_step, valiant_circuit, IntMatrix};
use polysem::inference::{marginal_fourier, marginal_generating, marginal_likelihood, marginal_network, Query};
use polysem::oracle::{
    dist_from, encode_poly, expand, flat_circuit, fourier_of, identical, permanent, DistTable, IdentityMode, SparsePoly,
};
use polysem::structured::{
    fourier_leaves, is_decomposable, is_smooth, skeleton_matches, smooth_complete, smooth_for_fourier, Completion,
};
use polysem::transform::{apply_edge, Edge};
use polysem::{Circuit, Rational, Semantics, VarRef};

const TAGS: [Semantics; 6] = [
    Semantics::Likelihood,
    Semantics::Network,
    Semantics::Generating,
    Semantics::LikelihoodPm,
    Semantics::Fourier,
    Semantics::FourierIndicator,
];

const GOLDEN_LIMIT: Duration = Duration::from_secs(1);
const SUITE_TABLES: usize = 200;
const SUITE_LIMIT: Duration = Duration::from_secs(5 * 60);
const GADGET_CIRCUITS: usize = 120;
/// Recorded golden constant for `size <= C * s * (n + 1)^2` on the starred edges.
/// Measured maximum on the families below: 0.650.
const GOLDEN_C: f64 = 0.70;
/// The O(1) term in `size <= s + 4 * leaves + O(1)` for the leaf edges.
/// Measured maximum on the families below: 0.
const LEAF_EDGE_SLACK: usize = 0;
const FAST_PATH_CIRCUITS: usize = 120;
const RANDOM_MATRICES: usize = 60;
const PERMANENT_LIMIT: Duration = Duration::from_secs(2 * 60);
const IDENTITY_PAIRS: usize = 1000;
const IDENTITY_TRIALS: u32 = 8;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn mixture_shape<R: Rng>(rng: &mut R) -> MixtureShape {
    MixtureShape { depth: rng.random_range(1..=3), ..MixtureShape::decomposable(0) }
}

/// 1. The two-variable example, parsed from decimal text, through edge 4.
fn golden_example() -> Outcome {
    let start = Instant::now();
    let p: SparsePoly = "0.08x1x2+0.16x1+0.12x2+0.09".parse().map_err(|e| format!("{e}"))?;
    let c = p.to_circuit(2, Semantics::Likelihood).map_err(|e| format!("{e}"))?;
    let out = apply_edge(&c, Edge::new(4).unwrap()).map_err(|e| format!("{e}"))?;
    let elapsed = start.elapsed();
    let expected: SparsePoly = "45/100*x1*x2 + 25/100*x1*~x2 + 21/100*~x1*x2 + 9/100*~x1*~x2".parse().unwrap();
    ensure(out.semantics() == Semantics::Network && !out.has_divisions(), || {
        "output is not a division-free network circuit".into()
    })?;
    let got = expand(&out).map_err(|e| format!("{e}"))?;
    ensure(got == expected, || format!("expansion is {got}"))?;
    ensure(elapsed < GOLDEN_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{got} in {elapsed:?}"))
}

fn suite_tables() -> Vec<DistTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..SUITE_TABLES).map(|k| random_dist(&mut rng, 1 + k % 6)).collect()
}

/// 2. Every edge and every two-edge composition on every encoding of every table.
fn commutation_suite(tables: &[DistTable]) -> Outcome {
    let start = Instant::now();
    let mut checked = 0usize;
    for (k, d) in tables.iter().enumerate() {
        for tag in TAGS {
            let c = flat_circuit(tag, d).map_err(|e| format!("{e}"))?;
            for first in Edge::out_of(tag) {
                let mid = apply_edge(&c, first).map_err(|e| format!("table {k}, edge {first}: {e}"))?;
                let got = dist_from(&mid).map_err(|e| format!("table {k}, edge {first}: {e}"))?;
                ensure(&got == d, || format!("table {k}, edge {first} changed the distribution"))?;
                checked += 1;
                for second in Edge::out_of(first.target()) {
                    let out = apply_edge(&mid, second).map_err(|e| format!("table {k}, {first},{second}: {e}"))?;
                    let got = dist_from(&out).map_err(|e| format!("table {k}, {first},{second}: {e}"))?;
                    ensure(&got == d, || format!("table {k}, route {first},{second} changed the distribution"))?;
                    checked += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < SUITE_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{} tables, {checked} transformed circuits in {elapsed:?}", tables.len()))
}

/// 3. All queries, four inference routines and the brute-force sum.
fn inference_agreement(tables: &[DistTable]) -> Outcome {
    let mut queries = 0usize;
    for (k, d) in tables.iter().enumerate() {
        let circuit = |tag| flat_circuit(tag, d).map_err(|e| format!("{e}"));
        let net = circuit(Semantics::Network)?;
        let lik = circuit(Semantics::Likelihood)?;
        let gen = circuit(Semantics::Generating)?;
        let fou = circuit(Semantics::Fourier)?;
        for q in Query::enumerate(d.n()) {
            let (ones, zeros) = q.masks();
            let truth = d.marginal(ones, zeros);
            let answers = [
                marginal_network(&net, &q),
                marginal_likelihood(&lik, &q),
                marginal_generating(&gen, &q),
                marginal_fourier(&fou, &q),
            ];
            for (name, a) in ["network", "likelihood", "generating", "fourier"].iter().zip(answers) {
                let a = a.map_err(|e| format!("table {k}, query {q}, {name}: {e}"))?;
                ensure(a == truth, || format!("table {k}, query {q}: {name} gives {a}, table gives {truth}"))?;
            }
            queries += 1;
        }
        let all = marginal_network(&net, &Query::all_marg(d.n())).map_err(|e| format!("{e}"))?;
        ensure(all.is_one(), || format!("table {k}: all-marginalized query gives {all}"))?;
    }
    Ok(format!("{queries} queries over {} tables", tables.len()))
}

fn is_homogeneous(p: &SparsePoly, degree: u32) -> bool {
    p.terms().all(|(m, _)| m.degree() == degree)
}

/// 4. Gadgets, pull-up, elimination and homogenization.
fn strassen_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sources = [
        (Semantics::Likelihood, GadgetKind::EvidenceCompletion, Semantics::Network),
        (Semantics::Fourier, GadgetKind::EvidenceCompletion, Semantics::FourierIndicator),
        (Semantics::Generating, GadgetKind::CoefficientExtraction, Semantics::Network),
        (Semantics::LikelihoodPm, GadgetKind::CoefficientExtraction, Semantics::FourierIndicator),
    ];
    for k in 0..GADGET_CIRCUITS {
        let (tag, kind, target) = sources[k % sources.len()];
        let n = rng.random_range(1..=4);
        let c = if k % 3 == 0 {
            flat_circuit(tag, &random_dist(&mut rng, n)).unwrap()
        } else {
            let shape = mixture_shape(&mut rng);
            random_mixture(&mut rng, tag, n, shape)
        };
        let gadget = introduce_gadgets(&c, kind).map_err(|e| format!("circuit {k}: {e}"))?;
        let split = pull_up(&gadget);
        let (a, b) = (split.numerator(), split.denominator());
        ensure(!a.has_divisions() && !b.has_divisions(), || format!("circuit {k}: split keeps divisions"))?;
        let q = eliminate_division(&split, n, &builtin_shift(n)).map_err(|e| format!("circuit {k}: {e}"))?;
        ensure(!q.has_divisions(), || format!("circuit {k}: elimination keeps divisions"))?;
        let (ea, eb, eq) = (expand(&a).unwrap(), expand(&b).unwrap(), expand(&q).unwrap());
        ensure(ea == eb.mul(&eq), || format!("circuit {k}: A != B * quotient"))?;
        let want = encode_poly(target, &dist_from(&c).unwrap()).unwrap();
        ensure(eq == want, || format!("circuit {k}: quotient is not the {target} polynomial"))?;

        let d = ea.degree().unwrap_or(0) as usize;
        let stack = homogenize(&a, d).map_err(|e| format!("circuit {k}: {e}"))?;
        let mut total = SparsePoly::zero();
        for i in 0..=d {
            let part = expand(&stack.part(i)).unwrap();
            ensure(is_homogeneous(&part, i as u32), || format!("circuit {k}: H_{i} is not homogeneous"))?;
            ensure(part == ea.homogeneous_part(i as u32), || format!("circuit {k}: H_{i} is wrong"))?;
            total = total.add(&part);
        }
        ensure(total == ea, || format!("circuit {k}: parts do not sum to the numerator"))?;
    }
    Ok(format!("{GADGET_CIRCUITS} gadget circuits"))
}

/// Circuits with sizes in `[20, 500]` over 2 to 8 variables, in `tag`.
fn size_family(tag: Semantics, seed: u64) -> Vec<Circuit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for n in 2..=8usize {
        let mut found = 0;
        for _ in 0..200 {
            if found == 4 {
                break;
            }
            let c = if n <= 5 && rng.random_bool(0.3) {
                flat_circuit(tag, &random_dist(&mut rng, n)).unwrap()
            } else {
                let shape = MixtureShape {
                    depth: rng.random_range(1..=4),
                    max_components: rng.random_range(2..=4),
                    ..MixtureShape::decomposable(0)
                };
                random_mixture(&mut rng, tag, n, shape)
            };
            if (20..=500).contains(&c.size()) {
                out.push(c);
                found += 1;
            }
        }
    }
    out
}

fn sum_edges(c: &Circuit) -> usize {
    c.nodes().iter().filter_map(|n| if let Node::Sum(t) = n { Some(t.len()) } else { None }).sum()
}

/// 5. Size bounds against the recorded constants.
fn size_bounds() -> Outcome {
    let mut worst_c = 0.0f64;
    let mut worst_slack = 0usize;
    let mut circuits = 0usize;
    for number in 1..=12u8 {
        let edge = Edge::new(number).unwrap();
        for c in size_family(edge.source(), number as u64) {
            let (s, n) = (c.size(), c.n());
            let out = apply_edge(&c, edge).map_err(|e| format!("edge {edge}: {e}"))?.size();
            circuits += 1;
            if edge.is_starred() {
                let ratio = out as f64 / (s * (n + 1) * (n + 1)) as f64;
                worst_c = worst_c.max(ratio);
                ensure(ratio <= GOLDEN_C, || format!("edge {edge}: s={s}, n={n}, size {out}, C={ratio:.3}"))?;
            } else {
                let base = s + 4 * c.leaf_count();
                worst_slack = worst_slack.max(out.saturating_sub(base));
                ensure(out <= base + LEAF_EDGE_SLACK, || format!("edge {edge}: s={s}, size {out}, base {base}"))?;
            }
        }
    }
    for tag in [Semantics::Likelihood, Semantics::Generating, Semantics::LikelihoodPm, Semantics::Fourier] {
        let (completion, _) = Completion::for_semantics(tag).unwrap();
        for c in size_family(tag, 100 + tag.to_string().len() as u64) {
            let out = smooth_complete(&c, completion).map_err(|e| format!("{e}"))?.size();
            let bound = c.size() + 3 * c.n() * sum_edges(&c);
            ensure(out <= bound, || format!("smooth_complete: size {out} above {bound}"))?;
            circuits += 1;
        }
    }
    Ok(format!("{circuits} circuits; C <= {worst_c:.3} (golden {GOLDEN_C}); leaf-edge slack {worst_slack} (pinned {LEAF_EDGE_SLACK})"))
}

/// 6. The decomposable fast paths against the general ones.
fn fast_paths() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let starred = [
        (Semantics::Likelihood, 4u8),
        (Semantics::Generating, 1),
        (Semantics::LikelihoodPm, 7),
        (Semantics::Fourier, 10),
    ];
    for k in 0..FAST_PATH_CIRCUITS {
        let (tag, edge) = starred[k % starred.len()];
        let n = rng.random_range(1..=5);
        let shape = mixture_shape(&mut rng);
        let c = random_mixture(&mut rng, tag, n, shape);
        ensure(is_decomposable(&c), || format!("circuit {k} is not decomposable"))?;
        let (completion, _) = Completion::for_semantics(tag).unwrap();
        let fast = smooth_complete(&c, completion).map_err(|e| format!("circuit {k}: {e}"))?;
        ensure(is_smooth(&fast) && is_decomposable(&fast), || {
            format!("circuit {k}: completion not smooth and decomposable")
        })?;
        let slow = apply_edge(&c, Edge::new(edge).unwrap()).map_err(|e| format!("circuit {k}: {e}"))?;
        let report = identical(&fast, &slow, IdentityMode::Exact).map_err(|e| format!("{e}"))?;
        ensure(report.identical, || format!("circuit {k}: completion differs from edge {edge}"))?;

        let lik = random_mixture(&mut rng, Semantics::Likelihood, n, shape);
        let smooth = smooth_for_fourier(&lik).map_err(|e| format!("circuit {k}: {e}"))?;
        let f = fourier_leaves(&smooth).map_err(|e| format!("circuit {k}: {e}"))?;
        let want = fourier_of(&dist_from(&lik).unwrap());
        ensure(expand(&f).unwrap() == want, || format!("circuit {k}: Fourier leaves differ from the spectrum"))?;
        ensure(skeleton_matches(&smooth, &f), || format!("circuit {k}: skeleton changed"))?;
    }
    Ok(format!("{FAST_PATH_CIRCUITS} decomposable circuits, each tag"))
}

fn check_matrix(m: &IntMatrix) -> Result<(), String> {
    let n = m.order();
    let (out, _) = sparsify(m);
    let want = permanent(m);
    ensure(permanent(&out) == want, || format!("sparsify changed the permanent of\n{m}"))?;
    ensure(out.max_column_count() <= 3, || format!("a column keeps more than 3 ones for\n{m}"))?;
    ensure(out.order() <= n + n * n, || format!("order grew to {} for\n{m}", out.order()))?;
    let c = valiant_circuit(&out).map_err(|e| format!("{e}"))?;
    let coef = coefficient_of_all_ones(&c, out.order()).map_err(|e| format!("{e}"))?;
    ensure(coef == Rational::from_integer(want as i64), || format!("coefficient {coef}, permanent {want} for\n{m}"))
}

fn sorted_rows(m: &IntMatrix) -> Vec<Vec<u8>> {
    let mut rows: Vec<Vec<u8>> = (0..m.order()).map(|r| (0..m.order()).map(|c| m.get(r, c)).collect()).collect();
    rows.sort();
    rows
}

/// 7. The permanent reduction.
fn permanent_reduction() -> Outcome {
    let start = Instant::now();
    let mut count = 0usize;
    for order in 0..=4usize {
        for bits in 0..1u64 << (order * order) {
            check_matrix(&IntMatrix::from_bits(order, bits))?;
            count += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..RANDOM_MATRICES {
        let order = 5 + k % 3;
        let density = rng.random_range(0.2..0.9);
        check_matrix(&random_matrix(&mut rng, order, density))?;
        count += 1;
    }
    let column = fixtures::single_column_matrix();
    let reference = IntMatrix::from_rows(&[
        &[0, 1, 0, 0, 0],
        &[0, 0, 0, 0, 1],
        &[0, 0, 0, 0, 1],
        &[0, 1, 0, 0, 0],
        &[0, 1, 0, 0, 1],
    ]);
    ensure(sparsify_step(&column, 1, 1, 2) == reference, || "the middle-row step gives the wrong matrix".into())?;
    let (out, _) = sparsify(&column);
    ensure(out.order() == 5 && sorted_rows(&out) == sorted_rows(&reference), || {
        format!("the single-column matrix sparsifies to\n{out}")
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < PERMANENT_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{count} matrices and the 4x4 single-column instance in {elapsed:?}"))
}

/// 8. Gadget circuits divide by zero where the eliminated circuit does not.
fn division_by_zero() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut points = 0usize;
    for k in 0..100 {
        let (tag, edge) = if k % 2 == 0 { (Semantics::Generating, 1u8) } else { (Semantics::LikelihoodPm, 7) };
        let n = rng.random_range(1..=4);
        let c = if k % 4 < 2 {
            flat_circuit(tag, &random_dist(&mut rng, n)).unwrap()
        } else {
            let shape = mixture_shape(&mut rng);
            random_mixture(&mut rng, tag, n, shape)
        };
        let gadget = introduce_gadgets(&c, GadgetKind::CoefficientExtraction).map_err(|e| format!("{e}"))?;
        let eliminated = apply_edge(&c, Edge::new(edge).unwrap()).map_err(|e| format!("{e}"))?;
        let divided: Vec<u32> = gadget
            .nodes()
            .iter()
            .filter_map(|node| match node {
                Node::Div(_, den) => match gadget.node(*den) {
                    Node::Var(v) => Some(v.index),
                    _ => None,
                },
                _ => None,
            })
            .collect();
        for &i in &divided {
            let mut point = Point::new(
                (0..n).map(|_| Rational::new(rng.random_range(-9..=9), rng.random_range(1..=5))).collect(),
                (0..n).map(|_| Rational::new(rng.random_range(1..=9), rng.random_range(1..=5))).collect(),
            );
            point.bar[i as usize - 1] = Rational::zero();
            ensure(matches!(gadget.evaluate(&point), Err(EvalError::DivideByZero(_))), || {
                format!("circuit {k}: gadget circuit evaluates at ~x{i} = 0")
            })?;
            ensure(eliminated.evaluate(&point).is_ok(), || {
                format!("circuit {k}: eliminated circuit fails at ~x{i} = 0")
            })?;
            points += 1;
        }
    }
    ensure(points >= 100, || format!("only {points} points exercised"))?;
    Ok(format!("{points} points with a vanishing ~x_i"))
}

/// 9. Exact and probabilistic identity testing agree.
fn identity_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut unequal = 0usize;
    for k in 0..IDENTITY_PAIRS {
        let n = rng.random_range(1..=4);
        let layers = rng.random_range(2..=4);
        let c = random_raw(&mut rng, n, layers, 3);
        let other = if k % 2 == 0 {
            // The same polynomial through a different circuit.
            let shift: Shift =
                (1..=n as u32).map(|i| (VarRef::plain(i), Rational::from_integer(k as i64 % 7 + 1))).collect();
            let back: Shift = shift.iter().map(|(v, s)| (*v, -s)).collect();
            translate_inputs(&translate_inputs(&c, &shift), &back)
        } else {
            perturb_weight(&mut rng, &c).ok_or("no sum node to perturb")?
        };
        let exact = identical(&c, &other, IdentityMode::Exact).map_err(|e| format!("{e}"))?;
        let mode = IdentityMode::Probabilistic { trials: IDENTITY_TRIALS, seed: k as u64 };
        let fast = identical(&c, &other, mode).map_err(|e| format!("{e}"))?;
        ensure(exact.identical == fast.identical, || {
            format!("pair {k}: exact says {}, probabilistic says {}", exact.identical, fast.identical)
        })?;
        unequal += usize::from(!exact.identical);
    }
    Ok(format!("{IDENTITY_PAIRS} pairs, {unequal} unequal, {IDENTITY_TRIALS} trials"))
}

fn main() {
    let tables = suite_tables();
    let criteria: [Criterion; 9] = [
        ("1 golden edge-4 example", Box::new(golden_example)),
        ("2 twelve-edge commutation", Box::new(|| commutation_suite(&tables))),
        ("3 inference agreement", Box::new(|| inference_agreement(&tables))),
        ("4 division pipeline soundness", Box::new(strassen_soundness)),
        ("5 size bounds", Box::new(size_bounds)),
        ("6 decomposable fast paths", Box::new(fast_paths)),
        ("7 permanent reduction", Box::new(permanent_reduction)),
        ("8 division-by-zero contract", Box::new(division_by_zero)),
        ("9 identity tester calibration", Box::new(identity_calibration)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
