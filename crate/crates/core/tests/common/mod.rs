//! Random knowledge bases for property tests.
#![allow(dead_code)]

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

const OUTCOMES: [&str; 3] = ["A", "B", "C"];

/// A generated KB and one query against it.
pub struct Generated {
    pub text: String,
    pub query: String,
}

/// Weights in thousandths summing to exactly one, each at least 0.001.
fn row(rng: &mut impl Rng, n: usize) -> Vec<String> {
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, 999, n - 1).into_iter().map(|c| c + 1).collect();
    cuts.sort();
    cuts.push(1000);
    let mut prev = 0;
    cuts.into_iter()
        .map(|c| {
            let w = c - prev;
            prev = c;
            format!("0.{w:03}")
        })
        .collect()
}

fn alt(name: &str, k: usize) -> String {
    format!("{name}({{{}}},?p)", OUTCOMES[..k].join(","))
}

fn rows(k: usize, parents: &[(String, usize)], rng: &mut impl Rng) -> String {
    let mut combos: Vec<Vec<&str>> = vec![Vec::new()];
    for (_, pk) in parents {
        combos = combos.into_iter().flat_map(|c| OUTCOMES[..*pk].iter().map(move |o| [c.clone(), vec![*o]].concat())).collect();
    }
    let mut entries = Vec::new();
    for c in combos {
        for (o, p) in OUTCOMES[..k].iter().zip(row(rng, k)) {
            if c.is_empty() {
                entries.push(format!("({o}):{p}"));
            } else {
                entries.push(format!("({o}|{}):{p}", c.join(",")));
            }
        }
    }
    entries.join("; ")
}

/// At most `max_rvs` ground variables with 2 or 3 outcomes, an acyclic
/// random dependency structure, and evidence on at most two variables.
pub fn random_kb(rng: &mut impl Rng, max_rvs: usize) -> Generated {
    let n = rng.random_range(1..=max_rvs);
    let card: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3)).collect();
    let name = |i: usize| format!("r{i}");
    let mut stmts = vec!["obj(K).".to_owned()];
    for i in 0..n {
        let mut earlier: Vec<usize> = (0..i).collect();
        earlier.shuffle(rng);
        let np = rng.random_range(0..=earlier.len().min(2));
        let parents: Vec<(String, usize)> = earlier[..np].iter().map(|j| (name(*j), card[*j])).collect();
        let mut body: Vec<String> = parents.iter().map(|(p, k)| alt(p, *k)).collect();
        if rng.random_bool(0.3) {
            body.insert(rng.random_range(0..=body.len()), "obj(?p)".into());
        }
        if rng.random_bool(0.2) {
            // a statement whose condition never holds
            let decoy = format!("prob {} <- missing(?p) = {{ {} }}.", alt(&name(i), card[i]), rows(card[i], &[], rng));
            stmts.push(decoy);
        }
        let arrow = if body.is_empty() { String::new() } else { format!(" <- {}", body.join(", ")) };
        stmts.push(format!("prob {}{arrow} = {{ {} }}.", alt(&name(i), card[i]), rows(card[i], &parents, rng)));
    }
    if rng.random_bool(0.2) {
        stmts.push("missing(?x) :- missing(?x).".into());
    }
    stmts[1..].shuffle(rng);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let h = order[0];
    let ne = rng.random_range(0..=2.min(n - 1));
    let evidence: Vec<String> =
        order[1..=ne].iter().map(|i| format!("{}({},K)", name(*i), OUTCOMES[rng.random_range(0..card[*i])])).collect();
    let mut query = format!("{}(?o,K)", name(h));
    if !evidence.is_empty() {
        query.push_str(" | ");
        query.push_str(&evidence.join(", "));
    }
    Generated { text: stmts.join("\n") + "\n", query }
}

/// A range-restricted, non-recursive Horn program over a few constants.
pub fn random_program(rng: &mut impl Rng) -> String {
    let consts = ["a", "b", "c"];
    let vars = ["?x", "?y", "?z"];
    let preds = 4;
    let mut out = Vec::new();
    for p in 0..preds {
        for _ in 0..rng.random_range(0..4) {
            out.push(format!("p{p}({},{}).", consts.choose(rng).unwrap(), consts.choose(rng).unwrap()));
        }
        if p == 0 {
            continue;
        }
        for _ in 0..rng.random_range(0..3) {
            let len = rng.random_range(1..=2);
            let body: Vec<(usize, &str, &str)> =
                (0..len).map(|_| (rng.random_range(0..p), *vars.choose(rng).unwrap(), *vars.choose(rng).unwrap())).collect();
            let bound: Vec<&str> = body.iter().flat_map(|(_, a, b)| [*a, *b]).collect();
            let pick = |rng: &mut dyn rand::RngCore| -> String {
                if rng.random_bool(0.2) {
                    consts.choose(rng).unwrap().to_string()
                } else {
                    bound.choose(rng).unwrap().to_string()
                }
            };
            let head = format!("p{p}({},{})", pick(rng), pick(rng));
            let body: Vec<String> = body.iter().map(|(q, a, b)| format!("p{q}({a},{b})")).collect();
            out.push(format!("{head} :- {}.", body.join(", ")));
        }
    }
    out.join("\n")
}
