mod common;

use std::collections::BTreeSet;

use mce_core::deduce::{prove, Substitution, DEFAULT_DEPTH};
use mce_core::kb::{Atom, Statement, Term};
use mce_core::parse_kb;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Fact = (String, Vec<String>);

fn forward_chain(stmts: &[Statement]) -> BTreeSet<Fact> {
    let consts = ["a", "b", "c"];
    let mut facts = BTreeSet::new();
    loop {
        let before = facts.len();
        for s in stmts {
            let Statement::Clause(c) = s else { continue };
            let vars: Vec<String> = {
                let mut v: Vec<String> = c.head.vars().chain(c.body.iter().flat_map(|a| a.vars())).map(str::to_owned).collect();
                v.sort();
                v.dedup();
                v
            };
            let total = consts.len().pow(vars.len() as u32);
            for mut code in 0..total {
                let mut env = Vec::new();
                for v in &vars {
                    env.push((v.clone(), consts[code % consts.len()]));
                    code /= consts.len();
                }
                let ground = |a: &Atom| -> Fact {
                    let args = a
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Var(v) => env.iter().find(|(k, _)| k == v).unwrap().1.to_owned(),
                            Term::Const(k) => k.clone(),
                        })
                        .collect();
                    (a.predicate.clone(), args)
                };
                if c.body.iter().all(|b| facts.contains(&ground(b))) {
                    facts.insert(ground(&c.head));
                }
            }
        }
        if facts.len() == before {
            return facts;
        }
    }
}

#[test]
fn sld_answers_match_forward_chaining() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let text = common::random_program(&mut rng);
        let kb = parse_kb(&text).unwrap();
        let model = forward_chain(kb.statements());
        for p in 0..4 {
            let pred = format!("p{p}");
            let goal = Atom::new(pred.clone(), vec![Term::var("x"), Term::var("y")]);
            let proofs = prove(&goal, &Substitution::new(), &kb, DEFAULT_DEPTH);
            assert!(!proofs.truncated);
            let got: BTreeSet<Fact> = proofs
                .answers
                .iter()
                .map(|s| {
                    let a = s.apply_atom(&goal);
                    assert!(a.is_ground(), "{a} from\n{text}");
                    (pred.clone(), a.args.iter().map(|t| t.as_const().unwrap().to_owned()).collect())
                })
                .collect();
            let want: BTreeSet<Fact> = model.iter().filter(|(q, _)| *q == pred).cloned().collect();
            assert_eq!(got, want, "{text}");
        }
    }
}
