#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use simulcomp::boolsys::{BooleanSystem, NandEquation, VarId};

fn assemble(nvars: usize, triples: &[(usize, usize, usize)]) -> BooleanSystem {
    let names = (1..=nvars).map(|i| format!("x{i}")).collect();
    let mut eqs: Vec<NandEquation> = Vec::new();
    for &(a, b, out) in triples {
        let e = NandEquation { a: VarId(a), b: VarId(b), out: VarId(out) };
        if !eqs.iter().any(|f| f.out == e.out && ((f.a, f.b) == (e.a, e.b) || (f.a, f.b) == (e.b, e.a))) {
            eqs.push(e);
        }
    }
    BooleanSystem::with_free_variables(names, eqs).expect("distinct generated names")
}

/// Random NAND system over `x1..xn`; variables used by no equation stay free.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, max_vars: usize, max_eqs: usize) -> BooleanSystem {
    let nvars = rng.random_range(1..=max_vars);
    let neqs = rng.random_range(1..=max_eqs);
    let triples: Vec<_> = (0..neqs)
        .map(|_| (rng.random_range(0..nvars), rng.random_range(0..nvars), rng.random_range(0..nvars)))
        .collect();
    assemble(nvars, &triples)
}

pub fn arb_system(max_vars: usize, max_eqs: usize) -> impl Strategy<Value = BooleanSystem> {
    (1..=max_vars).prop_flat_map(move |n| {
        prop::collection::vec((0..n, 0..n, 0..n), 1..=max_eqs).prop_map(move |t| assemble(n, &t))
    })
}

/// Truth-table sweep written against the raw equations, first variable as MSB.
pub fn brute_force(sys: &BooleanSystem) -> Vec<String> {
    let n = sys.num_variables();
    (0u32..1 << n)
        .filter_map(|v| {
            let bit = |i: usize| (v >> (n - 1 - i)) & 1 == 1;
            sys.equations()
                .iter()
                .all(|e| !(bit(e.a.0) && bit(e.b.0)) == bit(e.out.0))
                .then(|| (0..n).map(|i| if bit(i) { '1' } else { '0' }).collect())
        })
        .collect()
}
