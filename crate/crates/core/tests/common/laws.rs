//! Each law builds its operands from `seed` and returns the largest entrywise
//! difference between the two sides.

use hetfact::{general_combine, Factor};
use rand::Rng;

use super::{rng, Pool};

fn diff(a: &Factor, b: &Factor) -> f64 {
    a.max_abs_diff(b).unwrap().0
}

pub fn commutativity(seed: u64) -> f64 {
    let mut r = rng(seed);
    let p = Pool::new(&mut r);
    let f = p.factor(&mut r, &p.vars, &[], 3);
    let g = p.factor(&mut r, &p.vars, &[], 3);
    diff(
        &general_combine(&f, &g, &p.decls).unwrap(),
        &general_combine(&g, &f, &p.decls).unwrap(),
    )
}

pub fn associativity(seed: u64) -> f64 {
    let mut r = rng(seed);
    let p = Pool::new(&mut r);
    let f = p.factor(&mut r, &p.vars, &[], 3);
    let g = p.factor(&mut r, &p.vars, &[], 3);
    let h = p.factor(&mut r, &p.vars, &[], 3);
    let fg = general_combine(&f, &g, &p.decls).unwrap();
    let gh = general_combine(&g, &h, &p.decls).unwrap();
    diff(
        &general_combine(&fg, &h, &p.decls).unwrap(),
        &general_combine(&f, &gh, &p.decls).unwrap(),
    )
}

/// `x` in `f` only; `combine` chooses between product and `⊗`.
fn distributive(seed: u64, combine: bool) -> f64 {
    let mut r = rng(seed);
    let p = Pool::new(&mut r);
    let x = p.vars[r.random_range(0..p.vars.len())].clone();
    let others: Vec<_> = p.vars.iter().filter(|v| **v != x).cloned().collect();
    let f = p.factor(&mut r, &p.vars, std::slice::from_ref(&x), 3);
    let g = p.factor(&mut r, &others, &[], 3);
    let op = |a: &Factor, b: &Factor| {
        if combine {
            general_combine(a, b, &p.decls).unwrap()
        } else {
            a.multiply(b).unwrap()
        }
    };
    diff(
        &op(&f, &g).sum_out(&x).unwrap(),
        &op(&f.sum_out(&x).unwrap(), &g),
    )
}

pub fn sum_over_product(seed: u64) -> f64 {
    distributive(seed, false)
}

pub fn sum_over_combine(seed: u64) -> f64 {
    distributive(seed, true)
}

/// `h(f ⊗ g)` against `(hf) ⊗ g`.
fn regroup(p: &Pool, f: &Factor, g: &Factor, h: &Factor) -> f64 {
    diff(
        &h.multiply(&general_combine(f, g, &p.decls).unwrap())
            .unwrap(),
        &general_combine(&h.multiply(f).unwrap(), g, &p.decls).unwrap(),
    )
}

pub fn bastard_free_regroup(seed: u64) -> f64 {
    let mut r = rng(seed);
    let p = Pool::new(&mut r);
    let f = p.factor(&mut r, &p.vars, &[], 3);
    let g = p.factor(&mut r, &p.vars, &[], 3);
    let h = p.factor(&mut r, &p.normals(), &[], 3);
    regroup(&p, &f, &g, &h)
}

/// Every bastard of `h` is in `f` and not in `g`.
pub fn private_bastard_regroup(seed: u64) -> f64 {
    let mut r = rng(seed);
    let p = Pool::new(&mut r);
    let bastards = p.bastards();
    let split = r.random_range(0..=bastards.len());
    let (in_f, not_f) = bastards.split_at(split);
    let normals = p.normals();
    let f_pool: Vec<_> = normals.iter().chain(in_f).cloned().collect();
    let g_pool: Vec<_> = normals.iter().chain(not_f).cloned().collect();
    let f = p.factor(&mut r, &f_pool, in_f, 4);
    let g = p.factor(&mut r, &g_pool, &[], 3);
    let h = p.factor(&mut r, &f_pool, &[], 3);
    regroup(&p, &f, &g, &h)
}

/// `h`, `f` and `g` all mention one OR bastard, so regrouping is not allowed.
pub fn shared_bastard_witness() -> f64 {
    use hetfact::{BaseOp, BastardDecl, OpKind, Variable};
    let e = Variable::new(0, "e", 2);
    let decls = [BastardDecl::new(e.clone(), BaseOp::builtin(OpKind::Or, 2).unwrap()).unwrap()];
    let p = Pool {
        vars: vec![e.clone()],
        decls: decls.to_vec(),
    };
    let f = Factor::new(vec![e.clone()], vec![0.5, 0.5]).unwrap();
    let g = Factor::new(vec![e.clone()], vec![0.5, 0.5]).unwrap();
    let h = Factor::new(vec![e], vec![1.0, 0.0]).unwrap();
    regroup(&p, &f, &g, &h)
}
