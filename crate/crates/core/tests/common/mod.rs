#![allow(dead_code)]

use dtcbf::expr::UnaryOp;
use dtcbf::{BoxDomain, Expr};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coefficient(rng: &mut ChaCha8Rng) -> f64 {
    (rng.random_range(-2.0f64..2.0) * 100.0).round() / 100.0
}

/// A smooth expression over `n` variables, finite and twice
/// differentiable everywhere.
pub fn random_expr(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.2) {
        return if rng.random_bool(0.7) {
            Expr::mul(
                Expr::constant(coefficient(rng)),
                Expr::var(rng.random_range(0..n)),
            )
        } else {
            Expr::constant(coefficient(rng))
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_expr(rng, n, depth - 1);
    match rng.random_range(0..7) {
        0 | 1 => Expr::add(sub(rng), sub(rng)),
        2 => Expr::sub(sub(rng), sub(rng)),
        3 => Expr::mul(sub(rng), sub(rng)),
        // powers of linear terms only; nested powers blow up the degree
        4 => Expr::powi(random_expr(rng, n, 0), rng.random_range(2..=3)),
        5 => Expr::unary(
            if rng.random_bool(0.5) {
                UnaryOp::Sin
            } else {
                UnaryOp::Cos
            },
            sub(rng),
        ),
        _ => {
            // keep the argument small so values stay moderate
            let arg = Expr::mul(Expr::constant(0.3), Expr::unary(UnaryOp::Sin, sub(rng)));
            Expr::unary(UnaryOp::Exp, arg)
        }
    }
}

/// A random box inside `[-2, 2]^n` with sides between 0.2 and 2.
pub fn random_box(rng: &mut ChaCha8Rng, n: usize) -> BoxDomain {
    let bounds: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let w = rng.random_range(0.2..2.0);
            let lo = rng.random_range(-2.0..2.0 - w);
            (lo, lo + w)
        })
        .collect();
    BoxDomain::from_bounds(&bounds)
}

/// Points of a `k`-per-axis grid over `domain`.
pub fn grid(domain: &BoxDomain, k: usize) -> Vec<Vec<f64>> {
    domain.grid(k).collect()
}

pub fn case_study_text() -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../cli/examples/wang2023.json");
    std::fs::read_to_string(path).expect("case-study file")
}
