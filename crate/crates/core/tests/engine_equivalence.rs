use flagpass::code::{build_exrec, Circuit};
use flagpass::decoder::RandomTies;
use flagpass::engine::{inject_fixed_weight, inject_stochastic, DecoderMode, Engine, ErrorSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn compare(circuit: &Circuit, mode: DecoderMode, trials: u64, draw: impl Fn(&Circuit, &mut ChaCha8Rng) -> ErrorSet) {
    let sparse = Engine::new(circuit, mode).unwrap();
    let dense = Engine::new(circuit, mode).unwrap().dense();
    for i in 0..trials {
        let errors = draw(circuit, &mut ChaCha8Rng::seed_from_u64(i));
        let a = sparse.execute(&errors, &mut RandomTies(ChaCha8Rng::seed_from_u64(i))).unwrap();
        let b = dense.execute(&errors, &mut RandomTies(ChaCha8Rng::seed_from_u64(i))).unwrap();
        assert_eq!(a, b, "trial {i}: {errors:?}");
    }
}

#[test]
fn sparse_matches_dense_at_fixed_weight() {
    let circuits = [(build_exrec(1).unwrap(), 300), (build_exrec(2).unwrap(), 100)];
    for mode in [DecoderMode::MessagePassing, DecoderMode::Uniform] {
        for w in 1..=4 {
            for (circuit, trials) in &circuits {
                compare(circuit, mode, *trials, |c, r| inject_fixed_weight(c, w, r).unwrap());
            }
        }
    }
}

#[test]
fn sparse_matches_dense_at_level_three() {
    let circuit = build_exrec(3).unwrap();
    for w in [1, 3, 8] {
        compare(&circuit, DecoderMode::MessagePassing, 6, |c, r| inject_fixed_weight(c, w, r).unwrap());
    }
}

#[test]
fn sparse_matches_dense_under_stochastic_noise() {
    let circuit = build_exrec(2).unwrap();
    compare(&circuit, DecoderMode::MessagePassing, 200, |c, r| inject_stochastic(c, 2e-3, r).unwrap());
}
