use approx::assert_abs_diff_eq;
use entrogame::aggregation::{h_beta, mixability_test_eta, AggregatorState, DEFAULT_CONCAVITY_TOL};
use entrogame::entropy::{conditional_entropies, n_step_entropy};
use entrogame::games::{expected_one_step_loss, loss_eval, Game, Prediction, Superscore};
use entrogame::sources::SourceModel;
use entrogame::strategies::{optimal_prediction, DEFAULT_OPT_TOL};
use entrogame::Bit;
use proptest::prelude::*;

fn game(i: usize) -> Game {
    [Game::log_loss(), Game::square_loss(), Game::absolute_loss()][i % 3].clone()
}

fn prob() -> impl Strategy<Value = f64> {
    (1u32..100).prop_map(|i| i as f64 / 100.0)
}

// `proptest::Strategy` shadows the crate's type of the same name here.
type Expert = entrogame::strategies::Strategy;

fn constants(gammas: &[f64]) -> Vec<Expert> {
    gammas.iter().map(|&g| Expert::constant(Prediction::new(g).unwrap())).collect()
}

proptest! {
    #[test]
    fn losses_are_non_negative(g in 0usize..3, gamma in 0.0f64..=1.0, b in 0u8..2) {
        let v = loss_eval(game(g).loss(), b, Prediction::new(gamma).unwrap()).unwrap();
        prop_assert!(v.value() >= 0.0);
    }

    #[test]
    fn optimal_prediction_beats_grid(g in 0usize..3, p1 in prob()) {
        let game = game(g);
        let best = expected_one_step_loss(game.loss(), p1, optimal_prediction(game.loss(), p1, DEFAULT_OPT_TOL).unwrap());
        for i in 0..=200 {
            let other = expected_one_step_loss(game.loss(), p1, Prediction::new(i as f64 / 200.0).unwrap());
            prop_assert!(best.value() <= other.value() + 1e-12);
        }
    }

    #[test]
    fn h_beta_is_decreasing(beta in 0.01f64..0.99, x in -5.0f64..5.0, dx in 0.001f64..3.0) {
        let (a, _) = h_beta(beta, Superscore::new(x, 0.0));
        let (b, _) = h_beta(beta, Superscore::new(x + dx, 0.0));
        prop_assert!(b < a);
        prop_assert_eq!(h_beta(beta, Superscore::new(f64::INFINITY, 0.0)).0, 0.0);
    }

    #[test]
    fn string_probabilities_are_consistent(q in prob(), r in prob(), code in 0usize..64, len in 0usize..6) {
        let source = SourceModel::markov(1, vec![q, r]).unwrap();
        let w: Vec<Bit> = (0..len).map(|i| ((code >> i) & 1) as Bit).collect();
        let p = source.string_probability(&w).unwrap();
        let mut right = 0.0;
        let mut left = 0.0;
        for b in 0..2u8 {
            let mut wr = w.clone();
            wr.push(b);
            right += source.string_probability(&wr).unwrap();
            let mut wl = vec![b];
            wl.extend_from_slice(&w);
            left += source.string_probability(&wl).unwrap();
        }
        assert_abs_diff_eq!(p, right, epsilon = 1e-13);
        assert_abs_diff_eq!(p, left, epsilon = 1e-13);
    }

    #[test]
    fn conditional_entropy_is_non_increasing(g in 0usize..3, q in prob(), r in prob(), e0 in prob(), e1 in prob()) {
        let source = SourceModel::hidden_markov(vec![vec![1.0 - q, q], vec![r, 1.0 - r]], vec![e0, e1]).unwrap();
        let h = conditional_entropies(&game(g), &source, 7).unwrap();
        for n in 1..h.len() {
            prop_assert!(h[n] <= h[n - 1] + 1e-9);
        }
    }

    #[test]
    fn n_step_entropy_is_subadditive(g in 0usize..3, q in prob(), r in prob(), m in 1usize..4, n in 1usize..4) {
        let game = game(g);
        let source = SourceModel::markov(1, vec![q, r]).unwrap();
        let lhs = n_step_entropy(&game, &source, m + n).unwrap();
        let rhs = n_step_entropy(&game, &source, m).unwrap() + n_step_entropy(&game, &source, n).unwrap();
        prop_assert!(lhs <= rhs + 1e-9);
    }

    #[test]
    fn cesaro_mean_dominates_last_conditional(g in 0usize..3, q in prob(), r in prob(), e0 in prob(), e1 in prob()) {
        let game = game(g);
        let source = SourceModel::hidden_markov(vec![vec![1.0 - q, q], vec![r, 1.0 - r]], vec![e0, e1]).unwrap();
        let h = conditional_entropies(&game, &source, 8).unwrap();
        let mut h_n = 0.0;
        for n in 1..h.len() {
            h_n += h[n - 1];
            prop_assert!(h[n - 1] <= h_n / n as f64 + 1e-9);
        }
    }

    #[test]
    fn aggregator_ignores_expert_order(gammas in prop::collection::vec(0.0f64..=1.0, 2..6), bits in prop::collection::vec(0u8..2, 0..30), rot in 0usize..6) {
        let game = Game::square_loss();
        let mut rotated = gammas.clone();
        rotated.rotate_left(rot % gammas.len());
        let mut a = AggregatorState::new(game.clone(), constants(&gammas), 2.0).unwrap();
        let mut b = AggregatorState::new(game, constants(&rotated), 2.0).unwrap();
        let mut pa = Vec::new();
        let mut pb = Vec::new();
        a.play(&bits, |r| pa.push(r.step.prediction.value())).unwrap();
        b.play(&bits, |r| pb.push(r.step.prediction.value())).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn aggregator_stays_within_bound(gammas in prop::collection::vec(0.01f64..0.99, 1..8), bits in prop::collection::vec(0u8..2, 1..200)) {
        let game = Game::log_loss();
        let mut state = AggregatorState::new(game.clone(), constants(&gammas), 1.0).unwrap();
        let slack = (gammas.len() as f64).ln();
        let mut ok = true;
        state.play(&bits, |r| ok &= r.cumulative <= r.best_expert + slack + 1e-9).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn mixability_is_monotone_in_eta(g in 0usize..2, eta in 0.05f64..4.0) {
        let game = game(g);
        let at = mixability_test_eta(&game, eta, 2001, DEFAULT_CONCAVITY_TOL).unwrap().mixable;
        let below = mixability_test_eta(&game, eta * 0.5, 2001, DEFAULT_CONCAVITY_TOL).unwrap().mixable;
        prop_assert!(!at || below);
    }
}

#[test]
fn online_and_offline_predictions_agree() {
    let source = SourceModel::hidden_markov(vec![vec![0.7, 0.3], vec![0.4, 0.6]], vec![0.2, 0.9]).unwrap();
    let strategy = entrogame::strategies::pointwise_optimal_strategy(&Game::log_loss(), &source, DEFAULT_OPT_TOL).unwrap();
    let bits = source.sample_path(50, 3).unwrap().bits;
    let mut run = strategy.start().unwrap();
    for i in 0..bits.len() {
        assert_eq!(run.predict().unwrap(), strategy.predict(&bits[..i]).unwrap());
        run.observe(bits[i]);
    }
}
