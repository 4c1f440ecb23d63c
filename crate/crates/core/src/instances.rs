//! Small named instances used by the reproduce targets and the tests.

use crate::dist::{make_uniform, MarkovKernel};
use crate::model::{DiscreteGame, TwoPeriodGame};

/// Independent uniform values on [1, 2] in both periods, no discounting.
pub fn ex1_game(n: usize) -> TwoPeriodGame {
    let u = make_uniform(1.0, 2.0, n).expect("valid grid");
    let k = MarkovKernel::independent(u.clone(), &u).expect("valid kernel");
    TwoPeriodGame::baseline(k, 1.0, n).expect("valid game")
}

/// Three-point version of the independent example where the top
/// first-period type keeps the top second-period value.
pub fn ex2_game() -> DiscreteGame {
    let t = vec![1.0, 1.5, 2.0];
    let low = [0.4, 0.2, 0.4];
    let marg = [0.45, 0.45, 0.1];
    let mut pmf: Vec<Vec<f64>> = (0..2)
        .map(|i| low.iter().map(|w| marg[i] * w).collect())
        .collect();
    pmf.push(vec![0.0, 0.0, marg[2]]);
    DiscreteGame::new(t.clone(), t.clone(), pmf, t, 1.0).expect("valid game")
}

/// Binary values, perfectly anti-correlated.
pub fn ex3_game() -> DiscreteGame {
    let t = vec![1.0, 2.0];
    let pmf = vec![vec![0.0, 0.5], vec![0.5, 0.0]];
    DiscreteGame::new(t.clone(), t.clone(), pmf, t, 1.0).expect("valid game")
}

/// Binary values, perfectly correlated, with a purchase in the first period
/// lowering the second-period value by 1.5.
pub fn ex4_game() -> DiscreteGame {
    let t = vec![1.0, 2.0];
    let pmf = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
    let kappa = vec![vec![-1.5; 2]; 2];
    DiscreteGame::with_kappa(t.clone(), t, pmf, vec![0.5, 1.0, 2.0], 1.0, kappa)
        .expect("valid game")
}
