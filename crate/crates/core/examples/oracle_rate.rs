//! With the true informative features, means and precision, the discriminant
//! rule attains the optimal error `Phi(-delta_p / 2)`.

use cislda::classifier::{misclassification_rate, FittedClassifier};
use cislda::dataset::ClassPair;
use cislda::evaluation::oracle_error_rate;
use cislda::simgen::{example_design, SimDesign};

fn main() -> cislda::Result<()> {
    let pair = ClassPair::new(1, 2);
    let mut design = example_design(1, 40, 10, 9)?;
    design.n_test_per_class = 2500;
    let model = oracle_model(&design, pair)?;
    let test = design.sample()?.test.restrict_to_pair(pair)?;

    let delta_p = design.oracle_delta_p(pair)?;
    let expected = oracle_error_rate(delta_p);
    let observed = misclassification_rate(&model, &test)?;
    println!("delta_p {delta_p:.4}");
    println!("optimal error {expected:.4}, observed on {} draws {observed:.4}", test.n());
    Ok(())
}

/// The rule built from the design itself: informative features, exact means,
/// exact inverse of their covariance.
fn oracle_model(design: &SimDesign, pair: ClassPair) -> cislda::Result<FittedClassifier> {
    let truth = design.ground_truth(pair)?;
    let s = truth.informative_set;
    let k = s.len();
    let mut precision = vec![0.0; k * k];
    for (col, _) in s.iter().enumerate() {
        let mut e = vec![0.0; design.p];
        e[s[col]] = 1.0;
        let w = design.precision_times(&e)?;
        for (row, &j) in s.iter().enumerate() {
            precision[row * k + col] = w[j];
        }
    }
    let mean = |c| s.iter().map(|&j| design.mean(c, j)).collect::<Vec<_>>();
    FittedClassifier::fit_with_parameters(pair, s.clone(), mean(pair.a), mean(pair.b), precision)
}
