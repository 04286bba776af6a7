//! Posterior maps and branch probabilities.
//!
//! Pure scalar functions; grid code calls them pointwise. Zero-probability
//! branches resolve by the tremble-limit convention: the posterior is the
//! limit along vanishing full-support perturbations of the policies.

/// Probabilities attached to the public check branches at a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchProbs {
    /// Total probability a check occurs: `mu + (1-mu) rho`.
    pub p_check: f64,
    /// Probability a check reveals truth: `lambda + (1-lambda)(1-sigma)`.
    pub p_truth_given_check: f64,
    /// Probability of revealed deception: `p_check (1-lambda) sigma`.
    pub p_detect: f64,
}

pub fn branch_probabilities(lambda: f64, mu: f64, sigma: f64, rho: f64) -> BranchProbs {
    let p_check = mu + (1.0 - mu) * rho;
    let p_truth_given_check = lambda + (1.0 - lambda) * (1.0 - sigma);
    BranchProbs {
        p_check,
        p_truth_given_check,
        p_detect: p_check * (1.0 - lambda) * sigma,
    }
}

/// Honesty posterior after a publicly disclosed truthful check.
///
/// The 0/0 case (`lambda = 0`, `sigma = 1`) returns 0: a degenerate prior
/// stays degenerate under the tremble limit.
pub fn posterior_truthful_check(lambda: f64, sigma: f64) -> f64 {
    let den = lambda + (1.0 - lambda) * (1.0 - sigma);
    if den <= 0.0 {
        return 0.0;
    }
    (lambda / den).clamp(0.0, 1.0)
}

/// Vigilance posterior after an observed check.
///
/// At `rho = 0` a check is attributed to the committed type (posterior 1)
/// unless `mu = 0`, where the tremble limit pins the posterior at 0.
pub fn posterior_vigilance(mu: f64, rho: f64) -> f64 {
    let den = mu + (1.0 - mu) * rho;
    if den <= 0.0 {
        return if mu > 0.0 { 1.0 } else { 0.0 };
    }
    (mu / den).clamp(0.0, 1.0)
}

/// Honesty posterior after a good signal from an imperfect check.
///
/// Reduces to [`posterior_truthful_check`] at `pi_t = pi_d = 1`; an
/// uninformative 0/0 returns the prior.
pub fn noisy_good_posterior(lambda: f64, sigma: f64, pi_t: f64, pi_d: f64) -> f64 {
    let p_truth = lambda + (1.0 - lambda) * (1.0 - sigma);
    let num = pi_t * lambda;
    let den = pi_t * p_truth + (1.0 - pi_d) * (1.0 - lambda) * sigma;
    if den <= 0.0 {
        return lambda;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Honesty posterior after a bad signal from an imperfect check.
///
/// Only needed to close the Bayes family for the martingale property and
/// the regime that terminates on any bad signal.
pub fn noisy_bad_posterior(lambda: f64, sigma: f64, pi_t: f64, pi_d: f64) -> f64 {
    let p_truth_strategic = 1.0 - sigma;
    let num = (1.0 - pi_t) * lambda;
    let den = (1.0 - pi_t) * (lambda + (1.0 - lambda) * p_truth_strategic)
        + pi_d * (1.0 - lambda) * sigma;
    if den <= 0.0 {
        return lambda;
    }
    (num / den).clamp(0.0, 1.0)
}

/// Posteriors under silent audits with disclosure probability `q`.
///
/// Returns `(after disclosure, after no disclosure and survival)`. The
/// disclosure posterior at `lambda = 0, sigma = 1` is the tremble limit 0.
pub fn silent_leakage_posteriors(
    lambda: f64,
    sigma: f64,
    p_check_bar: f64,
    q: f64,
) -> (f64, f64) {
    let disclose = posterior_truthful_check(lambda, sigma);
    let num = lambda * (1.0 - q * p_check_bar);
    let den = num
        + (1.0 - lambda)
            * (sigma * (1.0 - p_check_bar) + (1.0 - sigma) * (1.0 - q * p_check_bar));
    let silent = if den <= 0.0 {
        lambda
    } else {
        (num / den).clamp(0.0, 1.0)
    };
    (disclose, silent)
}

/// Posteriors after an alarm / a quiet period under rare public alarms.
///
/// Alarms fire with frequency `eps` under truth and `kappa * eps` under
/// deception; the alarm posterior is `eps`-free.
pub fn alarm_posteriors(lambda: f64, sigma: f64, eps: f64, kappa: f64) -> (f64, f64) {
    let mix = kappa * sigma + (1.0 - sigma);
    let den_alarm = lambda + (1.0 - lambda) * mix;
    let alarm = if den_alarm <= 0.0 {
        lambda
    } else {
        (lambda / den_alarm).clamp(0.0, 1.0)
    };
    let num_quiet = (1.0 - eps) * lambda;
    let den_quiet = num_quiet + (1.0 - lambda) * (1.0 - eps * mix);
    let quiet = if den_quiet <= 0.0 {
        lambda
    } else {
        (num_quiet / den_quiet).clamp(0.0, 1.0)
    };
    (alarm, quiet)
}

/// Observed alarm frequency at a belief: `eps (1 + (1-lambda) sigma (kappa-1))`.
pub fn alarm_observed_frequency(lambda: f64, sigma: f64, eps: f64, kappa: f64) -> f64 {
    eps * (1.0 + (1.0 - lambda) * sigma * (kappa - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn branch_probabilities_examples() {
        let b = branch_probabilities(0.5, 0.2, 0.5, 0.5);
        close(b.p_check, 0.6, 1e-15);
        close(b.p_truth_given_check, 0.75, 1e-15);
        close(b.p_detect, 0.15, 1e-15);

        let b = branch_probabilities(1.0, 0.0, 1.0, 0.0);
        close(b.p_check, 0.0, 0.0);
        close(b.p_truth_given_check, 1.0, 0.0);
        close(b.p_detect, 0.0, 0.0);

        let b = branch_probabilities(0.0, 1.0, 1.0, 0.0);
        close(b.p_check, 1.0, 0.0);
        close(b.p_truth_given_check, 0.0, 0.0);
        close(b.p_detect, 1.0, 0.0);
    }

    #[test]
    fn branch_detect_consistency() {
        for &(l, m, s, r) in &[
            (0.3, 0.1, 0.7, 0.4),
            (0.9, 0.0, 0.2, 0.0),
            (0.0, 0.5, 1.0, 1.0),
        ] {
            let b = branch_probabilities(l, m, s, r);
            close(b.p_detect, b.p_check * (1.0 - b.p_truth_given_check), 1e-12);
        }
    }

    #[test]
    fn truthful_check_examples() {
        close(posterior_truthful_check(0.5, 0.0), 0.5, 0.0);
        close(posterior_truthful_check(0.5, 0.5), 2.0 / 3.0, 1e-12);
        close(posterior_truthful_check(0.0, 1.0), 0.0, 0.0);
    }

    #[test]
    fn vigilance_examples() {
        close(posterior_vigilance(0.3, 1.0), 0.3, 0.0);
        close(posterior_vigilance(0.2, 0.5), 1.0 / 3.0, 1e-12);
        close(posterior_vigilance(0.3, 0.0), 1.0, 0.0);
        close(posterior_vigilance(0.0, 0.0), 0.0, 0.0);
    }

    #[test]
    fn noisy_good_examples() {
        close(noisy_good_posterior(0.5, 0.5, 1.0, 1.0), 2.0 / 3.0, 1e-12);
        // 0.8*0.5 / (0.8*0.75 + 0.3*0.25) = 0.4/0.675
        close(noisy_good_posterior(0.5, 0.5, 0.8, 0.7), 0.4 / 0.675, 1e-12);
        close(noisy_good_posterior(0.5, 0.0, 0.8, 0.7), 0.5, 1e-12);
    }

    #[test]
    fn leakage_examples() {
        let (d, s) = silent_leakage_posteriors(0.5, 0.0, 0.5, 0.5);
        close(d, 0.5, 0.0);
        close(s, 0.5, 1e-15);
        // Pure strategic deception: a disclosed truthful check can only come
        // from the committed type, so the disclosure posterior is 1; the
        // no-disclosure posterior follows the closed form term by term.
        let (d, s) = silent_leakage_posteriors(0.5, 1.0, 0.5, 1.0);
        close(d, 1.0, 0.0);
        close(s, 0.25 / (0.25 + 0.25), 1e-12);
        // Fully degenerate prior with pure deception is the off-path case;
        // the tremble limit keeps the posterior at 0.
        let (d, _) = silent_leakage_posteriors(0.0, 1.0, 0.5, 1.0);
        close(d, 0.0, 0.0);
    }

    #[test]
    fn alarm_examples() {
        let (a, q) = alarm_posteriors(0.5, 1.0, 0.1, 2.0);
        close(a, 1.0 / 3.0, 1e-12);
        close(q, 0.45 / 0.85, 1e-12);
        let (a, q) = alarm_posteriors(0.5, 0.0, 0.1, 2.0);
        close(a, 0.5, 1e-15);
        close(q, 0.5, 1e-15);
    }

    #[test]
    fn alarm_martingale_example() {
        let (lambda, sigma, eps, kappa) = (0.7, 0.3, 0.05, 3.0);
        let (a, q) = alarm_posteriors(lambda, sigma, eps, kappa);
        let f = alarm_observed_frequency(lambda, sigma, eps, kappa);
        close(f * a + (1.0 - f) * q, lambda, 1e-12);
        assert!(a <= lambda && lambda <= q);
    }
}
