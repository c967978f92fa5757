#pragma once

namespace mrag::special {

// Thin wrappers over Boost.Math; out-of-domain arguments raise
// mrag::PreconditionError instead of std::domain_error.

/// ln Γ(x) for x > 0.
double log_gamma(double x);

/// Upper regularized incomplete gamma Q(s, x) = Γ(s, x) / Γ(s); s > 0, x >= 0.
double regularized_gamma_q(double s, double x);

/// Regularized incomplete beta I_x(a, b); a, b > 0, 0 <= x <= 1.
double regularized_incomplete_beta(double a, double b, double x);

/// Upper-tail probability of a chi-square variate with `df` degrees of freedom.
double chi_square_sf(double x, double df);

/// Two-tailed probability P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_tailed(double t, double df);

}  // namespace mrag::special
