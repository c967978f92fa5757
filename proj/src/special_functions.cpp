#include "mrag/special_functions.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mrag/error.hpp"

namespace mrag::special {

namespace {

template <typename F>
double guarded(const char* name, F&& f) {
  try {
    return f();
  } catch (const std::domain_error& e) {
    throw PreconditionError(std::string(name) + ": argument out of domain (" + e.what() + ")");
  }
}

}  // namespace

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw PreconditionError("log_gamma requires x > 0");
  return guarded("log_gamma", [&] { return boost::math::lgamma(x); });
}

double regularized_gamma_q(double s, double x) {
  if (!(s > 0.0) || !(x >= 0.0)) throw PreconditionError("regularized_gamma_q requires s > 0, x >= 0");
  if (std::isinf(x)) return 0.0;
  return guarded("regularized_gamma_q", [&] { return boost::math::gamma_q(s, x); });
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw PreconditionError("regularized_incomplete_beta requires a, b > 0 and x in [0, 1]");
  }
  return guarded("regularized_incomplete_beta", [&] { return boost::math::ibeta(a, b, x); });
}

double chi_square_sf(double x, double df) {
  if (!(df > 0.0)) throw PreconditionError("chi_square_sf requires df > 0");
  if (!(x > 0.0)) return 1.0;
  return regularized_gamma_q(df / 2.0, x / 2.0);
}

double student_t_two_tailed(double t, double df) {
  if (!(df > 0.0)) throw PreconditionError("student_t_two_tailed requires df > 0");
  if (std::isnan(t)) throw PreconditionError("student_t_two_tailed: t is NaN");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

}  // namespace mrag::special
