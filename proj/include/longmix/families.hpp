#pragma once

#include <cmath>
#include <string>

#include "longmix/errors.hpp"

namespace longmix {

// Exponential-family response with its canonical link:
// gaussian <-> identity, poisson <-> log, bernoulli <-> logit.
enum class Family { gaussian, poisson, bernoulli };

Family family_from_string(const std::string& s);
std::string family_to_string(Family f);

// log(1 + e^x) without overflow.
inline double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Mean response h(eta) under the canonical link.
inline double link_inverse(Family f, double eta) {
  switch (f) {
    case Family::gaussian: return eta;
    case Family::poisson: return std::exp(eta);
    case Family::bernoulli: return logistic(eta);
  }
  return eta;
}

// log p(y | eta, phi); the dispersion phi is only used by the gaussian
// family (residual variance).
inline double log_density(Family f, double y, double eta, double phi) {
  switch (f) {
    case Family::gaussian: {
      double r = y - eta;
      return -0.5 * std::log(6.283185307179586 * phi) - 0.5 * r * r / phi;
    }
    case Family::poisson:
      return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
    case Family::bernoulli:
      return y * eta - log1pexp(eta);
  }
  return 0.0;
}

// d/deta log p(y | eta, phi)
inline double dlog_density(Family f, double y, double eta, double phi) {
  switch (f) {
    case Family::gaussian: return (y - eta) / phi;
    case Family::poisson: return y - std::exp(eta);
    case Family::bernoulli: return y - logistic(eta);
  }
  return 0.0;
}

// d^2/deta^2 log p(y | eta, phi); always <= 0 for these families.
inline double d2log_density(Family f, double /*y*/, double eta, double phi) {
  switch (f) {
    case Family::gaussian: return -1.0 / phi;
    case Family::poisson: return -std::exp(eta);
    case Family::bernoulli: {
      double p = logistic(eta);
      return -p * (1.0 - p);
    }
  }
  return 0.0;
}

}  // namespace longmix
