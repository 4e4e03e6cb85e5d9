#include "longmix/families.hpp"

namespace longmix {

Family family_from_string(const std::string& s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "poisson") return Family::poisson;
  if (s == "bernoulli") return Family::bernoulli;
  throw ValidationError("unknown family '" + s +
                        "' (expected gaussian, poisson, or bernoulli)");
}

std::string family_to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::poisson: return "poisson";
    case Family::bernoulli: return "bernoulli";
  }
  return "?";
}

}  // namespace longmix
