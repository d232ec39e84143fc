#include "gep/complexity.hpp"

#include <cmath>

namespace gep {

std::string algorithm_name(ReceiverAlgorithm a) {
  switch (a) {
    case ReceiverAlgorithm::kMmsePic: return "mmse-pic";
    case ReceiverAlgorithm::kEp: return "ep";
    case ReceiverAlgorithm::kDep: return "dep";
    case ReceiverAlgorithm::kGepnet: return "gepnet";
  }
  throw ConfigError("unknown algorithm");
}

ReceiverAlgorithm algorithm_from_name(const std::string& name) {
  if (name == "mmse-pic") return ReceiverAlgorithm::kMmsePic;
  if (name == "ep") return ReceiverAlgorithm::kEp;
  if (name == "dep") return ReceiverAlgorithm::kDep;
  if (name == "gepnet") return ReceiverAlgorithm::kGepnet;
  throw ConfigError("unknown algorithm name: " + name);
}

ComplexityBreakdown complexity_rvm(const ComplexityQuery& q) {
  if (q.n <= 0 || q.k <= 0 || q.m <= 1 || q.t <= 0 || q.i <= 0) {
    throw ConfigError("complexity query dimensions must be positive");
  }
  if (q.eta < 0.0 || q.eta > 1.0) {
    throw ConfigError("retained-edge fraction must lie in [0, 1]");
  }
  const double n = q.n, k = q.k, m = q.m, t = q.t;
  ComplexityBreakdown out;
  switch (q.algorithm) {
    case ReceiverAlgorithm::kMmsePic: {
      out.first = n * k * k + n * k + k * k * k + 4.0 * k * k + (m + 3.0) * k;
      out.subsequent = out.first + 3.0 * m * k;
      break;
    }
    case ReceiverAlgorithm::kEp: {
      out.first = n * k * k + n * k +
                  (k * k * k + k * k + 13.0 * k + 2.0 * m * k) * t;
      out.subsequent = out.first + 2.0 * m * k * t + 3.0 * m * k;
      break;
    }
    case ReceiverAlgorithm::kDep: {
      out.first = n * k * k + n * k +
                  (k * k * k + k * k + 13.0 * k + 2.0 * m * k) * t;
      out.subsequent = out.first + 2.0 * m * k * t + 8.0 * m * k;
      break;
    }
    case ReceiverAlgorithm::kGepnet: {
      const double nu = q.n_u, h1 = q.n_h1, h2 = q.n_h2, l = q.rounds;
      const double propagation =
          ((2.0 * nu + 2.0) * h1 + h1 * h2 + h2 * nu) * l * t * k * (k - 1.0) *
          q.eta;
      const double aggregation = (4.0 * nu + 3.0 * h1 + 9.0) * h1 * k * l * t;
      const double ep_and_readout =
          (k * k * k + k * k + 13.0 * k + 2.0 * m * k +
           (nu * h1 + h1 * h2 + h2 * m) * k) *
          t;
      out.first = propagation + aggregation + ep_and_readout;
      out.subsequent = out.first + k * std::log2(m) + 2.0 * m * k * t +
                       3.0 * m * k;
      break;
    }
  }
  out.total = out.first + (q.i - 1.0) * out.subsequent;
  return out;
}

}  // namespace gep
