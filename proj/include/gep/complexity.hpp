#pragma once

#include <string>

#include "gep/common.hpp"

namespace gep {

enum class ReceiverAlgorithm { kMmsePic, kEp, kDep, kGepnet };

std::string algorithm_name(ReceiverAlgorithm a);
ReceiverAlgorithm algorithm_from_name(const std::string& name);

// Real-valued-multiplication count for detecting one symbol vector with a
// given receiver.  n/k are the real-model dimensions, m the per-dimension
// constellation size, t the detector's internal iteration count, i the
// detector/decoder exchange count, eta the retained-edge fraction.
struct ComplexityQuery {
  ReceiverAlgorithm algorithm = ReceiverAlgorithm::kGepnet;
  int n = 8;
  int k = 8;
  int m = 4;
  int t = 5;
  int i = 2;
  int n_u = 8;
  int n_h1 = 64;
  int n_h2 = 32;
  int rounds = 2;
  double eta = 1.0;
};

struct ComplexityBreakdown {
  double first = 0.0;       // first pass, uniform priors
  double subsequent = 0.0;  // later passes, priors incorporated
  double total = 0.0;       // first + (i-1) * subsequent
};

ComplexityBreakdown complexity_rvm(const ComplexityQuery& q);

}  // namespace gep
