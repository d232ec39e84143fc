#include "gep/coding.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <utility>

#include "gep/numerics.hpp"

namespace gep {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int parity(unsigned v) { return std::popcount(v) & 1; }

// log P(bit = v) for LLR L = log P(1)/P(0).
double log_bernoulli(int v, double llr) {
  return v * llr - softplus(llr);
}

}  // namespace

Trellis Trellis::feed_forward(const std::vector<unsigned>& gen_octal,
                              int constraint) {
  if (constraint < 2 || constraint > 16 || gen_octal.empty()) {
    throw Error("feed_forward: bad generator description");
  }
  Trellis t;
  t.memory_ = constraint - 1;
  t.n_outputs_ = static_cast<int>(gen_octal.size());
  t.recursive_ = false;
  const int n_states = 1 << t.memory_;
  t.next_state_.resize(2 * n_states);
  t.output_bits_.resize(2 * n_states);
  t.tail_input_.assign(n_states, 0);
  for (int s = 0; s < n_states; ++s) {
    for (int u = 0; u < 2; ++u) {
      const unsigned window = (static_cast<unsigned>(u) << t.memory_) | s;
      int out = 0;
      for (unsigned g : gen_octal) out = (out << 1) | parity(window & g);
      t.next_state_[2 * s + u] = static_cast<int>(window >> 1);
      t.output_bits_[2 * s + u] = out;
    }
  }
  return t;
}

Trellis Trellis::recursive_systematic(unsigned feedback_octal,
                                      unsigned parity_octal, int constraint) {
  if (constraint < 2 || constraint > 16) {
    throw Error("recursive_systematic: bad constraint length");
  }
  Trellis t;
  t.memory_ = constraint - 1;
  t.n_outputs_ = 2;
  t.recursive_ = true;
  const int n_states = 1 << t.memory_;
  const unsigned fb_tail = feedback_octal & ((1u << t.memory_) - 1);
  t.next_state_.resize(2 * n_states);
  t.output_bits_.resize(2 * n_states);
  t.tail_input_.resize(n_states);
  for (int s = 0; s < n_states; ++s) {
    const int fb = parity(static_cast<unsigned>(s) & fb_tail);
    t.tail_input_[s] = fb;
    for (int u = 0; u < 2; ++u) {
      const unsigned a = static_cast<unsigned>(u ^ fb);
      const unsigned window = (a << t.memory_) | s;
      const int p = parity(window & parity_octal);
      t.next_state_[2 * s + u] = static_cast<int>(window >> 1);
      t.output_bits_[2 * s + u] = (u << 1) | p;
    }
  }
  return t;
}

std::vector<int> cc_encode(const Trellis& trellis,
                           const std::vector<int>& info_bits) {
  std::vector<int> coded;
  coded.reserve((info_bits.size() + trellis.memory()) * trellis.n_outputs());
  int state = 0;
  auto step = [&](int u) {
    const int out = trellis.output_bits(state, u);
    for (int j = 0; j < trellis.n_outputs(); ++j) {
      coded.push_back((out >> (trellis.n_outputs() - 1 - j)) & 1);
    }
    state = trellis.next_state(state, u);
  };
  for (int b : info_bits) step(b & 1);
  for (int m = 0; m < trellis.memory(); ++m) step(trellis.tail_input(state));
  if (state != 0) throw Error("cc_encode: termination failed");
  return coded;
}

PunctureScheme PunctureScheme::none(int n_outputs) {
  PunctureScheme s;
  s.period = 1;
  s.keep.assign(n_outputs, 1);
  return s;
}

PunctureScheme PunctureScheme::rate_5_6() {
  PunctureScheme s;
  s.period = 5;
  // Interleaved per-step order (first generator, second generator).
  s.keep = {1, 1, 0, 1, 1, 0, 0, 1, 1, 0};
  return s;
}

int PunctureScheme::kept_per_period() const {
  int n = 0;
  for (int k : keep) n += k;
  return n;
}

int PunctureScheme::punctured_length(int n_steps, int n_outputs) const {
  if (static_cast<int>(keep.size()) != period * n_outputs) {
    throw Error("puncture mask does not match trellis outputs");
  }
  int len = (n_steps / period) * kept_per_period();
  for (int t = 0; t < n_steps % period; ++t) {
    for (int j = 0; j < n_outputs; ++j) len += keep[t * n_outputs + j];
  }
  return len;
}

std::vector<int> puncture(const std::vector<int>& coded,
                          const PunctureScheme& scheme) {
  const int n_outputs = static_cast<int>(scheme.keep.size()) / scheme.period;
  if (coded.size() % n_outputs != 0) {
    throw Error("puncture: stream length not a multiple of outputs per step");
  }
  std::vector<int> out;
  out.reserve(coded.size());
  for (size_t i = 0; i < coded.size(); ++i) {
    const int step = static_cast<int>(i) / n_outputs;
    const int j = static_cast<int>(i) % n_outputs;
    if (scheme.keep[(step % scheme.period) * n_outputs + j]) {
      out.push_back(coded[i]);
    }
  }
  return out;
}

Vector depuncture_llrs(const Vector& kept_llrs, const PunctureScheme& scheme,
                       int full_steps, int n_outputs) {
  if (scheme.punctured_length(full_steps, n_outputs) != kept_llrs.size()) {
    throw InvalidLength("depuncture: kept stream has unexpected length");
  }
  Vector full = Vector::Zero(static_cast<Eigen::Index>(full_steps) * n_outputs);
  Eigen::Index src = 0;
  for (Eigen::Index i = 0; i < full.size(); ++i) {
    const int step = static_cast<int>(i) / n_outputs;
    const int j = static_cast<int>(i) % n_outputs;
    if (scheme.keep[(step % scheme.period) * n_outputs + j]) {
      full(i) = kept_llrs(src++);
    }
  }
  return full;
}

BcjrOutput bcjr_decode(const Trellis& trellis, const BcjrInput& in) {
  const int n_steps = static_cast<int>(in.info_priors.size());
  const int n_out = trellis.n_outputs();
  const int n_states = trellis.n_states();
  if (in.coded_priors.size() != static_cast<Eigen::Index>(n_steps) * n_out) {
    throw InvalidLength("bcjr_decode: coded prior length mismatch");
  }

  auto gamma = [&](int t, int s, int u) {
    double g = log_bernoulli(u, in.info_priors(t));
    const int out = trellis.output_bits(s, u);
    for (int j = 0; j < n_out; ++j) {
      const int c = (out >> (n_out - 1 - j)) & 1;
      g += log_bernoulli(c, in.coded_priors(t * n_out + j));
    }
    return g;
  };

  Matrix alpha(n_states, n_steps + 1);
  alpha.setConstant(kNegInf);
  alpha(0, 0) = 0.0;
  for (int t = 0; t < n_steps; ++t) {
    for (int s = 0; s < n_states; ++s) {
      const double a = alpha(s, t);
      if (a == kNegInf) continue;
      for (int u = 0; u < 2; ++u) {
        const int ns = trellis.next_state(s, u);
        alpha(ns, t + 1) = log_sum_exp(alpha(ns, t + 1), a + gamma(t, s, u));
      }
    }
    alpha.col(t + 1).array() -= alpha.col(t + 1).maxCoeff();
  }

  Matrix beta(n_states, n_steps + 1);
  beta.setConstant(kNegInf);
  if (in.terminated) {
    beta(0, n_steps) = 0.0;
  } else {
    beta.col(n_steps).setZero();
  }
  for (int t = n_steps - 1; t >= 0; --t) {
    for (int s = 0; s < n_states; ++s) {
      double acc = kNegInf;
      for (int u = 0; u < 2; ++u) {
        const int ns = trellis.next_state(s, u);
        if (beta(ns, t + 1) == kNegInf) continue;
        acc = log_sum_exp(acc, gamma(t, s, u) + beta(ns, t + 1));
      }
      beta(s, t) = acc;
    }
    const double shift = beta.col(t).maxCoeff();
    if (shift != kNegInf) beta.col(t).array() -= shift;
  }

  BcjrOutput out;
  out.info_app.resize(n_steps);
  out.coded_app.resize(static_cast<Eigen::Index>(n_steps) * n_out);
  for (int t = 0; t < n_steps; ++t) {
    double num = kNegInf, den = kNegInf;
    Vector cnum = Vector::Constant(n_out, kNegInf);
    Vector cden = Vector::Constant(n_out, kNegInf);
    for (int s = 0; s < n_states; ++s) {
      if (alpha(s, t) == kNegInf) continue;
      for (int u = 0; u < 2; ++u) {
        const int ns = trellis.next_state(s, u);
        if (beta(ns, t + 1) == kNegInf) continue;
        const double m = alpha(s, t) + gamma(t, s, u) + beta(ns, t + 1);
        (u ? num : den) = log_sum_exp(u ? num : den, m);
        const int bits = trellis.output_bits(s, u);
        for (int j = 0; j < n_out; ++j) {
          const int c = (bits >> (n_out - 1 - j)) & 1;
          (c ? cnum(j) : cden(j)) = log_sum_exp(c ? cnum(j) : cden(j), m);
        }
      }
    }
    out.info_app(t) = num - den;
    for (int j = 0; j < n_out; ++j) {
      out.coded_app(t * n_out + j) = cnum(j) - cden(j);
    }
  }
  return out;
}

Interleaver::Interleaver(int n, Rng& rng) {
  map_.resize(n);
  for (int i = 0; i < n; ++i) map_[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_index(i + 1));
    std::swap(map_[i], map_[j]);
  }
}

Interleaver Interleaver::identity(int n) {
  std::vector<int> map(n);
  for (int i = 0; i < n; ++i) map[i] = i;
  return Interleaver(std::move(map));
}

Vector Interleaver::permute(const Vector& in) const {
  if (in.size() != size()) throw InvalidLength("interleaver size mismatch");
  Vector out(in.size());
  for (int i = 0; i < size(); ++i) out(i) = in(map_[i]);
  return out;
}

Vector Interleaver::inverse_permute(const Vector& in) const {
  if (in.size() != size()) throw InvalidLength("interleaver size mismatch");
  Vector out(in.size());
  for (int i = 0; i < size(); ++i) out(map_[i]) = in(i);
  return out;
}

std::vector<int> Interleaver::permute(const std::vector<int>& in) const {
  if (static_cast<int>(in.size()) != size()) {
    throw InvalidLength("interleaver size mismatch");
  }
  std::vector<int> out(in.size());
  for (int i = 0; i < size(); ++i) out[i] = in[map_[i]];
  return out;
}

std::vector<int> hard_decisions(const Vector& llrs) {
  std::vector<int> bits(llrs.size());
  for (Eigen::Index i = 0; i < llrs.size(); ++i) bits[i] = llrs(i) > 0.0;
  return bits;
}

int TurboCode::coded_length() const {
  const int nb = info_length();
  const int m = component.memory();
  return (puncture_to_half ? 2 * nb : 3 * nb) + 4 * m;
}

std::vector<int> turbo_encode(const TurboCode& code,
                              const std::vector<int>& info_bits) {
  const int nb = code.info_length();
  if (static_cast<int>(info_bits.size()) != nb) {
    throw InvalidLength("turbo_encode: info length mismatch");
  }
  const Trellis& t = code.component;
  const std::vector<int> info2 = code.interleaver.permute(info_bits);

  std::vector<int> p1(nb), p2(nb);
  int s1 = 0, s2 = 0;
  for (int i = 0; i < nb; ++i) {
    p1[i] = t.output_bits(s1, info_bits[i]) & 1;
    s1 = t.next_state(s1, info_bits[i]);
    p2[i] = t.output_bits(s2, info2[i]) & 1;
    s2 = t.next_state(s2, info2[i]);
  }

  std::vector<int> coded;
  coded.reserve(code.coded_length());
  for (int i = 0; i < nb; ++i) {
    coded.push_back(info_bits[i]);
    if (!code.puncture_to_half || i % 2 == 0) coded.push_back(p1[i]);
    if (!code.puncture_to_half || i % 2 == 1) coded.push_back(p2[i]);
  }
  for (int* s : {&s1, &s2}) {
    for (int m = 0; m < t.memory(); ++m) {
      const int u = t.tail_input(*s);
      coded.push_back(u);
      coded.push_back(t.output_bits(*s, u) & 1);
      *s = t.next_state(*s, u);
    }
  }
  if (s1 != 0 || s2 != 0) throw Error("turbo_encode: termination failed");
  return coded;
}

TurboDecodeResult turbo_decode(const TurboCode& code, const Vector& coded_llrs,
                               int n_iterations) {
  const int nb = code.info_length();
  const int m = code.component.memory();
  if (coded_llrs.size() != code.coded_length()) {
    throw InvalidLength("turbo_decode: coded length mismatch");
  }

  // Unpack the stream; punctured parity positions read as erasures (LLR 0).
  Vector ls(nb), lp1 = Vector::Zero(nb), lp2 = Vector::Zero(nb);
  Eigen::Index pos = 0;
  for (int i = 0; i < nb; ++i) {
    ls(i) = coded_llrs(pos++);
    if (!code.puncture_to_half || i % 2 == 0) lp1(i) = coded_llrs(pos++);
    if (!code.puncture_to_half || i % 2 == 1) lp2(i) = coded_llrs(pos++);
  }
  Vector tail_s1(m), tail_p1(m), tail_s2(m), tail_p2(m);
  for (int i = 0; i < m; ++i) {
    tail_s1(i) = coded_llrs(pos++);
    tail_p1(i) = coded_llrs(pos++);
  }
  for (int i = 0; i < m; ++i) {
    tail_s2(i) = coded_llrs(pos++);
    tail_p2(i) = coded_llrs(pos++);
  }

  const Vector ls_perm = [&] {
    Vector v(nb);
    for (int i = 0; i < nb; ++i) v(i) = ls(code.interleaver.mapping()[i]);
    return v;
  }();

  auto component_pass = [&](const Vector& sys, const Vector& par,
                            const Vector& tail_sys, const Vector& tail_par,
                            const Vector& apriori) {
    BcjrInput in;
    in.info_priors = Vector::Zero(nb + m);
    in.info_priors.head(nb) = apriori;
    in.coded_priors.resize(2 * (nb + m));
    for (int i = 0; i < nb; ++i) {
      in.coded_priors(2 * i) = sys(i);
      in.coded_priors(2 * i + 1) = par(i);
    }
    for (int i = 0; i < m; ++i) {
      in.coded_priors(2 * (nb + i)) = tail_sys(i);
      in.coded_priors(2 * (nb + i) + 1) = tail_par(i);
    }
    return bcjr_decode(code.component, in);
  };

  Vector e1 = Vector::Zero(nb), e2_deint = Vector::Zero(nb);
  BcjrOutput out1, out2;
  for (int it = 0; it < n_iterations; ++it) {
    out1 = component_pass(ls, lp1, tail_s1, tail_p1, e2_deint);
    e1 = out1.info_app.head(nb) - e2_deint - ls;
    const Vector e1_perm = [&] {
      Vector v(nb);
      for (int i = 0; i < nb; ++i) v(i) = e1(code.interleaver.mapping()[i]);
      return v;
    }();
    out2 = component_pass(ls_perm, lp2, tail_s2, tail_p2, e1_perm);
    const Vector e2 = out2.info_app.head(nb) - e1_perm - ls_perm;
    for (int i = 0; i < nb; ++i) e2_deint(code.interleaver.mapping()[i]) = e2(i);
  }

  TurboDecodeResult res;
  res.info_app = ls + e1 + e2_deint;
  res.decisions = hard_decisions(res.info_app);

  res.coded_extrinsic.resize(code.coded_length());
  Vector app2_deint(nb), p2_app_deint(nb);
  for (int i = 0; i < nb; ++i) {
    app2_deint(code.interleaver.mapping()[i]) = out2.info_app(i);
    p2_app_deint(code.interleaver.mapping()[i]) = out2.coded_app(2 * i + 1);
  }
  pos = 0;
  for (int i = 0; i < nb; ++i) {
    res.coded_extrinsic(pos++) = res.info_app(i) - ls(i);
    if (!code.puncture_to_half || i % 2 == 0) {
      res.coded_extrinsic(pos++) = out1.coded_app(2 * i + 1) - lp1(i);
    }
    if (!code.puncture_to_half || i % 2 == 1) {
      res.coded_extrinsic(pos++) = p2_app_deint(i) - lp2(i);
    }
  }
  for (int i = 0; i < m; ++i) {
    res.coded_extrinsic(pos++) = out1.coded_app(2 * (nb + i)) - tail_s1(i);
    res.coded_extrinsic(pos++) = out1.coded_app(2 * (nb + i) + 1) - tail_p1(i);
  }
  for (int i = 0; i < m; ++i) {
    res.coded_extrinsic(pos++) = out2.coded_app(2 * (nb + i)) - tail_s2(i);
    res.coded_extrinsic(pos++) = out2.coded_app(2 * (nb + i) + 1) - tail_p2(i);
  }
  return res;
}

}  // namespace gep
