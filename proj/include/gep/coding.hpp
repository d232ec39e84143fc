#pragma once

#include <vector>

#include "gep/common.hpp"
#include "gep/rng.hpp"

namespace gep {

// Binary convolutional trellis over GF(2).  Supports non-recursive
// (feed-forward) generators and recursive systematic ones.  Bit LLR
// convention throughout: L = log P(b=1)/P(b=0).
class Trellis {
 public:
  // Generators in octal, MSB tap = current input; constraint = memory + 1.
  static Trellis feed_forward(const std::vector<unsigned>& gen_octal,
                              int constraint);
  // feedback_octal includes the leading tap for the current input; output is
  // [systematic, parity] per step.
  static Trellis recursive_systematic(unsigned feedback_octal,
                                      unsigned parity_octal, int constraint);

  int n_states() const { return 1 << memory_; }
  int n_outputs() const { return n_outputs_; }
  int memory() const { return memory_; }
  bool recursive() const { return recursive_; }

  int next_state(int state, int input) const {
    return next_state_[2 * state + input];
  }
  // Packed output bits; bit (n_outputs-1-j) holds generator j's output.
  int output_bits(int state, int input) const {
    return output_bits_[2 * state + input];
  }
  int output_bit(int state, int input, int j) const {
    return (output_bits(state, input) >> (n_outputs_ - 1 - j)) & 1;
  }
  // Input that steps the register toward the all-zero state.
  int tail_input(int state) const { return tail_input_[state]; }

 private:
  Trellis() = default;
  int memory_ = 0;
  int n_outputs_ = 0;
  bool recursive_ = false;
  std::vector<int> next_state_;
  std::vector<int> output_bits_;
  std::vector<int> tail_input_;
};

// Appends the terminating tail (memory steps) and returns the full coded
// stream, n_outputs bits per step, generator order within each step.
std::vector<int> cc_encode(const Trellis& trellis,
                           const std::vector<int>& info_bits);

// Periodic puncturing mask in coded-stream order.
struct PunctureScheme {
  int period = 1;          // trellis steps per period
  std::vector<int> keep;   // length period * n_outputs

  static PunctureScheme none(int n_outputs);
  // 10101 / 11010 over five steps of a rate-1/2 mother code.
  static PunctureScheme rate_5_6();

  int kept_per_period() const;
  // Punctured length for a stream of n_steps trellis steps.
  int punctured_length(int n_steps, int n_outputs) const;
};

std::vector<int> puncture(const std::vector<int>& coded,
                          const PunctureScheme& scheme);
// Re-inserts zeros (erasures) at punctured slots; full_steps trellis steps.
Vector depuncture_llrs(const Vector& kept_llrs, const PunctureScheme& scheme,
                       int full_steps, int n_outputs);

struct BcjrInput {
  Vector coded_priors;  // LLR per coded bit, stream order
  Vector info_priors;   // LLR per trellis step, tail steps included
  bool terminated = true;
};

struct BcjrOutput {
  Vector info_app;   // a posteriori LLR per trellis step
  Vector coded_app;  // a posteriori LLR per coded bit
};

// Exact log-MAP forward/backward pass (Jacobian logarithm, no table
// approximation).
BcjrOutput bcjr_decode(const Trellis& trellis, const BcjrInput& in);

// Random permutation; output[i] = input[mapping()[i]].
class Interleaver {
 public:
  Interleaver(int n, Rng& rng);
  static Interleaver identity(int n);

  int size() const { return static_cast<int>(map_.size()); }
  const std::vector<int>& mapping() const { return map_; }

  Vector permute(const Vector& in) const;
  Vector inverse_permute(const Vector& in) const;
  std::vector<int> permute(const std::vector<int>& in) const;

 private:
  explicit Interleaver(std::vector<int> map) : map_(std::move(map)) {}
  std::vector<int> map_;
};

std::vector<int> hard_decisions(const Vector& llrs);

// Parallel concatenation of two identical recursive systematic encoders.
// Stream layout per info step: systematic bit, then parity-1 and/or parity-2
// (alternating when punctured to rate 1/2).  Each encoder terminates
// independently with memory (tail, parity) pairs appended in order.
struct TurboCode {
  Trellis component;
  Interleaver interleaver;
  bool puncture_to_half = true;

  TurboCode(Trellis trellis, Interleaver il, bool puncture)
      : component(std::move(trellis)),
        interleaver(std::move(il)),
        puncture_to_half(puncture) {}

  int info_length() const { return interleaver.size(); }
  int coded_length() const;
};

std::vector<int> turbo_encode(const TurboCode& code,
                              const std::vector<int>& info_bits);

struct TurboDecodeResult {
  Vector info_app;            // length info_length
  Vector coded_extrinsic;     // per transmitted coded bit, stream order
  std::vector<int> decisions;
};

TurboDecodeResult turbo_decode(const TurboCode& code, const Vector& coded_llrs,
                               int n_iterations);

}  // namespace gep
