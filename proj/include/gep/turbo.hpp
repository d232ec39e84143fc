#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gep/channel.hpp"
#include "gep/coding.hpp"
#include "gep/gepnet.hpp"

namespace gep {

enum class DetectorKind {
  kEp,
  kGepnetApp,  // posterior head, prior subtracted from the output
  kGepnetIa0,  // same head, weights trained without prior exposure
  kExtGepnet,  // network-pmf head, no subtraction
  kLmmse,
  kMapOracle,
};

std::string detector_name(DetectorKind kind);
DetectorKind detector_from_name(const std::string& name);

// ---- outer code -------------------------------------------------------------

enum class CodeFamily { kConvolutional, kTurbo };

struct IddCodeSpec {
  CodeFamily family = CodeFamily::kConvolutional;
  int info_length = 128;
  bool high_rate = false;     // rate-5/6 puncturing (convolutional only)
  int inner_iterations = 10;  // component exchanges (concatenated code only)
  std::uint64_t interleaver_seed = 1;
};

// Encoder / soft decoder pair plus the seeded channel interleaver.  All
// coded-bit vectors seen by callers are in transmitted (interleaved) order.
class IddCode {
 public:
  explicit IddCode(const IddCodeSpec& spec);

  const IddCodeSpec& spec() const { return spec_; }
  int info_length() const { return spec_.info_length; }
  int coded_length() const { return coded_length_; }

  std::vector<int> encode(const std::vector<int>& info_bits) const;

  struct DecodeResult {
    Vector info_app;
    Vector coded_extrinsic;  // transmitted order
    std::vector<int> decisions;
  };
  DecodeResult decode(const Vector& coded_priors) const;

 private:
  IddCodeSpec spec_;
  int coded_length_ = 0;
  Trellis trellis_;
  PunctureScheme puncture_;
  int n_steps_ = 0;  // trellis steps incl. tail (convolutional family)
  std::unique_ptr<TurboCode> turbo_;
  std::unique_ptr<Interleaver> channel_interleaver_;
};

// ---- decoder-LLR range control ---------------------------------------------

struct LlrScaler {
  double range_bound = 0.0;  // r; non-positive disables scaling
  double coverage = 0.97;    // the quantile the bound was drawn at
};

// Shrinks uniformly by r / max|llr| when the max exceeds r; identity
// otherwise.  Signs are never changed.
Vector scale_decoder_llrs(const Vector& llrs, const LlrScaler& scaler);

// Range bound estimated from the prior-LLR generator the network was trained
// on (mixed mutual-information levels).
LlrScaler make_trained_range_scaler(int bits_per_vector, double coverage = 0.97,
                                    std::uint64_t seed = 9);

// ---- transmission ------------------------------------------------------------

struct MimoSystem {
  ChannelModelSpec channel;
  int qam_points = 4;
  bool estimated_csi = false;
  int n_pilots = 0;  // 0 = one pilot per transmit antenna
  // Estimator row prior: identity/n_rx, or the transmit correlation matrix
  // scaled the same way when the channel is correlated.
  bool est_prior_matched = false;
};

struct TurboConfig {
  int n_iterations = 2;  // detector/decoder exchanges, >= 1
  DetectorKind detector = DetectorKind::kEp;
  IddCodeSpec code;
  LlrScaler scaler;
};

struct DetectorContext {
  DetectorKind kind = DetectorKind::kEp;
  GepnetConfig gepnet;  // gepnet.ep also parameterizes the classical detectors
  const GnnParameters* params = nullptr;  // network detectors only
};

// One codeword over ceil(N_c / (K*Q)) slots, each with its own channel draw;
// the tail of the last slot is zero-padded.
struct TransmittedWord {
  std::vector<int> info_bits;
  std::vector<int> coded_stream;  // padded, transmitted order
  std::vector<std::vector<int>> slot_levels;
  std::vector<DetectionInstance> slots;
  int n_coded_bits = 0;  // before padding
};

TransmittedWord transmit_word(const std::vector<int>& info_bits,
                              const IddCode& code, const MimoSystem& sys,
                              double snr_db, const Constellation& c, Rng& rng);

// ---- detection --------------------------------------------------------------

struct SlotDetection {
  Vector extrinsic;             // K*Q bit LLRs, antenna-major
  std::vector<int> symbol_argmax;
};

SlotDetection detect_slot(const DetectorContext& ctx,
                          const DetectionInstance& inst,
                          const Vector& prior_llrs, const Constellation& c);

// ---- the exchange loop ------------------------------------------------------

struct IddIterationTrace {
  Vector detector_extrinsic;  // padded stream order
  Vector decoder_extrinsic;   // transmitted order, before scaling
  std::vector<int> info_decisions;
  long long symbol_errors = 0;  // detector hard decisions vs. transmitted
};

struct IddRunResult {
  std::vector<IddIterationTrace> iterations;
};

IddRunResult run_idd(const TransmittedWord& word, const IddCode& code,
                     const TurboConfig& cfg, const DetectorContext& ctx,
                     const Constellation& c);

// ---- error accounting -------------------------------------------------------

struct ErrorCounters {
  long long n_bits = 0, n_bit_errors = 0;
  long long n_words = 0, n_word_errors = 0;
  long long n_symbols = 0, n_symbol_errors = 0;

  void add_word(const std::vector<int>& truth,
                const std::vector<int>& decisions);
  void add_symbol_block(long long n, long long errors);
  void merge(const ErrorCounters& other);

  double ber() const;
  double wer() const;
  double ser() const;
  double ber_stderr() const;
  double ser_stderr() const;
};

// Wilson-score half-width at one standard deviation for k errors in n trials.
double wilson_stderr(long long k, long long n);

struct StopRule {
  long long max_word_errors = 200;
  long long max_bits = 50'000'000;
  long long min_words = 0;
  long long max_words = 1'000'000'000;
};

bool should_stop(const ErrorCounters& c, const StopRule& rule);

// ---- Monte Carlo drivers ----------------------------------------------------

// Coded transmission at one SNR.  Counters are indexed by exchange iteration
// (entry i = performance after i+1 detector/decoder passes).  Words are
// simulated in fixed-size blocks with one substream per word index, so the
// result is independent of the thread count.
struct IddPointResult {
  std::vector<ErrorCounters> per_iteration;
  long long n_words = 0;
};

IddPointResult evaluate_idd_point(const MimoSystem& sys, const TurboConfig& cfg,
                                  const DetectorContext& ctx,
                                  const Constellation& c, double snr_db,
                                  std::uint64_t seed, int n_threads,
                                  const StopRule& stop);

// Uncoded transmission: one independent slot per word, uniform priors,
// symbol-level hard decisions.
struct UncodedPointResult {
  ErrorCounters counters;
  long long n_words = 0;
};

UncodedPointResult evaluate_uncoded_point(const MimoSystem& sys,
                                          const DetectorContext& ctx,
                                          const Constellation& c,
                                          double snr_db, std::uint64_t seed,
                                          int n_threads, const StopRule& stop);

}  // namespace gep
