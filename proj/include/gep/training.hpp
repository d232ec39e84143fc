#pragma once

#include <string>
#include <vector>

#include "gep/channel.hpp"
#include "gep/gepnet.hpp"
#include "gep/rng.hpp"

namespace gep {

// Mutual information between a bit and a Gaussian LLR with mean (2c-1)*mu and
// variance 2*mu; monotonically increasing in mu, 0 at mu = 0.
double mutual_information_of_mean(double mu, int quad_nodes = 64);
// Bisection inverse on [0, kLlrMeanCap]; exact 0 and cap at the endpoints.
double mean_for_mutual_information(double ia, int quad_nodes = 64);

inline constexpr double kLlrMeanCap = 100.0;

struct IaLut {
  std::vector<double> ia;
  std::vector<double> mu;

  int size() const { return static_cast<int>(ia.size()); }
  // Exact set membership; no interpolation.
  double mu_for(double ia_value) const;
};

IaLut build_ia_lut(int quad_nodes = 64);

// One Gaussian draw per bit: L ~ N((2c-1)*mu_a, 2*mu_a).
Vector sample_prior_llrs(const std::vector<int>& bits, double mu_a, Rng& rng);

// Empirical magnitude bound covering `coverage` of synthetic prior LLRs when
// the mutual-information level is drawn uniformly from the LUT per vector.
double llr_range_bound(const IaLut& lut, double coverage, int n_vectors,
                       int bits_per_vector, Rng& rng);

struct TrainingSample {
  DetectionInstance inst;
  std::vector<int> level_labels;  // transmitted level index per node
  std::vector<int> bits;          // demapped bits, node-major
  Vector prior_llrs;              // synthetic a-priori LLRs, one per bit
  Vector ext_labels;              // filled by the label-generation pass
  bool has_ext_labels = false;
};

struct SampleGenSpec {
  ChannelModelSpec channel;
  int qam_points = 4;
  double snr_db = 10.0;
  double snr_jitter_db = 0.0;  // uniform +/- jitter/2 per sample when > 0
  bool force_ia_zero = false;  // draw prior LLRs with zero mutual information
  // Probability of overriding the drawn prior quality with zero information.
  // Detection with no prior is the hardest regime and the first thing any
  // receiver faces; the plain lookup-table mix visits it only 1/8 of the time.
  double ia_zero_fraction = 0.0;
};

TrainingSample generate_training_sample(const SampleGenSpec& spec,
                                        const IaLut& lut, Rng& rng);

// Deterministic in (spec, seed); sample i uses an index-i substream.
std::vector<TrainingSample> generate_dataset(const SampleGenSpec& spec, int n,
                                             std::uint64_t seed);

void save_dataset(const std::string& path,
                  const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> load_dataset(const std::string& path);

// ---- losses (per batch of node columns; both return the mean-per-sample
// contribution scaled by inv_norm and accumulate d(loss)/d(logits)) ----

double loss_app(const Matrix& last_logits, const Matrix& log_prior,
                const std::vector<int>& level_labels, double inv_norm,
                Matrix* dlogits);

double loss_ext(const Matrix& last_logits, const Constellation& c,
                const Vector& label_llrs, double inv_norm, Matrix* dlogits);

// ---- step 2: extrinsic label generation ----

// Runs one masked inference per bit (prior at that bit zeroed) and collects
// that bit's posterior-head LLR; the masked prior makes the subtraction in
// the extrinsic definition vanish at the collected position.
Vector ext_labels_for_sample(const TrainingSample& sample,
                             const GnnParameters& app_params,
                             const GepnetConfig& cfg, const Constellation& c);

void generate_ext_labels(std::vector<TrainingSample>* samples, int n,
                         const GnnParameters& app_params,
                         const GepnetConfig& cfg, const Constellation& c,
                         int n_threads = 1);

// ---- training loops ----

struct TrainConfig {
  int epochs = 30;
  int batch_size = 128;
  int n_val = 1000;
  // Fixed-size forward/backward chunks; gradients reduce in chunk order, so
  // results do not depend on the thread count.
  int chunk_size = 32;
  int n_threads = 1;
  AdamConfig adam;
  std::uint64_t shuffle_seed = 77;
  int log_every = 0;  // epochs between progress lines on stderr; 0 = quiet
};

struct TrainResult {
  GnnParameters params;  // best-validation snapshot
  double best_val_loss = 0.0;
  int best_epoch = -1;  // -1 when no epoch ran
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

TrainResult train_step1(const std::vector<TrainingSample>& data,
                        const GnnParameters& init, const GepnetConfig& cfg,
                        const TrainConfig& tc, const Constellation& c);

// Warm start from the step-1 weights; requires ext labels on every sample.
TrainResult train_step3(const std::vector<TrainingSample>& data,
                        const GnnParameters& init, const GepnetConfig& cfg,
                        const TrainConfig& tc, const Constellation& c);

}  // namespace gep
