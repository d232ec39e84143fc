#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gep/ep.hpp"
#include "gep/gnn.hpp"

namespace gep {

enum class OutputHead { kApp, kExt };

struct GepnetConfig {
  EpConfig ep;
  GnnHyperparams gnn;
  double prune_alpha = 0.0;  // 0 keeps the full graph
  OutputHead head = OutputHead::kApp;
};

struct DetectionInstance {
  Matrix h;
  Vector y;
  double sigma_w2 = 0.0;
};

// Directional retain mask over ordered node pairs, destination-major (for
// each destination k ascending, sources j != k ascending).  An edge into k is
// dropped when its squared correlation falls below alpha times the average
// squared correlation seen by k.
std::vector<std::uint8_t> prune_edges(const Matrix& sigma, double alpha);

double retained_fraction(const std::vector<std::uint8_t>& mask);

// Graph layout shared by the single-instance and batched paths.
GnnBatch build_graph_batch(const std::vector<DetectionInstance>& instances);

struct GepnetResult {
  std::vector<SymbolPdf> q_last;     // network pmf at the final layer
  std::vector<SymbolPdf> posterior;  // prior-weighted pmf at the final layer
  double edge_retention = 1.0;       // fraction kept, averaged over layers
};

GepnetResult gepnet_forward(const DetectionInstance& inst,
                            const std::vector<SymbolPdf>& priors,
                            const GnnParameters& params,
                            const GepnetConfig& cfg, const Constellation& c);

// Posterior-pmf demap: a posteriori bit LLRs.
Vector app_llr_head(const GepnetResult& r, const Constellation& c,
                    double clip = kDefaultLlrClip);
// Network-pmf demap: extrinsic bit LLRs without prior subtraction.
Vector ext_llr_head(const GepnetResult& r, const Constellation& c,
                    double clip = kDefaultLlrClip);

// Batched forward pass that keeps the network tape alive for training.
// prior_pmf holds one pmf column per node, sample-major.  `params` must
// outlive the returned trace.
struct GepnetBatchTrace {
  std::unique_ptr<GnnCore> core;
  Matrix last_logits;  // m x (n_samples * n_nodes)
  Matrix log_prior;    // same shape
  double edge_retention = 1.0;
};

GepnetBatchTrace gepnet_batch_forward(
    const std::vector<DetectionInstance>& instances, const Matrix& prior_pmf,
    const GnnParameters& params, const GepnetConfig& cfg,
    const Constellation& c);

// ---- weight archives ----

struct ArchiveMetadata {
  double snr_train_db = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t training_step = 0;
  std::uint32_t head = 0;  // 0 = posterior head, 1 = extrinsic head
};

void save_weights(const std::string& path, const GnnParameters& params,
                  const GnnHyperparams& hp, const ArchiveMetadata& meta);

struct LoadedWeights {
  GnnHyperparams hp;
  int m_levels = 0;
  GnnParameters params;
  ArchiveMetadata meta;
};

LoadedWeights load_weights(const std::string& path);

}  // namespace gep
