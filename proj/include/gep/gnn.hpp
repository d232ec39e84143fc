#pragma once

#include <cstdint>
#include <vector>

#include "gep/common.hpp"
#include "gep/rng.hpp"

namespace gep {

struct GnnHyperparams {
  int n_u = 8;
  int n_h1 = 64;
  int n_h2 = 32;
  int rounds = 2;

  void validate() const;
};

struct Linear {
  Matrix w;
  Vector b;
};

// All weights of the graph network.  GRU gate rows are stacked in the order
// reset, update, candidate; the candidate pre-activation follows
// n = tanh(Wi_n x + bi_n + r .* (Wh_n g + bh_n)).
struct GnnParameters {
  Linear embed;              // n_u x 3
  Linear msg1, msg2, msg3;   // (2n_u+2) -> n_h1 -> n_h2 -> n_u
  Matrix gru_wi;             // 3n_h1 x (n_u+2)
  Matrix gru_wh;             // 3n_h1 x n_h1
  Vector gru_bi, gru_bh;     // 3n_h1
  Linear out;                // n_u x n_h1
  Linear read1, read2, read3;  // n_u -> n_h1 -> n_h2 -> m

  static GnnParameters zeros(const GnnHyperparams& hp, int m_levels);
  int m_levels() const { return static_cast<int>(read3.w.rows()); }
};

struct TensorView {
  const char* name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index size() const { return rows * cols; }
};

std::vector<TensorView> tensor_views(GnnParameters& p);

// Zero-mean normal entries with variance 2/(fan_in+fan_out); biases zero.
GnnParameters glorot_init(const GnnHyperparams& hp, int m_levels, Rng& rng);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  int64_t step = 0;
};

AdamState adam_init(GnnParameters& params);
void adam_step(GnnParameters* params, GnnParameters* grads, AdamState* state,
               const AdamConfig& cfg);

// Static graph description for a batch of detection instances.  Node columns
// are sample-major (sample s, node k -> column s*n_nodes + k); the edge list
// enumerates, per sample, destinations in ascending order and for each
// destination its sources in ascending order.
struct GnnBatch {
  int n_samples = 0;
  int n_nodes = 0;
  Matrix node_init;   // 3 x (n_samples*n_nodes): [y'h_k, h_k'h_k, sigma_w2]
  Matrix edge_feat;   // 2 x n_edges: [h_k'h_j, sigma_w2]
  std::vector<int> edge_src;       // node-column index of j
  std::vector<int> edge_dst;       // node-column index of k
  std::vector<std::uint8_t> edge_active;  // per-edge retain flag

  int n_node_cols() const { return n_samples * n_nodes; }
  int n_edges() const { return static_cast<int>(edge_src.size()); }
};

// Tape-recording executor over the batch: alternating calls from the
// detection loop drive it one network layer at a time, then a single
// backward pass replays the whole tape.  Node/GRU state carries across
// layers; gradients flow through that carried state, while the per-layer
// node attributes are treated as externally supplied constants.
class GnnCore {
 public:
  // Takes the batch by value; `params` must outlive the core.
  GnnCore(const GnnParameters& params, const GnnHyperparams& hp,
          GnnBatch batch);

  // Clears state and tape; records the embedding of the node-init features.
  void begin();
  // Runs `rounds` message-passing rounds with the given per-node attributes
  // (2 x node columns), then the readout.  Returns logits, m x node columns.
  const Matrix& layer_forward(const Matrix& node_attrs);
  // Per-edge activity can change between layers (pruning); length n_edges.
  void set_edge_mask(const std::vector<std::uint8_t>& active);

  int n_layers_done() const { return static_cast<int>(layers_.size()); }

  // Accumulates parameter gradients for a loss attached to the last layer's
  // logits.  Earlier layers contribute through the carried state only.
  void backward(const Matrix& d_last_logits, GnnParameters* grads) const;

 private:
  struct RoundTape {
    Matrix u_in;            // n_u x C
    Matrix h1, h2;          // post-ReLU, x E
    Matrix msg;             // n_u x E, masked columns zeroed
    Matrix x;               // (n_u+2) x C: aggregated messages + attributes
    Matrix g_prev, r, z, n, hh_n, g_new;  // gate tape, n_h1 x C
    Matrix u_out;           // n_u x C
    std::vector<std::uint8_t> mask;
  };
  struct LayerTape {
    std::vector<RoundTape> rounds;
    Matrix r1, r2, logits;  // readout tape
  };

  void run_round(RoundTape* t);

  const GnnParameters& p_;
  GnnHyperparams hp_;
  GnnBatch batch_;
  std::vector<std::uint8_t> mask_;
  Matrix u_, g_;
  std::vector<LayerTape> layers_;
};

// Column-wise softmax, numerically shifted.
Matrix softmax_columns(const Matrix& logits);

}  // namespace gep
