#include "gep/gepnet.hpp"

#include <cmath>
#include <cstring>

#include "gep/io_util.hpp"
#include "gep/numerics.hpp"

namespace gep {

std::vector<std::uint8_t> prune_edges(const Matrix& sigma, double alpha) {
  const int k = static_cast<int>(sigma.rows());
  if (sigma.cols() != k) throw InvalidLength("covariance must be square");
  if (alpha < 0.0) throw ConfigError("pruning factor must be non-negative");
  Matrix rho2(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      rho2(i, j) = sigma(i, j) * sigma(i, j) / (sigma(i, i) * sigma(j, j));
    }
  }
  std::vector<std::uint8_t> mask;
  mask.reserve(static_cast<size_t>(k) * (k - 1));
  for (int dst = 0; dst < k; ++dst) {
    double mean = 0.0;
    for (int src = 0; src < k; ++src) {
      if (src != dst) mean += rho2(src, dst);
    }
    mean /= std::max(k - 1, 1);
    for (int src = 0; src < k; ++src) {
      if (src == dst) continue;
      mask.push_back(rho2(src, dst) < alpha * mean ? 0 : 1);
    }
  }
  return mask;
}

double retained_fraction(const std::vector<std::uint8_t>& mask) {
  if (mask.empty()) return 1.0;
  double kept = 0.0;
  for (auto m : mask) kept += m;
  return kept / static_cast<double>(mask.size());
}

GnnBatch build_graph_batch(const std::vector<DetectionInstance>& instances) {
  if (instances.empty()) throw InvalidLength("empty instance batch");
  const int b = static_cast<int>(instances.size());
  const int k = static_cast<int>(instances[0].h.cols());
  GnnBatch batch;
  batch.n_samples = b;
  batch.n_nodes = k;
  batch.node_init.resize(3, b * k);
  batch.edge_feat.resize(2, static_cast<Eigen::Index>(b) * k * (k - 1));
  batch.edge_src.reserve(static_cast<size_t>(b) * k * (k - 1));
  batch.edge_dst.reserve(batch.edge_src.capacity());
  Eigen::Index e = 0;
  for (int s = 0; s < b; ++s) {
    const DetectionInstance& inst = instances[s];
    if (inst.h.cols() != k) {
      throw InvalidLength("instances in a batch must share the antenna count");
    }
    const Matrix gram = inst.h.transpose() * inst.h;
    const Vector yh = inst.h.transpose() * inst.y;
    for (int node = 0; node < k; ++node) {
      batch.node_init.col(static_cast<Eigen::Index>(s) * k + node)
          << yh(node), gram(node, node), inst.sigma_w2;
    }
    for (int dst = 0; dst < k; ++dst) {
      for (int src = 0; src < k; ++src) {
        if (src == dst) continue;
        batch.edge_feat.col(e) << gram(dst, src), inst.sigma_w2;
        batch.edge_src.push_back(s * k + src);
        batch.edge_dst.push_back(s * k + dst);
        ++e;
      }
    }
  }
  return batch;
}

namespace {

struct DriverOut {
  std::unique_ptr<GnnCore> core;
  Matrix last_logits;
  Matrix log_prior;
  double edge_retention = 1.0;
};

DriverOut run_layers(const std::vector<DetectionInstance>& insts,
                     const Matrix& prior_pmf, const GnnParameters& params,
                     const GepnetConfig& cfg, const Constellation& c) {
  const int b = static_cast<int>(insts.size());
  const int k = static_cast<int>(insts[0].h.cols());
  const int m = c.size();
  const Eigen::Index cols = static_cast<Eigen::Index>(b) * k;
  if (prior_pmf.rows() != m || prior_pmf.cols() != cols) {
    throw InvalidLength("prior pmf must be m x (samples * nodes)");
  }

  DriverOut out;
  out.log_prior = prior_pmf.array().max(1e-300).log().matrix();
  out.core = std::make_unique<GnnCore>(params, cfg.gnn,
                                       build_graph_batch(insts));
  out.core->begin();

  std::vector<Vector> lambda(b), gamma(b);
  for (int s = 0; s < b; ++s) {
    std::vector<SymbolPdf> priors(k);
    for (int node = 0; node < k; ++node) {
      priors[node] = prior_pmf.col(static_cast<Eigen::Index>(s) * k + node);
    }
    init_natural_params(priors, c, cfg.ep.variance_floor, &lambda[s],
                        &gamma[s]);
  }

  const int edges_per = k * (k - 1);
  std::vector<std::uint8_t> mask(static_cast<size_t>(b) * edges_per, 1);
  double retention_sum = 0.0;
  std::vector<Cavity> cavities(b);

  for (int t = 0; t < cfg.ep.n_layers; ++t) {
    Matrix attrs(2, cols);
    for (int s = 0; s < b; ++s) {
      const LmmseResult post = lmmse_step(insts[s].h, insts[s].y,
                                          insts[s].sigma_w2, lambda[s],
                                          gamma[s]);
      cavities[s] = cavity_marginals(post, lambda[s], gamma[s],
                                     cfg.ep.variance_floor);
      for (int node = 0; node < k; ++node) {
        const Eigen::Index ci = static_cast<Eigen::Index>(s) * k + node;
        attrs(0, ci) = cavities[s].mean(node);
        attrs(1, ci) = cavities[s].variance(node);
      }
      if (cfg.prune_alpha > 0.0) {
        const auto sample_mask = prune_edges(post.sigma, cfg.prune_alpha);
        std::copy(sample_mask.begin(), sample_mask.end(),
                  mask.begin() + static_cast<size_t>(s) * edges_per);
        retention_sum += retained_fraction(sample_mask);
      }
    }
    if (cfg.prune_alpha > 0.0) out.core->set_edge_mask(mask);
    const Matrix& logits = out.core->layer_forward(attrs);

    const bool last = t + 1 == cfg.ep.n_layers;
    if (last) {
      out.last_logits = logits;
      if (!cfg.ep.update_last_layer) break;
    }
    for (int s = 0; s < b; ++s) {
      Vector mean(k), var(k);
      for (int node = 0; node < k; ++node) {
        const Eigen::Index ci = static_cast<Eigen::Index>(s) * k + node;
        const SymbolPdf post_pmf =
            normalize_log_pdf(logits.col(ci) + out.log_prior.col(ci));
        const Moments mo = prior_moments(post_pmf, c);
        mean(node) = mo.mean;
        var(node) = mo.variance;
      }
      natural_update(mean, var, cavities[s], cfg.ep.damping,
                     cfg.ep.variance_floor, &lambda[s], &gamma[s]);
    }
  }
  out.edge_retention =
      cfg.prune_alpha > 0.0
          ? retention_sum / (static_cast<double>(cfg.ep.n_layers) * b)
          : 1.0;
  return out;
}

}  // namespace

GepnetResult gepnet_forward(const DetectionInstance& inst,
                            const std::vector<SymbolPdf>& priors,
                            const GnnParameters& params,
                            const GepnetConfig& cfg, const Constellation& c) {
  const int k = static_cast<int>(inst.h.cols());
  if (static_cast<int>(priors.size()) != k) {
    throw InvalidLength("one prior pmf per antenna required");
  }
  Matrix prior_pmf(c.size(), k);
  for (int node = 0; node < k; ++node) prior_pmf.col(node) = priors[node];
  DriverOut out = run_layers({inst}, prior_pmf, params, cfg, c);

  GepnetResult res;
  res.edge_retention = out.edge_retention;
  res.q_last.resize(k);
  res.posterior.resize(k);
  const Matrix q = softmax_columns(out.last_logits);
  for (int node = 0; node < k; ++node) {
    res.q_last[node] = q.col(node);
    res.posterior[node] =
        normalize_log_pdf(out.last_logits.col(node) + out.log_prior.col(node));
  }
  return res;
}

Vector app_llr_head(const GepnetResult& r, const Constellation& c,
                    double clip) {
  return posterior_bit_llrs(r.posterior, c, clip);
}

Vector ext_llr_head(const GepnetResult& r, const Constellation& c,
                    double clip) {
  return posterior_bit_llrs(r.q_last, c, clip);
}

GepnetBatchTrace gepnet_batch_forward(
    const std::vector<DetectionInstance>& instances, const Matrix& prior_pmf,
    const GnnParameters& params, const GepnetConfig& cfg,
    const Constellation& c) {
  DriverOut out = run_layers(instances, prior_pmf, params, cfg, c);
  GepnetBatchTrace trace;
  trace.core = std::move(out.core);
  trace.last_logits = std::move(out.last_logits);
  trace.log_prior = std::move(out.log_prior);
  trace.edge_retention = out.edge_retention;
  return trace;
}

// ---- weight archives ----

namespace {

constexpr std::uint32_t kArchiveVersion = 1;
const char kMagic[4] = {'G', 'E', 'P', 'W'};

}  // namespace

void save_weights(const std::string& path, const GnnParameters& params,
                  const GnnHyperparams& hp, const ArchiveMetadata& meta) {
  std::string buf;
  buf.append(kMagic, 4);
  put_pod(&buf, kArchiveVersion);
  put_pod(&buf, static_cast<std::uint32_t>(hp.n_u));
  put_pod(&buf, static_cast<std::uint32_t>(hp.n_h1));
  put_pod(&buf, static_cast<std::uint32_t>(hp.n_h2));
  put_pod(&buf, static_cast<std::uint32_t>(hp.rounds));
  auto& mutable_params = const_cast<GnnParameters&>(params);
  put_pod(&buf, static_cast<std::uint32_t>(params.m_levels()));
  put_pod(&buf, meta.snr_train_db);
  put_pod(&buf, meta.seed);
  put_pod(&buf, meta.training_step);
  put_pod(&buf, meta.head);
  const auto views = tensor_views(mutable_params);
  put_pod(&buf, static_cast<std::uint32_t>(views.size()));
  for (const TensorView& t : views) {
    const std::uint32_t name_len =
        static_cast<std::uint32_t>(std::strlen(t.name));
    put_pod(&buf, name_len);
    buf.append(t.name, name_len);
    put_pod(&buf, static_cast<std::uint64_t>(t.rows));
    put_pod(&buf, static_cast<std::uint64_t>(t.cols));
    Eigen::Map<const Matrix> m(t.data, t.rows, t.cols);
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index ccol = 0; ccol < t.cols; ++ccol) {
        put_pod(&buf, m(r, ccol));
      }
    }
  }
  write_checked_file(path, buf);
}

LoadedWeights load_weights(const std::string& path) {
  const std::string body = read_checked_file(path);
  if (body.size() < 12) throw ArchiveError("archive truncated");

  size_t pos = 0;
  if (std::memcmp(body.data(), kMagic, 4) != 0) {
    throw ArchiveError("not a weight archive");
  }
  pos = 4;
  const auto version = get_pod<std::uint32_t>(body, &pos);
  if (version != kArchiveVersion) {
    throw ArchiveError("unsupported archive version " +
                       std::to_string(version));
  }
  LoadedWeights lw;
  lw.hp.n_u = static_cast<int>(get_pod<std::uint32_t>(body, &pos));
  lw.hp.n_h1 = static_cast<int>(get_pod<std::uint32_t>(body, &pos));
  lw.hp.n_h2 = static_cast<int>(get_pod<std::uint32_t>(body, &pos));
  lw.hp.rounds = static_cast<int>(get_pod<std::uint32_t>(body, &pos));
  lw.m_levels = static_cast<int>(get_pod<std::uint32_t>(body, &pos));
  lw.meta.snr_train_db = get_pod<double>(body, &pos);
  lw.meta.seed = get_pod<std::uint64_t>(body, &pos);
  lw.meta.training_step = get_pod<std::uint32_t>(body, &pos);
  lw.meta.head = get_pod<std::uint32_t>(body, &pos);

  lw.params = GnnParameters::zeros(lw.hp, lw.m_levels);
  const auto views = tensor_views(lw.params);
  const auto n_tensors = get_pod<std::uint32_t>(body, &pos);
  if (n_tensors != views.size()) {
    throw ArchiveError("archive holds " + std::to_string(n_tensors) +
                       " tensors, expected " + std::to_string(views.size()));
  }
  for (const TensorView& t : views) {
    const auto name_len = get_pod<std::uint32_t>(body, &pos);
    if (pos + name_len > body.size()) throw ArchiveError("archive truncated");
    const std::string name = body.substr(pos, name_len);
    pos += name_len;
    if (name != t.name) {
      throw ArchiveError("unexpected tensor '" + name + "', expected '" +
                         t.name + "'");
    }
    const auto rows = get_pod<std::uint64_t>(body, &pos);
    const auto cols = get_pod<std::uint64_t>(body, &pos);
    if (rows != static_cast<std::uint64_t>(t.rows) ||
        cols != static_cast<std::uint64_t>(t.cols)) {
      throw ArchiveError("shape mismatch for tensor '" + name + "'");
    }
    Eigen::Map<Matrix> m(t.data, t.rows, t.cols);
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index ccol = 0; ccol < t.cols; ++ccol) {
        m(r, ccol) = get_pod<double>(body, &pos);
      }
    }
  }
  if (pos != body.size()) throw ArchiveError("trailing bytes in archive");
  return lw;
}

}  // namespace gep
