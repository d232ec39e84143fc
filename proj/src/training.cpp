#include "gep/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <thread>

#include "gep/io_util.hpp"
#include "gep/numerics.hpp"

namespace gep {

double mutual_information_of_mean(double mu, int quad_nodes) {
  if (mu < 0.0) throw NumericalDomain("LLR mean must be non-negative");
  if (mu == 0.0) return 0.0;
  constexpr double kLn2 = 0.6931471805599453;
  const double expected = gauss_hermite_expect(
      [](double l) { return softplus(-l); }, mu, 2.0 * mu, quad_nodes);
  return 1.0 - expected / kLn2;
}

double mean_for_mutual_information(double ia, int quad_nodes) {
  if (ia <= 0.0) return 0.0;
  if (ia >= 1.0) return kLlrMeanCap;
  double lo = 0.0, hi = kLlrMeanCap;
  if (mutual_information_of_mean(hi, quad_nodes) < ia) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mutual_information_of_mean(mid, quad_nodes) < ia) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12) return 0.5 * (lo + hi);
  }
  throw NumericalDomain("mutual-information inversion did not converge");
}

double IaLut::mu_for(double ia_value) const {
  for (int i = 0; i < size(); ++i) {
    if (std::abs(ia[i] - ia_value) < 1e-12) return mu[i];
  }
  throw ConfigError("mutual-information value not in the table");
}

IaLut build_ia_lut(int quad_nodes) {
  IaLut lut;
  lut.ia = {0.0, 0.33, 0.67, 0.78, 0.89, 0.94, 0.99, 1.0};
  lut.mu.reserve(lut.ia.size());
  for (double v : lut.ia) {
    lut.mu.push_back(mean_for_mutual_information(v, quad_nodes));
  }
  return lut;
}

Vector sample_prior_llrs(const std::vector<int>& bits, double mu_a, Rng& rng) {
  Vector llrs(static_cast<Eigen::Index>(bits.size()));
  const double sd = std::sqrt(2.0 * mu_a);
  for (size_t i = 0; i < bits.size(); ++i) {
    llrs(static_cast<Eigen::Index>(i)) =
        (2.0 * bits[i] - 1.0) * mu_a + sd * rng.normal();
  }
  return llrs;
}

double llr_range_bound(const IaLut& lut, double coverage, int n_vectors,
                       int bits_per_vector, Rng& rng) {
  if (coverage <= 0.0 || coverage > 1.0) {
    throw ConfigError("coverage must lie in (0, 1]");
  }
  std::vector<double> mags;
  mags.reserve(static_cast<size_t>(n_vectors) * bits_per_vector);
  std::vector<int> bits(bits_per_vector);
  for (int v = 0; v < n_vectors; ++v) {
    for (int& b : bits) b = rng.bit() ? 1 : 0;
    const double mu = lut.mu[rng.uniform_index(lut.size())];
    const Vector llrs = sample_prior_llrs(bits, mu, rng);
    for (Eigen::Index i = 0; i < llrs.size(); ++i) {
      mags.push_back(std::abs(llrs(i)));
    }
  }
  const auto n = static_cast<std::ptrdiff_t>(mags.size());
  std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(
                           std::ceil(coverage * static_cast<double>(n))) -
                       1;
  idx = std::clamp<std::ptrdiff_t>(idx, 0, n - 1);
  std::nth_element(mags.begin(), mags.begin() + idx, mags.end());
  return mags[static_cast<size_t>(idx)];
}

TrainingSample generate_training_sample(const SampleGenSpec& spec,
                                        const IaLut& lut, Rng& rng) {
  const Constellation c = Constellation::from_qam_order(spec.qam_points);
  const int q = c.bits_per_symbol();
  TrainingSample s;
  double snr = spec.snr_db;
  if (spec.snr_jitter_db > 0.0) {
    snr += (rng.uniform() - 0.5) * spec.snr_jitter_db;
  }
  const Matrix h = generate_channel(spec.channel, rng);
  const int k = static_cast<int>(h.cols());
  s.bits.resize(static_cast<size_t>(k) * q);
  for (int& b : s.bits) b = rng.bit() ? 1 : 0;
  const Vector x = modulate(s.bits, c);
  const RealChannelInstance ch =
      apply_awgn(h, x, snr, c.average_energy(), rng);
  s.inst.h = ch.h;
  s.inst.y = ch.y;
  s.inst.sigma_w2 = ch.sigma_w2;
  s.level_labels.resize(k);
  for (int node = 0; node < k; ++node) {
    std::vector<int> node_bits(s.bits.begin() + static_cast<size_t>(node) * q,
                               s.bits.begin() +
                                   static_cast<size_t>(node + 1) * q);
    s.level_labels[node] = c.index_of_bits(node_bits);
  }
  // Both draws happen unconditionally so the per-sample stream layout does
  // not depend on the prior-mix settings.
  const std::size_t lut_idx = rng.uniform_index(lut.size());
  const bool mix_zero = rng.uniform() < spec.ia_zero_fraction;
  const double mu =
      (spec.force_ia_zero || mix_zero) ? 0.0 : lut.mu[lut_idx];
  s.prior_llrs = sample_prior_llrs(s.bits, mu, rng);
  return s;
}

std::vector<TrainingSample> generate_dataset(const SampleGenSpec& spec, int n,
                                             std::uint64_t seed) {
  const IaLut lut = build_ia_lut();
  const Rng root(seed);
  std::vector<TrainingSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng sub = root.substream("train-sample", static_cast<std::uint64_t>(i));
    out.push_back(generate_training_sample(spec, lut, sub));
  }
  return out;
}

namespace {
constexpr std::uint32_t kDatasetVersion = 1;
const char kDatasetMagic[4] = {'G', 'E', 'P', 'D'};
}  // namespace

void save_dataset(const std::string& path,
                  const std::vector<TrainingSample>& samples) {
  std::string buf;
  buf.append(kDatasetMagic, 4);
  put_pod(&buf, kDatasetVersion);
  put_pod(&buf, static_cast<std::uint64_t>(samples.size()));
  for (const TrainingSample& s : samples) {
    const auto rows = static_cast<std::uint32_t>(s.inst.h.rows());
    const auto cols = static_cast<std::uint32_t>(s.inst.h.cols());
    put_pod(&buf, rows);
    put_pod(&buf, cols);
    for (Eigen::Index r = 0; r < s.inst.h.rows(); ++r) {
      for (Eigen::Index cc = 0; cc < s.inst.h.cols(); ++cc) {
        put_pod(&buf, s.inst.h(r, cc));
      }
    }
    for (Eigen::Index i = 0; i < s.inst.y.size(); ++i) {
      put_pod(&buf, s.inst.y(i));
    }
    put_pod(&buf, s.inst.sigma_w2);
    put_pod(&buf, static_cast<std::uint32_t>(s.bits.size()));
    for (int b : s.bits) buf.push_back(static_cast<char>(b));
    for (int lvl : s.level_labels) {
      put_pod(&buf, static_cast<std::uint32_t>(lvl));
    }
    for (Eigen::Index i = 0; i < s.prior_llrs.size(); ++i) {
      put_pod(&buf, s.prior_llrs(i));
    }
    buf.push_back(s.has_ext_labels ? 1 : 0);
    if (s.has_ext_labels) {
      for (Eigen::Index i = 0; i < s.ext_labels.size(); ++i) {
        put_pod(&buf, s.ext_labels(i));
      }
    }
  }
  write_checked_file(path, buf);
}

std::vector<TrainingSample> load_dataset(const std::string& path) {
  const std::string body = read_checked_file(path);
  size_t pos = 0;
  if (body.size() < 16 || std::memcmp(body.data(), kDatasetMagic, 4) != 0) {
    throw ArchiveError("not a dataset file: " + path);
  }
  pos = 4;
  if (get_pod<std::uint32_t>(body, &pos) != kDatasetVersion) {
    throw ArchiveError("unsupported dataset version");
  }
  const auto n = get_pod<std::uint64_t>(body, &pos);
  std::vector<TrainingSample> out;
  out.reserve(n);
  for (std::uint64_t si = 0; si < n; ++si) {
    TrainingSample s;
    const auto rows = get_pod<std::uint32_t>(body, &pos);
    const auto cols = get_pod<std::uint32_t>(body, &pos);
    s.inst.h.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t cc = 0; cc < cols; ++cc) {
        s.inst.h(r, cc) = get_pod<double>(body, &pos);
      }
    }
    s.inst.y.resize(rows);
    for (std::uint32_t i = 0; i < rows; ++i) {
      s.inst.y(i) = get_pod<double>(body, &pos);
    }
    s.inst.sigma_w2 = get_pod<double>(body, &pos);
    const auto n_bits = get_pod<std::uint32_t>(body, &pos);
    s.bits.resize(n_bits);
    for (std::uint32_t i = 0; i < n_bits; ++i) {
      if (pos >= body.size()) throw ArchiveError("dataset truncated");
      s.bits[i] = body[pos++];
    }
    s.level_labels.resize(cols);
    for (std::uint32_t i = 0; i < cols; ++i) {
      s.level_labels[i] = static_cast<int>(get_pod<std::uint32_t>(body, &pos));
    }
    s.prior_llrs.resize(n_bits);
    for (std::uint32_t i = 0; i < n_bits; ++i) {
      s.prior_llrs(i) = get_pod<double>(body, &pos);
    }
    if (pos >= body.size()) throw ArchiveError("dataset truncated");
    s.has_ext_labels = body[pos++] != 0;
    if (s.has_ext_labels) {
      s.ext_labels.resize(n_bits);
      for (std::uint32_t i = 0; i < n_bits; ++i) {
        s.ext_labels(i) = get_pod<double>(body, &pos);
      }
    }
    out.push_back(std::move(s));
  }
  if (pos != body.size()) throw ArchiveError("trailing bytes in dataset");
  return out;
}

double loss_app(const Matrix& last_logits, const Matrix& log_prior,
                const std::vector<int>& level_labels, double inv_norm,
                Matrix* dlogits) {
  if (static_cast<Eigen::Index>(level_labels.size()) != last_logits.cols()) {
    throw InvalidLength("one level label per node column required");
  }
  const Matrix p = softmax_columns(last_logits + log_prior);
  double loss = 0.0;
  for (Eigen::Index col = 0; col < p.cols(); ++col) {
    loss -= std::log(std::max(p(level_labels[col], col), 1e-300));
  }
  if (dlogits) {
    Matrix g = p;
    for (Eigen::Index col = 0; col < p.cols(); ++col) {
      g(level_labels[col], col) -= 1.0;
    }
    *dlogits += inv_norm * g;
  }
  return loss * inv_norm;
}

double loss_ext(const Matrix& last_logits, const Constellation& c,
                const Vector& label_llrs, double inv_norm, Matrix* dlogits) {
  const int m = c.size();
  const int q = c.bits_per_symbol();
  if (last_logits.rows() != m) {
    throw InvalidLength("logit rows must match the constellation size");
  }
  if (label_llrs.size() != last_logits.cols() * q) {
    throw InvalidLength("one label LLR per bit required");
  }
  std::vector<std::vector<int>> set1(q), set0(q);
  for (int bit = 0; bit < q; ++bit) {
    for (int a = 0; a < m; ++a) {
      (c.label_bit(a, bit) ? set1[bit] : set0[bit]).push_back(a);
    }
  }
  auto subset_lse = [&](const Vector& z, const std::vector<int>& set) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int a : set) mx = std::max(mx, z(a));
    double acc = 0.0;
    for (int a : set) acc += std::exp(z(a) - mx);
    return mx + std::log(acc);
  };

  double loss = 0.0;
  for (Eigen::Index col = 0; col < last_logits.cols(); ++col) {
    const Vector z = last_logits.col(col);
    for (int bit = 0; bit < q; ++bit) {
      const double lse1 = subset_lse(z, set1[bit]);
      const double lse0 = subset_lse(z, set0[bit]);
      const double ltilde = lse1 - lse0;
      const double c_label = sigmoid(label_llrs(col * q + bit));
      loss += softplus(ltilde) - c_label * ltilde;
      if (dlogits) {
        const double d = sigmoid(ltilde) - c_label;
        for (int a : set1[bit]) {
          (*dlogits)(a, col) += inv_norm * d * std::exp(z(a) - lse1);
        }
        for (int a : set0[bit]) {
          (*dlogits)(a, col) -= inv_norm * d * std::exp(z(a) - lse0);
        }
      }
    }
  }
  return loss * inv_norm;
}

Vector ext_labels_for_sample(const TrainingSample& sample,
                             const GnnParameters& app_params,
                             const GepnetConfig& cfg, const Constellation& c) {
  const int k = static_cast<int>(sample.inst.h.cols());
  const int q = c.bits_per_symbol();
  const int j_total = k * q;
  if (sample.prior_llrs.size() != j_total) {
    throw InvalidLength("prior LLR length mismatch");
  }
  Vector labels(j_total);
  for (int j = 0; j < j_total; ++j) {
    Vector masked = sample.prior_llrs;
    masked(j) = 0.0;
    std::vector<SymbolPdf> priors(k);
    for (int node = 0; node < k; ++node) {
      priors[node] = prior_pdf_from_llrs(masked.segment(node * q, q), c);
    }
    const GepnetResult r =
        gepnet_forward(sample.inst, priors, app_params, cfg, c);
    const Vector app = app_llr_head(r, c, cfg.ep.llr_clip);
    labels(j) = app(j);
  }
  return labels;
}

void generate_ext_labels(std::vector<TrainingSample>* samples, int n,
                         const GnnParameters& app_params,
                         const GepnetConfig& cfg, const Constellation& c,
                         int n_threads) {
  n = std::min<int>(n, static_cast<int>(samples->size()));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      TrainingSample& s = (*samples)[i];
      s.ext_labels = ext_labels_for_sample(s, app_params, cfg, c);
      s.has_ext_labels = true;
    }
  };
  if (n_threads <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

namespace {

void add_params(GnnParameters* acc, GnnParameters* delta) {
  auto av = tensor_views(*acc);
  auto dv = tensor_views(*delta);
  for (size_t i = 0; i < av.size(); ++i) {
    Eigen::Map<Matrix>(av[i].data, av[i].rows, av[i].cols) +=
        Eigen::Map<const Matrix>(dv[i].data, dv[i].rows, dv[i].cols);
  }
}

struct ChunkResult {
  GnnParameters grads;
  double loss = 0.0;
};

// Forward (+ optional backward) over data[idx[begin..end)].
ChunkResult process_chunk(const std::vector<TrainingSample>& data,
                          const std::vector<int>& idx, int begin, int end,
                          const GnnParameters& params, const GepnetConfig& cfg,
                          const Constellation& c, bool ext_loss_mode,
                          double inv_norm, bool with_backward) {
  const int k = static_cast<int>(data[idx[begin]].inst.h.cols());
  const int q = c.bits_per_symbol();
  const int b = end - begin;
  std::vector<DetectionInstance> insts(b);
  Matrix prior_pmf(c.size(), static_cast<Eigen::Index>(b) * k);
  std::vector<int> labels(static_cast<size_t>(b) * k);
  Vector ext_labels(static_cast<Eigen::Index>(b) * k * q);
  for (int s = 0; s < b; ++s) {
    const TrainingSample& ts = data[idx[begin + s]];
    insts[s] = ts.inst;
    for (int node = 0; node < k; ++node) {
      prior_pmf.col(static_cast<Eigen::Index>(s) * k + node) =
          prior_pdf_from_llrs(ts.prior_llrs.segment(node * q, q), c);
      labels[static_cast<size_t>(s) * k + node] = ts.level_labels[node];
    }
    if (ext_loss_mode) {
      if (!ts.has_ext_labels) {
        throw Error("extrinsic labels missing from a training sample");
      }
      ext_labels.segment(static_cast<Eigen::Index>(s) * k * q, k * q) =
          ts.ext_labels;
    }
  }

  GepnetBatchTrace trace =
      gepnet_batch_forward(insts, prior_pmf, params, cfg, c);
  Matrix dlogits = Matrix::Zero(trace.last_logits.rows(),
                                trace.last_logits.cols());
  ChunkResult out;
  if (ext_loss_mode) {
    out.loss = loss_ext(trace.last_logits, c, ext_labels, inv_norm,
                        with_backward ? &dlogits : nullptr);
  } else {
    out.loss = loss_app(trace.last_logits, trace.log_prior, labels, inv_norm,
                        with_backward ? &dlogits : nullptr);
  }
  if (with_backward) {
    out.grads = GnnParameters::zeros(cfg.gnn, c.size());
    trace.core->backward(dlogits, &out.grads);
  }
  return out;
}

// Runs the chunks of [begin,end) across threads; reduces in chunk order.
double run_chunks(const std::vector<TrainingSample>& data,
                  const std::vector<int>& idx, int begin, int end,
                  const GnnParameters& params, const GepnetConfig& cfg,
                  const Constellation& c, bool ext_loss_mode, double inv_norm,
                  const TrainConfig& tc, GnnParameters* total_grads) {
  std::vector<std::pair<int, int>> bounds;
  for (int b = begin; b < end; b += tc.chunk_size) {
    bounds.emplace_back(b, std::min(b + tc.chunk_size, end));
  }
  std::vector<ChunkResult> results(bounds.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < bounds.size();
         i = next.fetch_add(1)) {
      results[i] = process_chunk(data, idx, bounds[i].first, bounds[i].second,
                                 params, cfg, c, ext_loss_mode, inv_norm,
                                 total_grads != nullptr);
    }
  };
  const int n_workers =
      std::max(1, std::min<int>(tc.n_threads, static_cast<int>(bounds.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  double loss = 0.0;
  for (ChunkResult& r : results) {
    loss += r.loss;
    if (total_grads) add_params(total_grads, &r.grads);
  }
  return loss;
}

TrainResult train_loop(const std::vector<TrainingSample>& data,
                       const GnnParameters& init, const GepnetConfig& cfg,
                       const TrainConfig& tc, const Constellation& c,
                       bool ext_loss_mode) {
  const int n = static_cast<int>(data.size());
  const int n_val = std::min(tc.n_val, n / 5);
  const int n_train = n - n_val;
  if (n_train <= 0) throw ConfigError("dataset too small for training");

  TrainResult res;
  res.params = init;
  GnnParameters params = init;
  AdamState adam = adam_init(params);

  std::vector<int> val_idx(n_val);
  for (int i = 0; i < n_val; ++i) val_idx[i] = n_train + i;
  auto eval_val = [&](const GnnParameters& p) {
    if (n_val == 0) return 0.0;
    return run_chunks(data, val_idx, 0, n_val, p, cfg, c, ext_loss_mode,
                      1.0 / n_val, tc, nullptr);
  };

  res.best_val_loss = eval_val(params);
  std::vector<int> order(n_train);
  for (int i = 0; i < n_train; ++i) order[i] = i;
  const Rng shuffle_root(tc.shuffle_seed);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    Rng shuffle = shuffle_root.substream("epoch", epoch);
    for (int i = n_train - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle.uniform_index(i + 1)]);
    }
    double epoch_loss = 0.0;
    for (int b = 0; b < n_train; b += tc.batch_size) {
      const int e = std::min(b + tc.batch_size, n_train);
      GnnParameters grads = GnnParameters::zeros(cfg.gnn, c.size());
      const double batch_loss =
          run_chunks(data, order, b, e, params, cfg, c, ext_loss_mode,
                     1.0 / (e - b), tc, &grads);
      if (!std::isfinite(batch_loss)) {
        throw Error("training diverged (non-finite loss) at epoch " +
                    std::to_string(epoch));
      }
      adam_step(&params, &grads, &adam, tc.adam);
      epoch_loss += batch_loss * (e - b);
    }
    res.train_loss.push_back(epoch_loss / n_train);
    const double val = eval_val(params);
    res.val_loss.push_back(val);
    if (n_val == 0 || val < res.best_val_loss) {
      res.best_val_loss = val;
      res.best_epoch = epoch;
      res.params = params;
    }
    if (tc.log_every > 0 && (epoch + 1) % tc.log_every == 0) {
      std::fprintf(stderr, "epoch %d/%d train %.5f val %.5f best %.5f\n",
                   epoch + 1, tc.epochs, res.train_loss.back(), val,
                   res.best_val_loss);
    }
  }
  return res;
}

}  // namespace

TrainResult train_step1(const std::vector<TrainingSample>& data,
                        const GnnParameters& init, const GepnetConfig& cfg,
                        const TrainConfig& tc, const Constellation& c) {
  return train_loop(data, init, cfg, tc, c, false);
}

TrainResult train_step3(const std::vector<TrainingSample>& data,
                        const GnnParameters& init, const GepnetConfig& cfg,
                        const TrainConfig& tc, const Constellation& c) {
  return train_loop(data, init, cfg, tc, c, true);
}

}  // namespace gep
