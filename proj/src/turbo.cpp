#include "gep/turbo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "gep/training.hpp"

namespace gep {

std::string detector_name(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kEp: return "ep";
    case DetectorKind::kGepnetApp: return "gepnet-app";
    case DetectorKind::kGepnetIa0: return "gepnet-ia0";
    case DetectorKind::kExtGepnet: return "ext-gepnet";
    case DetectorKind::kLmmse: return "lmmse";
    case DetectorKind::kMapOracle: return "map-oracle";
  }
  throw ConfigError("unknown detector kind");
}

DetectorKind detector_from_name(const std::string& name) {
  if (name == "ep") return DetectorKind::kEp;
  if (name == "gepnet-app") return DetectorKind::kGepnetApp;
  if (name == "gepnet-ia0") return DetectorKind::kGepnetIa0;
  if (name == "ext-gepnet") return DetectorKind::kExtGepnet;
  if (name == "lmmse") return DetectorKind::kLmmse;
  if (name == "map-oracle") return DetectorKind::kMapOracle;
  throw ConfigError("unknown detector name: " + name);
}

// ---- outer code -------------------------------------------------------------

IddCode::IddCode(const IddCodeSpec& spec)
    : spec_(spec), trellis_(Trellis::feed_forward({0133, 0171}, 7)) {
  if (spec.info_length <= 0) throw ConfigError("info length must be positive");
  const Rng root(spec.interleaver_seed);
  if (spec.family == CodeFamily::kConvolutional) {
    n_steps_ = spec.info_length + trellis_.memory();
    puncture_ = spec.high_rate ? PunctureScheme::rate_5_6()
                               : PunctureScheme::none(2);
    coded_length_ = puncture_.punctured_length(n_steps_, 2);
  } else {
    Rng code_rng = root.substream("code-interleaver", 0);
    Interleaver inner(spec.info_length, code_rng);
    turbo_ = std::make_unique<TurboCode>(
        Trellis::recursive_systematic(013, 015, 4), std::move(inner), true);
    coded_length_ = turbo_->coded_length();
  }
  Rng chan_rng = root.substream("channel-interleaver", 0);
  channel_interleaver_ = std::make_unique<Interleaver>(coded_length_, chan_rng);
}

std::vector<int> IddCode::encode(const std::vector<int>& info_bits) const {
  if (static_cast<int>(info_bits.size()) != spec_.info_length) {
    throw InvalidLength("info word length mismatch");
  }
  std::vector<int> coded;
  if (spec_.family == CodeFamily::kConvolutional) {
    coded = puncture(cc_encode(trellis_, info_bits), puncture_);
  } else {
    coded = turbo_encode(*turbo_, info_bits);
  }
  return channel_interleaver_->permute(coded);
}

IddCode::DecodeResult IddCode::decode(const Vector& coded_priors) const {
  if (coded_priors.size() != coded_length_) {
    throw InvalidLength("coded LLR length mismatch");
  }
  const Vector stream = channel_interleaver_->inverse_permute(coded_priors);
  DecodeResult out;
  if (spec_.family == CodeFamily::kConvolutional) {
    const Vector full = depuncture_llrs(stream, puncture_, n_steps_, 2);
    BcjrInput in;
    in.coded_priors = full;
    in.info_priors = Vector::Zero(n_steps_);
    in.terminated = true;
    const BcjrOutput dec = bcjr_decode(trellis_, in);
    out.info_app = dec.info_app.head(spec_.info_length);
    const Vector full_ext = dec.coded_app - full;
    Vector kept(coded_length_);
    int slot = 0, kept_i = 0;
    const int period_slots = puncture_.period * 2;
    for (Eigen::Index i = 0; i < full_ext.size(); ++i) {
      if (puncture_.keep[slot]) kept(kept_i++) = full_ext(i);
      slot = (slot + 1) % period_slots;
    }
    out.coded_extrinsic = kept;
  } else {
    const TurboDecodeResult dec =
        turbo_decode(*turbo_, stream, spec_.inner_iterations);
    out.info_app = dec.info_app;
    out.coded_extrinsic = dec.coded_extrinsic;
  }
  out.decisions = hard_decisions(out.info_app);
  out.coded_extrinsic = channel_interleaver_->permute(out.coded_extrinsic);
  return out;
}

// ---- decoder-LLR range control ---------------------------------------------

Vector scale_decoder_llrs(const Vector& llrs, const LlrScaler& scaler) {
  if (scaler.range_bound <= 0.0 || llrs.size() == 0) return llrs;
  const double peak = llrs.cwiseAbs().maxCoeff();
  if (peak <= scaler.range_bound) return llrs;
  return llrs * (scaler.range_bound / peak);
}

LlrScaler make_trained_range_scaler(int bits_per_vector, double coverage,
                                    std::uint64_t seed) {
  const IaLut lut = build_ia_lut();
  Rng rng(seed);
  LlrScaler s;
  s.coverage = coverage;
  s.range_bound = llr_range_bound(lut, coverage, 20000, bits_per_vector, rng);
  return s;
}

// ---- transmission -----------------------------------------------------------

namespace {

// Channel draw + AWGN for one slot; optionally replaces the detector-side
// matrix with a pilot-based estimate while y keeps the true channel.
DetectionInstance simulate_slot(const MimoSystem& sys, const Vector& x,
                                double snr_db, double symbol_energy,
                                Rng& rng) {
  const ComplexMatrix hc =
      normalize_columns(generate_complex_channel(sys.channel, rng));
  const Matrix h = complex_to_real_matrix(hc);
  const RealChannelInstance raw =
      apply_awgn(h, x, snr_db, symbol_energy, rng);
  DetectionInstance inst;
  inst.h = raw.h;
  inst.y = raw.y;
  inst.sigma_w2 = raw.sigma_w2;
  if (sys.estimated_csi) {
    const int n_tx = sys.channel.n_tx;
    const int n_p = sys.n_pilots > 0 ? sys.n_pilots : n_tx;
    const ComplexMatrix pilots = dft_pilot_matrix(n_tx, n_p);
    ComplexMatrix obs = hc * pilots;
    const double sd = std::sqrt(inst.sigma_w2);
    for (Eigen::Index r = 0; r < obs.rows(); ++r) {
      for (Eigen::Index cc = 0; cc < obs.cols(); ++cc) {
        obs(r, cc) += std::complex<double>(sd * rng.normal(),
                                           sd * rng.normal());
      }
    }
    ComplexMatrix prior = ComplexMatrix::Identity(n_tx, n_tx) *
                          (1.0 / sys.channel.n_rx);
    if (sys.est_prior_matched &&
        sys.channel.kind == ChannelKind::KroneckerCorrelated) {
      prior = exponential_correlation(n_tx, sys.channel.corr_coeff)
                  .cast<std::complex<double>>() *
              (1.0 / sys.channel.n_rx);
    }
    const ChannelEstimate est =
        lmmse_channel_estimate(obs, pilots, inst.sigma_w2, prior);
    inst.h = complex_to_real_matrix(est.h);
  }
  return inst;
}

}  // namespace

TransmittedWord transmit_word(const std::vector<int>& info_bits,
                              const IddCode& code, const MimoSystem& sys,
                              double snr_db, const Constellation& c,
                              Rng& rng) {
  const int q = c.bits_per_symbol();
  const int k = 2 * sys.channel.n_tx;
  const int bits_per_slot = k * q;
  TransmittedWord word;
  word.info_bits = info_bits;
  word.n_coded_bits = code.coded_length();
  word.coded_stream = code.encode(info_bits);
  const int n_slots = (word.n_coded_bits + bits_per_slot - 1) / bits_per_slot;
  word.coded_stream.resize(static_cast<size_t>(n_slots) * bits_per_slot, 0);
  word.slot_levels.resize(n_slots);
  word.slots.reserve(n_slots);
  const double es = c.average_energy();
  for (int s = 0; s < n_slots; ++s) {
    std::vector<int>& levels = word.slot_levels[s];
    levels.resize(k);
    Vector x(k);
    for (int node = 0; node < k; ++node) {
      std::vector<int> bits(q);
      for (int j = 0; j < q; ++j) {
        bits[j] = word.coded_stream[static_cast<size_t>(s) * bits_per_slot +
                                    node * q + j];
      }
      levels[node] = c.index_of_bits(bits);
      x(node) = c.levels()(levels[node]);
    }
    word.slots.push_back(simulate_slot(sys, x, snr_db, es, rng));
  }
  return word;
}

// ---- detection --------------------------------------------------------------

SlotDetection detect_slot(const DetectorContext& ctx,
                          const DetectionInstance& inst,
                          const Vector& prior_llrs, const Constellation& c) {
  const int k = static_cast<int>(inst.h.cols());
  const int q = c.bits_per_symbol();
  if (prior_llrs.size() != static_cast<Eigen::Index>(k) * q) {
    throw InvalidLength("prior LLR length mismatch");
  }
  DetectionInstance local = inst;
  local.sigma_w2 = std::max(inst.sigma_w2, 1e-12);
  std::vector<SymbolPdf> priors(k);
  for (int node = 0; node < k; ++node) {
    priors[node] = prior_pdf_from_llrs(prior_llrs.segment(node * q, q), c);
  }
  const double clip = ctx.gepnet.ep.llr_clip;
  SlotDetection out;
  switch (ctx.kind) {
    case DetectorKind::kEp: {
      const EpResult r = ep_detect(local.h, local.y, local.sigma_w2, priors, c,
                                   ctx.gepnet.ep);
      out.extrinsic = extrinsic_bit_llrs(r.posteriors, prior_llrs, c, clip);
      out.symbol_argmax = hard_symbol_decisions(r.posteriors);
      return out;
    }
    case DetectorKind::kLmmse: {
      const std::vector<SymbolPdf> p =
          lmmse_soft_detect(local.h, local.y, local.sigma_w2, priors, c,
                            ctx.gepnet.ep.variance_floor);
      out.extrinsic = extrinsic_bit_llrs(p, prior_llrs, c, clip);
      out.symbol_argmax = hard_symbol_decisions(p);
      return out;
    }
    case DetectorKind::kMapOracle: {
      const std::vector<SymbolPdf> p =
          map_posteriors(local.h, local.y, local.sigma_w2, priors, c);
      out.extrinsic = extrinsic_bit_llrs(p, prior_llrs, c, clip);
      out.symbol_argmax = hard_symbol_decisions(p);
      return out;
    }
    case DetectorKind::kGepnetApp:
    case DetectorKind::kGepnetIa0:
    case DetectorKind::kExtGepnet: {
      if (!ctx.params) {
        throw ConfigError("network detector requires loaded weights");
      }
      const GepnetResult r =
          gepnet_forward(local, priors, *ctx.params, ctx.gepnet, c);
      if (ctx.kind == DetectorKind::kExtGepnet) {
        out.extrinsic = ext_llr_head(r, c, clip);
        out.symbol_argmax = hard_symbol_decisions(r.q_last);
      } else {
        out.extrinsic = extrinsic_bit_llrs(r.posterior, prior_llrs, c, clip);
        out.symbol_argmax = hard_symbol_decisions(r.posterior);
      }
      return out;
    }
  }
  throw ConfigError("unknown detector kind");
}

// ---- the exchange loop ------------------------------------------------------

IddRunResult run_idd(const TransmittedWord& word, const IddCode& code,
                     const TurboConfig& cfg, const DetectorContext& ctx,
                     const Constellation& c) {
  if (cfg.n_iterations < 1) throw ConfigError("need at least one iteration");
  const int q = c.bits_per_symbol();
  const int n_slots = static_cast<int>(word.slots.size());
  if (n_slots == 0) throw InvalidLength("word carries no slots");
  const int k = static_cast<int>(word.slots[0].h.cols());
  const int bits_per_slot = k * q;
  const auto padded = static_cast<Eigen::Index>(word.coded_stream.size());
  if (padded != static_cast<Eigen::Index>(n_slots) * bits_per_slot) {
    throw InvalidLength("padded stream does not tile the slots");
  }
  const double clip = ctx.gepnet.ep.llr_clip;

  Vector prior = Vector::Zero(padded);
  for (Eigen::Index i = word.n_coded_bits; i < padded; ++i) prior(i) = -clip;

  IddRunResult result;
  for (int iter = 0; iter < cfg.n_iterations; ++iter) {
    IddIterationTrace trace;
    trace.detector_extrinsic.resize(padded);
    trace.symbol_errors = 0;
    for (int s = 0; s < n_slots; ++s) {
      const SlotDetection det = detect_slot(
          ctx, word.slots[s], prior.segment(s * bits_per_slot, bits_per_slot),
          c);
      trace.detector_extrinsic.segment(s * bits_per_slot, bits_per_slot) =
          det.extrinsic;
      for (int node = 0; node < k; ++node) {
        if (det.symbol_argmax[node] != word.slot_levels[s][node]) {
          ++trace.symbol_errors;
        }
      }
    }
    const IddCode::DecodeResult dec =
        code.decode(trace.detector_extrinsic.head(word.n_coded_bits));
    trace.decoder_extrinsic = dec.coded_extrinsic;
    trace.info_decisions = dec.decisions;
    result.iterations.push_back(std::move(trace));
    if (iter + 1 < cfg.n_iterations) {
      prior.head(word.n_coded_bits) =
          scale_decoder_llrs(dec.coded_extrinsic, cfg.scaler);
    }
  }
  return result;
}

// ---- error accounting -------------------------------------------------------

void ErrorCounters::add_word(const std::vector<int>& truth,
                             const std::vector<int>& decisions) {
  if (truth.size() != decisions.size()) {
    throw InvalidLength("truth/decision length mismatch");
  }
  long long errs = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    errs += (truth[i] != decisions[i]) ? 1 : 0;
  }
  n_bits += static_cast<long long>(truth.size());
  n_bit_errors += errs;
  n_words += 1;
  n_word_errors += (errs > 0) ? 1 : 0;
}

void ErrorCounters::add_symbol_block(long long n, long long errors) {
  n_symbols += n;
  n_symbol_errors += errors;
}

void ErrorCounters::merge(const ErrorCounters& other) {
  n_bits += other.n_bits;
  n_bit_errors += other.n_bit_errors;
  n_words += other.n_words;
  n_word_errors += other.n_word_errors;
  n_symbols += other.n_symbols;
  n_symbol_errors += other.n_symbol_errors;
}

double ErrorCounters::ber() const {
  return n_bits > 0 ? static_cast<double>(n_bit_errors) / n_bits : 0.0;
}
double ErrorCounters::wer() const {
  return n_words > 0 ? static_cast<double>(n_word_errors) / n_words : 0.0;
}
double ErrorCounters::ser() const {
  return n_symbols > 0 ? static_cast<double>(n_symbol_errors) / n_symbols
                       : 0.0;
}
double ErrorCounters::ber_stderr() const {
  return wilson_stderr(n_bit_errors, n_bits);
}
double ErrorCounters::ser_stderr() const {
  return wilson_stderr(n_symbol_errors, n_symbols);
}

double wilson_stderr(long long k, long long n) {
  if (n <= 0) return 0.0;
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  return std::sqrt(kd * (nd - kd) / nd + 0.25) / (nd + 1.0);
}

bool should_stop(const ErrorCounters& c, const StopRule& rule) {
  if (c.n_words < rule.min_words) return false;
  if (c.n_word_errors >= rule.max_word_errors) return true;
  if (c.n_bits >= rule.max_bits) return true;
  if (c.n_words >= rule.max_words) return true;
  return false;
}

// ---- Monte Carlo drivers ----------------------------------------------------

namespace {

constexpr int kEvalBlock = 64;  // stop decisions happen at block boundaries

template <typename WordFn>
void run_block(int begin, int end, int n_threads, WordFn&& fn) {
  std::atomic<int> next{begin};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < end; i = next.fetch_add(1)) fn(i);
  };
  const int workers = std::max(1, std::min(n_threads, end - begin));
  if (workers == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace

IddPointResult evaluate_idd_point(const MimoSystem& sys, const TurboConfig& cfg,
                                  const DetectorContext& ctx,
                                  const Constellation& c, double snr_db,
                                  std::uint64_t seed, int n_threads,
                                  const StopRule& stop) {
  const IddCode code(cfg.code);
  const Rng root(seed);
  IddPointResult out;
  out.per_iteration.assign(cfg.n_iterations, ErrorCounters{});

  struct WordOut {
    std::vector<int> info;
    std::vector<std::vector<int>> decisions;
    std::vector<long long> symbol_errors;
    long long n_symbols = 0;
  };

  int word_index = 0;
  for (;;) {
    const int begin = word_index;
    const int end = begin + kEvalBlock;
    std::vector<WordOut> block(kEvalBlock);
    run_block(begin, end, n_threads, [&](int w) {
      Rng rng = root.substream("word", static_cast<std::uint64_t>(w));
      WordOut& o = block[w - begin];
      o.info.resize(code.info_length());
      for (int& b : o.info) b = rng.bit() ? 1 : 0;
      const TransmittedWord word =
          transmit_word(o.info, code, sys, snr_db, c, rng);
      const IddRunResult res = run_idd(word, code, cfg, ctx, c);
      o.n_symbols = static_cast<long long>(word.slots.size()) *
                    word.slots[0].h.cols();
      for (const IddIterationTrace& t : res.iterations) {
        o.decisions.push_back(t.info_decisions);
        o.symbol_errors.push_back(t.symbol_errors);
      }
    });
    for (const WordOut& o : block) {
      for (int it = 0; it < cfg.n_iterations; ++it) {
        out.per_iteration[it].add_word(o.info, o.decisions[it]);
        out.per_iteration[it].add_symbol_block(o.n_symbols,
                                               o.symbol_errors[it]);
      }
    }
    word_index = end;
    out.n_words = word_index;
    if (should_stop(out.per_iteration.back(), stop)) break;
  }
  return out;
}

UncodedPointResult evaluate_uncoded_point(const MimoSystem& sys,
                                          const DetectorContext& ctx,
                                          const Constellation& c,
                                          double snr_db, std::uint64_t seed,
                                          int n_threads, const StopRule& stop) {
  const Rng root(seed);
  const int q = c.bits_per_symbol();
  const int k = 2 * sys.channel.n_tx;
  const double es = c.average_energy();
  UncodedPointResult out;

  struct WordOut {
    long long symbol_errors = 0;
    long long bit_errors = 0;
  };

  int word_index = 0;
  for (;;) {
    const int begin = word_index;
    const int end = begin + kEvalBlock;
    std::vector<WordOut> block(kEvalBlock);
    run_block(begin, end, n_threads, [&](int w) {
      Rng rng = root.substream("word", static_cast<std::uint64_t>(w));
      std::vector<int> bits(static_cast<size_t>(k) * q);
      for (int& b : bits) b = rng.bit() ? 1 : 0;
      std::vector<int> levels(k);
      Vector x(k);
      for (int node = 0; node < k; ++node) {
        std::vector<int> node_bits(bits.begin() + static_cast<size_t>(node) * q,
                                   bits.begin() +
                                       static_cast<size_t>(node + 1) * q);
        levels[node] = c.index_of_bits(node_bits);
        x(node) = c.levels()(levels[node]);
      }
      const DetectionInstance inst = simulate_slot(sys, x, snr_db, es, rng);
      const SlotDetection det = detect_slot(
          ctx, inst, Vector::Zero(static_cast<Eigen::Index>(k) * q), c);
      WordOut& o = block[w - begin];
      for (int node = 0; node < k; ++node) {
        if (det.symbol_argmax[node] != levels[node]) ++o.symbol_errors;
        for (int j = 0; j < q; ++j) {
          if (c.label_bit(det.symbol_argmax[node], j) != bits[node * q + j]) {
            ++o.bit_errors;
          }
        }
      }
    });
    for (const WordOut& o : block) {
      ErrorCounters word_c;
      word_c.n_bits = static_cast<long long>(k) * q;
      word_c.n_bit_errors = o.bit_errors;
      word_c.n_words = 1;
      word_c.n_word_errors = (o.symbol_errors > 0) ? 1 : 0;
      word_c.n_symbols = k;
      word_c.n_symbol_errors = o.symbol_errors;
      out.counters.merge(word_c);
    }
    word_index = end;
    out.n_words = word_index;
    if (should_stop(out.counters, stop)) break;
  }
  return out;
}

}  // namespace gep
