#include "gep/experiment.hpp"

#include <cstdio>

namespace gep {

std::string csv_header() {
  return "snr_db,detector,turbo_iter,ser,ber,wer,n_bits,n_errors,stderr_est,"
         "seed,git_rev";
}

std::string csv_line(const CsvRow& row) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%.6g,%s,%d,%.9e,%.9e,%.9e,%lld,%lld,%.9e,%llu,%s",
                row.snr_db, row.detector.c_str(), row.turbo_iter, row.ser,
                row.ber, row.wer, row.n_bits, row.n_errors, row.stderr_est,
                static_cast<unsigned long long>(row.seed),
                row.git_rev.c_str());
  return buf;
}

std::string detect_git_rev() {
  FILE* pipe = popen("git rev-parse --short HEAD 2>/dev/null", "r");
  if (!pipe) return "unknown";
  char buf[128];
  std::string out;
  while (fgets(buf, sizeof(buf), pipe)) out += buf;
  pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) {
    out.pop_back();
  }
  return out.empty() ? "unknown" : out;
}

// ---- config binding ---------------------------------------------------------

MimoSystem system_from_config(const ConfigMap& cfg) {
  MimoSystem sys;
  sys.channel.n_rx = cfg.get_int("system.n_rx", 4);
  sys.channel.n_tx = cfg.get_int("system.n_tx", 4);
  const std::string kind = cfg.get_string("system.channel", "iid");
  if (kind == "iid") {
    sys.channel.kind = ChannelKind::IidRayleigh;
  } else if (kind == "kronecker") {
    sys.channel.kind = ChannelKind::KroneckerCorrelated;
  } else {
    throw ConfigError("unknown channel model: " + kind);
  }
  sys.channel.corr_coeff = cfg.get_double("system.corr", 0.0);
  sys.qam_points = cfg.get_int("system.qam", 4);
  sys.estimated_csi = cfg.get_bool("system.estimated_csi", false);
  sys.n_pilots = cfg.get_int("system.n_pilots", 0);
  const std::string prior = cfg.get_string("system.est_prior", "identity");
  if (prior == "identity") {
    sys.est_prior_matched = false;
  } else if (prior == "matched") {
    sys.est_prior_matched = true;
  } else {
    throw ConfigError("system.est_prior must be identity or matched");
  }
  return sys;
}

GepnetConfig gepnet_from_config(const ConfigMap& cfg) {
  GepnetConfig g;
  g.ep.n_layers = cfg.get_int("detector.layers", 5);
  g.ep.damping = cfg.get_double("detector.damping", 0.2);
  g.ep.variance_floor = cfg.get_double("detector.variance_floor", 1e-8);
  g.ep.llr_clip = cfg.get_double("detector.llr_clip", kDefaultLlrClip);
  g.prune_alpha = cfg.get_double("detector.prune_alpha", 0.0);
  g.gnn.n_u = cfg.get_int("gnn.n_u", 8);
  g.gnn.n_h1 = cfg.get_int("gnn.n_h1", 64);
  g.gnn.n_h2 = cfg.get_int("gnn.n_h2", 32);
  g.gnn.rounds = cfg.get_int("gnn.rounds", 2);
  return g;
}

IddCodeSpec code_from_config(const ConfigMap& cfg) {
  IddCodeSpec code;
  const std::string family = cfg.get_string("code.family", "cc");
  if (family == "cc") {
    code.family = CodeFamily::kConvolutional;
  } else if (family == "turbo") {
    code.family = CodeFamily::kTurbo;
  } else {
    throw ConfigError("unknown code family: " + family);
  }
  code.info_length = cfg.get_int("code.info_length", 128);
  code.high_rate = cfg.get_bool("code.high_rate", false);
  code.inner_iterations = cfg.get_int("code.inner_iterations", 10);
  code.interleaver_seed = cfg.get_u64("code.interleaver_seed", 1);
  return code;
}

TurboConfig turbo_from_config(const ConfigMap& cfg, const MimoSystem& sys) {
  TurboConfig t;
  t.n_iterations = cfg.get_int("idd.iterations", 2);
  if (t.n_iterations < 1) throw ConfigError("idd.iterations must be >= 1");
  t.code = code_from_config(cfg);
  if (cfg.get_bool("idd.scale_llrs", false)) {
    const Constellation c = Constellation::from_qam_order(sys.qam_points);
    const int bits_per_vector = 2 * sys.channel.n_tx * c.bits_per_symbol();
    t.scaler = make_trained_range_scaler(
        bits_per_vector, cfg.get_double("idd.scale_coverage", 0.97),
        cfg.get_u64("idd.scale_seed", 9));
  }
  return t;
}

StopRule stop_from_config(const ConfigMap& cfg) {
  StopRule s;
  s.max_word_errors = cfg.get_int("stop.max_word_errors", 200);
  s.max_bits = static_cast<long long>(
      cfg.get_double("stop.max_bits", 50'000'000.0));
  s.min_words = cfg.get_int("stop.min_words", 0);
  s.max_words = cfg.get_int("stop.max_words", 1'000'000'000);
  return s;
}

SampleGenSpec datagen_from_config(const ConfigMap& cfg) {
  SampleGenSpec spec;
  const MimoSystem sys = system_from_config(cfg);
  spec.channel = sys.channel;
  spec.qam_points = sys.qam_points;
  spec.snr_db = cfg.get_double("data.snr_db", 10.0);
  spec.snr_jitter_db = cfg.get_double("data.snr_jitter_db", 0.0);
  spec.force_ia_zero = cfg.get_bool("data.force_ia_zero", false);
  spec.ia_zero_fraction = cfg.get_double("data.ia_zero_fraction", 0.0);
  if (spec.ia_zero_fraction < 0.0 || spec.ia_zero_fraction > 1.0) {
    throw ConfigError("data.ia_zero_fraction must be in [0, 1]");
  }
  return spec;
}

TrainConfig train_from_config(const ConfigMap& cfg) {
  TrainConfig t;
  t.epochs = cfg.get_int("train.epochs", 30);
  t.batch_size = cfg.get_int("train.batch", 128);
  t.n_val = cfg.get_int("train.n_val", 1000);
  t.chunk_size = cfg.get_int("train.chunk", 32);
  t.adam.lr = cfg.get_double("train.lr", 1e-3);
  t.shuffle_seed = cfg.get_u64("train.shuffle_seed", 77);
  t.log_every = cfg.get_int("train.log_every", 1);
  if (t.batch_size < 1 || t.chunk_size < 1) {
    throw ConfigError("train.batch and train.chunk must be positive");
  }
  return t;
}

std::vector<double> snr_list_from_config(const ConfigMap& cfg) {
  if (!cfg.has("system.snr_db")) {
    throw ConfigError("missing config key: system.snr_db");
  }
  std::vector<double> list = cfg.get_double_list("system.snr_db");
  if (list.empty()) throw ConfigError("system.snr_db is empty");
  return list;
}

std::vector<DetectorKind> detectors_from_config(const ConfigMap& cfg) {
  std::vector<DetectorKind> out;
  for (const std::string& name :
       cfg.get_string_list("detector.kinds")) {
    out.push_back(detector_from_name(name));
  }
  return out;
}

// ---- evaluation jobs --------------------------------------------------------

LoadedDetector load_detector(DetectorKind kind, const GepnetConfig& cfg,
                             const std::string& archive_path) {
  LoadedDetector d;
  d.ctx.kind = kind;
  d.ctx.gepnet = cfg;
  const bool needs_weights = kind == DetectorKind::kGepnetApp ||
                             kind == DetectorKind::kGepnetIa0 ||
                             kind == DetectorKind::kExtGepnet;
  if (!needs_weights) return d;
  if (archive_path.empty()) {
    throw ArchiveError("detector " + detector_name(kind) +
                       " requires a weight archive");
  }
  d.weights = std::make_shared<LoadedWeights>(load_weights(archive_path));
  d.ctx.gepnet.gnn = d.weights->hp;
  d.ctx.gepnet.head = kind == DetectorKind::kExtGepnet ? OutputHead::kExt
                                                       : OutputHead::kApp;
  d.ctx.params = &d.weights->params;
  return d;
}

EvalJob eval_job_from_config(const ConfigMap& cfg) {
  EvalJob job;
  job.system = system_from_config(cfg);
  job.gepnet = gepnet_from_config(cfg);
  job.turbo = turbo_from_config(cfg, job.system);
  job.detectors = detectors_from_config(cfg);
  job.snr_list = snr_list_from_config(cfg);
  job.stop = stop_from_config(cfg);
  job.seed = cfg.get_u64("system.seed", 1);
  job.n_threads = cfg.get_int("system.threads", 1);
  job.uncoded = cfg.get_string("idd.mode", "coded") == "uncoded";
  for (DetectorKind kind : job.detectors) {
    const std::string key = "archives." + detector_name(kind);
    if (cfg.has(key)) job.archives[kind] = cfg.get_string(key);
  }
  return job;
}

EvalOutput run_evaluation(const EvalJob& job, const std::string& git_rev) {
  const Constellation c = Constellation::from_qam_order(job.system.qam_points);
  std::vector<LoadedDetector> loaded;
  for (DetectorKind kind : job.detectors) {
    auto it = job.archives.find(kind);
    loaded.push_back(load_detector(
        kind, job.gepnet, it == job.archives.end() ? "" : it->second));
  }

  EvalOutput out;
  out.csv = csv_header() + "\n";
  for (double snr : job.snr_list) {
    for (size_t d = 0; d < loaded.size(); ++d) {
      const DetectorContext& ctx = loaded[d].ctx;
      std::vector<CsvRow> rows;
      if (job.uncoded) {
        const UncodedPointResult r = evaluate_uncoded_point(
            job.system, ctx, c, snr, job.seed, job.n_threads, job.stop);
        CsvRow row;
        row.snr_db = snr;
        row.detector = detector_name(ctx.kind);
        row.turbo_iter = 0;
        row.ser = r.counters.ser();
        row.ber = r.counters.ber();
        row.wer = r.counters.wer();
        row.n_bits = r.counters.n_bits;
        row.n_errors = r.counters.n_bit_errors;
        row.stderr_est = r.counters.ser_stderr();
        rows.push_back(row);
      } else {
        TurboConfig turbo = job.turbo;
        turbo.detector = ctx.kind;
        const IddPointResult r = evaluate_idd_point(
            job.system, turbo, ctx, c, snr, job.seed, job.n_threads, job.stop);
        for (int it = 0; it < static_cast<int>(r.per_iteration.size()); ++it) {
          const ErrorCounters& cnt = r.per_iteration[it];
          CsvRow row;
          row.snr_db = snr;
          row.detector = detector_name(ctx.kind);
          row.turbo_iter = it + 1;
          row.ser = cnt.ser();
          row.ber = cnt.ber();
          row.wer = cnt.wer();
          row.n_bits = cnt.n_bits;
          row.n_errors = cnt.n_bit_errors;
          row.stderr_est = cnt.ber_stderr();
          rows.push_back(row);
        }
      }
      for (CsvRow& row : rows) {
        row.seed = job.seed;
        row.git_rev = git_rev;
        out.csv += csv_line(row) + "\n";
        out.rows.push_back(std::move(row));
      }
    }
  }
  return out;
}

}  // namespace gep
