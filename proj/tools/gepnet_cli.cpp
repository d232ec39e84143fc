// Experiment driver: training, extrinsic-label generation, evaluation sweeps,
// and the receiver complexity calculator.  See README.md for the config file
// format and the GEP_* environment overrides.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gep/complexity.hpp"
#include "gep/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  int threads = 0;
  std::string archive;
};

void attach_common(CLI::App* cmd, CommonOpts* o, bool config_required) {
  auto* copt = cmd->add_option("--config", o->config_path, "config file path")
                   ->envname("GEP_CONFIG");
  if (config_required) copt->required();
  cmd->add_option("--seed", o->seed, "root seed override")
      ->envname("GEP_SEED");
  cmd->add_option("--out-dir", o->out_dir, "output directory")
      ->envname("GEP_OUT_DIR");
  cmd->add_option("--threads", o->threads, "worker thread count")
      ->envname("GEP_THREADS");
  cmd->add_option("--archive", o->archive, "weight archive path")
      ->envname("GEP_ARCHIVE");
}

gep::ConfigMap load_config(const CommonOpts& o) {
  return gep::ConfigMap::parse_file(o.config_path);
}

std::uint64_t resolved_seed(const CLI::App* cmd, const CommonOpts& o,
                            const gep::ConfigMap& cfg) {
  if (cmd->count("--seed")) return o.seed;
  return cfg.get_u64("system.seed", 1);
}

int resolved_threads(const CLI::App* cmd, const CommonOpts& o,
                     const gep::ConfigMap& cfg) {
  int t = cmd->count("--threads") ? o.threads
                                  : cfg.get_int("system.threads", 1);
  return t < 1 ? 1 : t;
}

std::string resolved_out_dir(const CLI::App* cmd, const CommonOpts& o,
                             const gep::ConfigMap& cfg) {
  std::string d = cmd->count("--out-dir")
                      ? o.out_dir
                      : cfg.get_string("paths.out_dir", "out");
  fs::create_directories(d);
  return d;
}

std::string resolved_archive(const CLI::App* cmd, const CommonOpts& o,
                             const gep::ConfigMap& cfg,
                             const std::string& config_key) {
  if (cmd->count("--archive")) return o.archive;
  const std::string path = cfg.get_string(config_key, "");
  if (path.empty()) {
    throw gep::ConfigError("no archive path: pass --archive or set " +
                           config_key);
  }
  return path;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw gep::Error("cannot write " + path);
  out << body;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const gep::ConfigMap& cfg, std::uint64_t seed, int threads,
                    const json& extra) {
  json m;
  m["command"] = command;
  m["seed"] = seed;
  m["threads"] = threads;
  m["git_rev"] = gep::detect_git_rev();
  m["timestamp"] = static_cast<long long>(std::time(nullptr));
  m["config"] = json::object();
  for (const auto& [key, value] : cfg.values()) m["config"][key] = value;
  m["extra"] = extra;
  write_text_file(out_dir + "/manifest.json", m.dump(2) + "\n");
}

std::vector<gep::TrainingSample> load_or_generate_dataset(
    const gep::ConfigMap& cfg, std::uint64_t seed, bool labeled) {
  const std::string key = labeled ? "data.labeled_path" : "data.path";
  const std::string path = cfg.get_string(key, "");
  if (!path.empty() && fs::exists(path)) {
    std::fprintf(stderr, "loading dataset %s\n", path.c_str());
    return gep::load_dataset(path);
  }
  if (labeled) {
    throw gep::ArchiveError("labeled dataset not found; run gen-ext-labels");
  }
  const gep::SampleGenSpec spec = gep::datagen_from_config(cfg);
  const int n = cfg.get_int("data.n_samples", 20000);
  std::fprintf(stderr, "generating %d training samples\n", n);
  std::vector<gep::TrainingSample> data = gep::generate_dataset(spec, n, seed);
  if (!path.empty()) gep::save_dataset(path, data);
  return data;
}

int cmd_train_step1(const CLI::App* cmd, const CommonOpts& o) {
  const gep::ConfigMap cfg = load_config(o);
  const std::uint64_t seed = resolved_seed(cmd, o, cfg);
  const int threads = resolved_threads(cmd, o, cfg);
  const std::string out_dir = resolved_out_dir(cmd, o, cfg);
  const gep::MimoSystem sys = gep::system_from_config(cfg);
  const gep::Constellation c =
      gep::Constellation::from_qam_order(sys.qam_points);
  const gep::GepnetConfig gcfg = gep::gepnet_from_config(cfg);
  gep::TrainConfig tc = gep::train_from_config(cfg);
  tc.n_threads = threads;

  const auto data = load_or_generate_dataset(cfg, seed, false);
  gep::Rng init_rng(cfg.get_u64("train.init_seed", 5));
  const gep::GnnParameters init =
      gep::glorot_init(gcfg.gnn, c.size(), init_rng);
  const gep::TrainResult res = gep::train_step1(data, init, gcfg, tc, c);

  const std::string archive =
      resolved_archive(cmd, o, cfg, "paths.archive_step1");
  gep::ArchiveMetadata meta;
  meta.snr_train_db = cfg.get_double("data.snr_db", 10.0);
  meta.seed = seed;
  meta.training_step = 1;
  meta.head = 0;
  gep::save_weights(archive, res.params, gcfg.gnn, meta);
  std::fprintf(stderr, "saved %s (best val %.5f at epoch %d)\n",
               archive.c_str(), res.best_val_loss, res.best_epoch);
  write_manifest(out_dir, "train-step1", cfg, seed, threads,
                 {{"archive", archive},
                  {"best_val_loss", res.best_val_loss},
                  {"best_epoch", res.best_epoch}});
  return 0;
}

int cmd_gen_ext_labels(const CLI::App* cmd, const CommonOpts& o) {
  const gep::ConfigMap cfg = load_config(o);
  const std::uint64_t seed = resolved_seed(cmd, o, cfg);
  const int threads = resolved_threads(cmd, o, cfg);
  const std::string out_dir = resolved_out_dir(cmd, o, cfg);
  const gep::MimoSystem sys = gep::system_from_config(cfg);
  const gep::Constellation c =
      gep::Constellation::from_qam_order(sys.qam_points);

  auto data = load_or_generate_dataset(cfg, seed, false);
  const std::string step1 =
      resolved_archive(cmd, o, cfg, "paths.archive_step1");
  const gep::LoadedWeights w = gep::load_weights(step1);
  gep::GepnetConfig gcfg = gep::gepnet_from_config(cfg);
  gcfg.gnn = w.hp;
  gep::generate_ext_labels(&data, static_cast<int>(data.size()), w.params,
                           gcfg, c, threads);
  std::string labeled = cfg.get_string("data.labeled_path", "");
  if (labeled.empty()) {
    labeled = cfg.get_string("data.path", "") + ".ext";
    if (labeled == ".ext") {
      throw gep::ConfigError("set data.labeled_path or data.path");
    }
  }
  gep::save_dataset(labeled, data);
  std::fprintf(stderr, "saved %s (%zu samples)\n", labeled.c_str(),
               data.size());
  write_manifest(out_dir, "gen-ext-labels", cfg, seed, threads,
                 {{"labeled_dataset", labeled}});
  return 0;
}

int cmd_train_step3(const CLI::App* cmd, const CommonOpts& o) {
  const gep::ConfigMap cfg = load_config(o);
  const std::uint64_t seed = resolved_seed(cmd, o, cfg);
  const int threads = resolved_threads(cmd, o, cfg);
  const std::string out_dir = resolved_out_dir(cmd, o, cfg);
  const gep::MimoSystem sys = gep::system_from_config(cfg);
  const gep::Constellation c =
      gep::Constellation::from_qam_order(sys.qam_points);
  gep::TrainConfig tc = gep::train_from_config(cfg);
  tc.n_threads = threads;

  const auto data = load_or_generate_dataset(cfg, seed, true);
  const std::string step1 = cfg.get_string("paths.archive_step1", "");
  if (step1.empty()) {
    throw gep::ConfigError("train-step3 warm-starts from paths.archive_step1");
  }
  const gep::LoadedWeights w = gep::load_weights(step1);
  gep::GepnetConfig gcfg = gep::gepnet_from_config(cfg);
  gcfg.gnn = w.hp;
  gcfg.head = gep::OutputHead::kExt;
  const gep::TrainResult res = gep::train_step3(data, w.params, gcfg, tc, c);

  const std::string archive =
      resolved_archive(cmd, o, cfg, "paths.archive_step3");
  gep::ArchiveMetadata meta;
  meta.snr_train_db = cfg.get_double("data.snr_db", 10.0);
  meta.seed = seed;
  meta.training_step = 3;
  meta.head = 1;
  gep::save_weights(archive, res.params, gcfg.gnn, meta);
  std::fprintf(stderr, "saved %s (best val %.5f at epoch %d)\n",
               archive.c_str(), res.best_val_loss, res.best_epoch);
  write_manifest(out_dir, "train-step3", cfg, seed, threads,
                 {{"archive", archive},
                  {"best_val_loss", res.best_val_loss},
                  {"best_epoch", res.best_epoch}});
  return 0;
}

int cmd_evaluate(const CLI::App* cmd, const CommonOpts& o,
                 const std::string& name) {
  const gep::ConfigMap cfg = load_config(o);
  gep::EvalJob job = gep::eval_job_from_config(cfg);
  job.seed = resolved_seed(cmd, o, cfg);
  job.n_threads = resolved_threads(cmd, o, cfg);
  const std::string out_dir = resolved_out_dir(cmd, o, cfg);
  const gep::EvalOutput out = gep::run_evaluation(job, gep::detect_git_rev());
  write_text_file(out_dir + "/results.csv", out.csv);
  std::fputs(out.csv.c_str(), stdout);
  write_manifest(out_dir, name, cfg, job.seed, job.n_threads,
                 {{"csv", out_dir + "/results.csv"},
                  {"rows", out.rows.size()}});
  return 0;
}

int cmd_complexity(gep::ComplexityQuery q, const std::string& algo) {
  q.algorithm = gep::algorithm_from_name(algo);
  const gep::ComplexityBreakdown b = gep::complexity_rvm(q);
  std::printf("algorithm,n,k,m,t,i,eta,first,subsequent,total\n");
  std::printf("%s,%d,%d,%d,%d,%d,%g,%.10g,%.10g,%.10g\n",
              gep::algorithm_name(q.algorithm).c_str(), q.n, q.k, q.m, q.t,
              q.i, q.eta, b.first, b.subsequent, b.total);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MIMO turbo-receiver laboratory"};
  app.require_subcommand(1);

  CommonOpts o1, o2, o3, o4, o5;
  auto* step1 = app.add_subcommand("train-step1",
                                   "train the posterior-output network");
  attach_common(step1, &o1, true);
  auto* labels = app.add_subcommand(
      "gen-ext-labels", "run masked inferences to build extrinsic labels");
  attach_common(labels, &o2, true);
  auto* step3 = app.add_subcommand("train-step3",
                                   "train the extrinsic-output network");
  attach_common(step3, &o3, true);
  auto* eval = app.add_subcommand("evaluate", "run the configured receivers");
  attach_common(eval, &o4, true);
  auto* sweep = app.add_subcommand("sweep", "evaluate across the SNR list");
  attach_common(sweep, &o5, true);

  gep::ComplexityQuery q;
  std::string algo = "gepnet";
  auto* cx = app.add_subcommand("complexity",
                                "real-multiplication count per symbol vector");
  cx->add_option("--algorithm", algo, "mmse-pic | ep | dep | gepnet");
  cx->add_option("--n", q.n, "receive dimension (real model)");
  cx->add_option("--k", q.k, "transmit dimension (real model)");
  cx->add_option("--m", q.m, "levels per real dimension");
  cx->add_option("--t", q.t, "detector iterations");
  cx->add_option("--i", q.i, "detector/decoder exchanges");
  cx->add_option("--eta", q.eta, "retained-edge fraction");
  cx->add_option("--n-u", q.n_u, "node embedding size");
  cx->add_option("--n-h1", q.n_h1, "first hidden size");
  cx->add_option("--n-h2", q.n_h2, "second hidden size");
  cx->add_option("--rounds", q.rounds, "message-passing rounds");

  try {
    app.parse(argc, argv);
    if (step1->parsed()) return cmd_train_step1(step1, o1);
    if (labels->parsed()) return cmd_gen_ext_labels(labels, o2);
    if (step3->parsed()) return cmd_train_step3(step3, o3);
    if (eval->parsed()) return cmd_evaluate(eval, o4, "evaluate");
    if (sweep->parsed()) return cmd_evaluate(sweep, o5, "sweep");
    if (cx->parsed()) return cmd_complexity(q, algo);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "argument error: %s\n", e.what());
    return 2;
  } catch (const gep::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const gep::ArchiveError& e) {
    std::fprintf(stderr, "archive error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
