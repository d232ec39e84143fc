#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gep/config.hpp"
#include "gep/training.hpp"
#include "gep/turbo.hpp"

namespace gep {

// ---- result rows ------------------------------------------------------------

struct CsvRow {
  double snr_db = 0.0;
  std::string detector;
  int turbo_iter = 0;  // 0 = uncoded
  double ser = 0.0, ber = 0.0, wer = 0.0;
  long long n_bits = 0, n_errors = 0;
  double stderr_est = 0.0;
  std::uint64_t seed = 0;
  std::string git_rev;
};

std::string csv_header();
// Fixed numeric formatting; identical rows serialize to identical bytes.
std::string csv_line(const CsvRow& row);

std::string detect_git_rev();

// ---- config binding ---------------------------------------------------------

MimoSystem system_from_config(const ConfigMap& cfg);
GepnetConfig gepnet_from_config(const ConfigMap& cfg);
IddCodeSpec code_from_config(const ConfigMap& cfg);
TurboConfig turbo_from_config(const ConfigMap& cfg, const MimoSystem& sys);
StopRule stop_from_config(const ConfigMap& cfg);
SampleGenSpec datagen_from_config(const ConfigMap& cfg);
TrainConfig train_from_config(const ConfigMap& cfg);
std::vector<double> snr_list_from_config(const ConfigMap& cfg);
std::vector<DetectorKind> detectors_from_config(const ConfigMap& cfg);

// ---- evaluation jobs --------------------------------------------------------

struct LoadedDetector {
  DetectorContext ctx;
  std::shared_ptr<LoadedWeights> weights;  // keeps ctx.params alive
};

// Archive path may be empty for the classical detectors; network detectors
// require one and inherit the archive's network sizes.
LoadedDetector load_detector(DetectorKind kind, const GepnetConfig& cfg,
                             const std::string& archive_path);

struct EvalJob {
  MimoSystem system;
  TurboConfig turbo;
  GepnetConfig gepnet;
  std::vector<DetectorKind> detectors;
  std::map<DetectorKind, std::string> archives;
  std::vector<double> snr_list;
  StopRule stop;
  std::uint64_t seed = 1;
  int n_threads = 1;
  bool uncoded = false;
};

EvalJob eval_job_from_config(const ConfigMap& cfg);

// Runs every (snr, detector) point in order and renders the CSV.  The result
// depends on the job alone, not on the thread count.
struct EvalOutput {
  std::vector<CsvRow> rows;
  std::string csv;
};

EvalOutput run_evaluation(const EvalJob& job, const std::string& git_rev);

}  // namespace gep
