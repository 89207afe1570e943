#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "robust_erm/models.hpp"
#include "robust_erm/types.hpp"

namespace robust_erm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Experiment manifest. Every field can be set in a key = value file and
/// overridden by a flag of the same name.
struct RunConfig {
  std::string model = "gaussian-location";
  Index dim = 1;
  std::string noise = "gaussian";  // gaussian | student_t | pareto
  double noise_param = 1.0;        // sigma, degrees of freedom or tail index
  double lambda0 = 1.0;            // exponential-rate

  Index N = 2000;
  Index k = 20;
  std::string k_rule = "fixed";  // fixed | kappa
  double tau = 1.0;
  std::string delta = "mad";     // "mad" or a positive constant
  std::vector<std::string> estimators{"direct"};

  double kappa = 0.0;
  std::vector<double> kappas;
  std::string strategy = "fixed_point";
  double outlier_location = 1e6;

  Index replications = 200;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_dir = ".";
  std::string data;

  int max_iter = 500;
  double grad_tol = 1e-8;
  int restarts = 2;

  double max_cov_rel_error = 0.15;
  double min_ks_pvalue = 1e-3;
};

/// Names accepted in config files.
const std::vector<std::string>& config_keys();

/// Parse `key = value` lines; '#' starts a comment, values may be quoted.
/// Throws ConfigError naming the line for unknown keys or bad values.
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});
/// Apply one key/value pair; throws ConfigError for unknown keys.
void set_field(RunConfig& config, const std::string& key, const std::string& value);

const std::vector<std::string>& model_names();
/// Build the model; `data_width` fixes the dimension when data is supplied.
ModelPtr make_model(const RunConfig& config, std::optional<Index> data_width = std::nullopt);

/// CSV with a header row naming the coordinates. Throws DataError with the
/// 1-based line number on malformed rows.
SampleMatrix read_samples_csv(std::istream& in);
SampleMatrix read_samples_csv_file(const std::string& path);
void write_samples_csv(const SampleMatrix& data, const std::vector<std::string>& names, std::ostream& out);

int cmd_estimate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);
/// `fault` injects a named defect into the loss (test hook); empty for none.
int cmd_verify_loss(const std::string& fault, std::ostream& out, std::ostream& err);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace robust_erm::cli
