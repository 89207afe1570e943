#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "robust_erm/cli.hpp"
#include "robust_erm/errors.hpp"

namespace robust_erm::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return value;
}

std::vector<std::string> split_list(const std::string& text) {
  std::string s = trim(text);
  if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> items;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model", [](RunConfig& c, const std::string&, const std::string& v) { c.model = v; }},
      {"dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.dim = parse_number<Index>(k, v); }},
      {"noise", [](RunConfig& c, const std::string&, const std::string& v) { c.noise = v; }},
      {"noise_param",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.noise_param = parse_number<double>(k, v); }},
      {"lambda0",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.lambda0 = parse_number<double>(k, v); }},
      {"N", [](RunConfig& c, const std::string& k, const std::string& v) { c.N = parse_number<Index>(k, v); }},
      {"k", [](RunConfig& c, const std::string& k, const std::string& v) { c.k = parse_number<Index>(k, v); }},
      {"k_rule", [](RunConfig& c, const std::string&, const std::string& v) { c.k_rule = v; }},
      {"tau", [](RunConfig& c, const std::string& k, const std::string& v) { c.tau = parse_number<double>(k, v); }},
      {"delta", [](RunConfig& c, const std::string&, const std::string& v) { c.delta = v; }},
      {"estimator", [](RunConfig& c, const std::string&, const std::string& v) { c.estimators = split_list(v); }},
      {"kappa", [](RunConfig& c, const std::string& k, const std::string& v) { c.kappa = parse_number<double>(k, v); }},
      {"kappas",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.kappas.clear();
         for (const auto& item : split_list(v)) c.kappas.push_back(parse_number<double>(k, item));
       }},
      {"strategy", [](RunConfig& c, const std::string&, const std::string& v) { c.strategy = v; }},
      {"outlier_location",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.outlier_location = parse_number<double>(k, v); }},
      {"replications",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.replications = parse_number<Index>(k, v); }},
      {"seed",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
      {"threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = parse_number<int>(k, v); }},
      {"out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
      {"data", [](RunConfig& c, const std::string&, const std::string& v) { c.data = v; }},
      {"max_iter",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.max_iter = parse_number<int>(k, v); }},
      {"grad_tol",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.grad_tol = parse_number<double>(k, v); }},
      {"restarts",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.restarts = parse_number<int>(k, v); }},
      {"max_cov_rel_error",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.max_cov_rel_error = parse_number<double>(k, v); }},
      {"min_ks_pvalue",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.min_ks_pvalue = parse_number<double>(k, v); }},
  };
  return table;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_field(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) {
    throw ConfigError("unknown config field '" + key + "'; known fields: " + join(config_keys()));
  }
  it->second(config, key, value);
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    }
    try {
      set_field(base, trim(line.substr(0, eq)), unquote(trim(line.substr(eq + 1))));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, std::move(base));
}

const std::vector<std::string>& model_names() {
  static const std::vector<std::string> names = {"gaussian-location", "location", "linear-regression",
                                                 "exponential-rate"};
  return names;
}

ModelPtr make_model(const RunConfig& c, std::optional<Index> data_width) {
  NoiseSpec noise;
  if (c.noise == "gaussian") {
    noise = NoiseSpec::gaussian(c.noise_param);
  } else if (c.noise == "student_t") {
    noise = NoiseSpec::student_t(c.noise_param);
  } else if (c.noise == "pareto") {
    noise = NoiseSpec::pareto_symmetric(c.noise_param);
  } else {
    throw ConfigError("unknown noise '" + c.noise + "'; expected one of gaussian, student_t, pareto");
  }
  if (c.model == "gaussian-location" || c.model == "location") {
    const Index d = data_width.value_or(c.dim);
    if (c.model == "gaussian-location" && c.noise != "gaussian") {
      throw ConfigError("gaussian-location needs gaussian noise; use model = location for other noise");
    }
    return location_model(d, Vector::Zero(d), noise);
  }
  if (c.model == "linear-regression") {
    const Index d = data_width ? *data_width - 1 : c.dim;
    if (d < 1) throw ConfigError("linear-regression needs at least one covariate column plus y");
    return linear_regression(d, Vector::Ones(d), Matrix::Identity(d, d), noise);
  }
  if (c.model == "exponential-rate") {
    if (data_width && *data_width != 1) throw ConfigError("exponential-rate expects one data column");
    return exponential_rate(c.lambda0);
  }
  throw ConfigError("invalid model '" + c.model + "'; valid models: " + join(model_names()));
}

SampleMatrix read_samples_csv(std::istream& in) {
  std::string line;
  long number = 0;
  Index width = -1;
  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (width < 0) {
      // Header row naming the coordinates.
      for (const auto& name : cells) {
        if (name.empty()) throw DataError("line " + std::to_string(number) + ": empty column name", number);
      }
      width = static_cast<Index>(cells.size());
      continue;
    }
    if (static_cast<Index>(cells.size()) != width) {
      throw DataError("line " + std::to_string(number) + ": expected " + std::to_string(width) + " fields, found " +
                          std::to_string(cells.size()),
                      number);
    }
    for (const auto& c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || res.ec != std::errc() || res.ptr != c.data() + c.size() || !std::isfinite(v)) {
        throw DataError("line " + std::to_string(number) + ": invalid number '" + c + "'", number);
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (width < 0) throw DataError("empty CSV: missing header row", 1);
  if (rows == 0) throw DataError("CSV has a header but no samples", number);
  SampleMatrix data(rows, width);
  std::copy(values.begin(), values.end(), data.data());
  return data;
}

SampleMatrix read_samples_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  return read_samples_csv(in);
}

void write_samples_csv(const SampleMatrix& data, const std::vector<std::string>& names, std::ostream& out) {
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  char buf[64];
  for (Index r = 0; r < data.rows(); ++r) {
    for (Index c = 0; c < data.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, data(r, c));
      if (c > 0) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace robust_erm::cli
