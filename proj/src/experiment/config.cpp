#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "csats/experiment.hpp"

namespace csats {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

template <typename U>
U parse_unsigned(const std::string& key, const std::string& value) {
  U out{};
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0;
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || p != value.data() + value.size()) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, std::string value) {
  std::transform(value.begin(), value.end(), value.begin(), [](unsigned char c) { return std::tolower(c); });
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

template <typename U>
std::vector<U> parse_list(const std::string& key, const std::string& value) {
  std::vector<U> out;
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_unsigned<U>(key, item));
  }
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list");
  return out;
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (c.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (c.attention_features < 1) throw ConfigError("F_a must be >= 1");
  if (c.seeds.empty()) throw ConfigError("at least one seed is required");
  if (!(c.lr > 0)) throw ConfigError("learning rate must be > 0");
  if (c.fcn.filters.empty() || c.fcn.filters.size() != c.fcn.kernels.size()) {
    throw ConfigError("filters and kernels must be non-empty lists of equal length");
  }
  for (std::size_t i = 0; i < c.fcn.filters.size(); ++i) {
    if (c.fcn.filters[i] == 0 || c.fcn.kernels[i] == 0) throw ConfigError("filters and kernels must be >= 1");
  }
  std::vector<std::uint64_t> sorted = c.seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("seeds must be distinct");
}

void set_config_value(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key), value = trim(raw_value);
  if (key == "train") {
    c.train_path = value;
  } else if (key == "test") {
    c.test_path = value;
  } else if (key == "variant") {
    c.variant = parse_variant(value);
  } else if (key == "epochs") {
    c.epochs = parse_unsigned<std::size_t>(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_unsigned<std::size_t>(key, value);
  } else if (key == "lr") {
    c.lr = parse_double(key, value);
  } else if (key == "fa") {
    c.attention_features = parse_unsigned<std::size_t>(key, value);
  } else if (key == "seeds") {
    c.seeds = parse_list<std::uint64_t>(key, value);
  } else if (key == "znorm") {
    c.znorm = parse_bool(key, value);
  } else if (key == "attn_update") {
    c.attention_update = parse_attention_update(value);
  } else if (key == "filters") {
    c.fcn.filters = parse_list<std::size_t>(key, value);
  } else if (key == "kernels") {
    c.fcn.kernels = parse_list<std::size_t>(key, value);
  } else if (key == "out") {
    c.out_dir = value;
  } else if (key == "timing") {
    c.record_timing = parse_bool(key, value);
  } else if (key == "save_models") {
    c.save_models = parse_bool(key, value);
  } else if (key == "threads") {
    c.threads = parse_unsigned<std::size_t>(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_config_text(ExperimentConfig& c, const std::string& text) {
  std::stringstream ss(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(ss, line);) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(c, line.substr(0, eq), line.substr(eq + 1));
  }
}

void apply_config_file(ExperimentConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(c, ss.str());
}

}  // namespace csats
