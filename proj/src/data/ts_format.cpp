#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "csats/data.hpp"

namespace csats {

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::vector<std::string_view> lines_of(const std::string& text) {
  std::vector<std::string_view> out = split(text, '\n');
  if (!out.empty() && trim(out.back()).empty()) out.pop_back();
  return out;
}

std::optional<float> parse_value(std::string_view raw, std::size_t line) {
  const auto s = trim(raw);
  if (s == "?" || lower(s) == "nan") return std::nullopt;
  if (s.empty()) throw ParseError(line, "empty value");
  float v = 0;
  const auto* begin = s.data() + (s.front() == '+' ? 1 : 0);
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(line, "not a number: '" + std::string(s) + "'");
  }
  if (!std::isfinite(v)) throw ParseError(line, "non-finite value '" + std::string(s) + "'");
  return v;
}

/// Fills missing entries of one variable with the mean of its observed values.
void impute(std::vector<std::optional<float>>& series, std::size_t line) {
  double sum = 0;
  std::size_t count = 0;
  for (const auto& v : series)
    if (v) sum += *v, ++count;
  if (count == series.size()) return;
  if (count == 0) throw UnsupportedError("line " + std::to_string(line) + ": variable has no observed values");
  const auto mean = static_cast<float>(sum / static_cast<double>(count));
  for (auto& v : series)
    if (!v) v = mean;
}

struct RawInstance {
  std::vector<std::vector<std::optional<float>>> dims;
  std::string label;
  std::size_t line;
};

TsDataset assemble(std::vector<RawInstance>& raw, std::optional<std::vector<std::string>> vocabulary,
                   std::string name) {
  if (raw.empty()) throw ParseError(0, "no instances");
  const std::size_t v = raw.front().dims.size();
  const std::size_t t = raw.front().dims.front().size();
  for (const auto& inst : raw) {
    for (const auto& d : inst.dims) {
      if (d.size() != t) {
        throw UnsupportedError("line " + std::to_string(inst.line) + ": series length " +
                               std::to_string(d.size()) + " differs from " + std::to_string(t) +
                               " (unequal lengths are not supported)");
      }
    }
  }

  std::vector<std::string> names;
  if (vocabulary) {
    std::set<std::string> unique(vocabulary->begin(), vocabulary->end());
    names.assign(unique.begin(), unique.end());
  } else {
    std::set<std::string> unique;
    for (const auto& inst : raw) unique.insert(inst.label);
    names.assign(unique.begin(), unique.end());
  }

  TsDataset ds;
  ds.name = std::move(name);
  ds.class_names = names;
  std::vector<float> values;
  values.reserve(raw.size() * v * t);
  for (auto& inst : raw) {
    const auto it = std::lower_bound(names.begin(), names.end(), inst.label);
    if (it == names.end() || *it != inst.label) {
      throw LabelError("line " + std::to_string(inst.line) + ": label '" + inst.label +
                       "' is not in the declared class vocabulary");
    }
    ds.labels.push_back(static_cast<int>(it - names.begin()));
    for (auto& d : inst.dims) {
      impute(d, inst.line);
      for (const auto& x : d) values.push_back(*x);
    }
  }
  ds.x = Tensor<float>(Shape{raw.size(), v, t}, std::move(values));
  return ds;
}

void append_number(std::string& out, float v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::string strip_split_suffix(std::string stem) {
  for (const char* suffix : {"_TRAIN", "_TEST"}) {
    const std::string s(suffix);
    if (stem.size() > s.size() && stem.compare(stem.size() - s.size(), s.size(), s) == 0) {
      return stem.substr(0, stem.size() - s.size());
    }
  }
  return stem;
}

}  // namespace

TsDataset parse_ts(const std::string& text, const std::string& name) {
  std::optional<std::vector<std::string>> vocabulary;
  std::optional<std::size_t> declared_dims, declared_length;
  std::string problem_name = name;
  bool in_data = false;
  std::vector<RawInstance> raw;

  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const std::string_view line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;

    if (!in_data) {
      if (line.front() != '@') throw ParseError(lineno, "expected a header directive before @data");
      std::istringstream words{std::string(line.substr(1))};
      std::string key;
      words >> key;
      key = lower(key);
      std::string arg;
      words >> arg;
      const std::string larg = lower(arg);
      auto as_count = [&](const std::string& what) {
        std::size_t n = 0;
        const auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), n);
        if (ec != std::errc() || p != arg.data() + arg.size()) {
          throw ParseError(lineno, "@" + what + " needs a count, got '" + arg + "'");
        }
        return n;
      };
      if (key == "data") {
        in_data = true;
      } else if (key == "problemname") {
        if (problem_name.empty()) problem_name = arg;
      } else if (key == "timestamps") {
        if (larg == "true") throw UnsupportedError("time-stamped series are not supported");
      } else if (key == "univariate") {
        if (larg == "true") declared_dims = 1;
      } else if (key == "dimensions" || key == "dimension") {
        declared_dims = as_count(key);
      } else if (key == "serieslength") {
        declared_length = as_count(key);
      } else if (key == "classlabel") {
        if (larg != "true") throw UnsupportedError("datasets without class labels are not supported");
        std::vector<std::string> names;
        for (std::string w; words >> w;) names.push_back(w);
        if (names.empty()) throw ParseError(lineno, "@classLabel true needs class names");
        vocabulary = std::move(names);
      } else if (key == "targetlabel") {
        if (larg == "true") throw UnsupportedError("regression targets are not supported");
      }
      // @missing, @equalLength and unknown directives carry nothing the parser needs
      continue;
    }

    const auto fields = split(line, ':');
    if (fields.size() < 2) throw ParseError(lineno, "expected '<values>:...:<label>'");
    const std::size_t dims = fields.size() - 1;
    if (declared_dims && dims != *declared_dims) {
      throw ParseError(lineno, "found " + std::to_string(dims) + " dimensions, header declares " +
                                   std::to_string(*declared_dims));
    }
    if (!raw.empty() && dims != raw.front().dims.size()) {
      throw ParseError(lineno, "dimension count changes from " +
                                   std::to_string(raw.front().dims.size()) + " to " +
                                   std::to_string(dims));
    }
    RawInstance inst;
    inst.line = lineno;
    inst.label = std::string(trim(fields.back()));
    if (inst.label.empty()) throw ParseError(lineno, "missing class label");
    for (std::size_t d = 0; d < dims; ++d) {
      std::vector<std::optional<float>> series;
      for (auto v : split(fields[d], ',')) series.push_back(parse_value(v, lineno));
      if (declared_length && series.size() != *declared_length) {
        throw UnsupportedError("line " + std::to_string(lineno) + ": series length " +
                               std::to_string(series.size()) + " differs from declared " +
                               std::to_string(*declared_length));
      }
      inst.dims.push_back(std::move(series));
    }
    raw.push_back(std::move(inst));
  }
  if (!in_data) throw ParseError(lines.size(), "missing @data section");
  return assemble(raw, std::move(vocabulary), problem_name);
}

std::string format_ts(const TsDataset& ds) {
  const std::size_t n = ds.size(), v = ds.variables(), t = ds.length();
  std::string out;
  out += "@problemName " + (ds.name.empty() ? std::string("dataset") : ds.name) + "\n";
  out += "@timeStamps false\n@missing false\n";
  out += std::string("@univariate ") + (v == 1 ? "true" : "false") + "\n";
  out += "@dimensions " + std::to_string(v) + "\n";
  out += "@equalLength true\n@seriesLength " + std::to_string(t) + "\n";
  out += "@classLabel true";
  for (const auto& c : ds.class_names) out += " " + c;
  out += "\n@data\n";
  auto x = ds.x.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < v; ++d) {
      for (std::size_t j = 0; j < t; ++j) {
        if (j) out += ',';
        append_number(out, x[(i * v + d) * t + j]);
      }
      out += ':';
    }
    out += ds.class_names.at(static_cast<std::size_t>(ds.labels[i]));
    out += '\n';
  }
  return out;
}

TsDataset parse_csv(const std::string& text, const std::string& name) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(1, "empty CSV");
  const auto header = split(trim(lines[0]), ',');
  if (header.empty() || trim(header[0]) != "label") throw ParseError(1, "header must start with 'label'");
  std::size_t v = 0, t = 0;
  std::vector<std::pair<std::size_t, std::size_t>> cols;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string h(trim(header[c]));
    std::size_t a = 0, b = 0;
    char tail = 0;
    if (std::sscanf(h.c_str(), "v%zu_t%zu%c", &a, &b, &tail) != 2) {
      throw ParseError(1, "bad column name '" + h + "' (expected v<var>_t<time>)");
    }
    cols.emplace_back(a, b);
    v = std::max(v, a + 1);
    t = std::max(t, b + 1);
  }
  if (cols.empty() || cols.size() != v * t) throw ParseError(1, "header does not describe a full V x T grid");
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c].first != c / t || cols[c].second != c % t) {
      throw ParseError(1, "columns must be in variable-major order");
    }
  }

  std::vector<RawInstance> raw;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != cols.size() + 1) {
      throw ParseError(i + 1, "expected " + std::to_string(cols.size() + 1) + " fields, found " +
                                  std::to_string(fields.size()));
    }
    RawInstance inst;
    inst.line = i + 1;
    inst.label = std::string(trim(fields[0]));
    if (inst.label.empty()) throw ParseError(i + 1, "missing class label");
    inst.dims.assign(v, {});
    for (std::size_t c = 0; c < cols.size(); ++c) {
      inst.dims[c / t].push_back(parse_value(fields[c + 1], i + 1));
    }
    raw.push_back(std::move(inst));
  }
  return assemble(raw, std::nullopt, name);
}

std::string format_csv(const TsDataset& ds) {
  const std::size_t n = ds.size(), v = ds.variables(), t = ds.length();
  std::string out = "label";
  for (std::size_t d = 0; d < v; ++d)
    for (std::size_t j = 0; j < t; ++j) out += ",v" + std::to_string(d) + "_t" + std::to_string(j);
  out += '\n';
  auto x = ds.x.data();
  for (std::size_t i = 0; i < n; ++i) {
    out += ds.class_names.at(static_cast<std::size_t>(ds.labels[i]));
    for (std::size_t k = 0; k < v * t; ++k) {
      out += ',';
      append_number(out, x[i * v * t + k]);
    }
    out += '\n';
  }
  return out;
}

TsDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string ext = lower(path.extension().string());
  TsDataset ds;
  if (ext == ".ts") {
    ds = parse_ts(ss.str());
  } else if (ext == ".csv") {
    ds = parse_csv(ss.str());
  } else {
    throw UnsupportedError("unknown dataset extension '" + ext + "' (expected .ts or .csv)");
  }
  if (ds.name.empty()) ds.name = strip_split_suffix(path.stem().string());
  return ds;
}

void save_dataset(const std::filesystem::path& path, const TsDataset& ds) {
  const std::string ext = lower(path.extension().string());
  std::string text;
  if (ext == ".ts") {
    text = format_ts(ds);
  } else if (ext == ".csv") {
    text = format_csv(ds);
  } else {
    throw UnsupportedError("unknown dataset extension '" + ext + "' (expected .ts or .csv)");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write dataset " + path.string());
  out << text;
}

}  // namespace csats
