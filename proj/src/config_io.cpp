#include "rre/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace rre {

namespace {

constexpr double kRandom10Alpha = 1.25;
constexpr std::uint64_t kRandom10Seed = 20070611;

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json parse_json(const std::string& text, const std::string& where) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigParseError(where, line, col, e.what());
  }
}

// Reads an integer field into `out`, recording a problem when it is present
// but not an integer satisfying `min_value`.
void read_int(const nlohmann::json& j, const char* key, int min_value, int& out,
              std::vector<std::string>& problems) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    problems.push_back(std::string(key) + ": expected an integer");
    return;
  }
  const auto value = v.get<long long>();
  if (value < min_value || value > std::numeric_limits<int>::max()) {
    problems.push_back(std::string(key) + ": " + std::to_string(value) + " must be >= " +
                       std::to_string(min_value));
    return;
  }
  out = static_cast<int>(value);
}

}  // namespace

ConfigParseError::ConfigParseError(const std::string& where, std::size_t line,
                                   std::size_t column, const std::string& detail)
    : ValidationError(where + ":" + std::to_string(line) + ":" + std::to_string(column) +
                      ": parse error: " + detail),
      line_(line),
      column_(column) {}

SystemModel example_system(const std::string& name) {
  if (name == "scalar") return scalar_example();
  if (name == "random10") return random_system(10, 5, kRandom10Alpha, kRandom10Seed);
  throw ValidationError("unknown example '" + name + "' (expected scalar or random10)");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const nlohmann::json j = parse_json(text, "config");
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");

  static const std::set<std::string> known = {"system", "system_file", "example", "gamma_bar",
                                              "seeds",  "horizon",     "burn_in", "replicates",
                                              "depth",  "output_dir"};
  std::vector<std::string> problems;
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) problems.push_back(key + ": unknown field");
  }

  ExperimentConfig cfg;
  const int sources = static_cast<int>(j.contains("system")) +
                      static_cast<int>(j.contains("system_file")) +
                      static_cast<int>(j.contains("example"));
  if (sources > 1) problems.push_back("system: give only one of system, system_file, example");
  try {
    if (j.contains("system")) {
      cfg.source = ExperimentConfig::SystemSource::kInline;
      cfg.system_ref.clear();
      cfg.system = system_from_json(j.at("system"), "system");
    } else if (j.contains("system_file")) {
      cfg.source = ExperimentConfig::SystemSource::kFile;
      if (!j.at("system_file").is_string()) {
        problems.push_back("system_file: expected a string");
      } else {
        cfg.system_ref = j.at("system_file").get<std::string>();
        std::filesystem::path p = cfg.system_ref;
        if (p.is_relative()) p = base_dir / p;
        const std::string text_sys = read_file(p);
        cfg.system = system_from_json(parse_json(text_sys, p.string()), "system_file");
      }
    } else if (j.contains("example")) {
      cfg.source = ExperimentConfig::SystemSource::kExample;
      if (!j.at("example").is_string()) {
        problems.push_back("example: expected a string");
      } else {
        cfg.system_ref = j.at("example").get<std::string>();
        cfg.system = example_system(cfg.system_ref);
      }
    }
  } catch (const ValidationError& e) {
    for (const auto& p : e.problems()) problems.push_back(p);
  }

  if (j.contains("gamma_bar")) {
    const auto& g = j.at("gamma_bar");
    const nlohmann::json list = g.is_array() ? g : nlohmann::json::array({g});
    cfg.gamma_bar.clear();
    if (list.empty()) problems.push_back("gamma_bar: must not be empty");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string field = g.is_array() ? "gamma_bar[" + std::to_string(i) + "]" : "gamma_bar";
      if (!list[i].is_number()) {
        problems.push_back(field + ": expected a number");
        continue;
      }
      const double v = list[i].get<double>();
      if (!(v >= 0.0 && v <= 1.0)) {
        problems.push_back(field + ": " + format_double(v) + " ∉ [0,1]");
        continue;
      }
      cfg.gamma_bar.push_back(v);
    }
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    const nlohmann::json list = s.is_array() ? s : nlohmann::json::array({s});
    cfg.seeds.clear();
    if (list.empty()) problems.push_back("seeds: must not be empty");
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].is_number_unsigned()) {
        problems.push_back("seeds[" + std::to_string(i) + "]: expected a non-negative integer");
        continue;
      }
      cfg.seeds.push_back(list[i].get<std::uint64_t>());
    }
  }
  read_int(j, "horizon", 1, cfg.horizon, problems);
  read_int(j, "burn_in", 0, cfg.burn_in, problems);
  read_int(j, "replicates", 1, cfg.replicates, problems);
  read_int(j, "depth", 0, cfg.depth, problems);
  if (cfg.horizon <= cfg.burn_in) {
    problems.push_back("horizon: " + std::to_string(cfg.horizon) + " must exceed burn_in " +
                       std::to_string(cfg.burn_in));
  }
  if (j.contains("output_dir")) {
    if (j.at("output_dir").is_string()) {
      cfg.output_dir = j.at("output_dir").get<std::string>();
    } else {
      problems.push_back("output_dir: expected a string");
    }
  }
  if (!problems.empty()) throw ValidationError(problems);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_config(text, path.parent_path().empty() ? "." : path.parent_path());
  } catch (const ConfigParseError& e) {
    throw ConfigParseError(path.string(), e.line(), e.column(), e.what());
  }
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  switch (config.source) {
    case ExperimentConfig::SystemSource::kInline: j["system"] = system_to_json(config.system); break;
    case ExperimentConfig::SystemSource::kFile: j["system_file"] = config.system_ref; break;
    case ExperimentConfig::SystemSource::kExample: j["example"] = config.system_ref; break;
  }
  j["gamma_bar"] = config.gamma_bar;
  j["seeds"] = config.seeds;
  j["horizon"] = config.horizon;
  j["burn_in"] = config.burn_in;
  j["replicates"] = config.replicates;
  j["depth"] = config.depth;
  if (!config.output_dir.empty()) j["output_dir"] = config.output_dir;
  return j;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

nlohmann::json Manifest::to_json() const {
  auto outs = nlohmann::json::array();
  for (const auto& e : outputs) {
    outs.push_back({{"file", e.file}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  }
  return nlohmann::json{{"config_hash", config_hash},
                        {"tool_version", tool_version},
                        {"outputs", outs},
                        {"timings_seconds", timings}};
}

Manifest write_outputs(const ResultSet& results, const std::filesystem::path& dir,
                       const ExperimentConfig* config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": cannot create directory: " + ec.message());

  auto write = [](const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error(path.string() + ": write failed");
  };

  Manifest manifest;
  if (config) manifest.config_hash = sha256_hex(config_to_json(*config).dump());
  for (const auto& f : results.files) {
    const std::filesystem::path path = dir / f.name;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    write(path, f.content);
    manifest.outputs.push_back({f.name, sha256_hex(f.content), f.content.size()});
    manifest.timings[f.name] = f.seconds;
  }
  write(dir / kManifestName, manifest.to_json().dump(2) + "\n");
  return manifest;
}

std::string cdf_csv(const EmpiricalDistribution& dist) {
  std::string out = "value,cdf\n";
  const auto& s = dist.samples();
  const double n = static_cast<double>(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 < s.size() && s[i + 1] == s[i]) continue;
    out += format_double(s[i]) + "," + format_double(static_cast<double>(i + 1) / n) + "\n";
  }
  return out;
}

std::string exceedance_csv(const ExceedanceTable& table) {
  std::string out = "t,N,frequency\n";
  for (std::size_t i = 0; i < table.times.size(); ++i) {
    for (std::size_t j = 0; j < table.thresholds.size(); ++j) {
      out += std::to_string(table.times[i]) + "," + format_double(table.thresholds[j]) + "," +
             format_double(table.frequency[i][j]) + "\n";
    }
  }
  return out;
}

}  // namespace rre
