#include "rollgate/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rollgate::config {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field " + key + ": not a number: '" + value + "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field " + key + ": not an integer: '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field " + key + ": not an unsigned integer: '" + value + "'");
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& value) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("config field seeds: empty entry in '" + value + "'");
    seeds.push_back(parse_u64("seeds", item));
  }
  if (seeds.empty()) throw ConfigError("config field seeds: empty list");
  return seeds;
}

// Shortest representation that round-trips, so hashes do not depend on how
// a value was spelled in the source file.
std::string format_double(double v) {
  for (int precision = 1; precision <= 17; ++precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::stod(buf) == v) return buf;
  }
  return "0";
}

}  // namespace

void apply_key(AppConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "G") cfg.run.g = static_cast<int>(parse_int(key, value));
  else if (key == "T_max") cfg.run.t_max = static_cast<int>(parse_int(key, value));
  else if (key == "K") cfg.run.k = static_cast<int>(parse_int(key, value));
  else if (key == "d_L") cfg.run.d_l = parse_double(key, value);
  else if (key == "tau_H") {
    if (value == "none") cfg.run.tau_h.reset();
    else cfg.run.tau_h = parse_double(key, value);
  } else if (key == "epsilon") cfg.run.epsilon = parse_double(key, value);
  else if (key == "seed") cfg.run.seed = parse_u64(key, value);
  else if (key == "N_groups") cfg.run.n_groups = static_cast<int>(parse_int(key, value));
  else if (key == "temp_rollout") cfg.temp_rollout = parse_double(key, value);
  else if (key == "temp_eval") cfg.temp_eval = parse_double(key, value);
  else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
  else if (key == "seeds") cfg.seeds = parse_seed_list(value);
  else throw ConfigError("unknown config key: " + key);
}

AppConfig parse_config_text(const std::string& text) {
  AppConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    line_no++;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" +
                        line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    apply_key(cfg, key, value);
  }
  validate(cfg);
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate(const AppConfig& cfg) {
  try {
    core::validate(cfg.run);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.temp_rollout <= 0.0)
    throw ConfigError("config field temp_rollout: must be > 0");
  if (cfg.temp_eval < 0.0) throw ConfigError("config field temp_eval: must be >= 0");
  if (cfg.learning_rate <= 0.0)
    throw ConfigError("config field learning_rate: must be > 0");
  if (cfg.seeds.empty()) throw ConfigError("config field seeds: must be non-empty");
}

std::string canonical_lines(const AppConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("G", std::to_string(cfg.run.g));
  kv.emplace_back("T_max", std::to_string(cfg.run.t_max));
  kv.emplace_back("K", std::to_string(cfg.run.k));
  kv.emplace_back("d_L", format_double(cfg.run.d_l));
  kv.emplace_back("tau_H", cfg.run.tau_h ? format_double(*cfg.run.tau_h) : "none");
  kv.emplace_back("epsilon", format_double(cfg.run.epsilon));
  kv.emplace_back("seed", std::to_string(cfg.run.seed));
  kv.emplace_back("N_groups", std::to_string(cfg.run.n_groups));
  kv.emplace_back("temp_rollout", format_double(cfg.temp_rollout));
  kv.emplace_back("temp_eval", format_double(cfg.temp_eval));
  kv.emplace_back("learning_rate", format_double(cfg.learning_rate));
  std::string seeds;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (i) seeds += ',';
    seeds += std::to_string(cfg.seeds[i]);
  }
  kv.emplace_back("seeds", seeds);
  std::sort(kv.begin(), kv.end());
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const AppConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_lines(cfg))));
  return buf;
}

void write_resolved(const std::string& path, const AppConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write resolved config: " + path);
  out << "# config_hash=" << config_hash(cfg) << '\n' << canonical_lines(cfg);
  if (!out) throw std::runtime_error("write failed: " + path);
}

RunLock::RunLock(const std::string& dir) : path_(dir + "/.lock") {
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    if (errno == EEXIST)
      throw std::runtime_error("run directory is locked by another process: " + path_);
    throw std::runtime_error("cannot create lockfile " + path_ + ": " + std::strerror(errno));
  }
  std::fclose(f);
}

RunLock::~RunLock() { std::remove(path_.c_str()); }

}  // namespace rollgate::config
