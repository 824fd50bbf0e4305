#include "focal/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "focal/errors.hpp"
#include "focal/graph_io.hpp"

namespace focal {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

struct KvFile {
  std::vector<std::pair<std::string, std::string>> entries;

  static KvFile parse(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw parse_error("config line " + std::to_string(line_no) + ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty())
        throw parse_error("config line " + std::to_string(line_no) + ": empty key or value");
      kv.entries.emplace_back(key, value);
    }
    return kv;
  }
};

std::size_t to_size(const std::string& key, const std::string& v) {
  long long x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || x < 0)
    throw parse_error("config key '" + key + "': bad non-negative integer '" + v + "'");
  return static_cast<std::size_t>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw parse_error("config key '" + key + "': bad unsigned integer '" + v + "'");
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const parse_error&) {
    throw parse_error("config key '" + key + "': bad float '" + v + "'");
  }
}

std::vector<std::vector<std::string>> to_metapaths(const std::string& v) {
  nlohmann::json j = nlohmann::json::parse(v, nullptr, false);
  if (j.is_discarded() || !j.is_array())
    throw parse_error("config key 'metapaths': expected a JSON list of relation-name lists");
  std::vector<std::vector<std::string>> out;
  for (const auto& path : j) {
    if (!path.is_array() || path.empty())
      throw parse_error("config key 'metapaths': each meta-path must be a non-empty list");
    std::vector<std::string> names;
    for (const auto& name : path) {
      if (!name.is_string())
        throw parse_error("config key 'metapaths': relation names must be strings");
      names.push_back(name.get<std::string>());
    }
    out.push_back(std::move(names));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void AslConfig::validate() const {
  if (gamma_pos < 0.0 || gamma_neg < 0.0)
    throw validation_error("asl: focusing exponents must be >= 0");
  if (clip < 0.0 || clip >= 1.0) throw validation_error("asl: clip must be in [0, 1)");
}

void FocalConfig::validate() const {
  if (hidden_dim == 0 || num_layers == 0) throw validation_error("config: zero hidden_dim or num_layers");
  if (out_dim != hidden_dim)
    throw validation_error("config: out_dim must equal hidden_dim (residuals need matching widths)");
  if (coa_heads == 0 || hidden_dim % coa_heads != 0)
    throw validation_error("config: hidden_dim must be divisible by coa_heads");
  if (aoa_heads == 0 || hidden_dim % aoa_heads != 0)
    throw validation_error("config: hidden_dim must be divisible by aoa_heads");
  if (dropout < 0.0 || dropout >= 1.0) throw validation_error("config: dropout must be in [0, 1)");
  if (lr < 0.0 || weight_decay < 0.0) throw validation_error("config: negative rate");
  if (lambda < 0.0) throw validation_error("config: lambda must be >= 0");
  if (threshold < 0.0 || threshold > 1.0) throw validation_error("config: threshold must be in [0, 1]");
  if (metapaths.empty()) throw validation_error("config: at least one meta-path is required");
  asl.validate();
}

std::string FocalConfig::to_text() const {
  std::ostringstream os;
  os << "hidden_dim = " << hidden_dim << "\n";
  os << "out_dim = " << out_dim << "\n";
  os << "num_layers = " << num_layers << "\n";
  os << "coa_heads = " << coa_heads << "\n";
  os << "aoa_heads = " << aoa_heads << "\n";
  os << "dropout = " << format_double(dropout) << "\n";
  os << "leaky_slope = " << format_double(leaky_slope) << "\n";
  os << "lr = " << format_double(lr) << "\n";
  os << "weight_decay = " << format_double(weight_decay) << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "patience = " << patience << "\n";
  os << "max_epoch = " << max_epoch << "\n";
  os << "fanout = " << fanout << "\n";
  os << "lambda = " << format_double(lambda) << "\n";
  os << "threshold = " << format_double(threshold) << "\n";
  os << "seed = " << seed << "\n";
  nlohmann::json mp = nlohmann::json::array();
  for (const auto& path : metapaths) mp.push_back(path);
  os << "metapaths = " << mp.dump() << "\n";
  os << "asl_gamma_pos = " << format_double(asl.gamma_pos) << "\n";
  os << "asl_gamma_neg = " << format_double(asl.gamma_neg) << "\n";
  os << "asl_clip = " << format_double(asl.clip) << "\n";
  return os.str();
}

FocalConfig parse_focal_config(const std::string& text) {
  FocalConfig cfg;
  for (const auto& [key, value] : KvFile::parse(text).entries) {
    if (key == "hidden_dim") cfg.hidden_dim = to_size(key, value);
    else if (key == "out_dim") cfg.out_dim = to_size(key, value);
    else if (key == "num_layers") cfg.num_layers = to_size(key, value);
    else if (key == "coa_heads") cfg.coa_heads = to_size(key, value);
    else if (key == "aoa_heads") cfg.aoa_heads = to_size(key, value);
    else if (key == "dropout") cfg.dropout = to_double(key, value);
    else if (key == "leaky_slope") cfg.leaky_slope = to_double(key, value);
    else if (key == "lr") cfg.lr = to_double(key, value);
    else if (key == "weight_decay") cfg.weight_decay = to_double(key, value);
    else if (key == "batch_size") cfg.batch_size = to_size(key, value);
    else if (key == "patience") cfg.patience = to_size(key, value);
    else if (key == "max_epoch") cfg.max_epoch = to_size(key, value);
    else if (key == "fanout") cfg.fanout = to_size(key, value);
    else if (key == "lambda") cfg.lambda = to_double(key, value);
    else if (key == "threshold") cfg.threshold = to_double(key, value);
    else if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "metapaths") cfg.metapaths = to_metapaths(value);
    else if (key == "asl_gamma_pos") cfg.asl.gamma_pos = to_double(key, value);
    else if (key == "asl_gamma_neg") cfg.asl.gamma_neg = to_double(key, value);
    else if (key == "asl_clip") cfg.asl.clip = to_double(key, value);
    else throw parse_error("unknown config key: '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

FocalConfig load_focal_config(const std::string& path) {
  return parse_focal_config(read_file(path));
}

void SynthConfig::validate() const {
  if (num_targets == 0) throw validation_error("synth: num_targets must be > 0");
  if (num_labels == 0) throw validation_error("synth: num_labels must be > 0");
  if (primary_degree < 0.0 || secondary_degree < 0.0)
    throw validation_error("synth: degrees must be >= 0");
  if (rare_rate < 0.0 || rare_rate > 1.0) throw validation_error("synth: rare_rate must be in [0, 1]");
  if (label_cardinality < 0.0) throw validation_error("synth: label_cardinality must be >= 0");
  if (feature_dim == 0) throw validation_error("synth: feature_dim must be > 0");
  if (noise_std < 0.0) throw validation_error("synth: noise_std must be >= 0");
}

std::string SynthConfig::to_text() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n";
  os << "num_targets = " << num_targets << "\n";
  os << "num_labels = " << num_labels << "\n";
  os << "primary_degree = " << format_double(primary_degree) << "\n";
  os << "secondary_degree = " << format_double(secondary_degree) << "\n";
  os << "rare_rate = " << format_double(rare_rate) << "\n";
  os << "label_cardinality = " << format_double(label_cardinality) << "\n";
  os << "feature_dim = " << feature_dim << "\n";
  os << "noise_std = " << format_double(noise_std) << "\n";
  return os.str();
}

SynthConfig parse_synth_config(const std::string& text) {
  SynthConfig cfg;
  for (const auto& [key, value] : KvFile::parse(text).entries) {
    if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "num_targets") cfg.num_targets = to_size(key, value);
    else if (key == "num_labels") cfg.num_labels = to_size(key, value);
    else if (key == "primary_degree") cfg.primary_degree = to_double(key, value);
    else if (key == "secondary_degree") cfg.secondary_degree = to_double(key, value);
    else if (key == "rare_rate") cfg.rare_rate = to_double(key, value);
    else if (key == "label_cardinality") cfg.label_cardinality = to_double(key, value);
    else if (key == "feature_dim") cfg.feature_dim = to_size(key, value);
    else if (key == "noise_std") cfg.noise_std = to_double(key, value);
    else throw parse_error("unknown config key: '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

SynthConfig load_synth_config(const std::string& path) {
  return parse_synth_config(read_file(path));
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace focal
