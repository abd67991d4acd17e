#include "meshnet/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "meshnet/error.hpp"

namespace meshnet {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, std::string_view value, const char* expected) {
  throw Error(ErrorCode::Config,
              "key '" + key + "': expected " + expected + ", got '" + std::string(value) + "'");
}

long long to_integer(const std::string& key, std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

double to_number(const std::string& key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool to_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::string_view strip_brackets(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') throw Error(ErrorCode::Config, "unterminated list '" + std::string(text) + "'");
    text = text.substr(1, text.size() - 2);
  }
  return text;
}

}  // namespace

std::vector<std::string> parse_string_list(std::string_view text) {
  text = strip_brackets(text);
  std::vector<std::string> out;
  while (!trim(text).empty()) {
    const auto comma = text.find(',');
    const std::string_view item = trim(text.substr(0, comma));
    if (item.empty()) throw Error(ErrorCode::Config, "empty list item");
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  for (const std::string& item : parse_string_list(text)) out.push_back(to_number("list", item));
  return out;
}

ConfigFile ConfigFile::parse(std::string_view text) {
  ConfigFile cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string_view::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.entries_.count(full)) {
      throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": duplicate key '" + full + "'");
    }
    cfg.entries_[full] = std::string(trim(line.substr(eq + 1)));
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

RunConfig to_run_config(const ConfigFile& file) {
  RunConfig rc;
  ModelConfig& m = rc.model;
  m.targets = 0;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto integer = [](int& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = static_cast<int>(to_integer(k, v)); };
  };
  auto number = [](double& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = to_number(k, v); };
  };
  auto boolean = [](bool& dst) -> Setter {
    return [&dst](const std::string& k, const std::string& v) { dst = to_bool(k, v); };
  };
  auto text = [](std::string& dst) -> Setter {
    return [&dst](const std::string&, const std::string& v) { dst = v; };
  };
  auto strings = [](std::vector<std::string>& dst) -> Setter {
    return [&dst](const std::string&, const std::string& v) { dst = parse_string_list(v); };
  };
  auto type = [](FeatureType& dst) -> Setter {
    return [&dst](const std::string&, const std::string& v) { dst = FeatureType::parse(v); };
  };
  auto optional_type = [](std::optional<FeatureType>& dst) -> Setter {
    return [&dst](const std::string&, const std::string& v) {
      if (v.empty() || v == "default") {
        dst.reset();
      } else {
        dst = FeatureType::parse(v);
      }
    };
  };

  const std::map<std::string, Setter> schema{
      {"seed", [&rc](const std::string& k, const std::string& v) {
         rc.seed = static_cast<std::uint64_t>(to_integer(k, v));
       }},
      {"model.task", [&m](const std::string&, const std::string& v) { m.task = parse_task(v); }},
      {"model.layer", [&m](const std::string&, const std::string& v) { m.layer = parse_layer_kind(v); }},
      {"model.bias", [&m](const std::string&, const std::string& v) { m.bias = parse_bias_kind(v); }},
      {"model.features", [&m](const std::string&, const std::string& v) {
         m.features = parse_feature_family(v);
       }},
      {"model.reltan_powers", [&m](const std::string&, const std::string& v) {
         m.reltan.powers = parse_number_list(v);
       }},
      {"model.reltan_norm", boolean(m.reltan.scalar_norm)},
      {"model.hidden_type", type(m.hidden_type)},
      {"model.final_type", type(m.final_type)},
      {"model.attention_type", optional_type(m.attention_type)},
      {"model.residual_blocks", integer(m.residual_blocks)},
      {"model.dense_width", integer(m.dense_width)},
      {"model.dropout", number(m.dropout)},
      {"model.self_contribution", boolean(m.self_contribution)},
      {"model.heads", integer(m.heads)},
      {"model.head_type", optional_type(m.head_type)},
      {"model.targets", integer(m.targets)},
      {"data.kind", text(rc.data.kind)},
      {"data.train_meshes", integer(rc.data.train_meshes)},
      {"data.test_meshes", integer(rc.data.test_meshes)},
      {"data.subdivisions", integer(rc.data.subdivisions)},
      {"data.template_noise", number(rc.data.template_noise)},
      {"data.jitter", number(rc.data.jitter)},
      {"data.grid_rows", integer(rc.data.grid_rows)},
      {"data.grid_cols", integer(rc.data.grid_cols)},
      {"data.grid_noise", number(rc.data.grid_noise)},
      {"data.files", strings(rc.data.files)},
      {"train.epochs", integer(rc.train.epochs)},
      {"train.learning_rate", number(rc.train.learning_rate)},
      {"train.batch_size", integer(rc.train.batch_size)},
      {"train.checkpoint", text(rc.train.checkpoint)},
      {"transforms.translation", number(rc.transforms.translation)},
      {"transforms.scale_min", number(rc.transforms.scale_min)},
      {"transforms.scale_max", number(rc.transforms.scale_max)},
      {"eqgap.meshes", integer(rc.eqgap.meshes)},
      {"eqgap.families", strings(rc.eqgap.families)},
      {"eval.checkpoint", text(rc.eval.checkpoint)},
      {"eval.families", strings(rc.eval.families)},
      {"time.rows", integer(rc.time.rows)},
      {"time.cols", integer(rc.time.cols)},
      {"time.repetitions", integer(rc.time.repetitions)},
      {"time.warmup", integer(rc.time.warmup)},
      {"time.layers", text(rc.time.layers)},
      {"mesh.kind", text(rc.mesh.kind)},
      {"mesh.subdivisions", integer(rc.mesh.subdivisions)},
      {"mesh.rows", integer(rc.mesh.rows)},
      {"mesh.cols", integer(rc.mesh.cols)},
      {"mesh.noise", number(rc.mesh.noise)},
      {"mesh.input", text(rc.mesh.input)},
      {"mesh.output", text(rc.mesh.output)},
  };

  for (const auto& [key, value] : file.entries()) {
    const auto it = schema.find(key);
    if (it == schema.end()) throw Error(ErrorCode::UnknownConfigKey, "unknown config key '" + key + "'");
    it->second(key, value);
  }

  if (rc.train.epochs < 0) throw Error(ErrorCode::Config, "train.epochs must be >= 0");
  if (rc.train.batch_size < 1) throw Error(ErrorCode::Config, "train.batch_size must be >= 1");
  if (rc.train.learning_rate < 0.0) throw Error(ErrorCode::Config, "train.learning_rate must be >= 0");
  if (rc.time.repetitions < 1 || rc.time.warmup < 0) {
    throw Error(ErrorCode::Config, "time.repetitions must be >= 1 and time.warmup >= 0");
  }
  if (rc.eqgap.meshes < 1) throw Error(ErrorCode::Config, "eqgap.meshes must be >= 1");
  return rc;
}

RunConfig parse_run_config(std::string_view text) { return to_run_config(ConfigFile::parse(text)); }

RunConfig load_run_config(const std::filesystem::path& path) {
  ConfigFile file = ConfigFile::load(path);
  if (const char* env = std::getenv("MESHNET_SEED"); env != nullptr && *env != '\0') {
    file.set("seed", env);
  }
  return to_run_config(file);
}

}  // namespace meshnet
