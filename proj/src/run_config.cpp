#include "genie/run_config.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace genie {
namespace {

using nlohmann::json;

template <class T>
T strict_number(const std::string& value, const std::string& key) {
  T v{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    throw std::invalid_argument("bad value '" + value + "' for " + key);
  return v;
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("bad value '" + value + "' for " + key + " (want true/false)");
}

void set_key(RunConfig& cfg, const std::string& key, const json& v) {
  auto str = [&]() -> std::string {
    if (!v.is_string()) throw std::invalid_argument("config key '" + key + "' must be a string");
    return v.get<std::string>();
  };
  if (key == "variant") cfg.model.variant = parse_variant(str());
  else if (key == "depth") cfg.model.depth = v.get<int>();
  else if (key == "hidden") cfg.model.hidden = v.get<int>();
  else if (key == "residual") cfg.model.residual = parse_residual(str());
  else if (key == "bias") {
    if (!v.is_boolean()) throw std::invalid_argument("config key 'bias' must be a boolean");
    cfg.model.bias = v.get<bool>();
  } else if (key == "task") {
    cfg.model.task = parse_task(str());
    cfg.task_explicit = true;
  } else if (key == "lr") cfg.model.lr = v.get<double>();
  else if (key == "l2_penalty") cfg.model.l2_penalty = v.get<double>();
  else if (key == "epochs") cfg.model.epochs = v.get<int>();
  else if (key == "patience") cfg.model.patience = v.get<int>();
  else if (key == "seed") cfg.model.seed = v.get<std::uint64_t>();
  else if (key == "dataset") cfg.dataset = str();
  else if (key == "out_dir") cfg.out_dir = str();
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument(path + ": config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    try {
      set_key(cfg, key, value);
    } catch (const json::exception& e) {
      throw std::invalid_argument(path + ": key '" + key + "': " + e.what());
    }
  }
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must be key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  if (key == "variant") cfg.model.variant = parse_variant(value);
  else if (key == "depth") cfg.model.depth = strict_number<int>(value, key);
  else if (key == "hidden") cfg.model.hidden = strict_number<int>(value, key);
  else if (key == "residual") cfg.model.residual = parse_residual(value);
  else if (key == "bias") cfg.model.bias = parse_bool(value, key);
  else if (key == "task") {
    cfg.model.task = parse_task(value);
    cfg.task_explicit = true;
  } else if (key == "lr") cfg.model.lr = strict_number<double>(value, key);
  else if (key == "l2_penalty") cfg.model.l2_penalty = strict_number<double>(value, key);
  else if (key == "epochs") cfg.model.epochs = strict_number<int>(value, key);
  else if (key == "patience") cfg.model.patience = strict_number<int>(value, key);
  else if (key == "seed") cfg.model.seed = strict_number<std::uint64_t>(value, key);
  else if (key == "dataset") cfg.dataset = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string run_config_json(const RunConfig& cfg) {
  json j;
  j["variant"] = variant_name(cfg.model.variant);
  j["depth"] = cfg.model.depth;
  j["hidden"] = cfg.model.hidden;
  j["residual"] = residual_name(cfg.model.residual);
  j["bias"] = cfg.model.bias;
  j["task"] = task_name(cfg.model.task);
  j["lr"] = cfg.model.lr;
  j["l2_penalty"] = cfg.model.l2_penalty;
  j["epochs"] = cfg.model.epochs;
  j["patience"] = cfg.model.patience;
  j["seed"] = cfg.model.seed;
  j["dataset"] = cfg.dataset;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

}  // namespace genie
