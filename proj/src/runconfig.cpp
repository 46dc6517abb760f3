#include "pmdm/runconfig.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace pmdm {

using nlohmann::json;

namespace {

json model_to_json(const ModelConfig& m) {
  json j;
  j["mode"] = to_string(m.mode);
  j["history"] = m.history;
  j["horizon"] = m.horizon;
  j["nodes"] = m.nodes;
  j["channels"] = m.channels;
  j["hidden"] = m.hidden;
  j["embed_p"] = m.embed_p;
  j["embed_d"] = m.embed_d;
  j["memory_slots"] = m.memory_slots;
  j["interval_minutes"] = m.interval_minutes;
  j["layers"] = m.layers;
  j["no_decoder"] = m.no_decoder;
  j["no_tam"] = m.no_tam;
  j["no_dmn"] = m.no_dmn;
  j["no_napl"] = m.no_napl;
  j["gate_bias"] = m.gate_bias;
  j["project_patterns"] = m.project_patterns;
  return j;
}

void model_from_json(const json& j, ModelConfig& m) {
  if (j.contains("mode")) m.mode = mode_from_string(j["mode"].get<std::string>());
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  opt("history", m.history);
  opt("horizon", m.horizon);
  opt("nodes", m.nodes);
  opt("channels", m.channels);
  opt("hidden", m.hidden);
  opt("embed_p", m.embed_p);
  opt("embed_d", m.embed_d);
  opt("memory_slots", m.memory_slots);
  opt("interval_minutes", m.interval_minutes);
  opt("layers", m.layers);
  opt("no_decoder", m.no_decoder);
  opt("no_tam", m.no_tam);
  opt("no_dmn", m.no_dmn);
  opt("no_napl", m.no_napl);
  opt("gate_bias", m.gate_bias);
  opt("project_patterns", m.project_patterns);
}

const std::set<std::string>& run_config_keys() {
  static const std::set<std::string> keys = {
      "mode",        "history",    "horizon",      "hidden",
      "embed_p",     "embed_d",    "memory_slots", "layers",
      "no_decoder",  "no_tam",     "no_dmn",       "no_napl",
      "gate_bias",   "project_patterns",
      "lr",          "batch_size", "max_epochs",   "patience",
      "ss_decay",    "grad_clip",  "seed",
      "dataset",     "split",      "out_dir"};
  return keys;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") +
                                e.what());
  }
  if (!j.is_object())
    throw std::invalid_argument("config: top level must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!run_config_keys().count(key))
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  RunConfig cfg;
  model_from_json(j, cfg.model);
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  opt("lr", cfg.train.lr);
  opt("batch_size", cfg.train.batch_size);
  opt("max_epochs", cfg.train.max_epochs);
  opt("patience", cfg.train.patience);
  opt("ss_decay", cfg.train.ss_decay);
  opt("grad_clip", cfg.train.grad_clip);
  opt("seed", cfg.train.seed);
  opt("dataset", cfg.dataset);
  opt("out_dir", cfg.out_dir);
  if (j.contains("split")) {
    const auto& s = j["split"];
    if (!s.is_array() || s.size() != 3)
      throw std::invalid_argument(
          "config: split must be an array of 3 ratios");
    cfg.split.train = s[0].get<double>();
    cfg.split.val = s[1].get<double>();
    cfg.split.test = s[2].get<double>();
  }
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
  json j = model_to_json(model);
  // Architecture fields that only make sense with a dataset attached are kept
  // (they record what the run used), training fields follow.
  j["lr"] = train.lr;
  j["batch_size"] = train.batch_size;
  j["max_epochs"] = train.max_epochs;
  j["patience"] = train.patience;
  j["ss_decay"] = train.ss_decay;
  j["grad_clip"] = train.grad_clip;
  j["seed"] = train.seed;
  j["dataset"] = dataset;
  j["split"] = {split.train, split.val, split.test};
  j["out_dir"] = out_dir;
  j.erase("nodes");
  j.erase("channels");
  j.erase("interval_minutes");
  return j.dump(2) + "\n";
}

std::string model_config_json(const ModelConfig& config) {
  return model_to_json(config).dump(2) + "\n";
}

ModelConfig model_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model config: invalid JSON: ") +
                                e.what());
  }
  ModelConfig m;
  model_from_json(j, m);
  m.validate();
  return m;
}

ModelConfig model_config_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("model config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return model_config_from_json(text);
}

}  // namespace pmdm
