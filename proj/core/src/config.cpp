/*
 * Copyright 2026 The PaveGraph Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pavegraph/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "pavegraph/csv.hpp"
#include "pavegraph/error.hpp"

namespace pavegraph {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// A named field: reads from text, writes to text.
struct Field {
  std::string key;
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

template <typename T>
Field number(std::string key, T& slot) {
  Field f;
  f.key = key;
  f.set = [&slot, key](std::string_view v) {
    try {
      if constexpr (std::is_floating_point_v<T>) {
        slot = parse_double(v, key);
      } else {
        const long long x = parse_int(v, key);
        if (x < 0 && std::is_unsigned_v<T>) throw DataError("negative value");
        slot = static_cast<T>(x);
      }
    } catch (const DataError& e) {
      throw ConfigError("config: bad value '" + std::string(v) + "' for " + key);
    }
  };
  f.get = [&slot] {
    if constexpr (std::is_floating_point_v<T>) {
      return format_double(slot);
    } else {
      return std::to_string(slot);
    }
  };
  return f;
}

Field flag(std::string key, bool& slot) {
  Field f;
  f.key = key;
  f.set = [&slot, key](std::string_view v) {
    if (v == "true" || v == "1") {
      slot = true;
    } else if (v == "false" || v == "0") {
      slot = false;
    } else {
      throw ConfigError("config: expected true/false for " + key + ", got '" + std::string(v) + "'");
    }
  };
  f.get = [&slot] { return std::string(slot ? "true" : "false"); };
  return f;
}

Field alias(std::string key, const Field& target) {
  Field f = target;
  f.key = std::move(key);
  f.get = nullptr;  // not written back
  return f;
}

void apply_fields(const ConfigMap& map, std::string_view prefix, const std::vector<Field>& fields) {
  for (const auto& [key, value] : map) {
    if (key.size() <= prefix.size() || key.compare(0, prefix.size(), prefix) != 0) continue;
    const std::string_view name = std::string_view(key).substr(prefix.size());
    bool found = false;
    for (const Field& f : fields) {
      if (f.key == name) {
        f.set(value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("config: unknown key '" + key + "'");
  }
}

std::string render(std::string_view prefix, const std::vector<Field>& fields) {
  std::string out;
  for (const Field& f : fields) {
    if (!f.get) continue;
    out += std::string(prefix) + f.key + " = " + f.get() + "\n";
  }
  return out;
}

std::vector<Field> fields_of(TrainConfig& c) {
  std::vector<Field> v{
      number("learning_rate", c.learning_rate),
      number("weight_decay", c.weight_decay),
      number("max_epochs", c.max_epochs),
      number("scheduler_factor", c.scheduler_factor),
      number("scheduler_patience", c.scheduler_patience),
      number("scheduler_threshold", c.scheduler_threshold),
      number("early_stop_patience", c.early_stop_patience),
      flag("early_stopping", c.early_stopping),
      flag("decoupled_weight_decay", c.decoupled_weight_decay),
      number("seed", c.seed),
      number("window", c.window),
  };
  v.push_back(alias("lr", v[0]));
  v.push_back(alias("epochs", v[2]));
  return v;
}

Field variant_field(Variant& slot) {
  Field f;
  f.key = "variant";
  f.set = [&slot](std::string_view v) {
    const auto parsed = parse_variant(v);
    if (!parsed) throw ConfigError("config: unknown variant '" + std::string(v) + "'");
    slot = *parsed;
  };
  f.get = [&slot] { return std::string(variant_name(slot)); };
  return f;
}

std::vector<Field> fields_of(ModelConfig& c) {
  std::vector<Field> v{
      variant_field(c.variant),
      number("num_features", c.num_features),
      number("window", c.window),
      number("heads", c.heads),
      number("head_dim", c.head_dim),
      number("gru_hidden", c.gru_hidden),
      number("head_hidden", c.head_hidden),
      number("spatial_dropout", c.spatial_dropout),
      number("head_dropout", c.head_dropout),
      number("leaky_slope", c.leaky_slope),
      number("elu_alpha", c.elu_alpha),
      number("norm_eps", c.norm_eps),
  };
  v.push_back(alias("t0", v[2]));
  v.push_back(alias("gat_hidden", v[4]));
  return v;
}

std::vector<Field> fields_of(SynthConfig& c) {
  return {
      number("num_segments", c.num_segments),
      number("first_year", c.first_year),
      number("num_years", c.num_years),
      number("target_arcs", c.target_arcs),
      number("gamma", c.gamma),
      number("noise_std", c.noise_std),
      number("observation_noise", c.observation_noise),
      flag("drift", c.drift),
      number("drift_std", c.drift_std),
      number("drift_persistence", c.drift_persistence),
      number("burn_in_years", c.burn_in_years),
      number("seed", c.seed),
  };
}

std::vector<Field> fields_of(ExplainConfig& c) {
  return {
      number("l1_feature", c.l1_feature),
      number("entropy_feature", c.entropy_feature),
      number("l1_edge", c.l1_edge),
      number("steps", c.steps),
      number("learning_rate", c.learning_rate),
      number("init_std", c.init_std),
      number("seed", c.seed),
  };
}

}  // namespace

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap map;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
    }
    if (!map.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return map;
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

void apply_config(const ConfigMap& map, TrainConfig& config) {
  apply_fields(map, "train.", fields_of(config));
}
void apply_config(const ConfigMap& map, ModelConfig& config) {
  apply_fields(map, "model.", fields_of(config));
}
void apply_config(const ConfigMap& map, SynthConfig& config) {
  apply_fields(map, "synth.", fields_of(config));
}
void apply_config(const ConfigMap& map, ExplainConfig& config) {
  apply_fields(map, "explain.", fields_of(config));
}

void check_namespaces(const ConfigMap& map) {
  for (const auto& [key, value] : map) {
    const auto dot = key.find('.');
    const std::string ns = dot == std::string::npos ? key : key.substr(0, dot);
    if (ns != "train" && ns != "model" && ns != "synth" && ns != "explain") {
      throw ConfigError("config: unknown namespace in key '" + key + "'");
    }
  }
}

std::string to_config_text(const TrainConfig& config) {
  TrainConfig c = config;
  return render("train.", fields_of(c));
}
std::string to_config_text(const ModelConfig& config) {
  ModelConfig c = config;
  return render("model.", fields_of(c));
}
std::string to_config_text(const SynthConfig& config) {
  SynthConfig c = config;
  return render("synth.", fields_of(c));
}
std::string to_config_text(const ExplainConfig& config) {
  ExplainConfig c = config;
  return render("explain.", fields_of(c));
}

}  // namespace pavegraph
