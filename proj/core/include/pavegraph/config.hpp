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

#pragma once

// Flat `key = value` configuration text with module-prefixed keys
// (train.lr, model.heads, synth.gamma, explain.steps).

#include <map>
#include <string>
#include <string_view>

#include "pavegraph/explain.hpp"
#include "pavegraph/model.hpp"
#include "pavegraph/synth.hpp"
#include "pavegraph/training.hpp"

namespace pavegraph {

using ConfigMap = std::map<std::string, std::string, std::less<>>;

// Blank lines and '#' comments are skipped. Duplicate keys are an error.
ConfigMap parse_config_text(std::string_view text);
ConfigMap read_config_file(const std::string& path);

// Each apply_* consumes keys of its namespace and rejects unknown ones.
void apply_config(const ConfigMap& map, TrainConfig& config);
void apply_config(const ConfigMap& map, ModelConfig& config);
void apply_config(const ConfigMap& map, SynthConfig& config);
void apply_config(const ConfigMap& map, ExplainConfig& config);

// Throws ConfigError if a key has a namespace none of the above understands.
void check_namespaces(const ConfigMap& map);

std::string to_config_text(const TrainConfig& config);
std::string to_config_text(const ModelConfig& config);
std::string to_config_text(const SynthConfig& config);
std::string to_config_text(const ExplainConfig& config);

}  // namespace pavegraph
