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

// Text checkpoint. Doubles are stored as hexadecimal floating point so a
// write/read round trip reproduces every parameter bit for bit.

#include <cstdint>
#include <string>
#include <string_view>

#include "pavegraph/graph.hpp"
#include "pavegraph/model.hpp"

namespace pavegraph {

struct Checkpoint {
  Model model;
  Standardizer standardizer;
  std::uint64_t seed = 0;
};

std::string checkpoint_text(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);

// True if both parameter sets have the same shapes and identical bits.
bool same_parameters(const ParamSet& a, const ParamSet& b);

}  // namespace pavegraph
