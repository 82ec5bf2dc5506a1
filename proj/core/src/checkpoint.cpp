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

#include "pavegraph/checkpoint.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "pavegraph/config.hpp"
#include "pavegraph/error.hpp"

namespace pavegraph {
namespace {

constexpr std::string_view kMagic = "pavegraph-checkpoint 1";

std::string hex(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, r.ptr);
}

double unhex(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw DataError("checkpoint: bad number '" + std::string(s) + "'");
  }
  return v;
}

void put_row(std::ostringstream& out, const std::string& tag, const Tensor& t) {
  out << tag << ' ' << t.rows() << ' ' << t.cols() << '\n';
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) out << (c ? " " : "") << hex(t(r, c));
    out << '\n';
  }
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  bool done() {
    skip();
    return pos_ >= text_.size();
  }

  std::string_view line() {
    skip();
    if (pos_ >= text_.size()) throw DataError("checkpoint: unexpected end of file");
    const auto end = std::min(text_.find('\n', pos_), text_.size());
    const auto out = text_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  Tensor tensor(std::string_view header, std::string* name) {
    std::istringstream h{std::string(header)};
    std::string tag;
    long rows = -1;
    long cols = -1;
    h >> tag >> *name >> rows >> cols;
    if (tag != "tensor" || rows < 0 || cols < 0 || h.fail()) {
      throw DataError("checkpoint: malformed tensor header '" + std::string(header) + "'");
    }
    Tensor t(rows, cols);
    for (long r = 0; r < rows; ++r) {
      std::string_view row = line();
      for (long c = 0; c < cols; ++c) {
        const auto space = row.find(' ');
        t(r, c) = unhex(row.substr(0, space));
        row = space == std::string_view::npos ? std::string_view{} : row.substr(space + 1);
        if (c + 1 < cols && row.empty()) throw DataError("checkpoint: short tensor row in " + *name);
      }
      if (!row.empty()) throw DataError("checkpoint: long tensor row in " + *name);
    }
    return t;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && text_[pos_] == '\n') ++pos_;
  }
  std::string_view text_;
  std::size_t pos_ = 0;
};

std::pair<std::string, std::string> split_kv(std::string_view line) {
  const auto eq = line.find(" = ");
  if (eq == std::string_view::npos) throw DataError("checkpoint: expected key = value");
  return {std::string(line.substr(0, eq)), std::string(line.substr(eq + 3))};
}

}  // namespace

std::string checkpoint_text(const Checkpoint& ck) {
  std::ostringstream out;
  out << kMagic << '\n';
  out << to_config_text(ck.model.config());
  out << "seed = " << ck.seed << '\n';
  const Standardizer& s = ck.standardizer;
  out << "standardizer.target_mean = " << hex(s.target_mean()) << '\n';
  out << "standardizer.target_std = " << hex(s.target_std()) << '\n';
  put_row(out, "tensor standardizer.feature_means", s.feature_means().transpose());
  put_row(out, "tensor standardizer.feature_stds", s.feature_stds().transpose());
  ParamSet params = ck.model.params();
  visit_params(params, [&](const std::string& name, const Tensor& t) {
    if (t.size() > 0) put_row(out, "tensor param." + name, t);
  });
  out << "end\n";
  return out.str();
}

Checkpoint parse_checkpoint(std::string_view text) {
  Reader in(text);
  if (in.line() != kMagic) throw DataError("checkpoint: not a pavegraph checkpoint");
  ConfigMap model_keys;
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor> tensors;
  bool ended = false;
  while (!in.done()) {
    const std::string_view line = in.line();
    if (line == "end") {
      ended = true;
      break;
    }
    if (line.starts_with("tensor ")) {
      std::string name;
      Tensor t = in.tensor(line, &name);
      if (!tensors.emplace(name, std::move(t)).second) {
        throw DataError("checkpoint: duplicate tensor " + name);
      }
      continue;
    }
    auto [key, value] = split_kv(line);
    if (key.starts_with("model.")) {
      model_keys[key] = value;
    } else {
      meta[key] = value;
    }
  }
  if (!ended) throw DataError("checkpoint: truncated (no end marker)");

  ModelConfig config;
  try {
    apply_config(model_keys, config);
    config.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint: missing " + key);
    return it->second;
  };
  auto take = [&](const std::string& name) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint: missing tensor " + name);
    Tensor t = std::move(it->second);
    tensors.erase(it);
    return t;
  };

  Checkpoint ck;
  {
    const std::string& s = need("seed");
    const auto r = std::from_chars(s.data(), s.data() + s.size(), ck.seed);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw DataError("checkpoint: bad seed");
  }
  const Tensor means = take("standardizer.feature_means");
  const Tensor stds = take("standardizer.feature_stds");
  if (means.rows() != 1 || stds.rows() != 1 || means.cols() != stds.cols()) {
    throw DataError("checkpoint: standardizer shape mismatch");
  }
  ck.standardizer = Standardizer(means.row(0).transpose(), stds.row(0).transpose(),
                                 unhex(need("standardizer.target_mean")),
                                 unhex(need("standardizer.target_std")));

  ParamSet params = Model::init(config, 0).params();
  visit_params(params, [&](const std::string& name, Tensor& slot) {
    if (slot.size() == 0) return;
    Tensor t = take("param." + name);
    if (t.rows() != slot.rows() || t.cols() != slot.cols()) {
      throw DataError("checkpoint: tensor " + name + " has shape " + ad::shape_string(t) +
                      ", expected " + ad::shape_string(slot));
    }
    slot = std::move(t);
  });
  if (!tensors.empty()) throw DataError("checkpoint: unexpected tensor " + tensors.begin()->first);
  ck.model = Model(config, std::move(params));
  return ck;
}

void write_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << checkpoint_text(checkpoint);
  if (!out) throw Error("failed writing checkpoint " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_checkpoint(text.str());
}

bool same_parameters(const ParamSet& a, const ParamSet& b) {
  std::vector<const Tensor*> left;
  std::vector<const Tensor*> right;
  visit_params(a, [&](const std::string&, const Tensor& t) { left.push_back(&t); });
  visit_params(b, [&](const std::string&, const Tensor& t) { right.push_back(&t); });
  if (left.size() != right.size()) return false;
  for (std::size_t k = 0; k < left.size(); ++k) {
    const Tensor& x = *left[k];
    const Tensor& y = *right[k];
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (x.size() > 0 &&
        std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace pavegraph
