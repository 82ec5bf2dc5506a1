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


#include <benchmark/benchmark.h>

#include "pavegraph/pipeline.hpp"
#include "pavegraph/synth.hpp"
#include "pavegraph/training.hpp"

using namespace pavegraph;

namespace {

struct Fixture {
  SynthDataset data;
  PreparedData prepared;
  MessageGraph graph;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    SynthConfig sc;
    sc.num_segments = 200;
    sc.target_arcs = 2 * (sc.num_segments - 1);
    Fixture out;
    out.data = generate(sc);
    out.prepared = prepare_data(out.data.series, 2);
    out.graph = MessageGraph::from(out.data.graph);
    return out;
  }();
  return f;
}

Variant variant_arg(const benchmark::State& state) { return static_cast<Variant>(state.range(0)); }

void BM_Forward(benchmark::State& state) {
  const Fixture& f = fixture();
  ModelConfig mc;
  mc.variant = variant_arg(state);
  const Model m = Model::init(mc, 1);
  const TemporalSample& s = f.prepared.windows.train.front();
  for (auto _ : state) benchmark::DoNotOptimize(m.predict(s, f.graph));
  state.SetLabel(std::string(variant_name(mc.variant)));
}

void BM_ForwardBackward(benchmark::State& state) {
  const Fixture& f = fixture();
  ModelConfig mc;
  mc.variant = variant_arg(state);
  const Model m = Model::init(mc, 1);
  const TemporalSample& s = f.prepared.windows.train.front();
  std::vector<int> nodes(static_cast<std::size_t>(f.graph.num_nodes));
  for (int i = 0; i < f.graph.num_nodes; ++i) nodes[i] = i;
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradients(m, s, f.graph, nodes));
  state.SetLabel(std::string(variant_name(mc.variant)));
}

void BM_SynthDefault(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(generate(SynthConfig{}));
}

}  // namespace

BENCHMARK(BM_Forward)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardBackward)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SynthDefault)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
