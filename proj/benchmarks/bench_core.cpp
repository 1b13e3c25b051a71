#include <benchmark/benchmark.h>

#include "replay_td/chain_analysis.hpp"
#include "replay_td/generator.hpp"
#include "replay_td/replay_buffer.hpp"
#include "replay_td/td_replay.hpp"

namespace {

using namespace replay_td;

GeneratedMdp fixture(int states, int actions) {
  GeneratorSpec spec;
  spec.n_states = states;
  spec.n_actions = actions;
  spec.seed = 42;
  return gen_mdp(spec);
}

void BM_BufferPush(benchmark::State& state) {
  ReplayBuffer buf(256, 8);
  Rng rng(1);
  for (auto _ : state) {
    buf.push({static_cast<int>(rng.next_below(8)), 0.5, static_cast<int>(rng.next_below(8))});
    benchmark::DoNotOptimize(buf.size());
  }
}
BENCHMARK(BM_BufferPush);

void BM_SampleMinibatch(benchmark::State& state) {
  ReplayBuffer buf(256, 8);
  Rng fill(1);
  for (int i = 0; i < 256; ++i) {
    buf.push({static_cast<int>(fill.next_below(8)), 0.5, static_cast<int>(fill.next_below(8))});
  }
  Rng rng(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(buf.sample_minibatch(static_cast<int>(state.range(0)), rng));
  }
}
BENCHMARK(BM_SampleMinibatch)->Arg(8)->Arg(32)->Arg(128);

void BM_BufferEmpirics(benchmark::State& state) {
  ReplayBuffer buf(256, 8);
  Rng fill(1);
  for (int i = 0; i < 256; ++i) {
    buf.push({static_cast<int>(fill.next_below(8)), 0.5, static_cast<int>(fill.next_below(8))});
  }
  for (auto _ : state) benchmark::DoNotOptimize(buf.empirics());
}
BENCHMARK(BM_BufferEmpirics);

void BM_LearnerStep(benchmark::State& state) {
  const GeneratedMdp gen = fixture(static_cast<int>(state.range(0)), 2);
  const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.1, false);
  RunConfig cfg;
  cfg.buffer_n = 256;
  cfg.batch_l = 32;
  cfg.seed = 3;
  Learner learner(gen.mdp, gen.policy, chain, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(learner.step());
}
BENCHMARK(BM_LearnerStep)->Arg(3)->Arg(8)->Arg(16);

void BM_InduceChain(benchmark::State& state) {
  const GeneratedMdp gen = fixture(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(induce_chain(gen.mdp, gen.policy, 0.1));
  }
}
BENCHMARK(BM_InduceChain)->Arg(3)->Arg(8)->Arg(16);

void BM_MixingProfile(benchmark::State& state) {
  const GeneratedMdp gen = fixture(static_cast<int>(state.range(0)), 2);
  const InducedChain chain = induce_chain(gen.mdp, gen.policy, 0.1, false);
  for (auto _ : state) benchmark::DoNotOptimize(mixing_profile(chain));
}
BENCHMARK(BM_MixingProfile)->Arg(3)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
