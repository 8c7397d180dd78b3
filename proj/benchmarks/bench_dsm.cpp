#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "dsm/archive.hpp"
#include "dsm/fixture_provider.hpp"
#include "dsm/induction.hpp"

using namespace dsm;

namespace {

SquareMatrix random_matrix(std::size_t n, bool symmetric, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SquareMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (symmetric && j < i) {
        m(i, j) = m(j, i);
      } else {
        m(i, j) = u(rng);
      }
    }
  }
  return m;
}

std::vector<std::string> words(std::size_t n) {
  static const char* pool[] = {"the", "children", "played", "outside", "in", "a", "park", "."};
  std::vector<std::string> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = pool[i % 8];
  return w;
}

void BM_PrimMst(benchmark::State& state) {
  const ScoreMatrix s{random_matrix(static_cast<std::size_t>(state.range(0)), true, 1), true};
  for (auto _ : state) benchmark::DoNotOptimize(prim_mst(s));
}
BENCHMARK(BM_PrimMst)->RangeMultiplier(2)->Range(8, 128);

void BM_ChuLiuEdmonds(benchmark::State& state) {
  const SquareMatrix m = random_matrix(static_cast<std::size_t>(state.range(0)), false, 2);
  for (auto _ : state) benchmark::DoNotOptimize(chu_liu_edmonds(m, 0));
}
BENCHMARK(BM_ChuLiuEdmonds)->RangeMultiplier(2)->Range(8, 64);

void BM_ReduceToWords(benchmark::State& state) {
  FixtureOptions o;
  o.split_subwords = true;
  const ModelResponse resp =
      fixture_attention(words(static_cast<std::size_t>(state.range(0))), {4, 10}, o);
  for (auto _ : state) benchmark::DoNotOptimize(reduce_to_words(resp));
}
BENCHMARK(BM_ReduceToWords)->Arg(10)->Arg(40);

struct ArchiveInput {
  ArchiveHeader header;
  std::vector<ArchiveRecord> records;
};

ArchiveInput archive_input() {
  ArchiveInput in;
  in.header.model = "fixture";
  in.header.layers = {10};
  in.header.heads = 12;
  for (std::size_t n = 5; n < 45; ++n) {
    const auto w = words(n);
    in.records.push_back(
        make_record(w, reduce_to_words(fixture_attention(w, {10}, 12, n)), in.header));
  }
  return in;
}

void BM_ArchiveWrite(benchmark::State& state) {
  const ArchiveInput in = archive_input();
  for (auto _ : state) {
    std::ostringstream out;
    write_archive(out, in.header, in.records);
    benchmark::DoNotOptimize(out.str().size());
  }
}
BENCHMARK(BM_ArchiveWrite);

void BM_ArchiveRead(benchmark::State& state) {
  const ArchiveInput in = archive_input();
  std::ostringstream out;
  write_archive(out, in.header, in.records);
  const std::string bytes = out.str();
  for (auto _ : state) {
    std::istringstream s(bytes);
    benchmark::DoNotOptimize(read_archive(s));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes.size()));
}
BENCHMARK(BM_ArchiveRead);

}  // namespace
BENCHMARK_MAIN();
