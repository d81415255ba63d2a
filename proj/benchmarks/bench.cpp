#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "gazeid/density.hpp"
#include "gazeid/gamma.hpp"
#include "gazeid/gp.hpp"
#include "gazeid/reader_model.hpp"
#include "gazeid/sampler.hpp"
#include "gazeid/synth.hpp"

using namespace gazeid;

namespace {

std::vector<double> gamma_draws(std::size_t n) {
  RngStream rng(1);
  return sample(from_shape_rate(3.0, 0.02), n, rng);
}

void BM_DensityConstruct(benchmark::State& state) {
  const auto y = gamma_draws(200);
  auto grid = std::make_shared<const SupportGrid>(
      build_grid(y, static_cast<std::size_t>(state.range(0)), kDefaultExtensionFactor));
  const std::vector<double> g(grid->points().size(), 0.1);
  for (auto _ : state) {
    SemiparametricDensity f(grid, from_shape_rate(3.0, 0.02), g);
    benchmark::DoNotOptimize(f.log_normalizer());
  }
}
BENCHMARK(BM_DensityConstruct)->Arg(128)->Arg(512)->Arg(2048);

void BM_TruncatedMass(benchmark::State& state) {
  const auto y = gamma_draws(200);
  auto grid = std::make_shared<const SupportGrid>(build_grid(y, 512, kDefaultExtensionFactor));
  const SemiparametricDensity f = SemiparametricDensity::gamma_on_grid(grid, from_shape_rate(3.0, 0.02));
  double l = 10.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.truncated_mass(l, l + 90.0));
    l = l > 300.0 ? 10.0 : l + 1.0;
  }
}
BENCHMARK(BM_TruncatedMass);

void BM_GpFactor(benchmark::State& state) {
  std::vector<double> p;
  for (int i = 0; i < state.range(0); ++i) p.push_back(1.0 + i);
  const CovarianceConfig c = CovarianceConfig::with_default_jitter(1.0, average_pairwise_distance(p));
  for (auto _ : state) {
    GpFactor f(p, c);
    benchmark::DoNotOptimize(f.log_determinant());
  }
}
BENCHMARK(BM_GpFactor)->Arg(128)->Arg(512);

void BM_ChainIterations(benchmark::State& state) {
  TruncatedObservations obs;
  for (double v : gamma_draws(static_cast<std::size_t>(state.range(0)))) obs.add(v, 0.0, 1e300);
  auto grid = std::make_shared<const SupportGrid>(build_grid(obs.y, 512, kDefaultExtensionFactor));
  const CovarianceConfig c =
      CovarianceConfig::with_default_jitter(1.0, average_pairwise_distance(grid->points()));
  MHConfig mh;
  mh.iterations = 1000;
  mh.burn_in = 500;
  mh.keep_latent_samples = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_chain(obs, grid, c, mh).acceptance_rate);
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_ChainIterations)->Arg(50)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_ScanpathLikelihood(benchmark::State& state) {
  PopulationSpec spec;
  spec.reader_count = 1;
  RngStream r1(1);
  RngStream r2(2);
  RngStream r3(3);
  const auto texts = make_corpus(spec, r1);
  const auto models = make_population(spec, r2);
  std::vector<Scanpath> sps;
  for (const TextLine& t : texts) sps.push_back(generate(t, models[0], max_fixations_for(t.size()), r3));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(scanpath_log_likelihood(sps[i], texts[i], models[0]));
    i = (i + 1) % sps.size();
  }
}
BENCHMARK(BM_ScanpathLikelihood);

}  // namespace

BENCHMARK_MAIN();
