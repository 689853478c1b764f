#include <benchmark/benchmark.h>

#include <vector>

#include "loaddev/dataio.hpp"
#include "loaddev/doe.hpp"
#include "loaddev/fdist.hpp"
#include "loaddev/groupstats.hpp"
#include "loaddev/linmod.hpp"
#include "loaddev/rng.hpp"
#include "loaddev/shotsim.hpp"

namespace doe = loaddev::doe;
namespace dio = loaddev::dataio;
namespace gs = loaddev::groupstats;
namespace lm = loaddev::linmod;
namespace sim = loaddev::shotsim;

namespace {

doe::PlanSkeleton skeleton() {
  doe::PlanSkeleton s;
  s.factors = {doe::default_seating_depth_factor(), doe::default_powder_charge_factor()};
  s.blocks = {"1", "2", "3", "4"};
  s.cases_per_block = 100;
  return s;
}

const doe::DesignPlan& plan() {
  static const doe::DesignPlan p = doe::randomize_assignment(skeleton(), 42);
  return p;
}

const dio::Dataset& dataset() {
  static const dio::Dataset ds = [] {
    sim::EffectModel effects;
    effects.seed = 7;
    return sim::simulate_experiment(plan(), effects);
  }();
  return ds;
}

const lm::DataTable& table() {
  static const lm::DataTable t = dio::analysis_table(dataset());
  return t;
}

void bm_mean_radius(benchmark::State& state) {
  loaddev::Rng rng(3);
  std::vector<gs::ImpactPoint> pts(400);
  for (auto& p : pts) {
    p.x = rng.normal();
    p.y = rng.normal();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(gs::mean_radius(pts));
  }
}
BENCHMARK(bm_mean_radius);

void bm_randomize_plan(benchmark::State& state) {
  const doe::PlanSkeleton s = skeleton();
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(doe::randomize_assignment(s, seed++));
  }
}
BENCHMARK(bm_randomize_plan);

void bm_simulate_experiment(benchmark::State& state) {
  sim::EffectModel effects;
  for (auto _ : state) {
    ++effects.seed;
    benchmark::DoNotOptimize(sim::simulate_experiment(plan(), effects));
  }
}
BENCHMARK(bm_simulate_experiment);

void bm_type1_anova(benchmark::State& state) {
  const lm::ModelSpec spec = dio::default_anova_spec();
  const lm::DataTable& t = table();
  for (auto _ : state) {
    benchmark::DoNotOptimize(lm::type1_anova(spec, t));
  }
}
BENCHMARK(bm_type1_anova);

void bm_type1_ancova(benchmark::State& state) {
  const lm::ModelSpec spec = dio::default_ancova_spec();
  const lm::DataTable& t = table();
  for (auto _ : state) {
    benchmark::DoNotOptimize(lm::type1_ancova(spec, t));
  }
}
BENCHMARK(bm_type1_ancova);

void bm_f_pvalue(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(loaddev::f_pvalue(1.78, 62, 317));
  }
}
BENCHMARK(bm_f_pvalue);

}  // namespace

BENCHMARK_MAIN();
