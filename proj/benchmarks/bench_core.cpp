#include <cmath>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include <pbec/pbec.hpp>

using namespace pbec;

namespace {

DyeModel reference_dye() {
  DyeModel d;
  d.sigma_abs = load_dye_spectra(std::string(PBEC_DATA_DIR) + "/dye_reference.tsv");
  return d;
}

NoneqParams fig2_params(double lambda0, int levels, int bins, double rate) {
  CavityConfig c;
  c.lambda0_nm = lambda0;
  GridOptions g;
  g.n_bins = bins;
  return make_noneq_params(c, reference_dye(), levels, PumpConfig{2.4, rate}, g);
}

std::vector<double> log_rates(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(a * std::pow(b / a, double(i) / (n - 1)));
  return v;
}

void BM_SolveMu(benchmark::State& st) {
  const ModeLadder lad = build_mode_ladder(CavityConfig{}, static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(solve_mu(8.0, lad, 170.0));
}
BENCHMARK(BM_SolveMu)->Arg(20)->Arg(200);

void BM_BuildOverlaps(benchmark::State& st) {
  CavityConfig c;
  const ModeLadder lad = build_mode_ladder(c, static_cast<int>(st.range(0)));
  GridOptions g;
  g.n_bins = static_cast<int>(st.range(1));
  const SpatialGrid grid = build_grid(c, reference_dye(), PumpConfig{2.4, 0.0}, g);
  for (auto _ : st) benchmark::DoNotOptimize(build_overlaps(lad, grid, c));
}
BENCHMARK(BM_BuildOverlaps)->Args({20, 64})->Args({40, 64})->Unit(benchmark::kMillisecond);

void BM_SteadyStateCold(benchmark::State& st) {
  const NoneqParams p = fig2_params(563.0, static_cast<int>(st.range(0)), 64, 1e6);
  for (auto _ : st) benchmark::DoNotOptimize(steady_state(p));
}
BENCHMARK(BM_SteadyStateCold)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_SweepPump(benchmark::State& st) {
  const NoneqParams p = fig2_params(563.0, 40, 64, 0.0);
  const auto rates = log_rates(3e4, 4e6, 41);
  for (auto _ : st) benchmark::DoNotOptimize(sweep_pump(p, rates));
}
BENCHMARK(BM_SweepPump)->Unit(benchmark::kMillisecond);

void BM_RateJacobian(benchmark::State& st) {
  const NoneqParams p = fig2_params(563.0, 40, 64, 1e6);
  const SimState s = steady_state(p);
  std::vector<double> y(s.n);
  y.insert(y.end(), s.f.begin(), s.f.end());
  for (auto _ : st) benchmark::DoNotOptimize(rate_jacobian(p, y));
}
BENCHMARK(BM_RateJacobian)->Unit(benchmark::kMicrosecond);

void BM_G1Thermal(benchmark::State& st) {
  CavityConfig c;
  c.f_x_thz = 1.42;
  c.f_y_thz = 1.48;
  const auto modes = resolved_modes(c, 40, 40);
  std::vector<double> tau;
  for (int i = 0; i < st.range(0); ++i) tau.push_back(2e-12 * i / (st.range(0) - 1));
  for (auto _ : st) benchmark::DoNotOptimize(g1_thermal(modes, 300.0, tau));
}
BENCHMARK(BM_G1Thermal)->Arg(2001)->Unit(benchmark::kMillisecond);

void BM_FitBe(benchmark::State& st) {
  const ModeLadder lad = build_mode_ladder(CavityConfig{}, 20);
  const double mu = solve_mu(8.0, lad, 170.0);
  std::vector<LevelSignal> obs;
  for (int i = 0; i < 10; ++i) {
    const auto& m = lad.modes[static_cast<std::size_t>(i)];
    obs.push_back({i, 3.0 * be_population(m.eps - lad.eps0(), m.g, {170.0, mu, 1.0})});
  }
  for (auto _ : st) benchmark::DoNotOptimize(fit_be(obs, lad));
}
BENCHMARK(BM_FitBe)->Unit(benchmark::kMicrosecond);

void BM_FitMicrolaser(benchmark::State& st) {
  std::vector<PumpSignal> d;
  for (double s : log_rates(0.01, 100.0, 31)) d.push_back({s * 4e12, microlaser_n_reduced(0.05, s)});
  for (auto _ : st) benchmark::DoNotOptimize(fit_microlaser(d));
}
BENCHMARK(BM_FitMicrolaser)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
