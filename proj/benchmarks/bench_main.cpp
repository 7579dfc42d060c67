// Hot paths of one adaptive step: family assembly, the Kronecker matvec,
// the preconditioned solve and both estimators.

#include "sgfem/estimator.hpp"
#include "sgfem/galerkin.hpp"

#include <benchmark/benchmark.h>

#include <memory>

using namespace sgfem;

namespace {

std::shared_ptr<const randfield::CoefficientModel> model(std::size_t M) {
    static auto basis = std::make_shared<const polychaos::UnivariateBasis>(polychaos::build_basis(1.0, 40));
    return std::make_shared<const randfield::CoefficientModel>(
        randfield::Nonlinearity::Square,
        std::make_shared<const randfield::AffineField>(randfield::cosine_field(0.6, 2.0, M)), basis, 10);
}

const fem::ScalarFn one = [](Point) { return 1.0; };

galerkin::KroneckerSystem system_for(int level, std::size_t M, int degree) {
    auto m = model(M);
    auto space = std::make_shared<const fem::FESpace>(fem::UniformGrid(m->field().domain(), level), fem::SpaceKind::Q1);
    return galerkin::assemble(m, space, polychaos::complete_set(M, degree), one);
}

void BM_Assemble(benchmark::State& state) {
    const int level = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto sys = system_for(level, 4, 2);
        benchmark::DoNotOptimize(sys.rhs.data());
    }
}
BENCHMARK(BM_Assemble)->Arg(4)->Arg(5)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_KroneckerApply(benchmark::State& state) {
    const auto sys = system_for(static_cast<int>(state.range(0)), 4, static_cast<int>(state.range(1)));
    fem::Vector x(sys.size(), 1.0), y(sys.size());
    for (auto _ : state) {
        sys.apply(x, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sys.size()));
}
BENCHMARK(BM_KroneckerApply)->Args({5, 1})->Args({5, 2})->Args({6, 2})->Unit(benchmark::kMicrosecond);

void BM_Solve(benchmark::State& state) {
    const auto sys = system_for(static_cast<int>(state.range(0)), 4, 2);
    for (auto _ : state) {
        auto u = galerkin::solve(sys);
        benchmark::DoNotOptimize(u.coeffs.data());
    }
}
BENCHMARK(BM_Solve)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_SpatialEstimator(benchmark::State& state) {
    const auto sys = system_for(static_cast<int>(state.range(0)), 4, 2);
    const auto u = galerkin::solve(sys);
    const auto form = estimator::AuxiliaryForm::b0();
    for (auto _ : state) {
        auto e = estimator::spatial_estimator(sys, u, form, one);
        benchmark::DoNotOptimize(e.total_sq);
    }
}
BENCHMARK(BM_SpatialEstimator)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_ParametricEstimatorB0(benchmark::State& state) {
    const auto sys = system_for(static_cast<int>(state.range(0)), 4, 2);
    const auto u = galerkin::solve(sys);
    const auto Q = estimator::detail_index_set(sys.P, *sys.model);
    for (auto _ : state) {
        auto e = estimator::parametric_estimator_b0(sys, u, Q);
        benchmark::DoNotOptimize(e.total_sq);
    }
}
BENCHMARK(BM_ParametricEstimatorB0)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
