// Serial reference vs OpenMP kernels on the shapes the training loop uses.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "autolabel/kernels.hpp"

namespace k = autolabel::kernels;

namespace {

std::vector<float> random_vector(std::size_t n, unsigned seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = d(gen);
    return v;
}

template <bool Parallel>
void matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_vector(n * n, 1);
    const auto b = random_vector(n * n, 2);
    std::vector<float> c(n * n);
    for (auto _ : state) {
        if constexpr (Parallel)
            k::parallel::matmul_nn(a.data(), b.data(), c.data(), n, n, n);
        else
            k::serial::matmul_nn(a.data(), b.data(), c.data(), n, n, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}

// Convolutions of the default network: 128 images of 16x16, 3x3 kernel.
template <bool Parallel>
void im2col(benchmark::State& state) {
    const k::ConvGeometry g{static_cast<std::size_t>(state.range(0)), 16, 16, 3};
    const std::size_t batch = 128;
    const auto images = random_vector(batch * g.channels * g.pixels(), 3);
    std::vector<float> cols(g.patch() * batch * g.pixels());
    for (auto _ : state) {
        if constexpr (Parallel)
            k::parallel::im2col(images.data(), cols.data(), batch, g);
        else
            k::serial::im2col(images.data(), cols.data(), batch, g);
        benchmark::DoNotOptimize(cols.data());
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * cols.size() * sizeof(float)));
}

} // namespace

BENCHMARK(matmul<false>)->Name("matmul_nn/serial")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(matmul<true>)->Name("matmul_nn/parallel")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(im2col<false>)->Name("im2col/serial")->Arg(1)->Arg(16);
BENCHMARK(im2col<true>)->Name("im2col/parallel")->Arg(1)->Arg(16);

BENCHMARK_MAIN();
