#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "chm/kernels.hpp"
#include "chm/learners.hpp"
#include "chm/matrix.hpp"
#include "chm/rng.hpp"

// Times the serial reference kernels against the OpenMP variants, plus two
// end-to-end fits with the thread count pinned to 1 vs all cores.

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    fn(); // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP\n");
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    chm::Rng rng(42);
    const std::size_t n = 16384, in = 16, out = 16;
    std::vector<double> X(n * in), W(out * in), b(out), Y(n * out), delta(n * out), dW(out * in),
        dX(n * in), db(out);
    for (auto& v : X) v = rng.normal();
    for (auto& v : W) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    for (auto& v : delta) v = rng.normal();

    row("affine_forward 16k x 16x16",
        time_ms([&] { chm::kernels::affine_forward_serial(X.data(), n, in, W.data(), b.data(), out, Y.data()); }, 50),
        time_ms([&] { chm::kernels::affine_forward_omp(X.data(), n, in, W.data(), b.data(), out, Y.data()); }, 50));
    row("backprop_input 16k x 16x16",
        time_ms([&] { chm::kernels::backprop_input_serial(delta.data(), n, out, W.data(), in, dX.data()); }, 50),
        time_ms([&] { chm::kernels::backprop_input_omp(delta.data(), n, out, W.data(), in, dX.data()); }, 50));
    row("weight_grad 16k x 16x16",
        time_ms([&] { chm::kernels::weight_grad_serial(delta.data(), X.data(), n, out, in, dW.data()); }, 50),
        time_ms([&] { chm::kernels::weight_grad_omp(delta.data(), X.data(), n, out, in, dW.data()); }, 50));
    row("col_sum 16k x 16",
        time_ms([&] { chm::kernels::col_sum_serial(delta.data(), n, out, db.data()); }, 200),
        time_ms([&] { chm::kernels::col_sum_omp(delta.data(), n, out, db.data()); }, 200));

    std::vector<double> series(n), prefix(n + 1, 0.0), sm(n);
    for (auto& v : series) v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series[i];
    row("windowed_mean 16k w=481",
        time_ms([&] { chm::kernels::windowed_mean_serial(prefix.data(), n, 240, sm.data()); }, 200),
        time_ms([&] { chm::kernels::windowed_mean_omp(prefix.data(), n, 240, sm.data()); }, 200));

    // end-to-end: random forest and MLP fits, 1 thread vs all
    const std::size_t fit_n = 8000;
    chm::Matrix F(fit_n, 2);
    std::vector<double> target(fit_n);
    for (std::size_t i = 0; i < fit_n; ++i) {
        F(i, 0) = rng.normal();
        F(i, 1) = rng.normal();
        target[i] = std::sin(F(i, 0)) + 0.5 * F(i, 1) + 0.1 * rng.normal();
    }
#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
    auto fit_with_threads = [&](const chm::learn::LearnerSpec& spec, int threads) {
        omp_set_num_threads(threads);
        auto m = chm::learn::fit(spec, F, target);
        omp_set_num_threads(max_threads);
        return m;
    };
    {
        auto spec = chm::learn::LearnerSpec::random_forest({}, 7);
        row("rf fit 8k x 2 (100 trees)",
            time_ms([&] { fit_with_threads(spec, 1); }, 3),
            time_ms([&] { fit_with_threads(spec, max_threads); }, 3));
    }
    {
        chm::learn::MlpConfig mcfg;
        mcfg.iterations = 200;
        auto spec = chm::learn::LearnerSpec::multilayer_perceptron(mcfg, 7);
        row("mlp fit 8k x 2 (200 it)",
            time_ms([&] { fit_with_threads(spec, 1); }, 3),
            time_ms([&] { fit_with_threads(spec, max_threads); }, 3));
    }
#endif
    return 0;
}
