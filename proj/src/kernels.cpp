#include "autolabel/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace autolabel::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Column tile of the output processed per task. Keeps a K x kBlockN panel of B
// resident in L2 while it is swept by every row of A.
constexpr std::size_t kBlockN = 512;

template <bool Par, typename T>
void matmul_nn_impl(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((n + kBlockN - 1) / kBlockN);
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for collapse(2) schedule(static) if (Par)
    for (std::ptrdiff_t jb = 0; jb < blocks; ++jb) {
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            const std::size_t j0 = static_cast<std::size_t>(jb) * kBlockN;
            const std::size_t j1 = std::min(n, j0 + kBlockN);
            T* crow = c + static_cast<std::size_t>(i) * n;
            const T* arow = a + static_cast<std::size_t>(i) * k;
            for (std::size_t j = j0; j < j1; ++j) crow[j] = T{0};
            for (std::size_t kk = 0; kk < k; ++kk) {
                const T av = arow[kk];
                const T* brow = b + kk * n;
                for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

template <bool Par, typename T>
void transpose_impl(const T* in, T* out, std::size_t rows, std::size_t cols) {
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (Par)
    for (std::ptrdiff_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(i) * cols + j] = in[j * rows + static_cast<std::size_t>(i)];
}

template <bool Par, typename T>
void matmul_nt_impl(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    std::vector<T> bt(n * k);
    transpose_impl<Par>(b, bt.data(), k, n);
    matmul_nn_impl<Par>(a, bt.data(), c, m, n, k);
}

template <bool Par, typename T>
void matmul_tn_impl(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    std::vector<T> at(m * k);
    transpose_impl<Par>(a, at.data(), m, k);
    matmul_nn_impl<Par>(at.data(), b, c, m, n, k);
}

template <bool Par, typename T>
void im2col_impl(const T* images, T* cols, std::size_t batch, const ConvGeometry& g) {
    const std::size_t kk = g.kernel;
    const std::size_t pad = g.pad();
    const std::size_t pixels = g.pixels();
    const std::size_t row_len = batch * pixels;
    const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(g.patch());
    const std::ptrdiff_t nb = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for collapse(2) schedule(static) if (Par)
    for (std::ptrdiff_t r = 0; r < rows; ++r) {
        for (std::ptrdiff_t bi = 0; bi < nb; ++bi) {
            const std::size_t ch = static_cast<std::size_t>(r) / (kk * kk);
            const std::size_t ky = (static_cast<std::size_t>(r) / kk) % kk;
            const std::size_t kx = static_cast<std::size_t>(r) % kk;
            const T* plane = images + (static_cast<std::size_t>(bi) * g.channels + ch) * pixels;
            T* dst = cols + static_cast<std::size_t>(r) * row_len + static_cast<std::size_t>(bi) * pixels;
            for (std::size_t y = 0; y < g.height; ++y) {
                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(pad);
                for (std::size_t x = 0; x < g.width; ++x) {
                    const std::ptrdiff_t sx =
                        static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(pad);
                    const bool inside = sy >= 0 && sx >= 0 && sy < static_cast<std::ptrdiff_t>(g.height) &&
                                        sx < static_cast<std::ptrdiff_t>(g.width);
                    dst[y * g.width + x] = inside ? plane[static_cast<std::size_t>(sy) * g.width +
                                                          static_cast<std::size_t>(sx)]
                                                  : T{0};
                }
            }
        }
    }
}

template <bool Par, typename T>
void col2im_impl(const T* cols, T* images, std::size_t batch, const ConvGeometry& g) {
    const std::size_t kk = g.kernel;
    const std::size_t pad = g.pad();
    const std::size_t pixels = g.pixels();
    const std::size_t row_len = batch * pixels;
    const std::ptrdiff_t nb = static_cast<std::ptrdiff_t>(batch);
    const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(g.channels);
#pragma omp parallel for collapse(2) schedule(static) if (Par)
    for (std::ptrdiff_t bi = 0; bi < nb; ++bi) {
        for (std::ptrdiff_t ch = 0; ch < nc; ++ch) {
            T* plane = images + (static_cast<std::size_t>(bi) * g.channels + static_cast<std::size_t>(ch)) * pixels;
            for (std::size_t i = 0; i < pixels; ++i) plane[i] = T{0};
            for (std::size_t ky = 0; ky < kk; ++ky) {
                for (std::size_t kx = 0; kx < kk; ++kx) {
                    const std::size_t r = (static_cast<std::size_t>(ch) * kk + ky) * kk + kx;
                    const T* src = cols + r * row_len + static_cast<std::size_t>(bi) * pixels;
                    for (std::size_t y = 0; y < g.height; ++y) {
                        const std::ptrdiff_t sy =
                            static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(pad);
                        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                        for (std::size_t x = 0; x < g.width; ++x) {
                            const std::ptrdiff_t sx =
                                static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(pad);
                            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(g.width)) continue;
                            plane[static_cast<std::size_t>(sy) * g.width + static_cast<std::size_t>(sx)] +=
                                src[y * g.width + x];
                        }
                    }
                }
            }
        }
    }
}

template <bool Par, typename T>
void maxpool2_forward_impl(const T* in, T* out, std::size_t* argmax, std::size_t planes, std::size_t h,
                           std::size_t w) {
    const std::size_t oh = h / 2;
    const std::size_t ow = w / 2;
    const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(planes);
#pragma omp parallel for schedule(static) if (Par)
    for (std::ptrdiff_t p = 0; p < np; ++p) {
        const std::size_t in_base = static_cast<std::size_t>(p) * h * w;
        const std::size_t out_base = static_cast<std::size_t>(p) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                std::size_t best = in_base + (2 * y) * w + 2 * x;
                const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
                for (std::size_t idx : cand)
                    if (in[idx] > in[best]) best = idx;
                out[out_base + y * ow + x] = in[best];
                argmax[out_base + y * ow + x] = best;
            }
        }
    }
}

template <bool Par, typename T>
void maxpool2_backward_impl(const T* grad_out, const std::size_t* argmax, T* grad_in, std::size_t planes,
                            std::size_t h, std::size_t w) {
    const std::size_t in_plane = h * w;
    const std::size_t out_plane = (h / 2) * (w / 2);
    const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(planes);
#pragma omp parallel for schedule(static) if (Par)
    for (std::ptrdiff_t p = 0; p < np; ++p) {
        T* gi = grad_in + static_cast<std::size_t>(p) * in_plane;
        for (std::size_t i = 0; i < in_plane; ++i) gi[i] = T{0};
        // Pooling windows do not overlap, so each input cell has at most one writer.
        const std::size_t ob = static_cast<std::size_t>(p) * out_plane;
        for (std::size_t o = 0; o < out_plane; ++o) grad_in[argmax[ob + o]] += grad_out[ob + o];
    }
}

} // namespace

void set_parallel(bool enabled) noexcept { g_parallel.store(enabled); }
bool parallel_enabled() noexcept { return g_parallel.load(); }

int max_threads() noexcept {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

#define AUTOLABEL_DEFINE_KERNELS(NS, PAR)                                                                     \
    namespace NS {                                                                                            \
    template <typename T>                                                                                     \
    void matmul_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {               \
        matmul_nn_impl<PAR>(a, b, c, m, n, k);                                                                \
    }                                                                                                         \
    template <typename T>                                                                                     \
    void matmul_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {               \
        matmul_nt_impl<PAR>(a, b, c, m, n, k);                                                                \
    }                                                                                                         \
    template <typename T>                                                                                     \
    void matmul_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {               \
        matmul_tn_impl<PAR>(a, b, c, m, n, k);                                                                \
    }                                                                                                         \
    template <typename T>                                                                                     \
    void transpose(const T* in, T* out, std::size_t rows, std::size_t cols) {                                 \
        transpose_impl<PAR>(in, out, rows, cols);                                                             \
    }                                                                                                         \
    template <typename T>                                                                                     \
    void im2col(const T* images, T* cols, std::size_t batch, const ConvGeometry& g) {                         \
        im2col_impl<PAR>(images, cols, batch, g);                                                             \
    }                                                                                                         \
    template <typename T>                                                                                     \
    void col2im(const T* cols, T* images, std::size_t batch, const ConvGeometry& g) {                         \
        col2im_impl<PAR>(cols, images, batch, g);                                                             \
    }                                                                                                         \
    template <typename T>                                                                                     \
    void maxpool2_forward(const T* in, T* out, std::size_t* argmax, std::size_t planes, std::size_t h,        \
                          std::size_t w) {                                                                    \
        maxpool2_forward_impl<PAR>(in, out, argmax, planes, h, w);                                            \
    }                                                                                                         \
    template <typename T>                                                                                     \
    void maxpool2_backward(const T* grad_out, const std::size_t* argmax, T* grad_in, std::size_t planes,      \
                           std::size_t h, std::size_t w) {                                                    \
        maxpool2_backward_impl<PAR>(grad_out, argmax, grad_in, planes, h, w);                                 \
    }                                                                                                         \
    }

AUTOLABEL_DEFINE_KERNELS(serial, false)
AUTOLABEL_DEFINE_KERNELS(parallel, true)

#undef AUTOLABEL_DEFINE_KERNELS

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    parallel_enabled() ? parallel::matmul_nn(a, b, c, m, n, k) : serial::matmul_nn(a, b, c, m, n, k);
}
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    parallel_enabled() ? parallel::matmul_nt(a, b, c, m, n, k) : serial::matmul_nt(a, b, c, m, n, k);
}
template <typename T>
void matmul_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
    parallel_enabled() ? parallel::matmul_tn(a, b, c, m, n, k) : serial::matmul_tn(a, b, c, m, n, k);
}
template <typename T>
void transpose(const T* in, T* out, std::size_t rows, std::size_t cols) {
    parallel_enabled() ? parallel::transpose(in, out, rows, cols) : serial::transpose(in, out, rows, cols);
}
template <typename T>
void im2col(const T* images, T* cols, std::size_t batch, const ConvGeometry& g) {
    parallel_enabled() ? parallel::im2col(images, cols, batch, g) : serial::im2col(images, cols, batch, g);
}
template <typename T>
void col2im(const T* cols, T* images, std::size_t batch, const ConvGeometry& g) {
    parallel_enabled() ? parallel::col2im(cols, images, batch, g) : serial::col2im(cols, images, batch, g);
}
template <typename T>
void maxpool2_forward(const T* in, T* out, std::size_t* argmax, std::size_t planes, std::size_t h,
                      std::size_t w) {
    parallel_enabled() ? parallel::maxpool2_forward(in, out, argmax, planes, h, w)
                       : serial::maxpool2_forward(in, out, argmax, planes, h, w);
}
template <typename T>
void maxpool2_backward(const T* grad_out, const std::size_t* argmax, T* grad_in, std::size_t planes,
                       std::size_t h, std::size_t w) {
    parallel_enabled() ? parallel::maxpool2_backward(grad_out, argmax, grad_in, planes, h, w)
                       : serial::maxpool2_backward(grad_out, argmax, grad_in, planes, h, w);
}

#define AUTOLABEL_INSTANTIATE(NS, T)                                                                          \
    template void NS::matmul_nn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);            \
    template void NS::matmul_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);            \
    template void NS::matmul_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t);            \
    template void NS::transpose<T>(const T*, T*, std::size_t, std::size_t);                                   \
    template void NS::im2col<T>(const T*, T*, std::size_t, const ConvGeometry&);                              \
    template void NS::col2im<T>(const T*, T*, std::size_t, const ConvGeometry&);                              \
    template void NS::maxpool2_forward<T>(const T*, T*, std::size_t*, std::size_t, std::size_t, std::size_t); \
    template void NS::maxpool2_backward<T>(const T*, const std::size_t*, T*, std::size_t, std::size_t,        \
                                           std::size_t);

AUTOLABEL_INSTANTIATE(serial, float)
AUTOLABEL_INSTANTIATE(serial, double)
AUTOLABEL_INSTANTIATE(parallel, float)
AUTOLABEL_INSTANTIATE(parallel, double)
AUTOLABEL_INSTANTIATE(kernels, float)
AUTOLABEL_INSTANTIATE(kernels, double)

#undef AUTOLABEL_INSTANTIATE

} // namespace autolabel::kernels
