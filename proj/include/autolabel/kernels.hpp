#pragma once

// Dense inner loops of the network engine.
//
// Every kernel exists twice: a serial reference in kernels::serial and an
// OpenMP version in kernels::parallel. Both compute each output element with
// the same loop order, so their results are bitwise identical for any thread
// count. kernels::* dispatches according to set_parallel().

#include <cstddef>

namespace autolabel::kernels {

void set_parallel(bool enabled) noexcept;
bool parallel_enabled() noexcept;
int max_threads() noexcept;

struct ConvGeometry {
    std::size_t channels;
    std::size_t height;
    std::size_t width;
    std::size_t kernel; // square kernel, stride 1, "same" zero padding
    std::size_t pad() const { return kernel / 2; }
    std::size_t patch() const { return channels * kernel * kernel; }
    std::size_t pixels() const { return height * width; }
};

#define AUTOLABEL_KERNEL_DECLS                                                                    \
    /* C[M x N] = A[M x K] * B[K x N] */                                                          \
    template <typename T>                                                                         \
    void matmul_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k);    \
    /* C[M x N] = A[M x K] * B[N x K]^T */                                                        \
    template <typename T>                                                                         \
    void matmul_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k);    \
    /* C[M x N] = A[K x M]^T * B[K x N] */                                                        \
    template <typename T>                                                                         \
    void matmul_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k);    \
    /* out[rows x cols] = in[cols x rows]^T */                                                    \
    template <typename T>                                                                         \
    void transpose(const T* in, T* out, std::size_t rows, std::size_t cols);                      \
    /* images [B x C x H x W] -> columns [C*k*k x B*H*W] */                                       \
    template <typename T>                                                                         \
    void im2col(const T* images, T* cols, std::size_t batch, const ConvGeometry& g);              \
    /* adjoint of im2col, overwrites images */                                                    \
    template <typename T>                                                                         \
    void col2im(const T* cols, T* images, std::size_t batch, const ConvGeometry& g);              \
    /* 2x2 stride-2 max pool over [planes x H x W]; argmax receives flat input indices */         \
    template <typename T>                                                                         \
    void maxpool2_forward(const T* in, T* out, std::size_t* argmax, std::size_t planes,           \
                          std::size_t h, std::size_t w);                                          \
    template <typename T>                                                                         \
    void maxpool2_backward(const T* grad_out, const std::size_t* argmax, T* grad_in,              \
                           std::size_t planes, std::size_t h, std::size_t w);

namespace serial {
AUTOLABEL_KERNEL_DECLS
} // namespace serial

namespace parallel {
AUTOLABEL_KERNEL_DECLS
} // namespace parallel

AUTOLABEL_KERNEL_DECLS

#undef AUTOLABEL_KERNEL_DECLS

} // namespace autolabel::kernels
