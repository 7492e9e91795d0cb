#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <vector>

#include "autolabel/kernels.hpp"
#include "autolabel/rng.hpp"

using namespace autolabel;
namespace k = autolabel::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return v;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

} // namespace

TEST_CASE("matmul_nn matches a hand product") {
    const std::vector<double> a{1, 2, 3, 4, 5, 6};    // 2x3
    const std::vector<double> b{7, 8, 9, 10, 11, 12}; // 3x2
    std::vector<double> c(4);
    k::serial::matmul_nn(a.data(), b.data(), c.data(), 2, 2, 3);
    CHECK(c == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("transposed products agree with explicit transposes") {
    const std::size_t m = 5, n = 7, kk = 3;
    auto a = random_vec(m * kk, 1);
    auto b = random_vec(kk * n, 2);
    std::vector<float> bt(n * kk), at(kk * m), ref(m * n), c(m * n);
    k::serial::matmul_nn(a.data(), b.data(), ref.data(), m, n, kk);

    k::serial::transpose(b.data(), bt.data(), n, kk);
    k::serial::matmul_nt(a.data(), bt.data(), c.data(), m, n, kk);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-6));

    k::serial::transpose(a.data(), at.data(), kk, m);
    k::serial::matmul_tn(at.data(), b.data(), c.data(), m, n, kk);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-6));
}

TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const std::size_t m = 17 + seed * 13, n = 29 + seed * 7, kk = 11 + seed * 5;
        auto a = random_vec(m * kk, seed * 3 + 1);
        auto b = random_vec(kk * n, seed * 3 + 2);
        auto bt = random_vec(n * kk, seed * 3 + 3);
        auto at = random_vec(kk * m, seed * 3 + 4);
        std::vector<float> s(m * n), p(m * n);

        k::serial::matmul_nn(a.data(), b.data(), s.data(), m, n, kk);
        k::parallel::matmul_nn(a.data(), b.data(), p.data(), m, n, kk);
        CHECK(bitwise_equal(s, p));
        k::serial::matmul_nt(a.data(), bt.data(), s.data(), m, n, kk);
        k::parallel::matmul_nt(a.data(), bt.data(), p.data(), m, n, kk);
        CHECK(bitwise_equal(s, p));
        k::serial::matmul_tn(at.data(), b.data(), s.data(), m, n, kk);
        k::parallel::matmul_tn(at.data(), b.data(), p.data(), m, n, kk);
        CHECK(bitwise_equal(s, p));

        std::vector<float> ts(m * kk), tp(m * kk);
        k::serial::transpose(a.data(), ts.data(), m, kk);
        k::parallel::transpose(a.data(), tp.data(), m, kk);
        CHECK(bitwise_equal(ts, tp));
    }
}

TEST_CASE("im2col, col2im and max-pool: parallel equals serial") {
    const k::ConvGeometry g{3, 8, 6, 3};
    const std::size_t batch = 4;
    auto images = random_vec(batch * g.channels * g.pixels(), 9);
    std::vector<float> cs(g.patch() * batch * g.pixels()), cp(cs.size());
    k::serial::im2col(images.data(), cs.data(), batch, g);
    k::parallel::im2col(images.data(), cp.data(), batch, g);
    CHECK(bitwise_equal(cs, cp));

    std::vector<float> is(images.size()), ip(images.size());
    k::serial::col2im(cs.data(), is.data(), batch, g);
    k::parallel::col2im(cs.data(), ip.data(), batch, g);
    CHECK(bitwise_equal(is, ip));

    const std::size_t planes = batch * g.channels;
    std::vector<float> ps(planes * 4 * 3), pp(ps.size());
    std::vector<std::size_t> as(ps.size()), ap(ps.size());
    k::serial::maxpool2_forward(images.data(), ps.data(), as.data(), planes, g.height, g.width);
    k::parallel::maxpool2_forward(images.data(), pp.data(), ap.data(), planes, g.height, g.width);
    CHECK(bitwise_equal(ps, pp));
    CHECK(as == ap);

    auto grad = random_vec(ps.size(), 10);
    std::vector<float> gs(images.size()), gp(images.size());
    k::serial::maxpool2_backward(grad.data(), as.data(), gs.data(), planes, g.height, g.width);
    k::parallel::maxpool2_backward(grad.data(), as.data(), gp.data(), planes, g.height, g.width);
    CHECK(bitwise_equal(gs, gp));
}

TEST_CASE("im2col and col2im are adjoint") {
    // <im2col(x), c> == <x, col2im(c)>
    const k::ConvGeometry g{2, 5, 4, 3};
    const std::size_t batch = 2;
    std::vector<double> x(batch * g.channels * g.pixels()), cols(g.patch() * batch * g.pixels());
    Rng rng(3);
    for (auto& v : x) v = rng.uniform(-1, 1);
    std::vector<double> c(cols.size());
    for (auto& v : c) v = rng.uniform(-1, 1);
    k::serial::im2col(x.data(), cols.data(), batch, g);
    std::vector<double> back(x.size());
    k::serial::col2im(c.data(), back.data(), batch, g);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < c.size(); ++i) lhs += cols[i] * c[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("maxpool picks the window maximum") {
    const std::vector<double> in{1, 5, 2, 0,
                                 3, 4, 9, 8};
    std::vector<double> out(2);
    std::vector<std::size_t> arg(2);
    k::serial::maxpool2_forward(in.data(), out.data(), arg.data(), 1, 2, 4);
    CHECK(out == std::vector<double>{5, 9});
    CHECK(arg == std::vector<std::size_t>{1, 6});
}

TEST_CASE("dispatch follows set_parallel") {
    const bool before = k::parallel_enabled();
    k::set_parallel(false);
    CHECK_FALSE(k::parallel_enabled());
    k::set_parallel(true);
    CHECK(k::parallel_enabled());
    CHECK(k::max_threads() >= 1);
    k::set_parallel(before);
}
