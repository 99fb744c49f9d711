#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sinklab/numerics.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace sinklab;

namespace {

// Independent naive oracle: plain triple loop, accumulation order fixed by j.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
    Tensor out({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a.at(i, k) * b.at(k, j);
            out.at(i, j) = acc;
        }
    return out;
}

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

} // namespace

TEST_CASE("matmul identity and scalar") {
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    std::mt19937_64 rng(1);
    Tensor a = random_tensor({3, 3}, rng);
    Tensor prod = matmul(eye, a);
    for (std::size_t i = 0; i < 9; ++i) CHECK(prod.at(i) == doctest::Approx(a.at(i)).epsilon(0));

    Tensor x({1, 1}, {2.0});
    Tensor y({1, 1}, {3.0});
    CHECK(matmul(x, y).at(0, 0) == 6.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    std::mt19937_64 rng(42);
    Tensor a = random_tensor({7, 5}, rng);
    Tensor b = random_tensor({5, 4}, rng);
    Tensor got = matmul(a, b);
    Tensor want = matmul_oracle(a, b);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(std::abs(got.at(i) - want.at(i)) < 1e-12);
}

TEST_CASE("matmul random shape triples vs oracle") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> dim(1, 12);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
        Tensor a = random_tensor({m, k}, rng);
        Tensor b = random_tensor({k, n}, rng);
        Tensor got = matmul(a, b);
        Tensor want = matmul_oracle(a, b);
        for (std::size_t i = 0; i < got.size(); ++i) {
            double denom = std::max(1.0, std::abs(want.at(i)));
            CHECK(std::abs(got.at(i) - want.at(i)) / denom < 1e-10);
        }
    }
}

TEST_CASE("matmul rejects shape mismatch with both shapes reported") {
    Tensor a({2, 3});
    Tensor b({4, 2});
    try {
        matmul(a, b);
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("softmax basics") {
    Tensor x({1, 2}, {0.0, 0.0});
    Tensor sm = softmax_rows(x);
    CHECK(sm.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sm.at(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

    Tensor y({1, 2}, {0.0, std::log(3.0)});
    Tensor sy = softmax_rows(y);
    CHECK(std::abs(sy.at(0, 0) - 0.25) < 1e-12);
    CHECK(std::abs(sy.at(0, 1) - 0.75) < 1e-12);
}

TEST_CASE("softmax shift invariance and row sums") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x({4, 9});
        for (auto& v : x.data()) v = dist(rng);
        Tensor shifted = x;
        for (auto& v : shifted.data()) v += 1e3;
        Tensor a = softmax_rows(x);
        Tensor b = softmax_rows(shifted);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.at(i) - b.at(i)) < 1e-12);
        for (std::size_t r = 0; r < a.rows(); ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < a.cols(); ++c) {
                CHECK(a.at(r, c) >= 0.0);
                sum += a.at(r, c);
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("softmax rejects non-finite input") {
    Tensor x({1, 2}, {0.0, std::numeric_limits<double>::infinity()});
    CHECK_THROWS_AS(softmax_rows(x), std::invalid_argument);
}

TEST_CASE("rmsnorm constant, zero and formula oracle") {
    std::vector<double> ones(8, 1.0);
    std::vector<double> x(8, 3.5);
    auto y = rmsnorm(x, ones, 1e-12);
    for (double v : y) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

    std::vector<double> zero(8, 0.0);
    auto z = rmsnorm(zero, ones, 1e-6);
    for (double v : z) CHECK(v == 0.0);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> rx(16), rg(16);
    for (auto& v : rx) v = dist(rng);
    for (auto& v : rg) v = dist(rng);
    const double eps = 1e-6;
    auto got = rmsnorm(rx, rg, eps);
    double ms = 0.0;
    for (double v : rx) ms += v * v;
    ms /= 16.0;
    for (std::size_t i = 0; i < 16; ++i) {
        double want = rg[i] * rx[i] / std::sqrt(ms + eps);
        CHECK(std::abs(got[i] - want) < 1e-12);
    }
}

TEST_CASE("rope position zero is identity, norm preserved") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(16);
    for (auto& x : v) x = dist(rng);

    auto same = rope_apply(v, 0);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(same[i] == v[i]);

    for (std::int64_t pos : {1LL, 17LL, 999LL, 1000000LL}) {
        auto r = rope_apply(v, pos);
        double n0 = 0.0, n1 = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            n0 += v[i] * v[i];
            n1 += r[i] * r[i];
        }
        CHECK(std::abs(std::sqrt(n0) - std::sqrt(n1)) < 1e-12);
    }
}

TEST_CASE("rope relative-position property") {
    // dot(rope(q,m), rope(k,n)) depends only on m-n.
    std::mt19937_64 rng(9);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> posd(0, 500);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> q(8), k(8);
        for (auto& x : q) x = dist(rng);
        for (auto& x : k) x = dist(rng);
        std::int64_t m = posd(rng), n = posd(rng), s = posd(rng);
        auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
            double d = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
            return d;
        };
        double d0 = dot(rope_apply(q, m), rope_apply(k, n));
        double d1 = dot(rope_apply(q, m + s), rope_apply(k, n + s));
        CHECK(std::abs(d0 - d1) < 1e-9);
    }
}

TEST_CASE("rope rejects odd dimension") {
    std::vector<double> v(7, 1.0);
    CHECK_THROWS_AS(rope_apply(v, 3), std::invalid_argument);
}

TEST_CASE("rope_unapply inverts rope_apply") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(12);
    for (auto& x : v) x = dist(rng);
    auto back = rope_unapply(rope_apply(v, 1234), 1234);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) < 1e-12);
}

TEST_CASE("cross entropy uniform, one-hot, range check") {
    std::vector<double> zeros(256, 0.0);
    CHECK(std::abs(cross_entropy(zeros, 17) - std::log(256.0)) < 1e-12);
    CHECK(cross_entropy_bits(zeros, 17) == 8.0);

    std::vector<double> hot(32, 0.0);
    hot[5] = 50.0;
    CHECK(cross_entropy(hot, 5) < 1e-9);

    CHECK_THROWS_AS(cross_entropy(hot, 32), std::invalid_argument);
}

TEST_CASE("cross entropy gradient matches central finite differences") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> dist(0.0, 1.5);
    std::vector<double> logits(11);
    for (auto& v : logits) v = dist(rng);
    const std::size_t target = 4;
    auto grad = cross_entropy_grad(logits, target);
    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        auto plus = logits, minus = logits;
        plus[i] += h;
        minus[i] -= h;
        double fd = (cross_entropy(plus, target) - cross_entropy(minus, target)) / (2 * h);
        double rel = std::abs(grad[i] - fd) / std::max({1e-8, std::abs(grad[i]), std::abs(fd)});
        CHECK(rel < 1e-6);
    }
}

TEST_CASE("cross_entropy_bits agrees with nats version") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> dist(0.0, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> logits(40);
        for (auto& v : logits) v = dist(rng);
        double nats = cross_entropy(logits, 7);
        double bits = cross_entropy_bits(logits, 7);
        CHECK(std::abs(bits * std::log(2.0) - nats) < 1e-9);
    }
}
