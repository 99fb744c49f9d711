#include "sinklab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sinklab {

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) {
        if (d == 0) throw std::invalid_argument("tensor shape entries must be > 0");
        n *= d;
    }
    data_.assign(n, 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) {
        if (d == 0) throw std::invalid_argument("tensor shape entries must be > 0");
        n *= d;
    }
    if (n != data_.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str());
    }
}

std::size_t Tensor::rows() const {
    if (shape_.size() != 2) throw std::invalid_argument("rows(): tensor is not 2-D");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (shape_.size() != 2) throw std::invalid_argument("cols(): tensor is not 2-D");
    return shape_[1];
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: incompatible shapes " + a.shape_str() + " and " +
                                    b.shape_str());
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.at(i, p);
            for (std::size_t j = 0; j < n; ++j) {
                out.at(i, j) += av * b.at(p, j);
            }
        }
    }
    return out;
}

void softmax_inplace(std::span<double> row) {
    double mx = row[0];
    for (double v : row) {
        if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite input");
        mx = std::max(mx, v);
    }
    double sum = 0.0;
    for (double& v : row) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : row) v /= sum;
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() != 2) throw std::invalid_argument("softmax_rows: tensor is not 2-D");
    Tensor out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        softmax_inplace(std::span<double>(out.data()).subspan(i * out.cols(), out.cols()));
    }
    return out;
}

std::vector<double> rmsnorm(std::span<const double> x, std::span<const double> gain, double eps) {
    if (x.size() != gain.size()) throw std::invalid_argument("rmsnorm: gain size mismatch");
    if (x.empty()) throw std::invalid_argument("rmsnorm: empty input");
    if (eps <= 0.0) throw std::invalid_argument("rmsnorm: eps must be > 0");
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(x.size());
    const double r = 1.0 / std::sqrt(ms + eps);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = gain[i] * x[i] * r;
    return y;
}

namespace {

std::vector<double> rope_rotate(std::span<const double> v, std::int64_t position, double base,
                                double direction) {
    if (v.size() % 2 != 0) {
        throw std::invalid_argument("rope_apply: dimension must be even, got " +
                                    std::to_string(v.size()));
    }
    std::vector<double> out(v.size());
    const double d = static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size() / 2; ++i) {
        const double freq = std::pow(base, -2.0 * static_cast<double>(i) / d);
        const double angle = direction * static_cast<double>(position) * freq;
        const double c = std::cos(angle), s = std::sin(angle);
        const double a = v[2 * i], b = v[2 * i + 1];
        out[2 * i] = a * c - b * s;
        out[2 * i + 1] = a * s + b * c;
    }
    return out;
}

} // namespace

std::vector<double> rope_apply(std::span<const double> v, std::int64_t position, double base) {
    return rope_rotate(v, position, base, 1.0);
}

std::vector<double> rope_unapply(std::span<const double> v, std::int64_t position, double base) {
    return rope_rotate(v, position, base, -1.0);
}

double log_sum_exp(std::span<const double> v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - mx);
    return mx + std::log(sum);
}

double cross_entropy(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size()) {
        throw std::invalid_argument("cross_entropy: target " + std::to_string(target) +
                                    " out of range for vocab " + std::to_string(logits.size()));
    }
    return log_sum_exp(logits) - logits[target];
}

double cross_entropy_bits(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size()) {
        throw std::invalid_argument("cross_entropy_bits: target out of range");
    }
    double mx = logits[0];
    for (double x : logits) mx = std::max(mx, x);
    double sum = 0.0;
    for (double x : logits) sum += std::exp(x - mx);
    // (mx - x_t) is exact arithmetic; log2 keeps power-of-two sums exact.
    constexpr double inv_ln2 = 1.4426950408889634;
    return (mx - logits[target]) * inv_ln2 + std::log2(sum);
}

std::vector<double> cross_entropy_grad(std::span<const double> logits, std::size_t target) {
    if (target >= logits.size()) {
        throw std::invalid_argument("cross_entropy_grad: target out of range");
    }
    std::vector<double> g(logits.begin(), logits.end());
    softmax_inplace(g);
    g[target] -= 1.0;
    return g;
}

} // namespace sinklab
