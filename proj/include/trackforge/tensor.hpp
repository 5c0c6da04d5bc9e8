#pragma once

// Dense row-major real tensor plus the few linear-algebra helpers the
// propagation network needs. Values are checked finite at construction
// boundaries; the kernels themselves never produce NaN/Inf from finite input.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace trackforge {

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape)
        : shape_(std::move(shape)), values_(checked_size(shape_), 0.0) {}

    Tensor(std::vector<int> shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (values_.size() != checked_size(shape_))
            throw std::invalid_argument("Tensor: value count does not match shape");
        for (double v : values_)
            if (!std::isfinite(v))
                throw std::invalid_argument("Tensor: non-finite value");
    }

    const std::vector<int>& shape() const { return shape_; }
    size_t size() const { return values_.size(); }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& operator[](size_t i) { return values_[i]; }
    double operator[](size_t i) const { return values_[i]; }

    // 2D accessors (rows x cols).
    int rows() const { return shape_.at(0); }
    int cols() const { return shape_.at(1); }
    double& at2(int r, int c) { return values_[static_cast<size_t>(r) * cols() + c]; }
    double at2(int r, int c) const { return values_[static_cast<size_t>(r) * cols() + c]; }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    static size_t checked_size(const std::vector<int>& shape) {
        size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    std::vector<int> shape_;
    std::vector<double> values_;
};

// Deterministic RNG helpers. mt19937_64's output sequence is fully specified,
// and the transforms below avoid the implementation-defined std distributions
// so that seeded runs are byte-reproducible.
inline double rng_uniform(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;  // [0,1)
}

inline double rng_normal(std::mt19937_64& g) {
    // Box-Muller; discards the second variate to keep call sites stateless.
    double u1 = rng_uniform(g);
    double u2 = rng_uniform(g);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// FNV-1a over the name, mixed with the base seed; gives each named parameter
// an independent stream regardless of creation order.
inline uint64_t derive_seed(uint64_t base, const std::string& name) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h ^ (base * 0x9e3779b97f4a7c15ull);
}

// rows x cols matrix with i.i.d. N(0, 1/fan_in) entries.
inline Tensor random_matrix(int rows, int cols, uint64_t seed) {
    std::mt19937_64 g(seed);
    double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    Tensor m({rows, cols});
    for (size_t i = 0; i < m.size(); ++i) m[i] = rng_normal(g) * scale;
    return m;
}

// out[n, r] = sum_c x[n, c] * w[r, c]   (x: N x C, w: R x C)
inline Tensor matmul_t(const Tensor& x, const Tensor& w) {
    if (x.cols() != w.cols())
        throw std::invalid_argument("matmul_t: inner dimension mismatch");
    Tensor out({x.rows(), w.rows()});
    for (int n = 0; n < x.rows(); ++n)
        for (int r = 0; r < w.rows(); ++r) {
            double s = 0.0;
            for (int c = 0; c < x.cols(); ++c) s += x.at2(n, c) * w.at2(r, c);
            out.at2(n, r) = s;
        }
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument("add: shape mismatch");
    Tensor out = a;
    for (size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

// Bilinear resize of an (h x w x c) feature map to (new_h x new_w x c).
inline Tensor resize_bilinear(const Tensor& t, int h, int w, int c,
                              int new_h, int new_w) {
    if (static_cast<size_t>(h) * w * c != t.size())
        throw std::invalid_argument("resize_bilinear: shape mismatch");
    Tensor out({new_h, new_w, c});
    for (int y = 0; y < new_h; ++y) {
        double sy = (new_h == 1) ? 0.0
                                 : static_cast<double>(y) * (h - 1) / (new_h - 1);
        int y0 = static_cast<int>(sy);
        int y1 = std::min(y0 + 1, h - 1);
        double fy = sy - y0;
        for (int x = 0; x < new_w; ++x) {
            double sx = (new_w == 1) ? 0.0
                                     : static_cast<double>(x) * (w - 1) / (new_w - 1);
            int x0 = static_cast<int>(sx);
            int x1 = std::min(x0 + 1, w - 1);
            double fx = sx - x0;
            for (int k = 0; k < c; ++k) {
                auto v = [&](int yy, int xx) {
                    return t[(static_cast<size_t>(yy) * w + xx) * c + k];
                };
                double top = v(y0, x0) * (1 - fx) + v(y0, x1) * fx;
                double bot = v(y1, x0) * (1 - fx) + v(y1, x1) * fx;
                out[(static_cast<size_t>(y) * new_w + x) * c + k] =
                    top * (1 - fy) + bot * fy;
            }
        }
    }
    return out;
}

}  // namespace trackforge
