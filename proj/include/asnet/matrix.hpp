#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal dense numerical kernel. Everything is double precision and
// deterministic: identical inputs give bitwise identical outputs.

namespace asnet {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, length rows*cols

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> init) {
        Matrix m(init.size(), init.size() ? init.begin()->size() : 0);
        std::size_t i = 0;
        for (const auto& row : init) {
            if (row.size() != m.cols)
                throw std::invalid_argument("Matrix::from_rows: ragged rows");
            std::size_t j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool operator==(const Matrix& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

inline std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

// Counter-based deterministic RNG (splitmix64 over seed + counter).
// The (seed, counter) pair fully determines the output on every platform,
// so generation never depends on library distribution internals.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;

    explicit RngStream(std::uint64_t s = 0, std::uint64_t c = 0) : seed(s), counter(c) {}

    std::uint64_t next_u64() {
        std::uint64_t z = seed + (++counter) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // uniform in [0,n)
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(next_double() * static_cast<double>(n)) % n;
    }

    // uniform integer in [lo,hi] inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // derive an independent stream, e.g. one per image
    static RngStream derive(std::uint64_t seed, std::uint64_t key) {
        RngStream mix(seed ^ 0x5851F42D4C957F2DULL, key);
        return RngStream(mix.next_u64());
    }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: dimension mismatch " + shape_str(a) + " * " +
                                    shape_str(b));
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("add: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    Matrix out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

// y = x*w + b, with b a 1 x w.cols bias row broadcast over rows
inline Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
    Matrix out = matmul(x, w);
    if (b.rows != 1 || b.cols != out.cols)
        throw std::invalid_argument("linear: bias shape " + shape_str(b) + " does not match " +
                                    shape_str(out));
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += b(0, j);
    return out;
}

inline Matrix relu(Matrix m) {
    for (double& v : m.data) v = v > 0.0 ? v : 0.0;
    return m;
}

// numerically stable: never exponentiates a large positive argument
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + e^x) without overflow
inline double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

// row-wise softmax with max subtraction
inline Matrix softmax_rows(const Matrix& m) {
    if (m.rows == 0 || m.cols == 0) throw std::invalid_argument("softmax_rows: empty matrix");
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* in = m.row(i);
        double* o = out.row(i);
        double mx = in[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) o[j] /= sum;
    }
    return out;
}

// per row: (x - mean) / sqrt(var + eps), then elementwise gain/bias
inline Matrix layer_norm_rows(const Matrix& m, const Matrix& gain, const Matrix& bias,
                              double eps = 1e-5) {
    if (gain.cols != m.cols || bias.cols != m.cols || gain.rows != 1 || bias.rows != 1)
        throw std::invalid_argument("layer_norm_rows: gain/bias must be 1x" +
                                    std::to_string(m.cols));
    if (!(eps > 0.0)) throw std::invalid_argument("layer_norm_rows: eps must be > 0");
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* in = m.row(i);
        double* o = out.row(i);
        double mean = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) mean += in[j];
        mean /= static_cast<double>(m.cols);
        double var = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double d = in[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(m.cols);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < m.cols; ++j)
            o[j] = (in[j] - mean) * inv * gain(0, j) + bias(0, j);
    }
    return out;
}

// Projection weights of one attention block. All of wq..wo are d x d,
// biases are 1 x d rows.
struct AttentionWeights {
    Matrix wq, bq;
    Matrix wk, bk;
    Matrix wv, bv;
    Matrix wo, bo;
};

// Standard multi-head attention: project q/k/v, per head
// softmax(Q K^T / sqrt(d/heads)) V, concatenate heads, output-project.
// If attn_out is non-null it receives the head-averaged weight map
// (q.rows x k.rows).
inline Matrix multi_head_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                   const AttentionWeights& w, std::size_t heads,
                                   Matrix* attn_out = nullptr) {
    const std::size_t d = q.cols;
    if (k.cols != d || v.cols != d)
        throw std::invalid_argument("multi_head_attention: width mismatch q=" + shape_str(q) +
                                    " k=" + shape_str(k) + " v=" + shape_str(v));
    if (k.rows != v.rows)
        throw std::invalid_argument("multi_head_attention: key/value row mismatch");
    if (heads == 0 || d % heads != 0)
        throw std::invalid_argument("multi_head_attention: width " + std::to_string(d) +
                                    " not divisible by " + std::to_string(heads) + " heads");
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Matrix qp = linear(q, w.wq, w.bq);
    const Matrix kp = linear(k, w.wk, w.bk);
    const Matrix vp = linear(v, w.wv, w.bv);

    Matrix concat(q.rows, d);
    Matrix avg_attn;
    if (attn_out) avg_attn = Matrix(q.rows, k.rows);

    Matrix logits(q.rows, k.rows);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < q.rows; ++i) {
            const double* qr = qp.row(i) + off;
            for (std::size_t j = 0; j < k.rows; ++j) {
                const double* kr = kp.row(j) + off;
                double dot = 0.0;
                for (std::size_t t = 0; t < dh; ++t) dot += qr[t] * kr[t];
                logits(i, j) = dot * scale;
            }
        }
        const Matrix weights = softmax_rows(logits);
        if (attn_out)
            for (std::size_t i = 0; i < weights.data.size(); ++i)
                avg_attn.data[i] += weights.data[i] / static_cast<double>(heads);
        for (std::size_t i = 0; i < q.rows; ++i) {
            double* out = concat.row(i) + off;
            for (std::size_t j = 0; j < k.rows; ++j) {
                const double wij = weights(i, j);
                const double* vr = vp.row(j) + off;
                for (std::size_t t = 0; t < dh; ++t) out[t] += wij * vr[t];
            }
        }
    }
    if (attn_out) *attn_out = std::move(avg_attn);
    return linear(concat, w.wo, w.bo);
}

}  // namespace asnet
