#include "prime/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "prime/errors.hpp"
#include "prime/rng.hpp"

namespace prime {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) {
        if (d == 0) throw ShapeError("zero dimension in shape");
        n *= d;
    }
    if (shape_.empty()) n = 0;
    data_.assign(n, fill);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : Tensor(std::vector<std::size_t>{rows, cols}, fill) {}

Tensor Tensor::row(std::vector<double> values) {
    Tensor t;
    t.shape_ = {values.size()};
    t.data_ = std::move(values);
    return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols)
        throw ShapeError("matrix() given " + std::to_string(values.size()) + " values for " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    Tensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::move(values);
    return t;
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows() on rank-" + std::to_string(rank()) + " tensor");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols() on rank-" + std::to_string(rank()) + " tensor");
    return shape_[1];
}

double& Tensor::operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
double Tensor::operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::same_shape(const Tensor& other) const { return shape_ == other.shape_; }

std::string Tensor::shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape_[i]);
    }
    return s + ")";
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::check_finite(const std::string& context) const {
    if (!all_finite()) throw ShapeError("non-finite value in " + context);
}

Tensor Tensor::row_copy(std::size_t i) const {
    if (rank() != 2) throw ShapeError("row_copy() needs a rank-2 tensor");
    Tensor out;
    out.shape_ = {shape_[1]};
    out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(i * shape_[1]),
                     data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * shape_[1]));
    return out;
}

bool Tensor::bit_identical(const Tensor& other) const {
    if (shape_ != other.shape_) return false;
    if (data_.empty()) return true;
    return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0;
}

// ---- ops --------------------------------------------------------------------

static void require_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2) throw ShapeError(std::string(who) + ": rank-2 tensor required, got rank-" +
                                        std::to_string(t.rank()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + a.shape_str() + " x " + b.shape_str());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out(m, n, 0.0);
    const double* ap = a.data();
    const double* bp = b.data();
    double* op = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ap[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = bp + p * n;
            double* orow = op + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Tensor matmul_at_b(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_at_b");
    require_rank2(b, "matmul_at_b");
    if (a.rows() != b.rows())
        throw ShapeError("matmul_at_b: " + a.shape_str() + " x " + b.shape_str());
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    Tensor out(m, n, 0.0);
    const double* ap = a.data();
    const double* bp = b.data();
    double* op = out.data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = ap + p * m;
        const double* brow = bp + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double aip = arow[i];
            if (aip == 0.0) continue;
            double* orow = op + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    return out;
}

Tensor matmul_a_bt(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul_a_bt");
    require_rank2(b, "matmul_a_bt");
    if (a.cols() != b.cols())
        throw ShapeError("matmul_a_bt: " + a.shape_str() + " x " + b.shape_str());
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out(m, n, 0.0);
    const double* ap = a.data();
    const double* bp = b.data();
    double* op = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ap + i * k;
        double* orow = op + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = bp + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] = acc;
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    Tensor out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void add_row_inplace(Tensor& a, const Tensor& bias) {
    require_rank2(a, "add_row_inplace");
    if (bias.rank() != 1 || bias.size() != a.cols())
        throw ShapeError("add_row_inplace: bias " + bias.shape_str() + " vs " + a.shape_str());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) += bias[j];
}

Tensor col_sum(const Tensor& a) {
    require_rank2(a, "col_sum");
    Tensor out(std::vector<std::size_t>{a.cols()}, 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j);
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("add_inplace: " + a.shape_str() + " vs " + b.shape_str());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void axpy_inplace(Tensor& a, double alpha, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("axpy_inplace: " + a.shape_str() + " vs " + b.shape_str());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += alpha * b[i];
}

void scale_inplace(Tensor& a, double alpha) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= alpha;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("hadamard: " + a.shape_str() + " vs " + b.shape_str());
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

double dot_all(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("dot_all: " + a.shape_str() + " vs " + b.shape_str());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double sum_squares(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * a[i];
    return acc;
}

void glorot_init(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
}

}  // namespace prime
