#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace prime {

class Rng;

// Dense row-major tensor of 64-bit floats. Most of the pipeline works with
// rank-2 tensors (batch x features); rank-1 is used for biases.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);

    static Tensor row(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const;
    std::size_t cols() const;

    double& operator()(std::size_t i, std::size_t j);
    double operator()(std::size_t i, std::size_t j) const;
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    void fill(double v);
    bool same_shape(const Tensor& other) const;
    std::string shape_str() const;

    // Throws ShapeError with `context` in the message if any entry is NaN/Inf.
    void check_finite(const std::string& context) const;
    bool all_finite() const;

    // Copy of row i as a rank-1 tensor (rank-2 only).
    Tensor row_copy(std::size_t i) const;

    bool bit_identical(const Tensor& other) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// ---- matrix ops (rank-2 unless stated) -------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);        // a(m,k) * b(k,n)
Tensor matmul_at_b(const Tensor& a, const Tensor& b);   // a^T * b, a(k,m) b(k,n)
Tensor matmul_a_bt(const Tensor& a, const Tensor& b);   // a * b^T, a(m,k) b(n,k)
Tensor transpose(const Tensor& a);

void add_row_inplace(Tensor& a, const Tensor& bias);    // a(m,n) += bias(n) per row
Tensor col_sum(const Tensor& a);                        // (n)
void add_inplace(Tensor& a, const Tensor& b);
void axpy_inplace(Tensor& a, double alpha, const Tensor& b);  // a += alpha * b
void scale_inplace(Tensor& a, double alpha);
Tensor hadamard(const Tensor& a, const Tensor& b);

double dot_all(const Tensor& a, const Tensor& b);
double sum_squares(const Tensor& a);

// Glorot-uniform initialization in +/- sqrt(6 / (fan_in + fan_out)).
void glorot_init(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace prime
