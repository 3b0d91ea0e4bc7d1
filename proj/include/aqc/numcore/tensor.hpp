#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace aqc::num {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major array of doubles. Every constructor rejects NaN and Inf
/// with a NumericError so that solver blowups surface at the first bad op.
class Tensor {
public:
    /// Empty tensor of shape {0}.
    Tensor();
    Tensor(Shape shape, std::vector<double> values);
    explicit Tensor(Shape shape, double fill = 0.0);

    static Tensor scalar(double v);
    static Tensor vector(std::initializer_list<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor zeros(std::size_t rows, std::size_t cols);
    static Tensor identity(std::size_t n);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    // Matrix view helpers; valid for rank-2 tensors.
    std::size_t rows() const;
    std::size_t cols() const;

    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }
    double& operator()(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    const std::vector<double>& data() const { return values_; }

    /// Value of a single-element tensor.
    double item() const;

    /// Throws NumericError if any entry is NaN or Inf.
    void check_finite(const char* context = "tensor") const;

    Tensor reshaped(Shape shape) const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double s);

    /// Shape equality plus bitwise equality of every value.
    friend bool operator==(const Tensor& a, const Tensor& b);

private:
    Shape shape_;
    std::vector<double> values_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

/// Plain (non-recorded) matrix product, used by modules that operate on
/// constant matrices.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

}  // namespace aqc::num
