#include "xmal/tensor.hpp"

#include <cmath>

#include "xmal/error.hpp"

namespace xmal {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
    }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ragged tensor literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::column(std::span<const double> values) {
    return Tensor(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::string Tensor::shape_string() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

double Tensor::item() const {
    if (rows_ != 1 || cols_ != 1) throw ShapeError("item() on non-scalar tensor " + shape_string());
    return data_[0];
}

void Tensor::fill(double v) {
    for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const noexcept {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul inner dimensions differ: " + a.shape_string() + " x " +
                         b.shape_string());
    }
    Tensor out(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* orow = out.data().data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a(i, p);
            const double* brow = b.data().data() + p * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Tensor gather_rows(const Tensor& src, std::span<const std::size_t> indices) {
    Tensor out(indices.size(), src.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= src.rows()) throw ShapeError("gather_rows index out of range");
        auto from = src.row(indices[r]);
        auto to = out.row(r);
        std::copy(from.begin(), from.end(), to.begin());
    }
    return out;
}

}  // namespace xmal
