#include "quantamp/linear_operator.hpp"

#include <stdexcept>

namespace quantamp {

DenseOperator::DenseOperator(std::size_t rows, std::size_t cols, std::vector<double> data, kernels::Exec exec)
    : rows_(rows), cols_(cols), data_(std::move(data)), exec_(exec) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("DenseOperator: empty dimensions");
    if (data_.size() != rows * cols) throw std::invalid_argument("DenseOperator: data size does not match dims");
    frob_ = kernels::dot(exec_, data_, data_);
}

void DenseOperator::forward(std::span<const double> x, std::span<double> out) const {
    if (x.size() != cols_ || out.size() != rows_) throw std::invalid_argument("DenseOperator::forward: size mismatch");
    kernels::gemv(exec_, data_, rows_, cols_, x, out);
}

void DenseOperator::adjoint(std::span<const double> s, std::span<double> out) const {
    if (s.size() != rows_ || out.size() != cols_) throw std::invalid_argument("DenseOperator::adjoint: size mismatch");
    kernels::gemv_t(exec_, data_, rows_, cols_, s, out);
}

}  // namespace quantamp
