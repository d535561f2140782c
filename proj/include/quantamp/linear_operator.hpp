#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "quantamp/kernels.hpp"

namespace quantamp {

class LinearOperator {
public:
    virtual ~LinearOperator() = default;
    virtual std::size_t rows() const = 0;
    virtual std::size_t cols() const = 0;
    virtual void forward(std::span<const double> x, std::span<double> out) const = 0;
    virtual void adjoint(std::span<const double> s, std::span<double> out) const = 0;
    virtual double frob_norm_sq() const = 0;
    virtual kernels::Exec exec() const { return kernels::Exec::parallel; }
};

// Row-major dense matrix.
class DenseOperator final : public LinearOperator {
public:
    DenseOperator(std::size_t rows, std::size_t cols, std::vector<double> data,
                  kernels::Exec exec = kernels::Exec::parallel);

    std::size_t rows() const override { return rows_; }
    std::size_t cols() const override { return cols_; }
    void forward(std::span<const double> x, std::span<double> out) const override;
    void adjoint(std::span<const double> s, std::span<double> out) const override;
    double frob_norm_sq() const override { return frob_; }
    kernels::Exec exec() const override { return exec_; }

    void set_exec(kernels::Exec e) { exec_ = e; }
    std::span<const double> data() const { return data_; }
    double at(std::size_t m, std::size_t n) const { return data_[m * cols_ + n]; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
    double frob_;
    kernels::Exec exec_;
};

}  // namespace quantamp
