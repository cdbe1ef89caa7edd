#ifndef PRB_TENSOR_HPP
#define PRB_TENSOR_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace prb::nn {

/**
 * Dense rank-1 or rank-2 tensor, row-major doubles. Rank 1 is used for
 * bias vectors; everything else is a matrix. Deliberately minimal: just
 * enough carrier for the model math and the parameter file format.
 */
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rank_(2), rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Tensor vec(std::vector<double> values) {
        Tensor t;
        t.rank_ = 1;
        t.rows_ = 1;
        t.cols_ = values.size();
        t.data_ = std::move(values);
        return t;
    }
    static Tensor vec(std::size_t n, double fill = 0.0) {
        return vec(std::vector<double>(n, fill));
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
        if (values.size() != rows * cols) throw std::invalid_argument("Tensor: size mismatch");
        Tensor t;
        t.rank_ = 2;
        t.rows_ = rows;
        t.cols_ = cols;
        t.data_ = std::move(values);
        return t;
    }
    static Tensor scalar(double v) { return matrix(1, 1, {v}); }

    int rank() const { return rank_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    /// Zero tensor with the same shape as this one.
    Tensor zeros_like() const {
        Tensor t = *this;
        for (double& v : t.data_) v = 0.0;
        return t;
    }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

private:
    int rank_ = 2;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace prb::nn

#endif // PRB_TENSOR_HPP
