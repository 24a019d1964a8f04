#include "splitwiper/tensor.hpp"

#include <cmath>

#include "splitwiper/errors.hpp"

namespace splitwiper {

Tensor::Tensor(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor Tensor::gather_rows(const std::vector<std::size_t>& row_ids) const {
    Tensor out(row_ids.size(), cols_);
    for (std::size_t i = 0; i < row_ids.size(); ++i) {
        if (row_ids[i] >= rows_) throw ShapeError("gather_rows: row out of range");
        for (std::size_t c = 0; c < cols_; ++c) out.at(i, c) = at(row_ids[i], c);
    }
    return out;
}

}  // namespace splitwiper
