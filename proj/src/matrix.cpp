#include "diresa/matrix.hpp"

namespace diresa {

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), source.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= source.rows()) throw DimensionError("row index out of range");
        auto src = source.row(indices[i]);
        auto dst = out.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

std::vector<double> column_means(const Matrix& m) {
    if (m.rows() == 0) throw DimensionError("column_means on empty matrix");
    std::vector<double> mean(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += r[j];
    }
    for (auto& v : mean) v /= static_cast<double>(m.rows());
    return mean;
}

std::vector<double> column_variances(const Matrix& m) {
    const auto mean = column_means(m);
    std::vector<double> var(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double d = r[j] - mean[j];
            var[j] += d * d;
        }
    }
    for (auto& v : var) v /= static_cast<double>(m.rows());
    return var;
}

} // namespace diresa
