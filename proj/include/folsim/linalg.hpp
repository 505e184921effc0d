#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace folsim {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec& axpy(Vec& y, double alpha, const Vec& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
    return y;
}

inline Vec scaled(const Vec& x, double alpha) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i];
    return y;
}

inline Vec sum(const Vec& a, const Vec& b) {
    Vec y(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
    return y;
}

inline Vec diff(const Vec& a, const Vec& b) {
    Vec y(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] - b[i];
    return y;
}

// Dense row-major matrix, sized once at construction.
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

    Vec apply(const Vec& x) const {
        Vec y(rows_, 0.0);
        for (int i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    Mat times(const Mat& rhs) const {
        Mat y(rows_, rhs.cols());
        for (int i = 0; i < rows_; ++i)
            for (int k = 0; k < cols_; ++k) {
                const double aik = (*this)(i, k);
                for (int j = 0; j < rhs.cols(); ++j) y(i, j) += aik * rhs(k, j);
            }
        return y;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

// In-place modified Gram-Schmidt on the columns of m. Returns the diagonal of
// the R factor (column norms after projection), all entries nonnegative.
inline Vec qr_orthonormalize(Mat& m) {
    const int n = m.cols();
    Vec rdiag(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double nrm = 0.0;
        for (int i = 0; i < m.rows(); ++i) nrm += m(i, j) * m(i, j);
        nrm = std::sqrt(nrm);
        rdiag[j] = nrm;
        if (nrm == 0.0) continue;
        for (int i = 0; i < m.rows(); ++i) m(i, j) /= nrm;
        for (int k = j + 1; k < n; ++k) {
            double proj = 0.0;
            for (int i = 0; i < m.rows(); ++i) proj += m(i, j) * m(i, k);
            for (int i = 0; i < m.rows(); ++i) m(i, k) -= proj * m(i, j);
        }
    }
    return rdiag;
}

}  // namespace folsim
