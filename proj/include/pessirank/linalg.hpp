#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pessirank {

// Dense row-major matrix. Just enough linear algebra for the pseudoinverse
// regression baseline; not a general-purpose library.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
    }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

    Matrix transpose() const {
        Matrix t(cols, rows);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) t.at(j, i) = at(i, j);
        return t;
    }

    Matrix multiply(const Matrix& other) const {
        if (cols != other.rows) throw std::invalid_argument("Matrix: size mismatch");
        Matrix out(rows, other.cols);
        for (int i = 0; i < rows; ++i)
            for (int k = 0; k < cols; ++k) {
                const double v = at(i, k);
                if (v == 0.0) continue;
                for (int j = 0; j < other.cols; ++j) out.at(i, j) += v * other.at(k, j);
            }
        return out;
    }

    std::vector<double> multiply(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != cols)
            throw std::invalid_argument("Matrix: vector size mismatch");
        std::vector<double> out(static_cast<size_t>(rows), 0.0);
        for (int i = 0; i < rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols; ++j) s += at(i, j) * x[static_cast<size_t>(j)];
            out[static_cast<size_t>(i)] = s;
        }
        return out;
    }

    void validate_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) throw std::invalid_argument("Matrix: non-finite entry");
    }
};

// Moore-Penrose pseudoinverse via one-sided (Hestenes) Jacobi SVD. Singular
// values at or below tolerance * sigma_max are treated as zero. Matrices here
// are small and dense, so quadratic sweeps are fine.
inline Matrix pseudoinverse(const Matrix& m, double tolerance = 1e-10) {
    m.validate_finite();
    if (m.rows == 0 || m.cols == 0) return Matrix(m.cols, m.rows);
    if (m.rows < m.cols) return pseudoinverse(m.transpose(), tolerance).transpose();

    Matrix u = m;  // columns orthogonalized in place
    Matrix v = Matrix::identity(m.cols);
    const int n = m.cols;
    const int rows = m.rows;
    constexpr double kOrthEps = 1e-14;
    constexpr int kMaxSweeps = 60;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (int i = 0; i < rows; ++i) {
                    const double up = u.at(i, p), uq = u.at(i, q);
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if (gamma == 0.0 || std::fabs(gamma) <= kOrthEps * std::sqrt(alpha * beta))
                    continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t =
                    (zeta >= 0.0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < rows; ++i) {
                    const double up = u.at(i, p), uq = u.at(i, q);
                    u.at(i, p) = c * up - s * uq;
                    u.at(i, q) = s * up + c * uq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vp = v.at(i, p), vq = v.at(i, q);
                    v.at(i, p) = c * vp - s * vq;
                    v.at(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sigma(static_cast<size_t>(n), 0.0);
    double sigma_max = 0.0;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < rows; ++i) s += u.at(i, j) * u.at(i, j);
        sigma[static_cast<size_t>(j)] = std::sqrt(s);
        sigma_max = std::max(sigma_max, sigma[static_cast<size_t>(j)]);
    }
    const double cutoff = tolerance * sigma_max;

    // pinv = V diag(1/sigma) (U/sigma)^T, dropping near-zero singular values.
    Matrix pinv(n, rows);
    for (int k = 0; k < n; ++k) {
        const double s = sigma[static_cast<size_t>(k)];
        if (s <= cutoff || s == 0.0) continue;
        const double inv_s2 = 1.0 / (s * s);
        for (int j = 0; j < n; ++j) {
            const double vj = v.at(j, k) * inv_s2;
            if (vj == 0.0) continue;
            for (int i = 0; i < rows; ++i) pinv.at(j, i) += vj * u.at(i, k);
        }
    }
    return pinv;
}

}  // namespace pessirank
