#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <vector>

namespace mtm::qp {

enum class QpStatus { optimal, infeasible, iteration_limit };

struct QpResult {
    QpStatus status = QpStatus::infeasible;
    Eigen::VectorXd x;
    int iterations = 0;
};

// Euclidean projection of `center` onto {x : A x >= b}, i.e.
//   minimize 1/2 ||x - center||^2  subject to  A x >= b,
// by the Goldfarb-Idnani dual active-set method with an identity Hessian.
// The method starts at the unconstrained optimum and only ever adds violated
// constraints, so infeasibility is detected exactly when a violated row is a
// nonnegative combination of the active ones.
//
// Rows of A should be normalized; `tol` is an absolute slack on A x - b.
inline auto project(const Eigen::VectorXd& center, const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol = 1e-11) -> QpResult
{
    const auto m = center.size();
    const auto rows = A.rows();
    QpResult out;
    out.x = center;
    if (rows == 0) {
        out.status = QpStatus::optimal;
        return out;
    }

    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, m);
    std::vector<Eigen::Index> active;
    std::vector<double> u;
    std::vector<bool> is_active(static_cast<std::size_t>(rows), false);
    Eigen::Index q = 0;
    Eigen::VectorXd& x = out.x;
    Eigen::VectorXd d(m), z(m), r(m);

    constexpr double inf = std::numeric_limits<double>::infinity();
    const int max_iter = static_cast<int>(20 * (rows + m) + 100);

    auto givens = [](double a, double bb, double& c, double& s) {
        const double h = std::hypot(a, bb);
        if (h == 0.0) {
            c = 1.0;
            s = 0.0;
        } else {
            c = a / h;
            s = bb / h;
        }
        return h;
    };

    auto drop = [&](Eigen::Index l) {
        for (Eigen::Index j = l; j < q - 1; ++j) R.col(j) = R.col(j + 1);
        R.col(q - 1).setZero();
        for (Eigen::Index j = l; j < q - 1; ++j) {
            double c, s;
            const double h = givens(R(j, j), R(j + 1, j), c, s);
            R(j, j) = h;
            R(j + 1, j) = 0.0;
            for (Eigen::Index k = j + 1; k < q - 1; ++k) {
                const double t1 = R(j, k), t2 = R(j + 1, k);
                R(j, k) = c * t1 + s * t2;
                R(j + 1, k) = -s * t1 + c * t2;
            }
            for (Eigen::Index k = 0; k < m; ++k) {
                const double t1 = J(k, j), t2 = J(k, j + 1);
                J(k, j) = c * t1 + s * t2;
                J(k, j + 1) = -s * t1 + c * t2;
            }
        }
        is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(l)])] = false;
        active.erase(active.begin() + l);
        u.erase(u.begin() + l);
        --q;
    };

    auto add = [&](Eigen::Index p) {
        for (Eigen::Index j = m - 1; j > q; --j) {
            double c, s;
            const double h = givens(d(j - 1), d(j), c, s);
            d(j - 1) = h;
            d(j) = 0.0;
            for (Eigen::Index k = 0; k < m; ++k) {
                const double t1 = J(k, j - 1), t2 = J(k, j);
                J(k, j - 1) = c * t1 + s * t2;
                J(k, j) = -s * t1 + c * t2;
            }
        }
        R.col(q).head(q + 1) = d.head(q + 1);
        active.push_back(p);
        is_active[static_cast<std::size_t>(p)] = true;
        ++q;
    };

    while (out.iterations < max_iter) {
        // Most violated inactive constraint.
        Eigen::Index p = -1;
        double worst = -tol;
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (is_active[static_cast<std::size_t>(i)]) continue;
            const double s = A.row(i).dot(x) - b(i);
            if (s < worst) {
                worst = s;
                p = i;
            }
        }
        if (p < 0) {
            out.status = QpStatus::optimal;
            return out;
        }

        const Eigen::VectorXd np = A.row(p).transpose();
        double u_plus = 0.0;
        while (true) {
            if (++out.iterations > max_iter) {
                out.status = QpStatus::iteration_limit;
                return out;
            }
            d = J.transpose() * np;
            z = J.rightCols(m - q) * d.tail(m - q);
            if (q > 0) {
                r.head(q) = R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));
            }

            double t1 = inf;
            Eigen::Index l = -1;
            for (Eigen::Index j = 0; j < q; ++j) {
                if (r(j) > 1e-14) {
                    const double ratio = u[static_cast<std::size_t>(j)] / r(j);
                    if (ratio < t1) {
                        t1 = ratio;
                        l = j;
                    }
                }
            }
            const double slack = np.dot(x) - b(p);
            const double zn = z.dot(np);
            const double t2 = (z.norm() > 1e-12 && zn > 1e-14) ? -slack / zn : inf;
            const double t = std::min(t1, t2);

            if (!std::isfinite(t)) {
                out.status = QpStatus::infeasible;
                return out;
            }
            if (!std::isfinite(t2)) {
                for (Eigen::Index j = 0; j < q; ++j) u[static_cast<std::size_t>(j)] -= t * r(j);
                u_plus += t;
                drop(l);
                continue;
            }
            x += t * z;
            for (Eigen::Index j = 0; j < q; ++j) u[static_cast<std::size_t>(j)] -= t * r(j);
            u_plus += t;
            if (t2 <= t1) {
                add(p);
                u.push_back(u_plus);
                break;
            }
            drop(l);
        }
    }
    out.status = QpStatus::iteration_limit;
    return out;
}

} // namespace mtm::qp
