#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hintsteer::testing {

namespace {

Eigen::MatrixXd Gram(const Eigen::MatrixXd& x, double gamma) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
  }
  return k;
}

// argmin |a - v| over {0 <= a <= upper, y'a = 0}: a(l) = clip(v - l y) and
// y'a(l) is non-increasing in l, so bisect for the root.
Eigen::VectorXd Project(const Eigen::VectorXd& v, const Eigen::VectorXd& y, const Eigen::VectorXd& upper) {
  auto at = [&](double l) {
    Eigen::VectorXd a = v - l * y;
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = std::clamp(a(i), 0.0, upper(i));
    return a;
  };
  double lo = -1.0;
  double hi = 1.0;
  while (y.dot(at(lo)) < 0.0) lo *= 2.0;
  while (y.dot(at(hi)) > 0.0) hi *= 2.0;
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (y.dot(at(mid)) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return at(0.5 * (lo + hi));
}

}  // namespace

double DualOracle::Decision(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double gamma,
                            const Eigen::VectorXd& point) const {
  double f = bias;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    f += alpha(i) * y(i) * std::exp(-gamma * (x.row(i).transpose() - point).squaredNorm());
  }
  return f;
}

DualOracle SolveDualByProjectedGradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& upper, double gamma) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd k = Gram(x, gamma);
  const Eigen::MatrixXd q = y.asDiagonal() * k * y.asDiagonal();
  const double lipschitz = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().maxCoeff();
  const double step = 1.0 / std::max(lipschitz, 1e-12);

  // Minimize h(a) = 1/2 a'Qa - sum a with FISTA and gradient-based restarts.
  auto h = [&](const Eigen::VectorXd& a) { return 0.5 * a.dot(q * a) - a.sum(); };
  Eigen::VectorXd a = Project(Eigen::VectorXd::Zero(n), y, upper);
  Eigen::VectorXd z = a;
  double t = 1.0;
  for (int it = 0; it < 200000; ++it) {
    const Eigen::VectorXd grad = q * z - Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd next = Project(z - step * grad, y, upper);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if ((z - next).dot(next - a) > 0.0) {
      z = next;
      t = 1.0;
    } else {
      z = next + ((t - 1.0) / t_next) * (next - a);
      t = t_next;
    }
    const double change = (next - a).lpNorm<Eigen::Infinity>();
    a = next;
    if (change < 1e-14 && it > 100) break;
  }

  DualOracle out;
  out.alpha = a;
  out.objective = -h(a);

  // Offset from the KKT conditions: r_i = y_i - sum_j a_j y_j K_ij equals the
  // offset for free vectors and bounds it for the others.
  const Eigen::VectorXd s = k * a.cwiseProduct(y);
  const double eps = 1e-9;
  double lower = -std::numeric_limits<double>::infinity();
  double upper_b = std::numeric_limits<double>::infinity();
  std::vector<double> free_r;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = y(i) - s(i);
    const bool at_zero = a(i) <= eps * upper(i);
    const bool at_upper = a(i) >= upper(i) * (1.0 - eps);
    if (!at_zero && !at_upper) {
      free_r.push_back(r);
    } else if ((at_zero && y(i) > 0) || (at_upper && y(i) < 0)) {
      lower = std::max(lower, r);
    } else {
      upper_b = std::min(upper_b, r);
    }
  }
  out.bias = free_r.empty() ? 0.5 * (lower + upper_b)
                            : std::accumulate(free_r.begin(), free_r.end(), 0.0) /
                                  static_cast<double>(free_r.size());
  return out;
}

CovariancePca PcaByCovariance(const Eigen::MatrixXd& x, Eigen::Index k) {
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index d = cov.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return eig.eigenvalues()(a) > eig.eigenvalues()(b); });
  CovariancePca out;
  out.components.resize(k, d);
  out.ratios.resize(k);
  const double trace = cov.trace();
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::VectorXd v = eig.eigenvectors().col(order[static_cast<std::size_t>(c)]);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.row(c) = v.transpose();
    out.ratios(c) = eig.eigenvalues()(order[static_cast<std::size_t>(c)]) / trace;
  }
  return out;
}

}  // namespace hintsteer::testing
