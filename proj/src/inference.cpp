#include "hbt/inference.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

namespace hbt {

namespace {

struct Problem {
  Eigen::VectorXd tau;
  Eigen::VectorXd counts;
  Eigen::VectorXd inv_w;
};

Problem select_bins(const Eigen::VectorXd& tau, const Eigen::VectorXd& counts, double exclude_center) {
  if (tau.size() != counts.size()) throw DomainError("fit_bunching: tau and counts differ in length");
  std::vector<Index> keep;
  for (Index i = 0; i < tau.size(); ++i)
    if (std::abs(tau[i]) >= exclude_center) keep.push_back(i);
  Problem p{Eigen::VectorXd(static_cast<Index>(keep.size())), Eigen::VectorXd(static_cast<Index>(keep.size())),
            Eigen::VectorXd(static_cast<Index>(keep.size()))};
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto i = static_cast<Index>(k);
    p.tau[i] = tau[keep[k]];
    p.counts[i] = counts[keep[k]];
    if (!(p.counts[i] >= 0.0) || !std::isfinite(p.counts[i])) throw DomainError("fit_bunching: counts must be finite and >= 0");
    p.inv_w[i] = 1.0 / std::max(p.counts[i], 1.0);
  }
  return p;
}

// theta = (a, b, log tau_c)
Eigen::VectorXd residuals(const Problem& p, const Eigen::Vector3d& theta) {
  const double tc = std::exp(theta[2]);
  return p.counts - p.tau.unaryExpr([&](double t) { return bunching_model(t, theta[0], theta[1], tc); });
}

double chi2(const Problem& p, const Eigen::VectorXd& r) { return r.cwiseAbs2().dot(p.inv_w); }

Eigen::MatrixXd jacobian(const Problem& p, const Eigen::Vector3d& theta) {
  const double tc = std::exp(theta[2]);
  Eigen::MatrixXd j(p.tau.size(), 3);
  for (Index i = 0; i < p.tau.size(); ++i) {
    const double x = 2.0 * std::abs(p.tau[i]) / tc;
    const double e = std::exp(-x);
    j(i, 0) = 1.0;
    j(i, 1) = e;
    j(i, 2) = theta[1] * e * x;  // d/d(log tau_c)
  }
  return j;
}

bool is_degenerate(const Eigen::Matrix3d& normal) {
  const Eigen::Vector3d d = normal.diagonal();
  if ((d.array() <= 0.0).any() || !d.allFinite()) return true;
  const Eigen::Vector3d s = d.cwiseSqrt().cwiseInverse();
  const Eigen::Matrix3d corr = s.asDiagonal() * normal * s.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(corr, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() < 1e-12;
}

}  // namespace

Eigen::VectorXd model_counts(const Eigen::VectorXd& tau, const BunchingParameters& p) {
  return tau.unaryExpr([&](double t) { return bunching_model(t, p.a, p.b, p.tau_c); });
}

BunchingParameters default_initial_guess(const Eigen::VectorXd& tau, const Eigen::VectorXd& counts) {
  const Index n = tau.size();
  if (n == 0) throw DomainError("default_initial_guess: no bins");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return std::abs(tau[i]) < std::abs(tau[j]); });

  const Index outer = std::max<Index>(1, n / 5);
  double a0 = 0.0;
  for (Index k = n - outer; k < n; ++k) a0 += counts[order[static_cast<std::size_t>(k)]];
  a0 /= static_cast<double>(outer);
  a0 = std::max(a0, 0.5);
  const double peak = counts.maxCoeff();
  const double b0 = std::max(peak - a0, a0 / 100.0);

  double tau_c0 = tau.cwiseAbs().maxCoeff() / 5.0;
  const double threshold = b0 / std::exp(1.0);
  for (Index k = 0; k < n; ++k) {
    const Index i = order[static_cast<std::size_t>(k)];
    if (counts[i] - a0 < threshold) {
      double spacing = 0.0;
      if (n > 1) spacing = std::abs(tau[order[1]] - tau[order[0]]);
      tau_c0 = 2.0 * std::max(std::abs(tau[i]), spacing);
      break;
    }
  }
  if (!(tau_c0 > 0.0)) tau_c0 = 1e-12;
  return {a0, b0, tau_c0};
}

FitResult fit_bunching(const Eigen::VectorXd& tau, const Eigen::VectorXd& counts, const FitOptions& opts) {
  const Problem p = select_bins(tau, counts, opts.exclude_center);
  const Index n = p.tau.size();
  if (n < 10) throw DomainError("fit_bunching: at least 10 bins are required");
  const double baseline = p.counts.dot(p.inv_w) / p.inv_w.sum();
  if (!(p.counts.sum() > 0.0)) throw DegenerateFitError("fit_bunching: histogram has no counts", baseline);
  if (p.counts.maxCoeff() == p.counts.minCoeff())
    throw DegenerateFitError("fit_bunching: flat histogram, bunching peak not identifiable", baseline);

  const BunchingParameters init = opts.initial_guess ? *opts.initial_guess : default_initial_guess(p.tau, p.counts);
  if (!(init.tau_c > 0.0)) throw DomainError("fit_bunching: initial tau_c must be positive");

  Eigen::Vector3d theta(init.a, init.b, std::log(init.tau_c));
  Eigen::VectorXd r = residuals(p, theta);
  double cost = chi2(p, r);
  double lambda = 1e-3;
  bool converged = false;
  int it = 0;
  std::ostringstream trace;

  for (; it < opts.max_iterations; ++it) {
    const Eigen::MatrixXd j = jacobian(p, theta);
    const Eigen::MatrixXd jw = j.transpose() * p.inv_w.asDiagonal();
    const Eigen::Matrix3d normal = jw * j;
    const Eigen::Vector3d grad = jw * r;
    Eigen::Matrix3d damped = normal;
    damped.diagonal() += lambda * normal.diagonal();
    const Eigen::Vector3d step = damped.ldlt().solve(grad);
    if (!step.allFinite()) break;

    const Eigen::Vector3d candidate = theta + step;
    const double rel = std::max({std::abs(step[0]) / std::max(std::abs(theta[0]), 1e-300),
                                 std::abs(step[1]) / std::max(std::abs(theta[1]), 1e-12 * std::abs(theta[0])),
                                 std::abs(step[2])});
    const Eigen::VectorXd r_new = residuals(p, candidate);
    const double cost_new = chi2(p, r_new);
    if (it >= opts.max_iterations - 5) {
      trace << " [it " << it << " chi2 " << cost << " lambda " << lambda << " rel " << rel << "]";
    }
    if (std::isfinite(cost_new) && cost_new < cost) {
      theta = candidate;
      r = r_new;
      cost = cost_new;
      lambda = std::max(lambda / 10.0, 1e-15);
      if (rel < opts.tolerance) {
        converged = true;
        ++it;
        break;
      }
    } else {
      // A rejected step that is already negligible means we sit at the optimum.
      if (rel < opts.tolerance) {
        converged = true;
        ++it;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e20) break;
    }
  }

  const Eigen::MatrixXd j = jacobian(p, theta);
  const Eigen::Matrix3d normal = j.transpose() * p.inv_w.asDiagonal() * j;
  if (is_degenerate(normal))
    throw DegenerateFitError("fit_bunching: singular normal matrix, bunching parameters not identifiable", baseline);
  if (!converged) {
    std::ostringstream msg;
    msg << "fit_bunching: no convergence after " << it << " iterations (a=" << theta[0] << ", b=" << theta[1]
        << ", tau_c=" << std::exp(theta[2]) << ", chi2=" << cost << ");" << trace.str();
    throw NonConvergenceError(msg.str());
  }

  FitResult fit;
  fit.a = theta[0];
  fit.b = theta[1];
  fit.tau_c = std::exp(theta[2]);
  fit.dof = static_cast<int>(n - 3);
  fit.chi2_reduced = cost / fit.dof;
  fit.iterations = it;
  fit.converged = true;
  const Eigen::Vector3d to_natural(1.0, 1.0, fit.tau_c);
  const Eigen::Matrix3d inv = normal.inverse();
  fit.covariance = fit.chi2_reduced * (to_natural.asDiagonal() * inv * to_natural.asDiagonal());
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose()).eval();
  std::tie(fit.g2_zero, fit.g2_zero_err) = g2_zero(fit);
  return fit;
}

FitResult fit_bunching(const CoincidenceHistogram& h, const FitOptions& opts) {
  return fit_bunching(h.centers(), h.counts_as_double(), opts);
}

std::pair<double, double> g2_zero(const FitResult& fit) {
  const double a = fit.a;
  const double b = fit.b;
  const Eigen::Vector2d grad(-b / (a * a), 1.0 / a);
  const double var = grad.dot(fit.covariance.topLeftCorner<2, 2>() * grad);
  return {1.0 + b / a, std::sqrt(std::max(var, 0.0))};
}

double chi2_reduced(const Eigen::VectorXd& tau, const Eigen::VectorXd& counts, const FitResult& fit,
                    double exclude_center) {
  const Problem p = select_bins(tau, counts, exclude_center);
  const Index dof = p.tau.size() - 3;
  if (dof < 1) throw DomainError("chi2_reduced: need at least one degree of freedom");
  const Eigen::Vector3d theta(fit.a, fit.b, std::log(fit.tau_c));
  return chi2(p, residuals(p, theta)) / static_cast<double>(dof);
}

double chi2_reduced(const CoincidenceHistogram& h, const FitResult& fit, double exclude_center) {
  return chi2_reduced(h.centers(), h.counts_as_double(), fit, exclude_center);
}

}  // namespace hbt
