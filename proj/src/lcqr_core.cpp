#include "rdlcqr/lcqr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rdlcqr/errors.hpp"

namespace rdlcqr {

namespace {

double weighted_sd(const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    const double sw = w.sum();
    const double mean = w.dot(y) / sw;
    const double var = (w.array() * (y.array() - mean).square()).sum() / sw;
    return std::sqrt(std::max(var, 0.0));
}

// Smallest v with cumulative weight of values <= v at least tau * total.
double weighted_quantile(const Eigen::VectorXd& v, const Eigen::VectorXd& w, double tau) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    const double target = tau * w.sum();
    double acc = 0.0;
    for (int i : idx) {
        acc += w[i];
        if (acc >= target) return v[i];
    }
    return v[idx.back()];
}

Eigen::VectorXd taus(int q) {
    Eigen::VectorXd t(q);
    for (int k = 0; k < q; ++k) t[k] = double(k + 1) / double(q + 1);
    return t;
}

double smoothed_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& d, const Eigen::VectorXd& w,
                          const Eigen::VectorXd& a, const Eigen::VectorXd& beta, const Eigen::VectorXd& tau,
                          double eps) {
    const Eigen::VectorXd fit = d * beta;
    double total = 0.0;
    for (int k = 0; k < a.size(); ++k) {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double r = y[i] - a[k] - fit[i];
            total += w[i] * (check_loss(tau[k], r) - 0.5 * eps * std::log(eps + std::abs(r)));
        }
    }
    return total;
}

// Basis rows of the vertex through the q+m smallest independent residuals at
// (a, beta). Row (k, i) reads a_k + D_i beta = y_i.
bool greedy_basis(const Eigen::VectorXd& y, const Eigen::MatrixXd& d, const Eigen::VectorXd& a,
                  const Eigen::VectorXd& beta, Eigen::MatrixXd& rows, Eigen::VectorXd& rhs) {
    const int q = static_cast<int>(a.size());
    const int m = static_cast<int>(d.cols());
    const int dim = q + m;
    const Eigen::Index n = y.size();
    const Eigen::VectorXd fit = d * beta;

    std::vector<std::pair<double, Eigen::Index>> order;
    order.reserve(n * q);
    for (int k = 0; k < q; ++k)
        for (Eigen::Index i = 0; i < n; ++i)
            order.emplace_back(std::abs(y[i] - a[k] - fit[i]), k * n + i);
    std::sort(order.begin(), order.end());

    Eigen::MatrixXd basis(dim, dim);  // accepted rows, orthonormalized
    rows.resize(dim, dim);
    rhs.resize(dim);
    int count = 0;
    for (const auto& [res, key] : order) {
        if (count == dim) break;
        const int k = static_cast<int>(key / n);
        const Eigen::Index i = key % n;
        Eigen::VectorXd row = Eigen::VectorXd::Zero(dim);
        row[k] = 1.0;
        row.tail(m) = d.row(i).transpose();
        Eigen::VectorXd v = row;
        for (int c = 0; c < count; ++c) v -= basis.row(c).dot(v) * basis.row(c).transpose();
        const double norm = v.norm();
        if (norm <= 1e-9 * row.norm()) continue;
        basis.row(count) = (v / norm).transpose();
        rows.row(count) = row.transpose();
        rhs[count] = y[i];
        ++count;
    }
    return count == dim;
}

// Snaps the MM solution to an exact optimum of the linear program. The
// perturbed minimizer sits within O(eps) of an optimal vertex, so the start
// vertex is read off the smallest residuals; from there, simplex-style edge
// moves with exact line searches run until no edge of the current vertex
// lowers the objective.
bool polish_vertex(const Eigen::VectorXd& y, const Eigen::MatrixXd& d, const Eigen::VectorXd& w,
                   Eigen::VectorXd& a, Eigen::VectorXd& beta) {
    const int q = static_cast<int>(a.size());
    const int m = static_cast<int>(d.cols());
    const int dim = q + m;
    const Eigen::Index n = y.size();
    const Eigen::VectorXd tau = taus(q);
    const double scale = std::max(y.cwiseAbs().maxCoeff(), 1e-300);
    const double zero_tol = 1e-12 * scale;

    Eigen::VectorXd va = a, vb = beta;
    Eigen::MatrixXd rows;
    Eigen::VectorXd rhs;
    const int max_moves = 50 * dim + 100;
    int moves = 0;
    for (;; ++moves) {
        if (!greedy_basis(y, d, va, vb, rows, rhs)) return false;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(rows);
        if (!lu.isInvertible()) return false;
        const Eigen::VectorXd theta = lu.solve(rhs);
        if (!theta.allFinite()) return false;
        va = theta.head(q);
        vb = theta.tail(m);
        if (moves >= max_moves) break;

        const Eigen::MatrixXd inv = lu.inverse();
        const Eigen::VectorXd fit = d * vb;
        double best_slope = 0.0;
        Eigen::VectorXd best_dir;
        for (int j = 0; j < dim; ++j) {
            for (double sgn : {1.0, -1.0}) {
                const Eigen::VectorXd dir = sgn * inv.col(j);
                const Eigen::VectorXd gfit = d * dir.tail(m);
                double slope = 0.0;
                for (int k = 0; k < q; ++k)
                    for (Eigen::Index i = 0; i < n; ++i) {
                        const double r = y[i] - va[k] - fit[i];
                        const double g = dir[k] + gfit[i];
                        if (std::abs(r) <= zero_tol) slope += w[i] * check_loss(tau[k], -g);
                        else slope -= w[i] * g * (r > 0 ? tau[k] : tau[k] - 1.0);
                    }
                if (slope < best_slope) {
                    best_slope = slope;
                    best_dir = dir;
                }
            }
        }
        const double obj_scale = std::max(composite_objective(y, d, w, va, vb), 1e-300);
        if (!(best_slope < -1e-13 * obj_scale)) break;

        // Exact line search: walk the kinks until the slope turns nonnegative.
        const Eigen::VectorXd gfit = d * best_dir.tail(m);
        std::vector<std::pair<double, double>> kinks;  // (t, slope increase)
        for (int k = 0; k < q; ++k)
            for (Eigen::Index i = 0; i < n; ++i) {
                const double r = y[i] - va[k] - fit[i];
                const double g = best_dir[k] + gfit[i];
                if (std::abs(r) <= zero_tol || g == 0.0) continue;
                const double t = r / g;
                if (t > 0) kinks.emplace_back(t, w[i] * std::abs(g));
            }
        if (kinks.empty()) return false;
        std::sort(kinks.begin(), kinks.end());
        double slope = best_slope;
        double t_star = kinks.back().first;
        for (const auto& [t, inc] : kinks) {
            slope += inc;
            if (slope >= 0) {
                t_star = t;
                break;
            }
        }
        va += t_star * best_dir.head(q);
        vb += t_star * best_dir.tail(m);
    }
    if (composite_objective(y, d, w, va, vb) <= composite_objective(y, d, w, a, beta)) {
        a = va;
        beta = vb;
        return true;
    }
    return false;
}

} // namespace

double check_loss(double tau, double r) { return r >= 0 ? tau * r : (tau - 1.0) * r; }

double composite_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const Eigen::VectorXd& w,
                           const Eigen::VectorXd& intercepts, const Eigen::VectorXd& beta) {
    const int q = static_cast<int>(intercepts.size());
    const Eigen::VectorXd fit = design.cols() > 0 ? Eigen::VectorXd(design * beta)
                                                  : Eigen::VectorXd::Zero(y.size());
    double total = 0.0;
    for (int k = 0; k < q; ++k) {
        const double tau = double(k + 1) / double(q + 1);
        for (Eigen::Index i = 0; i < y.size(); ++i) total += w[i] * check_loss(tau, y[i] - intercepts[k] - fit[i]);
    }
    return total;
}

CompositeSolution solve_composite(const Eigen::VectorXd& y_all, const Eigen::MatrixXd& design_all,
                                  const Eigen::VectorXd& w_all, int q, const SolverOptions& opts) {
    if (q < 1) throw Error(ErrorCode::InvalidInput, "q must be at least 1");
    const int m = static_cast<int>(design_all.cols());

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < y_all.size(); ++i)
        if (w_all[i] > 0) keep.push_back(i);
    const Eigen::Index n = static_cast<Eigen::Index>(keep.size());
    if (n < q + m + 1)
        throw Error(ErrorCode::InsufficientData, "need at least q + p + 1 points with positive kernel weight, have " +
                                                     std::to_string(n));
    Eigen::VectorXd y(n), w(n);
    Eigen::MatrixXd d(n, m);
    for (Eigen::Index r = 0; r < n; ++r) {
        y[r] = y_all[keep[r]];
        w[r] = w_all[keep[r]];
        d.row(r) = design_all.row(keep[r]);
    }

    // Weighted least squares start on (1, D).
    Eigen::MatrixXd x1(n, m + 1);
    x1.col(0).setOnes();
    x1.rightCols(m) = d;
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd xw = sw.asDiagonal() * x1;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    if (qr.rank() < m + 1) throw Error(ErrorCode::InsufficientData, "design is rank deficient on the weighted points");
    const Eigen::VectorXd ls = qr.solve(Eigen::VectorXd(sw.asDiagonal() * y));

    const Eigen::VectorXd tau = taus(q);
    Eigen::VectorXd beta = ls.tail(m);
    Eigen::VectorXd a(q);
    bool exact_fit = false;
    {
        const Eigen::VectorXd res = y - x1 * ls;
        for (int k = 0; k < q; ++k) a[k] = ls[0] + weighted_quantile(res, w, tau[k]);
        exact_fit = res.cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, y.cwiseAbs().maxCoeff());
    }
    if (exact_fit) {
        // Interpolating data (e.g. a constant treatment indicator): the start is optimal.
        CompositeSolution sol;
        sol.intercepts = Eigen::VectorXd::Constant(q, ls[0]);
        sol.beta = beta;
        sol.objective = composite_objective(y, d, w, sol.intercepts, sol.beta);
        sol.trace.push_back(sol.objective);
        sol.converged = true;
        return sol;
    }

    const double scale = std::max(weighted_sd(y, w), 1e-300);
    const double eps = opts.eps_scale * scale;
    const double tol = opts.tol * scale;

    CompositeSolution sol;
    double f_cur = smoothed_objective(y, d, w, a, beta, tau, eps);
    if (opts.record_trace) sol.trace.push_back(f_cur);

    const int dim = q + m;
    Eigen::MatrixXd A(dim, dim);
    Eigen::VectorXd g(dim);
    Eigen::VectorXd fit = d * beta;
    // 2 tau_k - 1 enters the linear term of the quadratic majorizer.
    const Eigen::RowVectorXd lin = (2.0 * tau.array() - 1.0).matrix().transpose();
    Eigen::MatrixXd v(n, q);
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        // v_ik = w_i / (eps + |r_ik|)
        v = ((y - fit).replicate(1, q).rowwise() - a.transpose()).cwiseAbs();
        v = (v.array() + eps).inverse().colwise() * w.array();
        const Eigen::MatrixXd rhs = (v.array().colwise() * y.array()).matrix() + w * lin;
        const Eigen::VectorXd v_row = v.rowwise().sum();
        A.topLeftCorner(q, q) = v.colwise().sum().transpose().asDiagonal();
        if (m > 0) {
            A.topRightCorner(q, m) = v.transpose() * d;
            A.bottomLeftCorner(m, q) = A.topRightCorner(q, m).transpose();
            A.bottomRightCorner(m, m) = d.transpose() * v_row.asDiagonal() * d;
            g.tail(m) = d.transpose() * rhs.rowwise().sum();
        }
        g.head(q) = rhs.colwise().sum().transpose();
        const Eigen::VectorXd theta = A.ldlt().solve(g);
        if (!theta.allFinite()) break;
        const Eigen::VectorXd a_new = theta.head(q);
        const Eigen::VectorXd b_new = theta.tail(m);
        const double f_new = smoothed_objective(y, d, w, a_new, b_new, tau, eps);
        // MM guarantees descent in exact arithmetic; a rise means rounding has taken over.
        if (f_new > f_cur) {
            sol.converged = true;
            break;
        }
        const double change = std::max((a_new - a).cwiseAbs().maxCoeff(),
                                       m > 0 ? (b_new - beta).cwiseAbs().maxCoeff() : 0.0);
        a = a_new;
        beta = b_new;
        fit = d * beta;
        f_cur = f_new;
        if (opts.record_trace) sol.trace.push_back(f_cur);
        if (change < tol) {
            sol.converged = true;
            ++it;
            break;
        }
    }
    sol.iterations = it;
    if (opts.polish) sol.polished = polish_vertex(y, d, w, a, beta);
    sol.intercepts = a;
    sol.beta = beta;
    sol.objective = composite_objective(y, d, w, a, beta);
    return sol;
}

double LcqrFit::second_derivative() const {
    if (p < 2) throw Error(ErrorCode::InvalidInput, "second derivative needs p >= 2");
    return 2.0 * slopes[1];
}

double objective(const std::vector<double>& x, const std::vector<double>& y, double point,
                 const std::vector<double>& intercepts, const std::vector<double>& slopes, int q,
                 double bandwidth, const KernelSpec& kernel) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - point;
        const double wt = eval_kernel(kernel, dx / bandwidth);
        if (wt <= 0) continue;
        double poly = 0.0;
        double pw = 1.0;
        for (double b : slopes) {
            pw *= dx;
            poly += b * pw;
        }
        for (int k = 0; k < q; ++k)
            total += wt * check_loss(double(k + 1) / double(q + 1), y[i] - intercepts[k] - poly);
    }
    return total;
}

LcqrFit fit_boundary(const std::vector<double>& x, const std::vector<double>& y, double point, int q, int p,
                     double bandwidth, const KernelSpec& kernel, const SolverOptions& opts) {
    if (!(bandwidth > 0) || !std::isfinite(bandwidth))
        throw Error(ErrorCode::InvalidInput, "bandwidth must be positive");
    if (p < 1 || p > 3) throw Error(ErrorCode::UnsupportedOrder, "polynomial order must be 1, 2 or 3");
    if (x.size() != y.size()) throw Error(ErrorCode::InvalidInput, "x and y differ in length");

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (eval_kernel(kernel, (x[i] - point) / bandwidth) > 0) idx.push_back(i);
    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    if (n < q + p + 1)
        throw Error(ErrorCode::InsufficientData, "only " + std::to_string(n) +
                                                     " points with positive kernel weight; need q + p + 1");

    Eigen::VectorXd yy(n), w(n);
    Eigen::MatrixXd d(n, p);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double u = (x[idx[r]] - point) / bandwidth;
        yy[r] = y[idx[r]];
        w[r] = eval_kernel(kernel, u);
        double pw = 1.0;
        for (int j = 0; j < p; ++j) {
            pw *= u;
            d(r, j) = pw;
        }
    }
    const CompositeSolution sol = solve_composite(yy, d, w, q, opts);

    LcqrFit fit;
    fit.q = q;
    fit.p = p;
    fit.intercepts.assign(sol.intercepts.data(), sol.intercepts.data() + q);
    fit.slopes.resize(p);
    for (int j = 0; j < p; ++j) fit.slopes[j] = sol.beta[j] / std::pow(bandwidth, j + 1);
    fit.cond_mean = sol.intercepts.mean();
    fit.bandwidth = bandwidth;
    fit.n_effective = static_cast<int>(n);
    fit.objective_value = sol.objective;
    fit.iterations = sol.iterations;
    fit.converged = sol.converged;
    fit.polished = sol.polished;
    fit.trace = sol.trace;
    return fit;
}

CovariateFit fit_boundary_with_covariates(const RdSample& sample, int q, double bandwidth, const KernelSpec& kernel,
                                          const SolverOptions& opts) {
    sample.validate();
    if (!sample.z) throw Error(ErrorCode::InvalidInput, "covariate fit needs a covariate matrix");
    if (!(bandwidth > 0)) throw Error(ErrorCode::InvalidInput, "bandwidth must be positive");
    const Eigen::MatrixXd& z = *sample.z;

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < sample.size(); ++i)
        if (eval_kernel(kernel, (sample.x[i] - sample.cutoff) / bandwidth) > 0) idx.push_back(i);
    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());

    // Identically zero columns carry no information and are dropped.
    std::vector<Eigen::Index> zcols;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        bool all_zero = true;
        for (std::size_t i : idx) all_zero = all_zero && z(static_cast<Eigen::Index>(i), c) == 0.0;
        if (!all_zero) zcols.push_back(c);
    }
    const int dz = static_cast<int>(zcols.size());
    const int m = 3 + dz;
    if (n < q + m + 1) throw Error(ErrorCode::InsufficientData, "too few weighted points for the covariate fit");

    Eigen::VectorXd yy(n), w(n);
    Eigen::MatrixXd d(n, m);
    int n_above = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const std::size_t i = idx[r];
        const double u = (sample.x[i] - sample.cutoff) / bandwidth;
        const double treat = sample.x[i] >= sample.cutoff ? 1.0 : 0.0;
        n_above += treat > 0;
        yy[r] = sample.y[i];
        w[r] = eval_kernel(kernel, u);
        d(r, 0) = u;
        d(r, 1) = treat;
        d(r, 2) = treat * u;
        for (int c = 0; c < dz; ++c) d(r, 3 + c) = z(static_cast<Eigen::Index>(i), zcols[c]);
    }
    if (n_above == 0 || n_above == n) throw Error(ErrorCode::InsufficientData, "window must contain both sides");

    if (dz > 0) {
        Eigen::MatrixXd full(n, m + 1);
        full.col(0).setOnes();
        full.rightCols(m) = d;
        const Eigen::VectorXd sw = w.array().sqrt();
        const Eigen::MatrixXd fw = sw.asDiagonal() * full;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(fw);
        qr.setThreshold(1e-10);
        if (qr.rank() < m + 1)
            throw Error(ErrorCode::CollinearCovariates, "covariates are collinear with the regressors in the window");
        // A covariate that reproduces the outcome leaves nothing for the treatment term to explain.
        const Eigen::VectorXd yw = sw.asDiagonal() * yy;
        const Eigen::VectorXd res_full = yw - fw * qr.solve(yw);
        const Eigen::MatrixXd base = fw.leftCols(4);
        const Eigen::VectorXd res_base = yw - base * base.colPivHouseholderQr().solve(yw);
        if (res_full.norm() <= 1e-10 * yw.norm() && res_base.norm() > 1e-10 * yw.norm())
            throw Error(ErrorCode::CollinearCovariates, "covariates reproduce the outcome exactly");
    }

    const CompositeSolution sol = solve_composite(yy, d, w, q, opts);
    CovariateFit out;
    out.treatment_coef = sol.beta[1];
    out.covariate_coefs = Eigen::VectorXd::Zero(z.cols());
    for (int c = 0; c < dz; ++c) out.covariate_coefs[zcols[c]] = sol.beta[3 + c];
    out.n_effective = static_cast<int>(n);
    out.iterations = sol.iterations;
    out.converged = sol.converged;
    return out;
}

void RdSample::validate() const {
    const std::size_t n = x.size();
    if (n == 0) throw Error(ErrorCode::InvalidInput, "sample is empty");
    if (y.size() != n) throw Error(ErrorCode::InvalidInput, "x and y differ in length");
    if (t && t->size() != n) throw Error(ErrorCode::InvalidInput, "t differs in length");
    if (z && static_cast<std::size_t>(z->rows()) != n) throw Error(ErrorCode::InvalidInput, "z differs in length");
    if (!std::isfinite(cutoff)) throw Error(ErrorCode::InvalidInput, "cutoff is not finite");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw Error(ErrorCode::InvalidInput, "non-finite value in row " + std::to_string(i + 1));
        if (t && (*t)[i] != 0.0 && (*t)[i] != 1.0)
            throw Error(ErrorCode::InvalidInput, "treatment must be 0 or 1 (row " + std::to_string(i + 1) + ")");
    }
    if (z && !z->allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite covariate value");
}

SideData split_side(const RdSample& sample, Side side) {
    SideData s;
    s.side = side;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double xc = sample.x[i] - sample.cutoff;
        const bool above = xc >= 0;
        if (above != (side == Side::above)) continue;
        s.x.push_back(xc);
        s.y.push_back(sample.y[i]);
        if (sample.t) s.t.push_back((*sample.t)[i]);
    }
    return s;
}

} // namespace rdlcqr
