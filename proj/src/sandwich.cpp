#include "rdlcqr/sandwich.hpp"

#include <cmath>
#include <functional>

#include "rdlcqr/errors.hpp"

namespace rdlcqr {

namespace {

// S from density values and generic "moments" s[j] (kernel moments or empirical sums).
Eigen::MatrixXd assemble_S(const Eigen::VectorXd& f, const std::function<double(int)>& s, int p) {
    const int q = static_cast<int>(f.size());
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(q + p, q + p);
    const double fsum = f.sum();
    for (int k = 0; k < q; ++k) {
        S(k, k) = f[k] * s(0);
        for (int j = 1; j <= p; ++j) {
            S(k, q + j - 1) = f[k] * s(j);
            S(q + j - 1, k) = f[k] * s(j);
        }
    }
    for (int j = 1; j <= p; ++j)
        for (int l = 1; l <= p; ++l) S(q + j - 1, q + l - 1) = fsum * s(j + l);
    return S;
}

// Score covariance from a pair matrix (rows: first equation's quantiles) and
// sums t(jr, jc) over the row equation's power jr and column equation's power jc.
Eigen::MatrixXd assemble_Sigma(const Eigen::MatrixXd& pair, const std::function<double(int, int)>& t, int p) {
    const int q = static_cast<int>(pair.rows());
    const int qc = static_cast<int>(pair.cols());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q + p, qc + p);
    const Eigen::VectorXd row_sum = pair.rowwise().sum();
    const Eigen::RowVectorXd col_sum = pair.colwise().sum();
    const double total = pair.sum();
    out.topLeftCorner(q, qc) = pair * t(0, 0);
    for (int j = 1; j <= p; ++j) {
        for (int k = 0; k < q; ++k) out(k, qc + j - 1) = row_sum[k] * t(0, j);
        for (int k = 0; k < qc; ++k) out(q + j - 1, k) = col_sum[k] * t(j, 0);
        for (int l = 1; l <= p; ++l) out(q + j - 1, qc + l - 1) = total * t(j, l);
    }
    return out;
}

void check_order(const KernelMoments& mom, int p) {
    if (p < 1 || p > 3) throw Error(ErrorCode::UnsupportedOrder, "sandwich order must be 1, 2 or 3");
    if (static_cast<int>(mom.mu.size()) < 2 * p + 1)
        throw Error(ErrorCode::UnsupportedOrder, "kernel moments too short for this order");
}

} // namespace

Eigen::MatrixXd guarded_inverse(const Eigen::MatrixXd& m) {
    if (!m.allFinite()) throw Error(ErrorCode::SingularS, "matrix has non-finite entries");
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    const double smax = sv[0];
    const double smin = sv[sv.size() - 1];
    if (!(smax > 0) || !(smin > 0) || smax / smin > kMaxCondition)
        throw Error(ErrorCode::SingularS, "matrix is singular or ill-conditioned (condition number beyond 1e12)");
    Eigen::MatrixXd inv = Eigen::FullPivLU<Eigen::MatrixXd>(m).inverse();
    return 0.5 * (inv + inv.transpose());
}

Eigen::MatrixXd build_S(const KernelMoments& mom, const Eigen::VectorXd& f, int p) {
    check_order(mom, p);
    return assemble_S(f, [&](int j) { return mom.mu[j]; }, p);
}

Eigen::MatrixXd build_Sigma(const KernelMoments& mom, const Eigen::MatrixXd& pair, int p) {
    check_order(mom, p);
    return assemble_Sigma(pair, [&](int a, int b) { return mom.nu[a + b]; }, p);
}

SandwichSet build_asymptotic(const KernelMoments& mom, const QuantileGrid& grid, int p) {
    SandwichSet set;
    set.mode = SandwichMode::asymptotic;
    set.q = grid.q;
    set.p = p;
    set.S = build_S(mom, grid.f_at_c, p);
    set.Sigma = build_Sigma(mom, grid.tau_pair, p);
    set.S_inv = guarded_inverse(set.S);
    return set;
}

Eigen::MatrixXd build_cross_asymptotic(const KernelMoments& mom, const Eigen::MatrixXd& phi, int p) {
    return build_Sigma(mom, phi, p);
}

SandwichSet build_fixed_n(const std::vector<double>& x, const QuantileGrid& grid, double h, const KernelSpec& kernel,
                          const std::vector<double>& sigma_i, int p) {
    if (p < 1 || p > 3) throw Error(ErrorCode::UnsupportedOrder, "sandwich order must be 1, 2 or 3");
    if (sigma_i.size() != x.size()) throw Error(ErrorCode::InvalidInput, "sigma_i must match x");
    const double n = double(x.size());
    std::vector<double> s(2 * p + 1, 0.0), t(2 * p + 1, 0.0);
    int n_eff = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = x[i] / h;
        const double k = eval_kernel(kernel, u);
        if (k <= 0) continue;
        ++n_eff;
        double pw = 1.0;
        for (int j = 0; j <= 2 * p; ++j) {
            s[j] += k * pw / sigma_i[i];
            t[j] += k * k * pw;
            pw *= u;
        }
    }
    if (n_eff < 1) throw Error(ErrorCode::InsufficientData, "no points with positive kernel weight");
    for (int j = 0; j <= 2 * p; ++j) {
        s[j] /= n * h;
        t[j] /= n * h;
    }
    SandwichSet set;
    set.mode = SandwichMode::fixed_n;
    set.q = grid.q;
    set.p = p;
    set.S = assemble_S(grid.f_at_c, [&](int j) { return s[j]; }, p);
    set.Sigma = assemble_Sigma(grid.tau_pair, [&](int a, int b) { return t[a + b]; }, p);
    set.S_inv = guarded_inverse(set.S);
    return set;
}

Eigen::MatrixXd build_cross_fixed_n(const std::vector<double>& x, const Eigen::MatrixXd& phi, double h_y, double h_t,
                                    const KernelSpec& kernel, int p) {
    const double scale = 1.0 / (double(x.size()) * std::sqrt(h_y * h_t));
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(p + 1, p + 1);
    for (double xi : x) {
        const double uy = xi / h_y;
        const double ut = xi / h_t;
        const double kk = eval_kernel(kernel, uy) * eval_kernel(kernel, ut);
        if (kk <= 0) continue;
        for (int a = 0; a <= p; ++a)
            for (int b = 0; b <= p; ++b) sums(a, b) += kk * std::pow(uy, a) * std::pow(ut, b);
    }
    sums *= scale;
    return assemble_Sigma(phi, [&](int a, int b) { return sums(a, b); }, p);
}

BoundaryConstants boundary_constants(const KernelMoments& mom) {
    const auto& mu = mom.mu;
    const auto& nu = mom.nu;
    if (mu.size() < 5) throw Error(ErrorCode::UnsupportedOrder, "boundary constants need moments to order 4");
    const double den = mu[0] * mu[2] - mu[1] * mu[1];
    BoundaryConstants c;
    c.a = (mu[2] * mu[2] - mu[1] * mu[3]) / den;
    c.a_check = (mu[2] * mu[3] - mu[1] * mu[4]) / den;
    c.a_tilde = (mu[2] * mu[2] - mu[1] * mu[4]) / den;
    c.b = (mu[2] * mu[2] * nu[0] - 2.0 * mu[1] * mu[2] * nu[1] + mu[1] * mu[1] * nu[2]) / (den * den);
    return c;
}

double intercept_average(const Eigen::MatrixXd& m, int q) {
    return m.topLeftCorner(q, q).sum() / double(q * q);
}

double intercept_curvature_cross(const Eigen::MatrixXd& m, int q) {
    return m.block(0, q + 1, q, 1).sum();
}

double curvature_entry(const Eigen::MatrixXd& m, int q) { return m(q + 1, q + 1); }

ScalarConstants constants(const SandwichSet& set, const KernelMoments& mom, const QuantileGrid& grid) {
    ScalarConstants out;
    out.kernel = boundary_constants(mom);
    const int q = set.q;
    const Eigen::MatrixXd m = set.middle();
    if (set.p == 1) out.b_Y = intercept_average(m, q);
    if (set.p >= 2) {
        out.b_star = curvature_entry(m, q);
        out.cross = intercept_curvature_cross(m, q);
    }
    if (set.p == 3) {
        if (mom.mu.size() < 8) throw Error(ErrorCode::UnsupportedOrder, "a* needs moments to order 7");
        const Eigen::MatrixXd& si = set.S_inv;
        double first = 0.0;
        for (int k = 0; k < q; ++k) first += si(q + 1, k) * grid.f_at_c[k];
        const Eigen::Vector3d tail(mom.mu[5], mom.mu[6], mom.mu[7]);
        const double second = grid.f_at_c.sum() * (si.block(q + 1, q, 1, 3) * tail)(0, 0);
        out.a_star = mom.mu[4] * first + second;
    }
    return out;
}

double b_YT(const SandwichSet& y_set, const Eigen::MatrixXd& sigma_yt, const SandwichSet& t_set) {
    const Eigen::MatrixXd m = y_set.S_inv * sigma_yt * t_set.S_inv;
    return intercept_average(m, y_set.q);
}

} // namespace rdlcqr
