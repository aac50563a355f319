#include "lcsae/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace lcsae {

namespace {

std::vector<double> unique_sorted(const std::vector<double>& v) {
    std::vector<double> u(v);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

// empirical quantile with linear interpolation on the sorted values
double quantile_linear(const std::vector<double>& sorted, double p) {
    const int m = static_cast<int>(sorted.size());
    double pos = p * (m - 1);
    int lo = static_cast<int>(std::floor(pos));
    int hi = std::min(lo + 1, m - 1);
    double frac = pos - lo;
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

Eigen::MatrixXd cubic_columns(const Eigen::VectorXd& ages, const Eigen::VectorXd& knots) {
    Eigen::MatrixXd Z(ages.size(), knots.size());
    for (Eigen::Index i = 0; i < ages.size(); ++i)
        for (Eigen::Index k = 0; k < knots.size(); ++k) {
            double d = std::abs(ages[i] - knots[k]);
            Z(i, k) = d * d * d;
        }
    return Z;
}

}  // namespace

int default_knot_count(int n_unique_ages) {
    return std::min(35, std::max(1, n_unique_ages / 4));
}

KnotSet select_knots(const std::vector<double>& ages, int K) {
    if (K < 1) throw BasisError("knot count must be positive");
    auto u = unique_sorted(ages);
    const int m = static_cast<int>(u.size());
    if (m < K + 1)
        throw BasisError("too few unique age values (" + std::to_string(m) + ") for K=" +
                         std::to_string(K) + " knots");
    KnotSet ks;
    ks.knots.resize(K);
    for (int k = 1; k <= K; ++k)
        ks.knots[k - 1] = quantile_linear(u, static_cast<double>(k) / (K + 1));
    for (int k = 1; k < K; ++k)
        if (!(ks.knots[k] > ks.knots[k - 1]))
            throw BasisError("quantile knots tie at position " + std::to_string(k));
    return ks;
}

Eigen::MatrixXd penalty_matrix(const KnotSet& knots) {
    const int K = knots.size();
    Eigen::MatrixXd omega(K, K);
    for (int l = 0; l < K; ++l)
        for (int k = 0; k < K; ++k) {
            double d = std::abs(knots.knots[l] - knots.knots[k]);
            omega(l, k) = d * d * d;
        }
    return omega;
}

RawDesign build_raw_design(const Eigen::VectorXd& ages, const KnotSet& knots) {
    if (ages.size() == 0) throw BasisError("empty age vector");
    const int K = knots.size();
    RawDesign raw;
    raw.ages = ages;
    raw.knots = knots;
    raw.Ztilde.resize(ages.size(), K + 2);
    raw.Ztilde.col(0).setOnes();
    raw.Ztilde.col(1) = ages;
    raw.Ztilde.rightCols(K) = cubic_columns(ages, knots.knots);
    raw.D = Eigen::MatrixXd::Zero(K + 2, K + 2);
    raw.D.bottomRightCorner(K, K) = penalty_matrix(knots);
    return raw;
}

Eigen::MatrixXd DRBasis::standardized_design(const Eigen::VectorXd& ages) const {
    const int K = n_knots();
    Eigen::VectorXd a = (ages.array() - age_center) / age_scale;
    Eigen::MatrixXd Z(ages.size(), K + 2);
    Z.col(0).setOnes();
    Z.col(1) = a;
    Z.rightCols(K) = cubic_columns(a, knots_std_());
    return Z;
}

Eigen::VectorXd DRBasis::knots_std_() const {
    return (knots.knots.array() - age_center) / age_scale;
}

Eigen::MatrixXd DRBasis::eval_rows_full(const Eigen::VectorXd& ages) const {
    return standardized_design(ages) * Rinv_U;
}

Eigen::MatrixXd DRBasis::eval_rows(const Eigen::VectorXd& ages) const {
    return eval_rows_full(ages).rightCols(n_knots());
}

Eigen::VectorXd DRBasis::spline_eval(double beta, const Eigen::VectorXd& w,
                                     const Eigen::VectorXd& ages) const {
    return beta * ages + eval_rows(ages) * w;
}

bool DRBasis::extrapolates(const Eigen::VectorXd& ages) const {
    return ages.minCoeff() < age_min || ages.maxCoeff() > age_max;
}

DRBasis demmler_reinsch(const RawDesign& raw) {
    const int K = raw.knots.size();
    const int p = K + 2;
    const Eigen::Index n = raw.ages.size();
    if (n < p) throw BasisError("fewer observations than basis columns");
    // a single knot gives an identically zero penalty, so the penalized
    // block would collapse into the unpenalized null space
    if (K < 2) throw BasisError("at least two knots are required");

    DRBasis b;
    b.knots = raw.knots;
    b.train_ages = raw.ages;
    b.age_center = raw.ages.mean();
    b.age_scale = std::sqrt((raw.ages.array() - b.age_center).square().mean());
    if (!(b.age_scale > 0)) throw BasisError("degenerate age vector (zero variance)");
    b.age_min = raw.ages.minCoeff();
    b.age_max = raw.ages.maxCoeff();

    Eigen::MatrixXd Z = b.standardized_design(raw.ages);
    Eigen::VectorXd knots_std = (raw.knots.knots.array() - b.age_center) / b.age_scale;
    KnotSet ks_std;
    ks_std.knots = knots_std;
    Eigen::MatrixXd omega_std = penalty_matrix(ks_std);

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
    Eigen::MatrixXd R =
        qr.matrixQR().topRows(p).template triangularView<Eigen::Upper>().toDenseMatrix();
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    double rmax = R.diagonal().cwiseAbs().maxCoeff();
    for (int j = 0; j < p; ++j) {
        if (std::abs(R(j, j)) <= 1e-12 * rmax)
            throw BasisError("rank-deficient design: fewer distinct ages than K+2");
        if (R(j, j) < 0) {
            R.row(j) = -R.row(j);
            Q.col(j) = -Q.col(j);
        }
    }

    Eigen::MatrixXd Rinv =
        R.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(p, p);
    D.bottomRightCorner(K, K) = omega_std;
    Eigen::MatrixXd M = Rinv.transpose() * D * Rinv;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullU);
    Eigen::VectorXd sv = svd.singularValues();  // descending
    Eigen::MatrixXd U(p, p);
    for (int j = 0; j < p; ++j) U.col(j) = svd.matrixU().col(p - 1 - j);
    Eigen::VectorXd s_tilde(p);
    for (int j = 0; j < p; ++j) s_tilde[j] = sv[p - 1 - j];  // ascending

    const double zero_thresh = 1e-10 * s_tilde[p - 1];
    int n_zero = 0;
    for (int j = 0; j < p; ++j)
        if (s_tilde[j] <= zero_thresh) ++n_zero;
    if (n_zero != 2)
        throw BasisError("expected exactly 2 near-zero eigenvalues, found " +
                         std::to_string(n_zero) + " (degenerate knot/age configuration)");

    Eigen::MatrixXd A = Q * U;

    // The two zero-eigenvalue columns span {1, age} but their rotation within
    // that plane is arbitrary; fix column 1 to the constant and column 2 to
    // the centered linear trend so the oscillation ordering is well defined.
    Eigen::VectorXd ones_unit = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
    Eigen::Vector2d c = A.leftCols(2).transpose() * ones_unit;
    c.normalize();
    Eigen::Matrix2d G;
    G << c[0], -c[1], c[1], c[0];
    A.leftCols(2) = A.leftCols(2) * G;
    U.leftCols(2) = U.leftCols(2) * G;
    if (A.col(1).dot(raw.ages) < 0) {
        A.col(1) = -A.col(1);
        U.col(1) = -U.col(1);
    }
    // deterministic sign for the penalized columns: positive at the oldest age
    Eigen::Index imax;
    raw.ages.maxCoeff(&imax);
    for (int j = 2; j < p; ++j) {
        if (A(imax, j) < 0) {
            A.col(j) = -A.col(j);
            U.col(j) = -U.col(j);
        }
    }

    b.Atilde = A;
    b.A = A.rightCols(K);
    b.s_tilde = s_tilde;
    b.s = s_tilde.tail(K);
    b.Rtilde = R;
    b.Utilde = U;
    b.Rinv_U = Rinv * U;
    return b;
}

CovarianceIdentityCheck check_covariance_identity(const DRBasis& basis) {
    const int K = basis.n_knots();
    CovarianceIdentityCheck out;
    KnotSet ks_std;
    ks_std.knots = (basis.knots.knots.array() - basis.age_center) / basis.age_scale;
    Eigen::MatrixXd omega = penalty_matrix(ks_std);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
    double max_ev = eig.eigenvalues().cwiseAbs().maxCoeff();
    out.omega_pd = eig.eigenvalues().minCoeff() > 1e-12 * max_ev;
    if (!out.omega_pd) return out;

    Eigen::MatrixXd U = basis.Utilde.bottomRightCorner(K, K);
    Eigen::MatrixXd R22 = basis.Rtilde.bottomRightCorner(K, K);
    Eigen::MatrixXd lhs =
        U.transpose() * R22 * omega.ldlt().solve(R22.transpose() * U) * basis.s.asDiagonal();
    out.max_abs_error = (lhs - Eigen::MatrixXd::Identity(K, K)).cwiseAbs().maxCoeff();
    return out;
}

Eigen::MatrixXd SplineDesign::rows(const Eigen::VectorXd& ages) const {
    Eigen::VectorXd a = (ages.array() - center) / scale;
    const int K = n_coeffs();
    Eigen::MatrixXd Zc = cubic_columns(a, knots_std);
    if (kind == SplineBasisKind::thin_plate) return Zc * map;
    Eigen::MatrixXd Z(ages.size(), K + 2);
    Z.col(0).setOnes();
    Z.col(1) = a;
    Z.rightCols(K) = Zc;
    return Z * map;
}

SplineDesign make_spline_design(const DRBasis& basis, SplineBasisKind kind) {
    SplineDesign d;
    d.kind = kind;
    d.center = basis.age_center;
    d.scale = basis.age_scale;
    d.knots_std = (basis.knots.knots.array() - basis.age_center) / basis.age_scale;
    const int K = basis.n_knots();
    if (kind == SplineBasisKind::demmler_reinsch) {
        d.X = basis.A;
        d.prior_weight = basis.s;
        d.map = basis.Rinv_U.rightCols(K);
    } else {
        KnotSet ks_std;
        ks_std.knots = d.knots_std;
        Eigen::MatrixXd omega = penalty_matrix(ks_std);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
        // |lambda|^{-1/2}: the thin-plate penalty is indefinite, so the
        // low-rank parameterization uses the absolute-value square root
        Eigen::VectorXd inv_sqrt = eig.eigenvalues().cwiseAbs().cwiseSqrt().cwiseInverse();
        d.map = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
        d.prior_weight = Eigen::VectorXd::Ones(K);
        d.X = d.rows(basis.train_ages);
    }
    return d;
}

}  // namespace lcsae
