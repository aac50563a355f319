#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace lcsae {

struct BasisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Strictly increasing knot locations in age units.
struct KnotSet {
    Eigen::VectorXd knots;
    int size() const { return static_cast<int>(knots.size()); }
};

/// Default knot count: one knot every 4 unique covariate values, capped at 35.
int default_knot_count(int n_unique_ages);

/// K knots at equally spaced quantiles (k/(K+1), k=1..K) of the unique sorted
/// age values, with linear interpolation. Throws if fewer than K+1 unique
/// values are available or the resulting knots tie.
KnotSet select_knots(const std::vector<double>& ages, int K);

/// Omega[l,k] = |kappa_l - kappa_k|^3.
Eigen::MatrixXd penalty_matrix(const KnotSet& knots);

/// Thin-plate design in raw age units: columns [1, age, |age-k_1|^3, ..., |age-k_K|^3]
/// and the block-diagonal penalty D = blockdiag(0_2x2, Omega).
struct RawDesign {
    Eigen::VectorXd ages;
    KnotSet knots;
    Eigen::MatrixXd Ztilde;  // n x (K+2)
    Eigen::MatrixXd D;       // (K+2) x (K+2)
};

RawDesign build_raw_design(const Eigen::VectorXd& ages, const KnotSet& knots);

/// Demmler-Reinsch orthonormalization of the thin-plate design.
///
/// Internally the age column is centered and scaled to unit standard
/// deviation (and the knots and cubic columns rebuilt on that scale) before
/// the triangular factorization; raw ages cubed produce Gram entries spanning
/// many orders of magnitude otherwise. The standardization is recorded and
/// undone at evaluation time.
///
/// The triangular factor R of the standardized design is computed by
/// Householder QR with the diagonal signs fixed positive, which equals the
/// Cholesky factor of Ztilde' Ztilde exactly but is numerically stable; the
/// orthonormal basis is then Atilde = Q * Utilde.
struct DRBasis {
    Eigen::MatrixXd A;        // n x K, last K columns of Atilde
    Eigen::MatrixXd Atilde;   // n x (K+2), orthonormal columns
    Eigen::VectorXd s;        // K positive eigenvalues, ascending
    Eigen::VectorXd s_tilde;  // K+2 values; first two are the structural zeros
    Eigen::MatrixXd Rtilde;   // (K+2) x (K+2) upper triangular, standardized scale
    Eigen::MatrixXd Utilde;   // (K+2) x (K+2) orthogonal
    Eigen::MatrixXd Rinv_U;   // Rtilde^-1 * Utilde (change of basis, standardized scale)
    KnotSet knots;             // raw age units
    Eigen::VectorXd train_ages;
    double age_center = 0.0;
    double age_scale = 1.0;
    double age_min = 0.0;
    double age_max = 0.0;

    int n_knots() const { return knots.size(); }

    /// Standardized design row block [1, a, |a-k|^3 ...] for arbitrary ages.
    Eigen::MatrixXd standardized_design(const Eigen::VectorXd& ages) const;
    /// Basis values at arbitrary ages: all K+2 columns.
    Eigen::MatrixXd eval_rows_full(const Eigen::VectorXd& ages) const;
    /// Basis values at arbitrary ages: the K penalized columns.
    Eigen::MatrixXd eval_rows(const Eigen::VectorXd& ages) const;
    /// f(age) = beta * age + sum_k w_k a_k(age).
    Eigen::VectorXd spline_eval(double beta, const Eigen::VectorXd& w,
                                const Eigen::VectorXd& ages) const;
    bool extrapolates(const Eigen::VectorXd& ages) const;

  private:
    Eigen::VectorXd knots_std_() const;
};

/// Throws BasisError on rank deficiency or if thresholding does not isolate
/// exactly two near-zero eigenvalues (relative threshold 1e-10).
DRBasis demmler_reinsch(const RawDesign& raw);

/// Verifies U' R22 Omega^-1 R22' U = diag(s)^-1 when the (standardized-scale)
/// penalty block is positive definite. The thin-plate penalty is only
/// conditionally positive definite, so the check is skipped (omega_pd false)
/// whenever Omega has a non-positive eigenvalue; the DR construction itself
/// never inverts Omega.
struct CovarianceIdentityCheck {
    bool omega_pd = false;
    double max_abs_error = 0.0;  // inf-norm of U'R22 Omega^-1 R22'U diag(s) - I
};
CovarianceIdentityCheck check_covariance_identity(const DRBasis& basis);

/// Basis handed to the sampler: training design X for the penalized
/// coefficients plus per-coefficient prior precision weights
/// (prior var = sigma_b^2 / weight_k).
enum class SplineBasisKind { demmler_reinsch, thin_plate };

struct SplineDesign {
    SplineBasisKind kind = SplineBasisKind::demmler_reinsch;
    Eigen::MatrixXd X;             // n x K
    Eigen::VectorXd prior_weight;  // K
    Eigen::VectorXd knots_std;
    double center = 0.0;
    double scale = 1.0;
    Eigen::MatrixXd map;  // DR: (K+2) x K; TP: K x K

    int n_coeffs() const { return static_cast<int>(prior_weight.size()); }
    /// Design rows at arbitrary raw ages.
    Eigen::MatrixXd rows(const Eigen::VectorXd& ages) const;
};

/// DR mode uses the orthonormal columns with weights s_k. Thin-plate mode
/// uses Zc * Omega^{-1/2} with unit weights (the low-rank thin-plate
/// parameterization), kept for the mixing comparison.
SplineDesign make_spline_design(const DRBasis& basis, SplineBasisKind kind);

}  // namespace lcsae
