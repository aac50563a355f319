#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcsae/basis.hpp"
#include "lcsae/data.hpp"

namespace lcsae {

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Link { multinomial_logit, proportional_odds };

const char* link_label(Link link);
Link parse_link(const std::string& s);

/// theta[c][t] = probability simplex over the categories of item t given
/// latent class c+1 (0-based storage, 1-based class/category codes at the API).
struct ItemProbTable {
    std::vector<std::vector<Eigen::VectorXd>> theta;

    int n_classes() const { return static_cast<int>(theta.size()); }
    int n_items() const { return theta.empty() ? 0 : static_cast<int>(theta[0].size()); }
    void validate(double tol = 1e-12) const;
};

/// Covariate effects for one membership equation. In the multinomial-logit
/// variant there is one of these per non-reference class (alpha0 is the class
/// intercept); in the proportional-odds variant a single shared set is used
/// and the intercepts live in MembershipParams::cutpoints.
struct Effects {
    double alpha0 = 0.0;
    double alpha1 = 0.0;  // sex (male vs female)
    Eigen::Vector3d gamma = Eigen::Vector3d::Zero();
    double beta = 0.0;  // spline linear coefficient
    Eigen::VectorXd w;  // spline coefficients (K)
    Eigen::VectorXd v;  // district random intercepts (D)
};

struct MembershipParams {
    Link link = Link::proportional_odds;
    int n_classes = 1;
    bool use_marital = false;
    std::vector<double> cutpoints;  // proportional odds: C-1, strictly increasing
    std::vector<Effects> eq;        // logit: C-1 entries (classes 2..C); PO: 1 entry

    void validate() const;  // throws ModelError on non-monotone cutpoints / shape mismatch
};

struct VarianceComponents {
    std::vector<double> sigma_v;  // per equation
    std::vector<double> sigma_b;
    double upper_bound = 16.0;  // B

    void validate() const;  // 0 < sigma < B
};

/// Shared linear predictor of one equation, excluding the intercept/cutpoint:
/// alpha1*sex + gamma*marital + beta*age + spline_row'w + v_district.
double shared_predictor(const Effects& e, const CovariateVector& cov,
                        const Eigen::VectorXd& spline_row, int district, bool use_marital);

/// Class log-probabilities from precomputed predictors. Logit: eta has C-1
/// entries for classes 2..C (class 1 reference, predictor 0). Proportional
/// odds: successive differences of logistic CDF values at cutpoint_c + x.
Eigen::VectorXd log_class_probs_logit(const Eigen::VectorXd& eta);
Eigen::VectorXd log_class_probs_po(double x, std::span<const double> cutpoints);

double log_sigmoid(double x);
/// Single-class version of log_class_probs_po (1-based class).
double log_po_class(double x, std::span<const double> cutpoints, int latent_class);

Eigen::VectorXd log_membership_probs(const MembershipParams& params, const CovariateVector& cov,
                                     const Eigen::VectorXd& spline_row, int district);
Eigen::VectorXd membership_probs(const MembershipParams& params, const CovariateVector& cov,
                                 const Eigen::VectorXd& spline_row, int district);
/// Convenience overload computing the spline row from the design.
Eigen::VectorXd membership_probs(const MembershipParams& params, const CovariateVector& cov,
                                 const SplineDesign& design, int district);

/// log prod_t theta[c][t][pattern_t]; pattern codes are 1-based, class is 1-based.
double log_pattern_prob_given_class(const ItemProbTable& theta, std::span<const int> pattern,
                                    int latent_class);
double pattern_prob_given_class(const ItemProbTable& theta, std::span<const int> pattern,
                                int latent_class);

double marginal_pattern_prob(const ItemProbTable& theta, const MembershipParams& params,
                             const CovariateVector& cov, const Eigen::VectorXd& spline_row,
                             int district, std::span<const int> pattern);

/// Posterior class probabilities of one unit given its pattern (log-space,
/// max-subtracted). Throws ModelError naming the pattern if every class has
/// zero mass.
Eigen::VectorXd responsibilities(const ItemProbTable& theta, const MembershipParams& params,
                                 const CovariateVector& cov, const Eigen::VectorXd& spline_row,
                                 int district, std::span<const int> pattern);

/// D(Q) = -2 sum_ij log P(Y_ij | Q_ij). Summation in unit order for
/// bit-reproducibility. A zero-probability pattern under its assigned class
/// yields +inf and the offending unit indices in *offenders (if non-null).
double complete_data_deviance(const ItemResponseMatrix& data, std::span<const int> memberships,
                              const ItemProbTable& theta, std::vector<int>* offenders = nullptr);

}  // namespace lcsae
