#include "lcsae/model.hpp"

#include <cmath>
#include <limits>

namespace lcsae {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

// log(1/(1+exp(-x)))
double log_sigmoid(double x) {
    if (x >= 0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double log_po_class(double x, std::span<const double> cutpoints, int latent_class) {
    const int C = static_cast<int>(cutpoints.size()) + 1;
    if (C == 1) return 0.0;
    if (latent_class == 1) return log_sigmoid(cutpoints[0] + x);
    if (latent_class == C) return log_sigmoid(-(cutpoints[C - 2] + x));
    double a = cutpoints[latent_class - 1] + x;
    double b = cutpoints[latent_class - 2] + x;
    double gap = b - a;  // < 0 for monotone cutpoints
    if (!(gap < -1e-12)) return kNegInf;
    return log_sigmoid(a) + log_sigmoid(-b) + std::log1p(-std::exp(gap));
}

const char* link_label(Link link) {
    return link == Link::multinomial_logit ? "multinomial-logit" : "proportional-odds";
}

Link parse_link(const std::string& s) {
    if (s == "multinomial-logit" || s == "logit") return Link::multinomial_logit;
    if (s == "proportional-odds" || s == "ordinal") return Link::proportional_odds;
    throw ModelError("unknown link '" + s + "'");
}

void ItemProbTable::validate(double tol) const {
    for (std::size_t c = 0; c < theta.size(); ++c) {
        if (theta[c].size() != theta[0].size())
            throw ModelError("ragged item probability table");
        for (std::size_t t = 0; t < theta[c].size(); ++t) {
            const auto& p = theta[c][t];
            if (p.size() < 2) throw ModelError("item with fewer than 2 categories");
            if (p.minCoeff() < 0)
                throw ModelError("negative item probability at class " + std::to_string(c + 1) +
                                 ", item " + std::to_string(t + 1));
            if (std::abs(p.sum() - 1.0) > tol)
                throw ModelError("item probabilities do not sum to 1 at class " +
                                 std::to_string(c + 1) + ", item " + std::to_string(t + 1));
        }
    }
}

void MembershipParams::validate() const {
    if (n_classes < 1) throw ModelError("need at least one latent class");
    if (n_classes == 1) return;
    if (link == Link::proportional_odds) {
        if (static_cast<int>(cutpoints.size()) != n_classes - 1)
            throw ModelError("proportional odds needs C-1 cutpoints");
        for (std::size_t c = 1; c < cutpoints.size(); ++c)
            if (!(cutpoints[c] > cutpoints[c - 1]))
                throw ModelError("cutpoints must be strictly increasing");
        if (eq.size() != 1) throw ModelError("proportional odds uses one shared effect set");
    } else {
        if (static_cast<int>(eq.size()) != n_classes - 1)
            throw ModelError("multinomial logit needs C-1 effect sets");
    }
}

void VarianceComponents::validate() const {
    for (double s : sigma_v)
        if (!(s > 0 && s < upper_bound)) throw ModelError("sigma_v outside (0, B)");
    for (double s : sigma_b)
        if (!(s > 0 && s < upper_bound)) throw ModelError("sigma_b outside (0, B)");
}

double shared_predictor(const Effects& e, const CovariateVector& cov,
                        const Eigen::VectorXd& spline_row, int district, bool use_marital) {
    double x = e.alpha1 * cov.sex + e.beta * cov.age;
    if (use_marital)
        x += e.gamma[0] * cov.marital[0] + e.gamma[1] * cov.marital[1] + e.gamma[2] * cov.marital[2];
    if (spline_row.size() > 0) x += spline_row.dot(e.w);
    if (e.v.size() > 0) x += e.v[district - 1];
    return x;
}

Eigen::VectorXd log_class_probs_logit(const Eigen::VectorXd& eta) {
    const int C = static_cast<int>(eta.size()) + 1;
    double mx = 0.0;  // class 1 has predictor 0
    for (int c = 0; c < C - 1; ++c) mx = std::max(mx, eta[c]);
    double lse = std::exp(-mx);
    for (int c = 0; c < C - 1; ++c) lse += std::exp(eta[c] - mx);
    lse = mx + std::log(lse);
    Eigen::VectorXd lp(C);
    lp[0] = -lse;
    for (int c = 1; c < C; ++c) lp[c] = eta[c - 1] - lse;
    return lp;
}

Eigen::VectorXd log_class_probs_po(double x, std::span<const double> cutpoints) {
    const int C = static_cast<int>(cutpoints.size()) + 1;
    Eigen::VectorXd lp(C);
    if (C == 1) {
        lp[0] = 0.0;
        return lp;
    }
    // log(sigma(a) - sigma(b)) = log sigma(a) + log sigma(-b) + log(1 - e^{b-a})
    for (int c = 1; c <= C; ++c) lp[c - 1] = log_po_class(x, cutpoints, c);
    return lp;
}

Eigen::VectorXd log_membership_probs(const MembershipParams& params, const CovariateVector& cov,
                                     const Eigen::VectorXd& spline_row, int district) {
    params.validate();
    const int C = params.n_classes;
    if (C == 1) return Eigen::VectorXd::Zero(1);
    if (params.link == Link::proportional_odds) {
        double x = shared_predictor(params.eq[0], cov, spline_row, district, params.use_marital);
        return log_class_probs_po(x, params.cutpoints);
    }
    Eigen::VectorXd eta(C - 1);
    for (int c = 0; c < C - 1; ++c)
        eta[c] = params.eq[c].alpha0 +
                 shared_predictor(params.eq[c], cov, spline_row, district, params.use_marital);
    return log_class_probs_logit(eta);
}

Eigen::VectorXd membership_probs(const MembershipParams& params, const CovariateVector& cov,
                                 const Eigen::VectorXd& spline_row, int district) {
    return log_membership_probs(params, cov, spline_row, district).array().exp();
}

Eigen::VectorXd membership_probs(const MembershipParams& params, const CovariateVector& cov,
                                 const SplineDesign& design, int district) {
    Eigen::VectorXd age(1);
    age[0] = cov.age;
    Eigen::VectorXd row = design.rows(age).row(0);
    return membership_probs(params, cov, row, district);
}

double log_pattern_prob_given_class(const ItemProbTable& theta, std::span<const int> pattern,
                                    int latent_class) {
    const auto& cls = theta.theta.at(latent_class - 1);
    double lp = 0.0;
    for (std::size_t t = 0; t < pattern.size(); ++t) {
        double p = cls[t][pattern[t] - 1];
        lp += (p > 0) ? std::log(p) : kNegInf;
    }
    return lp;
}

double pattern_prob_given_class(const ItemProbTable& theta, std::span<const int> pattern,
                                int latent_class) {
    return std::exp(log_pattern_prob_given_class(theta, pattern, latent_class));
}

double marginal_pattern_prob(const ItemProbTable& theta, const MembershipParams& params,
                             const CovariateVector& cov, const Eigen::VectorXd& spline_row,
                             int district, std::span<const int> pattern) {
    const int C = params.n_classes;
    Eigen::VectorXd lm = log_membership_probs(params, cov, spline_row, district);
    double total = 0.0;
    for (int c = 1; c <= C; ++c)
        total += std::exp(lm[c - 1] + log_pattern_prob_given_class(theta, pattern, c));
    return total;
}

Eigen::VectorXd responsibilities(const ItemProbTable& theta, const MembershipParams& params,
                                 const CovariateVector& cov, const Eigen::VectorXd& spline_row,
                                 int district, std::span<const int> pattern) {
    const int C = params.n_classes;
    Eigen::VectorXd lw = log_membership_probs(params, cov, spline_row, district);
    for (int c = 1; c <= C; ++c) lw[c - 1] += log_pattern_prob_given_class(theta, pattern, c);
    double mx = lw.maxCoeff();
    if (!std::isfinite(mx)) {
        std::string pat;
        for (int h : pattern) pat += (pat.empty() ? "" : ",") + std::to_string(h);
        throw ModelError("pattern (" + pat + ") has zero mass under every class");
    }
    // scalar exp: the vectorized path maps -inf to a denormal instead of zero
    Eigen::VectorXd r(C);
    for (int c = 0; c < C; ++c) r[c] = std::exp(lw[c] - mx);
    return r / r.sum();
}

double complete_data_deviance(const ItemResponseMatrix& data, std::span<const int> memberships,
                              const ItemProbTable& theta, std::vector<int>* offenders) {
    double total = 0.0;
    bool infinite = false;
    for (std::size_t i = 0; i < data.units.size(); ++i) {
        double lp = log_pattern_prob_given_class(theta, data.units[i].responses, memberships[i]);
        if (lp == kNegInf) {
            infinite = true;
            if (offenders) offenders->push_back(static_cast<int>(i));
            continue;
        }
        total += lp;
    }
    if (infinite) return std::numeric_limits<double>::infinity();
    return -2.0 * total;
}

}  // namespace lcsae
