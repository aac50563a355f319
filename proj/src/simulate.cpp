#include "lcsae/simulate.hpp"

#include <cmath>

namespace lcsae {

double SmoothSpec::eval(double u) const {
    switch (kind) {
        case SmoothKind::zero: return 0.0;
        case SmoothKind::linear: return scale * u;
        case SmoothKind::logistic: return scale * (1.0 / (1.0 + std::exp(-steepness * u)) - 0.5);
        case SmoothKind::quadratic: return scale * (u * u - 1.0 / 3.0);
    }
    return 0.0;
}

SmoothKind parse_smooth(const std::string& s) {
    if (s == "zero") return SmoothKind::zero;
    if (s == "linear") return SmoothKind::linear;
    if (s == "logistic") return SmoothKind::logistic;
    if (s == "quadratic") return SmoothKind::quadratic;
    throw SimulateError("unknown smooth '" + s + "'");
}

const char* smooth_label(SmoothKind k) {
    switch (k) {
        case SmoothKind::zero: return "zero";
        case SmoothKind::linear: return "linear";
        case SmoothKind::logistic: return "logistic";
        case SmoothKind::quadratic: return "quadratic";
    }
    return "?";
}

void TruthSpec::validate() const {
    schema.validate();
    theta.validate();
    if (theta.n_classes() != n_classes) throw SimulateError("theta class count mismatch");
    if (theta.n_items() != schema.item_count()) throw SimulateError("theta item count mismatch");
    if (n_classes < 1) throw SimulateError("need at least one class");
    if (n_districts < 1) throw SimulateError("need at least one district");
    if (age_max <= age_min) throw SimulateError("empty age range");
    if (n_units < 1) throw SimulateError("need at least one unit");
    if (!(base_cell_count > 0)) throw SimulateError("base cell count must be positive");
    const int ne = n_classes == 1 ? 0 : n_eq();
    if (n_classes > 1 && link == Link::proportional_odds) {
        if (static_cast<int>(cutpoints.size()) != n_classes - 1)
            throw SimulateError("need C-1 cutpoints");
        for (std::size_t c = 1; c < cutpoints.size(); ++c)
            if (!(cutpoints[c] > cutpoints[c - 1]))
                throw SimulateError("cutpoints must be increasing");
    }
    auto need = [&](std::size_t got, const char* what) {
        if (static_cast<int>(got) != ne)
            throw SimulateError(std::string(what) + ": expected one entry per equation");
    };
    need(alpha1.size(), "alpha1");
    need(smooth.size(), "smooth");
    need(v.size(), "district effects");
    if (link == Link::multinomial_logit && n_classes > 1) need(alpha0.size(), "alpha0");
    if (use_marital) need(gamma.size(), "gamma");
    for (const auto& vd : v)
        if (vd.size() != n_districts) throw SimulateError("district effect length mismatch");
}

double TruthSpec::predictor(int e, const CovariateVector& cov, int district) const {
    double x = alpha1[e] * cov.sex + smooth[e].eval(std_age(cov.age));
    if (use_marital)
        x += gamma[e][0] * cov.marital[0] + gamma[e][1] * cov.marital[1] +
             gamma[e][2] * cov.marital[2];
    x += v[e][district - 1];
    return x;
}

Eigen::VectorXd TruthSpec::class_probs(const CovariateVector& cov, int district) const {
    if (n_classes == 1) return Eigen::VectorXd::Ones(1);
    if (link == Link::proportional_odds) {
        double x = predictor(0, cov, district);
        return log_class_probs_po(x, cutpoints).array().exp();
    }
    Eigen::VectorXd eta(n_classes - 1);
    for (int e = 0; e < n_classes - 1; ++e) eta[e] = alpha0[e] + predictor(e, cov, district);
    return log_class_probs_logit(eta).array().exp();
}

SimulatedData simulate_dataset(const TruthSpec& truth, std::uint64_t seed) {
    truth.validate();
    Rng rng(seed);

    const std::vector<Marital> marital_levels =
        truth.use_marital
            ? std::vector<Marital>{Marital::single, Marital::married, Marital::separated,
                                   Marital::widow}
            : std::vector<Marital>{Marital::single};

    SimulatedData out;
    out.cells.n_districts = truth.n_districts;
    out.cells.age_classes = truth.age_classes;
    for (int d = 1; d <= truth.n_districts; ++d)
        for (int age = truth.age_min; age <= truth.age_max; ++age)
            for (int sex = 0; sex <= 1; ++sex)
                for (Marital mar : marital_levels) {
                    PopulationCell cell;
                    cell.age = age;
                    cell.sex = sex;
                    cell.marital = mar;
                    cell.district = d;
                    cell.small_area = small_area_of(d, age, truth.age_classes);
                    // mild deterministic-seeded variation across cells
                    cell.count = std::floor(truth.base_cell_count * (0.5 + rng.uniform()));
                    out.cells.cells.push_back(cell);
                }

    const int L = out.cells.n_cells();
    const int C = truth.n_classes;
    const int J = out.cells.n_areas();
    out.true_counts = Eigen::MatrixXd::Zero(J, C);
    std::vector<double> cell_weights(L);
    for (int l = 0; l < L; ++l) {
        const auto& cell = out.cells.cells[l];
        cell_weights[l] = cell.count;
        Eigen::VectorXd p = truth.class_probs(encode_covariates(cell), cell.district);
        out.true_counts.row(cell.small_area - 1) += cell.count * p.transpose();
    }

    out.responses.schema = truth.schema;
    out.responses.n_districts = truth.n_districts;
    out.responses.age_classes = truth.age_classes;
    const int T = truth.schema.item_count();
    std::vector<double> wts(C);
    for (int i = 0; i < truth.n_units; ++i) {
        int l = rng.discrete(cell_weights);
        const auto& cell = out.cells.cells[l];
        UnitRecord u;
        u.age = cell.age;
        u.sex = cell.sex;
        u.marital = cell.marital;
        u.district = cell.district;
        u.small_area = cell.small_area;
        Eigen::VectorXd p = truth.class_probs(encode_covariates(cell), cell.district);
        for (int c = 0; c < C; ++c) wts[c] = p[c];
        int cls = rng.discrete(wts);
        u.responses.resize(T);
        for (int t = 0; t < T; ++t) {
            const Eigen::VectorXd& tp = truth.theta.theta[cls][t];
            std::vector<double> tw(tp.data(), tp.data() + tp.size());
            u.responses[t] = rng.discrete(tw) + 1;
        }
        out.responses.units.push_back(std::move(u));
    }
    return out;
}

TruthSpec default_truth(int n_classes, const std::vector<int>& item_categories, int n_units,
                        SmoothKind smooth) {
    TruthSpec truth;
    truth.n_classes = n_classes;
    truth.n_units = n_units;
    for (std::size_t t = 0; t < item_categories.size(); ++t)
        truth.schema.items.push_back({"item" + std::to_string(t + 1), item_categories[t]});

    // classes separated in severity: class c puts mass (1 - c/C steps) toward
    // higher categories of every item
    truth.theta.theta.resize(n_classes);
    for (int c = 0; c < n_classes; ++c) {
        truth.theta.theta[c].resize(item_categories.size());
        for (std::size_t t = 0; t < item_categories.size(); ++t) {
            const int H = item_categories[t];
            Eigen::VectorXd p(H);
            double anchor = n_classes == 1 ? 0.0 : static_cast<double>(c) / (n_classes - 1);
            for (int h = 0; h < H; ++h) {
                double pos = H == 1 ? 0.0 : static_cast<double>(h) / (H - 1);
                p[h] = std::exp(-6.0 * (pos - anchor) * (pos - anchor));
            }
            p /= p.sum();
            truth.theta.theta[c][t] = p;
        }
    }

    const int ne = truth.n_eq();
    if (n_classes > 1) {
        for (int c = 1; c < n_classes; ++c)
            truth.cutpoints.push_back(1.5 * (c - 0.5 * n_classes));
        if (truth.link == Link::multinomial_logit) truth.alpha0.assign(ne, 0.0);
        truth.alpha1.assign(ne, -1.0);
        truth.smooth.assign(ne, SmoothSpec{smooth, 1.5, 6.0});
        for (int e = 0; e < ne; ++e) {
            Eigen::VectorXd vd(truth.n_districts);
            for (int d = 0; d < truth.n_districts; ++d)
                vd[d] = 0.4 * ((d % 2 == 0) ? 1.0 : -1.0) * (1.0 + d / 4.0) /
                        (1.0 + d / 8.0);
            vd.array() -= vd.mean();
            truth.smooth[e].kind = smooth;
            truth.v.push_back(vd);
        }
    }
    return truth;
}

}  // namespace lcsae
