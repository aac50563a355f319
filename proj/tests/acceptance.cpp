// Acceptance gate: one self-contained check per release criterion, each
// printing a single PASS/FAIL line. Run with a criterion number (1-11) to
// check one, or with no arguments to check all. Exit status is nonzero if
// any requested criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lcsae/chain_io.hpp"
#include "lcsae/inference.hpp"
#include "lcsae/model.hpp"
#include "lcsae/sampler.hpp"
#include "lcsae/simulate.hpp"

using namespace lcsae;
namespace fs = std::filesystem;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// shared machinery

struct Fitted {
    ItemResponseMatrix data;
    PopulationCellTable cells;
    Eigen::MatrixXd true_counts;
    SplineDesign design;
    ChainOutput chain;
};

SplineDesign design_for(const ItemResponseMatrix& data, int K, SplineBasisKind kind) {
    std::vector<double> ages;
    for (const auto& u : data.units) ages.push_back(u.age);
    KnotSet knots = select_knots(ages, K);
    Eigen::VectorXd av(data.n_units());
    for (int i = 0; i < data.n_units(); ++i) av[i] = data.units[i].age;
    return make_spline_design(demmler_reinsch(build_raw_design(av, knots)), kind);
}

Fitted fit_simulated(const TruthSpec& truth, std::uint64_t data_seed, std::uint64_t fit_seed,
                     const ModelSpec& spec, long iters, long burn, int thin,
                     SplineBasisKind kind = SplineBasisKind::demmler_reinsch) {
    Fitted f;
    SimulatedData sim = simulate_dataset(truth, data_seed);
    f.data = std::move(sim.responses);
    f.cells = std::move(sim.cells);
    f.true_counts = std::move(sim.true_counts);
    f.design = design_for(f.data, spec.n_knots, kind);
    SamplerConfig cfg;
    cfg.iterations = iters;
    cfg.burn_in = burn;
    cfg.thin = thin;
    GibbsSampler sampler(spec, f.data, f.design, PriorSpec{}, fit_seed);
    f.chain = sampler.run(cfg);
    return f;
}

int column_of(const ChainOutput& chain, const std::string& name) {
    for (std::size_t j = 0; j < chain.param_names.size(); ++j)
        if (chain.param_names[j] == name) return static_cast<int>(j);
    throw std::runtime_error("no parameter named " + name);
}

std::vector<double> column_draws(const ChainOutput& chain, const std::string& name) {
    Eigen::VectorXd col = chain.draws.col(column_of(chain, name));
    return {col.data(), col.data() + col.size()};
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// criterion 1: orthonormal basis construction on random instances

Result criterion1() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    double worst_orth = 0.0, worst_cov = 0.0;
    int pd_cases = 0;
    for (int rep = 0; rep < 100; ++rep) {
        int K = 2 + static_cast<int>(rng.uniform() * 19);
        int n = std::max(K + 3, 10) + static_cast<int>(rng.uniform() * (200 - K - 3));
        n = std::min(n, 200);
        std::vector<double> ages(n);
        for (double& a : ages) a = rng.uniform(51.0, 100.0);
        KnotSet knots = select_knots(ages, K);
        Eigen::VectorXd av = Eigen::Map<Eigen::VectorXd>(ages.data(), n);
        DRBasis basis = demmler_reinsch(build_raw_design(av, knots));

        double orth = (basis.Atilde.transpose() * basis.Atilde -
                       Eigen::MatrixXd::Identity(K + 2, K + 2))
                          .cwiseAbs()
                          .maxCoeff();
        worst_orth = std::max(worst_orth, orth);

        // exactly two structural near-zeros, all remaining eigenvalues positive
        double thresh = 1e-10 * basis.s_tilde.cwiseAbs().maxCoeff();
        int near_zero = 0;
        for (int k = 0; k < basis.s_tilde.size(); ++k)
            if (std::abs(basis.s_tilde[k]) <= thresh) ++near_zero;
        if (near_zero != 2) return {false, "instance with " + std::to_string(near_zero) +
                                               " near-zero eigenvalues"};
        if (basis.s.minCoeff() <= 0) return {false, "non-positive penalized eigenvalue"};

        CovarianceIdentityCheck cov = check_covariance_identity(basis);
        if (cov.omega_pd) {
            ++pd_cases;
            worst_cov = std::max(worst_cov, cov.max_abs_error);
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = worst_orth <= 1e-10 && worst_cov <= 1e-8 && secs < 10.0;
    return {pass, "max orthonormality error " + fmt(worst_orth) + ", covariance identity error " +
                      fmt(worst_cov) + " (" + std::to_string(pd_cases) +
                      " positive-definite penalties), " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// criterion 2: the two spline parameterizations agree under the basis map

Result criterion2() {
    Rng rng(1002);
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        int K = 2 + static_cast<int>(rng.uniform() * 15);
        int n = K + 10 + static_cast<int>(rng.uniform() * 100);
        std::vector<double> ages(n);
        for (double& a : ages) a = rng.uniform(51.0, 100.0);
        KnotSet knots = select_knots(ages, K);
        Eigen::VectorXd av = Eigen::Map<Eigen::VectorXd>(ages.data(), n);
        DRBasis basis = demmler_reinsch(build_raw_design(av, knots));

        Eigen::VectorXd u(K + 2);
        for (int k = 0; k < K + 2; ++k) u[k] = rng.normal();
        // orthonormal-basis evaluation vs the original basis with mapped
        // coefficients b = Rinv_U * u
        Eigen::VectorXd f_ortho = basis.Atilde * u;
        Eigen::VectorXd f_orig = basis.standardized_design(av) * (basis.Rinv_U * u);
        worst = std::max(worst, (f_ortho - f_orig).cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-8, "max evaluation difference " + fmt(worst) + " over 50 cases"};
}

// ---------------------------------------------------------------------------
// criterion 3: mixture likelihood sums to one; responsibilities match brute force

Result criterion3() {
    Rng rng(1003);
    const std::vector<int> cats = {2, 3, 3};
    const int C = 3;
    double worst_sum = 0.0, worst_resp = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        ItemProbTable theta;
        theta.theta.resize(C);
        for (int c = 0; c < C; ++c) {
            theta.theta[c].resize(cats.size());
            for (std::size_t t = 0; t < cats.size(); ++t) {
                std::vector<double> conc(cats[t], 1.0);
                auto p = rng.dirichlet(conc);
                theta.theta[c][t] = Eigen::Map<Eigen::VectorXd>(p.data(), p.size());
            }
        }
        MembershipParams params;
        params.link = Link::proportional_odds;
        params.n_classes = C;
        params.cutpoints = {rng.normal(-1, 0.5), rng.normal(1, 0.5)};
        if (params.cutpoints[1] <= params.cutpoints[0])
            std::swap(params.cutpoints[0], params.cutpoints[1]);
        params.eq.resize(1);
        params.eq[0].alpha1 = rng.normal();
        params.eq[0].beta = rng.normal(0, 0.02);
        CovariateVector cov;
        cov.age = rng.uniform(51, 100);
        cov.sex = rng.uniform() < 0.5 ? 1.0 : 0.0;
        Eigen::VectorXd spline_row(0);

        Eigen::VectorXd prior = membership_probs(params, cov, spline_row, 1);
        double total = 0.0;
        std::vector<int> pattern(cats.size(), 1);
        for (int p1 = 1; p1 <= cats[0]; ++p1)
            for (int p2 = 1; p2 <= cats[1]; ++p2)
                for (int p3 = 1; p3 <= cats[2]; ++p3) {
                    pattern = {p1, p2, p3};
                    total += marginal_pattern_prob(theta, params, cov, spline_row, 1, pattern);

                    // brute-force responsibilities from first principles
                    Eigen::VectorXd num(C);
                    for (int c = 0; c < C; ++c)
                        num[c] = prior[c] * pattern_prob_given_class(theta, pattern, c + 1);
                    Eigen::VectorXd brute = num / num.sum();
                    Eigen::VectorXd got =
                        responsibilities(theta, params, cov, spline_row, 1, pattern);
                    worst_resp = std::max(worst_resp, (got - brute).cwiseAbs().maxCoeff());
                }
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    }
    bool pass = worst_sum <= 1e-10 && worst_resp <= 1e-12;
    return {pass, "max |sum - 1| = " + fmt(worst_sum) + ", max responsibility error " +
                      fmt(worst_resp)};
}

// ---------------------------------------------------------------------------
// criterion 4: conjugate Dirichlet update matches its closed-form mean

Result criterion4() {
    ItemResponseMatrix data;
    data.schema.items = {{"a", 2}, {"b", 3}};
    data.n_districts = 1;
    data.age_classes = AgeClassMap{51, {}};
    // fixed response counts: item a sees 30/20, item b sees 10/15/25
    for (int i = 0; i < 50; ++i) {
        UnitRecord u;
        u.age = 60;
        u.district = 1;
        u.small_area = 1;
        u.responses = {i < 30 ? 1 : 2, i < 10 ? 1 : (i < 25 ? 2 : 3)};
        data.units.push_back(u);
    }
    SplineDesign design;
    design.X = Eigen::MatrixXd::Zero(50, 0);
    design.prior_weight = Eigen::VectorXd(0);
    design.knots_std = Eigen::VectorXd(0);
    design.map = Eigen::MatrixXd::Zero(2, 0);

    ModelSpec spec;
    spec.n_classes = 1;
    spec.n_knots = 0;
    GibbsSampler sampler(spec, data, design, PriorSpec{}, 1004);
    ChainState st = sampler.init_state();

    const long N = 100000;
    std::vector<std::vector<double>> sums = {{0, 0}, {0, 0, 0}};
    for (long k = 0; k < N; ++k) {
        sampler.update_item_probs(st);
        for (int t = 0; t < 2; ++t)
            for (int h = 0; h < (t == 0 ? 2 : 3); ++h) sums[t][h] += st.theta.theta[0][t][h];
    }
    const std::vector<std::vector<double>> counts = {{30, 20}, {10, 15, 25}};
    double worst_z = 0.0;
    for (int t = 0; t < 2; ++t) {
        const int H = t == 0 ? 2 : 3;
        const double alpha0 = H + 50.0;  // concentration total: H priors + class size
        for (int h = 0; h < H; ++h) {
            double expect = (1.0 + counts[t][h]) / alpha0;
            double sd = std::sqrt(expect * (1.0 - expect) / (alpha0 + 1.0));
            double z = std::abs(sums[t][h] / N - expect) / (sd / std::sqrt(double(N)));
            worst_z = std::max(worst_z, z);
        }
    }
    return {worst_z <= 3.0, "worst |z| = " + fmt(worst_z) + " over " + std::to_string(N) +
                                " draws (limit 3 standard errors)"};
}

// ---------------------------------------------------------------------------
// criterion 5: end-to-end parameter recovery on simulated data

Result criterion5() {
    auto t0 = std::chrono::steady_clock::now();
    TruthSpec truth = default_truth(3, {3, 3, 3, 3, 3}, 2000, SmoothKind::logistic);
    ModelSpec spec;
    spec.n_classes = 3;
    spec.n_knots = 12;
    Fitted fit = fit_simulated(truth, 1005, 2005, spec, 20000, 5000, 2);
    const ChainOutput& chain = fit.chain;

    std::ostringstream why;
    bool pass = true;

    // item probabilities within +-0.05 of truth (classes are severity-ordered
    // on both sides)
    double worst_theta = 0.0;
    Eigen::VectorXd theta_mean = chain.theta_draws.colwise().mean();
    int j = 0;
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < 5; ++t)
            for (int h = 0; h < 3; ++h)
                worst_theta = std::max(worst_theta,
                                       std::abs(theta_mean[j++] - truth.theta.theta[c][t][h]));
    if (worst_theta > 0.05) {
        pass = false;
        why << " theta off by " << fmt(worst_theta) << ";";
    }

    // the model cannot see the constant part of the smooth: it moves into the
    // cutpoints. Split the true smooth over the observed ages into
    // constant + linear + orthogonal remainder to get the identified targets.
    const int n = fit.data.n_units();
    Eigen::MatrixXd X1(n, 2);
    Eigen::VectorXd fvec(n);
    for (int i = 0; i < n; ++i) {
        X1(i, 0) = 1.0;
        X1(i, 1) = fit.data.units[i].age;
        fvec[i] = truth.smooth[0].eval(truth.std_age(fit.data.units[i].age));
    }
    Eigen::Vector2d coef = X1.colPivHouseholderQr().solve(fvec);
    const double c0 = coef[0];  // absorbed by the cutpoints

    auto interval_covers = [&](const std::string& name, double target) {
        std::vector<double> d = column_draws(chain, name);
        double lo = empirical_quantile(d, 0.025), hi = empirical_quantile(d, 0.975);
        if (target < lo || target > hi) {
            pass = false;
            why << " " << name << " interval [" << fmt(lo) << ", " << fmt(hi) << "] misses "
                << fmt(target) << ";";
            return false;
        }
        return true;
    };
    interval_covers("alpha1", truth.alpha1[0]);
    interval_covers("cutpoint[1]", truth.cutpoints[0] + c0);
    interval_covers("cutpoint[2]", truth.cutpoints[1] + c0);

    // smooth recovery within +-0.3 on the interior 90% of the age range
    const double span = truth.age_max - truth.age_min;
    const int G = 60;
    Eigen::VectorXd grid(G);
    for (int g = 0; g < G; ++g)
        grid[g] = truth.age_min + 0.05 * span + 0.9 * span * g / (G - 1);
    Eigen::MatrixXd rows = fit.design.rows(grid);
    double worst_f = 0.0;
    Eigen::VectorXd fhat = Eigen::VectorXd::Zero(G);
    int beta_col = column_of(chain, "beta");
    std::vector<int> w_cols;
    for (int k = 1; k <= spec.n_knots; ++k)
        w_cols.push_back(column_of(chain, "w[" + std::to_string(k) + "]"));
    for (long m = 0; m < chain.n_kept(); ++m) {
        Eigen::VectorXd w(spec.n_knots);
        for (int k = 0; k < spec.n_knots; ++k) w[k] = chain.draws(m, w_cols[k]);
        fhat += chain.draws(m, beta_col) * grid + rows * w;
    }
    fhat /= static_cast<double>(chain.n_kept());
    for (int g = 0; g < G; ++g) {
        double target = truth.smooth[0].eval(truth.std_age(grid[g])) - c0;
        worst_f = std::max(worst_f, std::abs(fhat[g] - target));
    }
    if (worst_f > 0.3) {
        pass = false;
        why << " smooth off by " << fmt(worst_f) << ";";
    }

    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= 900.0) {
        pass = false;
        why << " runtime " << fmt(secs) << " s exceeds 900;";
    }
    std::string detail = "theta error " + fmt(worst_theta) + ", smooth error " + fmt(worst_f) +
                         ", " + fmt(secs) + " s";
    if (!pass) detail += " --" + why.str();
    return {pass, detail};
}

// ---------------------------------------------------------------------------
// criterion 6: count estimates are coherent; a zero-effect model is uniform

Result criterion6() {
    // (a) coherence on a real fit: class counts of each area sum to its
    // population in every single draw
    TruthSpec truth = default_truth(3, {3, 3, 3}, 400);
    ModelSpec spec;
    spec.n_classes = 3;
    spec.n_knots = 5;
    Fitted fit = fit_simulated(truth, 1006, 2006, spec, 900, 300, 3);
    CountEstimateTable table = estimate_counts(fit.chain, fit.cells, fit.design, true);
    std::vector<double> totals = fit.cells.area_totals();
    double worst_coh = 0.0;
    for (int a = 1; a <= table.n_areas; ++a)
        for (long m = 0; m < fit.chain.n_kept(); ++m) {
            double sum = 0.0;
            for (int c = 1; c <= table.n_classes; ++c) sum += table.at(a, c).draws[m];
            double scale = std::max(1.0, totals[a - 1]);
            worst_coh = std::max(worst_coh, std::abs(sum - totals[a - 1]) / scale);
        }

    // (b) a zero-effect five-class model spreads every area uniformly
    ChainOutput flat;
    flat.layout.link = Link::multinomial_logit;
    flat.layout.n_classes = 5;
    flat.layout.n_districts = fit.cells.n_districts;
    flat.layout.item_categories = {3};
    for (int c = 2; c <= 5; ++c) {
        std::string sfx = ".c" + std::to_string(c);
        flat.param_names.push_back("alpha0" + sfx);
        flat.param_names.push_back("alpha1" + sfx);
        flat.param_names.push_back("beta" + sfx);
        for (int d = 1; d <= fit.cells.n_districts; ++d)
            flat.param_names.push_back("v[" + std::to_string(d) + "]" + sfx);
        flat.param_names.push_back("sigma_b" + sfx);
        flat.param_names.push_back("sigma_v" + sfx);
    }
    flat.draws = Eigen::MatrixXd::Zero(5, static_cast<Eigen::Index>(flat.param_names.size()));
    for (std::size_t k = 0; k < flat.param_names.size(); ++k)
        if (flat.param_names[k].rfind("sigma", 0) == 0)
            flat.draws.col(static_cast<Eigen::Index>(k)).setOnes();
    for (int c = 1; c <= 5; ++c)
        for (int h = 1; h <= 3; ++h)
            flat.theta_names.push_back("theta.c" + std::to_string(c) + ".a" + std::to_string(h));
    flat.theta_draws = Eigen::MatrixXd::Constant(5, 15, 1.0 / 3.0);
    flat.deviance = Eigen::VectorXd::Zero(5);
    flat.log_post = Eigen::VectorXd::Zero(5);

    CountEstimateTable uni = estimate_counts(flat, fit.cells, fit.design, true);
    double worst_uni = 0.0;
    for (int a = 1; a <= uni.n_areas; ++a) {
        double expect = totals[a - 1] / 5.0;
        double scale = std::max(1.0, totals[a - 1]);
        for (int c = 1; c <= 5; ++c)
            for (long m = 0; m < 5; ++m)
                worst_uni = std::max(worst_uni,
                                     std::abs(uni.at(a, c).draws[m] - expect) / scale);
    }
    bool pass = worst_coh <= 1e-12 && worst_uni <= 1e-12;
    return {pass, "max coherence deviation " + fmt(worst_coh) + ", max uniform-share deviation " +
                      fmt(worst_uni) + " (relative)"};
}

// ---------------------------------------------------------------------------
// criterion 7: richer truth pushes the deviance distribution left

Result criterion7() {
    int wins = 0;
    for (int rep = 0; rep < 10; ++rep) {
        TruthSpec truth = default_truth(3, {3, 3, 3, 3}, 600);
        SimulatedData sim = simulate_dataset(truth, 3000 + rep);
        SplineDesign design = design_for(sim.responses, 5, SplineBasisKind::demmler_reinsch);
        SamplerConfig cfg;
        cfg.iterations = 2400;
        cfg.burn_in = 800;
        cfg.thin = 2;
        ModelSpec spec3, spec2;
        spec3.n_classes = 3;
        spec3.n_knots = 5;
        spec2.n_classes = 2;
        spec2.n_knots = 5;
        GibbsSampler s3(spec3, sim.responses, design, PriorSpec{}, 4000 + rep);
        GibbsSampler s2(spec2, sim.responses, design, PriorSpec{}, 5000 + rep);
        ChainOutput c3 = s3.run(cfg);
        ChainOutput c2 = s2.run(cfg);
        std::vector<double> d3(c3.deviance.data(), c3.deviance.data() + c3.deviance.size());
        std::vector<double> d2(c2.deviance.data(), c2.deviance.data() + c2.deviance.size());
        bool left = true;
        for (double p : {0.25, 0.5, 0.75})
            left = left && empirical_quantile(d3, p) < empirical_quantile(d2, p);
        if (left) ++wins;
    }
    return {wins >= 9, std::to_string(wins) + "/10 replications with the matched model's "
                                              "deviance quantiles below the underfit model's"};
}

// ---------------------------------------------------------------------------
// criterion 8: posterior predictive p-values are calibrated under the truth

Result criterion8() {
    int good = 0;
    std::ostringstream detail;
    for (int rep = 0; rep < 10; ++rep) {
        TruthSpec truth = default_truth(3, std::vector<int>(9, 4), 500);
        ModelSpec spec;
        spec.n_classes = 3;
        spec.n_knots = 5;
        Fitted fit = fit_simulated(truth, 6000 + rep, 7000 + rep, spec, 2000, 600, 2);
        PPCReport rep_out = ppc_pvalues(fit.chain, fit.data, fit.design, 8000 + rep, 300);
        double min_p = 1.0;
        for (double p : rep_out.p_values) min_p = std::min(min_p, p);
        bool ok = rep_out.mean >= 0.4 && rep_out.mean <= 0.6 && min_p >= 0.05;
        if (ok) ++good;
        detail << (rep ? " " : "") << fmt(rep_out.mean) << (ok ? "" : "!");
    }
    return {good >= 9, std::to_string(good) + "/10 replications calibrated (means: " +
                           detail.str() + ")"};
}

// ---------------------------------------------------------------------------
// criterion 9: the orthonormal basis mixes better than the raw one

Result criterion9() {
    int wins = 0;
    std::ostringstream ratios;
    for (int rep = 0; rep < 10; ++rep) {
        TruthSpec truth = default_truth(3, {3, 3, 3}, 400);
        SimulatedData sim = simulate_dataset(truth, 9000 + rep);
        SamplerConfig cfg;
        // the ESS estimator needs ~1500 kept draws before the ratio is
        // stable enough for a deterministic 10-replication census
        cfg.iterations = 6000;
        cfg.burn_in = 1500;
        cfg.thin = 3;
        ModelSpec spec;
        spec.n_classes = 3;
        spec.n_knots = 8;

        SplineDesign dr = design_for(sim.responses, 8, SplineBasisKind::demmler_reinsch);
        SplineDesign tp = design_for(sim.responses, 8, SplineBasisKind::thin_plate);
        spec.basis_kind = SplineBasisKind::demmler_reinsch;
        GibbsSampler s_dr(spec, sim.responses, dr, PriorSpec{}, 9100 + rep);
        spec.basis_kind = SplineBasisKind::thin_plate;
        GibbsSampler s_tp(spec, sim.responses, tp, PriorSpec{}, 9100 + rep);
        ChainOutput c_dr = s_dr.run(cfg);
        ChainOutput c_tp = s_tp.run(cfg);

        double ess_dr = effective_sample_size(c_dr.draws.col(column_of(c_dr, "beta")));
        double ess_tp = effective_sample_size(c_tp.draws.col(column_of(c_tp, "beta")));
        if (ess_dr > ess_tp) ++wins;
        ratios << (rep ? " " : "") << fmt(ess_dr / ess_tp);
    }
    return {wins >= 8, std::to_string(wins) + "/10 replications with higher age-slope ESS "
                                              "(ratios: " + ratios.str() + ")"};
}

// ---------------------------------------------------------------------------
// criterion 10: reproducibility of the serialized chains

Result criterion10() {
    TruthSpec truth = default_truth(2, {3, 3, 3}, 200);
    SimulatedData sim = simulate_dataset(truth, 1010);
    SplineDesign design = design_for(sim.responses, 4, SplineBasisKind::demmler_reinsch);
    ModelSpec spec;
    spec.n_classes = 2;
    spec.n_knots = 4;
    SamplerConfig cfg;
    cfg.iterations = 400;
    cfg.burn_in = 100;
    cfg.thin = 2;
    cfg.seed = 77;

    auto run_and_save = [&](std::uint64_t seed, const fs::path& dir) {
        GibbsSampler s(spec, sim.responses, design, PriorSpec{}, seed);
        ChainOutput out = s.run(cfg);
        fs::remove_all(dir);
        save_chain_output(dir, out);
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };

    fs::path base = fs::temp_directory_path() / "lcsae_acceptance_repro";
    run_and_save(77, base / "a");
    run_and_save(77, base / "b");
    run_and_save(78, base / "c");

    bool identical = true, distinct = false;
    for (const char* file : {"manifest.json", "params.csv", "theta.csv", "deviance.csv"})
        identical = identical && slurp(base / "a" / file) == slurp(base / "b" / file);
    distinct = slurp(base / "a" / "params.csv") != slurp(base / "c" / "params.csv");
    return {identical && distinct,
            std::string(identical ? "same seed byte-identical" : "same seed DIFFERS") + ", " +
                (distinct ? "different seed distinct" : "different seed IDENTICAL")};
}

// ---------------------------------------------------------------------------
// criterion 11: shipped defaults

Result criterion11() {
    SamplerConfig sampler;
    ModelSpec model;
    PriorSpec prior;
    bool pass = sampler.iterations == 120000 && sampler.burn_in == 15000 && sampler.thin == 3 &&
                sampler.kept_draws() == 35000 && model.n_knots == 12 && model.n_classes == 5 &&
                model.link == Link::proportional_odds && prior.sigma_b_prior.B == 16.0 &&
                prior.sigma_v_prior.B == 16.0;

    // the default knot rule places quantile knots; check the documented case
    std::vector<double> ages;
    for (int a = 51; a <= 100; ++a) ages.push_back(a);
    KnotSet knots = select_knots(ages, model.n_knots);
    for (int k = 0; k < knots.size(); ++k) {
        double pos = (k + 1) / 13.0 * 49.0;  // quantile position on 50 sorted values
        double expect = 51.0 + pos;
        if (std::abs(knots.knots[k] - expect) > 1e-9) pass = false;
    }
    return {pass, "kept draws " + std::to_string(sampler.kept_draws()) + ", K = " +
                      std::to_string(model.n_knots) + ", B = " + fmt(prior.sigma_b_prior.B) +
                      ", quantile knots verified"};
}

}  // namespace

int main(int argc, char** argv) {
    struct Entry {
        std::function<Result()> fn;
        const char* what;
    };
    const std::vector<Entry> entries = {
        {criterion1, "orthonormal basis construction on random instances"},
        {criterion2, "spline parameterizations agree under the basis map"},
        {criterion3, "mixture likelihood and responsibilities match brute force"},
        {criterion4, "conjugate item-probability update matches the closed form"},
        {criterion5, "end-to-end parameter recovery on simulated data"},
        {criterion6, "count estimates coherent; zero-effect model uniform"},
        {criterion7, "matched model's deviance distribution lies left of the underfit one"},
        {criterion8, "posterior predictive p-values calibrated under the truth"},
        {criterion9, "orthonormal basis improves age-slope mixing"},
        {criterion10, "chain output reproducible by seed"},
        {criterion11, "shipped defaults match the documented run shape"},
    };

    std::vector<int> which;
    if (argc > 1) {
        int n = std::atoi(argv[1]);
        if (n < 1 || n > static_cast<int>(entries.size())) {
            std::cerr << "usage: acceptance [1-" << entries.size() << "]\n";
            return 2;
        }
        which.push_back(n);
    } else {
        for (int n = 1; n <= static_cast<int>(entries.size()); ++n) which.push_back(n);
    }

    bool all_pass = true;
    for (int n : which) {
        Result r;
        try {
            r = entries[static_cast<std::size_t>(n - 1)].fn();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        all_pass = all_pass && r.pass;
        std::cout << "criterion " << n << ": " << (r.pass ? "PASS" : "FAIL") << " — "
                  << entries[static_cast<std::size_t>(n - 1)].what << " (" << r.detail << ")"
                  << std::endl;
    }
    return all_pass ? 0 : 1;
}
