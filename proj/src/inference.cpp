#include "lcsae/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lcsae/model.hpp"
#include "lcsae/rng.hpp"

namespace lcsae {

double empirical_quantile(std::vector<double> draws, double p) {
    if (draws.empty()) throw InferenceError("quantile of an empty sample");
    std::sort(draws.begin(), draws.end());
    const auto n = static_cast<double>(draws.size());
    // median-unbiased plotting position: h = (n + 1/3) p + 1/3
    double h = (n + 1.0 / 3.0) * p + 1.0 / 3.0;
    h = std::clamp(h, 1.0, n);
    auto lo = static_cast<std::size_t>(std::floor(h)) - 1;
    std::size_t hi = std::min(lo + 1, draws.size() - 1);
    double frac = h - std::floor(h);
    return draws[lo] + frac * (draws[hi] - draws[lo]);
}

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double m) {
    if (v.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
}

}  // namespace

CountEstimateTable estimate_counts(const ChainOutput& chain, const PopulationCellTable& cells,
                                   const SplineDesign& design, bool keep_draws) {
    const int C = chain.layout.n_classes;
    const int J = cells.n_areas();
    const long M = chain.n_kept();
    if (M < 1) throw InferenceError("chain has no kept draws");
    for (const auto& cell : cells.cells)
        if (cell.district < 1 || cell.district > chain.layout.n_districts)
            throw InferenceError("population cell in district " + std::to_string(cell.district) +
                                 " outside the fitted model's districts");

    // precompute per-cell covariates and spline rows once
    const int L = cells.n_cells();
    std::vector<CovariateVector> cov(L);
    Eigen::VectorXd ages(L);
    for (int l = 0; l < L; ++l) {
        cov[l] = encode_covariates(cells.cells[l]);
        ages[l] = cells.cells[l].age;
    }
    Eigen::MatrixXd rows = L > 0 ? design.rows(ages) : Eigen::MatrixXd(0, design.n_coeffs());

    // quantiles need the per-draw area totals, but only J*C doubles per draw
    // are stored (never the per-cell probabilities)
    std::vector<std::vector<double>> draw_store(static_cast<std::size_t>(J) * C);
    for (auto& d : draw_store) d.reserve(M);

    for (long m = 0; m < M; ++m) {
        MembershipParams params = chain.params_at(m);
        std::vector<double> acc(static_cast<std::size_t>(J) * C, 0.0);
        for (int l = 0; l < L; ++l) {
            const auto& cell = cells.cells[l];
            if (cell.count == 0.0) continue;
            Eigen::VectorXd p = membership_probs(params, cov[l], rows.row(l), cell.district);
            for (int c = 0; c < C; ++c)
                acc[static_cast<std::size_t>(cell.small_area - 1) * C + c] += cell.count * p[c];
        }
        for (std::size_t k = 0; k < acc.size(); ++k) draw_store[k].push_back(acc[k]);
    }

    CountEstimateTable table;
    table.n_areas = J;
    table.n_classes = C;
    table.estimates.resize(static_cast<std::size_t>(J) * C);
    for (int j = 0; j < J; ++j)
        for (int c = 0; c < C; ++c) {
            auto& est = table.estimates[static_cast<std::size_t>(j) * C + c];
            auto& d = draw_store[static_cast<std::size_t>(j) * C + c];
            est.small_area = j + 1;
            est.latent_class = c + 1;
            est.mean = mean_of(d);
            double sd = sd_of(d, est.mean);
            if (est.mean > 0) est.cv_percent = 100.0 * sd / est.mean;
            est.q025 = empirical_quantile(d, 0.025);
            est.q50 = empirical_quantile(d, 0.5);
            est.q975 = empirical_quantile(d, 0.975);
            if (keep_draws) est.draws = d;
        }
    return table;
}

std::vector<DevianceCDF> deviance_cdf(const std::vector<const ChainOutput*>& chains,
                                      const std::vector<std::string>& labels, int grid_points) {
    if (chains.empty()) throw InferenceError("no chains to compare");
    if (labels.size() != chains.size()) throw InferenceError("one label per chain required");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* ch : chains) {
        if (ch->n_kept() < 1) throw InferenceError("chain has no kept draws");
        lo = std::min(lo, ch->deviance.minCoeff());
        hi = std::max(hi, ch->deviance.maxCoeff());
    }
    if (!(hi > lo)) hi = lo + 1.0;
    std::vector<double> grid(grid_points);
    for (int g = 0; g < grid_points; ++g)
        grid[g] = lo + (hi - lo) * g / std::max(grid_points - 1, 1);

    std::vector<DevianceCDF> out;
    for (std::size_t k = 0; k < chains.size(); ++k) {
        DevianceCDF c;
        c.label = labels[k];
        c.grid = grid;
        c.sorted_draws.assign(chains[k]->deviance.data(),
                              chains[k]->deviance.data() + chains[k]->deviance.size());
        std::sort(c.sorted_draws.begin(), c.sorted_draws.end());
        c.ecdf.resize(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            auto it = std::upper_bound(c.sorted_draws.begin(), c.sorted_draws.end(), grid[g]);
            c.ecdf[g] = static_cast<double>(it - c.sorted_draws.begin()) /
                        static_cast<double>(c.sorted_draws.size());
        }
        out.push_back(std::move(c));
    }
    return out;
}

PPCReport ppc_pvalues(const ChainOutput& chain, const ItemResponseMatrix& data,
                      const SplineDesign& design, std::uint64_t seed, long max_draws) {
    const int C = chain.layout.n_classes;
    const int T = data.schema.item_count();
    const int n = data.n_units();
    const long M_all = chain.n_kept();
    if (M_all < 1) throw InferenceError("chain has no kept draws");

    std::vector<long> use;
    if (max_draws > 0 && max_draws < M_all) {
        for (long k = 0; k < max_draws; ++k) use.push_back(k * M_all / max_draws);
    } else {
        use.resize(M_all);
        std::iota(use.begin(), use.end(), 0);
    }

    PPCReport rep;
    std::vector<int> included;
    for (int i = 0; i < n; ++i) {
        bool all_min = true;
        for (int t = 0; t < T; ++t)
            if (data.units[i].responses[t] != 1) {
                all_min = false;
                break;
            }
        if (all_min)
            ++rep.excluded_units;
        else
            included.push_back(i);
    }

    std::vector<CovariateVector> cov(n);
    Eigen::VectorXd ages(n);
    for (int i = 0; i < n; ++i) {
        cov[i] = encode_covariates(data.units[i]);
        ages[i] = data.units[i].age;
    }
    Eigen::MatrixXd rows = design.rows(ages);

    std::vector<long> exceed(included.size(), 0);
    std::vector<double> wts(C);
    for (std::size_t mi = 0; mi < use.size(); ++mi) {
        long m = use[mi];
        MembershipParams params = chain.params_at(m);
        ItemProbTable theta = chain.theta_at(m);
        for (std::size_t u = 0; u < included.size(); ++u) {
            int i = included[u];
            // per-(draw, unit) substream so p-values are order-invariant
            Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(m)),
                                static_cast<std::uint64_t>(i)));
            Eigen::VectorXd p =
                membership_probs(params, cov[i], rows.row(i), data.units[i].district);
            for (int c = 0; c < C; ++c) wts[c] = p[c];
            auto draw_pattern = [&](std::vector<int>& pat) {
                int cls = rng.discrete(wts);
                pat.resize(T);
                for (int t = 0; t < T; ++t) {
                    const Eigen::VectorXd& tp = theta.theta[cls][t];
                    std::vector<double> tw(tp.data(), tp.data() + tp.size());
                    pat[t] = rng.discrete(tw) + 1;
                }
            };
            std::vector<int> ystar, ystar2;
            draw_pattern(ystar);
            draw_pattern(ystar2);
            long d_obs = 0, d_rep = 0;
            for (int t = 0; t < T; ++t) {
                d_obs += std::abs(data.units[i].responses[t] - ystar[t]);
                d_rep += std::abs(ystar[t] - ystar2[t]);
            }
            if (d_obs > d_rep) ++exceed[u];
        }
    }

    rep.unit_indices = included;
    rep.p_values.resize(included.size());
    for (std::size_t u = 0; u < included.size(); ++u)
        rep.p_values[u] = static_cast<double>(exceed[u]) / static_cast<double>(use.size());
    if (!rep.p_values.empty()) {
        rep.mean = mean_of(rep.p_values);
        rep.q025 = empirical_quantile(rep.p_values, 0.025);
        rep.q25 = empirical_quantile(rep.p_values, 0.25);
        rep.median = empirical_quantile(rep.p_values, 0.5);
        rep.q75 = empirical_quantile(rep.p_values, 0.75);
        rep.q975 = empirical_quantile(rep.p_values, 0.975);
    }
    return rep;
}

Classification classify_units(const ChainOutput& chain, const ItemResponseMatrix& data,
                              const SplineDesign& design) {
    const int C = chain.layout.n_classes;
    const int n = data.n_units();
    const long M = chain.n_kept();
    if (M < 1) throw InferenceError("chain has no kept draws");

    std::vector<CovariateVector> cov(n);
    Eigen::VectorXd ages(n);
    for (int i = 0; i < n; ++i) {
        cov[i] = encode_covariates(data.units[i]);
        ages[i] = data.units[i].age;
    }
    Eigen::MatrixXd rows = design.rows(ages);

    Classification out;
    out.probs = Eigen::MatrixXd::Zero(n, C);
    for (long m = 0; m < M; ++m) {
        MembershipParams params = chain.params_at(m);
        ItemProbTable theta = chain.theta_at(m);
        for (int i = 0; i < n; ++i)
            out.probs.row(i) += responsibilities(theta, params, cov[i], rows.row(i),
                                                 data.units[i].district,
                                                 data.units[i].responses)
                                    .transpose();
    }
    out.probs /= static_cast<double>(M);

    out.map_class.resize(n);
    out.tie_flag.resize(n);
    out.class_shares.assign(C, 0.0);
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int c = 1; c < C; ++c)
            if (out.probs(i, c) > out.probs(i, best)) best = c;
        bool tie = false;
        for (int c = 0; c < C; ++c)
            if (c != best && out.probs(i, c) == out.probs(i, best)) tie = true;
        out.map_class[i] = best + 1;
        out.tie_flag[i] = tie;
        out.class_shares[best] += 1.0 / n;
    }
    return out;
}

double effective_sample_size(const Eigen::VectorXd& draws) {
    const long M = draws.size();
    if (M < 2) return static_cast<double>(M);
    double mean = draws.mean();
    Eigen::VectorXd x = draws.array() - mean;
    double c0 = x.squaredNorm() / M;
    if (c0 <= 0) return static_cast<double>(M);  // constant chain
    // Geyer initial positive sequence: sum adjacent autocovariance pairs while positive
    double sum = 0.0;
    for (long k = 1; k + 1 < M; k += 2) {
        double ck = x.head(M - k).dot(x.tail(M - k)) / M;
        double ck1 = x.head(M - k - 1).dot(x.tail(M - k - 1)) / M;
        double pair = ck + ck1;
        if (pair <= 0) break;
        sum += pair;
    }
    double ess = static_cast<double>(M) / (1.0 + 2.0 * sum / c0);
    return std::clamp(ess, 1.0, static_cast<double>(M));
}

std::vector<ParameterSummary> chain_summary(const ChainOutput& chain, int max_lag) {
    const long M = chain.n_kept();
    if (M < 10) throw InferenceError("need at least 10 kept draws to summarize");
    std::vector<ParameterSummary> out;
    auto summarize = [&](const std::string& name, const Eigen::VectorXd& col) {
        ParameterSummary s;
        s.name = name;
        s.mean = col.mean();
        Eigen::VectorXd x = col.array() - s.mean;
        double c0 = x.squaredNorm() / M;
        s.sd = std::sqrt(x.squaredNorm() / (M - 1));
        std::vector<double> v(col.data(), col.data() + M);
        s.q025 = empirical_quantile(v, 0.025);
        s.q50 = empirical_quantile(v, 0.5);
        s.q975 = empirical_quantile(v, 0.975);
        if (c0 <= 0) {
            s.degenerate = true;
            s.ess = static_cast<double>(M);
        } else {
            s.ess = effective_sample_size(col);
            for (int k = 1; k <= max_lag && k < M; ++k)
                s.autocorr.push_back(x.head(M - k).dot(x.tail(M - k)) / M / c0);
        }
        out.push_back(std::move(s));
    };
    for (std::size_t j = 0; j < chain.param_names.size(); ++j)
        summarize(chain.param_names[j], chain.draws.col(static_cast<Eigen::Index>(j)));
    summarize("deviance", chain.deviance);
    return out;
}

MixingComparison compare_mixing(const ChainOutput& chain_a, const ChainOutput& chain_b) {
    if (chain_a.n_kept() != chain_b.n_kept())
        throw InferenceError("chains have different numbers of kept draws");
    if (chain_a.layout.n_classes != chain_b.layout.n_classes ||
        chain_a.layout.link != chain_b.layout.link)
        throw InferenceError("chains fit different models");
    MixingComparison cmp;
    std::vector<Eigen::Index> cols_a, cols_b;
    for (std::size_t j = 0; j < chain_a.param_names.size(); ++j) {
        auto it = std::find(chain_b.param_names.begin(), chain_b.param_names.end(),
                            chain_a.param_names[j]);
        if (it == chain_b.param_names.end()) continue;
        cmp.names.push_back(chain_a.param_names[j]);
        cols_a.push_back(static_cast<Eigen::Index>(j));
        cols_b.push_back(static_cast<Eigen::Index>(it - chain_b.param_names.begin()));
    }
    if (cmp.names.empty()) throw InferenceError("no common parameters between the chains");
    const long M = chain_a.n_kept();
    cmp.trace_first.resize(M, static_cast<Eigen::Index>(cmp.names.size()));
    cmp.trace_second.resize(M, static_cast<Eigen::Index>(cmp.names.size()));
    for (std::size_t k = 0; k < cmp.names.size(); ++k) {
        Eigen::VectorXd a = chain_a.draws.col(cols_a[k]);
        Eigen::VectorXd b = chain_b.draws.col(cols_b[k]);
        cmp.trace_first.col(static_cast<Eigen::Index>(k)) = a;
        cmp.trace_second.col(static_cast<Eigen::Index>(k)) = b;
        double ea = effective_sample_size(a);
        double eb = effective_sample_size(b);
        cmp.ess_first.push_back(ea);
        cmp.ess_second.push_back(eb);
        cmp.ratio.push_back(eb > 0 ? ea / eb : std::numeric_limits<double>::infinity());
    }
    return cmp;
}

}  // namespace lcsae
