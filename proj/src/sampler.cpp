#include "lcsae/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lcsae/chain_io.hpp"

namespace lcsae {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void PriorSpec::validate() const {
    if (!(dirichlet_conc > 0)) throw SamplerError("Dirichlet concentration must be positive");
    if (!(reg_prior_var > 0)) throw SamplerError("regression prior variance must be positive");
    for (const SdPrior* p : {&sigma_b_prior, &sigma_v_prior}) {
        if (!(p->B > 0) || !(p->scale > 0) || !(p->a > 0) || !(p->b > 0))
            throw SamplerError("sd-prior hyperparameters must be strictly positive");
    }
}

void SamplerConfig::validate() const {
    if (burn_in >= iterations) throw SamplerError("burn_in must be smaller than iterations");
    if (thin < 1) throw SamplerError("thin must be >= 1");
    if (chains < 1) throw SamplerError("need at least one chain");
    if (adapt_window < 1) throw SamplerError("adapt_window must be >= 1");
}

double slice_sample(const std::function<double(double)>& log_f, double x0, double lo, double hi,
                    double width, Rng& rng) {
    double y = log_f(x0) - (-std::log(rng.uniform()));
    double left = x0 - width * rng.uniform();
    double right = left + width;
    int steps = 100;
    while (left > lo && steps-- > 0 && log_f(left) > y) left -= width;
    steps = 100;
    while (right < hi && steps-- > 0 && log_f(right) > y) right += width;
    left = std::max(left, lo);
    right = std::min(right, hi);
    for (int it = 0; it < 200; ++it) {
        double x1 = rng.uniform(left, right);
        if (log_f(x1) >= y) return x1;
        if (x1 < x0)
            left = x1;
        else
            right = x1;
    }
    return x0;
}

double draw_sd(const SdPrior& prior, int m, double ss, double current, Rng& rng) {
    if (prior.type == SdPriorType::inv_gamma) {
        // conjugate on sigma^2
        double shape = prior.a + 0.5 * m;
        double rate = prior.b + 0.5 * ss;
        double var = rate / rng.gamma(shape);
        return std::sqrt(var);
    }
    if (m == 0 && ss == 0.0) {
        if (prior.type == SdPriorType::uniform) return rng.uniform(0.0, prior.B);
        // half-Cauchy: S * tan(pi U / 2)
        return prior.scale * std::tan(0.5 * M_PI * rng.uniform());
    }
    const bool uniform = prior.type == SdPriorType::uniform;
    const double hi = uniform ? prior.B : std::max(1e6 * prior.scale, 1e6);
    auto log_f = [&](double sigma) -> double {
        if (!(sigma > 0) || sigma >= hi) return -kInf;
        double lf = -m * std::log(sigma) - 0.5 * ss / (sigma * sigma);
        if (!uniform) {
            double r = sigma / prior.scale;
            lf -= std::log1p(r * r);
        }
        return lf;
    };
    double x0 = std::clamp(current, 1e-8, hi * (1.0 - 1e-12));
    double width = uniform ? prior.B / 10.0 : std::max(0.5, std::sqrt(ss / std::max(m, 1)));
    return slice_sample(log_f, x0, 0.0, hi, width, rng);
}

GibbsSampler::GibbsSampler(const ModelSpec& spec, const ItemResponseMatrix& data,
                           const SplineDesign& design, const PriorSpec& prior, std::uint64_t seed)
    : spec_(spec), data_(data), design_(design), prior_(prior), rng_(seed), seed_(seed) {
    prior_.validate();
    if (spec_.n_classes < 1) throw SamplerError("need at least one latent class");
    n_ = data.n_units();
    C_ = spec_.n_classes;
    T_ = data.schema.item_count();
    D_ = data.n_districts;
    K_ = design.n_coeffs();
    n_eq_ = (C_ == 1) ? 0 : (spec_.link == Link::proportional_odds ? 1 : C_ - 1);

    cov_.reserve(n_);
    district_.reserve(n_);
    district_units_.assign(D_, {});
    for (int i = 0; i < n_; ++i) {
        cov_.push_back(encode_covariates(data.units[i]));
        district_.push_back(data.units[i].district);
        district_units_[data.units[i].district - 1].push_back(i);
    }
    spline_rows_ = design.X;
    if (spline_rows_.rows() != n_)
        throw SamplerError("spline design row count does not match unit count");

    // adaptive scalar blocks
    auto add_block = [&](const std::string& name) {
        blocks_.push_back(Block{name, 0.5, 0, 0, 0, 0, 0});
        return static_cast<int>(blocks_.size()) - 1;
    };
    if (n_eq_ > 0 && spec_.link == Link::proportional_odds)
        for (int c = 1; c < C_; ++c) blk_cut_.push_back(add_block("cutpoint[" + std::to_string(c) + "]"));
    blk_reg_.resize(n_eq_);
    blk_v_.resize(n_eq_);
    blk_w_.resize(n_eq_);
    for (int e = 0; e < n_eq_; ++e) {
        std::string sfx =
            spec_.link == Link::multinomial_logit ? ".c" + std::to_string(e + 2) : "";
        if (spec_.link == Link::multinomial_logit) blk_reg_[e].push_back(add_block("alpha0" + sfx));
        blk_reg_[e].push_back(add_block("alpha1" + sfx));
        if (spec_.use_marital)
            for (const char* g : {"gamma.married", "gamma.separated", "gamma.widow"})
                blk_reg_[e].push_back(add_block(g + sfx));
        blk_reg_[e].push_back(add_block("beta" + sfx));
        for (int d = 1; d <= D_; ++d)
            blk_v_[e].push_back(add_block("v[" + std::to_string(d) + "]" + sfx));
        for (int k = 1; k <= K_; ++k)
            blk_w_[e].push_back(add_block("w[" + std::to_string(k) + "]" + sfx));
    }
}

std::vector<std::string> GibbsSampler::block_names() const {
    std::vector<std::string> names;
    for (const auto& b : blocks_) names.push_back(b.name);
    return names;
}

ChainLayout GibbsSampler::layout() const {
    ChainLayout lay;
    lay.link = spec_.link;
    lay.n_classes = C_;
    lay.n_knots = K_;
    lay.n_districts = D_;
    lay.use_marital = spec_.use_marital;
    for (const auto& it : data_.schema.items) lay.item_categories.push_back(it.categories);
    return lay;
}

std::vector<double> GibbsSampler::severity_scores(const ItemProbTable& theta) const {
    std::vector<double> score(theta.n_classes(), 0.0);
    for (int c = 0; c < theta.n_classes(); ++c) {
        for (int t = 0; t < theta.n_items(); ++t)
            for (int h = 0; h < theta.theta[c][t].size(); ++h)
                score[c] += (h + 1) * theta.theta[c][t][h];
        score[c] /= std::max(theta.n_items(), 1);
    }
    return score;
}

ChainState GibbsSampler::init_state() {
    ChainState st;

    // severity-ordered start: rank units by their observed mean response
    // level and block-assign them to classes, so class c holds the c-th
    // severity band from the first sweep on. Starting instead from random
    // item probabilities lets the chain settle into a permuted labeling the
    // covariate effects then cannot escape.
    std::vector<double> unit_score(n_, 0.0);
    for (int i = 0; i < n_; ++i) {
        for (int t = 0; t < T_; ++t) {
            const int H = data_.schema.items[t].categories;
            if (H > 1)
                unit_score[i] += static_cast<double>(data_.units[i].responses[t] - 1) / (H - 1);
        }
        unit_score[i] /= std::max(T_, 1);
    }
    std::vector<int> rank(n_);
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(),
                     [&](int a, int b) { return unit_score[a] < unit_score[b]; });
    st.memberships.assign(n_, 1);
    for (int r = 0; r < n_; ++r)
        st.memberships[rank[r]] = 1 + static_cast<int>(static_cast<long>(r) * C_ / std::max(n_, 1));

    // item probabilities drawn from their full conditional given that split
    st.theta.theta.resize(C_);
    for (int c = 0; c < C_; ++c) st.theta.theta[c].resize(T_);
    update_item_probs(st);

    st.params.link = spec_.link;
    st.params.n_classes = C_;
    st.params.use_marital = spec_.use_marital;
    if (n_eq_ > 0) {
        if (spec_.link == Link::proportional_odds)
            for (int c = 1; c < C_; ++c) st.params.cutpoints.push_back(c - 0.5 * C_);
        st.params.eq.resize(n_eq_);
        for (auto& e : st.params.eq) {
            e.w = Eigen::VectorXd::Zero(K_);
            e.v = Eigen::VectorXd::Zero(D_);
        }
        st.variances.sigma_v.assign(n_eq_, 0.5 * prior_.sigma_v_prior.B);
        st.variances.sigma_b.assign(n_eq_, 0.5 * prior_.sigma_b_prior.B);
        st.variances.upper_bound = prior_.sigma_b_prior.B;
    }

    rebuild_predictor_cache(st);
    rebuild_class_loglik(st);
    st.memberships.resize(n_);
    Eigen::VectorXd lw(C_);
    std::vector<double> wts(C_);
    for (int i = 0; i < n_; ++i) {
        for (int c = 0; c < C_; ++c) lw[c] = class_loglik_(i, c) + unit_log_membership(st, i, c + 1);
        double mx = lw.maxCoeff();
        if (!std::isfinite(mx))
            throw SamplerError("unit " + std::to_string(i) + " has zero mass under every class");
        for (int c = 0; c < C_; ++c) wts[c] = std::exp(lw[c] - mx);
        st.memberships[i] = rng_.discrete(wts) + 1;
    }
    ll_mem_ = membership_loglik(st);
    st.proposal_scales.resize(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) st.proposal_scales[b] = blocks_[b].scale;
    st.log_posterior = log_posterior(st);
    return st;
}

void GibbsSampler::rebuild_predictor_cache(const ChainState& state) {
    eta_.resize(n_, std::max(n_eq_, 1));
    eta_.setZero();
    for (int e = 0; e < n_eq_; ++e)
        for (int i = 0; i < n_; ++i)
            eta_(i, e) = shared_predictor(state.params.eq[e], cov_[i], spline_rows_.row(i),
                                          district_[i], spec_.use_marital) +
                         (spec_.link == Link::multinomial_logit ? state.params.eq[e].alpha0 : 0.0);
}

void GibbsSampler::rebuild_class_loglik(const ChainState& state) {
    class_loglik_.resize(n_, C_);
    for (int i = 0; i < n_; ++i)
        for (int c = 1; c <= C_; ++c)
            class_loglik_(i, c - 1) =
                log_pattern_prob_given_class(state.theta, data_.units[i].responses, c);
}

double GibbsSampler::unit_log_membership(const ChainState& state, int i, int cls) const {
    if (C_ == 1) return 0.0;
    if (spec_.link == Link::proportional_odds)
        return log_po_class(eta_(i, 0), state.params.cutpoints, cls);
    double mx = 0.0;
    for (int e = 0; e < n_eq_; ++e) mx = std::max(mx, eta_(i, e));
    double lse = std::exp(-mx);
    for (int e = 0; e < n_eq_; ++e) lse += std::exp(eta_(i, e) - mx);
    lse = mx + std::log(lse);
    return (cls == 1 ? 0.0 : eta_(i, cls - 2)) - lse;
}

double GibbsSampler::membership_loglik(const ChainState& state) const {
    double ll = 0.0;
    for (int i = 0; i < n_; ++i) ll += unit_log_membership(state, i, state.memberships[i]);
    return ll;
}

void GibbsSampler::update_memberships(ChainState& state) {
    rebuild_class_loglik(state);
    if (C_ == 1) {
        std::fill(state.memberships.begin(), state.memberships.end(), 1);
        ll_mem_ = 0.0;
        return;
    }
    Eigen::VectorXd lw(C_);
    std::vector<double> wts(C_);
    for (int i = 0; i < n_; ++i) {
        for (int c = 0; c < C_; ++c)
            lw[c] = class_loglik_(i, c) + unit_log_membership(state, i, c + 1);
        double mx = lw.maxCoeff();
        if (!std::isfinite(mx))
            throw SamplerError("unit " + std::to_string(i) + " has zero mass under every class");
        for (int c = 0; c < C_; ++c) wts[c] = std::exp(lw[c] - mx);
        state.memberships[i] = rng_.discrete(wts) + 1;
    }
    ll_mem_ = membership_loglik(state);
}

void GibbsSampler::update_item_probs(ChainState& state) {
    std::vector<double> conc;
    for (int c = 0; c < C_; ++c)
        for (int t = 0; t < T_; ++t) {
            const int H = data_.schema.items[t].categories;
            conc.assign(H, prior_.dirichlet_conc);
            for (int i = 0; i < n_; ++i)
                if (state.memberships[i] == c + 1) conc[data_.units[i].responses[t] - 1] += 1.0;
            auto p = rng_.dirichlet(conc);
            state.theta.theta[c][t] = Eigen::Map<Eigen::VectorXd>(p.data(), p.size());
        }
}

void GibbsSampler::adapt_block(Block& blk, bool adapt, bool accepted) {
    ++blk.proposals;
    if (accepted) ++blk.accepts;
    if (!adapt) return;
    ++blk.win_proposals;
    if (accepted) ++blk.win_accepts;
    // Robbins-Monro style batch adaptation toward the target rate
    if (blk.win_proposals >= 50) {
        double rate = static_cast<double>(blk.win_accepts) / blk.win_proposals;
        ++blk.batches;
        double delta = std::min(0.25, 1.0 / std::sqrt(static_cast<double>(blk.batches)));
        blk.scale *= std::exp(delta * (rate - 0.44) / 0.44);
        blk.scale = std::clamp(blk.scale, 1e-6, 1e4);
        blk.win_proposals = 0;
        blk.win_accepts = 0;
    }
}

void GibbsSampler::metropolis_scalar(ChainState& state, int block_idx, int eq_idx, double& value,
                                     double prior_var, const Eigen::VectorXd& column, bool adapt) {
    Block& blk = blocks_[block_idx];
    const double delta = blk.scale * rng_.normal();
    double dll = 0.0;
    if (spec_.link == Link::proportional_odds) {
        for (int i = 0; i < n_; ++i) {
            double x = eta_(i, 0);
            int q = state.memberships[i];
            dll += log_po_class(x + delta * column[i], state.params.cutpoints, q) -
                   log_po_class(x, state.params.cutpoints, q);
        }
    } else {
        for (int i = 0; i < n_; ++i) {
            int q = state.memberships[i];
            double mx = 0.0, mx2 = 0.0;
            double eta_new_e = eta_(i, eq_idx) + delta * column[i];
            for (int e = 0; e < n_eq_; ++e) {
                double cur = eta_(i, e);
                double nxt = (e == eq_idx) ? eta_new_e : cur;
                mx = std::max(mx, cur);
                mx2 = std::max(mx2, nxt);
            }
            double lse = std::exp(-mx), lse2 = std::exp(-mx2);
            for (int e = 0; e < n_eq_; ++e) {
                lse += std::exp(eta_(i, e) - mx);
                lse2 += std::exp(((e == eq_idx) ? eta_new_e : eta_(i, e)) - mx2);
            }
            double num_old = (q == 1) ? 0.0 : eta_(i, q - 2);
            double num_new = (q == 1) ? 0.0 : ((q - 2 == eq_idx) ? eta_new_e : eta_(i, q - 2));
            dll += (num_new - (mx2 + std::log(lse2))) - (num_old - (mx + std::log(lse)));
        }
    }
    const double cand = value + delta;
    double dlp = (value * value - cand * cand) / (2.0 * prior_var);
    bool accepted = false;
    double log_ratio = dll + dlp;
    if (std::isfinite(log_ratio) && std::log(rng_.uniform()) < log_ratio) {
        value = cand;
        eta_.col(eq_idx) += delta * column;
        ll_mem_ += dll;
        accepted = true;
    }
    adapt_block(blk, adapt, accepted);
}

void GibbsSampler::metropolis_cutpoint(ChainState& state, int block_idx, int cut_idx, bool adapt) {
    Block& blk = blocks_[block_idx];
    const double delta = blk.scale * rng_.normal();
    auto& cuts = state.params.cutpoints;
    const double cand = cuts[cut_idx] + delta;
    const bool monotone = (cut_idx == 0 || cand > cuts[cut_idx - 1]) &&
                          (cut_idx + 1 >= static_cast<int>(cuts.size()) || cand < cuts[cut_idx + 1]);
    if (!monotone) {
        adapt_block(blk, adapt, false);
        return;
    }
    // only classes cut_idx+1 and cut_idx+2 (1-based) see this cutpoint
    double dll = 0.0;
    const double old = cuts[cut_idx];
    cuts[cut_idx] = cand;
    for (int i = 0; i < n_; ++i) {
        int q = state.memberships[i];
        if (q != cut_idx + 1 && q != cut_idx + 2) continue;
        double x = eta_(i, 0);
        double lp_new = log_po_class(x, cuts, q);
        cuts[cut_idx] = old;
        double lp_old = log_po_class(x, cuts, q);
        cuts[cut_idx] = cand;
        dll += lp_new - lp_old;
    }
    double dlp = (old * old - cand * cand) / (2.0 * prior_.reg_prior_var);
    bool accepted = std::isfinite(dll + dlp) && std::log(rng_.uniform()) < dll + dlp;
    if (accepted)
        ll_mem_ += dll;
    else
        cuts[cut_idx] = old;
    adapt_block(blk, adapt, accepted);
}

void GibbsSampler::metropolis_district(ChainState& state, int block_idx, int eq_idx, int district,
                                       bool adapt) {
    Block& blk = blocks_[block_idx];
    const double delta = blk.scale * rng_.normal();
    const auto& units = district_units_[district - 1];
    double dll = 0.0;
    if (spec_.link == Link::proportional_odds) {
        for (int i : units) {
            double x = eta_(i, 0);
            int q = state.memberships[i];
            dll += log_po_class(x + delta, state.params.cutpoints, q) -
                   log_po_class(x, state.params.cutpoints, q);
        }
    } else {
        for (int i : units) {
            int q = state.memberships[i];
            double eta_new_e = eta_(i, eq_idx) + delta;
            double mx = 0.0, mx2 = 0.0;
            for (int e = 0; e < n_eq_; ++e) {
                mx = std::max(mx, eta_(i, e));
                mx2 = std::max(mx2, (e == eq_idx) ? eta_new_e : eta_(i, e));
            }
            double lse = std::exp(-mx), lse2 = std::exp(-mx2);
            for (int e = 0; e < n_eq_; ++e) {
                lse += std::exp(eta_(i, e) - mx);
                lse2 += std::exp(((e == eq_idx) ? eta_new_e : eta_(i, e)) - mx2);
            }
            double num_old = (q == 1) ? 0.0 : eta_(i, q - 2);
            double num_new = (q == 1) ? 0.0 : ((q - 2 == eq_idx) ? eta_new_e : eta_(i, q - 2));
            dll += (num_new - (mx2 + std::log(lse2))) - (num_old - (mx + std::log(lse)));
        }
    }
    double& v = state.params.eq[eq_idx].v[district - 1];
    const double sigma = state.variances.sigma_v[eq_idx];
    const double cand = v + delta;
    double dlp = (v * v - cand * cand) / (2.0 * sigma * sigma);
    bool accepted = std::isfinite(dll + dlp) && std::log(rng_.uniform()) < dll + dlp;
    if (accepted) {
        v = cand;
        for (int i : units) eta_(i, eq_idx) += delta;
        ll_mem_ += dll;
    }
    adapt_block(blk, adapt, accepted);
}

void GibbsSampler::update_regression_block(ChainState& state, bool adapt) {
    for (int e = 0; e < n_eq_; ++e) {
        auto& eff = state.params.eq[e];
        int r = 0;
        if (spec_.link == Link::multinomial_logit) {
            metropolis_scalar(state, blk_reg_[e][r++], e, eff.alpha0, prior_.reg_prior_var,
                              Eigen::VectorXd::Ones(n_), adapt);
        } else {
            for (std::size_t c = 0; c < state.params.cutpoints.size(); ++c)
                metropolis_cutpoint(state, blk_cut_[c], static_cast<int>(c), adapt);
        }
        Eigen::VectorXd col(n_);
        for (int i = 0; i < n_; ++i) col[i] = cov_[i].sex;
        metropolis_scalar(state, blk_reg_[e][r++], e, eff.alpha1, prior_.reg_prior_var, col, adapt);
        if (spec_.use_marital)
            for (int g = 0; g < 3; ++g) {
                for (int i = 0; i < n_; ++i) col[i] = cov_[i].marital[g];
                metropolis_scalar(state, blk_reg_[e][r++], e, eff.gamma[g], prior_.reg_prior_var,
                                  col, adapt);
            }
        for (int i = 0; i < n_; ++i) col[i] = cov_[i].age;
        metropolis_scalar(state, blk_reg_[e][r++], e, eff.beta, prior_.reg_prior_var, col, adapt);
    }
}

void GibbsSampler::update_random_effects(ChainState& state, bool adapt) {
    for (int e = 0; e < n_eq_; ++e)
        for (int d = 1; d <= D_; ++d) metropolis_district(state, blk_v_[e][d - 1], e, d, adapt);
}

void GibbsSampler::update_spline_coeffs(ChainState& state, bool adapt) {
    for (int e = 0; e < n_eq_; ++e) {
        const double sb = state.variances.sigma_b[e];
        for (int k = 0; k < K_; ++k) {
            double prior_var = sb * sb / design_.prior_weight[k];
            metropolis_scalar(state, blk_w_[e][k], e, state.params.eq[e].w[k], prior_var,
                              spline_rows_.col(k), adapt);
        }
    }
}

void GibbsSampler::update_variances(ChainState& state) {
    for (int e = 0; e < n_eq_; ++e) {
        if (D_ > 0) {
            double ss = state.params.eq[e].v.squaredNorm();
            state.variances.sigma_v[e] =
                draw_sd(prior_.sigma_v_prior, D_, ss, state.variances.sigma_v[e], rng_);
        }
        if (K_ > 0) {
            double ss = state.params.eq[e].w.cwiseAbs2().dot(design_.prior_weight);
            state.variances.sigma_b[e] =
                draw_sd(prior_.sigma_b_prior, K_, ss, state.variances.sigma_b[e], rng_);
        }
    }
}

void GibbsSampler::relabel_by_severity(ChainState& state) {
    if (spec_.link != Link::multinomial_logit || C_ == 1) return;
    auto score = severity_scores(state.theta);
    if (std::is_sorted(score.begin(), score.end())) return;

    std::vector<int> perm(C_);  // new class j holds old class perm[j]
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](int a, int b) { return score[a] < score[b]; });
    std::vector<int> inv(C_);
    for (int j = 0; j < C_; ++j) inv[perm[j]] = j;

    std::vector<std::vector<Eigen::VectorXd>> theta_new(C_);
    for (int j = 0; j < C_; ++j) theta_new[j] = state.theta.theta[perm[j]];
    state.theta.theta = theta_new;
    for (int& q : state.memberships) q = inv[q - 1] + 1;

    // re-express the logit equations against the new reference class: build
    // the full C-row coefficient table (class 1 row is zero), permute, and
    // subtract the new reference row from every row
    auto full = [&](auto get) {
        std::vector<double> rows(C_, 0.0);
        for (int c = 1; c < C_; ++c) rows[c] = get(state.params.eq[c - 1]);
        std::vector<double> out(C_);
        for (int j = 0; j < C_; ++j) out[j] = rows[perm[j]];
        for (int j = C_ - 1; j >= 0; --j) out[j] -= out[0];
        return out;
    };
    auto a0 = full([](const Effects& e) { return e.alpha0; });
    auto a1 = full([](const Effects& e) { return e.alpha1; });
    auto bt = full([](const Effects& e) { return e.beta; });
    std::array<std::vector<double>, 3> gm;
    for (int g = 0; g < 3; ++g) gm[g] = full([g](const Effects& e) { return e.gamma[g]; });
    std::vector<Eigen::VectorXd> wrows(C_, Eigen::VectorXd::Zero(K_)),
        vrows(C_, Eigen::VectorXd::Zero(D_));
    for (int c = 1; c < C_; ++c) {
        wrows[c] = state.params.eq[c - 1].w;
        vrows[c] = state.params.eq[c - 1].v;
    }
    std::vector<Eigen::VectorXd> wp(C_), vp(C_);
    for (int j = 0; j < C_; ++j) {
        wp[j] = wrows[perm[j]];
        vp[j] = vrows[perm[j]];
    }
    for (int j = C_ - 1; j >= 0; --j) {
        wp[j] -= wp[0];
        vp[j] -= vp[0];
    }
    std::vector<double> sv(n_eq_), sb(n_eq_);
    for (int j = 1; j < C_; ++j) {
        int src = perm[j] >= 1 ? perm[j] - 1 : perm[0] - 1;
        if (src < 0) src = j - 1;  // old reference moved; keep slot's own sigma
        sv[j - 1] = state.variances.sigma_v[src];
        sb[j - 1] = state.variances.sigma_b[src];
    }
    for (int j = 1; j < C_; ++j) {
        auto& e = state.params.eq[j - 1];
        e.alpha0 = a0[j];
        e.alpha1 = a1[j];
        e.beta = bt[j];
        for (int g = 0; g < 3; ++g) e.gamma[g] = gm[g][j];
        e.w = wp[j];
        e.v = vp[j];
    }
    state.variances.sigma_v = sv;
    state.variances.sigma_b = sb;

    rebuild_predictor_cache(state);
    rebuild_class_loglik(state);
    ll_mem_ = membership_loglik(state);
}

void GibbsSampler::sweep(ChainState& state, bool adapt) {
    update_memberships(state);
    update_item_probs(state);
    relabel_by_severity(state);
    update_regression_block(state, adapt);
    update_random_effects(state, adapt);
    update_spline_coeffs(state, adapt);
    update_variances(state);
    for (std::size_t b = 0; b < blocks_.size(); ++b) state.proposal_scales[b] = blocks_[b].scale;
}

double GibbsSampler::log_posterior(const ChainState& state) const {
    double lp = ll_mem_;
    for (int i = 0; i < n_; ++i)
        lp += log_pattern_prob_given_class(state.theta, data_.units[i].responses,
                                           state.memberships[i]);
    // theta prior (unnormalized)
    if (prior_.dirichlet_conc != 1.0)
        for (int c = 0; c < C_; ++c)
            for (int t = 0; t < T_; ++t)
                lp += (prior_.dirichlet_conc - 1.0) *
                      state.theta.theta[c][t].array().max(1e-300).log().sum();
    auto sd_log_prior = [](const SdPrior& p, double sigma) {
        switch (p.type) {
            case SdPriorType::uniform: return (sigma > 0 && sigma < p.B) ? 0.0 : -kInf;
            case SdPriorType::half_cauchy: {
                double r = sigma / p.scale;
                return -std::log1p(r * r);
            }
            case SdPriorType::inv_gamma:
                return -2.0 * (p.a + 1.0) * std::log(sigma) - p.b / (sigma * sigma);
        }
        return 0.0;
    };
    for (int e = 0; e < n_eq_; ++e) {
        const auto& eff = state.params.eq[e];
        double rv = prior_.reg_prior_var;
        lp += -(eff.alpha0 * eff.alpha0 + eff.alpha1 * eff.alpha1 + eff.beta * eff.beta) / (2 * rv);
        if (spec_.use_marital) lp += -eff.gamma.squaredNorm() / (2 * rv);
        double sv = state.variances.sigma_v[e], sb = state.variances.sigma_b[e];
        if (D_ > 0) lp += -eff.v.squaredNorm() / (2 * sv * sv) - D_ * std::log(sv);
        if (K_ > 0)
            lp += -eff.w.cwiseAbs2().dot(design_.prior_weight) / (2 * sb * sb) - K_ * std::log(sb);
        lp += sd_log_prior(prior_.sigma_v_prior, sv) + sd_log_prior(prior_.sigma_b_prior, sb);
    }
    if (spec_.link == Link::proportional_odds)
        for (double c : state.params.cutpoints) lp += -c * c / (2 * prior_.reg_prior_var);
    return lp;
}

void GibbsSampler::record_draw(ChainOutput& out, long row, const ChainState& state) {
    int j = 0;
    auto& d = out.draws;
    if (spec_.link == Link::proportional_odds)
        for (double c : state.params.cutpoints) d(row, j++) = c;
    for (int e = 0; e < n_eq_; ++e) {
        const auto& eff = state.params.eq[e];
        if (spec_.link == Link::multinomial_logit) d(row, j++) = eff.alpha0;
        d(row, j++) = eff.alpha1;
        if (spec_.use_marital)
            for (int g = 0; g < 3; ++g) d(row, j++) = eff.gamma[g];
        d(row, j++) = eff.beta;
        for (int k = 0; k < K_; ++k) d(row, j++) = eff.w[k];
        for (int dd = 0; dd < D_; ++dd) d(row, j++) = eff.v[dd];
        d(row, j++) = state.variances.sigma_b[e];
        d(row, j++) = state.variances.sigma_v[e];
    }
    int jt = 0;
    for (int c = 0; c < C_; ++c)
        for (int t = 0; t < T_; ++t)
            for (int h = 0; h < state.theta.theta[c][t].size(); ++h)
                out.theta_draws(row, jt++) = state.theta.theta[c][t][h];
    out.deviance[row] = complete_data_deviance(data_, state.memberships, state.theta);
    out.log_post[row] = log_posterior(state);
}

ChainOutput GibbsSampler::run(const SamplerConfig& config,
                              const std::optional<std::filesystem::path>& checkpoint_path) {
    config.validate();
    ChainOutput out;
    out.layout = layout();
    out.config = config;
    out.seed = seed_;

    if (spec_.link == Link::proportional_odds && C_ > 1)
        for (int c = 1; c < C_; ++c) out.param_names.push_back("cutpoint[" + std::to_string(c) + "]");
    for (int e = 0; e < n_eq_; ++e) {
        std::string sfx = spec_.link == Link::multinomial_logit ? ".c" + std::to_string(e + 2) : "";
        if (spec_.link == Link::multinomial_logit) out.param_names.push_back("alpha0" + sfx);
        out.param_names.push_back("alpha1" + sfx);
        if (spec_.use_marital)
            for (const char* g : {"gamma.married", "gamma.separated", "gamma.widow"})
                out.param_names.push_back(g + sfx);
        out.param_names.push_back("beta" + sfx);
        for (int k = 1; k <= K_; ++k) out.param_names.push_back("w[" + std::to_string(k) + "]" + sfx);
        for (int d = 1; d <= D_; ++d) out.param_names.push_back("v[" + std::to_string(d) + "]" + sfx);
        out.param_names.push_back("sigma_b" + sfx);
        out.param_names.push_back("sigma_v" + sfx);
    }
    for (int c = 1; c <= C_; ++c)
        for (int t = 0; t < T_; ++t)
            for (int h = 1; h <= data_.schema.items[t].categories; ++h)
                out.theta_names.push_back("theta.c" + std::to_string(c) + "." +
                                          data_.schema.items[t].name + "." + std::to_string(h));

    const long kept = config.kept_draws();
    out.draws.resize(kept, static_cast<Eigen::Index>(out.param_names.size()));
    out.theta_draws.resize(kept, static_cast<Eigen::Index>(out.theta_names.size()));
    out.deviance.resize(kept);
    out.log_post.resize(kept);

    ChainState state = init_state();
    long row = 0;
    for (long iter = 1; iter <= config.iterations; ++iter) {
        const bool adapt = iter <= config.burn_in;
        sweep(state, adapt);
        if (!std::isfinite(ll_mem_)) {
            std::string where = "iteration " + std::to_string(iter);
            if (checkpoint_path) {
                write_checkpoint(*checkpoint_path, state, layout(), iter);
                throw NumericalError("non-finite posterior at " + where + "; checkpoint written to " +
                                     checkpoint_path->string());
            }
            throw NumericalError("non-finite posterior at " + where);
        }
        if (iter > config.burn_in && (iter - config.burn_in) % config.thin == 0) {
            state.log_posterior = log_posterior(state);
            record_draw(out, row++, state);
        }
    }

    for (const auto& b : blocks_) {
        out.acceptance.block_names.push_back(b.name);
        out.acceptance.proposals.push_back(b.proposals);
        out.acceptance.accepts.push_back(b.accepts);
        out.acceptance.final_scales.push_back(b.scale);
    }
    return out;
}

std::vector<ChainOutput> run_chains(const ModelSpec& spec, const ItemResponseMatrix& data,
                                    const SplineDesign& design, const PriorSpec& prior,
                                    const SamplerConfig& config,
                                    const std::optional<std::filesystem::path>& checkpoint_dir) {
    std::vector<ChainOutput> out;
    for (int k = 0; k < config.chains; ++k) {
        GibbsSampler sampler(spec, data, design, prior, derive_seed(config.seed, k));
        std::optional<std::filesystem::path> ckpt;
        if (checkpoint_dir)
            ckpt = *checkpoint_dir / ("checkpoint_chain" + std::to_string(k) + ".json");
        out.push_back(sampler.run(config, ckpt));
    }
    return out;
}

MembershipParams ChainOutput::params_at(long m) const {
    MembershipParams p;
    p.link = layout.link;
    p.n_classes = layout.n_classes;
    p.use_marital = layout.use_marital;
    const int C = layout.n_classes;
    if (C == 1) return p;
    const int n_eq = layout.link == Link::proportional_odds ? 1 : C - 1;
    int j = 0;
    if (layout.link == Link::proportional_odds)
        for (int c = 1; c < C; ++c) p.cutpoints.push_back(draws(m, j++));
    p.eq.resize(n_eq);
    for (int e = 0; e < n_eq; ++e) {
        auto& eff = p.eq[e];
        if (layout.link == Link::multinomial_logit) eff.alpha0 = draws(m, j++);
        eff.alpha1 = draws(m, j++);
        if (layout.use_marital)
            for (int g = 0; g < 3; ++g) eff.gamma[g] = draws(m, j++);
        eff.beta = draws(m, j++);
        eff.w.resize(layout.n_knots);
        for (int k = 0; k < layout.n_knots; ++k) eff.w[k] = draws(m, j++);
        eff.v.resize(layout.n_districts);
        for (int d = 0; d < layout.n_districts; ++d) eff.v[d] = draws(m, j++);
        j += 2;  // sigma_b, sigma_v
    }
    return p;
}

ItemProbTable ChainOutput::theta_at(long m) const {
    ItemProbTable t;
    t.theta.resize(layout.n_classes);
    int j = 0;
    for (int c = 0; c < layout.n_classes; ++c) {
        t.theta[c].resize(layout.n_items());
        for (int it = 0; it < layout.n_items(); ++it) {
            t.theta[c][it].resize(layout.item_categories[it]);
            for (int h = 0; h < layout.item_categories[it]; ++h)
                t.theta[c][it][h] = theta_draws(m, j++);
        }
    }
    return t;
}

}  // namespace lcsae
