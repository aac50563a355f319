#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lcsae/basis.hpp"
#include "lcsae/data.hpp"
#include "lcsae/model.hpp"
#include "lcsae/rng.hpp"

namespace lcsae {

struct SamplerError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when the chain hits a non-finite posterior; the checkpoint written
/// by run_chain (if a checkpoint path was configured) is named in the message.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SdPriorType { uniform, half_cauchy, inv_gamma };

struct SdPrior {
    SdPriorType type = SdPriorType::uniform;
    double B = 16.0;     // uniform upper bound
    double scale = 1.0;  // half-Cauchy S
    double a = 0.01;     // inverse-gamma shape/rate on sigma^2
    double b = 0.01;
};

struct PriorSpec {
    double dirichlet_conc = 1.0;
    double reg_prior_var = 100.0;
    SdPrior sigma_b_prior;
    SdPrior sigma_v_prior;

    void validate() const;
};

struct ModelSpec {
    int n_classes = 5;
    Link link = Link::proportional_odds;
    bool use_marital = false;
    int n_knots = 12;
    SplineBasisKind basis_kind = SplineBasisKind::demmler_reinsch;
};

struct SamplerConfig {
    long iterations = 120000;
    long burn_in = 15000;
    int thin = 3;
    int chains = 1;
    std::uint64_t seed = 0;
    int adapt_window = 50;
    double target_accept = 0.44;

    void validate() const;
    long kept_draws() const { return (iterations - burn_in) / thin; }
};

struct ChainState {
    std::vector<int> memberships;  // 1-based classes, one per unit
    ItemProbTable theta;
    MembershipParams params;
    VarianceComponents variances;
    double log_posterior = 0.0;
    std::vector<double> proposal_scales;  // per adaptive block, same order as block names
};

struct AcceptanceLedger {
    std::vector<std::string> block_names;
    std::vector<long> proposals;
    std::vector<long> accepts;
    std::vector<double> final_scales;
};

/// Shape metadata needed to reconstruct parameter structures from flat rows.
struct ChainLayout {
    Link link = Link::proportional_odds;
    int n_classes = 1;
    int n_knots = 0;
    int n_districts = 0;
    bool use_marital = false;
    std::vector<int> item_categories;  // H_t

    int n_items() const { return static_cast<int>(item_categories.size()); }
};

struct ChainOutput {
    ChainLayout layout;
    SamplerConfig config;
    std::uint64_t seed = 0;

    std::vector<std::string> param_names;  // membership params + variance components
    Eigen::MatrixXd draws;                 // kept x P
    std::vector<std::string> theta_names;
    Eigen::MatrixXd theta_draws;  // kept x (C * sum H_t)
    Eigen::VectorXd deviance;     // kept
    Eigen::VectorXd log_post;     // kept
    AcceptanceLedger acceptance;

    long n_kept() const { return draws.rows(); }
    MembershipParams params_at(long m) const;
    ItemProbTable theta_at(long m) const;
};

/// Metropolis-within-Gibbs sampler for the latent class small area model:
/// exact Gibbs for memberships and item probabilities, scalar random-walk
/// Metropolis for regression/spline/random-effect parameters, slice sampling
/// for the standard deviations.
class GibbsSampler {
  public:
    GibbsSampler(const ModelSpec& spec, const ItemResponseMatrix& data, const SplineDesign& design,
                 const PriorSpec& prior, std::uint64_t seed);

    ChainState init_state();

    void update_memberships(ChainState& state);
    void update_item_probs(ChainState& state);
    void update_regression_block(ChainState& state, bool adapt);
    void update_random_effects(ChainState& state, bool adapt);
    void update_spline_coeffs(ChainState& state, bool adapt);
    void update_variances(ChainState& state);

    /// One full sweep in the fixed order: memberships -> theta -> regression
    /// -> random effects -> spline -> variances (+ relabeling for the logit
    /// variant). Proposal scales adapt only while `adapt` is true.
    void sweep(ChainState& state, bool adapt);

    /// Runs iterations with burn-in and thinning. On a non-finite posterior,
    /// writes a checkpoint to checkpoint_path (when given) and throws
    /// NumericalError.
    ChainOutput run(const SamplerConfig& config,
                    const std::optional<std::filesystem::path>& checkpoint_path = std::nullopt);

    double membership_loglik(const ChainState& state) const;  // complete-data, current caches
    double log_posterior(const ChainState& state) const;
    std::vector<std::string> block_names() const;
    ChainLayout layout() const;

  private:
    struct Block {
        std::string name;
        double scale = 0.5;
        long proposals = 0, accepts = 0;
        long win_proposals = 0, win_accepts = 0;
        int batches = 0;
    };

    void rebuild_predictor_cache(const ChainState& state);
    void rebuild_class_loglik(const ChainState& state);
    double unit_log_membership(const ChainState& state, int i, int cls) const;
    void metropolis_scalar(ChainState& state, int block_idx, int eq_idx, double& value,
                           double prior_var, const Eigen::VectorXd& column, bool adapt);
    void metropolis_cutpoint(ChainState& state, int block_idx, int cut_idx, bool adapt);
    void metropolis_district(ChainState& state, int block_idx, int eq_idx, int district, bool adapt);
    void adapt_block(Block& blk, bool adapt, bool accepted);
    void relabel_by_severity(ChainState& state);
    void record_draw(ChainOutput& out, long row, const ChainState& state);
    std::vector<double> severity_scores(const ItemProbTable& theta) const;

    ModelSpec spec_;
    const ItemResponseMatrix& data_;
    SplineDesign design_;
    PriorSpec prior_;
    Rng rng_;
    std::uint64_t seed_;

    int n_ = 0, C_ = 0, T_ = 0, D_ = 0, K_ = 0, n_eq_ = 0;
    std::vector<CovariateVector> cov_;
    std::vector<int> district_;
    std::vector<std::vector<int>> district_units_;
    Eigen::MatrixXd spline_rows_;  // n x K

    // caches, valid for the current state
    Eigen::MatrixXd eta_;          // n x n_eq shared predictors (cutpoints excluded for PO)
    Eigen::MatrixXd class_loglik_; // n x C log P(Y_i | class)
    double ll_mem_ = 0.0;          // sum_i log P(Q_i | params)

    std::vector<Block> blocks_;
    // block ids: cutpoints (PO), per-equation regression scalars, district
    // effects, and spline coefficients
    std::vector<int> blk_cut_;
    std::vector<std::vector<int>> blk_reg_;  // [eq][alpha0?,alpha1,gamma...,beta]
    std::vector<std::vector<int>> blk_v_;    // [eq][district]
    std::vector<std::vector<int>> blk_w_;    // [eq][k]
};

/// Runs `config.chains` chains with seeds derived from config.seed.
std::vector<ChainOutput> run_chains(const ModelSpec& spec, const ItemResponseMatrix& data,
                                    const SplineDesign& design, const PriorSpec& prior,
                                    const SamplerConfig& config,
                                    const std::optional<std::filesystem::path>& checkpoint_dir =
                                        std::nullopt);

/// Slice sampler for a scalar with log-density f on (lo, hi); exposed for the
/// variance full-conditional tests.
double slice_sample(const std::function<double(double)>& log_f, double x0, double lo, double hi,
                    double width, Rng& rng);

/// Draws sigma from its full conditional: prior(sigma) * sigma^-m * exp(-ss/(2 sigma^2)).
double draw_sd(const SdPrior& prior, int m, double ss, double current, Rng& rng);

}  // namespace lcsae
